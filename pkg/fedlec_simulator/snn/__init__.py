""" This package provides the spiking side of the simulator: LIF neuron dynamics with hard reset, the arc-tangent
surrogate gradient and a spiking multilayer perceptron trained with backpropagation through time.
"""
