""" This package provides the minimal numeric core of the simulator: float64 tensors, dense layers with explicit
stored-activation backpropagation, flat parameter vectors and the SGD update.
"""
