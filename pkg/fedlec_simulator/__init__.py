""" Desk-scale federated learning simulator for spiking neural networks with label-skew calibrated local training. """

__version__ = "0.1.0"
