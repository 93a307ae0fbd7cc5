""" The **federation** package runs the simulated federation: the typed experiment configuration, the round loop
(client sampling, broadcast, local training, weighted aggregation and evaluation) and the checkpoint format of the
global parameters.
"""
