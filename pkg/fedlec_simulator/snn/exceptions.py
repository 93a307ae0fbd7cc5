""" Custom exceptions raised by the spiking neuron and network modules of the **snn** package. """

from fedlec_simulator.utils.error_handler import FedLecSimulatorError


class InvalidNeuronParameters(FedLecSimulatorError):
    """The LIF constants violate tau > 1 or v_threshold > v_reset."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "Invalid LIF parameters: {0}.".format(args[0])


class NeuronShapeMismatch(FedLecSimulatorError):
    """The input current does not match the shape of the membrane potentials."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "Input current of shape {0} does not match the membrane state of shape {1}.".format(
            args[0], args[1])


class MissingBpttCache(FedLecSimulatorError):
    """Backward through time was requested before a forward pass was cached."""

    message = "snn_backward was called without a cached forward pass."


class InvalidArchitecture(FedLecSimulatorError):
    """The network needs an input size, at least one hidden block, a class count and T >= 1."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "Invalid spiking network architecture: {0}.".format(args[0])
