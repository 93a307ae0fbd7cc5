""" Custom exceptions raised by the tensor and dense-layer primitives of the **nn** package. """

from fedlec_simulator.utils.error_handler import FedLecSimulatorError


class ShapeMismatch(FedLecSimulatorError):
    """The shapes of the operands are not compatible."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "Operation <{0}> received incompatible shapes {1} and {2}.".format(args[0], args[1], args[2])


class NonFiniteTensor(FedLecSimulatorError):
    """A tensor contains NaN or infinite values."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "The tensor <{0}> contains NaN or infinite values.".format(args[0])


class MissingForwardCache(FedLecSimulatorError):
    """Backward was requested before any forward pass."""

    message = "Backward was called on a dense layer without a preceding forward pass."


class LayoutMismatch(FedLecSimulatorError):
    """Two parameter vectors do not share the same layout."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "Parameter layouts differ in <{0}>.".format(args[0])


class InvalidLearningRate(FedLecSimulatorError):
    """The learning rate must be a positive number."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "The learning rate <{0}> is not a positive number.".format(args[0])
