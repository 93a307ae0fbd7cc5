""" Custom exceptions raised by the local training objectives of the **calibration** package. """

from fedlec_simulator.utils.error_handler import FedLecSimulatorError


class NonPositivePrior(FedLecSimulatorError):
    """The label-prior estimate contains a zero or negative entry."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "The label prior of class <{0}> is not strictly positive.".format(args[0])


class LogitShapeMismatch(FedLecSimulatorError):
    """Logits, labels or teacher logits do not agree in shape."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "Loss <{0}> received incompatible shapes {1} and {2}.".format(args[0], args[1], args[2])


class MissingTeacherLogits(FedLecSimulatorError):
    """The FedLEC objective needs the logits of the frozen global model."""

    message = "The fedlec objective requires the logits of the round-start global model."


class InvalidCalibrationConfig(FedLecSimulatorError):
    """A loss coefficient is negative or the variant is unknown."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "Invalid calibration setting <{0}>: {1}.".format(args[0], args[1])
