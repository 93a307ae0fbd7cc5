""" Custom exceptions raised by the round loop, the experiment configuration and the checkpoint files. """

from fedlec_simulator.utils.error_handler import FedLecSimulatorError


class EmptyUpdateList(FedLecSimulatorError):
    """Aggregation needs at least one client update."""

    message = "The aggregation received no client update."


class InvalidExperimentConfig(FedLecSimulatorError):
    """An experiment setting has a wrong type or is out of range."""

    def __init__(self, *args):
        super().__init__(*args)
        self.field = args[0]
        self.reason = args[1]
        self.message = "Invalid experiment setting <{0}>: {1}.".format(args[0], args[1])


class CheckpointFormatError(FedLecSimulatorError):
    """The checkpoint file is not a valid parameter snapshot."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "The checkpoint <{0}> cannot be read: {1}.".format(args[0], args[1])
