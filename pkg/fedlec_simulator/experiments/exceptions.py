""" Custom exceptions raised while reading experiment files and reporting on completed runs. """

from fedlec_simulator.utils.error_handler import FedLecSimulatorError


class ConfigError(FedLecSimulatorError):
    """Base class of the errors found in an experiment file."""


class ConfigParseError(ConfigError):
    """The experiment file cannot be read or does not parse as TOML or JSON."""

    def __init__(self, *args):
        super().__init__(*args)
        self.path = args[0]
        self.line = args[1]
        if self.line is None:
            self.message = "The experiment file <{0}> cannot be parsed: {1}.".format(args[0], args[2])
        else:
            self.message = "The experiment file <{0}> cannot be parsed at line {1}: {2}.".format(
                args[0], args[1], args[2])


class ConfigValidationError(ConfigError):
    """A setting of the experiment file is unknown, missing, mistyped or out of range."""

    def __init__(self, *args):
        super().__init__(*args)
        self.field = args[0]
        self.message = "Invalid setting <{0}>: {1}.".format(args[0], args[1])


class MismatchedPartitions(FedLecSimulatorError):
    """Runs trained on different partitions cannot be compared."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "Runs on different partitions cannot be compared: {0}.".format(", ".join(args[0]))


class UnpairedRuns(FedLecSimulatorError):
    """The compared runs do not share the same seeds or there is less than two runs."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "The runs cannot be paired: {0}.".format(args[0])


class IncompleteRun(FedLecSimulatorError):
    """A run directory misses one of its output files."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "The run directory <{0}> has no {1}.".format(args[0], args[1])
