""" Custom exceptions raised while loading, synthesizing and partitioning datasets. """

from fedlec_simulator.utils.error_handler import FedLecSimulatorError


class IdxFormatError(FedLecSimulatorError):
    """The IDX file has a wrong magic number or is truncated."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "The IDX file <{0}> is invalid: {1}.".format(args[0], args[1])


class IdxCountMismatch(FedLecSimulatorError):
    """The image and label files hold a different number of items."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "The IDX files hold {0} images but {1} labels.".format(args[0], args[1])


class InvalidDatasetArgument(FedLecSimulatorError):
    """A dataset or generator argument is out of range."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "Invalid dataset argument <{0}>: {1}.".format(args[0], args[1])


class InfeasiblePartition(FedLecSimulatorError):
    """The requested label-skew partition cannot be built for this dataset."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "The partition cannot be built: {0}.".format(args[0])


class InvalidPartitionPlan(FedLecSimulatorError):
    """The shards are not disjoint, not exhaustive or contain an empty shard."""

    def __init__(self, *args):
        super().__init__(*args)
        self.message = "Invalid partition plan: {0}.".format(args[0])


class EmptyShard(FedLecSimulatorError):
    """Label statistics were requested for an empty shard."""

    message = "Label statistics require a non-empty shard."
