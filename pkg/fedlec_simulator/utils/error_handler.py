""" General custom exception handler for the fedlec-simulator library. Each package contains an exception
module with customized exception classes based on this FedLecSimulatorError() class.
"""


class FedLecSimulatorError(Exception):
    """Top-level error type for the entire library. This exception must not be raised.
    Instead, it is expected to use one of its subclasses. """

    message = ""

    def __str__(self):
        """Return the exception message."""
        if self.message:
            return 'FedLEC-Simulator (Error) - ' + self.message
        else:
            return 'FedLEC-Simulator error has being raised - no details available.'
