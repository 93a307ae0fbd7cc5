""" This package provides internal functions that handle common functionalities shared among all modules in the library:
the library's logger, the progress bars shown during long federated runs, json helpers and the root exception type.
"""
