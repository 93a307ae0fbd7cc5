""" The **fedlec_simulator.utils.lib** module provides common functions that handle internal aspects of the
library, such as: the library's folders and configuration files, logging, seeded random streams and progress bars
for time-consuming federated runs.
"""

# Import python libs
import os
import json
import logging
import logging.config
from enum import Enum
from functools import lru_cache

# Import third-party libs
import numpy as np
from tqdm import tqdm


class ModeOfUse(Enum):
    """
        Controls how a batch of experiments reacts to a failing run:
        - EXCEPTION_MODE: the exception is raised and the remaining runs are not executed
        - SILENT_MODE (default): the failure is logged, the remaining runs are executed and the batch is reported
        as failed at the end. This mode is useful when running large sweeps unattended.
    """
    EXCEPTION_MODE = 1
    SILENT_MODE = 2


LOGGER_NAME = "fedlec-simulator"
"""
Name of the logger shared by every module of the library.
"""


def get_app_path():
    """
    Gets the library's utils directory, where the logging configuration file is stored.

    Returns:
        (str): the absolute path of the library's utils directory.
    """
    return os.path.dirname(os.path.abspath(__file__))


@lru_cache(maxsize=None)
def _configure_logging():
    logging.config.fileConfig(fname=os.path.join(get_app_path(), 'logger.conf'), disable_existing_loggers=False)


def get_logger():
    """
    Gets the logger object as a way to standardize the output messages generated in the library.
    The logging messages are directed to the standard error output according to the log configuration
    available at logger.conf. The configuration file is read only once per process.

    Returns:
        (logging.Logger): a logger object that handles output messages.

    """
    _configure_logging()
    return logging.getLogger(LOGGER_NAME)


def load_json_file(file_to_read):
    """
    Reads a json file and returns its content as a python dictionary.

    Args:
        file_to_read (str): complete path and name of the json file to read.

    Returns:
        (dict): the content of the json file as a python dictionary.

    Raises:
        json.JSONDecodeError: if the file is not a valid json document.

    Examples:
        >>> json_content = load_json_file('/home/User/experiments/fedlec_cnum2.json')

    """

    with open(file_to_read, encoding="utf-8") as json_file:
        dict_content = json.load(json_file)
    return dict_content


def save_json_file(dict_content, file_to_write):
    """
    Writes a python dictionary as an indented json file with sorted keys, so that identical content always
    produces identical bytes.

    Args:
        dict_content (dict): the content to write.
        file_to_write (str): complete path and name of the json file.
    """
    with open(file_to_write, "w", encoding="utf-8", newline="\n") as json_file:
        json.dump(dict_content, json_file, indent=2, sort_keys=True)
        json_file.write("\n")


def get_random_generator(*seed_keys):
    """
    Gets an independent random stream for the given integer keys, e.g. (seed, round, client_id). Streams built
    from the same keys are bit-identical, no matter in which order or on which worker they are consumed.

    Returns:
        (numpy.random.Generator): the seeded random generator.
    """
    return np.random.default_rng([int(key) for key in seed_keys])


def get_progress_bar(it_range, total_rows, desc='Wait for training...', disable=False):
    """
    Gets a progress bar that counts from the initial value of the iterable object 'it_range' to its end.

    Returns:
        (iterable object): any iterable object.

    """
    # The progress bar will only work if it is relevant (if total_rows > 1)
    return tqdm(it_range, total=total_rows,
                disable=disable or total_rows <= 1,
                desc=desc,
                bar_format='{desc}{percentage:3.0f}%|{bar:50}{r_bar}')
