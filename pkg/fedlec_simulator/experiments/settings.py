""" The **experiments.settings** module reads experiment files.

An experiment file is a TOML document (``.toml``) or a JSON object (any other extension) with flat keys: the settings
of ``ExperimentConfig`` plus an optional ``sweep`` table whose values are lists. Each combination of the sweep lists
overrides the base settings and becomes one run, stored in a sub-directory named after its overrides, e.g.
``algorithm=fedlec__seed=1``.

Examples:
    .. code-block:: toml

        dataset = "blobs"
        algorithm = "fedlec"
        partition = "dirichlet"
        alpha = 0.1

        [sweep]
        algorithm = ["fedavg", "fedlec"]
        seed = [0, 1, 2]

    .. code-block:: json

        {
          "dataset": "blobs",
          "algorithm": "fedlec",
          "partition": "dirichlet",
          "alpha": 0.1,
          "sweep": {"algorithm": ["fedavg", "fedlec"], "seed": [0, 1, 2]}
        }

"""

# Import python libraries
import itertools
import json
import os
import re
import sys

# Import third-party libraries
if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

# Import internal libraries
from fedlec_simulator.data.dataset import generate_blobs, load_idx
from fedlec_simulator.experiments import exceptions as custom_exception
from fedlec_simulator.federation import exceptions as federation_exception
from fedlec_simulator.federation.config import DATASET_BLOBS, ExperimentConfig

SWEEP_KEY = "sweep"
IDX_PATH_KEYS = ("train_images", "train_labels", "test_images", "test_labels")
TOML_EXTENSION = ".toml"

_TOML_LINE_PATTERN = re.compile(r"line (\d+)")


def read_settings(path):
    """
    Reads the raw settings of an experiment file: TOML when the extension is ``.toml``, JSON otherwise.

    Raises:
        ConfigParseError: if the file cannot be read, does not parse (the error gives the line number) or is
            not a JSON object.
    """
    if str(path).lower().endswith(TOML_EXTENSION):
        return _read_toml(path)
    try:
        with open(path, encoding="utf-8") as config_file:
            settings = json.load(config_file)
    except json.JSONDecodeError as error:
        raise custom_exception.ConfigParseError(path, error.lineno, error.msg)
    except OSError as error:
        raise custom_exception.ConfigParseError(path, None, error.strerror or str(error))
    if not isinstance(settings, dict):
        raise custom_exception.ConfigParseError(path, 1, "expected a JSON object")
    return settings


def _read_toml(path):
    try:
        with open(path, "rb") as config_file:
            return tomllib.load(config_file)
    except tomllib.TOMLDecodeError as error:
        # Older decoders only carry the position inside the message
        lineno = getattr(error, "lineno", None)
        if lineno is None:
            match = _TOML_LINE_PATTERN.search(str(error))
            lineno = int(match.group(1)) if match else None
        raise custom_exception.ConfigParseError(path, lineno, getattr(error, "msg", None) or str(error))
    except OSError as error:
        raise custom_exception.ConfigParseError(path, None, error.strerror or str(error))


def build_config(settings, base_dir=None):
    """
    Validates a flat settings dictionary (without the sweep). Relative IDX paths are resolved against
    ``base_dir``.

    Raises:
        ConfigValidationError: naming the offending setting.
    """
    settings = dict(settings)
    if base_dir is not None:
        for key in IDX_PATH_KEYS:
            value = settings.get(key)
            if isinstance(value, str) and value and not os.path.isabs(value):
                settings[key] = os.path.normpath(os.path.join(base_dir, value))
    try:
        return ExperimentConfig.from_dict(settings)
    except federation_exception.InvalidExperimentConfig as error:
        raise custom_exception.ConfigValidationError(error.field, error.reason)


def load_experiment(path):
    """
    Reads an experiment file.

    Returns:
        (tuple): ``(config, sweep)`` where ``sweep`` maps setting keys to their lists of values (empty for a
        single run).

    Raises:
        ConfigParseError, ConfigValidationError: on any problem of the file.
    """
    settings = read_settings(path)
    sweep = settings.pop(SWEEP_KEY, {})
    if not isinstance(sweep, dict):
        raise custom_exception.ConfigValidationError(SWEEP_KEY, "expected a mapping of setting keys to lists")
    known = set(ExperimentConfig.keys())
    for key, values in sweep.items():
        if key not in known:
            raise custom_exception.ConfigValidationError("{0}.{1}".format(SWEEP_KEY, key), "unknown key")
        if not isinstance(values, list) or not values:
            raise custom_exception.ConfigValidationError("{0}.{1}".format(SWEEP_KEY, key),
                                                         "expected a non-empty list")
    cfg = build_config(settings, os.path.dirname(os.path.abspath(path)))
    return cfg, sweep


def parse_config(path):
    """
    Reads and validates the base configuration of an experiment file. Keys missing from the file take their
    documented defaults; unknown keys are rejected.

    Parameters:
        path (str): path of the TOML or JSON experiment file.

    Returns:
        (ExperimentConfig): the validated configuration.

    Raises:
        ConfigParseError: with the line number of a syntax error.
        ConfigValidationError: naming the offending setting.

    Examples:
        >>> cfg = parse_config("experiments/cnum2.json")

    """
    return load_experiment(path)[0]


def apply_overrides(cfg, overrides):
    """
    Returns ``cfg`` with the given experiment-file keys replaced.

    Raises:
        ConfigValidationError: if an override is invalid.
    """
    try:
        return cfg.with_overrides(overrides)
    except federation_exception.InvalidExperimentConfig as error:
        raise custom_exception.ConfigValidationError(error.field, error.reason)


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return "{0:g}".format(value)
    if isinstance(value, (list, tuple)):
        return "-".join(format_value(item) for item in value)
    return str(value)


def run_name(overrides):
    """
    Name of the run directory of a sweep combination: ``key=value`` pairs joined by ``__``.
    """
    return "__".join("{0}={1}".format(key, format_value(value)) for key, value in overrides.items())


def expand_sweep(cfg, sweep):
    """
    Expands the cartesian product of the sweep lists, in file order.

    Returns:
        (list): ``(run_name, config)`` pairs; a single ``("", cfg)`` pair when the sweep is empty.

    Raises:
        ConfigValidationError: if a combination is invalid.
    """
    if not sweep:
        return [("", cfg)]
    keys = list(sweep)
    runs = []
    for combination in itertools.product(*(sweep[key] for key in keys)):
        overrides = dict(zip(keys, combination))
        runs.append((run_name(overrides), apply_overrides(cfg, overrides)))
    return runs


def load_datasets(cfg):
    """
    Builds the training and test datasets described by ``cfg``: seeded Gaussian blobs (the test set uses
    ``data_seed + 1``) or IDX files.

    Returns:
        (tuple): ``(train, test)``.
    """
    if cfg.dataset == DATASET_BLOBS:
        train = generate_blobs(cfg.num_classes, cfg.per_class, cfg.feature_dim, cfg.spread, cfg.data_seed,
                               cfg.separation)
        test = generate_blobs(cfg.num_classes, cfg.test_per_class, cfg.feature_dim, cfg.spread, cfg.data_seed + 1,
                              cfg.separation)
        return train, test
    train = load_idx(cfg.train_images, cfg.train_labels, cfg.num_classes)
    test = load_idx(cfg.test_images, cfg.test_labels, cfg.num_classes)
    return train, test
