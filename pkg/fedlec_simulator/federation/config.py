""" The **federation.config** module contains the **ExperimentConfig()** class: the typed, validated set of every
setting of one federated run (data, partition, federation schedule, local objective and network).

Settings are exchanged as a flat dictionary whose keys are the ones of the experiment files. The key ``lambda`` is
stored in the attribute ``lambda_``.
"""

# Import python libraries
import hashlib
import json
from dataclasses import dataclass, field, fields

# Import internal libraries
from fedlec_simulator.calibration.losses import Algorithm, CalibrationConfig
from fedlec_simulator.data.partition import PartitionScheme
from fedlec_simulator.federation import exceptions as custom_exception
from fedlec_simulator.snn import exceptions as snn_exception
from fedlec_simulator.snn.network import SpikingMlp
from fedlec_simulator.snn.neuron import LifParams, NeuronMode

DATASET_BLOBS = "blobs"
DATASET_IDX = "idx"

REQUIRED_KEYS = ("dataset", "algorithm")

# Attribute names that differ from the keys of the experiment files
_KEY_TO_ATTRIBUTE = {"lambda": "lambda_"}
_ATTRIBUTE_TO_KEY = {attribute: key for key, attribute in _KEY_TO_ATTRIBUTE.items()}


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Every setting of a federated experiment. Instances are immutable and validated on construction; use
    ``from_dict()`` to build one from an experiment file and ``with_overrides()`` to derive sweep variants.

    Examples:
        .. code-block:: python

            cfg = ExperimentConfig.from_dict({"dataset": "blobs", "algorithm": "fedlec", "partition": "dirichlet"})
            model = cfg.build_model(input_dim=cfg.feature_dim)
            print(cfg.config_hash())

    """
    dataset: str
    algorithm: str
    num_classes: int = 8
    per_class: int = 500
    test_per_class: int = 200
    feature_dim: int = 16
    spread: float = 1.0
    separation: float = 3.0
    data_seed: int = 7
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    partition: str = PartitionScheme.QUANTITY.value
    cnum: int = 2
    alpha: float = 0.1
    n_clients: int = 10
    rounds: int = 30
    local_epochs: int = 2
    time_steps: int = 4
    lr: float = 0.05
    batch_size: int = 32
    participation_rate: float = 1.0
    seed: int = 0
    theta: float = 0.1
    lambda_: float = 1.0
    mu: float = 0.01
    use_gc: bool = True
    use_ad: bool = True
    hidden_sizes: tuple = field(default=(128, 64))
    init_gain: float = 3.0
    tau: float = 2.0
    v_threshold: float = 1.0
    v_reset: float = 0.0
    additive_leak: bool = False
    neuron_mode: str = NeuronMode.SPIKE.value
    checkpoint_every: int = 0
    client_diagnostics: bool = False
    dump_features: bool = False

    def __post_init__(self):
        for config_field in fields(self):
            value = _coerce(_ATTRIBUTE_TO_KEY.get(config_field.name, config_field.name),
                            getattr(self, config_field.name), config_field.type)
            object.__setattr__(self, config_field.name, value)
        self.__validate()

    def __validate(self):
        _check_choice("dataset", self.dataset, (DATASET_BLOBS, DATASET_IDX))
        _check_choice("algorithm", self.algorithm, [variant.value for variant in Algorithm])
        _check_choice("partition", self.partition, [scheme.value for scheme in PartitionScheme])
        _check_choice("neuron_mode", self.neuron_mode, [mode.value for mode in NeuronMode])

        for key in ("num_classes",):
            _check_range(key, getattr(self, key), 2)
        for key in ("per_class", "test_per_class", "feature_dim", "cnum", "n_clients", "rounds", "time_steps",
                    "batch_size"):
            _check_range(key, getattr(self, key), 1)
        for key in ("local_epochs", "data_seed", "seed", "checkpoint_every"):
            _check_range(key, getattr(self, key), 0)
        for key in ("spread", "theta", "lambda_", "mu"):
            if not getattr(self, key) >= 0:
                raise custom_exception.InvalidExperimentConfig(_ATTRIBUTE_TO_KEY.get(key, key), "must be >= 0")
        for key in ("separation", "alpha", "lr", "init_gain"):
            if not getattr(self, key) > 0:
                raise custom_exception.InvalidExperimentConfig(key, "must be > 0")
        if not 0 < self.participation_rate <= 1:
            raise custom_exception.InvalidExperimentConfig("participation_rate", "must lie in (0, 1]")
        if not self.hidden_sizes or min(self.hidden_sizes) < 1:
            raise custom_exception.InvalidExperimentConfig("hidden_sizes", "expected a non-empty list of widths >= 1")
        if self.dataset == DATASET_IDX:
            for key in ("train_images", "train_labels", "test_images", "test_labels"):
                if not getattr(self, key):
                    raise custom_exception.InvalidExperimentConfig(key, "required by the idx dataset")
        try:
            self.lif_params()
        except snn_exception.InvalidNeuronParameters as error:
            raise custom_exception.InvalidExperimentConfig("tau/v_threshold/v_reset", error.message)

    @classmethod
    def from_dict(cls, settings):
        """
        Builds a config from a flat dictionary of experiment-file keys; missing keys take their defaults.

        Raises:
            InvalidExperimentConfig: on an unknown key, a missing required key, a wrong type or a value out of
                range. The error names the offending key.
        """
        known = set(cls.keys())
        for key in settings:
            if key not in known:
                raise custom_exception.InvalidExperimentConfig(key, "unknown key")
        for key in REQUIRED_KEYS:
            if key not in settings:
                raise custom_exception.InvalidExperimentConfig(key, "missing required key")
        return cls(**{_KEY_TO_ATTRIBUTE.get(key, key): value for key, value in settings.items()})

    @classmethod
    def keys(cls):
        """
        Returns the experiment-file keys in canonical order.
        """
        return [_ATTRIBUTE_TO_KEY.get(config_field.name, config_field.name) for config_field in fields(cls)]

    @classmethod
    def defaults(cls):
        """
        Returns the documented default of every optional key.
        """
        return {_ATTRIBUTE_TO_KEY.get(f.name, f.name): _to_plain(f.default) for f in fields(cls)
                if f.name not in REQUIRED_KEYS}

    def to_dict(self):
        """
        Serializes every setting, in canonical order, with experiment-file keys and JSON-compatible values.
        """
        return {_ATTRIBUTE_TO_KEY.get(f.name, f.name): _to_plain(getattr(self, f.name)) for f in fields(self)}

    def config_hash(self):
        """
        SHA-256 of the canonical JSON serialization (sorted keys, no whitespace).
        """
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(self, overrides):
        """
        Returns a validated copy where the experiment-file keys of ``overrides`` replace the current values.
        """
        settings = self.to_dict()
        settings.update(overrides)
        return ExperimentConfig.from_dict(settings)

    def lif_params(self):
        return LifParams(tau=self.tau, v_threshold=self.v_threshold, v_reset=self.v_reset,
                         additive_leak=self.additive_leak)

    def calibration(self):
        return CalibrationConfig(variant=Algorithm(self.algorithm), theta=self.theta, lambda_=self.lambda_,
                                 mu=self.mu, use_gc=self.use_gc, use_ad=self.use_ad)

    @property
    def variant(self):
        return Algorithm(self.algorithm)

    @property
    def descriptor(self):
        """
        Partition descriptor in the form used by ``PartitionPlan.descriptor``.
        """
        if self.partition == PartitionScheme.QUANTITY.value:
            return "cnum:{0}".format(self.cnum)
        if self.partition == PartitionScheme.DIRICHLET.value:
            return "dir:{0:g}".format(self.alpha)
        return "iid"

    def layer_sizes(self, input_dim):
        return [int(input_dim)] + list(self.hidden_sizes) + [self.num_classes]

    def build_model(self, input_dim, rng=None):
        """
        Builds the SpikingMlp described by the settings. Weights are drawn from ``rng`` (zeros when None).
        """
        return SpikingMlp(self.layer_sizes(input_dim), time_steps=self.time_steps, lif_params=self.lif_params(),
                          mode=NeuronMode(self.neuron_mode), rng=rng, init_gain=self.init_gain)


def _coerce(key, value, kind):
    if kind in (bool, "bool"):
        if not isinstance(value, bool):
            raise custom_exception.InvalidExperimentConfig(key, "expected true or false, got {0!r}".format(value))
        return value
    if kind in (int, "int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise custom_exception.InvalidExperimentConfig(key, "expected an integer, got {0!r}".format(value))
        return value
    if kind in (float, "float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise custom_exception.InvalidExperimentConfig(key, "expected a number, got {0!r}".format(value))
        return float(value)
    if kind in (str, "str"):
        if not isinstance(value, str):
            raise custom_exception.InvalidExperimentConfig(key, "expected a string, got {0!r}".format(value))
        return value
    # hidden_sizes
    if isinstance(value, (str, bytes)) or not hasattr(value, "__iter__"):
        raise custom_exception.InvalidExperimentConfig(key, "expected a list of integers, got {0!r}".format(value))
    values = tuple(value)
    if any(isinstance(item, bool) or not isinstance(item, int) for item in values):
        raise custom_exception.InvalidExperimentConfig(key, "expected a list of integers, got {0!r}".format(value))
    return values


def _check_choice(key, value, choices):
    if value not in choices:
        raise custom_exception.InvalidExperimentConfig(key, "{0!r} is not one of {1}".format(value, list(choices)))


def _check_range(key, value, minimum):
    if value < minimum:
        raise custom_exception.InvalidExperimentConfig(key, "must be >= {0}".format(minimum))


def _to_plain(value):
    return list(value) if isinstance(value, tuple) else value
