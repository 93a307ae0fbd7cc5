""" The **data.dataset** module contains the in-memory **Dataset()** class together with the two ways of obtaining one:
``load_idx()`` for IDX files (the MNIST-family binary format) and ``generate_blobs()`` for seeded synthetic Gaussian
clusters sized for desk-scale experiments.
"""

# Import python libraries
import gzip
import hashlib
import struct

# Import third-party libraries
import numpy as np

# Import internal libraries
from fedlec_simulator.data import exceptions as custom_exception
from fedlec_simulator.nn.tensor import as_tensor
from fedlec_simulator.utils.lib import get_random_generator

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class Dataset:
    """
    Features [N x d] (float64, finite) and integer labels [N] in ``0..num_classes-1``.

    Examples:
        .. code-block:: python

            shard = train.subset(plan.shards[3])
            print(shard.n_samples, shard.label_counts())

    """

    def __init__(self, features, labels, num_classes=None):
        features = as_tensor(features, "features")
        labels = np.asarray(labels)
        if features.ndim != 2 or features.shape[0] < 1:
            raise custom_exception.InvalidDatasetArgument("features", "expected a non-empty [N x d] matrix")
        if labels.ndim != 1 or labels.shape[0] != features.shape[0]:
            raise custom_exception.InvalidDatasetArgument("labels", "expected one label per sample")
        if labels.size and not np.all(np.equal(np.mod(labels, 1), 0)):
            raise custom_exception.InvalidDatasetArgument("labels", "labels must be integers")
        labels = labels.astype(np.int64)
        if num_classes is None:
            num_classes = int(labels.max()) + 1
        if labels.min() < 0 or labels.max() >= num_classes:
            raise custom_exception.InvalidDatasetArgument("labels", "labels must lie in 0..{0}".format(num_classes - 1))
        self._features = features
        self._labels = labels
        self._num_classes = int(num_classes)

    @property
    def features(self):
        return self._features

    @property
    def labels(self):
        return self._labels

    @property
    def num_classes(self):
        return self._num_classes

    @property
    def n_samples(self):
        return self._labels.shape[0]

    @property
    def feature_dim(self):
        return self._features.shape[1]

    def __len__(self):
        return self.n_samples

    def subset(self, indices):
        """
        Returns a new Dataset holding the samples at ``indices`` (in that order) with the same class count.
        """
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(self._features[indices], self._labels[indices], self._num_classes)

    def label_counts(self):
        return np.bincount(self._labels, minlength=self._num_classes)

    def checksum(self):
        """
        SHA-256 of the little-endian features, labels and class count, used for golden-snapshot checks.
        """
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self._features, dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self._labels, dtype="<i8").tobytes())
        digest.update(struct.pack("<q", self._num_classes))
        return digest.hexdigest()


def _read_idx(path, expected_magic):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rb") as idx_file:
        raw = idx_file.read()

    if len(raw) < 4:
        raise custom_exception.IdxFormatError(path, "file is truncated")
    magic = struct.unpack(">I", raw[:4])[0]
    if magic != expected_magic:
        raise custom_exception.IdxFormatError(path, "bad magic number 0x{0:08x}".format(magic))

    n_dims = magic & 0xFF
    header_size = 4 + 4 * n_dims
    if len(raw) < header_size:
        raise custom_exception.IdxFormatError(path, "file is truncated")
    dims = struct.unpack(">" + "I" * n_dims, raw[4:header_size])
    payload_size = int(np.prod(dims))
    if len(raw) < header_size + payload_size:
        raise custom_exception.IdxFormatError(path, "file is truncated")
    data = np.frombuffer(raw, dtype=np.uint8, count=payload_size, offset=header_size)
    return dims, data


def load_idx(images_path, labels_path, num_classes=None):
    """
    Reads an IDX image file (magic 2051, unsigned bytes [N x rows x cols]) and its IDX label file (magic 2049).
    Pixels are scaled to [0, 1] and each image is flattened to a row vector. Files ending with ``.gz`` are read
    through gzip.

    Parameters:
        images_path (str): path of the image file.
        labels_path (str): path of the label file.
        num_classes (int): class count; defaults to ``max(label) + 1``.

    Returns:
        (Dataset): the loaded dataset with ``d = rows·cols``.

    Raises:
        IdxFormatError: on a bad magic number or a truncated file.
        IdxCountMismatch: if the files hold a different number of items.
    """
    image_dims, pixels = _read_idx(images_path, IDX_IMAGES_MAGIC)
    label_dims, labels = _read_idx(labels_path, IDX_LABELS_MAGIC)
    if image_dims[0] != label_dims[0]:
        raise custom_exception.IdxCountMismatch(image_dims[0], label_dims[0])

    n_images = image_dims[0]
    features = pixels.reshape(n_images, -1).astype(np.float64) / 255.0
    return Dataset(features, labels.astype(np.int64), num_classes)


def class_means(num_classes, d, separation=3.0):
    """
    Seed-independent class centres: class ``c`` sits on axis ``c mod d`` at distance ``separation·(1 + c div d)``.
    """
    means = np.zeros((num_classes, d), dtype=np.float64)
    for label in range(num_classes):
        means[label, label % d] = separation * (1 + label // d)
    return means


def generate_blobs(num_classes, per_class, d, spread, seed, separation=3.0):
    """
    Synthesizes Gaussian clusters, one per class, around the centres of ``class_means()`` with standard deviation
    ``spread``. Samples are shuffled; the result only depends on the arguments.

    Parameters:
        num_classes (int): number of classes |C|.
        per_class (int): samples per class.
        d (int): feature dimension.
        spread (float): standard deviation of each cluster (0 puts every sample on its class centre).
        seed (int): seed of the sample stream.
        separation (float): distance scale between class centres.

    Returns:
        (Dataset): ``num_classes·per_class`` samples.

    Raises:
        InvalidDatasetArgument: if a count is not positive or ``spread`` is negative.
    """
    for name, value in (("num_classes", num_classes), ("per_class", per_class), ("d", d)):
        if int(value) < 1:
            raise custom_exception.InvalidDatasetArgument(name, "must be positive")
    if spread < 0:
        raise custom_exception.InvalidDatasetArgument("spread", "must not be negative")

    rng = get_random_generator(seed)
    labels = np.repeat(np.arange(num_classes, dtype=np.int64), per_class)
    noise = rng.standard_normal((labels.shape[0], d)) * spread
    features = class_means(num_classes, d, separation)[labels] + noise
    order = rng.permutation(labels.shape[0])
    return Dataset(features[order], labels[order], num_classes)
