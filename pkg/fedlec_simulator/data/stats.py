""" The **data.stats** module computes the label statistics of a client shard: the counts per label, the smoothed
label-prior estimate ``gamma`` and the split of the label space into majority, minority and missing labels.
"""

# Import third-party libraries
import numpy as np

# Import internal libraries
from fedlec_simulator.data import exceptions as custom_exception

GAMMA_SMOOTHING = 1e-3
"""
Additive smoothing of the prior estimate; keeps ``log(gamma)`` finite for missing labels.
"""


class LabelStats:
    """
    Label statistics of one shard.

    Attributes:
        counts (numpy.ndarray): samples per label [|C|].
        gamma (numpy.ndarray): smoothed prior estimate, strictly positive and summing to 1.
        majority (frozenset): labels with ``count >= |shard| / |C|``.
        minority (frozenset): labels with ``0 < count < |shard| / |C|``.
        missing (frozenset): labels with ``count == 0``.
    """

    def __init__(self, counts, smoothing=GAMMA_SMOOTHING):
        counts = np.asarray(counts, dtype=np.int64)
        total = int(counts.sum())
        if total < 1:
            raise custom_exception.EmptyShard()
        num_classes = counts.shape[0]
        average = total / num_classes

        self._counts = counts
        self._gamma = (counts + smoothing) / (total + smoothing * num_classes)
        self._majority = frozenset(int(c) for c in np.flatnonzero(counts >= average))
        self._minority = frozenset(int(c) for c in np.flatnonzero((counts > 0) & (counts < average)))
        self._missing = frozenset(int(c) for c in np.flatnonzero(counts == 0))

    @property
    def counts(self):
        return self._counts

    @property
    def gamma(self):
        return self._gamma

    @property
    def majority(self):
        return self._majority

    @property
    def minority(self):
        return self._minority

    @property
    def missing(self):
        return self._missing

    @property
    def num_classes(self):
        return self._counts.shape[0]

    @property
    def shard_size(self):
        return int(self._counts.sum())

    def group_of(self, label):
        """
        Returns ``"majority"``, ``"minority"`` or ``"missing"`` for a label.
        """
        if label in self._majority:
            return "majority"
        if label in self._minority:
            return "minority"
        return "missing"

    def to_dict(self):
        return {
            "counts": [int(c) for c in self._counts],
            "majority": sorted(self._majority),
            "minority": sorted(self._minority),
            "missing": sorted(self._missing),
        }


def label_stats(ds, shard_indices=None):
    """
    Computes the LabelStats of the samples of ``ds`` at ``shard_indices`` (all samples when omitted).

    Raises:
        EmptyShard: if the shard has no sample.

    Examples:
        .. code-block:: python

            stats = label_stats(train, plan.shards[0])
            print(stats.majority, stats.minority, stats.missing)

    """
    labels = ds.labels if shard_indices is None else ds.labels[np.asarray(shard_indices, dtype=np.int64)]
    if labels.size == 0:
        raise custom_exception.EmptyShard()
    return LabelStats(np.bincount(labels, minlength=ds.num_classes))


def label_group_accuracy(per_label_accuracy, stats):
    """
    Averages a per-label accuracy vector over the majority, minority and missing labels of a shard. Empty groups
    are reported as None.
    """
    per_label_accuracy = np.asarray(per_label_accuracy, dtype=np.float64)
    result = {}
    for group, labels in (("majority", stats.majority), ("minority", stats.minority), ("missing", stats.missing)):
        result[group] = float(np.mean(per_label_accuracy[sorted(labels)])) if labels else None
    return result
