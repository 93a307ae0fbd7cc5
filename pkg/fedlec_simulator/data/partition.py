""" The **data.partition** module splits a training Dataset into non-overlapping client shards. Three schemes are
provided:

- **quantity-based label skew** (``#cnum=k``): each client holds samples of exactly ``k`` labels, each label's
  samples are split into equal shards among the clients that hold it;
- **distribution-based label skew** (``Dir(alpha)``): for every label, client proportions are drawn from a
  symmetric Dirichlet distribution;
- **IID**: a shuffled equal split, used as the reference setting.

Every sample is allocated exactly once and no shard is empty.
"""

# Import python libraries
import enum

# Import third-party libraries
import numpy as np
import pandas as pd

# Import internal libraries
from fedlec_simulator.data import exceptions as custom_exception
from fedlec_simulator.utils.lib import get_random_generator


class PartitionScheme(enum.Enum):
    QUANTITY = "quantity"
    DIRICHLET = "dirichlet"
    IID = "iid"


class PartitionPlan:
    """
    Assignment of every sample index of a parent dataset to exactly one client shard.

    Attributes:
        shards (list): one sorted index array per client.
        seed (int): seed used to draw the plan.
        scheme (PartitionScheme): the partitioning scheme.
        parameter (float or int): ``k`` for the quantity scheme, ``alpha`` for the Dirichlet scheme, None for IID.
    """

    def __init__(self, shards, seed, scheme, parameter=None, n_samples=None):
        self._shards = [np.sort(np.asarray(shard, dtype=np.int64)) for shard in shards]
        self._seed = int(seed)
        self._scheme = PartitionScheme(scheme)
        self._parameter = parameter
        self.__validate(n_samples)

    def __validate(self, n_samples):
        if not self._shards:
            raise custom_exception.InvalidPartitionPlan("no shards")
        for client_id, shard in enumerate(self._shards):
            if shard.size == 0:
                raise custom_exception.InvalidPartitionPlan("shard {0} is empty".format(client_id))
        allocated = np.concatenate(self._shards)
        if np.unique(allocated).size != allocated.size:
            raise custom_exception.InvalidPartitionPlan("shards overlap")
        if n_samples is not None and (allocated.size != n_samples or allocated.min() < 0
                                      or allocated.max() >= n_samples):
            raise custom_exception.InvalidPartitionPlan("shards do not cover the {0} samples".format(n_samples))

    @property
    def shards(self):
        return self._shards

    @property
    def seed(self):
        return self._seed

    @property
    def scheme(self):
        return self._scheme

    @property
    def parameter(self):
        return self._parameter

    @property
    def n_clients(self):
        return len(self._shards)

    @property
    def descriptor(self):
        """
        Short text naming the partition, e.g. ``"cnum:2"``, ``"dir:0.1"`` or ``"iid"``.
        """
        if self._scheme == PartitionScheme.QUANTITY:
            return "cnum:{0}".format(self._parameter)
        if self._scheme == PartitionScheme.DIRICHLET:
            return "dir:{0:g}".format(self._parameter)
        return "iid"

    def shard_sizes(self):
        return [int(shard.size) for shard in self._shards]

    def allocation_matrix(self, labels, num_classes):
        """
        Returns the sample counts per (client, label) as an integer matrix [n_clients x num_classes].
        """
        labels = np.asarray(labels)
        return np.stack([np.bincount(labels[shard], minlength=num_classes) for shard in self._shards])

    def allocation_percentages(self, labels, num_classes):
        """
        Returns, as a pandas DataFrame (clients as rows, labels as columns), the percentage of each label's samples
        allocated to each client.
        """
        counts = self.allocation_matrix(labels, num_classes)
        totals = counts.sum(axis=0)
        percentages = np.divide(100.0 * counts, totals, out=np.zeros(counts.shape), where=totals > 0)
        return pd.DataFrame(percentages,
                            index=pd.Index(range(self.n_clients), name="client"),
                            columns=["label_{0}".format(label) for label in range(num_classes)])


def _indices_by_label(ds):
    return [np.flatnonzero(ds.labels == label) for label in range(ds.num_classes)]


def partition_quantity(ds, n_clients, k, seed):
    """
    Quantity-based label skew ``#cnum=k``. Labels are shuffled and dealt to clients in consecutive blocks of ``k``
    (cyclically), which gives every client ``k`` distinct labels and every label at least one holder. Each label's
    samples are shuffled and divided into equal shards among its holders; remainders go one by one to the first
    holders.

    Parameters:
        ds (Dataset): the dataset to split.
        n_clients (int): number of clients N.
        k (int): labels per client.
        seed (int): seed of the plan.

    Returns:
        (PartitionPlan): the plan.

    Raises:
        InfeasiblePartition: if ``k > |C|``, ``n_clients·k < |C|`` or a label has fewer samples than holders.
    """
    num_classes = ds.num_classes
    if k < 1 or k > num_classes:
        raise custom_exception.InfeasiblePartition("k={0} must lie in 1..{1}".format(k, num_classes))
    if n_clients < 1 or n_clients * k < num_classes:
        raise custom_exception.InfeasiblePartition(
            "{0} clients with {1} labels each cannot hold {2} labels".format(n_clients, k, num_classes))

    rng = get_random_generator(seed)
    order = rng.permutation(num_classes)
    client_labels = [[int(order[(client * k + j) % num_classes]) for j in range(k)] for client in range(n_clients)]
    holders = [[client for client in range(n_clients) if label in client_labels[client]]
               for label in range(num_classes)]

    shards = [[] for _ in range(n_clients)]
    for label, label_indices in enumerate(_indices_by_label(ds)):
        if label_indices.size < len(holders[label]):
            raise custom_exception.InfeasiblePartition(
                "label {0} has {1} samples for {2} holders".format(label, label_indices.size, len(holders[label])))
        pieces = np.array_split(rng.permutation(label_indices), len(holders[label]))
        for client, piece in zip(holders[label], pieces):
            shards[client].append(piece)

    shards = [np.concatenate(pieces) for pieces in shards]
    return PartitionPlan(shards, seed, PartitionScheme.QUANTITY, int(k), ds.n_samples)


def _draw_proportions(rng, alpha, n_clients):
    proportions = rng.dirichlet(np.full(n_clients, float(alpha)))
    if not np.all(np.isfinite(proportions)) or proportions.sum() <= 0:
        # Tiny alpha underflows every gamma draw; the limit puts all the mass on one client
        proportions = np.zeros(n_clients)
        proportions[rng.integers(n_clients)] = 1.0
    return proportions


def _repair_empty_shards(shards):
    # Move one sample from the largest shard into each empty one
    for client in range(len(shards)):
        if shards[client].size == 0:
            donor = int(np.argmax([shard.size for shard in shards]))
            shards[client] = shards[donor][-1:]
            shards[donor] = shards[donor][:-1]
    return shards


def partition_dirichlet(ds, n_clients, alpha, seed):
    """
    Distribution-based label skew ``Dir(alpha)``. For every label ``k``, proportions ``p_k ~ Dir_N(alpha)`` are
    drawn and client ``i`` receives a contiguous slice of ``floor(p_k,i · count_k)`` of the shuffled samples; the
    remainder goes to the client with the largest proportion. Empty shards are then repaired by moving one sample
    from the largest shard.

    Parameters:
        ds (Dataset): the dataset to split.
        n_clients (int): number of clients N.
        alpha (float): concentration parameter, > 0.
        seed (int): seed of the plan.

    Returns:
        (PartitionPlan): the plan.

    Raises:
        InfeasiblePartition: if ``alpha <= 0`` or there are fewer samples than clients.
    """
    if not alpha > 0:
        raise custom_exception.InfeasiblePartition("alpha={0} must be > 0".format(alpha))
    if n_clients < 1 or ds.n_samples < n_clients:
        raise custom_exception.InfeasiblePartition(
            "{0} samples cannot fill {1} non-empty shards".format(ds.n_samples, n_clients))

    rng = get_random_generator(seed)
    pieces = [[] for _ in range(n_clients)]
    for label_indices in _indices_by_label(ds):
        label_indices = rng.permutation(label_indices)
        proportions = _draw_proportions(rng, alpha, n_clients)
        counts = np.floor(proportions * label_indices.size).astype(np.int64)
        counts[int(np.argmax(proportions))] += label_indices.size - counts.sum()
        bounds = np.concatenate(([0], np.cumsum(counts)))
        for client in range(n_clients):
            pieces[client].append(label_indices[bounds[client]:bounds[client + 1]])

    shards = [np.concatenate(client_pieces) for client_pieces in pieces]
    shards = _repair_empty_shards(shards)
    return PartitionPlan(shards, seed, PartitionScheme.DIRICHLET, float(alpha), ds.n_samples)


def partition_iid(ds, n_clients, seed):
    """
    IID reference split: the shuffled sample indices are divided into ``n_clients`` shards of (almost) equal size.

    Raises:
        InfeasiblePartition: if there are fewer samples than clients.
    """
    if n_clients < 1 or ds.n_samples < n_clients:
        raise custom_exception.InfeasiblePartition(
            "{0} samples cannot fill {1} non-empty shards".format(ds.n_samples, n_clients))
    rng = get_random_generator(seed)
    shards = np.array_split(rng.permutation(ds.n_samples), n_clients)
    return PartitionPlan(shards, seed, PartitionScheme.IID, None, ds.n_samples)


def build_partition(ds, scheme, n_clients, seed, k=2, alpha=0.1):
    """
    Dispatches to the partitioner named by ``scheme`` (a PartitionScheme or its value).
    """
    scheme = PartitionScheme(scheme)
    if scheme == PartitionScheme.QUANTITY:
        return partition_quantity(ds, n_clients, k, seed)
    if scheme == PartitionScheme.DIRICHLET:
        return partition_dirichlet(ds, n_clients, alpha, seed)
    return partition_iid(ds, n_clients, seed)
