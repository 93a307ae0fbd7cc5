""" The **federation.engine** module implements the federated round loop: every round the server samples the
participating clients, broadcasts the global parameters, lets each client train locally with the configured
objective, aggregates the returned parameters with a shard-size weighted average and evaluates the new global
model on the test set.

Randomness is drawn from independent streams keyed by integers, so results do not depend on the number of workers
nor on the order in which clients finish:

- model initialization: ``(INIT, seed)``
- client sampling: ``(SAMPLING, seed, round)``
- mini-batch shuffling: ``(SHUFFLE, seed, round, client_id)``
"""

# Import python libraries
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

# Import third-party libraries
import numpy as np

# Import internal libraries
from fedlec_simulator.calibration.losses import Algorithm, fedlec_loss, prox_term
from fedlec_simulator.data.partition import build_partition
from fedlec_simulator.data.stats import label_group_accuracy, label_stats
from fedlec_simulator.data import exceptions as data_exception
from fedlec_simulator.federation import exceptions as custom_exception
from fedlec_simulator.nn.layers import sgd_step
from fedlec_simulator.snn.neuron import NeuronMode
from fedlec_simulator.utils.lib import get_logger, get_progress_bar, get_random_generator

# Stream tags of the seeded random generators
INIT_STREAM = 1
SAMPLING_STREAM = 2
SHUFFLE_STREAM = 3

# Batch size used to evaluate a model on the test set
EVALUATION_BATCH_SIZE = 1024

LOCAL_METRIC_KEYS = ("total", "lc", "lgc", "lad", "prox")


@dataclass
class ClientUpdate:
    """
    Result of one local training: the post-training parameters of the client, the size of its shard and the
    mean of every loss component over the local mini-batches.
    """
    client_id: int
    params: object
    shard_size: int
    local_metrics: dict = field(default_factory=dict)


@dataclass
class EvaluationResult:
    """
    Top-1 accuracy of a model on a test set. ``per_label_accuracy[c]`` is 0.0 for a label absent from the test set
    (``per_label_counts[c] == 0``).
    """
    accuracy: float
    per_label_accuracy: np.ndarray
    per_label_counts: np.ndarray


@dataclass
class RoundReport:
    """
    Global metrics of one communication round.

    Attributes:
        round_index (int): index r of the round, starting at 0.
        global_accuracy (float): top-1 accuracy of the aggregated model on the test set.
        per_label_accuracy (numpy.ndarray): accuracy per label [|C|].
        per_label_counts (numpy.ndarray): test samples per label [|C|].
        mean_local_losses (dict): mean over the participating clients of each local loss component.
        participating_clients (list): sorted ids of the clients sampled in this round.
        client_reports (list): per-client diagnostics (only with ``client_diagnostics`` enabled).
    """
    round_index: int
    global_accuracy: float
    per_label_accuracy: np.ndarray
    per_label_counts: np.ndarray
    mean_local_losses: dict
    participating_clients: list
    client_reports: list = field(default_factory=list)


def initial_params(cfg, input_dim):
    """
    Returns the parameters ``w^0`` broadcast in the first round, drawn from the experiment seed.
    """
    return cfg.build_model(input_dim, rng=get_random_generator(INIT_STREAM, cfg.seed)).get_params()


def sample_clients(n_clients, rate, seed, round_index):
    """
    Draws the clients participating in a round: ``ceil(rate·n_clients)`` distinct ids, without replacement, from
    the stream of ``(seed, round_index)``.

    Returns:
        (list): sorted client ids.

    Raises:
        InvalidExperimentConfig: if ``rate`` is outside (0, 1].
    """
    if not 0 < rate <= 1:
        raise custom_exception.InvalidExperimentConfig("participation_rate", "must lie in (0, 1]")
    # Rounding first keeps products such as 0.3·10 from landing just above an integer
    n_sampled = min(n_clients, int(math.ceil(round(rate * n_clients, 9))))
    if n_sampled >= n_clients:
        return list(range(n_clients))
    rng = get_random_generator(SAMPLING_STREAM, seed, round_index)
    return sorted(int(client_id) for client_id in rng.choice(n_clients, size=n_sampled, replace=False))


def local_train(shard, global_params, cfg, client_id=0, round_index=0):
    """
    Trains a fresh copy of the global model on one client shard.

    Every mini-batch runs the student forward pass, the teacher forward pass (FedLEC only, on a frozen copy of
    ``global_params`` in spike mode), the local objective, backpropagation through time and one SGD step. FedProx
    adds the gradient of the proximal term to the network gradient.

    Parameters:
        shard (Dataset): the client's samples.
        global_params (ParamVector): parameters broadcast by the server.
        cfg (ExperimentConfig): the experiment settings.
        client_id (int): id of the client; keys the shuffling stream.
        round_index (int): index of the round; keys the shuffling stream.

    Returns:
        (ClientUpdate): the post-training parameters, the shard size and the mean loss components.

    Raises:
        EmptyShard: if the shard has no sample.
    """
    if shard.n_samples == 0:
        raise data_exception.EmptyShard()
    calibration = cfg.calibration()
    stats = label_stats(shard)

    model = cfg.build_model(shard.feature_dim)
    model.set_params(global_params)
    teacher = None
    if calibration.needs_teacher:
        teacher = model.clone()
        teacher.mode = NeuronMode.SPIKE

    rng = get_random_generator(SHUFFLE_STREAM, cfg.seed, round_index, client_id)
    params = global_params.copy()
    sums = dict.fromkeys(LOCAL_METRIC_KEYS, 0.0)
    n_batches = 0
    for _ in range(cfg.local_epochs):
        order = rng.permutation(shard.n_samples)
        for start in range(0, shard.n_samples, cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            x, y = shard.features[batch], shard.labels[batch]

            logits = model.forward(x)
            teacher_logits = teacher.forward(x) if teacher is not None else None
            breakdown = fedlec_loss(logits, teacher_logits, y, stats, calibration)
            grads = model.backward(breakdown.grad_logits)
            prox_loss = 0.0
            if calibration.variant == Algorithm.FEDPROX:
                prox_loss, prox_grads = prox_term(params, global_params, calibration.mu)
                grads = grads + prox_grads

            params = sgd_step(params, grads, cfg.lr)
            model.set_params(params)

            sums["total"] += breakdown.total + prox_loss
            sums["lc"] += breakdown.lc
            sums["lgc"] += breakdown.lgc
            sums["lad"] += breakdown.lad
            sums["prox"] += prox_loss
            n_batches += 1

    metrics = {key: (value / n_batches if n_batches else 0.0) for key, value in sums.items()}
    return ClientUpdate(client_id=int(client_id), params=params, shard_size=shard.n_samples, local_metrics=metrics)


def aggregate(updates, w_prev=None):
    """
    Shard-size weighted average of the client parameters::

        w = sum_i (|D_i| / sum_j |D_j|) · w_i

    over the participating clients only. The sum is evaluated as ``w_0 + sum_i (|D_i| / n)·(w_i - w_0)`` where
    ``w_0`` is the update of the lowest client id and the updates are accumulated in client-id order, so the
    result does not depend on the order of ``updates``, identical client parameters are returned unchanged and a
    single update is returned as is.

    Parameters:
        updates (list): ClientUpdate objects.
        w_prev (ParamVector): the parameters broadcast this round; only its layout is checked.

    Returns:
        (ParamVector): the aggregated parameters.

    Raises:
        EmptyUpdateList: if ``updates`` is empty.
        LayoutMismatch: if any update (or ``w_prev``) has a different layout.
    """
    if not updates:
        raise custom_exception.EmptyUpdateList()
    ordered = sorted(updates, key=lambda update: update.client_id)
    anchor = ordered[0].params
    if w_prev is not None:
        anchor.check_layout(w_prev)
    for update in ordered:
        anchor.check_layout(update.params)
        if update.shard_size < 1:
            raise data_exception.EmptyShard()

    total_size = sum(update.shard_size for update in ordered)
    result = anchor.copy()
    for update in ordered[1:]:
        result.data[:] += (update.shard_size / total_size) * (update.params.data - anchor.data)
    return result


def evaluate(params, test, cfg):
    """
    Spike-mode top-1 accuracy of ``params`` on ``test``. Ties in the logits resolve to the lowest class index.

    Returns:
        (EvaluationResult): overall accuracy, per-label accuracy and per-label test counts.
    """
    model = cfg.build_model(test.feature_dim)
    model.set_params(params)
    model.mode = NeuronMode.SPIKE

    predictions = np.empty(test.n_samples, dtype=np.int64)
    for start in range(0, test.n_samples, EVALUATION_BATCH_SIZE):
        stop = start + EVALUATION_BATCH_SIZE
        predictions[start:stop] = np.argmax(model.forward(test.features[start:stop]), axis=1)
    model.reset_state()

    correct = predictions == test.labels
    counts = np.bincount(test.labels, minlength=cfg.num_classes)
    hits = np.bincount(test.labels[correct], minlength=cfg.num_classes)
    per_label = np.divide(hits, counts, out=np.zeros(counts.shape, dtype=np.float64), where=counts > 0)
    return EvaluationResult(accuracy=float(np.mean(correct)), per_label_accuracy=per_label, per_label_counts=counts)


class FederatedSimulator:
    """
    Runs the rounds of one federated experiment. The training set is split once, with the partition scheme of
    the configuration, and the global model is initialized from the experiment seed.

    Client trainings of a round run on a thread pool of ``workers`` threads; the updates are merged in client-id
    order once all of them are available.

    Examples:
        .. code-block:: python

            simulator = FederatedSimulator(cfg, train, test, workers=4)
            for report in simulator.run():
                print(report.round_index, report.global_accuracy)

    """

    def __init__(self, cfg, train, test, workers=1):
        if int(workers) < 1:
            raise custom_exception.InvalidExperimentConfig("workers", "must be >= 1")
        if train.num_classes != cfg.num_classes or test.num_classes != cfg.num_classes:
            raise custom_exception.InvalidExperimentConfig(
                "num_classes", "the datasets hold {0} and {1} classes".format(train.num_classes, test.num_classes))
        if train.feature_dim != test.feature_dim:
            raise custom_exception.InvalidExperimentConfig(
                "dataset", "train and test feature sizes differ ({0} vs {1})".format(train.feature_dim,
                                                                                     test.feature_dim))
        self._cfg = cfg
        self._test = test
        self._workers = int(workers)
        self._plan = build_partition(train, cfg.partition, cfg.n_clients, cfg.seed, k=cfg.cnum, alpha=cfg.alpha)
        self._shards = [train.subset(shard) for shard in self._plan.shards]
        self._global_params = initial_params(cfg, train.feature_dim)
        self._round_index = 0
        self._logger = get_logger()

    @property
    def config(self):
        return self._cfg

    @property
    def plan(self):
        return self._plan

    @property
    def shards(self):
        return self._shards

    @property
    def global_params(self):
        return self._global_params

    @property
    def round_index(self):
        """
        Index of the next round to run.
        """
        return self._round_index

    def _train_clients(self, participants, w_global, round_index):
        def train(client_id):
            return local_train(self._shards[client_id], w_global, self._cfg, client_id, round_index)

        if self._workers == 1 or len(participants) == 1:
            return [train(client_id) for client_id in participants]
        with ThreadPoolExecutor(max_workers=min(self._workers, len(participants))) as pool:
            return list(pool.map(train, participants))

    def _client_report(self, update):
        stats = label_stats(self._shards[update.client_id])
        result = evaluate(update.params, self._test, self._cfg)
        return {
            "client_id": update.client_id,
            "shard_size": update.shard_size,
            "labels": stats.to_dict(),
            "per_label_accuracy": [float(value) for value in result.per_label_accuracy],
            "group_accuracy": label_group_accuracy(result.per_label_accuracy, stats),
            "local_metrics": dict(update.local_metrics),
        }

    def run_round(self):
        """
        Runs the next round: sample, broadcast, local training, aggregation and evaluation.

        Returns:
            (RoundReport): the metrics of the round.
        """
        cfg = self._cfg
        round_index = self._round_index
        participants = sample_clients(cfg.n_clients, cfg.participation_rate, cfg.seed, round_index)
        w_global = self._global_params

        updates = self._train_clients(participants, w_global, round_index)
        for update in updates:
            self._logger.debug("Round %d, client %d: %s", round_index, update.client_id, update.local_metrics)
        new_params = aggregate(updates, w_global)
        result = evaluate(new_params, self._test, cfg)

        mean_losses = {key: float(np.mean([update.local_metrics[key] for update in updates]))
                       for key in LOCAL_METRIC_KEYS}
        client_reports = [self._client_report(update) for update in updates] if cfg.client_diagnostics else []

        self._global_params = new_params
        self._round_index += 1
        self._logger.info("Round %d/%d: accuracy=%.4f, mean local loss=%.4f, clients=%s", round_index + 1,
                          cfg.rounds, result.accuracy, mean_losses["total"], participants)
        return RoundReport(round_index=round_index,
                           global_accuracy=result.accuracy,
                           per_label_accuracy=result.per_label_accuracy,
                           per_label_counts=result.per_label_counts,
                           mean_local_losses=mean_losses,
                           participating_clients=list(participants),
                           client_reports=client_reports)

    def run(self, on_round=None, progress=False):
        """
        Runs the remaining rounds of the experiment.

        Parameters:
            on_round (callable): optional ``on_round(report, global_params)`` called after every round.
            progress (bool): show a progress bar over the rounds.

        Returns:
            (list): the RoundReport of every round, in round order.
        """
        reports = []
        remaining = range(self._round_index, self._cfg.rounds)
        for _ in get_progress_bar(remaining, len(remaining), desc="Federated rounds", disable=not progress):
            report = self.run_round()
            if on_round is not None:
                on_round(report, self._global_params)
            reports.append(report)
        return reports


def run_experiment(cfg, train, test, workers=1, on_round=None, progress=False):
    """
    Runs every round of a federated experiment and returns its RoundReports. The result is fully determined by
    ``cfg`` and the datasets, whatever the number of workers.
    """
    simulator = FederatedSimulator(cfg, train, test, workers=workers)
    return simulator.run(on_round=on_round, progress=progress)
