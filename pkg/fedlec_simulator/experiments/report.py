""" The **experiments.report** module writes and reads the result files of a run and builds the comparison table of
several runs.

``metrics.csv`` holds one row per round with the columns::

    algorithm, partition, seed, round, accuracy, acc_label_0 ... acc_label_<|C|-1>,
    loss_total, loss_lc, loss_lgc, loss_lad, loss_prox, participants

where ``participants`` is the ``;``-joined list of client ids. Floats use the fixed format ``METRICS_FLOAT_FORMAT``
so that identical runs produce identical bytes.
"""

# Import python libraries
import os
from dataclasses import dataclass

# Import third-party libraries
import numpy as np
import pandas as pd

# Import internal libraries
from fedlec_simulator.experiments import exceptions as custom_exception
from fedlec_simulator.utils.lib import load_json_file, save_json_file

METRICS_FLOAT_FORMAT = "%.10f"

MANIFEST_FILENAME = "manifest.json"
METRICS_FILENAME = "metrics.csv"
PER_LABEL_FILENAME = "per_label_accuracy.json"
CLIENT_DIAGNOSTICS_FILENAME = "client_diagnostics.json"
FEATURES_FILENAME = "features.npz"
COMPARISON_FILENAME = "comparison.csv"
CHECKPOINT_DIRNAME = "checkpoints"

_LEADING_COLUMNS = ["algorithm", "partition", "seed", "round", "accuracy"]
_LOSS_COLUMNS = ["loss_total", "loss_lc", "loss_lgc", "loss_lad", "loss_prox"]
_PARTICIPANTS_COLUMN = "participants"
_LABEL_COLUMN_PREFIX = "acc_label_"


def metrics_columns(num_classes):
    """
    Returns the ordered column names of ``metrics.csv`` for ``num_classes`` labels.
    """
    label_columns = ["{0}{1}".format(_LABEL_COLUMN_PREFIX, label) for label in range(num_classes)]
    return _LEADING_COLUMNS + label_columns + _LOSS_COLUMNS + [_PARTICIPANTS_COLUMN]


@dataclass(frozen=True)
class MetricsRow:
    """
    One line of ``metrics.csv``: the global metrics of one round of one run.
    """
    algorithm: str
    partition: str
    seed: int
    round_index: int
    accuracy: float
    per_label_accuracy: tuple
    loss_total: float
    loss_lc: float
    loss_lgc: float
    loss_lad: float
    loss_prox: float
    participants: tuple

    @classmethod
    def from_report(cls, cfg, report):
        losses = report.mean_local_losses
        return cls(algorithm=cfg.algorithm,
                   partition=cfg.descriptor,
                   seed=cfg.seed,
                   round_index=report.round_index,
                   accuracy=float(report.global_accuracy),
                   per_label_accuracy=tuple(float(value) for value in report.per_label_accuracy),
                   loss_total=losses["total"],
                   loss_lc=losses["lc"],
                   loss_lgc=losses["lgc"],
                   loss_lad=losses["lad"],
                   loss_prox=losses["prox"],
                   participants=tuple(int(client_id) for client_id in report.participating_clients))

    def to_record(self):
        record = {
            "algorithm": self.algorithm,
            "partition": self.partition,
            "seed": self.seed,
            "round": self.round_index,
            "accuracy": self.accuracy,
        }
        for label, value in enumerate(self.per_label_accuracy):
            record["{0}{1}".format(_LABEL_COLUMN_PREFIX, label)] = value
        for column in _LOSS_COLUMNS:
            record[column] = getattr(self, column)
        record[_PARTICIPANTS_COLUMN] = ";".join(str(client_id) for client_id in self.participants)
        return record

    @classmethod
    def from_record(cls, record):
        label_columns = sorted((column for column in record if column.startswith(_LABEL_COLUMN_PREFIX)),
                               key=lambda column: int(column[len(_LABEL_COLUMN_PREFIX):]))
        participants = str(record[_PARTICIPANTS_COLUMN])
        return cls(algorithm=str(record["algorithm"]),
                   partition=str(record["partition"]),
                   seed=int(record["seed"]),
                   round_index=int(record["round"]),
                   accuracy=float(record["accuracy"]),
                   per_label_accuracy=tuple(float(record[column]) for column in label_columns),
                   loss_total=float(record["loss_total"]),
                   loss_lc=float(record["loss_lc"]),
                   loss_lgc=float(record["loss_lgc"]),
                   loss_lad=float(record["loss_lad"]),
                   loss_prox=float(record["loss_prox"]),
                   participants=tuple(int(client_id) for client_id in participants.split(";") if client_id))


def metrics_frame(rows):
    """
    Converts MetricsRows into a pandas DataFrame with the columns of ``metrics.csv``.
    """
    num_classes = len(rows[0].per_label_accuracy) if rows else 0
    return pd.DataFrame([row.to_record() for row in rows], columns=metrics_columns(num_classes))


def write_metrics_csv(rows, path):
    metrics_frame(rows).to_csv(path, index=False, float_format=METRICS_FLOAT_FORMAT)


def read_metrics_csv(path):
    """
    Reads ``metrics.csv`` back into MetricsRows.
    """
    df = pd.read_csv(path, dtype={"algorithm": str, "partition": str, _PARTICIPANTS_COLUMN: str},
                     keep_default_na=False)
    return [MetricsRow.from_record(record) for record in df.to_dict(orient="records")]


def write_per_label_json(report, path):
    save_json_file({
        "round": int(report.round_index),
        "accuracy": float(report.global_accuracy),
        "per_label_accuracy": [float(value) for value in report.per_label_accuracy],
        "per_label_counts": [int(count) for count in report.per_label_counts],
    }, path)


def write_client_diagnostics(reports, path):
    save_json_file({"rounds": [{"round": int(report.round_index), "clients": report.client_reports}
                               for report in reports]}, path)


def write_features(path, features, labels):
    """
    Writes the hidden features of the test set and their labels as a ``.npz`` archive.
    """
    np.savez(path, features=np.asarray(features, dtype=np.float64), labels=np.asarray(labels, dtype=np.int64))


def read_run(run_dir):
    """
    Reads the manifest and the metrics of a completed run.

    Returns:
        (tuple): ``(manifest, rows)``.

    Raises:
        IncompleteRun: if the manifest or the metrics file is missing.
    """
    manifest_path = os.path.join(run_dir, MANIFEST_FILENAME)
    metrics_path = os.path.join(run_dir, METRICS_FILENAME)
    for path, filename in ((manifest_path, MANIFEST_FILENAME), (metrics_path, METRICS_FILENAME)):
        if not os.path.isfile(path):
            raise custom_exception.IncompleteRun(run_dir, filename)
    rows = read_metrics_csv(metrics_path)
    if not rows:
        raise custom_exception.IncompleteRun(run_dir, "metrics row")
    return load_json_file(manifest_path), rows


def compare_runs(run_dirs):
    """
    Builds the paired comparison of completed runs. The final-round accuracy of each run is grouped by
    (algorithm, seed); the algorithm of the first run is the reference and every algorithm reports its per-seed
    delta to the reference, followed by one ``mean`` row per algorithm.

    Parameters:
        run_dirs (list): run directories written by ``ExperimentRunner.run()``.

    Returns:
        (pandas.DataFrame): columns ``algorithm, partition, seed, final_accuracy, reference, delta``.

    Raises:
        UnpairedRuns: with fewer than two runs, or when an algorithm misses a seed of the reference.
        MismatchedPartitions: if the runs were trained on different partitions.
        IncompleteRun: if a run directory is incomplete.
    """
    if len(run_dirs) < 2:
        raise custom_exception.UnpairedRuns("at least two run directories are required")
    finals = []
    for run_dir in run_dirs:
        _, rows = read_run(run_dir)
        last = max(rows, key=lambda row: row.round_index)
        finals.append({"algorithm": last.algorithm, "partition": last.partition, "seed": last.seed,
                       "final_accuracy": last.accuracy})
    df = pd.DataFrame(finals)

    partitions = sorted(df["partition"].unique())
    if len(partitions) > 1:
        raise custom_exception.MismatchedPartitions(partitions)

    reference = finals[0]["algorithm"]
    paired = df.groupby(["algorithm", "seed"], sort=True)["final_accuracy"].mean().unstack("algorithm")
    reference_seeds = set(paired.index[paired[reference].notna()])
    for algorithm in paired.columns:
        seeds = set(paired.index[paired[algorithm].notna()])
        if seeds != reference_seeds:
            raise custom_exception.UnpairedRuns(
                "{0} ran seeds {1} but the reference {2} ran {3}".format(algorithm, sorted(seeds), reference,
                                                                         sorted(reference_seeds)))

    records = []
    algorithms = [reference] + sorted(algorithm for algorithm in paired.columns if algorithm != reference)
    for algorithm in algorithms:
        deltas = paired[algorithm] - paired[reference]
        for seed in sorted(reference_seeds):
            records.append({"algorithm": algorithm, "partition": partitions[0], "seed": str(seed),
                            "final_accuracy": paired.at[seed, algorithm], "reference": reference,
                            "delta": deltas[seed]})
        records.append({"algorithm": algorithm, "partition": partitions[0], "seed": "mean",
                        "final_accuracy": paired[algorithm].mean(), "reference": reference,
                        "delta": deltas.mean()})
    return pd.DataFrame(records, columns=["algorithm", "partition", "seed", "final_accuracy", "reference", "delta"])
