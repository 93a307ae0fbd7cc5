""" The **experiments.runner** module contains the **ExperimentRunner()** class, which executes experiment files
(single runs or sweeps) and writes the result files of every run:

- ``manifest.json``: configuration hash, seeds, library version, output paths and the canonical configuration;
- ``metrics.csv``: one row per round (see ``experiments.report``);
- ``per_label_accuracy.json``: final per-label accuracy and test counts;
- ``checkpoints/round_<r>.flsn``: global parameters after round ``r`` (every ``checkpoint_every`` rounds and at
  the last round);
- ``client_diagnostics.json`` and ``features.npz`` when enabled.
"""

# Import python libraries
import os
import traceback

# Import internal libraries
import fedlec_simulator
from fedlec_simulator.data.partition import build_partition
from fedlec_simulator.experiments import exceptions as custom_exception
from fedlec_simulator.experiments import report as run_report
from fedlec_simulator.experiments.settings import (apply_overrides, expand_sweep, load_datasets, load_experiment,
                                                   parse_config)
from fedlec_simulator.federation.checkpoint import save_checkpoint
from fedlec_simulator.federation.engine import FederatedSimulator
from fedlec_simulator.snn.neuron import NeuronMode
from fedlec_simulator.utils.lib import ModeOfUse, get_logger, get_progress_bar, save_json_file

EXIT_OK = 0
EXIT_CONFIG_ERROR = 1
EXIT_RUNTIME_ERROR = 2

THREADS_ENV_VAR = "FEDLEC_THREADS"


def resolve_workers(workers=1):
    """
    Returns the number of worker threads: the ``FEDLEC_THREADS`` environment variable when set, ``workers``
    otherwise.

    Raises:
        ConfigValidationError: if the resulting value is not a positive integer.
    """
    source, value = "workers", workers
    if os.environ.get(THREADS_ENV_VAR, "").strip():
        source, value = THREADS_ENV_VAR, os.environ[THREADS_ENV_VAR].strip()
    try:
        resolved = int(value)
    except (TypeError, ValueError):
        raise custom_exception.ConfigValidationError(source, "expected a positive integer, got {0!r}".format(value))
    if resolved < 1:
        raise custom_exception.ConfigValidationError(source, "expected a positive integer, got {0!r}".format(value))
    return resolved


class ExperimentRunner:
    """
    Runs experiment files and writes their results.

    Attributes:
        workers (int): number of threads training clients in parallel (overridden by ``FEDLEC_THREADS``).
        mode (ModeOfUse): reaction to a failing run of a sweep. In SILENT_MODE (default) the failure is logged and
            the remaining runs are executed; in EXCEPTION_MODE the exception is raised.
        progress (bool): show progress bars over the runs and the rounds.

    Examples:
        .. code-block:: python

            runner = ExperimentRunner(workers=4)
            exit_code = runner.run("experiments/cnum2.json", "results/cnum2")
            print(runner.compare(["results/cnum2/algorithm=fedavg", "results/cnum2/algorithm=fedlec"]))

    """

    def __init__(self, workers=1, mode=ModeOfUse.SILENT_MODE, progress=True):
        self._workers = workers
        self._mode = mode
        self._progress = progress
        self._logger = get_logger()

    @property
    def mode(self):
        return self._mode

    @mode.setter
    def mode(self, new_value):
        if not isinstance(new_value, ModeOfUse):
            raise TypeError("mode must be a ModeOfUse value")
        self._mode = new_value

    @property
    def workers(self):
        return self._workers

    @workers.setter
    def workers(self, new_value):
        self._workers = new_value

    @property
    def progress(self):
        return self._progress

    @progress.setter
    def progress(self, new_value):
        self._progress = bool(new_value)

    def run(self, cfg_path, out_dir, seed=None):
        """
        Executes every run of an experiment file. A single run writes into ``out_dir``; a sweep writes one
        sub-directory per combination. Existing result files are overwritten, and identical configurations
        produce identical files.

        Parameters:
            cfg_path (str): path of the experiment file.
            out_dir (str): output directory.
            seed (int): optional override of the experiment seed (a swept seed takes precedence).

        Returns:
            (int): 0 on success, 1 on a configuration error, 2 if any run failed.

        Raises:
            FedLecSimulatorError: the first failure, in EXCEPTION_MODE only.
        """
        try:
            workers = resolve_workers(self._workers)
            cfg, sweep = load_experiment(cfg_path)
            if seed is not None:
                cfg = apply_overrides(cfg, {"seed": seed})
            runs = expand_sweep(cfg, sweep)
        except custom_exception.ConfigError as error:
            if self._mode == ModeOfUse.EXCEPTION_MODE:
                raise
            self._logger.error(str(error))
            return EXIT_CONFIG_ERROR

        self._logger.info("Experiment %s: %d run(s) into %s", cfg_path, len(runs), out_dir)
        failures = 0
        show_runs = self._progress and len(runs) > 1
        for name, run_cfg in get_progress_bar(runs, len(runs), desc="Experiment runs", disable=not show_runs):
            run_dir = os.path.join(out_dir, name) if name else out_dir
            try:
                self.run_config(run_cfg, run_dir, workers)
            except Exception as error:
                if self._mode == ModeOfUse.EXCEPTION_MODE:
                    raise
                failures += 1
                self._logger.error("Run %s failed: %s\n%s", run_dir, error, traceback.format_exc())
        if failures:
            self._logger.error("%d of %d run(s) failed", failures, len(runs))
            return EXIT_RUNTIME_ERROR
        return EXIT_OK

    def run_config(self, cfg, run_dir, workers=1):
        """
        Executes one run and writes its result files into ``run_dir``.

        Returns:
            (list): the RoundReport of every round.
        """
        checkpoint_dir = os.path.join(run_dir, run_report.CHECKPOINT_DIRNAME)
        os.makedirs(checkpoint_dir, exist_ok=True)
        self._logger.info("Run %s: algorithm=%s, partition=%s, seed=%d, config %s", run_dir, cfg.algorithm,
                          cfg.descriptor, cfg.seed, cfg.config_hash()[:12])

        train, test = load_datasets(cfg)
        simulator = FederatedSimulator(cfg, train, test, workers=workers)
        rows = []
        checkpoints = []

        def on_round(report, global_params):
            rows.append(run_report.MetricsRow.from_report(cfg, report))
            last_round = report.round_index == cfg.rounds - 1
            periodic = cfg.checkpoint_every and (report.round_index + 1) % cfg.checkpoint_every == 0
            if last_round or periodic:
                filename = "round_{0}.flsn".format(report.round_index)
                save_checkpoint(os.path.join(checkpoint_dir, filename), global_params, report.round_index)
                checkpoints.append(os.path.join(run_report.CHECKPOINT_DIRNAME, filename))

        reports = simulator.run(on_round=on_round, progress=self._progress)

        outputs = [run_report.METRICS_FILENAME, run_report.PER_LABEL_FILENAME]
        run_report.write_metrics_csv(rows, os.path.join(run_dir, run_report.METRICS_FILENAME))
        run_report.write_per_label_json(reports[-1], os.path.join(run_dir, run_report.PER_LABEL_FILENAME))
        if cfg.client_diagnostics:
            run_report.write_client_diagnostics(reports,
                                                os.path.join(run_dir, run_report.CLIENT_DIAGNOSTICS_FILENAME))
            outputs.append(run_report.CLIENT_DIAGNOSTICS_FILENAME)
        if cfg.dump_features:
            model = cfg.build_model(test.feature_dim)
            model.set_params(simulator.global_params)
            model.mode = NeuronMode.SPIKE
            run_report.write_features(os.path.join(run_dir, run_report.FEATURES_FILENAME),
                                      model.hidden_rates(test.features), test.labels)
            outputs.append(run_report.FEATURES_FILENAME)

        save_json_file({
            "config_hash": cfg.config_hash(),
            "seeds": {"seed": cfg.seed, "data_seed": cfg.data_seed},
            "version": fedlec_simulator.__version__,
            "partition": simulator.plan.descriptor,
            "shard_sizes": simulator.plan.shard_sizes(),
            "train_checksum": train.checksum(),
            "test_checksum": test.checksum(),
            "outputs": outputs + checkpoints,
            "config": cfg.to_dict(),
        }, os.path.join(run_dir, run_report.MANIFEST_FILENAME))
        self._logger.info("Run %s finished: final accuracy %.4f", run_dir, reports[-1].global_accuracy)
        return reports

    def compare(self, run_dirs, out_csv=None):
        """
        Builds the paired comparison table of completed runs and optionally writes it as CSV.

        Returns:
            (pandas.DataFrame): see ``experiments.report.compare_runs()``.
        """
        table = run_report.compare_runs(run_dirs)
        if out_csv:
            table.to_csv(out_csv, index=False, float_format=run_report.METRICS_FLOAT_FORMAT)
            self._logger.info("Comparison written to %s", out_csv)
        return table

    def partition_report(self, cfg_path):
        """
        Returns, for the partition of an experiment file, the percentage of each label's training samples
        allocated to each client (clients as rows, labels as columns).
        """
        cfg = parse_config(cfg_path)
        train, _ = load_datasets(cfg)
        plan = build_partition(train, cfg.partition, cfg.n_clients, cfg.seed, k=cfg.cnum, alpha=cfg.alpha)
        return plan.allocation_percentages(train.labels, cfg.num_classes)
