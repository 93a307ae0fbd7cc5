import filecmp
import os
import tempfile
import unittest
from unittest import mock

import numpy as np
import pandas as pd

from fedlec_simulator import __main__ as cli
from fedlec_simulator.experiments import exceptions as experiment_exception
from fedlec_simulator.experiments import report as run_report
from fedlec_simulator.experiments.runner import (EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RUNTIME_ERROR, THREADS_ENV_VAR,
                                                 ExperimentRunner, resolve_workers)
from fedlec_simulator.experiments.settings import (build_config, expand_sweep, format_value, load_experiment,
                                                   parse_config, run_name)
from fedlec_simulator.federation.checkpoint import load_checkpoint
from fedlec_simulator.federation.config import ExperimentConfig
from fedlec_simulator.utils.lib import ModeOfUse, load_json_file
from tests.test_data_reader import data_path

SMALL_RUN = data_path("config_small_run.json")
SWEEP = data_path("config_sweep.json")
FIXTURE = data_path("config_fixture.json")


def read_bytes(path):
    with open(path, "rb") as file_obj:
        return file_obj.read()


class TestExperimentFiles(unittest.TestCase):
    """
    This is the TestCase class that tests the parsing of experiment files.
    """

    def test_minimal_file_takes_the_defaults(self):
        cfg = parse_config(data_path("config_minimal.json"))
        self.assertEqual(cfg.algorithm, "fedlec")
        expected = dict(ExperimentConfig.defaults(), dataset="blobs", algorithm="fedlec")
        self.assertEqual(cfg.to_dict(), {key: expected[key] for key in ExperimentConfig.keys()})

    def test_out_of_range_value_names_the_key(self):
        with self.assertRaises(experiment_exception.ConfigValidationError) as context:
            parse_config(data_path("config_bad_rate.json"))
        self.assertEqual(context.exception.field, "participation_rate")

    def test_unknown_key(self):
        with self.assertRaises(experiment_exception.ConfigValidationError) as context:
            parse_config(data_path("config_unknown_key.json"))
        self.assertEqual(context.exception.field, "learning_rate")

    def test_syntax_error_gives_the_line(self):
        with self.assertRaises(experiment_exception.ConfigParseError) as context:
            parse_config(data_path("config_bad_syntax.json"))
        self.assertEqual(context.exception.line, 4)
        self.assertIn("line 4", str(context.exception))

    def test_toml_and_json_files_agree(self):
        toml_cfg = parse_config(data_path("config_fixture.toml"))
        json_cfg = parse_config(FIXTURE)
        self.assertEqual(toml_cfg.to_dict(), json_cfg.to_dict())
        self.assertEqual(toml_cfg.config_hash(), json_cfg.config_hash())

    def test_toml_sweep_table(self):
        toml_cfg, toml_sweep = load_experiment(data_path("config_sweep.toml"))
        json_cfg, json_sweep = load_experiment(SWEEP)
        self.assertEqual(toml_sweep, json_sweep)
        toml_runs = expand_sweep(toml_cfg, toml_sweep)
        json_runs = expand_sweep(json_cfg, json_sweep)
        self.assertEqual([name for name, _ in toml_runs], [name for name, _ in json_runs])
        self.assertEqual([cfg.config_hash() for _, cfg in toml_runs], [cfg.config_hash() for _, cfg in json_runs])

    def test_toml_syntax_error_gives_the_line(self):
        with self.assertRaises(experiment_exception.ConfigParseError) as context:
            parse_config(data_path("config_bad_syntax.toml"))
        self.assertEqual(context.exception.line, 3)
        self.assertIn("line 3", str(context.exception))

    def test_toml_unknown_key(self):
        with self.assertRaises(experiment_exception.ConfigValidationError) as context:
            parse_config(data_path("config_unknown_key.toml"))
        self.assertEqual(context.exception.field, "learning_rate")

    def test_missing_file(self):
        with self.assertRaises(experiment_exception.ConfigParseError) as context:
            parse_config(data_path("no_such_experiment.json"))
        self.assertIsNone(context.exception.line)

    def test_fixture_round_trip(self):
        cfg = parse_config(FIXTURE)
        self.assertEqual((cfg.algorithm, cfg.partition, cfg.alpha, cfg.seed), ("fedprox", "dirichlet", 0.5, 3))
        self.assertEqual(cfg.hidden_sizes, (12, 8))
        self.assertEqual(ExperimentConfig.from_dict(cfg.to_dict()).config_hash(), cfg.config_hash())

    def test_relative_idx_paths(self):
        settings = {"dataset": "idx", "algorithm": "fedavg", "train_images": "mnist/train-images.idx",
                    "train_labels": "/data/train-labels.idx", "test_images": "t10k-images.idx",
                    "test_labels": "t10k-labels.idx"}
        cfg = build_config(settings, os.path.join(os.sep, "experiments"))
        self.assertEqual(cfg.train_images, os.path.join(os.sep, "experiments", "mnist", "train-images.idx"))
        self.assertEqual(cfg.train_labels, "/data/train-labels.idx")

    def test_sweep_expansion(self):
        cfg, sweep = load_experiment(SWEEP)
        runs = expand_sweep(cfg, sweep)
        self.assertEqual(len(runs), 9)
        self.assertEqual(runs[0][0], "algorithm=fedavg__seed=0")
        self.assertEqual(runs[-1][0], "algorithm=fedlec__seed=2")
        self.assertEqual((runs[5][1].algorithm, runs[5][1].seed), ("fedprox", 2))
        self.assertEqual(expand_sweep(cfg, {}), [("", cfg)])

    def test_shipped_experiments_parse(self):
        experiments_dir = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "experiments")
        expected_runs = {"ablation.json": 12, "clients.json": 24, "cnum2.json": 6, "dir01.json": 9,
                         "local_epochs.toml": 24, "mnist_idx.json": 1, "participation.json": 18,
                         "time_steps.toml": 24}
        self.assertEqual(sorted(os.listdir(experiments_dir)), sorted(expected_runs))
        for filename, n_runs in expected_runs.items():
            cfg, sweep = load_experiment(os.path.join(experiments_dir, filename))
            self.assertEqual(len(expand_sweep(cfg, sweep)), n_runs, filename)

    def test_run_names(self):
        self.assertEqual(run_name({"use_gc": False, "alpha": 0.10, "hidden_sizes": [16, 8]}),
                         "use_gc=false__alpha=0.1__hidden_sizes=16-8")
        self.assertEqual(format_value(3), "3")


class TestExperimentRunner(unittest.TestCase):
    """
    This is the TestCase class that tests the execution of experiment files and their result files.
    """

    def setUp(self):
        self.tmp_dir = tempfile.TemporaryDirectory()
        self.out_dir = self.tmp_dir.name
        self.runner = ExperimentRunner(progress=False)

    def tearDown(self):
        self.tmp_dir.cleanup()

    def test_single_run_writes_every_file(self):
        run_dir = os.path.join(self.out_dir, "small")
        self.assertEqual(self.runner.run(SMALL_RUN, run_dir), EXIT_OK)
        cfg = parse_config(SMALL_RUN)

        manifest = load_json_file(os.path.join(run_dir, run_report.MANIFEST_FILENAME))
        self.assertEqual(manifest["config_hash"], cfg.config_hash())
        self.assertEqual(manifest["partition"], "cnum:2")
        self.assertEqual(sum(manifest["shard_sizes"]), cfg.num_classes * cfg.per_class)
        for output in manifest["outputs"]:
            self.assertTrue(os.path.isfile(os.path.join(run_dir, output)), output)

        rows = run_report.read_metrics_csv(os.path.join(run_dir, run_report.METRICS_FILENAME))
        self.assertEqual([row.round_index for row in rows], list(range(cfg.rounds)))
        per_label = load_json_file(os.path.join(run_dir, run_report.PER_LABEL_FILENAME))
        self.assertAlmostEqual(per_label["accuracy"], rows[-1].accuracy, delta=1e-9)

        diagnostics = load_json_file(os.path.join(run_dir, run_report.CLIENT_DIAGNOSTICS_FILENAME))
        self.assertEqual(len(diagnostics["rounds"]), cfg.rounds)
        self.assertEqual(len(diagnostics["rounds"][0]["clients"]), cfg.n_clients)

        with np.load(os.path.join(run_dir, run_report.FEATURES_FILENAME)) as archive:
            self.assertEqual(archive["features"].shape, (cfg.num_classes * cfg.test_per_class, 8))
            self.assertEqual(archive["labels"].shape, (cfg.num_classes * cfg.test_per_class,))

        params, round_index = load_checkpoint(os.path.join(run_dir, run_report.CHECKPOINT_DIRNAME, "round_4.flsn"))
        self.assertEqual(round_index, 4)
        self.assertEqual(params.layout, cfg.build_model(cfg.feature_dim).get_params().layout)

    def test_repeated_runs_are_byte_identical(self):
        first, second, parallel = (os.path.join(self.out_dir, name) for name in ("first", "second", "parallel"))
        self.assertEqual(self.runner.run(SMALL_RUN, first), EXIT_OK)
        self.assertEqual(self.runner.run(SMALL_RUN, second), EXIT_OK)
        self.runner.workers = 4
        self.assertEqual(self.runner.run(SMALL_RUN, parallel), EXIT_OK)

        metrics = read_bytes(os.path.join(first, run_report.METRICS_FILENAME))
        for run_dir in (second, parallel):
            self.assertEqual(read_bytes(os.path.join(run_dir, run_report.METRICS_FILENAME)), metrics)
            self.assertTrue(filecmp.cmp(os.path.join(first, run_report.MANIFEST_FILENAME),
                                        os.path.join(run_dir, run_report.MANIFEST_FILENAME), shallow=False))

    def test_checkpoints_and_metrics_rows(self):
        cfg = parse_config(FIXTURE)
        run_dir = os.path.join(self.out_dir, "fixture")
        reports = self.runner.run_config(cfg, run_dir)
        checkpoints = sorted(os.listdir(os.path.join(run_dir, run_report.CHECKPOINT_DIRNAME)))
        self.assertEqual(checkpoints, ["round_0.flsn", "round_1.flsn"])

        rows = run_report.read_metrics_csv(os.path.join(run_dir, run_report.METRICS_FILENAME))
        for row, report in zip(rows, reports):
            expected = run_report.MetricsRow.from_report(cfg, report)
            self.assertEqual((row.algorithm, row.partition, row.seed, row.round_index, row.participants),
                             (expected.algorithm, "dir:0.5", 3, expected.round_index, expected.participants))
            self.assertAlmostEqual(row.accuracy, expected.accuracy, delta=1e-9)
            np.testing.assert_allclose(row.per_label_accuracy, expected.per_label_accuracy, atol=1e-9)
            self.assertAlmostEqual(row.loss_prox, expected.loss_prox, delta=1e-9)
        self.assertEqual(list(run_report.metrics_frame(rows).columns), run_report.metrics_columns(cfg.num_classes))

    def test_seed_override(self):
        self.assertEqual(self.runner.run(FIXTURE, self.out_dir, seed=5), EXIT_OK)
        manifest = load_json_file(os.path.join(self.out_dir, run_report.MANIFEST_FILENAME))
        self.assertEqual(manifest["seeds"]["seed"], 5)
        self.assertEqual(manifest["config"]["seed"], 5)

    def test_sweep_and_paired_comparison(self):
        self.assertEqual(self.runner.run(SWEEP, self.out_dir), EXIT_OK)
        cfg, sweep = load_experiment(SWEEP)
        run_dirs = [os.path.join(self.out_dir, name) for name, _ in expand_sweep(cfg, sweep)]
        self.assertEqual(sorted(os.listdir(self.out_dir)), sorted(os.path.basename(path) for path in run_dirs))

        table = self.runner.compare(run_dirs, os.path.join(self.out_dir, "comparison.csv"))
        self.assertTrue(os.path.isfile(os.path.join(self.out_dir, "comparison.csv")))
        self.assertEqual(len(table), 12)
        self.assertEqual(list(table["algorithm"].unique()), ["fedavg", "fedlec", "fedprox"])
        self.assertTrue((table["reference"] == "fedavg").all())
        reference = table[table["algorithm"] == "fedavg"]
        self.assertTrue((reference["delta"] == 0.0).all())
        self.assertEqual(list(reference["seed"]), ["0", "1", "2", "mean"])

    def test_compare_with_itself(self):
        self.runner.run(FIXTURE, self.out_dir)
        table = self.runner.compare([self.out_dir, self.out_dir])
        self.assertTrue((table["delta"] == 0.0).all())

    def test_compare_refuses_bad_inputs(self):
        with self.assertRaises(experiment_exception.UnpairedRuns):
            self.runner.compare([self.out_dir])
        with self.assertRaises(experiment_exception.IncompleteRun):
            self.runner.compare([self.out_dir, self.out_dir])

        fixture_dir = os.path.join(self.out_dir, "fixture")
        quantity_dir = os.path.join(self.out_dir, "quantity")
        self.runner.run(FIXTURE, fixture_dir)
        self.runner.run_config(parse_config(FIXTURE).with_overrides({"partition": "quantity"}), quantity_dir)
        with self.assertRaises(experiment_exception.MismatchedPartitions):
            self.runner.compare([fixture_dir, quantity_dir])

    def test_partition_report(self):
        cfg = parse_config(SMALL_RUN)
        table = self.runner.partition_report(SMALL_RUN)
        self.assertEqual(table.shape, (cfg.n_clients, cfg.num_classes))
        np.testing.assert_allclose(np.asarray(table, dtype=np.float64).sum(axis=0), 100.0)
        self.assertTrue(((np.asarray(table) > 0).sum(axis=1) <= cfg.cnum).all())

    def test_configuration_errors(self):
        self.assertEqual(self.runner.run(data_path("config_bad_rate.json"), self.out_dir), EXIT_CONFIG_ERROR)
        self.runner.mode = ModeOfUse.EXCEPTION_MODE
        with self.assertRaises(experiment_exception.ConfigValidationError):
            self.runner.run(data_path("config_bad_rate.json"), self.out_dir)
        with self.assertRaises(TypeError):
            self.runner.mode = "silent"

    def test_thread_override(self):
        with mock.patch.dict(os.environ, {THREADS_ENV_VAR: "3"}):
            self.assertEqual(resolve_workers(1), 3)
        with mock.patch.dict(os.environ, {THREADS_ENV_VAR: ""}):
            self.assertEqual(resolve_workers(2), 2)
        for value in ("0", "many"):
            with mock.patch.dict(os.environ, {THREADS_ENV_VAR: value}):
                with self.assertRaises(experiment_exception.ConfigValidationError) as context:
                    resolve_workers(1)
                self.assertEqual(context.exception.field, THREADS_ENV_VAR)
                self.assertEqual(self.runner.run(SMALL_RUN, self.out_dir), EXIT_CONFIG_ERROR)


class TestCommandLine(unittest.TestCase):
    """
    This is the TestCase class that tests the command line and its exit codes.
    """

    def setUp(self):
        self.tmp_dir = tempfile.TemporaryDirectory()
        self.out_dir = self.tmp_dir.name

    def tearDown(self):
        self.tmp_dir.cleanup()

    def test_exit_codes(self):
        comparison_csv = os.path.join(self.out_dir, "paired.csv")
        with mock.patch("builtins.print"):
            self.assertEqual(cli.main(["run", FIXTURE, "--out", self.out_dir, "--no-progress"]), EXIT_OK)
            self.assertEqual(cli.main(["compare", self.out_dir, self.out_dir, "--out", comparison_csv]), EXIT_OK)
            self.assertTrue(os.path.isfile(comparison_csv))
            self.assertEqual(cli.main(["partition-report", FIXTURE]), EXIT_OK)
            self.assertEqual(cli.main(["run", data_path("config_bad_syntax.json"), "--out", self.out_dir]),
                             EXIT_CONFIG_ERROR)
            self.assertEqual(cli.main(["partition-report", data_path("config_unknown_key.json")]),
                             EXIT_CONFIG_ERROR)
            self.assertEqual(cli.main(["compare", self.out_dir]), EXIT_RUNTIME_ERROR)

    def test_compare_writes_a_default_csv(self):
        run_dir = os.path.join(self.out_dir, "run")
        work_dir = os.path.join(self.out_dir, "work")
        os.makedirs(work_dir)
        self.assertEqual(cli.main(["run", SMALL_RUN, "--out", run_dir, "--no-progress"]), EXIT_OK)
        previous_dir = os.getcwd()
        os.chdir(work_dir)
        try:
            with mock.patch("builtins.print") as printed:
                self.assertEqual(cli.main(["compare", run_dir, run_dir]), EXIT_OK)
        finally:
            os.chdir(previous_dir)
        printed.assert_called_once()
        table = pd.read_csv(os.path.join(work_dir, run_report.COMPARISON_FILENAME))
        self.assertEqual(list(table.columns),
                         ["algorithm", "partition", "seed", "final_accuracy", "reference", "delta"])
        self.assertTrue((table["delta"] == 0.0).all())

    def test_workers_flag_and_environment(self):
        first, second = os.path.join(self.out_dir, "first"), os.path.join(self.out_dir, "second")
        self.assertEqual(cli.main(["run", SMALL_RUN, "--out", first, "--workers", "1", "--no-progress"]), EXIT_OK)
        with mock.patch.dict(os.environ, {THREADS_ENV_VAR: "4"}):
            self.assertEqual(cli.main(["run", SMALL_RUN, "--out", second, "--no-progress"]), EXIT_OK)
        self.assertEqual(read_bytes(os.path.join(first, run_report.METRICS_FILENAME)),
                         read_bytes(os.path.join(second, run_report.METRICS_FILENAME)))


def build_test_suite():
    # Create a pool of tests
    test_suite = unittest.TestSuite()
    loader = unittest.TestLoader()
    for test_case in (TestExperimentFiles, TestExperimentRunner, TestCommandLine):
        test_suite.addTests(loader.loadTestsFromTestCase(test_case))
    return test_suite


def build_text_report():
    # Generate a tests report
    test_suite = build_test_suite()
    test_runner = unittest.TextTestRunner()
    test_runner.run(test_suite)


if __name__ == "__main__":
    build_text_report()
