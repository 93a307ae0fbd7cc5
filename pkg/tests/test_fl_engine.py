import os
import struct
import tempfile
import unittest

import numpy as np
from hypothesis import given, settings, strategies as st

from fedlec_simulator.data.dataset import Dataset
from fedlec_simulator.data.partition import partition_iid
from fedlec_simulator.experiments.settings import load_datasets
from fedlec_simulator.federation import exceptions as federation_exception
from fedlec_simulator.federation.checkpoint import CHECKPOINT_MAGIC, load_checkpoint, save_checkpoint
from fedlec_simulator.federation.config import ExperimentConfig
from fedlec_simulator.federation.engine import (ClientUpdate, FederatedSimulator, aggregate, evaluate,
                                                initial_params, local_train, run_experiment, sample_clients)
from fedlec_simulator.nn import exceptions as nn_exception
from fedlec_simulator.nn.layers import ParamVector
from fedlec_simulator.utils.lib import get_random_generator

VECTOR_LAYOUT = [("a", "bias", (2,))]


def make_config(**overrides):
    settings = dict(dataset="blobs", algorithm="fedavg", num_classes=3, per_class=20, test_per_class=10,
                    feature_dim=4, partition="iid", n_clients=2, rounds=2, local_epochs=1, time_steps=2,
                    batch_size=8, hidden_sizes=[8])
    settings.update(overrides)
    return ExperimentConfig.from_dict(settings)


def make_update(client_id, values, shard_size):
    return ClientUpdate(client_id=client_id, params=ParamVector(values, VECTOR_LAYOUT), shard_size=shard_size)


class TestClientSampling(unittest.TestCase):
    """
    This is the TestCase class that tests the per-round client sampling.
    """

    def test_full_participation(self):
        self.assertEqual(sample_clients(10, 1.0, 0, 0), list(range(10)))

    def test_fraction_without_replacement(self):
        for round_index in range(5):
            clients = sample_clients(10, 0.5, 3, round_index)
            self.assertEqual(len(clients), 5)
            self.assertEqual(clients, sorted(set(clients)))
            self.assertTrue(all(0 <= client_id < 10 for client_id in clients))
        self.assertEqual(len(sample_clients(10, 0.3, 3, 0)), 3)
        self.assertEqual(len(sample_clients(10, 0.01, 3, 0)), 1)

    def test_sampling_is_deterministic(self):
        self.assertEqual(sample_clients(20, 0.25, 11, 4), sample_clients(20, 0.25, 11, 4))

    def test_invalid_rate(self):
        for rate in (0.0, 1.5):
            with self.assertRaises(federation_exception.InvalidExperimentConfig):
                sample_clients(10, rate, 0, 0)


class TestAggregation(unittest.TestCase):
    """
    This is the TestCase class that tests the shard-size weighted aggregation.
    """

    def test_weighted_example(self):
        result = aggregate([make_update(0, [1.0, 1.0], 1), make_update(1, [3.0, 3.0], 3)])
        np.testing.assert_array_equal(result.data, [2.5, 2.5])

    def test_single_update_is_returned_unchanged(self):
        update = make_update(4, [0.1, -7.3], 9)
        self.assertEqual(aggregate([update]).data.tobytes(), update.params.data.tobytes())

    def test_identical_parameters_are_a_fixed_point(self):
        updates = [make_update(client_id, [0.1, 1.0 / 3.0], size) for client_id, size in enumerate((3, 5, 7))]
        self.assertEqual(aggregate(updates).data.tobytes(), updates[0].params.data.tobytes())

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.integers(1, 50)), min_size=1,
                    max_size=6),
           st.randoms(use_true_random=False))
    def test_order_of_updates_does_not_matter(self, entries, random):
        updates = [make_update(client_id, [first, second], size)
                   for client_id, (first, second, size) in enumerate(entries)]
        shuffled = list(updates)
        random.shuffle(shuffled)
        self.assertEqual(aggregate(shuffled).data.tobytes(), aggregate(updates).data.tobytes())

    def test_scaling_every_shard_size(self):
        rng = get_random_generator(2)
        values = rng.standard_normal((4, 2))
        sizes = [3, 8, 1, 6]
        base = aggregate([make_update(i, values[i], sizes[i]) for i in range(4)])
        scaled = aggregate([make_update(i, values[i], 7 * sizes[i]) for i in range(4)])
        np.testing.assert_allclose(scaled.data, base.data, rtol=1e-12, atol=1e-15)
        expected = np.average(values, axis=0, weights=sizes)
        np.testing.assert_allclose(base.data, expected, rtol=1e-12, atol=1e-12)

    def test_empty_update_list(self):
        with self.assertRaises(federation_exception.EmptyUpdateList):
            aggregate([])

    def test_layout_mismatch(self):
        other = ClientUpdate(client_id=1, params=ParamVector([1.0, 2.0], [("b", "bias", (2,))]), shard_size=1)
        with self.assertRaises(nn_exception.LayoutMismatch):
            aggregate([make_update(0, [1.0, 1.0], 1), other])


class TestLocalTraining(unittest.TestCase):
    """
    This is the TestCase class that tests the client-side training.
    """

    def test_zero_epochs_return_the_broadcast_parameters(self):
        cfg = make_config(local_epochs=0, algorithm="fedlec")
        train, _ = load_datasets(cfg)
        w_global = initial_params(cfg, train.feature_dim)
        update = local_train(train, w_global, cfg)
        self.assertEqual(update.params.data.tobytes(), w_global.data.tobytes())
        self.assertEqual(update.shard_size, train.n_samples)
        self.assertTrue(all(value == 0.0 for value in update.local_metrics.values()))

    def test_training_is_deterministic(self):
        cfg = make_config(algorithm="fedlec")
        train, _ = load_datasets(cfg)
        w_global = initial_params(cfg, train.feature_dim)
        first = local_train(train, w_global, cfg, client_id=2, round_index=1)
        second = local_train(train, w_global, cfg, client_id=2, round_index=1)
        self.assertEqual(first.params.data.tobytes(), second.params.data.tobytes())
        self.assertNotEqual(first.params.data.tobytes(), w_global.data.tobytes())

    def test_unweighted_fedlec_on_balanced_shard_matches_fedavg(self):
        fedavg = make_config(local_epochs=2)
        fedlec = make_config(local_epochs=2, algorithm="fedlec", theta=0.0, **{"lambda": 0.0})
        train, _ = load_datasets(fedavg)
        w_global = initial_params(fedavg, train.feature_dim)
        expected = local_train(train, w_global, fedavg, client_id=1)
        update = local_train(train, w_global, fedlec, client_id=1)
        self.assertEqual(update.params.data.tobytes(), expected.params.data.tobytes())

    def test_fedprox_with_zero_mu_matches_fedavg(self):
        fedavg = make_config()
        fedprox = make_config(algorithm="fedprox", mu=0.0)
        train, _ = load_datasets(fedavg)
        w_global = initial_params(fedavg, train.feature_dim)
        expected = local_train(train, w_global, fedavg)
        update = local_train(train, w_global, fedprox)
        self.assertEqual(update.params.data.tobytes(), expected.params.data.tobytes())
        self.assertEqual(update.local_metrics["prox"], 0.0)

    def test_fedlec_reports_every_loss_term(self):
        cfg = make_config(algorithm="fedlec")
        train, _ = load_datasets(cfg)
        shard = train.subset(np.flatnonzero(train.labels == 0))
        update = local_train(shard, initial_params(cfg, train.feature_dim), cfg)
        self.assertNotEqual(update.local_metrics["lad"], 0.0)
        self.assertAlmostEqual(update.local_metrics["total"],
                               update.local_metrics["lc"] + 0.1 * update.local_metrics["lgc"]
                               + update.local_metrics["lad"], delta=1e-9)


class TestEvaluation(unittest.TestCase):
    """
    This is the TestCase class that tests the global-model evaluation.
    """

    def test_accuracy_recomposes_from_labels(self):
        cfg = make_config(num_classes=4)
        _, test = load_datasets(cfg)
        result = evaluate(initial_params(cfg, test.feature_dim), test, cfg)
        recomposed = np.sum(result.per_label_accuracy * result.per_label_counts) / np.sum(result.per_label_counts)
        self.assertAlmostEqual(result.accuracy, recomposed, delta=1e-12)
        np.testing.assert_array_equal(result.per_label_counts, [10, 10, 10, 10])

    def test_absent_label_scores_zero(self):
        cfg = make_config()
        test = Dataset(np.ones((4, 4)), [0, 0, 1, 1], num_classes=3)
        result = evaluate(initial_params(cfg, 4), test, cfg)
        self.assertEqual(result.per_label_counts[2], 0)
        self.assertEqual(result.per_label_accuracy[2], 0.0)

    def test_untrained_model_is_at_chance_level(self):
        # Readout rows are exchangeable at initialization, so the accuracy averaged over init seeds is 1/|C|
        cfg = make_config(num_classes=4, test_per_class=50)
        _, test = load_datasets(cfg)
        accuracies = []
        for seed in range(100):
            params = initial_params(cfg.with_overrides({"seed": seed}), test.feature_dim)
            accuracies.append(evaluate(params, test, cfg).accuracy)
        self.assertLessEqual(abs(np.mean(accuracies) - 1.0 / cfg.num_classes), 0.1)

    def test_degenerate_clusters_are_learned(self):
        cfg = make_config(spread=0.0, n_clients=1, rounds=1, local_epochs=40, lr=0.1, time_steps=4,
                          separation=6.0, hidden_sizes=[32])
        train, test = load_datasets(cfg)
        reports = run_experiment(cfg, train, test)
        self.assertEqual(reports[-1].global_accuracy, 1.0)


class TestDefaultNetwork(unittest.TestCase):
    """
    This is the TestCase class that tests the default architecture and initialization on the default blobs.
    """

    def setUp(self):
        self.cfg = ExperimentConfig.from_dict({"dataset": "blobs", "algorithm": "fedavg", "per_class": 60,
                                               "test_per_class": 50, "partition": "iid", "n_clients": 4,
                                               "rounds": 5, "local_epochs": 3, "batch_size": 16})
        self.train, self.test = load_datasets(self.cfg)

    def test_every_hidden_layer_fires_at_initialization(self):
        model = self.cfg.build_model(self.train.feature_dim)
        model.set_params(initial_params(self.cfg, self.train.feature_dim))
        rates = model.spike_rates(self.train.features)
        self.assertEqual(len(rates), len(self.cfg.hidden_sizes))
        for rate in rates:
            self.assertGreater(rate, 0.02)
            self.assertLess(rate, 0.9)

    def test_iid_fedavg_beats_chance(self):
        reports = run_experiment(self.cfg, self.train, self.test)
        self.assertGreaterEqual(reports[-1].global_accuracy, 2.0 / self.cfg.num_classes)


class TestFederatedSimulator(unittest.TestCase):
    """
    This is the TestCase class that tests the round loop.
    """

    def test_single_client_equals_centralized_training(self):
        cfg = make_config(n_clients=1, rounds=3)
        train, test = load_datasets(cfg)
        snapshots = []
        run_experiment(cfg, train, test, on_round=lambda report, params: snapshots.append(params.data.tobytes()))

        shard = train.subset(partition_iid(train, 1, cfg.seed).shards[0])
        params = initial_params(cfg, train.feature_dim)
        for round_index in range(cfg.rounds):
            params = local_train(shard, params, cfg, client_id=0, round_index=round_index).params
            self.assertEqual(snapshots[round_index], params.data.tobytes())

    def test_iid_fedavg_tracks_centralized_training(self):
        settings = dict(num_classes=4, per_class=100, test_per_class=50, feature_dim=8, spread=0.5, separation=4.0,
                        rounds=10, local_epochs=2, time_steps=4, lr=0.1, batch_size=16, hidden_sizes=[128, 64])
        federated = make_config(n_clients=4, **settings)
        centralized = make_config(n_clients=1, **settings)
        train, test = load_datasets(federated)
        federated_accuracy = run_experiment(federated, train, test)[-1].global_accuracy
        centralized_accuracy = run_experiment(centralized, train, test)[-1].global_accuracy
        self.assertGreaterEqual(federated_accuracy, 0.8)
        self.assertGreaterEqual(centralized_accuracy, 0.8)
        self.assertLessEqual(abs(federated_accuracy - centralized_accuracy), 0.05)

    def test_identical_shards_reduce_to_one_local_training(self):
        cfg = make_config()
        train, _ = load_datasets(cfg)
        w_global = initial_params(cfg, train.feature_dim)
        update = local_train(train, w_global, cfg, client_id=0)
        # Shuffling is keyed by client id, so copies of one update stand for a round over identical shards
        updates = [ClientUpdate(client_id, update.params, train.n_samples) for client_id in range(3)]
        self.assertEqual(aggregate(updates, w_global).data.tobytes(), update.params.data.tobytes())

    def test_workers_do_not_change_results(self):
        cfg = make_config(algorithm="fedlec", partition="quantity", cnum=2, n_clients=6, participation_rate=0.5,
                          rounds=2)
        train, test = load_datasets(cfg)
        outcomes = []
        for workers in (1, 4):
            snapshots = []
            reports = run_experiment(cfg, train, test, workers=workers,
                                     on_round=lambda report, params: snapshots.append(params.data.tobytes()))
            outcomes.append((snapshots, [(report.global_accuracy, report.per_label_accuracy.tobytes(),
                                          report.participating_clients, report.mean_local_losses)
                                         for report in reports]))
        self.assertEqual(outcomes[0], outcomes[1])

    def test_round_reports(self):
        cfg = make_config(partition="dirichlet", alpha=0.5, n_clients=4, participation_rate=0.5, rounds=3,
                          client_diagnostics=True)
        train, test = load_datasets(cfg)
        simulator = FederatedSimulator(cfg, train, test)
        self.assertEqual(sum(len(shard) for shard in simulator.shards), train.n_samples)
        reports = simulator.run()
        self.assertEqual([report.round_index for report in reports], [0, 1, 2])
        self.assertEqual(simulator.round_index, 3)
        for report in reports:
            self.assertEqual(len(report.participating_clients), 2)
            self.assertEqual(report.per_label_accuracy.shape, (cfg.num_classes,))
            self.assertEqual([client["client_id"] for client in report.client_reports], report.participating_clients)
            self.assertTrue(0.0 <= report.global_accuracy <= 1.0)

    def test_invalid_simulator_arguments(self):
        cfg = make_config()
        train, test = load_datasets(cfg)
        with self.assertRaises(federation_exception.InvalidExperimentConfig):
            FederatedSimulator(cfg, train, test, workers=0)
        with self.assertRaises(federation_exception.InvalidExperimentConfig):
            FederatedSimulator(make_config(num_classes=4), train, test)


class TestCheckpoint(unittest.TestCase):
    """
    This is the TestCase class that tests the parameter snapshot files.
    """

    def setUp(self):
        self.tmp_dir = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp_dir.name, "round_0001.bin")
        self.params = initial_params(make_config(), 4)

    def tearDown(self):
        self.tmp_dir.cleanup()

    def write_bytes(self, raw):
        with open(self.path, "wb") as checkpoint_file:
            checkpoint_file.write(raw)

    def test_save_and_load(self):
        save_checkpoint(self.path, self.params, round_index=1)
        params, round_index = load_checkpoint(self.path)
        self.assertEqual(round_index, 1)
        self.assertEqual(params.layout, self.params.layout)
        self.assertEqual(params.data.tobytes(), self.params.data.tobytes())

        with open(self.path, "rb") as checkpoint_file:
            first = checkpoint_file.read()
        save_checkpoint(self.path, params, round_index=1)
        with open(self.path, "rb") as checkpoint_file:
            self.assertEqual(checkpoint_file.read(), first)
        self.assertTrue(first.startswith(CHECKPOINT_MAGIC))

    def test_damaged_files(self):
        save_checkpoint(self.path, self.params)
        with open(self.path, "rb") as checkpoint_file:
            raw = checkpoint_file.read()
        header_size = struct.unpack("<I", raw[5:9])[0]

        damaged = {
            "magic": b"XXXXX" + raw[5:],
            "truncated": raw[:9 + header_size // 2],
            "header": raw[:9] + b"{" * header_size + raw[9 + header_size:],
            "payload": raw[:-3],
            "layout": raw[:-8],
        }
        for name, content in damaged.items():
            self.write_bytes(content)
            with self.assertRaises(federation_exception.CheckpointFormatError, msg=name):
                load_checkpoint(self.path)


class TestExperimentConfig(unittest.TestCase):
    """
    This is the TestCase class that tests the validated experiment settings.
    """

    def assertInvalid(self, field_name, **settings):
        with self.assertRaises(federation_exception.InvalidExperimentConfig) as context:
            make_config(**settings)
        self.assertEqual(context.exception.field, field_name)

    def test_defaults(self):
        cfg = ExperimentConfig.from_dict({"dataset": "blobs", "algorithm": "fedlec"})
        self.assertEqual(cfg.hidden_sizes, (128, 64))
        self.assertEqual(cfg.lambda_, 1.0)
        self.assertEqual(cfg.descriptor, "cnum:2")
        self.assertEqual(cfg.layer_sizes(16), [16, 128, 64, 8])
        self.assertEqual(cfg.init_gain, 3.0)
        self.assertNotIn("dataset", ExperimentConfig.defaults())
        self.assertEqual(ExperimentConfig.defaults()["lambda"], 1.0)

    def test_invalid_settings(self):
        self.assertInvalid("participation_rate", participation_rate=1.5)
        self.assertInvalid("num_classes", num_classes=1)
        self.assertInvalid("rounds", rounds=True)
        self.assertInvalid("lambda", **{"lambda": -1.0})
        self.assertInvalid("partition", partition="shards")
        self.assertInvalid("hidden_sizes", hidden_sizes=[])
        self.assertInvalid("init_gain", init_gain=0.0)
        self.assertInvalid("train_images", dataset="idx")
        self.assertInvalid("tau/v_threshold/v_reset", tau=1.0)
        self.assertInvalid("learning_rate", learning_rate=0.1)

    def test_missing_required_key(self):
        with self.assertRaises(federation_exception.InvalidExperimentConfig) as context:
            ExperimentConfig.from_dict({"dataset": "blobs"})
        self.assertEqual(context.exception.field, "algorithm")

    def test_hash_and_overrides(self):
        cfg = make_config()
        self.assertEqual(cfg.config_hash(), make_config().config_hash())
        self.assertEqual(ExperimentConfig.from_dict(cfg.to_dict()), cfg)
        variant = cfg.with_overrides({"algorithm": "fedlec", "seed": 4})
        self.assertEqual((variant.algorithm, variant.seed), ("fedlec", 4))
        self.assertNotEqual(variant.config_hash(), cfg.config_hash())
        self.assertEqual(make_config(partition="dirichlet", alpha=0.5).descriptor, "dir:0.5")


def build_test_suite():
    # Create a pool of tests
    test_suite = unittest.TestSuite()
    loader = unittest.TestLoader()
    for test_case in (TestClientSampling, TestAggregation, TestLocalTraining, TestEvaluation, TestDefaultNetwork,
                      TestFederatedSimulator, TestCheckpoint, TestExperimentConfig):
        test_suite.addTests(loader.loadTestsFromTestCase(test_case))
    return test_suite


def build_text_report():
    # Generate a tests report
    test_suite = build_test_suite()
    test_runner = unittest.TextTestRunner()
    test_runner.run(test_suite)


if __name__ == "__main__":
    build_text_report()
