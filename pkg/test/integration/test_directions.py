"""
Paired-seed experiments on the synthetic benchmark checking the direction of the main effects.
They take minutes of CPU time and only run with COMACT_SLOW=1.
"""
import os
import shutil
import tempfile
import unittest
import numpy
from parameters import ParameterSet
from comact.homage.dataset import ActivityDataset
from comact.storage.datastore import RunDataStore
from comact.synth import SynthConfig, generate_dataset
from comact.training import train, steps_to_threshold
from comact.training.scene_graph_oracle import train_scene_graph_oracle
from comact.analysis.fewshot import few_shot_protocol
from comact.analysis.exports import export_embeddings
from comact.analysis.metrics import paired_sign_test
from comact.visualization.plotting import EmbeddingProjectionPlot
from comact.cli import main
from test.unittests.fixtures import tiny_parameters

SEEDS = [1, 2, 3, 4, 5]

# the synthetic defaults with small encoders
BENCHMARK = {
    'synth.cross_modal_correlation': 0.8,
    'synth.label_noise': 0.1,
    'synth.n_activity': 6,
    'synth.n_atomic': 24,
    'synth.atomic_per_activity': 3,
    'synth.n_train': 96,
    'synth.n_test1': 32,
    'synth.n_test2': 32,
    'synth.num_frames': 48,
    'synth.frame_size': 16,
    'synth.fps': 16.0,
    'synth.n_obj': 12,
    'synth.n_rel': 6,
    'data.n_blocks': 6,
    'model.feature_dim': 16,
    'model.predictor_hidden': 16,
    'train.batch_size': 8,
    'train.epochs': 8,
    'train.max_steps': None,
    'train.log_every': 4,
    'train.pretrain_epochs': 4,
    'train.pred_observed': 3,
    'train.pred_steps': 2,
    'eval.fewshot.n_novel': 2,
    'eval.fewshot.shots': [1, 5],
    'eval.fewshot.epochs': 100,
}

slow = unittest.skipUnless(os.environ.get('COMACT_SLOW') == '1', 'set COMACT_SLOW=1 to run the paired-seed experiments')


def benchmark_parameters(directory, seed, **overrides):
    values = {k.replace('.', '__'): v for k, v in BENCHMARK.items()}
    values.update(overrides)
    return tiny_parameters(directory, seed=seed, **values)


def mean_metric(reports, modality, key):
    values = [getattr(r, key) for r in reports if r.modality == modality]
    return float(numpy.mean(values))


@slow
class TestDirections(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.directory = tempfile.mkdtemp(prefix='comact-benchmark-')
        cls.runs = tempfile.mkdtemp(prefix='comact-runs-')
        parameters = benchmark_parameters(cls.directory, SEEDS[0])
        generate_dataset(SynthConfig(parameters.synth), cls.directory)
        cls.dataset = ActivityDataset(parameters.data)

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.directory, ignore_errors=True)
        shutil.rmtree(cls.runs, ignore_errors=True)

    def run_regime(self, seed, regime, **overrides):
        parameters = benchmark_parameters(self.directory, seed, train__regime=regime, **overrides)
        store = RunDataStore(False, ParameterSet({'root_directory': tempfile.mkdtemp(dir=self.runs)}))
        store.save_parameters(parameters)
        return train(parameters, store, self.dataset), store, parameters

    def test_cooperation_helps_the_weaker_modality(self):
        single, cooperative = [], []
        for seed in SEEDS:
            sm, _, _ = self.run_regime(seed, 'SM')
            ct, _, _ = self.run_regime(seed, 'CT')
            weaker = min(('ego_rgb', 'audio'), key=lambda m: mean_metric(sm.reports, m, 'acc1'))
            single.append(mean_metric(sm.reports, weaker, 'acc1'))
            cooperative.append(mean_metric(ct.reports, weaker, 'acc1'))
        improvement, p = paired_sign_test(cooperative, single)
        self.assertGreater(improvement, 0.0)
        self.assertLess(p, 0.05)

    def test_atomic_labels_help(self):
        activity_only, both = [], []
        for seed in SEEDS:
            a, _, _ = self.run_regime(seed, 'SM', train__modalities=['ego_rgb'], loss__mode='activity_only')
            b, _, _ = self.run_regime(seed, 'SM', train__modalities=['ego_rgb'], loss__mode='both_fixed',
                                      loss__atomic_weight=10.0)
            activity_only.append((mean_metric(a.reports, 'ego_rgb', 'map'), mean_metric(a.reports, 'ego_rgb', 'acc1')))
            both.append((mean_metric(b.reports, 'ego_rgb', 'map'), mean_metric(b.reports, 'ego_rgb', 'acc1')))
        improvement, p = paired_sign_test([m for m, _ in both], [m for m, _ in activity_only])
        self.assertGreater(improvement, 0.0)
        self.assertLess(p, 0.05)
        self.assertGreaterEqual(numpy.mean([acc for _, acc in both]), numpy.mean([acc for _, acc in activity_only]))

    def test_cooperative_features_transfer_better(self):
        single, cooperative = [], []
        for seed in SEEDS[:3]:
            for regime, collected in (('SM', single), ('CT', cooperative)):
                state, _, parameters = self.run_regime(seed, regime, data__class_subset='base')
                results = few_shot_protocol(state.model, self.dataset, 'ego_rgb', parameters.eval.fewshot, regime=regime)
                collected.append([r.map for r in results])
        for maps in (single, cooperative):
            # more shots per novel class, averaged over seeds
            self.assertGreaterEqual(numpy.mean([m[1] for m in maps]), numpy.mean([m[0] for m in maps]))
        for i in range(2):
            self.assertGreater(numpy.mean([m[i] for m in cooperative]), numpy.mean([m[i] for m in single]))

    def test_predictive_pretraining_converges_faster(self):
        faster = 0
        for seed in SEEDS:
            scratch, _, _ = self.run_regime(seed, 'SM', train__modalities=['ego_rgb'])
            pretrained, _, _ = self.run_regime(seed, 'SS+SV', train__modalities=['ego_rgb'])
            threshold = 0.8 * scratch.history[0]['loss']
            a = steps_to_threshold(scratch.history, threshold, window=2)
            b = steps_to_threshold(pretrained.history, threshold, window=2, phase='SV')
            if b is not None:
                b -= pretrained.history[[r['phase'] for r in pretrained.history].index('SV')]['step'] - 1
            if b is not None and (a is None or b <= a):
                faster += 1
        self.assertGreaterEqual(faster, 4)

    def test_embeddings_separate_the_classes(self):
        silhouettes = []
        for seed in SEEDS:
            _, store, _ = self.run_regime(seed, 'CT')
            path = store.path('embeddings_ego_rgb_test1.tsv')
            model, _ = store.load_model(['ego_rgb'])
            export_embeddings(model, self.dataset, 'ego_rgb', 'test1', path)
            plot = EmbeddingProjectionPlot(store, ParameterSet({'embeddings': path, 'perplexity': 10.0, 'seed': seed}),
                                           plot_file_name='tsne.png')
            plot.plot()
            silhouettes.append(plot.silhouette)
        self.assertGreater(numpy.mean(silhouettes), 0.0)


@slow
class TestSceneGraphOracle(unittest.TestCase):

    def test_separable_scene_graphs(self):
        directory = tempfile.mkdtemp(prefix='comact-benchmark-')
        try:
            parameters = benchmark_parameters(directory, 1, synth__cross_modal_correlation=1.0, synth__label_noise=0.0,
                                              eval__oracle__epochs=300, eval__oracle__hidden=64)
            generate_dataset(SynthConfig(parameters.synth), directory)
            _, accuracies = train_scene_graph_oracle(ActivityDataset(parameters.data), parameters.eval.oracle)
            for acc in accuracies.values():
                self.assertGreaterEqual(acc['acc1'], 0.99)
                self.assertGreaterEqual(acc['acc3'], acc['acc1'])
        finally:
            shutil.rmtree(directory, ignore_errors=True)


@slow
class TestPipeline(unittest.TestCase):

    def setUp(self):
        self.root = tempfile.mkdtemp(prefix='comact-pipeline-')

    def tearDown(self):
        shutil.rmtree(self.root, ignore_errors=True)

    def test_rerun_from_the_snapshot_is_identical(self):
        data = os.path.join(self.root, 'data')
        config = os.path.join(self.root, 'config')
        benchmark_parameters(data, 3, train__max_steps=20).save(config)
        self.assertEqual(main(['synth', '--config', config]), 0)
        first = os.path.join(self.root, 'first')
        self.assertEqual(main(['train', '--config', config, '--out', first]), 0)
        second = os.path.join(self.root, 'second')
        self.assertEqual(main(['train', '--config', os.path.join(first, 'parameters'), '--out', second]), 0)
        with open(os.path.join(first, 'metrics.jsonl'), 'rb') as f1, open(os.path.join(second, 'metrics.jsonl'), 'rb') as f2:
            self.assertEqual(f1.read(), f2.read())

    def test_default_configuration_smoke(self):
        data = os.path.join(self.root, 'data')
        self.assertEqual(main(['synth', '--out', data]), 0)
        self.assertEqual(main(['validate', data]), 0)
        run = os.path.join(self.root, 'run')
        self.assertEqual(main(['train', '--data', data, '--regime', 'CT', '--set', 'train.max_steps', '200',
                               '--set', 'data.class_subset', "'base'", '--out', run]), 0)
        self.assertEqual(main(['eval', run]), 0)
        self.assertEqual(main(['fewshot', run, '--shots', '1']), 0)


if __name__ == '__main__':
    unittest.main()
