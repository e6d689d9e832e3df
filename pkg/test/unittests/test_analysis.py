import collections
import json
import os
import shutil
import tempfile
import unittest
import numpy
import torch
from parameters import ParameterSet
from comact.core import ConfigurationError
from comact.homage.dataset import ActivityDataset, SequenceDataset
from comact.models import ModelConfig
from comact.storage.datastore import RunDataStore, FEWSHOT_FILE
from comact.analysis.data_structures import MetricReport, FewShotResult
from comact.analysis.evaluation import Evaluation, evaluate_single_modality, extract_outputs
from comact.analysis.fewshot import select_shots, few_shot_protocol
from comact.analysis.exports import export_embeddings, read_embeddings, attention_maps, export_attention_maps
from comact.training.scene_graph_oracle import train_scene_graph_oracle
from comact.visualization.plotting import EmbeddingProjectionPlot, LossCurvePlot, FewShotCurvePlot
from test.unittests.fixtures import TinyDataset, tiny_parameters

Sequence = collections.namedtuple('Sequence', ['sequence_id', 'activity_class'])


class TestDataStructures(unittest.TestCase):

    def test_metric_report(self):
        r = MetricReport(0.5, 1.0, 0.3, 4, per_class_ap=[0.1, numpy.nan], analysis_algorithm='evaluate_single_modality',
                         regime='SM', modality='audio', split='test1')
        self.assertEqual(r.as_record(), {'regime': 'SM', 'modality': 'audio', 'split': 'test1',
                                         'acc1': 0.5, 'acc3': 1.0, 'map': 0.3, 'n': 4})
        self.assertEqual(r.per_class_ap, [0.1, None])
        self.assertEqual(r.identifier, 'MetricReport')

    def test_accuracies_are_fractions(self):
        with self.assertRaises(ValueError):
            MetricReport(1.5, 1.0, None, 4, modality='audio')
        with self.assertRaises(ValueError):
            MetricReport(0.5, -0.1, None, 4, modality='audio')

    def test_parametrization_is_the_identity(self):
        a = FewShotResult(0.2, 1.0, k=1, regime='CT', modality='audio', split='mean')
        b = FewShotResult(0.9, 0.0, k=1, regime='CT', modality='audio', split='mean')
        c = FewShotResult(0.2, 1.0, k=5, regime='CT', modality='audio', split='mean')
        self.assertTrue(a.equalParams(b))
        self.assertFalse(a.equalParams(c))
        self.assertEqual(a.as_record()['k'], 1)


class TestShotSelection(unittest.TestCase):

    sequences = [Sequence('s%02d' % i, i % 3) for i in range(12)]

    def test_selection_is_seeded(self):
        selected, shortfall = select_shots(self.sequences, [0, 2], 2, seed=5)
        self.assertEqual(len(selected), 4)
        self.assertEqual(shortfall, {})
        self.assertEqual(sorted(set(s.activity_class for s in selected)), [0, 2])
        self.assertEqual(selected, select_shots(list(reversed(self.sequences)), [0, 2], 2, seed=5)[0])

    def test_shortfall(self):
        selected, shortfall = select_shots(self.sequences, [1], 6, seed=5)
        self.assertEqual(len(selected), 4)
        self.assertEqual(shortfall, {1: 2})

    def test_k_must_be_positive(self):
        with self.assertRaises(ConfigurationError):
            select_shots(self.sequences, [1], 0, seed=5)


class TestEvaluationAndExports(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.data = TinyDataset()
        cls.dataset = ActivityDataset(cls.data.parameters.data)
        cls.parameters = tiny_parameters(cls.data.directory)
        torch.manual_seed(0)
        config = ModelConfig(cls.parameters.model)
        cls.model = config.build(['ego_rgb', 'audio'], cls.dataset.vocabulary, attention=True)
        cls.plain = config.build(['audio'], cls.dataset.vocabulary)

    @classmethod
    def tearDownClass(cls):
        cls.data.cleanup()

    def setUp(self):
        self.root = tempfile.mkdtemp(prefix='comact-run-')
        self.store = RunDataStore(False, ParameterSet({'root_directory': self.root}))

    def tearDown(self):
        shutil.rmtree(self.root, ignore_errors=True)

    def test_extract_outputs(self):
        out = extract_outputs(self.model, self.dataset, 'audio', self.dataset.sequences_of('test1'), batch_size=2)
        self.assertEqual(out['features'].shape, (3, 8))
        self.assertEqual(out['activity_logits'].shape, (3, 3))
        self.assertEqual(out['atomic'].shape, (3, 6))
        with self.assertRaises(ConfigurationError):
            extract_outputs(self.model, self.dataset, 'third_rgb', self.dataset.sequences_of('test1'))
        with self.assertRaises(ValueError):
            extract_outputs(self.model, self.dataset, 'audio', [])

    def test_single_modality(self):
        r = evaluate_single_modality(self.model, self.dataset, 'audio', 'test1', regime='CT', batch_size=2)
        self.assertEqual(r.n, 3)
        # three activity classes: the top-3 accuracy is always one
        self.assertEqual(r.acc3, 1.0)
        self.assertTrue(0.0 <= r.acc1 <= 1.0)
        self.assertTrue(0.0 <= r.map <= 1.0)
        self.assertEqual(len(r.per_class_ap), 6)
        again = evaluate_single_modality(self.model, self.dataset, 'audio', 'test1', regime='CT', batch_size=3)
        self.assertAlmostEqual(r.map, again.map, places=5)

    def test_evaluation_is_idempotent(self):
        evaluation = Evaluation(self.store, self.model, self.dataset, 'CT',
                                ParameterSet({'splits': ['test1', 'test2'], 'batch_size': 4}))
        self.assertEqual(len(evaluation.analyse()), 4)
        with open(self.store.path('metrics.jsonl')) as f:
            first = f.read()
        evaluation.analyse()
        self.assertEqual(len(self.store.get_analysis_result(identifier='MetricReport')), 4)
        with open(self.store.path('metrics.jsonl')) as f:
            self.assertEqual(f.read(), first)

    def test_embeddings(self):
        path = os.path.join(self.root, 'embeddings', 'audio_test2.tsv')
        self.assertEqual(export_embeddings(self.model, self.dataset, 'audio', 'test2', path), 3)
        ids, classes, vectors = read_embeddings(path)
        sequences = self.dataset.sequences_of('test2')
        self.assertEqual(ids, [s.sequence_id for s in sequences])
        numpy.testing.assert_array_equal(classes, [s.activity_class for s in sequences])
        expected = extract_outputs(self.model, self.dataset, 'audio', sequences)['features']
        numpy.testing.assert_allclose(vectors, expected, rtol=1e-5, atol=1e-6)

        plot = EmbeddingProjectionPlot(self.store, ParameterSet({'embeddings': path, 'perplexity': 2.0, 'seed': 1}),
                                       plot_file_name='tsne.png')
        self.assertTrue(os.path.isfile(plot.plot()))

    def test_attention_maps(self):
        sequences = self.dataset.sequences_of('test1')[:2]
        maps = attention_maps(self.model, self.dataset, 'ego_rgb', 'audio', sequences)
        self.assertEqual(sorted(maps), sorted(s.sequence_id for s in sequences))
        p, blocks = maps[sequences[0].sequence_id]
        self.assertEqual(p.shape, (4, 2, 2))
        numpy.testing.assert_allclose(p.sum(axis=(1, 2)), numpy.ones(4), rtol=1e-5)
        self.assertEqual(blocks.shape, (4, 2, 16, 16, 3))

        written = export_attention_maps(self.model, self.dataset, 'ego_rgb', 'audio', sequences,
                                        os.path.join(self.root, 'attention'))
        self.assertEqual(len(written), 2)
        for path in written:
            self.assertTrue(os.path.isfile(path))
            self.assertTrue(os.path.isfile(path[:-len('.npy')] + '.png'))

    def test_attention_needs_an_attention_model(self):
        sequences = self.dataset.sequences_of('test1')[:1]
        with self.assertRaises(ConfigurationError):
            attention_maps(self.plain, self.dataset, 'audio', 'ego_rgb', sequences)
        with self.assertRaises(ConfigurationError):
            attention_maps(self.model, self.dataset, 'audio', 'ego_rgb', sequences)

    def test_loss_curve(self):
        for step, phase in ((1, 'SS'), (2, 'SS'), (3, 'SV')):
            self.store.append_history({'step': step, 'phase': phase, 'loss': 1.0 / step})
        path = LossCurvePlot(self.store, ParameterSet({}), plot_file_name='loss.png').plot()
        self.assertEqual(path, self.store.path('plots', 'loss.png'))
        self.assertTrue(os.path.isfile(path))


class TestEvaluationIsolation(unittest.TestCase):
    """
    Records without num_frames: a single-modality evaluation reads the frame clock from its own clips.
    """

    @classmethod
    def setUpClass(cls):
        cls.data = TinyDataset()
        reference = ActivityDataset(cls.data.parameters.data)
        view = SequenceDataset(reference, reference.sequences_of('test1'), ['audio'])
        cls.reference_blocks = [view.block_frames(s) for s in view.sequences]

        path = os.path.join(cls.data.directory, 'annotations.jsonl')
        with open(path) as f:
            records = [json.loads(line) for line in f if line.strip()]
        with open(path, 'w') as f:
            for record in records:
                record.pop('num_frames', None)
                f.write(json.dumps(record) + '\n')
        for record in records:
            for clip in record['clips']:
                if clip['modality'] != 'audio':
                    os.remove(os.path.join(cls.data.directory, clip['path']))
        cls.dataset = ActivityDataset(cls.data.parameters.data)
        torch.manual_seed(0)
        cls.model = ModelConfig(tiny_parameters(cls.data.directory).model).build(['audio'], cls.dataset.vocabulary)

    @classmethod
    def tearDownClass(cls):
        cls.data.cleanup()

    def test_audio_duration_gives_the_frame_clock(self):
        sequences = self.dataset.sequences_of('test1')
        self.assertTrue(all(s.num_frames is None for s in sequences))
        view = SequenceDataset(self.dataset, sequences, ['audio'])
        for s, expected in zip(sequences, self.reference_blocks):
            numpy.testing.assert_array_equal(view.block_frames(s), expected)

    def test_audio_evaluation_without_video_files(self):
        r = evaluate_single_modality(self.model, self.dataset, 'audio', 'test1', regime='SM', batch_size=2)
        self.assertEqual(r.n, 3)

    def test_video_view_needs_its_own_files(self):
        view = SequenceDataset(self.dataset, self.dataset.sequences_of('test1'), ['ego_rgb'])
        with self.assertRaises(FileNotFoundError):
            view[0]


class TestFewShotProtocol(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.data = TinyDataset()
        cls.dataset = ActivityDataset(cls.data.parameters.data)
        train = set(s.activity_class for s in cls.dataset.sequences_of('train'))
        test = set(s.activity_class for split in ('test1', 'test2') for s in cls.dataset.sequences_of(split))
        # the novel class must occur on both sides of the protocol
        cls.novel = min(train & test)
        cls.split_file = os.path.join(cls.data.directory, 'novel.json')
        with open(cls.split_file, 'w') as f:
            json.dump({'novel': [cls.novel]}, f)
        cls.parameters = tiny_parameters(cls.data.directory, eval__fewshot__split_file=cls.split_file)
        torch.manual_seed(0)
        cls.model = ModelConfig(cls.parameters.model).build(['audio'], cls.dataset.vocabulary)

    @classmethod
    def tearDownClass(cls):
        cls.data.cleanup()

    def test_protocol(self):
        root = tempfile.mkdtemp(prefix='comact-run-')
        try:
            store = RunDataStore(False, ParameterSet({'root_directory': root}))
            results = few_shot_protocol(self.model, self.dataset, 'audio', self.parameters.eval.fewshot,
                                        regime='SM', datastore=store)
            self.assertEqual([r.k for r in results], [1, 2])
            for r in results:
                # a single novel class is always predicted correctly
                self.assertEqual(r.acc1, 1.0)
                self.assertTrue(r.map is None or 0.0 <= r.map <= 1.0)
                self.assertEqual(r.modality, 'audio')
            n_train = len(self.dataset.sequences_of('train', [self.novel]))
            self.assertEqual(results[1].shortfall, {} if n_train >= 2 else {self.novel: 2 - n_train})
            self.assertEqual([r['k'] for r in store.read_json(FEWSHOT_FILE)], [1, 2])

            again = few_shot_protocol(self.model, self.dataset, 'audio', self.parameters.eval.fewshot,
                                      regime='SM', datastore=store)
            self.assertEqual([r.map for r in again], [r.map for r in results])
            self.assertEqual(len(store.get_analysis_result(identifier='FewShotResult')), 2)

            path = FewShotCurvePlot(store, ParameterSet({}), plot_file_name='fewshot.png').plot()
            self.assertTrue(os.path.isfile(path))
        finally:
            shutil.rmtree(root, ignore_errors=True)


class TestSceneGraphOracle(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.data = TinyDataset()
        cls.dataset = ActivityDataset(cls.data.parameters.data)

    @classmethod
    def tearDownClass(cls):
        cls.data.cleanup()

    def test_oracle(self):
        parameters = tiny_parameters(self.data.directory)
        oracle, accuracies = train_scene_graph_oracle(self.dataset, parameters.eval.oracle)
        self.assertEqual(sorted(accuracies), ['test1', 'test2'])
        for split, acc in accuracies.items():
            self.assertEqual(acc['n'], 3)
            self.assertTrue(0.0 <= acc['acc1'] <= acc['acc3'] <= 1.0)
        x = oracle.encode(self.dataset.sequences_of('train'))
        self.assertEqual(tuple(x.shape), (9, 12))
        _, repeated = train_scene_graph_oracle(self.dataset, parameters.eval.oracle)
        self.assertEqual(repeated, accuracies)


if __name__ == '__main__':
    unittest.main()
