import json
import os
import shutil
import tempfile
import unittest
import torch
from parameters import ParameterSet
from comact.core import ConfigurationError
from comact.models import ModelConfig
from comact.analysis.data_structures import MetricReport, FewShotResult
from comact.storage.datastore import RunDataStore, open_run, METRICS_FILE, FEWSHOT_FILE, MANIFEST_FILE
from test.unittests.fixtures import tiny_parameters

VOCAB = {'n_activity': 3, 'n_atomic': 6, 'n_obj': 4, 'n_rel': 3}


def report(modality, split, acc1=0.5, regime='CT'):
    return MetricReport(acc1, 1.0, 0.25, 3, analysis_algorithm='evaluate_single_modality',
                        regime=regime, modality=modality, split=split)


class TestRunDataStore(unittest.TestCase):

    def setUp(self):
        self.root = tempfile.mkdtemp(prefix='comact-store-')
        self.store = RunDataStore(False, ParameterSet({'root_directory': os.path.join(self.root, 'run')}))

    def tearDown(self):
        shutil.rmtree(self.root, ignore_errors=True)

    def test_creates_the_directory(self):
        self.assertTrue(os.path.isdir(self.store.root))
        self.assertEqual(self.store.path('log'), os.path.join(self.root, 'run', 'log'))

    def test_add_and_query(self):
        self.store.add_analysis_result(report('audio', 'test1'))
        self.store.add_analysis_result(report('audio', 'test2'))
        self.store.add_analysis_result(report('ego_rgb', 'test1'))
        self.assertEqual(len(self.store.get_analysis_result(identifier='MetricReport')), 3)
        self.assertEqual(len(self.store.get_analysis_result(modality='audio')), 2)
        self.assertEqual(len(self.store.get_analysis_result(modality='audio', split=['test1', 'test2'])), 2)
        self.assertEqual(self.store.get_analysis_result(identifier='FewShotResult'), [])

    def test_equal_parametrization_replaces(self):
        self.store.add_analysis_result(report('audio', 'test1', acc1=0.5))
        self.store.add_analysis_result(report('audio', 'test1', acc1=1.0))
        results = self.store.get_analysis_result(identifier='MetricReport')
        self.assertEqual(len(results), 1)
        self.assertEqual(results[0].acc1, 1.0)

    def test_equal_parametrization_without_replace(self):
        store = RunDataStore(False, ParameterSet({'root_directory': self.store.root}), replace=False)
        store.add_analysis_result(report('audio', 'test1'))
        with self.assertRaises(ValueError):
            store.add_analysis_result(report('audio', 'test1'))

    def test_save_and_load(self):
        for m, s in (('ego_rgb', 'test2'), ('audio', 'test2'), ('ego_rgb', 'test1')):
            self.store.add_analysis_result(report(m, s))
        self.store.add_analysis_result(FewShotResult(0.5, 1.0, shortfall={2: 1}, k=2, analysis_algorithm='few_shot_protocol',
                                                     regime='CT', modality='audio', split='mean'))
        self.store.save()
        with open(self.store.path(METRICS_FILE)) as f:
            records = [json.loads(line) for line in f]
        self.assertEqual([(r['modality'], r['split']) for r in records],
                         [('audio', 'test2'), ('ego_rgb', 'test1'), ('ego_rgb', 'test2')])
        self.assertEqual(self.store.read_json(FEWSHOT_FILE)[0]['shortfall'], {'2': 1})

        reopened = open_run(self.store.root)
        self.assertEqual(len(reopened.get_analysis_result(identifier='MetricReport')), 3)
        self.assertEqual(reopened.get_analysis_result(identifier='FewShotResult')[0].k, 2)

    def test_saving_is_idempotent(self):
        self.store.add_analysis_result(report('audio', 'test1'))
        self.store.save()
        with open(self.store.path(METRICS_FILE)) as f:
            first = f.read()
        self.store.add_analysis_result(report('audio', 'test1'))
        self.store.save()
        with open(self.store.path(METRICS_FILE)) as f:
            self.assertEqual(f.read(), first)

    def test_history(self):
        self.assertEqual(self.store.read_history(), [])
        self.store.append_history({'step': 1, 'loss': 2.0})
        self.store.append_history({'step': 2, 'loss': 1.0})
        self.assertEqual([r['step'] for r in self.store.read_history()], [1, 2])
        self.store.reset_history()
        self.assertEqual(self.store.read_history(), [])

    def test_parameters(self):
        parameters = tiny_parameters(seed=3)
        self.store.save_parameters(parameters, {'seed': 3})
        self.assertEqual(self.store.load_parameters().seed, 3)
        self.assertEqual(self.store.load_parameters().model.presets.audio, 'audio_tiny')
        self.assertEqual(self.store.read_json('modified_parameters.json'), {'seed': 3})

    def test_missing(self):
        with self.assertRaises(FileNotFoundError):
            self.store.load_parameters()
        with self.assertRaises(FileNotFoundError):
            self.store.load_checkpoint()
        with self.assertRaises(FileNotFoundError):
            open_run(os.path.join(self.root, 'nowhere'))


class TestCheckpoints(unittest.TestCase):

    def setUp(self):
        torch.manual_seed(0)
        self.root = tempfile.mkdtemp(prefix='comact-store-')
        self.store = RunDataStore(False, ParameterSet({'root_directory': self.root}))
        self.parameters = tiny_parameters()
        self.store.save_parameters(self.parameters)
        self.config = ModelConfig(self.parameters.model)
        self.model = self.config.build(['ego_rgb', 'audio'], VOCAB)
        self.description = {'modalities': ['ego_rgb', 'audio'], 'vocabulary': VOCAB, 'attention': False,
                            'attention_temperature': 1.0, 'regime': 'CT'}
        self.store.save_checkpoint(self.model, self.description, step=7)

    def tearDown(self):
        shutil.rmtree(self.root, ignore_errors=True)

    def test_restore(self):
        other = self.config.build(['ego_rgb', 'audio'], VOCAB)
        archive = self.store.load_checkpoint(other)
        self.assertEqual(archive['step'], 7)
        for (name, a), (_, b) in zip(self.model.state_dict().items(), other.state_dict().items()):
            self.assertTrue(torch.equal(a, b), name)

    def test_model_must_fit(self):
        with self.assertRaises(ValueError):
            self.store.load_checkpoint(self.config.build(['ego_rgb'], VOCAB))

    def test_manifest_mismatch(self):
        manifest = self.store.read_json(MANIFEST_FILE)
        manifest.pop(sorted(manifest)[0])
        self.store.write_json(MANIFEST_FILE, manifest)
        with self.assertRaises(ValueError):
            self.store.load_checkpoint()

    def test_load_model(self):
        model, description = self.store.load_model()
        self.assertEqual(model.modalities, ['ego_rgb', 'audio'])
        self.assertFalse(model.training)
        audio_only, _ = self.store.load_model(['audio'])
        self.assertEqual(audio_only.modalities, ['audio'])
        self.assertTrue(torch.equal(audio_only.stacks['audio'].activity_head[-1].weight,
                                    self.model.stacks['audio'].activity_head[-1].weight))
        with self.assertRaises(ConfigurationError):
            self.store.load_model(['scene_graph'])


if __name__ == '__main__':
    unittest.main()
