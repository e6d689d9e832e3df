import contextlib
import io
import json
import os
import shutil
import tempfile
import unittest
from comact.cli import main
from comact.homage.dataset import ActivityDataset
from test.unittests.fixtures import TinyDataset, tiny_parameters


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = main(list(argv))
    return code, out.getvalue(), err.getvalue()


def last_json_line(text):
    return json.loads([line for line in text.splitlines() if line.strip()][-1])


class TestCommandLine(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.data = TinyDataset()
        cls.root = tempfile.mkdtemp(prefix='comact-cli-')
        dataset = ActivityDataset(cls.data.parameters.data)
        train = set(s.activity_class for s in dataset.sequences_of('train'))
        test = set(s.activity_class for split in ('test1', 'test2') for s in dataset.sequences_of(split))
        split_file = os.path.join(cls.root, 'novel.json')
        with open(split_file, 'w') as f:
            json.dump({'novel': [min(train & test)]}, f)
        cls.config = os.path.join(cls.root, 'tiny')
        tiny_parameters(cls.data.directory, eval__fewshot__split_file=split_file).save(cls.config)
        cls.run_dir = os.path.join(cls.root, 'run')
        code, out, _ = run('train', '--config', cls.config, '--regime', 'CT', '--set', 'loss.attention', 'True',
                           '--out', cls.run_dir)
        assert code == 0, out
        cls.trained = json.loads(out)

    @classmethod
    def tearDownClass(cls):
        cls.data.cleanup()
        shutil.rmtree(cls.root, ignore_errors=True)

    def test_train(self):
        self.assertEqual(self.trained['run'], self.run_dir)
        self.assertEqual(self.trained['regime'], 'CT')
        self.assertEqual(self.trained['steps'], 2)
        self.assertEqual(len(self.trained['metrics']), 4)
        for name in ('parameters', 'modified_parameters.json', 'checkpoint.pt', 'history.jsonl', 'metrics.jsonl',
                     'summary.json', 'log'):
            self.assertTrue(os.path.isfile(os.path.join(self.run_dir, name)), name)
        with open(os.path.join(self.run_dir, 'modified_parameters.json')) as f:
            self.assertEqual(json.load(f), {'loss.attention': True, 'train.regime': 'CT'})

    def test_synth_and_validate(self):
        directory = os.path.join(self.root, 'synth')
        code, out, _ = run('synth', '--config', self.config, '--out', directory)
        self.assertEqual(code, 0)
        result = json.loads(out)
        self.assertEqual(result['n_sequences'], 15)
        self.assertEqual(result['oracle_accuracy'], 1.0)
        self.assertEqual(sorted(result['oracle_accuracy_per_modality']), ['audio', 'ego_rgb', 'scene_graph', 'third_rgb'])

        code, out, _ = run('validate', directory)
        self.assertEqual(code, 0)
        self.assertTrue(json.loads(out)['ok'])

    def test_validate_violations(self):
        directory = os.path.join(self.root, 'broken')
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, 'annotations.jsonl'), 'w') as f:
            f.write('{not json\n')
        code, out, _ = run('validate', directory, '--lenient')
        self.assertEqual(code, 1)
        self.assertFalse(json.loads(out)['ok'])
        code, _, err = run('validate', directory)
        self.assertEqual(code, 2)
        self.assertEqual(last_json_line(err)['command'], 'validate')

    def test_eval(self):
        code, out, _ = run('eval', self.run_dir, '--split', 'test2')
        self.assertEqual(code, 0)
        records = json.loads(out)
        self.assertEqual(sorted(r['modality'] for r in records), ['audio', 'ego_rgb'])
        self.assertTrue(all(r['split'] == 'test2' and r['regime'] == 'CT' for r in records))

    def test_fewshot(self):
        code, out, _ = run('fewshot', self.run_dir, '--modality', 'audio', '--shots', '1', '2')
        self.assertEqual(code, 0)
        records = json.loads(out)
        self.assertEqual([r['k'] for r in records], [1, 2])
        self.assertTrue(os.path.isfile(os.path.join(self.run_dir, 'fewshot.json')))

    def test_exports(self):
        code, out, _ = run('export', self.run_dir, '--kind', 'embeddings', '--modality', 'audio', '--split', 'test1')
        self.assertEqual(code, 0)
        files = json.loads(out)['files']
        self.assertEqual(files, [os.path.join(self.run_dir, 'embeddings_audio_test1.tsv')])

        code, out, _ = run('export', self.run_dir, '--kind', 'attention', '--split', 'test1')
        self.assertEqual(code, 0)
        files = json.loads(out)['files']
        self.assertEqual(len(files), 2)
        self.assertTrue(all(os.path.dirname(f) == os.path.join(self.run_dir, 'attention', 'ego_rgb__audio') for f in files))

        code, out, _ = run('export', self.run_dir, '--kind', 'plots', '--modality', 'audio', '--split', 'test1')
        self.assertEqual(code, 0)
        files = json.loads(out)['files']
        self.assertIn(os.path.join(self.run_dir, 'plots', 'tsne_audio_test1.png'), files)
        self.assertIn(os.path.join(self.run_dir, 'plots', 'loss.png'), files)
        self.assertTrue(all(os.path.isfile(f) for f in files))

    def test_attention_pair_without_head(self):
        code, _, err = run('export', self.run_dir, '--kind', 'attention', '--modality', 'audio')
        self.assertEqual(code, 2)
        self.assertEqual(last_json_line(err)['error'], 'ConfigurationError')

    def test_oracle(self):
        code, out, _ = run('oracle', '--config', self.config)
        self.assertEqual(code, 0)
        self.assertEqual(sorted(json.loads(out)), ['test1', 'test2'])

    def test_errors(self):
        code, out, err = run('train', '--config', self.config, '--set', 'train.bogus', '1')
        self.assertEqual(code, 2)
        self.assertEqual(out, '')
        error = last_json_line(err)
        self.assertEqual(error['error'], 'KeyError')
        self.assertEqual(error['command'], 'train')
        self.assertIn('train.bogus', error['message'])

        code, _, err = run('eval', os.path.join(self.root, 'missing'))
        self.assertEqual(code, 2)
        self.assertEqual(last_json_line(err)['error'], 'FileNotFoundError')


if __name__ == '__main__':
    unittest.main()
