import os
import tempfile
import unittest
from parameters import ParameterSet
from comact.core import ParametrizedObject, ConfigurationError
from comact.tools.parametrization import load_parameters, parse_override_value, ComactParameterSet, DEFAULTS_PATH
from comact.tools.comact_parametrized import filter_query, colapse_to_dictionary, varying_parameters
from comact.analysis.data_structures import MetricReport, FewShotResult


class Configured(ParametrizedObject):
    required_parameters = ParameterSet({
        'rate': float,
        'count': int,
        'tags': list,
        'inner': ParameterSet({'flag': bool}),
    })


class MoreConfigured(Configured):
    required_parameters = ParameterSet({'label': str})


class TestComactParametrizeObject(unittest.TestCase):

    def good(self, **kw):
        d = {'rate': 0.5, 'count': 3, 'tags': ['a'], 'inner': {'flag': True}}
        d.update(kw)
        return ParameterSet(d)

    def test_accepts_matching_parameters(self):
        c = Configured(self.good())
        self.assertEqual(c.parameters.count, 3)

    def test_int_for_float_and_tuple_for_list(self):
        Configured(self.good(rate=1, tags=('a', 'b')))

    def test_none_is_accepted(self):
        Configured(self.good(count=None))

    def test_type_mismatch(self):
        with self.assertRaises(ConfigurationError):
            Configured(self.good(count='three'))
        with self.assertRaises(ConfigurationError):
            Configured(self.good(rate=True))

    def test_nested_type_mismatch(self):
        with self.assertRaises(ConfigurationError):
            Configured(self.good(inner={'flag': 'yes'}))

    def test_missing_or_extra_keys(self):
        p = self.good()
        del p['count']
        with self.assertRaises(KeyError):
            Configured(p)
        with self.assertRaises(KeyError):
            Configured(self.good(extra=1))

    def test_requirements_collected_along_the_class_hierarchy(self):
        with self.assertRaises(KeyError):
            MoreConfigured(self.good())
        MoreConfigured(self.good(label='x'))

    def test_configuration_error_is_a_value_error(self):
        self.assertTrue(issubclass(ConfigurationError, ValueError))


class TestParametrization(unittest.TestCase):

    def test_defaults_load(self):
        p = load_parameters(None)
        self.assertEqual(p.train.regime, 'CT')
        self.assertEqual(p.data.n_blocks, 8)
        self.assertEqual(p.loss.atomic_weight, 10.0)

    def test_alignment_is_summed_over_anchors(self):
        for p in (load_parameters(None), load_parameters(os.path.join(os.path.dirname(DEFAULTS_PATH), 'homage'))):
            self.assertEqual(p.loss.alignment_reduction, 'sum')

    def test_dotted_overrides(self):
        p = load_parameters(DEFAULTS_PATH, {'train.lr': 0.01, 'model.presets.audio': 'audio_tiny'})
        self.assertEqual(p.train.lr, 0.01)
        self.assertEqual(p.model.presets.audio, 'audio_tiny')

    def test_unknown_override_path(self):
        with self.assertRaises(KeyError):
            load_parameters(None, {'train.learning_rate': 0.1})

    def test_parse_override_value(self):
        self.assertEqual(parse_override_value('0.1'), 0.1)
        self.assertEqual(parse_override_value('[1, 5]'), [1, 5])
        self.assertIsNone(parse_override_value('None'))
        self.assertEqual(parse_override_value('ego_rgb'), 'ego_rgb')

    def test_parameter_file_with_comments(self):
        with tempfile.TemporaryDirectory() as d:
            path = os.path.join(d, 'p')
            with open(path, 'w') as f:
                f.write("{\n  # a comment\n  'a': 1,\n  'b': {'c': ref('a')},\n}\n")
            p = load_parameters(path)
            self.assertEqual(p.b.c, 1)

    def test_string_initialiser(self):
        p = ComactParameterSet("{'x': {'y': 2}}")
        self.assertEqual(p.x.y, 2)

    def test_homage_configuration_loads(self):
        p = load_parameters(os.path.join(os.path.dirname(DEFAULTS_PATH), 'homage'))
        self.assertEqual(sorted(p.keys()), sorted(load_parameters(None).keys()))


class TestComactParametrized(unittest.TestCase):

    def setUp(self):
        self.reports = [MetricReport(0.5, 0.9, 0.3, 10, regime=r, modality=m, split=s,
                                     analysis_algorithm='evaluate_single_modality')
                        for r in ('SM', 'CT') for m in ('ego_rgb', 'audio') for s in ('test1', 'test2')]

    def test_filter_query(self):
        self.assertEqual(len(filter_query(self.reports, regime='CT')), 4)
        self.assertEqual(len(filter_query(self.reports, regime='CT', modality='audio', split='test1')), 1)
        self.assertEqual(len(filter_query(self.reports, split=['test1', 'test2'])), 8)
        self.assertEqual(len(filter_query(self.reports, k=1)), 0)
        self.assertEqual(len(filter_query(self.reports, allow_non_existent_parameters=True, k=1)), 8)

    def test_equal_params_ignores_values(self):
        a = MetricReport(0.1, 0.2, None, 5, regime='CT', modality='audio', split='test1')
        b = MetricReport(0.9, 1.0, 0.5, 5, regime='CT', modality='audio', split='test1')
        self.assertTrue(a.equalParams(b))
        c = MetricReport(0.9, 1.0, 0.5, 5, regime='CT', modality='audio', split='test2')
        self.assertFalse(a.equalParams(c))

    def test_varying_parameters(self):
        self.assertEqual(sorted(varying_parameters(self.reports)), ['modality', 'regime', 'split'])

    def test_colapse_to_dictionary(self):
        results = [FewShotResult(0.1 * k, 0.5, k=k, regime='CT', modality=m, split='mean')
                   for m in ('ego_rgb', 'audio') for k in (1, 5)]
        d = colapse_to_dictionary([r.map for r in results], results, 'k')
        self.assertEqual(len(d), 2)
        for ks, maps in d.values():
            self.assertEqual(ks, [1, 5])
            self.assertAlmostEqual(maps[1], 0.5)


class TestSeeds(unittest.TestCase):

    def test_setup_seeds_repeats_global_draws(self):
        import numpy
        import numpy.testing
        import torch
        import comact
        comact.setup_seeds(7)
        first = (numpy.random.rand(3), torch.rand(3))
        comact.setup_seeds(7)
        second = (numpy.random.rand(3), torch.rand(3))
        self.assertEqual(comact.torch_seed, 7)
        numpy.testing.assert_array_equal(first[0], second[0])
        self.assertTrue(torch.equal(first[1], second[1]))


if __name__ == '__main__':
    unittest.main()
