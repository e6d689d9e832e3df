"""
Tiny configurations shared by the unit tests: a few short, low resolution sequences and encoders
of a handful of channels, so that whole training runs take seconds on a CPU.
"""
import shutil
import tempfile
from comact.tools.parametrization import load_parameters
from comact.synth import SynthConfig, generate_dataset

TINY = {
    'seed': 11,
    'data.subsample_stride': 2,
    'data.n_blocks': 4,
    'data.frames_per_block': 2,
    'data.n_mels': 8,
    'synth.n_activity': 3,
    'synth.n_atomic': 6,
    'synth.atomic_per_activity': 2,
    'synth.n_segments': 4,
    'synth.cross_modal_correlation': 1.0,
    'synth.label_noise': 0.0,
    'synth.n_train': 9,
    'synth.n_test1': 3,
    'synth.n_test2': 3,
    'synth.num_frames': 32,
    'synth.fps': 16.0,
    'synth.frame_size': 16,
    'synth.sample_rate': 2000,
    'synth.n_obj': 4,
    'synth.n_rel': 3,
    'synth.sg_frames_per_segment': 2,
    'model.grid_size': 2,
    'model.feature_dim': 8,
    'model.hidden_dropout': 0.0,
    'model.head_dropout': 0.0,
    'model.predictor_hidden': 8,
    'model.presets.ego_rgb': 'video_tiny',
    'model.presets.third_rgb': 'video_tiny',
    'model.presets.audio': 'audio_tiny',
    'model.presets.scene_graph': 'scene_graph_tiny',
    'train.batch_size': 3,
    'train.epochs': 1,
    'train.max_steps': 2,
    'train.log_every': 1,
    'train.pretrain_epochs': 1,
    'train.pretrain_steps': 2,
    'train.pred_observed': 2,
    'train.pred_steps': 2,
    'eval.batch_size': 4,
    'eval.fewshot.n_novel': 1,
    'eval.fewshot.shots': [1, 2],
    'eval.fewshot.epochs': 5,
    'eval.oracle.hidden': 8,
    'eval.oracle.epochs': 5,
    'eval.export.max_sequences': 2,
    'eval.export.perplexity': 2.0,
}


def tiny_parameters(data_path=None, **overrides):
    """
    The comact defaults shrunk by TINY; `overrides` uses '__' for the dots of the parameter paths.
    """
    modified = dict(TINY)
    if data_path is not None:
        modified['data.path'] = data_path
    modified.update({k.replace('__', '.'): v for k, v in overrides.items()})
    return load_parameters(None, modified)


class TinyDataset(object):
    """
    Generates the tiny synthetic dataset once into a temporary directory.
    """

    def __init__(self):
        self.directory = tempfile.mkdtemp(prefix='comact-data-')
        self.parameters = tiny_parameters(self.directory)
        self.config = SynthConfig(self.parameters.synth)
        self.scripts = generate_dataset(self.config, self.directory)

    def cleanup(self):
        shutil.rmtree(self.directory, ignore_errors=True)
