"""
Model inputs from a dataset directory: :class:`.ActivityDataset` holds the parsed annotations and
:class:`.SequenceDataset` turns a list of sequences into the per-modality block tensors and label
targets consumed by the models and losses.

Only the modalities a dataset view is created for are ever loaded from disk.
"""

import json
import os
import numpy
import torch
from torch.utils.data import Dataset, DataLoader
from parameters import ParameterSet
import comact
from comact.core import ParametrizedObject, ConfigurationError
from comact.homage.io import parse_annotations, load_payload
from comact.homage.schema import ModalityClip, VIDEO_MODALITIES, AUDIO_MODALITIES, MODALITIES
from comact.homage.preprocessing import (sample_frame_indices, atomic_multihot, log_mel_spectrogram,
                                         block_scene_graph_matrices)

logger = comact.getComactLogger()

CLASS_SUBSETS = ('all', 'base', 'novel')


def novel_classes(n_activity, n_novel, seed, split_file=None):
    """
    The novel activity classes of the few-shot protocol, a pure function of (n_activity, n_novel, seed)
    unless a split file ({"novel": [...]} JSON) is given. Base classes are the rest.
    """
    if split_file is not None:
        with open(split_file) as f:
            novel = sorted(int(c) for c in json.load(f)['novel'])
    else:
        if not 1 <= n_novel < n_activity:
            raise ConfigurationError("n_novel=%d must lie in [1, n_activity=%d)" % (n_novel, n_activity))
        rng = numpy.random.default_rng(numpy.random.SeedSequence([seed, n_activity]))
        novel = sorted(int(c) for c in rng.choice(n_activity, size=n_novel, replace=False))
    if any(not 0 <= c < n_activity for c in novel):
        raise ConfigurationError("Novel classes %s outside [0, %d)" % (novel, n_activity))
    return novel


def subset_classes(class_subset, n_activity, novel):
    """
    The activity classes a run trains on: 'all', 'base' (all but `novel`) or 'novel'.
    """
    if class_subset not in CLASS_SUBSETS:
        raise ConfigurationError("Unknown class subset %s, expected one of %s" % (class_subset, CLASS_SUBSETS))
    if class_subset == 'all':
        return list(range(n_activity))
    if class_subset == 'novel':
        return list(novel)
    return [c for c in range(n_activity) if c not in novel]


class ActivityDataset(ParametrizedObject):
    """
    A parsed dataset directory and the preprocessing settings of the `data` configuration section.

    The annotations are validated strictly once; sequences are kept without payloads.

    Other parameters
    ----------------
    path : str
         The dataset directory.
    subsample_stride : int
                     Keep one frame out of every `subsample_stride`.
    n_blocks : int
             N, the number of blocks per sequence.
    frames_per_block : int
                     K, the number of sampled frames per block.
    n_mels : int
           Mel bands of the audio log-mel spectrograms.
    window_ms, hop_ms : float
                      STFT window and hop.
    random_offset : bool
                  Draw a random temporal offset at training time.
    class_subset : str
                 'all', 'base' or 'novel' activity classes (see :func:`.novel_classes`).
    """

    required_parameters = ParameterSet({
        'path': str,
        'subsample_stride': int,
        'n_blocks': int,
        'frames_per_block': int,
        'n_mels': int,
        'window_ms': float,
        'hop_ms': float,
        'random_offset': bool,
        'class_subset': str,
    })

    def __init__(self, parameters):
        ParametrizedObject.__init__(self, parameters)
        p = self.parameters
        if min(p.subsample_stride, p.n_blocks, p.frames_per_block, p.n_mels) < 1:
            raise ConfigurationError("subsample_stride, n_blocks, frames_per_block and n_mels must be positive")
        self.root = p.path if os.path.isdir(p.path) else (os.path.dirname(p.path) or '.')
        self.split, sequences, self.report = parse_annotations(p.path, strict=True)
        self.sequences = {s.sequence_id: s for s in sequences}
        self.vocabulary = self.split.vocabulary()
        if self.vocabulary['n_activity'] is None or self.vocabulary['n_atomic'] is None:
            raise ConfigurationError("Dataset %s has no vocabulary with n_activity and n_atomic" % p.path)

    @property
    def modalities(self):
        """
        The modalities available in every sequence.
        """
        available = [set(s.modalities) for s in self.sequences.values()]
        common = set.intersection(*available) if available else set()
        return [m for m in MODALITIES if m in common]

    def sequences_of(self, split_name, classes=None):
        """
        The sequences of a split in split-file order, optionally restricted to the activity classes `classes`.
        """
        seqs = [self.sequences[i] for i in self.split.split(split_name)]
        if classes is not None:
            classes = set(classes)
            seqs = [s for s in seqs if s.activity_class in classes]
        return seqs

    def check_modalities(self, modalities):
        missing = [m for m in modalities if m not in self.modalities]
        if missing:
            raise ConfigurationError("Modalities %s are not available in every sequence of %s (available: %s)"
                                     % (missing, self.parameters.path, self.modalities))


class SequenceDataset(Dataset):
    """
    A torch view of a list of sequences restricted to a set of modalities.

    Every item is a dict::

        index         position of the sequence in the view
        activity      activity class
        atomic        sequence level atomic multi-hot (OR over blocks), float n_atomic
        block_atomic  per block atomic multi-hot, N x n_atomic
        inputs        {modality: block tensor}; video N x K x H x W x 3 in [0, 1], audio N x L x n_mels,
                      scene graph N x (n_obj * n_rel)

    In training mode a random temporal offset (when the clip is long enough) and a random third-person
    view are drawn per (seed, epoch, index); otherwise the first frames and the first view are used.

    Parameters
    ----------
    dataset : ActivityDataset
    sequences : list(SyncedSequence)
    modalities : list
    train : bool
    seed : int
    """

    def __init__(self, dataset, sequences, modalities, train=False, seed=0):
        self.dataset = dataset
        self.sequences = list(sequences)
        self.modalities = list(modalities)
        self.train = train
        self.seed = seed
        self.epoch = 0
        unknown = [m for m in self.modalities if m not in MODALITIES]
        if unknown:
            raise ConfigurationError("Unknown modalities %s" % unknown)

    def set_epoch(self, epoch):
        self.epoch = epoch

    def __len__(self):
        return len(self.sequences)

    def _num_frames(self, sequence, clips=None):
        """
        Length of the frame clock. Without an annotated `num_frames` it is read from the view's own
        modalities only: the frame count of a video clip, the duration of an audio clip times fps, or the
        last annotated scene graph frame.
        """
        if sequence.num_frames is not None:
            return sequence.num_frames
        clips = clips or {}
        for m in self.modalities:
            if m in VIDEO_MODALITIES or m in AUDIO_MODALITIES:
                clip = clips.get(m)
                if clip is None:
                    clip = self._clip(sequence, m, None)
                if clip.is_video:
                    return clip.num_frames
                return max(1, int(round(len(clip.payload) / clip.sample_rate * sequence.fps)))
            if sequence.scene_graphs:
                return max(f.frame_index for f in sequence.scene_graphs) + 1
        raise ValueError("Sequence %s has no num_frames and no %s data to take it from"
                         % (sequence.sequence_id, self.modalities))

    def block_frames(self, sequence, rng=None, clips=None):
        """
        The N x K sampled source frame indices of a sequence.
        """
        p = self.dataset.parameters
        num_frames = self._num_frames(sequence, clips)
        offset = 0
        span = p.subsample_stride * p.n_blocks * p.frames_per_block
        if rng is not None and p.random_offset and num_frames > span:
            offset = int(rng.integers(0, num_frames - span + 1))
        return sample_frame_indices(num_frames, p.subsample_stride, p.n_blocks, p.frames_per_block, offset)

    def _clip(self, sequence, modality, rng):
        clips = sorted(sequence.clips_of(modality), key=lambda c: c.source_view_index)
        if not clips:
            raise ValueError("Sequence %s has no %s clip" % (sequence.sequence_id, modality))
        clip = clips[int(rng.integers(len(clips)))] if rng is not None else clips[0]
        payload, sr = load_payload(modality, self.dataset.root, clip.path)
        return ModalityClip(modality, payload=payload, source_view_index=clip.source_view_index, sample_rate=sr, path=clip.path)

    def _video_blocks(self, clip, block_frames):
        frames = clip.payload[numpy.minimum(block_frames.reshape(-1), clip.num_frames - 1)]
        if frames.dtype == numpy.uint8:
            frames = frames.astype(numpy.float32) / 255.0
        return frames.astype(numpy.float32).reshape(block_frames.shape + frames.shape[1:])

    def _audio_blocks(self, clip, block_frames, fps):
        """
        One log-mel crop per block starting at the block's first frame and spanning K * stride frames.
        """
        p = self.dataset.parameters
        logmel = log_mel_spectrogram(clip, n_mels=p.n_mels, window_ms=p.window_ms, hop_ms=p.hop_ms)
        frames_per_second = 1000.0 / p.hop_ms
        length = max(1, int(round(p.frames_per_block * p.subsample_stride / fps * frames_per_second)))
        crops = []
        for b in range(block_frames.shape[0]):
            start = int(round(block_frames[b, 0] / fps * frames_per_second))
            crops.append(logmel[(start + numpy.arange(length)) % logmel.shape[0]])
        return numpy.stack(crops)

    def __getitem__(self, index):
        sequence = self.sequences[index]
        vocab = self.dataset.vocabulary
        rng = numpy.random.default_rng(numpy.random.SeedSequence([self.seed, self.epoch, index])) if self.train else None
        clips = {m: self._clip(sequence, m, rng) for m in self.modalities
                 if m in VIDEO_MODALITIES or m in AUDIO_MODALITIES}
        block_frames = self.block_frames(sequence, rng, clips)

        inputs = {}
        for m in self.modalities:
            if m in VIDEO_MODALITIES:
                inputs[m] = torch.from_numpy(self._video_blocks(clips[m], block_frames))
            elif m in AUDIO_MODALITIES:
                inputs[m] = torch.from_numpy(self._audio_blocks(clips[m], block_frames, sequence.fps))
            else:
                if sequence.scene_graphs is None:
                    raise ValueError("Sequence %s has no scene graphs" % sequence.sequence_id)
                inputs[m] = torch.from_numpy(block_scene_graph_matrices(sequence.scene_graphs, vocab['n_obj'],
                                                                        vocab['n_rel'], block_frames))

        per_block, whole = atomic_multihot(sequence.atomic_intervals, vocab['n_atomic'], block_frames)
        return {'index': index, 'activity': sequence.activity_class, 'atomic': torch.from_numpy(whole),
                'block_atomic': torch.from_numpy(per_block), 'inputs': inputs}


def make_loader(dataset, batch_size, shuffle=False, seed=0, drop_last=False):
    """
    A single-process DataLoader whose batch order is a function of `seed`.
    """
    generator = torch.Generator()
    generator.manual_seed(seed)
    return DataLoader(dataset, batch_size=batch_size, shuffle=shuffle, num_workers=0,
                      generator=generator, drop_last=drop_last)
