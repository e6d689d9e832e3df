"""
Turns raw modality payloads and annotations into the arrays the encoders and the losses consume:
temporal blocks of video frames, log-mel spectrogram crops, atomic-action multi-hot targets and
the object x relationship incidence vector of scene graphs.

All functions are pure and safe to call from concurrent data loading workers.
"""

import functools
import numpy
import torch
import torchaudio


def sample_frame_indices(num_frames, subsample_stride=3, n_blocks=8, frames_per_block=5, offset=0):
    """
    Source frame indices of the N*K sampled frames, shaped (N, K).

    One out of every `subsample_stride` frames is taken starting at `offset`. Videos too short to
    provide N*K sampled frames are loop-padded: the sampled frames are repeated from the start.
    """
    if num_frames < 1:
        raise ValueError("A clip needs at least one frame")
    if not 0 <= offset < num_frames:
        raise ValueError("Offset %d outside a clip of %d frames" % (offset, num_frames))
    needed = n_blocks * frames_per_block
    available = numpy.arange(offset, num_frames, subsample_stride)
    if len(available) >= needed:
        indices = available[:needed]
    else:
        indices = available[numpy.arange(needed) % len(available)]
    return indices.reshape(n_blocks, frames_per_block)


def partition_blocks(clip, subsample_stride=3, n_blocks=8, frames_per_block=5, offset=0):
    """
    Partitions a video clip into N disjoint, temporally ordered blocks of K sampled frames.

    Parameters
    ----------
    clip : ModalityClip
         A video clip with a loaded T x H x W x C payload.
    subsample_stride : int
                     Keep one frame out of every `subsample_stride`.
    n_blocks, frames_per_block : int
                               N and K.
    offset : int
           First source frame to sample.

    Returns
    -------
    blocks : ndarray
           N x K x H x W x C.
    block_frames : ndarray
                 N x K source frame indices of every block.
    """
    if not clip.is_video:
        raise ValueError("partition_blocks needs a video clip, got %s" % clip.modality_id)
    block_frames = sample_frame_indices(clip.num_frames, subsample_stride, n_blocks, frames_per_block, offset)
    blocks = clip.payload[block_frames.reshape(-1)]
    return blocks.reshape((n_blocks, frames_per_block) + clip.payload.shape[1:]), block_frames


def block_frame_ranges(block_frames):
    """
    The (start, end) source frame range spanned by every block.
    """
    return [(int(numpy.min(f)), int(numpy.max(f)) + 1) for f in block_frames]


def atomic_multihot(intervals, n_atomic, block_frames):
    """
    Atomic-action targets of every block.

    Parameters
    ----------
    intervals : list(AtomicActionInterval)
    n_atomic : int
    block_frames : list
                 Per block, an iterable of sampled source frame indices. A ``range(start, end)``
                 stands for a block covering every frame of [start, end).

    Returns
    -------
    per_block : ndarray
              N x n_atomic float32 matrix, entry (b, a) is 1 iff an interval of class a contains
              at least one sampled frame of block b.
    sequence : ndarray
             n_atomic vector, the logical OR over blocks.
    """
    frames = [numpy.asarray(list(f), dtype=numpy.int64) for f in block_frames]
    if len(frames) == 0 or any(len(f) == 0 for f in frames):
        raise ValueError("Block frame ranges must be non-empty")
    per_block = numpy.zeros((len(frames), n_atomic), dtype=numpy.float32)
    for interval in intervals:
        if not 0 <= interval.class_id < n_atomic:
            raise ValueError("Atomic class %d outside [0, %d)" % (interval.class_id, n_atomic))
        for b, f in enumerate(frames):
            if numpy.any((f >= interval.start_frame) & (f < interval.end_frame)):
                per_block[b, interval.class_id] = 1.0
    return per_block, per_block.max(axis=0)


@functools.lru_cache(maxsize=16)
def _mel_transform(sample_rate, win_length, hop_length, n_mels):
    # n_fft equals the window: any waveform holding one window yields at least one frame
    return torchaudio.transforms.MelSpectrogram(sample_rate=sample_rate, n_fft=win_length, win_length=win_length,
                                                hop_length=hop_length, n_mels=n_mels, power=2.0, center=False)


def mel_band_centers(sample_rate, n_mels=64):
    """
    Centre frequencies (Hz) of the triangular mel filters used by :func:`.log_mel_spectrogram`.
    """
    mel_max = 2595.0 * numpy.log10(1.0 + (sample_rate / 2.0) / 700.0)
    mels = numpy.linspace(0.0, mel_max, n_mels + 2)[1:-1]
    return 700.0 * (10.0 ** (mels / 2595.0) - 1.0)


def log_mel_spectrogram(clip, n_mels=64, window_ms=25.0, hop_ms=10.0, eps=1e-10,
                        crop_frames=None, start_frame=None, rng=None):
    """
    Log-mel spectrogram of an audio clip, optionally cropped to a fixed number of frames.

    Parameters
    ----------
    clip : ModalityClip
         An audio clip with a loaded waveform.
    n_mels : int
    window_ms, hop_ms : float
                      STFT window and hop in milliseconds.
    eps : float
        Power floor; silence maps to log(eps) instead of -inf.
    crop_frames : int
                If given the output is cropped (loop-padded if the clip is shorter) to this many frames.
    start_frame : int
                First spectrogram frame of the crop. If None a start is drawn from `rng`, or 0 without `rng`.
    rng : numpy.random.Generator

    Returns
    -------
    ndarray
          time x n_mels float32 array.
    """
    if not clip.is_audio:
        raise ValueError("log_mel_spectrogram needs an audio clip, got %s" % clip.modality_id)
    sr = int(round(clip.sample_rate))
    win = int(round(sr * window_ms / 1000.0))
    hop = int(round(sr * hop_ms / 1000.0))
    waveform = numpy.asarray(clip.payload, dtype=numpy.float32)
    if len(waveform) < win:
        raise ValueError("Waveform of %d samples is shorter than one %d sample window" % (len(waveform), win))

    with torch.no_grad():
        mel = _mel_transform(sr, win, hop, n_mels)(torch.from_numpy(waveform))
        logmel = torch.log(torch.clamp(mel, min=eps)).T.numpy()

    if crop_frames is not None:
        total = logmel.shape[0]
        if start_frame is None:
            start_frame = int(rng.integers(0, max(total - crop_frames, 0) + 1)) if rng is not None else 0
        index = (start_frame + numpy.arange(crop_frames)) % total
        logmel = logmel[index]
    return numpy.ascontiguousarray(logmel, dtype=numpy.float32)


def encode_scene_graph_matrix(frames, n_obj, n_rel):
    """
    Encodes scene graphs as the flattened n_obj x n_rel incidence matrix M.

    Every relationship sets M[s, r] = 1 where s is the category of the relationship's object
    endpoint and r the relationship category. Frames are OR-ed and M is flattened object-major.
    """
    M = numpy.zeros((n_obj, n_rel), dtype=numpy.float32)
    for frame in frames:
        for (subject_id, object_id, r) in frame.relationships:
            s = frame.category_of(object_id)
            if not 0 <= s < n_obj:
                raise ValueError("Object category %d outside [0, %d)" % (s, n_obj))
            if not 0 <= r < n_rel:
                raise ValueError("Relationship category %d outside [0, %d)" % (r, n_rel))
            M[s, r] = 1.0
    return M.reshape(-1)


def block_scene_graph_matrices(frames, n_obj, n_rel, block_frames):
    """
    Per block M vectors: the annotated frames falling in a block's frame range are OR-ed together.
    Returns an N x (n_obj * n_rel) array.
    """
    ranges = block_frame_ranges(block_frames)
    return numpy.stack([encode_scene_graph_matrix([f for f in frames if start <= f.frame_index < end], n_obj, n_rel)
                        for (start, end) in ranges])
