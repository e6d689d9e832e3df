"""
The synthetic multi-modal benchmark.

Every sequence is described by a :class:`.LatentScript`: an activity class, the ordered atomic
action segments composing it and, per modality, the atomic class each segment is rendered with.
Each activity owns a fixed signature set of atomic actions; segments draw their atomic class from
the signature (or, with probability `label_noise`, from all atomic classes). Every modality then
renders the same script through its own map:

    ego_rgb / third_rgb - a coloured patch whose colour, start position and motion are keyed to the atomic class
    audio               - a pure tone whose frequency is keyed to the atomic class
    scene_graph         - two objects joined by a relationship, the (object category, relationship) pair keyed to the atomic class

With `cross_modal_correlation` rho < 1 every modality independently replaces the class it renders
in a segment by a random one (with probability 1 - rho), so that modalities carry complementary
information.
"""

import hashlib
import json
import os
import numpy
from parameters import ParameterSet
import comact
from comact.core import ParametrizedObject, ConfigurationError
from comact.homage.schema import (MODALITIES, AtomicActionInterval, DatasetSplit, ModalityClip,
                                  SceneGraphFrame, SyncedSequence)
from comact.homage.io import write_annotations, save_payload

logger = comact.getComactLogger()

LATENTS_FILE = 'latents.jsonl'
SYNTH_FILE = 'synth.json'


class SynthConfig(ParametrizedObject):
    """
    Configuration of the synthetic benchmark (the `synth` section of a run configuration).

    Other parameters
    ----------------
    n_activity, n_atomic : int
                         Sizes of the activity and atomic-action vocabularies.
    atomic_per_activity : int
                        Size of the atomic-action signature of every activity.
    n_segments : int
               Number of atomic segments per sequence.
    modalities : list
               The rendered modalities.
    n_views : int
            Number of third-person camera views.
    cross_modal_correlation : float
                            rho, the probability that a modality renders the true atomic class of a segment.
    label_noise : float
                Probability that a segment's atomic class is drawn outside the activity signature.
    n_train, n_test1, n_test2 : int
                              Number of sequences per split.
    num_frames : int
               Length of every sequence in frames.
    fps : float
    frame_size : int
               Width and height of the rendered video frames.
    sample_rate : int
                Audio sample rate in Hz.
    n_obj, n_rel : int
                 Scene-graph vocabularies.
    sg_frames_per_segment : int
                          Number of scene-graph annotated frames per segment.
    seed : int
    """

    required_parameters = ParameterSet({
        'n_activity': int,
        'n_atomic': int,
        'atomic_per_activity': int,
        'n_segments': int,
        'modalities': list,
        'n_views': int,
        'cross_modal_correlation': float,
        'label_noise': float,
        'n_train': int,
        'n_test1': int,
        'n_test2': int,
        'num_frames': int,
        'fps': float,
        'frame_size': int,
        'sample_rate': int,
        'n_obj': int,
        'n_rel': int,
        'sg_frames_per_segment': int,
        'seed': int,
    })

    def __init__(self, parameters):
        ParametrizedObject.__init__(self, parameters)
        p = self.parameters
        if not 0.0 <= p.cross_modal_correlation <= 1.0:
            raise ConfigurationError("cross_modal_correlation %s outside [0, 1]" % p.cross_modal_correlation)
        if not 0.0 <= p.label_noise <= 1.0:
            raise ConfigurationError("label_noise %s outside [0, 1]" % p.label_noise)
        if not 1 <= p.atomic_per_activity <= p.n_atomic:
            raise ConfigurationError("atomic_per_activity %d must lie in [1, n_atomic=%d]" % (p.atomic_per_activity, p.n_atomic))
        if p.n_activity < 1 or p.n_segments < 1 or p.n_views < 1:
            raise ConfigurationError("n_activity, n_segments and n_views must be positive")
        if p.num_frames < 2 * p.n_segments:
            raise ConfigurationError("num_frames %d too short for %d segments" % (p.num_frames, p.n_segments))
        if p.frame_size < 8:
            raise ConfigurationError("frame_size %d below the 8 pixel minimum" % p.frame_size)
        unknown = [m for m in p.modalities if m not in MODALITIES]
        if unknown or len(p.modalities) == 0:
            raise ConfigurationError("Unknown or empty modality list %s" % list(p.modalities))
        if 'scene_graph' in p.modalities and p.n_obj * p.n_rel < p.n_atomic:
            raise ConfigurationError("n_obj * n_rel = %d cannot key %d atomic classes" % (p.n_obj * p.n_rel, p.n_atomic))
        if 'scene_graph' in p.modalities and p.n_obj < 2:
            raise ConfigurationError("Scene graphs need at least two object categories")

    @property
    def n_sequences(self):
        return self.parameters.n_train + self.parameters.n_test1 + self.parameters.n_test2

    def fingerprint(self):
        """
        A short digest identifying the generative process (all parameters including the seed).
        """
        blob = json.dumps(dict(self.parameters.as_dict()), sort_keys=True, default=list)
        return hashlib.sha1(blob.encode('utf-8')).hexdigest()[:16]

    def vocabulary(self):
        p = self.parameters
        return {'n_activity': p.n_activity, 'n_atomic': p.n_atomic, 'n_obj': p.n_obj, 'n_rel': p.n_rel,
                'frame_size': [p.frame_size, p.frame_size], 'fps': p.fps,
                'activity_names': ['activity_%d' % i for i in range(p.n_activity)],
                'atomic_names': ['atomic_%d' % i for i in range(p.n_atomic)]}


class LatentScript(object):
    """
    The ground truth behind one generated sequence.

    Parameters
    ----------
    sequence_id : str
    activity_class : int
    segments : list
             Ordered (atomic_class, duration) pairs; durations sum to the clip length.
    rendered : dict
             Modality -> list with the atomic class every segment is rendered with.
    render_seeds : dict
                 Modality -> seed of the renderer.
    fingerprint : str
                :meth:`SynthConfig.fingerprint` of the generating configuration.
    """

    def __init__(self, sequence_id, activity_class, segments, rendered, render_seeds, fingerprint):
        self.sequence_id = sequence_id
        self.activity_class = int(activity_class)
        self.segments = [(int(a), int(d)) for (a, d) in segments]
        self.rendered = {m: [int(c) for c in v] for m, v in rendered.items()}
        self.render_seeds = {m: int(s) for m, s in render_seeds.items()}
        self.fingerprint = fingerprint

    @property
    def num_frames(self):
        return sum(d for _, d in self.segments)

    def boundaries(self):
        """
        The [start, end) frame range of every segment.
        """
        ends = numpy.cumsum([d for _, d in self.segments])
        starts = numpy.concatenate([[0], ends[:-1]])
        return [(int(s), int(e)) for s, e in zip(starts, ends)]

    def intervals(self):
        return [AtomicActionInterval(a, s, e) for (a, _), (s, e) in zip(self.segments, self.boundaries())]

    def as_dict(self):
        return {'sequence_id': self.sequence_id, 'activity_class': self.activity_class,
                'segments': [list(s) for s in self.segments], 'rendered': self.rendered,
                'render_seeds': self.render_seeds, 'fingerprint': self.fingerprint}

    @classmethod
    def from_dict(cls, d):
        return cls(d['sequence_id'], d['activity_class'], d['segments'], d['rendered'], d['render_seeds'], d['fingerprint'])


def activity_signatures(config):
    """
    The atomic-action signature set of every activity, a pure function of the configuration.

    When the vocabulary is large enough the signatures are disjoint (sampled without replacement
    from all atomic classes); otherwise each activity samples its signature independently.
    """
    p = config.parameters
    rng = numpy.random.default_rng(numpy.random.SeedSequence([p.seed, 0]))
    if p.n_activity * p.atomic_per_activity <= p.n_atomic:
        perm = rng.permutation(p.n_atomic)
        return [sorted(int(a) for a in perm[i * p.atomic_per_activity:(i + 1) * p.atomic_per_activity])
                for i in range(p.n_activity)]
    return [sorted(int(a) for a in rng.choice(p.n_atomic, p.atomic_per_activity, replace=False))
            for _ in range(p.n_activity)]


def scene_graph_keys(config):
    """
    Injective map atomic class -> (object category, relationship category).
    """
    p = config.parameters
    rng = numpy.random.default_rng(numpy.random.SeedSequence([p.seed, 1]))
    cells = rng.permutation(p.n_obj * p.n_rel)[:p.n_atomic]
    return [(int(c // p.n_rel), int(c % p.n_rel)) for c in cells]


def _segment_durations(rng, num_frames, n_segments):
    base = num_frames // n_segments
    cuts = numpy.round(numpy.linspace(0, num_frames, n_segments + 1)).astype(int)
    jitter = base // 4
    if jitter > 0:
        cuts[1:-1] += rng.integers(-jitter, jitter + 1, size=n_segments - 1)
    return numpy.diff(cuts)


def sample_script(config, index, signatures):
    """
    Draws the :class:`.LatentScript` of sequence `index`. Every sequence uses its own derived seed,
    so scripts can be drawn independently (in any order or on different shards).
    """
    p = config.parameters
    rng = numpy.random.default_rng(numpy.random.SeedSequence([p.seed, 2, index]))
    activity = int(rng.integers(p.n_activity))
    durations = _segment_durations(rng, p.num_frames, p.n_segments)

    atoms = []
    for _ in range(p.n_segments):
        a = int(rng.choice(signatures[activity]))
        u, replacement = rng.random(), int(rng.integers(p.n_atomic))
        atoms.append(replacement if u < p.label_noise else a)

    rendered = {}
    for m in p.modalities:
        # one uniform and one replacement per segment, for every rho
        u = rng.random(p.n_segments)
        replacement = rng.integers(p.n_atomic, size=p.n_segments)
        rendered[m] = [a if u_s < p.cross_modal_correlation else int(r) for a, u_s, r in zip(atoms, u, replacement)]
    render_seeds = {m: int(s) for m, s in zip(p.modalities, rng.integers(2**31 - 1, size=len(p.modalities)))}

    return LatentScript('seq_%05d' % index, activity, list(zip(atoms, durations)), rendered, render_seeds,
                        config.fingerprint())


def class_color(atomic_class, n_atomic):
    """
    RGB colour (uint8) of the patch rendering an atomic class: hues spread around the colour wheel.
    """
    hue = (atomic_class * 0.618033988749895) % 1.0
    h6 = hue * 6.0
    x = 1.0 - abs(h6 % 2.0 - 1.0)
    rgb = [(1, x, 0), (x, 1, 0), (0, 1, x), (0, x, 1), (x, 0, 1), (1, 0, x)][int(h6) % 6]
    return (numpy.asarray(rgb) * 215 + 40).astype(numpy.uint8)


def render_video(script, config, modality, view=0):
    """
    Renders the video of a script: T x S x S x 3 uint8 frames with one moving patch per segment.
    Third-person views see the scene mirrored and rotated, from further away (smaller patch).
    """
    p = config.parameters
    S = p.frame_size
    rng = numpy.random.default_rng(numpy.random.SeedSequence([script.render_seeds[modality], view]))
    frames = (rng.random((script.num_frames, S, S, 3)) * 30).astype(numpy.uint8)
    size = max(2, S // 4 if modality == 'ego_rgb' else S // 6)

    for c, (start, end) in zip(script.rendered[modality], script.boundaries()):
        angle = 2 * numpy.pi * ((c * 0.381966011250105) % 1.0)
        x0 = (c * 7919) % (S - size)
        y0 = (c * 104729) % (S - size)
        speed = 0.5
        for t in range(start, end):
            x = int(round(x0 + speed * (t - start) * numpy.cos(angle))) % (S - size)
            y = int(round(y0 + speed * (t - start) * numpy.sin(angle))) % (S - size)
            frames[t, y:y + size, x:x + size] = class_color(c, p.n_atomic)

    if modality == 'third_rgb':
        if view % 2 == 1:
            frames = frames[:, :, ::-1]
        frames = numpy.rot90(frames, k=view // 2, axes=(1, 2))
    return numpy.ascontiguousarray(frames)


def tone_frequency(atomic_class, n_atomic, sample_rate):
    """
    Frequency (Hz) of the tone rendering an atomic class, spread evenly over (100 Hz, 0.45 sr).
    """
    low, high = 100.0, 0.45 * sample_rate
    return low + (atomic_class + 0.5) * (high - low) / n_atomic


def render_audio(script, config):
    """
    Renders the waveform of a script: one tone per segment plus weak white noise.
    """
    p = config.parameters
    rng = numpy.random.default_rng(numpy.random.SeedSequence([script.render_seeds['audio']]))
    samples_per_frame = p.sample_rate / p.fps
    n = int(round(script.num_frames * samples_per_frame))
    waveform = 0.01 * rng.standard_normal(n)
    for c, (start, end) in zip(script.rendered['audio'], script.boundaries()):
        a, b = int(round(start * samples_per_frame)), int(round(end * samples_per_frame))
        t = numpy.arange(b - a) / p.sample_rate
        waveform[a:b] += 0.5 * numpy.sin(2 * numpy.pi * tone_frequency(c, p.n_atomic, p.sample_rate) * t)
    return waveform.astype(numpy.float32)


def render_scene_graphs(script, config, keys):
    """
    Renders the annotated scene-graph frames of a script: per segment `sg_frames_per_segment` frames spread
    over the segment, each with a subject and an object joined by the relationship keyed to the rendered class.
    """
    p = config.parameters
    S = p.frame_size
    rng = numpy.random.default_rng(numpy.random.SeedSequence([script.render_seeds['scene_graph']]))
    frames = []
    for c, (start, end) in zip(script.rendered['scene_graph'], script.boundaries()):
        obj_category, relationship = keys[c]
        subject_category = (obj_category + 1) % p.n_obj
        n = min(p.sg_frames_per_segment, end - start)
        for f in numpy.unique(numpy.linspace(start, end - 1, n).round().astype(int)):
            boxes = []
            for _ in range(2):
                w, h = rng.integers(2, S // 2 + 1, size=2)
                x, y = rng.integers(0, S - w + 1), rng.integers(0, S - h + 1)
                boxes.append((int(x), int(y), int(w), int(h)))
            frames.append(SceneGraphFrame(int(f), [(0, subject_category, boxes[0]), (1, obj_category, boxes[1])],
                                          [(0, 1, relationship)]))
    return frames


def script_to_sequence(script, config, keys, directory=None):
    """
    Renders all modalities of `script` into a :class:`.SyncedSequence`. If `directory` is given the payloads
    are written there and the clips reference them by relative path.
    """
    p = config.parameters
    clips = []
    for m in p.modalities:
        if m == 'scene_graph':
            continue
        views = range(p.n_views) if m == 'third_rgb' else [0]
        for v in views:
            if m == 'audio':
                payload, sr, ext = render_audio(script, config), float(p.sample_rate), 'npz'
            else:
                payload, sr, ext = render_video(script, config, m, v), None, 'npy'
            path = os.path.join('clips', script.sequence_id, '%s_v%d.%s' % (m, v, ext))
            if directory is not None:
                save_payload(m, directory, path, payload, sr)
                clips.append(ModalityClip(m, source_view_index=v, path=path))
            else:
                clips.append(ModalityClip(m, payload, source_view_index=v, sample_rate=sr, path=path))
    scene_graphs = render_scene_graphs(script, config, keys) if 'scene_graph' in p.modalities else None
    return SyncedSequence(script.sequence_id, clips, script.activity_class, script.intervals(), scene_graphs,
                          num_frames=script.num_frames, fps=p.fps, frame_size=(p.frame_size, p.frame_size))


def generate_scripts(config):
    signatures = activity_signatures(config)
    return [sample_script(config, i, signatures) for i in range(config.n_sequences)]


def generate_dataset(config, directory):
    """
    Writes the synthetic benchmark described by `config` into `directory` in the annotation format
    (annotations.jsonl, vocab.json, splits.json and the clip files) together with the latent scripts
    (latents.jsonl) and the generating configuration (synth.json).

    Generation is a pure function of the configuration: the same seed produces byte-identical annotation files.

    Returns
    -------
    scripts : list(LatentScript)
    """
    p = config.parameters
    logger.info("Generating %d synthetic sequences into %s" % (config.n_sequences, directory))
    os.makedirs(directory, exist_ok=True)
    keys = scene_graph_keys(config) if 'scene_graph' in p.modalities else None
    scripts = generate_scripts(config)
    sequences = [script_to_sequence(s, config, keys, directory) for s in scripts]

    ids = [s.sequence_id for s in scripts]
    split = DatasetSplit(ids[:p.n_train], ids[p.n_train:p.n_train + p.n_test1], ids[p.n_train + p.n_test1:])
    write_annotations(directory, sequences, split=split, vocabulary=config.vocabulary())

    with open(os.path.join(directory, LATENTS_FILE), 'w') as f:
        for s in scripts:
            f.write(json.dumps(s.as_dict(), sort_keys=True) + '\n')
    with open(os.path.join(directory, SYNTH_FILE), 'w') as f:
        json.dump({'parameters': dict(p.as_dict()), 'fingerprint': config.fingerprint(),
                   'signatures': activity_signatures(config), 'scene_graph_keys': keys},
                  f, indent=1, sort_keys=True, default=list)
    return scripts


def load_latents(directory):
    """
    Reads the latent scripts written by :func:`.generate_dataset`. Returns a dict sequence_id -> LatentScript.
    """
    with open(os.path.join(directory, LATENTS_FILE)) as f:
        scripts = [LatentScript.from_dict(json.loads(line)) for line in f if line.strip()]
    return {s.sequence_id: s for s in scripts}


def load_synth_config(directory):
    """
    Restores the :class:`.SynthConfig` a dataset was generated with.
    """
    with open(os.path.join(directory, SYNTH_FILE)) as f:
        return SynthConfig(ParameterSet(json.load(f)['parameters']))
