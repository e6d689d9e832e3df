"""
The data model of a multi-modal, hierarchically annotated activity dataset.

A dataset is a collection of :class:`.SyncedSequence` objects. Each holds one synchronized activity
instance: the clips of every available modality, a video-level activity label, temporally
localized atomic-action intervals and (optionally) the frames annotated with scene graphs.
The :class:`.DatasetSplit` holds the train and the two test splits along with the class vocabularies.
"""

import numpy

VIDEO_MODALITIES = ('ego_rgb', 'third_rgb')
AUDIO_MODALITIES = ('audio',)
SCENE_GRAPH_MODALITIES = ('scene_graph',)
MODALITIES = VIDEO_MODALITIES + AUDIO_MODALITIES + SCENE_GRAPH_MODALITIES

HOMAGE_VOCABULARY = {'n_activity': 75, 'n_atomic': 453, 'n_obj': 86, 'n_rel': 29}


class AnnotationError(ValueError):
    """
    A malformed annotation record.

    Parameters
    ----------
    message : str
            Human readable description.
    path : str
         The annotation file.
    line : int
         1-based line number of the offending record.
    field : str
          The offending field (dotted path inside the record), if known.
    """

    def __init__(self, message, path=None, line=None, field=None):
        self.path = path
        self.line = line
        self.field = field
        ValueError.__init__(self, "%s:%s: %s%s" % (path, line, message, (" (field %s)" % field) if field else ""))

    def as_dict(self):
        return {'path': self.path, 'line': self.line, 'field': self.field, 'message': str(self)}


class SchemaViolation(object):
    """
    One collected validation problem.
    """

    def __init__(self, message, line=None, sequence_id=None, field=None):
        self.message = message
        self.line = line
        self.sequence_id = sequence_id
        self.field = field

    def as_dict(self):
        return {'line': self.line, 'sequence_id': self.sequence_id, 'field': self.field, 'message': self.message}

    def __repr__(self):
        return "SchemaViolation(line=%s, sequence_id=%s, field=%s, message=%r)" % (self.line, self.sequence_id, self.field, self.message)


class ValidationReport(object):
    """
    Collects the :class:`.SchemaViolation` instances found while parsing a dataset.
    """

    def __init__(self, path=None):
        self.path = path
        self.violations = []
        self.n_sequences = 0

    def add(self, message, line=None, sequence_id=None, field=None):
        self.violations.append(SchemaViolation(message, line=line, sequence_id=sequence_id, field=field))

    def extend(self, violations):
        self.violations.extend(violations)

    @property
    def ok(self):
        return len(self.violations) == 0

    def as_dict(self):
        return {'path': self.path, 'n_sequences': self.n_sequences,
                'n_violations': len(self.violations),
                'violations': [v.as_dict() for v in self.violations]}


class AnnotationValidationError(ValueError):
    """
    Raised by strict parsing when the dataset violates the schema invariants. Carries the full report.
    """

    def __init__(self, report):
        self.report = report
        first = report.violations[0] if report.violations else None
        ValueError.__init__(self, "%d schema violation(s) in %s%s" % (
            len(report.violations), report.path, (", first: %s" % first.message) if first else ""))


class ModalityClip(object):
    """
    One modality stream of a sequence.

    Parameters
    ----------
    modality_id : str
                One of `MODALITIES`.
    payload : ndarray
            Video: T x H x W x 3 frames. Audio: 1-D waveform. Scene graph: None (the graph lives in the sequence).
    source_view_index : int
                      Which third-person camera the clip comes from (0 for single-view modalities).
    sample_rate : float
                Sample rate of audio payloads in Hz, None otherwise.
    path : str
         The file the payload is loaded from (lazy clips keep payload None until :meth:`.load`).
    """

    def __init__(self, modality_id, payload=None, source_view_index=0, sample_rate=None, path=None):
        if modality_id not in MODALITIES:
            raise ValueError("Unknown modality %s, expected one of %s" % (modality_id, MODALITIES))
        self.modality_id = modality_id
        self.payload = payload
        self.source_view_index = source_view_index
        self.sample_rate = sample_rate
        self.path = path
        if payload is not None:
            self.check()

    @property
    def is_video(self):
        return self.modality_id in VIDEO_MODALITIES

    @property
    def is_audio(self):
        return self.modality_id in AUDIO_MODALITIES

    @property
    def num_frames(self):
        return 0 if self.payload is None else self.payload.shape[0]

    def check(self):
        """
        Validates the payload against the modality. Raises ValueError.
        """
        p = self.payload
        if self.is_video:
            if p.ndim != 4 or p.shape[-1] != 3 or p.shape[0] < 1:
                raise ValueError("Video clip %s must be T x H x W x 3 with T >= 1, got shape %s" % (self.path, p.shape))
        elif self.is_audio:
            if p.ndim != 1:
                raise ValueError("Audio clip %s must be a 1-D waveform, got shape %s" % (self.path, p.shape))
            if self.sample_rate is None or self.sample_rate <= 0:
                raise ValueError("Audio clip %s needs a positive sample rate, got %s" % (self.path, self.sample_rate))

    def load(self, root=''):
        """
        Loads the payload from `path` (relative to `root`) if it is not loaded yet. Returns self.
        """
        if self.payload is None and self.path is not None:
            from comact.homage.io import load_payload
            self.payload, sr = load_payload(self.modality_id, root, self.path)
            if sr is not None:
                self.sample_rate = sr
            self.check()
        return self

    def __eq__(self, other):
        if not isinstance(other, ModalityClip):
            return NotImplemented
        same_payload = (self.payload is None and other.payload is None) or (
            self.payload is not None and other.payload is not None and numpy.array_equal(self.payload, other.payload))
        return (self.modality_id, self.source_view_index, self.sample_rate, self.path) == \
               (other.modality_id, other.source_view_index, other.sample_rate, other.path) and same_payload


class AtomicActionInterval(object):
    """
    A temporally localized atomic action: frames [start_frame, end_frame) carry class `class_id`.
    """

    def __init__(self, class_id, start_frame, end_frame):
        self.class_id = int(class_id)
        self.start_frame = int(start_frame)
        self.end_frame = int(end_frame)

    def violations(self, n_atomic=None):
        problems = []
        if not (0 <= self.start_frame < self.end_frame):
            problems.append("interval [%d, %d) of class %d must satisfy 0 <= start < end" % (self.start_frame, self.end_frame, self.class_id))
        if self.class_id < 0 or (n_atomic is not None and self.class_id >= n_atomic):
            problems.append("atomic class %d outside [0, %s)" % (self.class_id, n_atomic))
        return problems

    def __eq__(self, other):
        return isinstance(other, AtomicActionInterval) and \
            (self.class_id, self.start_frame, self.end_frame) == (other.class_id, other.start_frame, other.end_frame)

    def __repr__(self):
        return "AtomicActionInterval(%d, %d, %d)" % (self.class_id, self.start_frame, self.end_frame)


class SceneGraphFrame(object):
    """
    The scene graph of one annotated frame.

    Parameters
    ----------
    frame_index : int
                Index of the annotated frame on the sequence's frame clock.
    objects : list
            Tuples (object_id, category, (x, y, w, h)) with the box in pixels.
    relationships : list
                  Tuples (subject_object_id, object_object_id, relationship_category).
    """

    def __init__(self, frame_index, objects=(), relationships=()):
        self.frame_index = int(frame_index)
        self.objects = [(int(i), int(c), tuple(float(b) for b in box)) for (i, c, box) in objects]
        self.relationships = [(int(s), int(o), int(r)) for (s, o, r) in relationships]

    def category_of(self, object_id):
        for (i, c, _) in self.objects:
            if i == object_id:
                return c
        raise KeyError("Object %d not declared in frame %d" % (object_id, self.frame_index))

    def violations(self, n_obj=None, n_rel=None, frame_size=None):
        problems = []
        ids = [o[0] for o in self.objects]
        if len(set(ids)) != len(ids):
            problems.append("frame %d declares duplicate object ids" % self.frame_index)
        for (i, c, (x, y, w, h)) in self.objects:
            if c < 0 or (n_obj is not None and c >= n_obj):
                problems.append("frame %d object %d category %d outside [0, %s)" % (self.frame_index, i, c, n_obj))
            if w < 0 or h < 0 or x < 0 or y < 0:
                problems.append("frame %d object %d has a negative box %s" % (self.frame_index, i, (x, y, w, h)))
            elif frame_size is not None and (x + w > frame_size[0] or y + h > frame_size[1]):
                problems.append("frame %d object %d box %s exceeds frame %s" % (self.frame_index, i, (x, y, w, h), tuple(frame_size)))
        for (s, o, r) in self.relationships:
            for endpoint in (s, o):
                if endpoint not in ids:
                    problems.append("frame %d relationship (%d, %d, %d) references undeclared object %d" % (self.frame_index, s, o, r, endpoint))
            if r < 0 or (n_rel is not None and r >= n_rel):
                problems.append("frame %d relationship category %d outside [0, %s)" % (self.frame_index, r, n_rel))
        return problems

    def __eq__(self, other):
        return isinstance(other, SceneGraphFrame) and \
            (self.frame_index, self.objects, self.relationships) == (other.frame_index, other.objects, other.relationships)

    def __repr__(self):
        return "SceneGraphFrame(%d, objects=%s, relationships=%s)" % (self.frame_index, self.objects, self.relationships)


class SyncedSequence(object):
    """
    One synchronized activity instance.

    Parameters
    ----------
    sequence_id : str
    clips : list(ModalityClip)
          One clip per available modality (several for multi-view third person video).
    activity_class : int
    atomic_intervals : list(AtomicActionInterval)
                     Kept in file order.
    scene_graphs : list(SceneGraphFrame) or None
    num_frames : int
               Length of the shared frame clock (None if it should be taken from the video clips).
    fps : float
    frame_size : tuple
               (width, height) of the video frames in pixels, used to bound scene graph boxes.
    """

    def __init__(self, sequence_id, clips, activity_class, atomic_intervals=(), scene_graphs=None,
                 num_frames=None, fps=30.0, frame_size=None):
        self.sequence_id = str(sequence_id)
        self.clips = list(clips)
        self.activity_class = int(activity_class)
        self.atomic_intervals = list(atomic_intervals)
        self.scene_graphs = None if scene_graphs is None else list(scene_graphs)
        self.num_frames = None if num_frames is None else int(num_frames)
        self.fps = float(fps)
        self.frame_size = None if frame_size is None else tuple(int(s) for s in frame_size)

    @property
    def modalities(self):
        """
        The modalities available in the sequence (scene_graph counts when graphs are annotated).
        """
        ms = []
        for c in self.clips:
            if c.modality_id not in ms:
                ms.append(c.modality_id)
        if self.scene_graphs and 'scene_graph' not in ms:
            ms.append('scene_graph')
        return ms

    def clips_of(self, modality):
        return [c for c in self.clips if c.modality_id == modality]

    def violations(self, n_activity=None, n_atomic=None, n_obj=None, n_rel=None, frame_size=None):
        problems = []
        if len(self.clips) == 0 and not self.scene_graphs:
            problems.append(('clips', "sequence has no modality"))
        if self.activity_class < 0 or (n_activity is not None and self.activity_class >= n_activity):
            problems.append(('activity_class', "activity class %d outside [0, %s)" % (self.activity_class, n_activity)))
        for i, interval in enumerate(self.atomic_intervals):
            for p in interval.violations(n_atomic):
                problems.append(('atomic[%d]' % i, p))
        fs = self.frame_size or frame_size
        for i, frame in enumerate(self.scene_graphs or []):
            for p in frame.violations(n_obj, n_rel, fs):
                problems.append(('scene_graphs[%d]' % i, p))
        lengths = set(c.num_frames for c in self.clips if c.is_video and c.payload is not None)
        if len(lengths) > 1:
            problems.append(('clips', "video clips do not share a frame clock: lengths %s" % sorted(lengths)))
        return problems

    def __eq__(self, other):
        if not isinstance(other, SyncedSequence):
            return NotImplemented
        return (self.sequence_id, self.activity_class, self.num_frames, self.fps, self.frame_size) == \
               (other.sequence_id, other.activity_class, other.num_frames, other.fps, other.frame_size) and \
            self.clips == other.clips and self.atomic_intervals == other.atomic_intervals and \
            self.scene_graphs == other.scene_graphs

    def __repr__(self):
        return "SyncedSequence(%s, activity=%d, modalities=%s, %d atomic intervals)" % (
            self.sequence_id, self.activity_class, self.modalities, len(self.atomic_intervals))


class DatasetSplit(object):
    """
    The train and test splits of a dataset with its class vocabularies.
    """

    def __init__(self, train=(), test1=(), test2=(), n_activity=None, n_atomic=None, n_obj=None, n_rel=None,
                 class_names=None, frame_size=None, fps=30.0):
        self.train = list(train)
        self.test1 = list(test1)
        self.test2 = list(test2)
        self.n_activity = n_activity
        self.n_atomic = n_atomic
        self.n_obj = n_obj
        self.n_rel = n_rel
        self.class_names = class_names or {}
        self.frame_size = None if frame_size is None else tuple(frame_size)
        self.fps = fps

    def split(self, name):
        if name not in ('train', 'test1', 'test2'):
            raise ValueError("Unknown split %s, expected train, test1 or test2" % name)
        return getattr(self, name)

    def violations(self, known_ids):
        problems = []
        names = ('train', 'test1', 'test2')
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                shared = set(self.split(a)) & set(self.split(b))
                if shared:
                    problems.append("splits %s and %s share %d sequence(s), e.g. %s" % (a, b, len(shared), sorted(shared)[0]))
        for a in names:
            missing = [s for s in self.split(a) if s not in known_ids]
            if missing:
                problems.append("split %s references %d unknown sequence(s), e.g. %s" % (a, len(missing), missing[0]))
        return problems

    def vocabulary(self):
        return {'n_activity': self.n_activity, 'n_atomic': self.n_atomic, 'n_obj': self.n_obj, 'n_rel': self.n_rel}
