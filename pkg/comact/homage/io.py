"""
Ingestion and serialization of datasets in the JSON-lines annotation format.

A dataset directory holds:

    annotations.jsonl  one sequence per line:
                       {"sequence_id", "activity_class", "clips": [{"modality", "path", "view"}],
                        "atomic": [{"class", "start", "end"}],
                        "scene_graphs": [{"frame", "objects": [{"id", "category", "box": [x, y, w, h]}],
                                          "relationships": [{"subject", "object", "relationship"}]}],
                        optional "num_frames", "fps", "frame_size": [width, height]}
    vocab.json         {"n_activity", "n_atomic", "n_obj", "n_rel", optional "frame_size", "fps", "*_names"}
    splits.json        {"train": [...], "test1": [...], "test2": [...]}
    <clip files>       video clips as .npy (T x H x W x 3), audio clips as .npz (waveform, sample_rate)

Missing `vocab.json` disables the upper-bound range checks; missing `splits.json` puts every sequence in train.
"""

import json
import os
import numpy
import jsonschema
import comact
from comact.homage.schema import (MODALITIES, AnnotationError, AnnotationValidationError, AtomicActionInterval,
                                  DatasetSplit, ModalityClip, SceneGraphFrame, SyncedSequence, ValidationReport)

logger = comact.getComactLogger()

ANNOTATIONS_FILE = 'annotations.jsonl'
VOCAB_FILE = 'vocab.json'
SPLITS_FILE = 'splits.json'

_integer = {"type": "integer"}
_number = {"type": "number"}

RECORD_SCHEMA = {
    "type": "object",
    "required": ["sequence_id", "activity_class", "clips"],
    "properties": {
        "sequence_id": {"type": "string", "minLength": 1},
        "activity_class": _integer,
        "num_frames": _integer,
        "fps": _number,
        "frame_size": {"type": "array", "items": _integer, "minItems": 2, "maxItems": 2},
        "clips": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["modality"],
                "properties": {
                    "modality": {"enum": list(MODALITIES)},
                    "path": {"type": ["string", "null"]},
                    "view": _integer,
                },
            },
        },
        "atomic": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["class", "start", "end"],
                "properties": {"class": _integer, "start": _integer, "end": _integer},
            },
        },
        "scene_graphs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["frame", "objects", "relationships"],
                "properties": {
                    "frame": _integer,
                    "objects": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["id", "category", "box"],
                            "properties": {
                                "id": _integer,
                                "category": _integer,
                                "box": {"type": "array", "items": _number, "minItems": 4, "maxItems": 4},
                            },
                        },
                    },
                    "relationships": {
                        "type": "array",
                        "items": {
                            "type": "object",
                            "required": ["subject", "object", "relationship"],
                            "properties": {"subject": _integer, "object": _integer, "relationship": _integer},
                        },
                    },
                },
            },
        },
    },
}

_record_validator = jsonschema.Draft7Validator(RECORD_SCHEMA)


def _resolve(path):
    """
    Returns (directory, annotation file) for either a dataset directory or an annotations file.
    """
    if os.path.isdir(path):
        return path, os.path.join(path, ANNOTATIONS_FILE)
    return os.path.dirname(path) or '.', path


def load_vocabulary(directory):
    vocab_path = os.path.join(directory, VOCAB_FILE)
    if not os.path.exists(vocab_path):
        return {}
    with open(vocab_path) as f:
        return json.load(f)


def record_to_sequence(record):
    """
    Builds a :class:`.SyncedSequence` from a schema-conforming record. Intervals keep file order.
    """
    clips = [ModalityClip(c['modality'], path=c.get('path'), source_view_index=c.get('view', 0))
             for c in record['clips']]
    atomic = [AtomicActionInterval(a['class'], a['start'], a['end']) for a in record.get('atomic', [])]
    scene_graphs = None
    if 'scene_graphs' in record:
        scene_graphs = [SceneGraphFrame(g['frame'],
                                        [(o['id'], o['category'], o['box']) for o in g['objects']],
                                        [(r['subject'], r['object'], r['relationship']) for r in g['relationships']])
                        for g in record['scene_graphs']]
    return SyncedSequence(record['sequence_id'], clips, record['activity_class'], atomic, scene_graphs,
                          num_frames=record.get('num_frames'), fps=record.get('fps', 30.0),
                          frame_size=record.get('frame_size'))


def sequence_to_record(sequence):
    """
    The inverse of :func:`.record_to_sequence`. Payloads are not part of the record.
    """
    record = {'sequence_id': sequence.sequence_id,
              'activity_class': sequence.activity_class,
              'clips': [{'modality': c.modality_id, 'path': c.path, 'view': c.source_view_index} for c in sequence.clips],
              'atomic': [{'class': a.class_id, 'start': a.start_frame, 'end': a.end_frame} for a in sequence.atomic_intervals]}
    if sequence.scene_graphs is not None:
        record['scene_graphs'] = [{'frame': g.frame_index,
                                   'objects': [{'id': i, 'category': c, 'box': list(box)} for (i, c, box) in g.objects],
                                   'relationships': [{'subject': s, 'object': o, 'relationship': r} for (s, o, r) in g.relationships]}
                                  for g in sequence.scene_graphs]
    if sequence.num_frames is not None:
        record['num_frames'] = sequence.num_frames
    record['fps'] = sequence.fps
    if sequence.frame_size is not None:
        record['frame_size'] = list(sequence.frame_size)
    return record


def parse_annotations(path, strict=True):
    """
    Parses and validates a dataset.

    Parameters
    ----------
    path : str
         A dataset directory or the path of its annotations.jsonl.
    strict : bool
           If True the first malformed record raises :class:`.AnnotationError` and any invariant
           violation raises :class:`.AnnotationValidationError` after the whole file was checked.
           If False malformed records are skipped and every problem is collected in the report.

    Returns
    -------
    split : DatasetSplit
    sequences : list(SyncedSequence)
              In file order; clip payloads are not loaded.
    report : ValidationReport
    """
    directory, annotation_path = _resolve(path)
    vocab = load_vocabulary(directory)
    report = ValidationReport(annotation_path)
    sequences = []

    if not os.path.exists(annotation_path):
        raise FileNotFoundError("No annotation file at %s" % annotation_path)

    with open(annotation_path) as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                error = AnnotationError("invalid JSON: %s" % e.msg, annotation_path, line_number)
                if strict:
                    raise error
                report.add(str(error), line=line_number)
                continue
            schema_errors = sorted(_record_validator.iter_errors(record), key=lambda e: list(map(str, e.path)))
            if schema_errors:
                e = schema_errors[0]
                field = '.'.join(str(p) for p in e.path) or None
                if strict:
                    raise AnnotationError(e.message, annotation_path, line_number, field)
                for e in schema_errors:
                    report.add(e.message, line=line_number, sequence_id=record.get('sequence_id') if isinstance(record, dict) else None,
                               field='.'.join(str(p) for p in e.path) or None)
                continue

            sequence = record_to_sequence(record)
            for field, message in sequence.violations(vocab.get('n_activity'), vocab.get('n_atomic'),
                                                      vocab.get('n_obj'), vocab.get('n_rel'), vocab.get('frame_size')):
                report.add(message, line=line_number, sequence_id=sequence.sequence_id, field=field)
            sequences.append(sequence)

    ids = [s.sequence_id for s in sequences]
    if len(set(ids)) != len(ids):
        seen = set()
        for s in ids:
            if s in seen:
                report.add("duplicate sequence id %s" % s, sequence_id=s, field='sequence_id')
            seen.add(s)

    splits_path = os.path.join(directory, SPLITS_FILE)
    if os.path.exists(splits_path):
        with open(splits_path) as f:
            splits = json.load(f)
    else:
        splits = {'train': ids, 'test1': [], 'test2': []}

    names = {k: v for k, v in vocab.items() if k.endswith('_names')}
    split = DatasetSplit(splits.get('train', []), splits.get('test1', []), splits.get('test2', []),
                         n_activity=vocab.get('n_activity'), n_atomic=vocab.get('n_atomic'),
                         n_obj=vocab.get('n_obj'), n_rel=vocab.get('n_rel'), class_names=names,
                         frame_size=vocab.get('frame_size'), fps=vocab.get('fps', 30.0))
    for message in split.violations(set(ids)):
        report.add(message, field='splits')

    report.n_sequences = len(sequences)
    logger.info("Parsed %d sequences from %s (%d violations)" % (len(sequences), annotation_path, len(report.violations)))
    if strict and not report.ok:
        raise AnnotationValidationError(report)
    return split, sequences, report


def write_annotations(directory, sequences, split=None, vocabulary=None):
    """
    Serializes `sequences` (and optionally the split and vocabulary sidecars) into `directory`.
    The output is a pure function of the arguments.
    """
    os.makedirs(directory, exist_ok=True)
    with open(os.path.join(directory, ANNOTATIONS_FILE), 'w') as f:
        for s in sequences:
            f.write(json.dumps(sequence_to_record(s)) + '\n')
    if split is not None:
        with open(os.path.join(directory, SPLITS_FILE), 'w') as f:
            json.dump({'train': split.train, 'test1': split.test1, 'test2': split.test2}, f, indent=1)
    if vocabulary is not None:
        with open(os.path.join(directory, VOCAB_FILE), 'w') as f:
            json.dump(vocabulary, f, indent=1, sort_keys=True)


def load_payload(modality, root, path):
    """
    Loads a clip payload. Returns (payload, sample_rate); sample_rate is None for video.
    """
    full = os.path.join(root, path)
    if modality == 'audio':
        with numpy.load(full) as archive:
            return archive['waveform'].astype(numpy.float32), float(archive['sample_rate'])
    return numpy.load(full), None


def save_payload(modality, root, path, payload, sample_rate=None):
    full = os.path.join(root, path)
    os.makedirs(os.path.dirname(full), exist_ok=True)
    if modality == 'audio':
        with open(full, 'wb') as f:
            numpy.savez(f, waveform=numpy.asarray(payload, dtype=numpy.float32), sample_rate=numpy.float64(sample_rate))
    else:
        numpy.save(full, payload)
