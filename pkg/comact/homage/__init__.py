"""
This package implements the dataset data model (:mod:`comact.homage.schema`), the ingestion and
validation of annotation files (:mod:`comact.homage.io`) and the preprocessing of raw modality
payloads into model inputs (:mod:`comact.homage.preprocessing`).
"""
from comact.homage.schema import (MODALITIES, VIDEO_MODALITIES, AUDIO_MODALITIES, SCENE_GRAPH_MODALITIES,
                                  HOMAGE_VOCABULARY, AnnotationError, AnnotationValidationError,
                                  AtomicActionInterval, DatasetSplit, ModalityClip, SceneGraphFrame,
                                  SyncedSequence, ValidationReport)
from comact.homage.io import parse_annotations, write_annotations
