"""
Exports of trained runs for inspection: final context embeddings as TSV tables and the attention
maps of the alignment branch as images with raw array sidecars.
"""

import csv
import os
import numpy
import torch
import comact
from comact.core import ConfigurationError
from comact.homage.dataset import SequenceDataset
from comact.homage.schema import VIDEO_MODALITIES
from comact.analysis.evaluation import extract_outputs
from comact.models import pair_key

logger = comact.getComactLogger()


def export_embeddings(model, dataset, modality, split, path, batch_size=16):
    """
    Writes one row per sequence of `split`: sequence_id, activity_class and the D components e0 ... e{D-1}
    of the final context c_N of `modality`.

    Returns
    -------
    int
       Number of rows written.
    """
    sequences = dataset.sequences_of(split)
    outputs = extract_outputs(model, dataset, modality, sequences, batch_size)
    features = outputs['features']
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f, delimiter='\t', lineterminator='\n')
        writer.writerow(['sequence_id', 'activity_class'] + ['e%d' % i for i in range(features.shape[1])])
        for s, c, e in zip(sequences, outputs['activity'], features):
            writer.writerow([s.sequence_id, int(c)] + ['%.8g' % v for v in e])
    logger.info("Exported %d %s embeddings of %s to %s" % (len(sequences), modality, split, path))
    return len(sequences)


def read_embeddings(path):
    """
    Reads a TSV written by :func:`.export_embeddings`. Returns (sequence ids, classes, n x D array).
    """
    with open(path, newline='') as f:
        rows = list(csv.reader(f, delimiter='\t'))
    body = rows[1:]
    return ([r[0] for r in body], numpy.array([int(r[1]) for r in body]),
            numpy.array([[float(v) for v in r[2:]] for r in body]).reshape(len(body), len(rows[0]) - 2))


def attention_maps(model, dataset, modality, other, sequences):
    """
    Per block attention maps p of pair (modality, other) for each sequence.

    Returns
    -------
    dict
        sequence_id -> (maps N x H' x W', blocks); blocks is the N x K x H x W x 3 video input.
    """
    if not model.attention:
        raise ConfigurationError("The checkpoint was trained without attention; there are no attention maps")
    if pair_key(modality, other) not in model.attention_heads:
        raise ConfigurationError("No attention head for pair (%s, %s); attention anchors must be one of %s"
                                 % (modality, other, list(VIDEO_MODALITIES)))
    view = SequenceDataset(dataset, sequences, [modality], train=False)
    maps = {}
    model.eval()
    with torch.no_grad():
        for i, s in enumerate(sequences):
            item = view[i]
            blocks = item['inputs'][modality].unsqueeze(0)
            output = model({modality: blocks})[modality]
            _, p = model.alignment_embedding(output, modality, other)
            maps[s.sequence_id] = (p[0].numpy(), item['inputs'][modality].numpy())
    return maps


def export_attention_maps(model, dataset, modality, other, sequences, directory):
    """
    Writes attention/<modality>__<other>/<sequence_id>.npy (N x H' x W' maps) and a .png rendering
    every block's middle frame next to its map (white is higher importance).

    Returns
    -------
    list
        The written .npy paths.
    """
    from comact.visualization.plotting import plot_attention_grid
    target = os.path.join(directory, pair_key(modality, other))
    os.makedirs(target, exist_ok=True)
    written = []
    for sequence_id, (maps, blocks) in attention_maps(model, dataset, modality, other, sequences).items():
        npy = os.path.join(target, '%s.npy' % sequence_id)
        numpy.save(npy, maps)
        plot_attention_grid(maps, blocks, os.path.join(target, '%s.png' % sequence_id), title=sequence_id)
        written.append(npy)
    logger.info("Exported %d attention maps of (%s, %s) to %s" % (len(written), modality, other, target))
    return written
