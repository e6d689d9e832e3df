"""
Classification metrics reported by comact.

Scores are (samples x classes) arrays; higher means more likely.
"""

import numpy
from scipy.stats import binomtest
from sklearn.metrics import average_precision_score, silhouette_score


def topk_accuracy(scores, labels, k=1):
    """
    Fraction of samples whose true class is among the `k` highest scores.

    Ties are broken in favour of the lowest class index.

    Parameters
    ----------
    scores : ndarray
           samples x classes.
    labels : ndarray
           The true class of every sample.
    k : int

    Returns
    -------
    float
    """
    scores = numpy.asarray(scores, dtype=numpy.float64)
    labels = numpy.asarray(labels, dtype=numpy.int64)
    if scores.ndim != 2 or scores.shape[0] == 0:
        raise ValueError("topk_accuracy needs a non-empty samples x classes score matrix, got shape %s" % (scores.shape,))
    if labels.shape != (scores.shape[0],):
        raise ValueError("%d labels for %d samples" % (len(labels), scores.shape[0]))
    if not 1 <= k <= scores.shape[1]:
        raise ValueError("k=%d outside [1, %d]" % (k, scores.shape[1]))
    top = numpy.argsort(-scores, axis=1, kind='stable')[:, :k]
    return float(numpy.mean(numpy.any(top == labels[:, numpy.newaxis], axis=1)))


def average_precisions(scores, labels):
    """
    Per class average precision (the mean of the precisions at every positive, no interpolation).

    Returns
    -------
    ap : ndarray
       Per class AP; NaN for classes without positives.
    support : ndarray
            Number of positives of every class.
    """
    scores = numpy.asarray(scores, dtype=numpy.float64)
    labels = numpy.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 2 or scores.shape[0] == 0:
        raise ValueError("Scores %s and multi-hot labels %s must be equal, non-empty matrices" % (scores.shape, labels.shape))
    support = (labels > 0).sum(axis=0)
    ap = numpy.full(scores.shape[1], numpy.nan)
    for c in numpy.flatnonzero(support):
        ap[c] = average_precision_score(labels[:, c] > 0, scores[:, c])
    return ap, support


def support_weighted_map(scores, labels):
    """
    Mean of the per class average precisions weighted by the number of positives of each class.
    Classes without positives do not contribute.

    Parameters
    ----------
    scores : ndarray
           samples x classes.
    labels : ndarray
           samples x classes multi-hot matrix.
    """
    ap, support = average_precisions(scores, labels)
    if support.sum() == 0:
        raise ValueError("Support weighted mAP is undefined without any positive label")
    present = support > 0
    return float(numpy.sum(ap[present] * support[present]) / numpy.sum(support[present]))


def paired_sign_test(treatment, control):
    """
    One-sided sign test of paired per-seed results: are the treatment runs better than their control?

    Ties are dropped.

    Returns
    -------
    mean_improvement : float
    p_value : float
            1.0 when every pair is tied.
    """
    treatment = numpy.asarray(treatment, dtype=numpy.float64)
    control = numpy.asarray(control, dtype=numpy.float64)
    if treatment.shape != control.shape or treatment.ndim != 1 or len(treatment) == 0:
        raise ValueError("Paired results must be equal length, non-empty vectors")
    diff = treatment - control
    wins, losses = int(numpy.sum(diff > 0)), int(numpy.sum(diff < 0))
    if wins + losses == 0:
        return 0.0, 1.0
    return float(numpy.mean(diff)), float(binomtest(wins, wins + losses, 0.5, alternative='greater').pvalue)


def projection_silhouette(points, classes):
    """
    Mean silhouette of a (projected) embedding with respect to the activity classes; needs at least
    two classes and fewer classes than points.
    """
    classes = numpy.asarray(classes)
    n_classes = len(numpy.unique(classes))
    if not 2 <= n_classes < len(classes):
        raise ValueError("A silhouette needs 2 <= classes < points, got %d classes for %d points" % (n_classes, len(classes)))
    return float(silhouette_score(numpy.asarray(points, dtype=numpy.float64), classes))
