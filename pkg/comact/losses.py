"""
The training objectives.

    alignment_nce_loss           - NCE between the synchronized per-block embeddings of two modalities
    multi_modal_alignment_loss   - alignment summed over all ordered modality pairs
    attention_pool               - softmax attention pooling of a context grid
    activity_loss, atomic_loss   - activity cross-entropy and atomic-action multi-label binary cross-entropy
    compositional_loss           - L_v + lambda * L_a
    uncertainty_weighted_loss    - the same two terms weighted by learned task uncertainties
    distillation_loss            - hard-label cross-entropy plus soft cross-entropy against temperature softened teachers
    predictive_contrastive_loss  - dense NCE between predicted and actual future block latents

All functions are stateless; learnable quantities (attention heads, log-variances) are owned by the model.
"""

import itertools
import torch
import torch.nn.functional as F


def _flatten_embeddings(x):
    return x.reshape(-1, x.shape[-1])


def alignment_nce_loss(anchors, candidates, anchor_index=None, candidate_index=None,
                       reduction='sum', normalize=False, temperature=1.0):
    """
    NCE alignment of modality m (anchors) to modality m' (candidates).

    The i-th anchor is paired with the i-th candidate; every other candidate of the batch is a negative:

        L = - sum_i log( exp(a_i . c_i) / sum_j exp(a_i . c_j) )

    Parameters
    ----------
    anchors, candidates : tensor
                        (J, D) embeddings, or (B, N, D) per-block embeddings flattened to J = B * N.
    anchor_index, candidate_index : list
                                  Optional (sample, block) labels of the rows; they must be identical.
    reduction : str
              'sum' (as in the formula) or 'mean'.
    normalize : bool
              L2-normalize the embeddings before the dot products.
    temperature : float
                Divides the dot products.
    """
    a, c = _flatten_embeddings(anchors), _flatten_embeddings(candidates)
    if a.shape != c.shape:
        raise ValueError("Anchor and candidate sets differ in shape: %s vs %s" % (tuple(a.shape), tuple(c.shape)))
    if (anchor_index is None) != (candidate_index is None) or \
            (anchor_index is not None and list(map(tuple, anchor_index)) != list(map(tuple, candidate_index))):
        raise ValueError("Anchor and candidate (sample, block) index sets do not match")
    if temperature <= 0:
        raise ValueError("Temperature must be positive, got %s" % temperature)
    if normalize:
        a, c = F.normalize(a, dim=-1), F.normalize(c, dim=-1)
    logits = a @ c.T / temperature
    target = torch.arange(a.shape[0], device=a.device)
    return F.cross_entropy(logits, target, reduction=reduction)


def multi_modal_alignment_loss(embeddings, pair_embedding=None, return_terms=False, **kwargs):
    """
    Sum of :func:`.alignment_nce_loss` over all ordered pairs (m, m'), m != m'.

    Parameters
    ----------
    embeddings : dict
               Modality -> (B, N, D) per-block embeddings.
    pair_embedding : callable
                   Optional `f(m, m')` returning the embeddings of m to use when aligning it with m'
                   (pair-specific attention pooling). The term (m, m') then uses f(m, m') as anchors
                   and f(m', m) as candidates.
    return_terms : bool
                 Also return the dict (m, m') -> term.
    kwargs
          Passed to :func:`.alignment_nce_loss`.
    """
    if len(embeddings) < 2:
        raise ValueError("Alignment needs at least two modalities, got %s" % list(embeddings))
    terms = {}
    for m, m2 in itertools.permutations(embeddings, 2):
        if pair_embedding is None:
            anchors, candidates = embeddings[m], embeddings[m2]
        else:
            anchors, candidates = pair_embedding(m, m2), pair_embedding(m2, m)
        terms[(m, m2)] = alignment_nce_loss(anchors, candidates, **kwargs)
    total = sum(terms.values())
    return (total, terms) if return_terms else total


def attention_pool(grid, logits, temperature=1.0):
    """
    Attention pooling of a context grid.

        p_ij = exp(alpha_ij / tau) / sum_ab exp(alpha_ab / tau),    c = sum_ij p_ij c_ij

    Parameters
    ----------
    grid : tensor
         (..., D, H', W') context grid.
    logits : tensor
           (..., H', W') attention logits alpha.
    temperature : float
                tau.

    Returns
    -------
    pooled : tensor
           (..., D)
    p : tensor
      (..., H', W') attention map summing to one.
    """
    if temperature <= 0:
        raise ValueError("Temperature must be positive, got %s" % temperature)
    if tuple(logits.shape) != tuple(grid.shape[:-3]) + tuple(grid.shape[-2:]):
        raise ValueError("Logits %s do not match grid %s" % (tuple(logits.shape), tuple(grid.shape)))
    H, W = logits.shape[-2:]
    p = torch.softmax(logits.reshape(tuple(logits.shape[:-2]) + (H * W,)) / temperature, dim=-1)
    pooled = torch.einsum('...dk,...k->...d', grid.reshape(tuple(grid.shape[:-2]) + (H * W,)), p)
    return pooled, p.reshape(logits.shape)


def activity_loss(logits, labels):
    return F.cross_entropy(logits, labels)


def atomic_loss(logits, targets):
    return F.binary_cross_entropy_with_logits(logits, targets)


def compositional_loss(activity, atomic, weight=10.0):
    """
    L_c = L_v + weight * L_a. With weight 0 training is activity-only.
    """
    if weight < 0:
        raise ValueError("The atomic loss weight must be >= 0, got %s" % weight)
    return activity + weight * atomic


def uncertainty_weighted_loss(activity, atomic, log_var_activity, log_var_atomic):
    """
    Multi-task weighting by learned task uncertainty, parametrized by log sigma^2:

        L_c = L_v / sigma_v^2 + L_a / sigma_a^2 + log(sigma_v sigma_a)
    """
    return activity * torch.exp(-log_var_activity) + atomic * torch.exp(-log_var_atomic) + \
        0.5 * (log_var_activity + log_var_atomic)


def soft_cross_entropy(student_logits, teacher_logits, temperature):
    """
    H(softmax(z_t / tau), softmax(z_s / tau)), averaged over the batch. The teacher is a constant target.
    """
    if student_logits.shape != teacher_logits.shape:
        raise ValueError("Student and teacher logits differ in shape: %s vs %s" % (tuple(student_logits.shape), tuple(teacher_logits.shape)))
    target = torch.softmax(teacher_logits.detach() / temperature, dim=-1)
    return -(target * torch.log_softmax(student_logits / temperature, dim=-1)).sum(dim=-1).mean()


def distillation_loss(student_logits, teacher_logits, labels, alpha=1.0, beta=0.1, temperature=2.5):
    """
    L_kd = alpha * H(y, softmax(z_s)) + beta * H(softmax(z_t / tau), softmax(z_s / tau))

    Parameters
    ----------
    student_logits : tensor
                   (B, C)
    teacher_logits : tensor or list
                   (B, C) teacher logits, or a list of them (one per teacher); the soft term is summed over teachers.
                   No gradient flows into the teachers.
    labels : tensor
           (B,) class indices.
    """
    if temperature <= 0:
        raise ValueError("KD temperature must be positive, got %s" % temperature)
    teachers = teacher_logits if isinstance(teacher_logits, (list, tuple)) else [teacher_logits]
    soft = sum(soft_cross_entropy(student_logits, t, temperature) for t in teachers)
    return alpha * F.cross_entropy(student_logits, labels) + beta * soft


def predictive_contrastive_loss(predicted, actual):
    """
    Dense NCE between predicted and actual future latents.

    Every predicted cell (sample, step, position) is scored against all actual cells of the batch by
    dot product; the positive is the actual latent at the same (sample, step, position).

    Parameters
    ----------
    predicted, actual : tensor
                      (B, S, H', W', D) predicted and actual grids of the S future blocks.
    """
    if predicted.shape != actual.shape:
        raise ValueError("Predictions %s and targets %s differ in shape" % (tuple(predicted.shape), tuple(actual.shape)))
    if predicted.dim() != 5 or predicted.shape[1] == 0:
        raise ValueError("Predictive loss needs (B, S, H', W', D) grids with S >= 1, got %s" % (tuple(predicted.shape),))
    p, a = _flatten_embeddings(predicted), _flatten_embeddings(actual)
    logits = p @ a.T
    return F.cross_entropy(logits, torch.arange(p.shape[0], device=p.device))
