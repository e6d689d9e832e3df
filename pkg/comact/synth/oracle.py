"""
The exact activity posterior of the synthetic generative process, the performance ceiling of any
model trained on the synthetic benchmark.

With a uniform activity prior the posterior of a sequence whose segments s were rendered as
classes o_{m,s} by the modalities m is

    P(c | o) ~ prod_s sum_a P(a | c) prod_m P(o_{m,s} | a)

    P(a | c)     = (1 - label_noise) [a in signature(c)] / atomic_per_activity + label_noise / n_atomic
    P(o | a)     = rho [o == a] + (1 - rho) / n_atomic
"""

import numpy
from scipy.special import logsumexp
from comact.synth.generator import activity_signatures


def atomic_given_activity(config):
    """
    The n_activity x n_atomic matrix P(a | c).
    """
    p = config.parameters
    P = numpy.full((p.n_activity, p.n_atomic), p.label_noise / p.n_atomic)
    for c, signature in enumerate(activity_signatures(config)):
        P[c, signature] += (1.0 - p.label_noise) / p.atomic_per_activity
    return P


def observation_given_atomic(config):
    """
    The n_atomic x n_atomic matrix P(o | a) of a single modality.
    """
    p = config.parameters
    rho = p.cross_modal_correlation
    return rho * numpy.eye(p.n_atomic) + (1.0 - rho) / p.n_atomic


def bayes_oracle(config, script, modalities=None):
    """
    Posterior over activity classes of one generated sequence.

    Parameters
    ----------
    config : SynthConfig
           The configuration the sequence was generated with.
    script : LatentScript
           The latent script of the sequence (see :func:`comact.synth.generator.load_latents`).
    modalities : list
               The modalities whose renderings are observed. Defaults to all rendered modalities.

    Returns
    -------
    ndarray
          n_activity vector summing to one.
    """
    p = config.parameters
    if script.fingerprint != config.fingerprint():
        raise ValueError("Sequence %s was not generated by this configuration" % script.sequence_id)
    modalities = list(script.rendered) if modalities is None else list(modalities)
    missing = [m for m in modalities if m not in script.rendered]
    if missing:
        raise ValueError("Sequence %s has no rendering for %s" % (script.sequence_id, missing))

    with numpy.errstate(divide='ignore'):
        log_pa = numpy.log(atomic_given_activity(config))
        log_po = numpy.log(observation_given_atomic(config))

    log_posterior = numpy.full(p.n_activity, -numpy.log(p.n_activity))
    for s in range(len(script.segments)):
        # log prod_m P(o_{m,s} | a) for every a
        evidence = numpy.sum([log_po[script.rendered[m][s], :] for m in modalities], axis=0) if modalities else numpy.zeros(p.n_atomic)
        log_posterior += logsumexp(log_pa + evidence[numpy.newaxis, :], axis=1)
    return numpy.exp(log_posterior - logsumexp(log_posterior))


def oracle_accuracy(config, scripts, modalities=None):
    """
    Top-1 accuracy of the Bayes decision over `scripts` (ties broken by lowest class index).
    """
    if len(scripts) == 0:
        raise ValueError("oracle_accuracy needs at least one sequence")
    hits = [numpy.argmax(bayes_oracle(config, s, modalities)) == s.activity_class for s in scripts]
    return float(numpy.mean(hits))
