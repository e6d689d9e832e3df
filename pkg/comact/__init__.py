"""
The role of comact is to coordinate the workings of a number of tools (torch, the parameters
package, param, scikit-learn) into one consistent workflow for cooperative, compositional
training of multi-modal action recognition encoders. Consequently the root comact package is
very light, and the majority of functionality is in the subpackages each addressing a different
part of the workflow:

    homage        - the dataset data model, annotation ingestion and preprocessing
    synth         - the synthetic multi-modal benchmark and its Bayes oracle
    models        - per-modality encoder stacks (block encoder, aggregator, heads)
    losses        - every training objective
    training      - the training regimes (SM, CT, SKD, CKD, SS, SS+SV)
    analysis      - metrics, few-shot protocol and exports
    storage       - the run directory data store
    visualization - plots of embeddings and attention maps

This module exposes the following global to the rest of comact:

Parameters
----------
    torch_seed : int
        The seed handed to torch when :func:`.setup_seeds` was last called.
"""
__version__ = "0.1.0"
import logging
import numpy.random

torch_seed = None


def setup_seeds(seed=513):
    """
    Seeds numpy's and torch's global random number generators.

    Notes
    -----
    Code that needs its own stream (data views, the synthetic generator, few-shot heads)
    derives it from the run seed with a `numpy.random.SeedSequence`, so runs stay repeatable
    regardless of how many numbers the global generators were asked for.
    """
    global torch_seed
    import torch

    numpy.random.seed(seed)
    torch_seed = seed
    torch.manual_seed(seed)


def getComactLogger():
    """
    To maintain consistent logging settings around comact use this method to obtain the logger instance.
    """
    logger = logging.getLogger("Comact")
    logger.setLevel(logging.INFO)
    return logger
