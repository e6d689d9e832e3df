"""
Activity classification from ground-truth scene graphs: an MLP over the sequence level object x
relationship incidence vector M of every sequence.
"""

import numpy
import torch
from torch import nn
from parameters import ParameterSet
import comact
from comact.core import ParametrizedObject, ConfigurationError
from comact.homage.preprocessing import encode_scene_graph_matrix
from comact.analysis.metrics import topk_accuracy

logger = comact.getComactLogger()


class SceneGraphOracle(ParametrizedObject):
    """
    Other parameters
    ----------------
    hidden : int
           Hidden width of the MLP.
    epochs : int
           Full-batch training epochs.
    lr : float
    """

    required_parameters = ParameterSet({
        'hidden': int,
        'epochs': int,
        'lr': float,
    })

    def __init__(self, parameters, n_obj, n_rel, n_activity):
        ParametrizedObject.__init__(self, parameters)
        self.n_obj, self.n_rel, self.n_activity = n_obj, n_rel, n_activity
        self.classifier = nn.Sequential(nn.Linear(n_obj * n_rel, self.parameters.hidden), nn.ReLU(inplace=True),
                                        nn.Linear(self.parameters.hidden, n_activity))

    def encode(self, sequences):
        """
        One M vector per sequence; a sequence without scene graphs is the zero vector.
        """
        return torch.from_numpy(numpy.stack([encode_scene_graph_matrix(s.scene_graphs or [], self.n_obj, self.n_rel)
                                             for s in sequences]))

    def fit(self, sequences):
        x = self.encode(sequences)
        y = torch.tensor([s.activity_class for s in sequences])
        optimizer = torch.optim.Adam(self.classifier.parameters(), lr=self.parameters.lr)
        self.classifier.train()
        for _ in range(self.parameters.epochs):
            optimizer.zero_grad()
            loss = nn.functional.cross_entropy(self.classifier(x), y)
            loss.backward()
            optimizer.step()
        logger.info("Scene graph oracle fitted on %d sequences, final loss %.4f" % (len(sequences), loss.item()))
        return loss.item()

    def scores(self, sequences):
        self.classifier.eval()
        with torch.no_grad():
            return self.classifier(self.encode(sequences)).numpy()

    def accuracy(self, sequences):
        """
        (Acc1, Acc3) of the fitted classifier.
        """
        scores = self.scores(sequences)
        labels = numpy.array([s.activity_class for s in sequences])
        return topk_accuracy(scores, labels, 1), topk_accuracy(scores, labels, min(3, self.n_activity))


def train_scene_graph_oracle(dataset, parameters, splits=('test1', 'test2'), seed=513):
    """
    Fits the oracle on the train split of `dataset` and reports Acc1/Acc3 on `splits`.

    Parameters
    ----------
    dataset : ActivityDataset
    parameters : ParameterSet
               The `eval.oracle` configuration section.

    Returns
    -------
    oracle : SceneGraphOracle
    accuracies : dict
               split -> {'acc1', 'acc3', 'n'}.
    """
    vocab = dataset.vocabulary
    train = dataset.sequences_of('train')
    if not any(s.scene_graphs for s in train):
        raise ConfigurationError("The dataset has no scene graph annotations")
    if vocab['n_obj'] is None or vocab['n_rel'] is None:
        raise ConfigurationError("The vocabulary lacks n_obj and n_rel")
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        oracle = SceneGraphOracle(parameters, vocab['n_obj'], vocab['n_rel'], vocab['n_activity'])
        oracle.fit(train)
    accuracies = {}
    for split in splits:
        sequences = dataset.sequences_of(split)
        if sequences:
            acc1, acc3 = oracle.accuracy(sequences)
            accuracies[split] = {'acc1': acc1, 'acc3': acc3, 'n': len(sequences)}
            logger.info("Scene graph oracle on %s: acc1 %.4f acc3 %.4f" % (split, acc1, acc3))
    return oracle, accuracies
