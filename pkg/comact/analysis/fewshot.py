"""
The few-shot protocol: the encoder of a run trained on base classes stays frozen; linear heads are
fitted on the final contexts c_N of `k` training sequences per novel class and evaluated on all
novel-class sequences of both test splits.
"""

import time
import numpy
import torch
from torch import nn
from parameters import ParameterSet
import comact
from comact.core import ParametrizedObject, ConfigurationError
from comact.homage.dataset import novel_classes
from comact.analysis.evaluation import extract_outputs
from comact.analysis.metrics import topk_accuracy, support_weighted_map
from comact.analysis.data_structures import FewShotResult

logger = comact.getComactLogger()


def select_shots(sequences, classes, k, seed):
    """
    Up to `k` training sequences per class, a pure function of (the sequence ids, k, seed).

    Returns
    -------
    selected : list
    shortfall : dict
              class -> number of missing sequences, for classes with fewer than `k` sequences.
    """
    if k < 1:
        raise ConfigurationError("k must be >= 1, got %d" % k)
    selected, shortfall = [], {}
    for c in classes:
        members = sorted((s for s in sequences if s.activity_class == c), key=lambda s: s.sequence_id)
        if len(members) <= k:
            if len(members) < k:
                shortfall[c] = k - len(members)
            selected += members
            continue
        rng = numpy.random.default_rng(numpy.random.SeedSequence([seed, k, c]))
        chosen = sorted(rng.choice(len(members), size=k, replace=False))
        selected += [members[i] for i in chosen]
    return selected, shortfall


class LinearProbe(object):
    """
    Linear activity (over the novel classes) and atomic-action heads on frozen features, trained full batch.
    """

    def __init__(self, feature_dim, n_classes, n_atomic, lr=0.01, epochs=200, weight_decay=0.0, seed=7):
        with torch.random.fork_rng():
            torch.manual_seed(seed)
            self.activity = nn.Linear(feature_dim, n_classes)
            self.atomic = nn.Linear(feature_dim, n_atomic)
        self.lr = lr
        self.epochs = epochs
        self.weight_decay = weight_decay

    def fit(self, features, labels, atomic):
        x = torch.as_tensor(features, dtype=torch.float32)
        y = torch.as_tensor(labels, dtype=torch.int64)
        a = torch.as_tensor(atomic, dtype=torch.float32)
        params = list(self.activity.parameters()) + list(self.atomic.parameters())
        optimizer = torch.optim.Adam(params, lr=self.lr, weight_decay=self.weight_decay)
        for _ in range(self.epochs):
            optimizer.zero_grad()
            loss = nn.functional.cross_entropy(self.activity(x), y) + \
                nn.functional.binary_cross_entropy_with_logits(self.atomic(x), a)
            loss.backward()
            optimizer.step()
        return loss.item()

    def predict(self, features):
        x = torch.as_tensor(features, dtype=torch.float32)
        with torch.no_grad():
            return self.activity(x).numpy(), torch.sigmoid(self.atomic(x)).numpy()


class FewShotProtocol(ParametrizedObject):
    """
    Parameters
    ----------
    datastore : RunDataStore
              Receives the :class:`.FewShotResult` objects (None keeps them in memory only).
    model : CooperativeModel
          The frozen backbone.
    dataset : ActivityDataset
    regime : str

    Other parameters
    ----------------
    n_novel : int
            Number of novel classes.
    shots : list
          The values of k.
    seed : int
         Seeds the novel class selection, the shot selection and the head initialisation.
    lr : float
    epochs : int
    split_file : str
               A JSON file {"novel": [...]} fixing the novel classes.
    """

    required_parameters = ParameterSet({
        'n_novel': int,
        'shots': list,
        'seed': int,
        'lr': float,
        'epochs': int,
        'split_file': str,
    })

    def __init__(self, datastore, model, dataset, regime, parameters, batch_size=16):
        ParametrizedObject.__init__(self, parameters)
        self.datastore = datastore
        self.model = model
        self.dataset = dataset
        self.regime = regime
        self.batch_size = batch_size
        p = self.parameters
        self.novel = novel_classes(dataset.vocabulary['n_activity'], p.n_novel, p.seed, p.split_file)

    def analyse(self, modality):
        t1 = time.time()
        p = self.parameters
        train = self.dataset.sequences_of('train', self.novel)
        if not train:
            raise ValueError("The train split has no sequence of the novel classes %s" % self.novel)
        tests = {split: self.dataset.sequences_of(split, self.novel) for split in ('test1', 'test2')}
        tests = {split: seqs for split, seqs in tests.items() if seqs}
        if not tests:
            raise ValueError("No test sequence of the novel classes %s" % self.novel)

        train_out = extract_outputs(self.model, self.dataset, modality, train, self.batch_size)
        test_out = {split: extract_outputs(self.model, self.dataset, modality, seqs, self.batch_size)
                    for split, seqs in tests.items()}
        index = {s.sequence_id: i for i, s in enumerate(train)}
        relabel = {c: i for i, c in enumerate(self.novel)}

        results = []
        for k in p.shots:
            selected, shortfall = select_shots(train, self.novel, k, p.seed)
            rows = [index[s.sequence_id] for s in selected]
            probe = LinearProbe(train_out['features'].shape[1], len(self.novel), train_out['atomic'].shape[1],
                                lr=p.lr, epochs=p.epochs, seed=p.seed)
            probe.fit(train_out['features'][rows], [relabel[c] for c in train_out['activity'][rows]],
                      train_out['atomic'][rows])

            per_split = {}
            for split, out in test_out.items():
                scores, atomic_scores = probe.predict(out['features'])
                labels = numpy.array([relabel[c] for c in out['activity']])
                mAP = support_weighted_map(atomic_scores, out['atomic']) if out['atomic'].sum() > 0 else None
                per_split[split] = {'map': mAP, 'acc1': topk_accuracy(scores, labels, 1), 'n': len(labels)}
            maps = [v['map'] for v in per_split.values() if v['map'] is not None]
            result = FewShotResult(float(numpy.mean(maps)) if maps else None,
                                   float(numpy.mean([v['acc1'] for v in per_split.values()])),
                                   shortfall=shortfall, per_split=per_split, k=k,
                                   analysis_algorithm='few_shot_protocol', regime=self.regime,
                                   modality=modality, split='mean')
            if shortfall:
                logger.warning("k=%d: classes %s have fewer training sequences than k" % (k, sorted(shortfall)))
            logger.info("%s %s k=%d: mAP %s acc1 %.4f" % (self.regime, modality, k,
                                                         'n/a' if result.map is None else '%.4f' % result.map, result.acc1))
            if self.datastore is not None:
                self.datastore.add_analysis_result(result)
            results.append(result)
        if self.datastore is not None:
            self.datastore.save()
        logger.info("Few-shot protocol took %.1f seconds" % (time.time() - t1))
        return results


def few_shot_protocol(model, dataset, modality, parameters, regime=None, datastore=None, batch_size=16):
    """
    Runs :class:`.FewShotProtocol` for one modality; returns the list of :class:`.FewShotResult`, one per k.
    """
    return FewShotProtocol(datastore, model, dataset, regime, parameters, batch_size).analyse(modality)
