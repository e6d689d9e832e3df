"""
This module contains the definition of the AnalysisDataStructure API and the result structures
produced by evaluation and the few-shot protocol.

The parameters of an analysis data structure are its identity (which run, regime, modality and split
the result belongs to); the measured values are plain attributes. Storing a structure whose parameters
equal those of a stored one replaces it, which keeps repeated evaluation idempotent.
"""

import numpy
import comact
from comact.tools.comact_parametrized import ComactParametrized, SInteger, SString

logger = comact.getComactLogger()


class AnalysisDataStructure(ComactParametrized):
    """
    Encapsulates data that a certain analysis generates.

    The parameters common to all AnalysisDataStructure classes are `identifier`, `analysis_algorithm`,
    `regime`, `modality` and `split`.
    """

    identifier = SString(doc="The identifier of the analysis data structure")
    analysis_algorithm = SString(doc="The analysis that produced the data structure")
    regime = SString(doc="The training regime of the evaluated run")
    modality = SString(doc="The modality whose encoder was evaluated")
    split = SString(doc="The evaluated split")

    def __init__(self, tags=None, **params):
        ComactParametrized.__init__(self, **params)
        self.tags = tags or []


class MetricReport(AnalysisDataStructure):
    """
    Activity accuracies and atomic-action mAP of one modality on one split.

    Parameters
    ----------
    acc1, acc3 : float
               Top-1 and top-3 activity accuracy.
    map : float
        Support weighted atomic-action mAP (None if the split has no atomic labels).
    n : int
      Number of evaluated sequences.
    per_class_ap : list
                 Per atomic class AP (None for classes without support).
    """

    def __init__(self, acc1, acc3, map, n, per_class_ap=None, **params):
        AnalysisDataStructure.__init__(self, identifier='MetricReport', **params)
        for name, value in (('acc1', acc1), ('acc3', acc3)):
            if not 0.0 <= value <= 1.0:
                raise ValueError("%s=%s outside [0, 1]" % (name, value))
        self.acc1 = float(acc1)
        self.acc3 = float(acc3)
        self.map = None if map is None else float(map)
        self.n = int(n)
        self.per_class_ap = None if per_class_ap is None else \
            [None if numpy.isnan(a) else float(a) for a in per_class_ap]

    def as_record(self):
        """
        The metrics.jsonl record.
        """
        return {'regime': self.regime, 'modality': self.modality, 'split': self.split,
                'acc1': self.acc1, 'acc3': self.acc3, 'map': self.map, 'n': self.n}


class FewShotResult(AnalysisDataStructure):
    """
    Result of fitting a linear head on `k` examples per novel class on frozen features, averaged over
    the test splits (`split` is 'mean').

    Parameters
    ----------
    map : float
        Atomic-action mAP over the novel-class sequences.
    acc1 : float
         Novel-class activity accuracy.
    shortfall : dict
              Novel class -> number of missing examples (classes with fewer than `k` training sequences).
    per_split : dict
              Split -> {'map', 'acc1', 'n'}.
    """

    k = SInteger(doc="Number of training examples per novel class")

    def __init__(self, map, acc1, shortfall=None, per_split=None, **params):
        AnalysisDataStructure.__init__(self, identifier='FewShotResult', **params)
        self.map = None if map is None else float(map)
        self.acc1 = float(acc1)
        self.shortfall = dict(shortfall or {})
        self.per_split = dict(per_split or {})

    def as_record(self):
        return {'regime': self.regime, 'modality': self.modality, 'k': self.k, 'map': self.map,
                'acc1': self.acc1, 'shortfall': {str(c): v for c, v in sorted(self.shortfall.items())},
                'per_split': self.per_split}
