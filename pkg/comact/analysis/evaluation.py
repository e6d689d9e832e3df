"""
Single-modality evaluation of trained encoder stacks.

Inference uses only the evaluated modality: the data view is created for that modality alone, so
no other modality's files are read.
"""

import time
import numpy
import torch
from parameters import ParameterSet
import comact
from comact.core import ParametrizedObject, ConfigurationError
from comact.homage.dataset import SequenceDataset, make_loader
from comact.analysis.metrics import topk_accuracy, average_precisions, support_weighted_map
from comact.analysis.data_structures import MetricReport

logger = comact.getComactLogger()


def extract_outputs(model, dataset, modality, sequences, batch_size=16):
    """
    Runs one modality's encoder stack over `sequences` in eval mode.

    Returns
    -------
    dict
        features (n x D final contexts c_N), activity_logits, atomic_logits, activity (labels),
        atomic (multi-hot targets), as numpy arrays in sequence order.
    """
    if modality not in model.stacks:
        raise ConfigurationError("The model has no encoder for modality %s (has %s)" % (modality, model.modalities))
    if len(sequences) == 0:
        raise ValueError("No sequences to run %s on" % modality)
    view = SequenceDataset(dataset, sequences, [modality], train=False)
    collected = {'features': [], 'activity_logits': [], 'atomic_logits': [], 'activity': [], 'atomic': []}
    model.eval()
    with torch.no_grad():
        for batch in make_loader(view, batch_size):
            output = model({modality: batch['inputs'][modality]})[modality]
            collected['features'].append(output['context'][:, -1].numpy())
            collected['activity_logits'].append(output['activity_logits'].numpy())
            collected['atomic_logits'].append(output['atomic_logits'].numpy())
            collected['activity'].append(batch['activity'].numpy())
            collected['atomic'].append(batch['atomic'].numpy())
    return {k: numpy.concatenate(v) for k, v in collected.items()}


def evaluate_single_modality(model, dataset, modality, split, regime=None, batch_size=16, classes=None):
    """
    Top-1 and top-3 activity accuracy and support weighted atomic-action mAP of one modality.

    Parameters
    ----------
    model : CooperativeModel
    dataset : ActivityDataset
    modality : str
    split : str
          train, test1 or test2.
    regime : str
           Recorded in the report.
    classes : list
            Restrict the evaluation to sequences of these activity classes.

    Returns
    -------
    MetricReport
    """
    outputs = extract_outputs(model, dataset, modality, dataset.sequences_of(split, classes), batch_size)
    scores, labels = outputs['activity_logits'], outputs['activity']
    atomic_scores = 1.0 / (1.0 + numpy.exp(-outputs['atomic_logits']))
    per_class_ap, mAP = None, None
    if outputs['atomic'].sum() > 0:
        per_class_ap, _ = average_precisions(atomic_scores, outputs['atomic'])
        mAP = support_weighted_map(atomic_scores, outputs['atomic'])
    report = MetricReport(topk_accuracy(scores, labels, 1), topk_accuracy(scores, labels, min(3, scores.shape[1])),
                          mAP, len(labels), per_class_ap=per_class_ap,
                          analysis_algorithm='evaluate_single_modality', regime=regime, modality=modality, split=split)
    logger.info("%s %s %s: acc1 %.4f acc3 %.4f mAP %s (n=%d)" % (regime, modality, split, report.acc1, report.acc3,
                                                                  'n/a' if mAP is None else '%.4f' % mAP, report.n))
    return report


class Evaluation(ParametrizedObject):
    """
    Evaluates every modality of a run's model on the configured splits and stores the reports in the
    run's data store.

    Parameters
    ----------
    datastore : RunDataStore
              None keeps the reports in memory only.
    model : CooperativeModel
    dataset : ActivityDataset
    regime : str
    parameters : ParameterSet
               The `eval` configuration section.

    Other parameters
    ----------------
    splits : list
           The splits to evaluate.
    batch_size : int
    """

    required_parameters = ParameterSet({
        'splits': list,
        'batch_size': int,
    })

    def __init__(self, datastore, model, dataset, regime, parameters, classes=None):
        ParametrizedObject.__init__(self, parameters)
        self.datastore = datastore
        self.model = model
        self.dataset = dataset
        self.regime = regime
        self.classes = classes

    def analyse(self, modalities=None, splits=None):
        t1 = time.time()
        reports = []
        for m in (modalities or self.model.modalities):
            for split in (splits or self.parameters.splits):
                if not self.dataset.sequences_of(split, self.classes):
                    logger.warning("Split %s is empty, skipping its evaluation" % split)
                    continue
                report = evaluate_single_modality(self.model, self.dataset, m, split, self.regime,
                                                  self.parameters.batch_size, self.classes)
                if self.datastore is not None:
                    self.datastore.add_analysis_result(report)
                reports.append(report)
        if self.datastore is not None:
            self.datastore.save()
        logger.info("Evaluation took %.1f seconds" % (time.time() - t1))
        return reports
