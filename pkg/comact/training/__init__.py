"""
The trainer: builds the dataset view, the model and the regime of a run configuration and runs the
regime's phases, checkpointing into the run's :class:`comact.storage.datastore.RunDataStore`.

    train                 - run a configuration end to end
    TrainState            - the model, the step counter and the loss history of a run
    steps_to_threshold    - first step at which a (smoothed) loss curve drops below a threshold
"""

import time
import numpy
import torch
from parameters import ParameterSet
import comact
from comact.core import ConfigurationError
from comact.homage.dataset import ActivityDataset, SequenceDataset, make_loader, novel_classes, subset_classes
from comact.models import ModelConfig
from comact.training.regimes import build_regime
from comact.analysis.evaluation import Evaluation

logger = comact.getComactLogger()


class TrainState(object):
    """
    Parameters
    ----------
    model : CooperativeModel
    regime : Regime
    step : int
         Number of optimization steps taken over all phases.
    history : list
            One record per logged step: {step, phase, epoch, loss, <component>: value}.
    """

    def __init__(self, model, regime, vocabulary):
        self.model = model
        self.regime = regime
        self.vocabulary = vocabulary
        self.step = 0
        self.history = []

    def description(self):
        """
        What is needed to rebuild the model from a checkpoint.
        """
        return {'modalities': list(self.model.modalities), 'vocabulary': dict(self.vocabulary),
                'attention': bool(self.model.attention), 'attention_temperature': float(self.model.attention_temperature),
                'regime': self.regime.name}


def training_classes(parameters, n_activity):
    """
    The activity classes selected by `data.class_subset` (None stands for all of them).
    """
    if parameters.data.class_subset == 'all':
        return None
    fs = parameters.eval.fewshot
    novel = novel_classes(n_activity, fs.n_novel, fs.seed, fs.split_file)
    return subset_classes(parameters.data.class_subset, n_activity, novel)


def _make_optimizer(parameters, model):
    tp = parameters.train
    trainable = [t for t in model.parameters() if t.requires_grad]
    if tp.optimizer == 'adam':
        return torch.optim.Adam(trainable, lr=tp.lr, weight_decay=tp.weight_decay)
    if tp.optimizer == 'sgd':
        return torch.optim.SGD(trainable, lr=tp.lr, momentum=0.9, weight_decay=tp.weight_decay)
    raise ConfigurationError("Unknown optimizer %s, expected adam or sgd" % tp.optimizer)


def _make_schedule(parameters, optimizer, total_steps):
    schedule = parameters.train.schedule
    if schedule == 'cosine':
        return torch.optim.lr_scheduler.CosineAnnealingLR(optimizer, T_max=max(1, total_steps))
    if schedule == 'constant':
        return None
    raise ConfigurationError("Unknown schedule %s, expected cosine or constant" % schedule)


def run_phase(state, phase, loader, parameters, datastore=None):
    """
    Runs one phase with a fresh optimizer. Returns the mean loss of the last logged window.
    """
    tp = parameters.train
    steps_per_epoch = len(loader)
    if steps_per_epoch == 0:
        raise ConfigurationError("The training split is empty or smaller than one batch")
    total = phase.epochs * steps_per_epoch
    if phase.max_steps is not None:
        total = min(total, phase.max_steps) if phase.epochs else phase.max_steps
    optimizer = _make_optimizer(parameters, state.model)
    scheduler = _make_schedule(parameters, optimizer, total)

    logger.info("Phase %s: %d steps over %d batches per epoch" % (phase.name, total, steps_per_epoch))
    t1 = time.time()
    window = []
    step, epoch = 0, 0
    while step < total:
        loader.dataset.set_epoch(epoch)
        for batch in loader:
            if step >= total:
                break
            state.model.train()
            optimizer.zero_grad()
            loss, components = phase.objective(state.model, batch)
            if not torch.isfinite(loss):
                raise FloatingPointError("Non-finite loss %s at step %d of phase %s" % (loss.item(), state.step, phase.name))
            loss.backward()
            optimizer.step()
            if scheduler is not None:
                scheduler.step()
            step += 1
            state.step += 1
            window.append(loss.item())
            if step % tp.log_every == 0 or step == total:
                record = dict(components, step=state.step, phase=phase.name, epoch=epoch, loss=float(numpy.mean(window)))
                state.history.append(record)
                if datastore is not None:
                    datastore.append_history(record)
                logger.info("step %d (%s, epoch %d): loss %.4f %s" % (state.step, phase.name, epoch, record['loss'],
                                                                      ' '.join('%s %.4f' % (k, v) for k, v in sorted(components.items()))))
                window = []
        epoch += 1
    logger.info("Phase %s took %.1f seconds" % (phase.name, time.time() - t1))
    return state.history[-1]['loss'] if state.history else float('nan')


def train(parameters, datastore=None, dataset=None, evaluate=True):
    """
    Trains the regime of a run configuration.

    Parameters
    ----------
    parameters : ComactParameterSet
               The resolved run configuration.
    datastore : RunDataStore
              Receives the history, the checkpoint, the evaluation reports and the summary. If None the run
              is kept in memory.
    dataset : ActivityDataset
            An already parsed dataset (parsed from `data.path` otherwise).
    evaluate : bool
             Evaluate every trained modality on `eval.splits` after training.

    Returns
    -------
    TrainState
    """
    t1 = time.time()
    comact.setup_seeds(parameters.seed)
    dataset = dataset or ActivityDataset(parameters.data)
    regime = build_regime(parameters)
    dataset.check_modalities(regime.input_modalities)
    vocabulary = dict(dataset.vocabulary)
    classes = training_classes(parameters, vocabulary['n_activity'])

    model = ModelConfig(parameters.model).build(regime.model_modalities, vocabulary,
                                                attention=parameters.loss.attention,
                                                attention_temperature=parameters.loss.attention_temperature)
    regime.prepare(model)
    state = TrainState(model, regime, vocabulary)
    if datastore is not None:
        datastore.reset_history()

    train_view = SequenceDataset(dataset, dataset.sequences_of('train', classes), regime.input_modalities,
                                 train=True, seed=parameters.seed)
    loader = make_loader(train_view, parameters.train.batch_size, shuffle=True, seed=parameters.seed,
                         drop_last=len(train_view) > parameters.train.batch_size)
    logger.info("Training %s on %s with %d sequences" % (regime.name, regime.input_modalities, len(train_view)))

    final_loss = float('nan')
    for phase in regime.phases():
        final_loss = run_phase(state, phase, loader, parameters, datastore)

    if datastore is not None:
        datastore.save_checkpoint(model, state.description(), step=state.step)
    reports = []
    if evaluate:
        ep = parameters.eval
        evaluation = Evaluation(datastore, model, dataset, regime.name,
                                ParameterSet({'splits': list(ep.splits), 'batch_size': ep.batch_size}), classes)
        reports = evaluation.analyse()
    if datastore is not None:
        datastore.write_summary({'regime': regime.name, 'modalities': regime.model_modalities, 'steps': state.step,
                                 'final_loss': final_loss, 'wall_time': time.time() - t1,
                                 'metrics': [r.as_record() for r in reports]})
    state.reports = reports
    return state


def steps_to_threshold(history, threshold, key='loss', window=1, phase=None):
    """
    The first logged step whose moving average (over `window` records) of `key` drops below `threshold`,
    or None if the curve never does.

    Parameters
    ----------
    history : list
            Training history records.
    phase : str
          Only consider records of this phase.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    records = [r for r in history if (phase is None or r.get('phase') == phase) and key in r]
    values = [r[key] for r in records]
    for i in range(len(values)):
        if i + 1 < window:
            continue
        if numpy.mean(values[i + 1 - window:i + 1]) < threshold:
            return records[i]['step']
    return None
