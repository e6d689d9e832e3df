"""
The training regimes.

    SingleModality               SM     every modality optimizes its own compositional loss
    Cooperative                  CT     compositional losses of all modalities plus the cross-modal alignment loss
    StaticDistillation           SKD    a student learns from frozen, pre-trained teacher modalities
    CooperativeDistillation      CKD    every modality is the student of all the others within each step
    SelfSupervised               SS     predictive contrastive pre-training only
    SelfSupervisedThenSupervised SS+SV  SS pre-training followed by SM fine-tuning

A regime is configured by the `loss` and `train` sections of a run configuration. It names the
modalities the trained model holds, the modalities the data loader has to provide, and the list of
:class:`.Phase` objects the trainer runs; each phase carries the objective evaluated on a batch.
"""

import torch
from parameters import ParameterSet
import comact
from comact.core import ParametrizedObject, ConfigurationError
from comact.homage.schema import MODALITIES
from comact.losses import (activity_loss, atomic_loss, compositional_loss, uncertainty_weighted_loss,
                           multi_modal_alignment_loss, distillation_loss, predictive_contrastive_loss)

logger = comact.getComactLogger()

COMPOSITIONAL_MODES = ('activity_only', 'atomic_only', 'both_fixed', 'both_uncertainty')


class Phase(object):
    """
    One optimization phase: a fresh optimizer runs `objective` for `epochs` epochs (or `max_steps` steps).
    """

    def __init__(self, name, objective, epochs, max_steps=None):
        self.name = name
        self.objective = objective
        self.epochs = epochs
        self.max_steps = max_steps


def _inputs(batch, modalities):
    return {m: batch['inputs'][m] for m in modalities}


class Regime(ParametrizedObject):
    """
    The regime interface.

    Parameters
    ----------
    parameters : ParameterSet
               With the `loss` and `train` sections of the run configuration.

    Other parameters
    ----------------
    loss.mode : str
              Compositional loss: activity_only, atomic_only, both_fixed or both_uncertainty.
    loss.atomic_weight : float
                       lambda of both_fixed.
    loss.alignment : bool
                   Whether CT adds the alignment loss.
    train.modalities : list
                     The modalities of the run.
    train.per_block_atomic : bool
                           Add the per-block atomic-action loss to L_a.

    The remaining keys are documented in the default configuration file.
    """

    required_parameters = ParameterSet({
        'loss': ParameterSet({
            'mode': str,
            'atomic_weight': float,
            'alignment': bool,
            'alignment_weight': float,
            'alignment_reduction': str,
            'normalize': bool,
            'temperature': float,
            'attention': bool,
            'attention_temperature': float,
            'kd_alpha': float,
            'kd_beta': float,
            'kd_temperature': float,
        }),
        'train': ParameterSet({
            'regime': str,
            'modalities': list,
            'optimizer': str,
            'lr': float,
            'weight_decay': float,
            'schedule': str,
            'batch_size': int,
            'epochs': int,
            'max_steps': int,
            'log_every': int,
            'per_block_atomic': bool,
            'teacher_run': str,
            'teacher_modalities': list,
            'student_modality': str,
            'init_from': str,
            'pretrain_epochs': int,
            'pretrain_steps': int,
            'pred_observed': int,
            'pred_steps': int,
        }),
    })

    name = None
    min_modalities = 1

    def __init__(self, parameters):
        ParametrizedObject.__init__(self, parameters)
        tp, lp = self.parameters.train, self.parameters.loss
        mods = list(tp.modalities)
        if len(mods) < self.min_modalities:
            raise ConfigurationError("Regime %s needs at least %d modalities, got %s" % (self.name, self.min_modalities, mods))
        unknown = [m for m in mods if m not in MODALITIES]
        if unknown:
            raise ConfigurationError("Unknown modalities %s" % unknown)
        if len(set(mods)) != len(mods):
            raise ConfigurationError("Duplicate modalities in %s" % mods)
        if lp.mode not in COMPOSITIONAL_MODES:
            raise ConfigurationError("Unknown compositional mode %s, expected one of %s" % (lp.mode, COMPOSITIONAL_MODES))
        if lp.atomic_weight < 0:
            raise ConfigurationError("loss.atomic_weight must be >= 0")

    @property
    def model_modalities(self):
        """
        The modalities of the trained (and checkpointed) model.
        """
        return list(self.parameters.train.modalities)

    @property
    def input_modalities(self):
        """
        The modalities the data loader provides.
        """
        return self.model_modalities

    @property
    def attention(self):
        return self.parameters.loss.attention

    def prepare(self, model):
        """
        Called once with the freshly built model before the first phase.
        """
        pass

    def phases(self):
        tp = self.parameters.train
        return [Phase(self.name, self.objective, tp.epochs, tp.max_steps)]

    def objective(self, model, batch):
        """
        Returns (loss, components) for one batch; components maps names to detached float values.
        """
        raise NotImplementedError

    # shared loss terms

    def supervised_terms(self, output, batch):
        """
        L_v and L_a of one modality's forward output.
        """
        L_v = activity_loss(output['activity_logits'], batch['activity'])
        L_a = atomic_loss(output['atomic_logits'], batch['atomic'])
        if self.parameters.train.per_block_atomic:
            L_a = L_a + atomic_loss(output['block_atomic_logits'], batch['block_atomic'])
        return L_v, L_a

    def compositional(self, model, L_v, L_a):
        lp = self.parameters.loss
        if lp.mode == 'activity_only':
            return L_v
        if lp.mode == 'atomic_only':
            return L_a
        if lp.mode == 'both_fixed':
            return compositional_loss(L_v, L_a, lp.atomic_weight)
        return uncertainty_weighted_loss(L_v, L_a, model.log_var_activity, model.log_var_atomic)

    def atomic_term(self, L_a):
        """
        The atomic part kept next to a distillation loss.
        """
        mode = self.parameters.loss.mode
        if mode == 'activity_only':
            return L_a.new_zeros(())
        return L_a if mode == 'atomic_only' else self.parameters.loss.atomic_weight * L_a

    def supervised_objective(self, model, batch):
        outputs = model(_inputs(batch, self.model_modalities))
        total, components = 0.0, {}
        for m, output in outputs.items():
            L_v, L_a = self.supervised_terms(output, batch)
            L_c = self.compositional(model, L_v, L_a)
            total = total + L_c
            components['activity_%s' % m] = L_v.item()
            components['atomic_%s' % m] = L_a.item()
        return total, components, outputs


class SingleModality(Regime):
    """
    SM: the modalities are trained side by side without any cross-modal term.
    """

    name = 'SM'

    def objective(self, model, batch):
        total, components, _ = self.supervised_objective(model, batch)
        return total, components


class Cooperative(Regime):
    """
    CT: sum of the per-modality compositional losses plus the weighted alignment loss over all ordered
    modality pairs. With attention the video anchors are attention pooled per pair.
    """

    name = 'CT'
    min_modalities = 2

    def alignment(self, model, outputs):
        lp = self.parameters.loss
        embeddings = {m: o['context'] for m, o in outputs.items()}
        pair_embedding = None
        if model.attention:
            pair_embedding = lambda m, m2: model.alignment_embedding(outputs[m], m, m2)[0]
        return multi_modal_alignment_loss(embeddings, pair_embedding=pair_embedding,
                                          reduction=lp.alignment_reduction, normalize=lp.normalize,
                                          temperature=lp.temperature)

    def objective(self, model, batch):
        total, components, outputs = self.supervised_objective(model, batch)
        if self.parameters.loss.alignment:
            L_align = self.alignment(model, outputs)
            total = total + self.parameters.loss.alignment_weight * L_align
            components['align'] = L_align.item()
        return total, components


class StaticDistillation(Regime):
    """
    SKD: the student modality distills the activity logits of frozen teacher modalities loaded from a
    previous run; the soft term is summed over teachers. Teacher parameters receive no gradient.
    """

    name = 'SKD'
    min_modalities = 2

    def __init__(self, parameters):
        Regime.__init__(self, parameters)
        tp = self.parameters.train
        if tp.teacher_run is None:
            raise ConfigurationError("SKD needs train.teacher_run, the run directory of the pre-trained teachers")
        self.student = tp.student_modality or tp.modalities[0]
        if self.student not in tp.modalities:
            raise ConfigurationError("Student %s is not one of %s" % (self.student, list(tp.modalities)))
        self.teachers = list(tp.teacher_modalities) if tp.teacher_modalities else [m for m in tp.modalities if m != self.student]
        if self.student in self.teachers or not self.teachers:
            raise ConfigurationError("SKD needs teacher modalities distinct from the student %s, got %s" % (self.student, self.teachers))
        self.teacher_model = None

    @property
    def model_modalities(self):
        return [self.student]

    @property
    def input_modalities(self):
        return [self.student] + self.teachers

    def prepare(self, model):
        from comact.storage.datastore import open_run
        tp = self.parameters.train
        try:
            store = open_run(tp.teacher_run)
            self.teacher_model, _ = store.load_model(self.teachers)
        except FileNotFoundError as e:
            raise ConfigurationError("Missing teacher checkpoint for SKD: %s" % e)
        for t in self.teacher_model.parameters():
            t.requires_grad_(False)
        self.teacher_model.eval()
        logger.info("Loaded frozen teachers %s from %s" % (self.teachers, tp.teacher_run))

    def objective(self, model, batch):
        lp = self.parameters.loss
        output = model(_inputs(batch, [self.student]))[self.student]
        self.teacher_model.eval()
        with torch.no_grad():
            teacher_outputs = self.teacher_model(_inputs(batch, self.teachers))
        teacher_logits = [teacher_outputs[m]['activity_logits'] for m in self.teachers]
        L_kd = distillation_loss(output['activity_logits'], teacher_logits, batch['activity'],
                                 alpha=lp.kd_alpha, beta=lp.kd_beta, temperature=lp.kd_temperature)
        _, L_a = self.supervised_terms(output, batch)
        return L_kd + self.atomic_term(L_a), {'kd_%s' % self.student: L_kd.item(), 'atomic_%s' % self.student: L_a.item()}


class CooperativeDistillation(Regime):
    """
    CKD: within one step every modality is the student of all other modalities, whose logits of the
    same forward pass are detached and serve as teachers. One combined update follows.
    """

    name = 'CKD'
    min_modalities = 2

    def objective(self, model, batch):
        lp = self.parameters.loss
        outputs = model(_inputs(batch, self.model_modalities))
        snapshot = {m: o['activity_logits'].detach() for m, o in outputs.items()}
        total, components = 0.0, {}
        for m, output in outputs.items():
            teachers = [snapshot[t] for t in outputs if t != m]
            L_kd = distillation_loss(output['activity_logits'], teachers, batch['activity'],
                                     alpha=lp.kd_alpha, beta=lp.kd_beta, temperature=lp.kd_temperature)
            _, L_a = self.supervised_terms(output, batch)
            total = total + L_kd + self.atomic_term(L_a)
            components['kd_%s' % m] = L_kd.item()
            components['atomic_%s' % m] = L_a.item()
        return total, components


class SelfSupervised(Regime):
    """
    SS: every modality predicts the latents of `pred_steps` future blocks from the first `pred_observed`
    blocks; the predictions are scored by the dense predictive contrastive loss.
    """

    name = 'SS'

    def __init__(self, parameters):
        Regime.__init__(self, parameters)
        tp = self.parameters.train
        if tp.pred_observed < 1 or tp.pred_steps < 1:
            raise ConfigurationError("pred_observed and pred_steps must be positive")

    def check_blocks(self, n_blocks):
        tp = self.parameters.train
        if tp.pred_observed + tp.pred_steps > n_blocks:
            raise ConfigurationError("Predicting %d blocks from %d needs %d blocks per sequence, have %d"
                                     % (tp.pred_steps, tp.pred_observed, tp.pred_observed + tp.pred_steps, n_blocks))

    def predictive(self, model, batch):
        tp = self.parameters.train
        total, components = 0.0, {}
        for m in self.model_modalities:
            stack = model.stacks[m]
            z = stack.encode_blocks(batch['inputs'][m])
            self.check_blocks(z.shape[1])
            observed = z[:, :tp.pred_observed]
            actual = z[:, tp.pred_observed:tp.pred_observed + tp.pred_steps]
            predicted = torch.stack(stack.rollout_predictions(observed, tp.pred_steps), dim=1)
            L = predictive_contrastive_loss(predicted, actual)
            total = total + L
            components['predictive_%s' % m] = L.item()
        return total, components

    def objective(self, model, batch):
        return self.predictive(model, batch)

    def phases(self):
        tp = self.parameters.train
        return [Phase('SS', self.predictive, tp.pretrain_epochs, tp.pretrain_steps)]


class SelfSupervisedThenSupervised(SelfSupervised):
    """
    SS+SV: predictive pre-training, then single-modality supervised fine-tuning with a fresh optimizer.
    No cross-modal term enters the supervised phase. With `train.init_from` the pre-training phase is
    replaced by loading the encoders of that run.
    """

    name = 'SS+SV'

    def prepare(self, model):
        from comact.storage.datastore import open_run
        init_from = self.parameters.train.init_from
        if init_from is None:
            return
        pretrained, _ = open_run(init_from).load_model(self.model_modalities)
        state = {k: v for k, v in pretrained.state_dict().items() if k.startswith('stacks.')}
        model.load_state_dict(state, strict=False)
        logger.info("Initialized %s from %s" % (self.model_modalities, init_from))

    def supervised(self, model, batch):
        total, components, _ = self.supervised_objective(model, batch)
        return total, components

    def objective(self, model, batch):
        return self.supervised(model, batch)

    def phases(self):
        tp = self.parameters.train
        phases = [] if tp.init_from is not None else SelfSupervised.phases(self)
        return phases + [Phase('SV', self.supervised, tp.epochs, tp.max_steps)]


REGIMES = {cls.name: cls for cls in (SingleModality, Cooperative, StaticDistillation, CooperativeDistillation,
                                     SelfSupervised, SelfSupervisedThenSupervised)}


def build_regime(parameters):
    """
    The regime named by `train.regime`, configured from the `loss` and `train` sections of `parameters`.
    """
    name = parameters.train.regime
    if name not in REGIMES:
        raise ConfigurationError("Unknown regime %s, expected one of %s" % (name, sorted(REGIMES)))
    return REGIMES[name](ParameterSet({'loss': parameters.loss.as_dict(), 'train': parameters.train.as_dict()}))
