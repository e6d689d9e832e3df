"""
This module contains the per-modality encoder stacks and the cooperative model holding one stack
per modality.

Each modality is processed by an :class:`.EncoderStack`:

    blocks x_j --f--> z_j (H' x W' x D) --g--> context grid c_j --Pool--> c_j (D) --heads--> logits
                                                        \\--phi--> predicted z_{j+1}

Tensors crossing the public methods use the (B, N, H', W', D) layout for grids and (B, N, D) for
pooled contexts; a single sequence is a batch of one.
"""

import torch
from torch import nn
from parameters import ParameterSet
import comact
from comact.core import ParametrizedObject, ConfigurationError
from comact.homage.schema import VIDEO_MODALITIES, MODALITIES
from comact.models.encoders import build_block_encoder
from comact.models.aggregators import ConvGRU, StackedMaxPool, Predictor
from comact.losses import attention_pool

logger = comact.getComactLogger()


def to_channels_last(grid):
    return grid.permute(0, 1, 3, 4, 2)


def to_channels_first(grid):
    return grid.permute(0, 1, 4, 2, 3)


class EncoderStack(nn.Module):
    """
    The feature pipeline of one modality.

    Parameters
    ----------
    modality : str
    encoder : nn.Module
            The block encoder f, mapping (B, N, ...) blocks to (B, N, D, H', W').
    feature_dim : int
                D.
    grid_size : int
              H' = W'.
    n_activity, n_atomic : int
                         Output sizes of the classifier heads.
    hidden_dropout : float
                   Dropout on the aggregator hidden state.
    head_dropout : float
                 Dropout in front of the classifier heads.
    predictor_hidden : int
                     Hidden width of phi.
    """

    def __init__(self, modality, encoder, feature_dim, grid_size, n_activity, n_atomic,
                 hidden_dropout=0.1, head_dropout=0.5, predictor_hidden=None):
        super(EncoderStack, self).__init__()
        self.modality = modality
        self.feature_dim = feature_dim
        self.grid_size = grid_size
        self.encoder = encoder
        self.aggregator = ConvGRU(feature_dim, kernel_size=1, hidden_dropout=hidden_dropout)
        self.pool = StackedMaxPool(grid_size)
        self.predictor = Predictor(feature_dim, grid_size, predictor_hidden)
        self.activity_head = nn.Sequential(nn.Dropout(p=head_dropout), nn.Linear(feature_dim, n_activity))
        self.atomic_head = nn.Sequential(nn.Dropout(p=head_dropout), nn.Linear(feature_dim, n_atomic))

    def _check_grid(self, grid):
        if grid.dim() != 5 or tuple(grid.shape[2:]) != (self.grid_size, self.grid_size, self.feature_dim):
            raise ValueError("Expected a (B, N, %d, %d, %d) grid, got %s" % (self.grid_size, self.grid_size, self.feature_dim, tuple(grid.shape)))

    def encode_blocks(self, blocks):
        """
        blocks : (B, N, ...) modality blocks -> z : (B, N, H', W', D)
        """
        return to_channels_last(self.encoder(blocks))

    def aggregate(self, z):
        """
        Causal aggregation c_j = g(z_1, ..., z_j).

        Parameters
        ----------
        z : tensor
          (B, N, H', W', D) block features.

        Returns
        -------
        context_grid : tensor
                     (B, N, H', W', D) hidden grids of the aggregator.
        context : tensor
                (B, N, D) pooled contexts.
        """
        self._check_grid(z)
        grid, _ = self.aggregator(to_channels_first(z))
        return to_channels_last(grid), self.pool(grid)

    def rollout_predictions(self, z, steps):
        """
        Predicts the latents of `steps` future blocks from the observed blocks `z` (B, n, H', W', D).
        Every prediction is fed back through the aggregator before the next one is made.

        Returns
        -------
        list
           `steps` tensors of shape (B, H', W', D).
        """
        if steps < 0:
            raise ValueError("steps must be >= 0, got %d" % steps)
        self._check_grid(z)
        _, hidden = self.aggregator(to_channels_first(z))
        predictions = []
        for _ in range(steps):
            z_next = self.predictor(self.pool(hidden))
            predictions.append(z_next.permute(0, 2, 3, 1))
            hidden = self.aggregator.step(z_next, hidden)
        return predictions

    def classify(self, context):
        """
        context : (B, N, D) -> activity logits (B, n_activity) and atomic logits (B, n_atomic) from c_N,
        plus per-block atomic logits (B, N, n_atomic).
        """
        last = context[:, -1]
        return self.activity_head(last), self.atomic_head(last), self.atomic_head(context)

    def forward(self, blocks):
        z = self.encode_blocks(blocks)
        context_grid, context = self.aggregate(z)
        activity, atomic, block_atomic = self.classify(context)
        return {'z': z, 'context_grid': context_grid, 'context': context,
                'activity_logits': activity, 'atomic_logits': atomic, 'block_atomic_logits': block_atomic}


class CooperativeModel(nn.Module):
    """
    One :class:`.EncoderStack` per modality, the attention heads used by the alignment branch and the
    learned log-variances of the uncertainty weighted compositional loss.

    Attention heads exist for every ordered modality pair (m, m') whose anchor m is a video modality.
    They are initialised to zero so that untrained attention maps are uniform.
    """

    def __init__(self, stacks, attention=False, attention_temperature=1.0):
        super(CooperativeModel, self).__init__()
        if attention_temperature <= 0:
            raise ValueError("Attention temperature must be positive, got %s" % attention_temperature)
        self.stacks = nn.ModuleDict(stacks)
        self.attention = attention
        self.attention_temperature = attention_temperature
        self.attention_heads = nn.ModuleDict()
        if attention:
            for m in self.modalities:
                if m not in VIDEO_MODALITIES:
                    continue
                for m2 in self.modalities:
                    if m2 != m:
                        head = nn.Conv2d(stacks[m].feature_dim, 1, kernel_size=1)
                        nn.init.zeros_(head.weight)
                        nn.init.zeros_(head.bias)
                        self.attention_heads[pair_key(m, m2)] = head
        self.log_var_activity = nn.Parameter(torch.zeros(()))
        self.log_var_atomic = nn.Parameter(torch.zeros(()))

    @property
    def modalities(self):
        return list(self.stacks.keys())

    def forward(self, inputs):
        """
        inputs : dict modality -> blocks. Only the modalities present in `inputs` are run.
        """
        unknown = [m for m in inputs if m not in self.stacks]
        if unknown:
            raise ValueError("Model has no encoder for %s" % unknown)
        return {m: self.stacks[m](x) for m, x in inputs.items()}

    def attention_logits(self, context_grid, m, m2):
        """
        Attention logits (B, N, H', W') of pair (m, m') over the context grid (B, N, H', W', D) of m.
        """
        B, N = context_grid.shape[:2]
        flat = context_grid.reshape((B * N,) + tuple(context_grid.shape[2:])).permute(0, 3, 1, 2)
        return self.attention_heads[pair_key(m, m2)](flat).reshape(B, N, context_grid.shape[2], context_grid.shape[3])

    def alignment_embedding(self, output, m, m2):
        """
        The per-block embeddings (B, N, D) of modality m used to align it with m'. With attention enabled
        (and m a video modality) the context grid is attention pooled, otherwise the max-pooled context is used.

        Returns
        -------
        embedding : tensor
        p : tensor or None
          (B, N, H', W') attention maps.
        """
        if self.attention and pair_key(m, m2) in self.attention_heads:
            grid = output['context_grid']
            logits = self.attention_logits(grid, m, m2)
            return attention_pool(grid.permute(0, 1, 4, 2, 3), logits, self.attention_temperature)
        return output['context'], None


def pair_key(m, m2):
    return '%s__%s' % (m, m2)


class ModelConfig(ParametrizedObject):
    """
    Builds cooperative models from the `model` section of a run configuration.

    Other parameters
    ----------------
    grid_size : int
              H' = W' of the block feature grids.
    feature_dim : int
                D.
    hidden_dropout : float
                   Dropout on the aggregator hidden state.
    head_dropout : float
                 Dropout in front of the classifier heads.
    predictor_hidden : int
                     Hidden width of the predictive head.
    presets : ParameterSet
            Encoder preset name per modality (see :data:`comact.models.encoders.PRESETS`).
    """

    required_parameters = ParameterSet({
        'grid_size': int,
        'feature_dim': int,
        'hidden_dropout': float,
        'head_dropout': float,
        'predictor_hidden': int,
        'presets': ParameterSet,
    })

    def build_stack(self, modality, n_activity, n_atomic, scene_graph_dim=None):
        p = self.parameters
        if modality not in MODALITIES:
            raise ConfigurationError("Unknown modality %s" % modality)
        if modality not in p.presets:
            raise ConfigurationError("No encoder preset configured for modality %s" % modality)
        encoder = build_block_encoder(p.presets[modality], p.feature_dim, p.grid_size, scene_graph_dim)
        return EncoderStack(modality, encoder, p.feature_dim, p.grid_size, n_activity, n_atomic,
                            hidden_dropout=p.hidden_dropout, head_dropout=p.head_dropout,
                            predictor_hidden=p.predictor_hidden)

    def build(self, modalities, vocabulary, attention=False, attention_temperature=1.0):
        """
        Parameters
        ----------
        modalities : list
        vocabulary : dict
                   n_activity, n_atomic and (for the scene-graph stream) n_obj, n_rel.
        attention : bool
        attention_temperature : float
        """
        sg_dim = None
        if 'scene_graph' in modalities:
            sg_dim = vocabulary['n_obj'] * vocabulary['n_rel']
        stacks = {m: self.build_stack(m, vocabulary['n_activity'], vocabulary['n_atomic'], sg_dim) for m in modalities}
        model = CooperativeModel(stacks, attention=attention, attention_temperature=attention_temperature)
        logger.info("Built model over %s with %d parameters" % (list(modalities), sum(t.numel() for t in model.parameters())))
        return model
