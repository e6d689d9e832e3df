"""
The temporal part of an encoder stack: the recurrent aggregator g producing the causal context
c_j = g(z_1, ..., z_j), the spatial pooling Pool(.) and the predictive head phi.
"""

import math
import torch
from torch import nn


class ConvGRUCell(nn.Module):
    """
    Convolutional GRU cell. With the default (1, 1) kernel the recurrence is spatially pointwise:
    every grid position is updated by the same weights and independently of its neighbours.
    """

    def __init__(self, input_channels, hidden_channels, kernel_size=1):
        super(ConvGRUCell, self).__init__()
        self.input_channels = input_channels
        self.hidden_channels = hidden_channels
        padding = kernel_size // 2
        self.reset_gate = nn.Conv2d(input_channels + hidden_channels, hidden_channels, kernel_size, padding=padding)
        self.update_gate = nn.Conv2d(input_channels + hidden_channels, hidden_channels, kernel_size, padding=padding)
        self.output_gate = nn.Conv2d(input_channels + hidden_channels, hidden_channels, kernel_size, padding=padding)
        for gate in (self.reset_gate, self.update_gate, self.output_gate):
            nn.init.orthogonal_(gate.weight)
            nn.init.constant_(gate.bias, 0.0)

    def forward(self, x, hidden=None):
        if hidden is None:
            hidden = x.new_zeros((x.shape[0], self.hidden_channels) + tuple(x.shape[2:]))
        inputs = torch.cat((x, hidden), dim=1)
        reset_gate = torch.sigmoid(self.reset_gate(inputs))
        update_gate = torch.sigmoid(self.update_gate(inputs))
        reset_inputs = torch.tanh(self.output_gate(torch.cat((x, reset_gate * hidden), dim=1)))
        return (1 - update_gate) * reset_inputs + update_gate * hidden


class ConvGRU(nn.Module):
    """
    One-layer ConvGRU run over the block axis, with dropout on the hidden state carried between blocks.
    """

    def __init__(self, channels, kernel_size=1, hidden_dropout=0.1):
        super(ConvGRU, self).__init__()
        self.cell = ConvGRUCell(channels, channels, kernel_size)
        self.dropout = nn.Dropout(p=hidden_dropout)

    def step(self, z, hidden=None):
        """
        Ingests one grid z (B, D, H', W'); returns the new hidden grid.
        """
        return self.cell(z, None if hidden is None else self.dropout(hidden))

    def forward(self, z, hidden=None):
        """
        z : (B, N, D, H', W') -> contexts (B, N, D, H', W'), last hidden (B, D, H', W')
        """
        if z.shape[1] < 1:
            raise ValueError("The aggregator needs at least one block")
        outputs = []
        for j in range(z.shape[1]):
            hidden = self.step(z[:, j], hidden)
            outputs.append(hidden)
        return torch.stack(outputs, dim=1), hidden


class StackedMaxPool(nn.Module):
    """
    Reduces an H' x W' grid to 1 x 1 by stacked 2x2 max-pools (a final adaptive max-pool covers grids
    that are not powers of two).
    """

    def __init__(self, grid_size):
        super(StackedMaxPool, self).__init__()
        n = int(math.floor(math.log2(grid_size))) if grid_size > 1 else 0
        self.pools = nn.Sequential(*([nn.MaxPool2d(2, ceil_mode=True)] * n + [nn.AdaptiveMaxPool2d(1)]))

    def forward(self, grid):
        """
        grid : (..., D, H', W') -> (..., D)
        """
        lead = tuple(grid.shape[:-3])
        flat = grid.reshape((-1,) + tuple(grid.shape[-3:]))
        return self.pools(flat).reshape(lead + (grid.shape[-3],))


class Predictor(nn.Module):
    """
    The predictive head phi: a two-layer perceptron from the pooled context to a full D x H' x W' grid.
    """

    def __init__(self, feature_dim, grid_size, hidden=None):
        super(Predictor, self).__init__()
        hidden = hidden or feature_dim
        self.feature_dim = feature_dim
        self.grid_size = grid_size
        self.mlp = nn.Sequential(nn.Linear(feature_dim, hidden), nn.ReLU(inplace=True),
                                 nn.Linear(hidden, feature_dim * grid_size * grid_size))

    def forward(self, c):
        """
        c : (B, D) -> (B, D, H', W')
        """
        return self.mlp(c).reshape(c.shape[0], self.feature_dim, self.grid_size, self.grid_size)
