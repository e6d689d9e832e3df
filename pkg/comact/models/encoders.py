"""
Block encoders f: map one block of a modality to its latent grid z_j of shape D x H' x W'.

    VideoBlockEncoder       - 3-D convolutional residual network; the first two stages convolve
                              only spatially, the last two are temporally 3-D
    AudioBlockEncoder       - VGG-like 2-D convolutional network over the log-mel crop of a block
    SceneGraphBlockEncoder  - MLP over the flat object x relationship incidence vector of a block

All encoders take a (B, N, ...) batch of block sequences, fold the block axis into the batch axis
(blocks are encoded independently) and end with a bias-free 1x1 projection to D channels.
Presets bundle architecture hyper-parameters under a name that configuration files refer to.
"""

import torch
from torch import nn


def conv3x3x3(in_planes, out_planes, kernel, stride=1):
    padding = tuple(k // 2 for k in kernel)
    return nn.Conv3d(in_planes, out_planes, kernel_size=kernel, stride=stride, padding=padding, bias=False)


class BasicBlock3d(nn.Module):
    """
    Residual block with two convolutions of kernel `kernel` ((1, 3, 3) for spatial-only stages).
    """

    def __init__(self, inplanes, planes, kernel, stride=(1, 1, 1)):
        super(BasicBlock3d, self).__init__()
        self.conv1 = conv3x3x3(inplanes, planes, kernel, stride)
        self.bn1 = nn.BatchNorm3d(planes)
        self.relu = nn.ReLU(inplace=True)
        self.conv2 = conv3x3x3(planes, planes, kernel)
        self.bn2 = nn.BatchNorm3d(planes)
        self.downsample = None
        if stride != (1, 1, 1) or inplanes != planes:
            self.downsample = nn.Sequential(nn.Conv3d(inplanes, planes, kernel_size=1, stride=stride, bias=False),
                                            nn.BatchNorm3d(planes))

    def forward(self, x):
        identity = x if self.downsample is None else self.downsample(x)
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + identity)


class VideoBlockEncoder(nn.Module):
    """
    Parameters
    ----------
    feature_dim : int
                D.
    grid_size : int
              H' = W'.
    widths : tuple
           Channels of the four stages.
    blocks_per_stage : int
    stem_stride : int
                Spatial stride of the stem (full-scale inputs use 2 followed by a max-pool).
    """

    def __init__(self, feature_dim, grid_size, widths=(16, 32, 64, 128), blocks_per_stage=1, stem_stride=1):
        super(VideoBlockEncoder, self).__init__()
        self.grid_size = grid_size
        k = 7 if stem_stride > 1 else 3
        stem = [nn.Conv3d(3, widths[0], kernel_size=(1, k, k), stride=(1, stem_stride, stem_stride),
                          padding=(0, k // 2, k // 2), bias=False),
                nn.BatchNorm3d(widths[0]), nn.ReLU(inplace=True)]
        if stem_stride > 1:
            stem.append(nn.MaxPool3d(kernel_size=(1, 3, 3), stride=(1, 2, 2), padding=(0, 1, 1)))
        self.stem = nn.Sequential(*stem)

        kernels = [(1, 3, 3), (1, 3, 3), (3, 3, 3), (3, 3, 3)]
        strides = [(1, 1, 1), (1, 2, 2), (1, 2, 2), (1, 2, 2)]
        layers = []
        inplanes = widths[0]
        for width, kernel, stride in zip(widths, kernels, strides):
            for b in range(blocks_per_stage):
                layers.append(BasicBlock3d(inplanes, width, kernel, stride if b == 0 else (1, 1, 1)))
                inplanes = width
        self.layers = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool3d((1, grid_size, grid_size))
        self.projection = nn.Conv2d(inplanes, feature_dim, kernel_size=1, bias=False)

        for m in self.modules():
            if isinstance(m, nn.Conv3d):
                nn.init.kaiming_normal_(m.weight, mode='fan_out', nonlinearity='relu')
            elif isinstance(m, nn.BatchNorm3d):
                nn.init.constant_(m.weight, 1)
                nn.init.constant_(m.bias, 0)

    def forward(self, x):
        """
        x : (B, N, K, H, W, C) float tensor -> (B, N, D, H', W')
        """
        if x.dim() != 6 or x.shape[-1] != 3:
            raise ValueError("Video blocks must be (B, N, K, H, W, 3), got %s" % (tuple(x.shape),))
        B, N = x.shape[:2]
        x = x.reshape((B * N,) + tuple(x.shape[2:])).permute(0, 4, 1, 2, 3)
        x = self.pool(self.layers(self.stem(x))).squeeze(2)
        z = self.projection(x)
        return z.reshape((B, N) + tuple(z.shape[1:]))


class AudioBlockEncoder(nn.Module):
    """
    VGG-like encoder of log-mel crops.

    Parameters
    ----------
    feature_dim, grid_size : int
    widths : tuple
           Channels of every stage; each stage ends with a 2x2 max-pool.
    convs_per_stage : tuple
                    Number of 3x3 convolutions in every stage.
    """

    def __init__(self, feature_dim, grid_size, widths=(16, 32, 64, 128), convs_per_stage=(1, 1, 2, 2)):
        super(AudioBlockEncoder, self).__init__()
        layers = []
        inplanes = 1
        for width, n in zip(widths, convs_per_stage):
            for _ in range(n):
                layers += [nn.Conv2d(inplanes, width, kernel_size=3, padding=1, bias=False), nn.BatchNorm2d(width), nn.ReLU(inplace=True)]
                inplanes = width
            layers.append(nn.MaxPool2d(kernel_size=2, stride=2, ceil_mode=True))
        self.features = nn.Sequential(*layers)
        self.pool = nn.AdaptiveAvgPool2d((grid_size, grid_size))
        self.projection = nn.Conv2d(inplanes, feature_dim, kernel_size=1, bias=False)

    def forward(self, x):
        """
        x : (B, N, L, n_mels) log-mel crops -> (B, N, D, H', W')
        """
        if x.dim() != 4:
            raise ValueError("Audio blocks must be (B, N, time, mel), got %s" % (tuple(x.shape),))
        B, N = x.shape[:2]
        x = x.reshape((B * N, 1) + tuple(x.shape[2:]))
        z = self.projection(self.pool(self.features(x)))
        return z.reshape((B, N) + tuple(z.shape[1:]))


class SceneGraphBlockEncoder(nn.Module):
    """
    Two-layer MLP over the n_obj * n_rel incidence vector; the embedding is broadcast over the grid.
    """

    def __init__(self, feature_dim, grid_size, input_dim, hidden=128):
        super(SceneGraphBlockEncoder, self).__init__()
        self.grid_size = grid_size
        self.input_dim = input_dim
        self.mlp = nn.Sequential(nn.Linear(input_dim, hidden), nn.ReLU(inplace=True))
        self.projection = nn.Linear(hidden, feature_dim, bias=False)

    def forward(self, x):
        """
        x : (B, N, n_obj * n_rel) -> (B, N, D, H', W')
        """
        if x.dim() != 3 or x.shape[-1] != self.input_dim:
            raise ValueError("Scene graph blocks must be (B, N, %d), got %s" % (self.input_dim, tuple(x.shape)))
        z = self.projection(self.mlp(x))
        return z[..., None, None].expand(tuple(z.shape) + (self.grid_size, self.grid_size))


PRESETS = {
    'video_small': (VideoBlockEncoder, {'widths': (16, 32, 64, 128), 'blocks_per_stage': 1, 'stem_stride': 1}),
    'video_tiny': (VideoBlockEncoder, {'widths': (4, 4, 8, 8), 'blocks_per_stage': 1, 'stem_stride': 1}),
    'resnet18_2d3d': (VideoBlockEncoder, {'widths': (64, 128, 256, 512), 'blocks_per_stage': 2, 'stem_stride': 2}),
    'audio_small': (AudioBlockEncoder, {'widths': (16, 32, 64, 128), 'convs_per_stage': (1, 1, 2, 2)}),
    'audio_tiny': (AudioBlockEncoder, {'widths': (4, 8), 'convs_per_stage': (1, 1)}),
    'vgg19_like': (AudioBlockEncoder, {'widths': (64, 128, 256, 512, 512), 'convs_per_stage': (2, 2, 4, 4, 4)}),
    'scene_graph_mlp': (SceneGraphBlockEncoder, {'hidden': 128}),
    'scene_graph_tiny': (SceneGraphBlockEncoder, {'hidden': 16}),
}


def build_block_encoder(preset, feature_dim, grid_size, input_dim=None):
    """
    Instantiates the block encoder named `preset`. `input_dim` is the M vector length of scene-graph encoders.
    """
    if preset not in PRESETS:
        raise ValueError("Unknown encoder preset %s, expected one of %s" % (preset, sorted(PRESETS)))
    cls, kwargs = PRESETS[preset]
    if cls is SceneGraphBlockEncoder:
        if input_dim is None:
            raise ValueError("Scene graph encoders need the incidence vector length")
        return cls(feature_dim, grid_size, input_dim, **kwargs)
    return cls(feature_dim, grid_size, **kwargs)
