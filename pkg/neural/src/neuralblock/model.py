"""CNN feature extractor + LSTM + sigmoid head over range-angle map windows.

The feature net reduces one 1 x 256 x 64 range-angle map to a 64-vector
(stride-1 dimension-preserving 3x3 convolutions, three 2x2 average poolings,
two dense layers; the flatten size works out to 512).  One shared feature net
is applied to every map of the observation window; a single-layer LSTM over
the per-map features feeds a one-unit sigmoid head through its last cell's
output.
"""

from __future__ import annotations

from typing import List, Tuple

import torch
import torch.nn as nn

MAP_SHAPE = (256, 64)
FEATURE_DIM = 64
FLATTEN_DIM = 512

# (kind, parameter) stack of the feature extractor; kept as data so the
# shape chain can be verified programmatically.
FEATURE_STACK: List[Tuple[str, int]] = [
    ("conv", 4),
    ("conv", 8),
    ("conv", 16),
    ("pool", 2),
    ("conv", 4),
    ("pool", 2),
    ("conv", 2),
    ("pool", 2),
    ("fc", 256),
    ("fc", FEATURE_DIM),
]


def feature_shape_trace(height: int = MAP_SHAPE[0], width: int = MAP_SHAPE[1]):
    """(layer, (channels, h, w) or flat size) through the feature stack."""
    trace = [("input", (1, height, width))]
    c, h, w = 1, height, width
    flat = None
    for kind, arg in FEATURE_STACK:
        if kind == "conv":
            c = arg  # 3x3, stride 1, padding 1: spatial dims preserved
            trace.append((f"conv{arg}", (c, h, w)))
        elif kind == "pool":
            h, w = h // arg, w // arg
            trace.append((f"pool{arg}", (c, h, w)))
        elif kind == "fc":
            if flat is None:
                flat = c * h * w
                trace.append(("flatten", flat))
            flat = arg
            trace.append((f"fc{arg}", flat))
    return trace


class FeatureNet(nn.Module):
    """Per-map feature extractor; input (B, 1, 256, 64) -> (B, 64)."""

    def __init__(self):
        super().__init__()
        layers: List[nn.Module] = []
        c = 1
        for kind, arg in FEATURE_STACK:
            if kind == "conv":
                layers += [nn.Conv2d(c, arg, kernel_size=3, padding=1), nn.ReLU()]
                c = arg
            elif kind == "pool":
                layers.append(nn.AvgPool2d(arg))
        self.conv = nn.Sequential(*layers)
        self.fc = nn.Sequential(
            nn.Flatten(),
            nn.Linear(FLATTEN_DIM, 256),
            nn.ReLU(),
            nn.Linear(256, FEATURE_DIM),
            nn.ReLU(),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if x.shape[-2:] != MAP_SHAPE:
            raise ValueError(f"expected maps of shape {MAP_SHAPE}, got {tuple(x.shape[-2:])}")
        return self.fc(self.conv(x))


class BlockagePredictor(nn.Module):
    """Window of range-angle maps -> blockage probability.

    The same feature net (shared weights) runs on every time step; the LSTM's
    last-cell output feeds a single dense sigmoid unit.
    """

    def __init__(self, obs_window: int = 8):
        super().__init__()
        self.obs_window = obs_window
        self.feature_net = FeatureNet()
        self.lstm = nn.LSTM(FEATURE_DIM, FEATURE_DIM, num_layers=1, batch_first=True)
        self.head = nn.Linear(FEATURE_DIM, 1)

    def forward(self, windows: torch.Tensor) -> torch.Tensor:
        """windows: (B, T, 1, 256, 64) -> probabilities (B,)."""
        if windows.dim() != 5 or windows.shape[1] != self.obs_window:
            raise ValueError(
                f"expected (B, {self.obs_window}, 1, {MAP_SHAPE[0]}, {MAP_SHAPE[1]}), "
                f"got {tuple(windows.shape)}"
            )
        b, t = windows.shape[:2]
        feats = self.feature_net(windows.reshape(b * t, *windows.shape[2:]))
        feats = feats.reshape(b, t, FEATURE_DIM)
        out, _ = self.lstm(feats)
        return torch.sigmoid(self.head(out[:, -1])).squeeze(-1)

    def parameter_count(self) -> int:
        return sum(p.numel() for p in self.parameters())
