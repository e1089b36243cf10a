"""Torch mirror of the fixed segmentation U-Net.

Submodule names are chosen so state_dict keys equal the serialization
manifest exactly ("enc1.conv1.weight", ...). Input normalization
(mean-center, divide by 0.1 m) lives inside forward so both runtimes
consume identical raw windows.
"""

from __future__ import annotations

import numpy as np
import torch
from torch import nn

from .formats import ARCHITECTURE

INPUT_SCALE = 0.1


class _Block(nn.Module):
    def __init__(self, c_in: int, c_mid: int):
        super().__init__()
        self.conv1 = nn.Conv2d(c_in, c_mid, 3, padding=1)
        self.conv2 = nn.Conv2d(c_mid, c_mid, 3, padding=1)

    def forward(self, x):
        x = torch.relu(self.conv1(x))
        return torch.relu(self.conv2(x))


class SegmentationUNet(nn.Module):
    def __init__(self):
        super().__init__()
        self.enc1 = _Block(1, 8)
        self.enc2 = _Block(8, 16)
        self.bott = _Block(16, 32)
        self.dec2 = _Block(48, 16)
        self.dec1 = _Block(24, 8)
        self.head = nn.Conv2d(8, 1, 1)
        self.pool = nn.MaxPool2d(2)
        self.up = nn.Upsample(scale_factor=2, mode="nearest")

    def forward(self, x):
        # x: (N, 1, 32, 32) raw heights in meters
        mean = x.mean(dim=(2, 3), keepdim=True)
        x = (x - mean) / INPUT_SCALE
        e1 = self.enc1(x)
        e2 = self.enc2(self.pool(e1))
        b = self.bott(self.pool(e2))
        d2 = self.dec2(torch.cat([self.up(b), e2], dim=1))
        d1 = self.dec1(torch.cat([self.up(d2), e1], dim=1))
        return self.head(d1)

    def export_tensors(self) -> dict[str, np.ndarray]:
        state = self.state_dict()
        return {name: state[name].detach().cpu().numpy().astype(np.float32)
                for name, _ in ARCHITECTURE}

    def load_tensors(self, tensors: dict[str, np.ndarray]) -> None:
        state = {name: torch.from_numpy(np.ascontiguousarray(arr))
                 for name, arr in tensors.items()}
        self.load_state_dict(state)


def parameter_count() -> int:
    return sum(int(np.prod(shape)) for _, shape in ARCHITECTURE)
