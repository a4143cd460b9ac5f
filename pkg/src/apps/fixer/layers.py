"""
Coefficient modulator and the frozen perceptual feature extractor
"""

from __future__ import annotations

import numpy as np

from src.apps.core.exceptions import DimensionError
from src.apps.core.layers import Array, Conv2d, Layer, ReLU, mse_loss

PERCEPTUAL_SEED = 7
PERCEPTUAL_WIDTHS = ((3, 8, 1), (8, 16, 2), (16, 16, 2))


class Modulator(Layer):
    """
    Four 3x3 convolutions 6 -> w -> w -> w -> 6 with ReLU in between.

    The last convolution starts at zero, so the raw output starts at zero and
    (alpha, beta) = (1 + raw[..., :3], raw[..., 3:]) starts at (1, 0).
    """

    def __init__(self, width: int, rng: np.random.Generator) -> None:
        super().__init__()
        self.width = width
        self.conv1 = self.add_child("conv1", Conv2d(6, width, rng))
        self.act1 = ReLU()
        self.conv2 = self.add_child("conv2", Conv2d(width, width, rng))
        self.act2 = ReLU()
        self.conv3 = self.add_child("conv3", Conv2d(width, width, rng))
        self.act3 = ReLU()
        self.conv4 = self.add_child("conv4", Conv2d(width, 6, rng, zero_init=True))

    def forward(self, x: Array) -> Array:
        if x.ndim != 3 or x.shape[2] != 6:
            raise DimensionError(f"Modulator input must be (H, W, 6), got {x.shape}")
        h = self.act1.forward(self.conv1.forward(x))
        h = self.act2.forward(self.conv2.forward(h))
        h = self.act3.forward(self.conv3.forward(h))
        return self.conv4.forward(h)

    def backward(self, dy: Array) -> Array:
        dh = self.act3.backward(self.conv4.backward(dy))
        dh = self.act2.backward(self.conv3.backward(dh))
        dh = self.act1.backward(self.conv2.backward(dh))
        return self.conv1.backward(dh)


class PerceptualProxy(Layer):
    """
    Seeded random three-layer conv feature extractor, never trained.
    Loss is the sum of per-layer feature MSEs.
    """

    def __init__(self, seed: int = PERCEPTUAL_SEED) -> None:
        super().__init__()
        rng = np.random.default_rng(seed)
        self.stages = []
        for index, (n_in, n_out, stride) in enumerate(PERCEPTUAL_WIDTHS, start=1):
            conv = self.add_child(f"conv{index}", Conv2d(n_in, n_out, rng, stride=stride))
            self.stages.append((conv, ReLU()))
        self.trainable = False

    def features(self, img: Array) -> list[Array]:
        feats = []
        h = img
        for conv, act in self.stages:
            h = act.forward(conv.forward(h))
            feats.append(h)
        return feats

    def loss(self, pred: Array, target: Array) -> tuple[float, Array]:
        """
        Feature distance and its gradient with respect to ``pred``
        """
        target_feats = self.features(target)
        pred_feats = self.features(pred)
        total = 0.0
        grads = []
        for p, t in zip(pred_feats, target_feats):
            value, grad = mse_loss(p, t)
            total += value
            grads.append(grad)
        d = np.zeros_like(pred_feats[-1])
        for (conv, act), grad in zip(reversed(self.stages), reversed(grads)):
            d = conv.backward(act.backward(d + grad))
        self.zero_grad()
        return total, d
