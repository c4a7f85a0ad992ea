"""AdaIN stylization: encode to 512-channel features, align per-channel
statistics with the style, decode back to pixel space.
"""

import threading
from dataclasses import dataclass

import cv2
import numpy as np

from . import network
from .tensor import BufferPool, Tensor
from .weights import WeightArchive


@dataclass(frozen=True)
class StylizeConfig:
    """Content-style interpolation weight and zero-variance guard."""

    alpha: float = 1.0
    epsilon_std: float = 1e-5

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.epsilon_std <= 0.0:
            raise ValueError("epsilon_std must be positive")


class AdainEngine:
    """Holds a validated weight archive with layers prepared for inference.

    Immutable after construction; safe to share across workers.
    """

    def __init__(self, archive: WeightArchive):
        self._encoder = network.prepare_encoder(archive)
        self._decoder = network.prepare_decoder(archive)
        self._tls = threading.local()

    def _pool(self) -> BufferPool:
        """Scratch-buffer pool; one per thread since buffers are reused."""
        pool = getattr(self._tls, "pool", None)
        if pool is None:
            pool = self._tls.pool = BufferPool()
        return pool

    def encode_nhwc(self, image: np.ndarray) -> np.ndarray:
        """(H, W, 3) float32 in [0, 1] -> (ceil(H/8), ceil(W/8), 512)."""
        h, w = image.shape[:2]
        if h < 8 or w < 8:
            raise ValueError(f"image {h}x{w} too small to encode (needs >= 8)")
        return np.ascontiguousarray(self._encoder.run(
            np.ascontiguousarray(image, dtype=np.float32), self._pool()))

    def decode_nhwc(self, features: np.ndarray) -> np.ndarray:
        """(h, w, 512) features -> (8h, 8w, 3) image clamped to [0, 1]."""
        if features.shape[2] != network.FEATURE_CHANNELS:
            raise ValueError(
                f"decoder expects {network.FEATURE_CHANNELS} channels, got {features.shape[2]}")
        out = self._decoder.run(
            np.ascontiguousarray(features, dtype=np.float32), self._pool())
        return np.clip(out, 0.0, 1.0, out=out)

    def stylize_nhwc(self, content: np.ndarray, style: np.ndarray,
                     cfg: StylizeConfig = StylizeConfig(),
                     style_features: np.ndarray | None = None) -> np.ndarray:
        """Full pipeline on (H, W, 3) float32 images in [0, 1].

        The output is bilinearly resized back to the content's size (the
        decoder returns ceil-to-multiple-of-8 dims). An already-encoded
        ``style_features`` map may be passed to reuse work across calls.
        """
        h, w = content.shape[:2]
        content_feat = self.encode_nhwc(content)
        if style_features is None:
            style_features = self.encode_nhwc(style)
        mixed = adain_nhwc(content_feat, style_features, cfg)
        decoded = self.decode_nhwc(mixed)
        if decoded.shape[:2] != (h, w):
            decoded = cv2.resize(decoded, (w, h), interpolation=cv2.INTER_LINEAR)
            decoded = np.clip(decoded, 0.0, 1.0)
        return decoded


def adain_nhwc(content_feat: np.ndarray, style_feat: np.ndarray,
               cfg: StylizeConfig = StylizeConfig()) -> np.ndarray:
    """Align per-channel spatial mean/std of content features to the style's.

    out = sigma_style * (content - mu_content) / (sigma_content + eps) + mu_style,
    blended as alpha * out + (1 - alpha) * content. Standard deviations are
    population (not sample) statistics.
    """
    if content_feat.shape[2] != style_feat.shape[2]:
        raise ValueError(
            f"channel mismatch: content {content_feat.shape[2]} vs style {style_feat.shape[2]}")
    # statistics in float64: the per-channel vectors are tiny and the
    # extra precision keeps the output moments tight to the style's
    c_mu = content_feat.mean(axis=(0, 1), dtype=np.float64)
    c_sigma = content_feat.std(axis=(0, 1), dtype=np.float64)
    s_mu = style_feat.mean(axis=(0, 1), dtype=np.float64)
    s_sigma = style_feat.std(axis=(0, 1), dtype=np.float64)
    scale = (s_sigma / (c_sigma + cfg.epsilon_std)).astype(np.float32)
    out = content_feat - c_mu.astype(np.float32)
    out *= scale
    out += s_mu.astype(np.float32)
    if cfg.alpha != 1.0:
        out *= cfg.alpha
        out += (1.0 - cfg.alpha) * content_feat
    return out.astype(np.float32, copy=False)


# NCHW Tensor wrappers around the NHWC engine paths.

def encode(image: Tensor, archive: WeightArchive) -> Tensor:
    """Encode a 1x3xHxW image tensor to 1x512 features."""
    engine = AdainEngine(archive)
    n, c, h, w = image.dims
    if c != 3:
        raise ValueError(f"encoder expects 3 channels, got {c}")
    outs = [engine.encode_nhwc(image.array[i].transpose(1, 2, 0)) for i in range(n)]
    return Tensor(np.stack([o.transpose(2, 0, 1) for o in outs]))


def adain(content_feat: Tensor, style_feat: Tensor,
          cfg: StylizeConfig = StylizeConfig()) -> Tensor:
    outs = []
    for i in range(content_feat.dims[0]):
        outs.append(adain_nhwc(content_feat.array[i].transpose(1, 2, 0),
                               style_feat.array[i].transpose(1, 2, 0),
                               cfg).transpose(2, 0, 1))
    return Tensor(np.stack(outs))


def decode(features: Tensor, archive: WeightArchive) -> Tensor:
    engine = AdainEngine(archive)
    outs = [engine.decode_nhwc(features.array[i].transpose(1, 2, 0))
            for i in range(features.dims[0])]
    return Tensor(np.stack([o.transpose(2, 0, 1) for o in outs]))


def stylize(content: Tensor, style: Tensor, archive: WeightArchive,
            cfg: StylizeConfig = StylizeConfig()) -> Tensor:
    """Stylize a 1x3xHxW content tensor with a 1x3x512x512 style tensor."""
    engine = AdainEngine(archive)
    outs = []
    for i in range(content.dims[0]):
        out = engine.stylize_nhwc(content.array[i].transpose(1, 2, 0),
                                  style.array[i].transpose(1, 2, 0), cfg)
        outs.append(out.transpose(2, 0, 1))
    return Tensor(np.stack(outs))
