"""Encoder/decoder network descriptions and the NHWC layer runner.

The encoder is a VGG-style stack truncated at its 512-channel feature
level (spatial stride 8 with ceiling pooling), preceded by a fixed 1x1
color-projection convolution. The decoder mirrors it with nearest 2x
upsampling. Layers are described as data so the weight archive can be
validated against the expected shapes before any inference runs.
"""

import numpy as np

from .tensor import (
    BufferPool,
    base_of,
    conv1x1_nhwc,
    conv3x3_nhwc,
    maxpool2_nhwc,
    pad_reflect_nhwc,
    upsample2_nhwc,
)
from .weights import WeightArchive, WeightArchiveError

# Layer vocabulary: ("pad", p) | ("conv", name, cin, cout, k, relu) | ("pool",) | ("up",)

ENCODER_LAYERS = (
    ("conv", "encoder.conv0", 3, 3, 1, False),
    ("pad", 1), ("conv", "encoder.conv1_1", 3, 64, 3, True),
    ("pad", 1), ("conv", "encoder.conv1_2", 64, 64, 3, True),
    ("pool",),
    ("pad", 1), ("conv", "encoder.conv2_1", 64, 128, 3, True),
    ("pad", 1), ("conv", "encoder.conv2_2", 128, 128, 3, True),
    ("pool",),
    ("pad", 1), ("conv", "encoder.conv3_1", 128, 256, 3, True),
    ("pad", 1), ("conv", "encoder.conv3_2", 256, 256, 3, True),
    ("pad", 1), ("conv", "encoder.conv3_3", 256, 256, 3, True),
    ("pad", 1), ("conv", "encoder.conv3_4", 256, 256, 3, True),
    ("pool",),
    ("pad", 1), ("conv", "encoder.conv4_1", 256, 512, 3, True),
)

DECODER_LAYERS = (
    ("pad", 1), ("conv", "decoder.conv4_1", 512, 256, 3, True),
    ("up",),
    ("pad", 1), ("conv", "decoder.conv3_4", 256, 256, 3, True),
    ("pad", 1), ("conv", "decoder.conv3_3", 256, 256, 3, True),
    ("pad", 1), ("conv", "decoder.conv3_2", 256, 256, 3, True),
    ("pad", 1), ("conv", "decoder.conv3_1", 256, 128, 3, True),
    ("up",),
    ("pad", 1), ("conv", "decoder.conv2_2", 128, 128, 3, True),
    ("pad", 1), ("conv", "decoder.conv2_1", 128, 64, 3, True),
    ("up",),
    ("pad", 1), ("conv", "decoder.conv1_2", 64, 64, 3, True),
    ("pad", 1), ("conv", "decoder.conv1_1", 64, 3, 3, False),
)

FEATURE_CHANNELS = 512


def conv_layer_specs(layers=ENCODER_LAYERS + DECODER_LAYERS) -> list:
    """(name, cin, cout, k) for every conv layer in the description."""
    return [(l[1], l[2], l[3], l[4]) for l in layers if l[0] == "conv"]


def validate_archive(archive: WeightArchive, layers=ENCODER_LAYERS + DECODER_LAYERS) -> None:
    """Check every required layer is present with matching dims."""
    for name, cin, cout, k in conv_layer_specs(layers):
        w = archive[f"{name}.weight"]
        b = archive[f"{name}.bias"]
        if w.shape != (cout, cin, k, k):
            raise WeightArchiveError(
                f"{name}.weight has shape {w.shape}, expected {(cout, cin, k, k)}")
        if b.shape != (cout,):
            raise WeightArchiveError(
                f"{name}.bias has shape {b.shape}, expected {(cout,)}")


class _PreparedNet:
    """Layer list with weights re-laid out for the NHWC kernels.

    A one-pixel reflection pad that directly follows a conv, pool, or
    upsample step is fused into it: the producer writes straight into a
    padded buffer, so only leading pads remain explicit steps.
    """

    def __init__(self, layers, archive: WeightArchive):
        validate_archive(archive, layers)
        self.steps = []
        i = 0
        while i < len(layers):
            layer = layers[i]
            fusable = layer[0] in ("conv", "pool", "up")
            emit_pad = (fusable and i + 1 < len(layers)
                        and layers[i + 1] == ("pad", 1))
            if layer[0] == "conv":
                _, name, cin, cout, k, fuse = layer
                w = archive[f"{name}.weight"]  # (O, C, k, k)
                w_nhwc = np.ascontiguousarray(w.transpose(2, 3, 1, 0))
                b = archive[f"{name}.bias"]
                self.steps.append(("conv", w_nhwc, b, k, fuse, emit_pad))
            elif layer[0] in ("pool", "up"):
                self.steps.append((layer[0], emit_pad))
            else:
                self.steps.append(layer)
            i += 2 if emit_pad else 1

    def run(self, x: np.ndarray, pool: BufferPool | None = None) -> np.ndarray:
        """x: (H, W, C) float32 NHWC; returns a compact NHWC array.

        ``pool`` recycles each layer's input buffer once its successor is
        computed; it must not be shared across threads.
        """
        cur_base = None  # backing of x, None while x is caller-owned
        for step in self.steps:
            op = step[0]
            if op == "conv":
                _, w, b, k, fuse, emit_pad = step
                kernel = conv1x1_nhwc if k == 1 else conv3x3_nhwc
                y = kernel(x, w, b, fuse_relu=fuse, emit_pad=emit_pad, pool=pool)
            elif op == "pad":
                y = pad_reflect_nhwc(x, step[1], pool=pool)
            elif op == "pool":
                y = maxpool2_nhwc(x, emit_pad=step[1], pool=pool)
            elif op == "up":
                y = upsample2_nhwc(x, emit_pad=step[1], pool=pool)
            else:
                raise ValueError(f"unknown layer op {op!r}")
            if y is x:  # identity step (e.g. pad 0): nothing to recycle
                continue
            if pool is not None and cur_base is not None:
                pool.give(cur_base)
            x, cur_base = y, base_of(y)
        if pool is not None and cur_base is not None and (
                not x.flags.c_contiguous or x.size != cur_base.size):
            # compact the result so the (possibly oversized) backing buffer
            # can be recycled instead of escaping with the return value
            out = np.ascontiguousarray(x)
            pool.give(cur_base)
            return out
        return x


def prepare_encoder(archive: WeightArchive) -> _PreparedNet:
    return _PreparedNet(ENCODER_LAYERS, archive)


def prepare_decoder(archive: WeightArchive) -> _PreparedNet:
    return _PreparedNet(DECODER_LAYERS, archive)
