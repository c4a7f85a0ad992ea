"""PyTorch reference implementation of the AdaIN encoder/decoder.

Mirrors the released implementation's module layout: both networks are
plain ``nn.Sequential`` stacks, so checkpoint tensors carry positional
keys like ``"29.weight"``. This is the independent oracle the golden
fixtures are produced with; the numpy engine never imports it.
"""

import numpy as np
import torch
from torch import nn


def build_encoder() -> nn.Sequential:
    """Input-normalization 1x1 conv, then VGG blocks through relu4_1."""
    def block(cin, cout):
        return [nn.ReflectionPad2d(1), nn.Conv2d(cin, cout, 3), nn.ReLU()]

    return nn.Sequential(
        nn.Conv2d(3, 3, 1),
        *block(3, 64), *block(64, 64),
        nn.MaxPool2d(2, stride=2, ceil_mode=True),
        *block(64, 128), *block(128, 128),
        nn.MaxPool2d(2, stride=2, ceil_mode=True),
        *block(128, 256), *block(256, 256), *block(256, 256), *block(256, 256),
        nn.MaxPool2d(2, stride=2, ceil_mode=True),
        *block(256, 512),
    )


def build_decoder() -> nn.Sequential:
    def block(cin, cout):
        return [nn.ReflectionPad2d(1), nn.Conv2d(cin, cout, 3), nn.ReLU()]

    up = lambda: nn.Upsample(scale_factor=2, mode="nearest")
    stack = (block(512, 256) + [up()]
             + block(256, 256) + block(256, 256) + block(256, 256)
             + block(256, 128) + [up()]
             + block(128, 128) + block(128, 64) + [up()]
             + block(64, 64)
             + [nn.ReflectionPad2d(1), nn.Conv2d(64, 3, 3)])
    return nn.Sequential(*stack)


# Sequential index of each conv layer, keyed by its archive name.
ENCODER_CONV_INDEX = {
    "encoder.conv0": 0,
    "encoder.conv1_1": 2, "encoder.conv1_2": 5,
    "encoder.conv2_1": 9, "encoder.conv2_2": 12,
    "encoder.conv3_1": 16, "encoder.conv3_2": 19,
    "encoder.conv3_3": 22, "encoder.conv3_4": 25,
    "encoder.conv4_1": 29,
}

DECODER_CONV_INDEX = {
    "decoder.conv4_1": 1,
    "decoder.conv3_4": 5, "decoder.conv3_3": 8,
    "decoder.conv3_2": 11, "decoder.conv3_1": 14,
    "decoder.conv2_2": 18, "decoder.conv2_1": 21,
    "decoder.conv1_2": 25, "decoder.conv1_1": 28,
}


def make_standin_state_dicts(seed: int) -> tuple:
    """He-scaled random (encoder, decoder) state dicts.

    Stands in for the released pre-trained checkpoints, which are not
    fetchable in this environment; weights come from a numpy generator so
    the tensors are stable across torch versions.
    """
    rng = np.random.default_rng(seed)

    def fill(module):
        state = {}
        for key, param in module.state_dict().items():
            if key.endswith(".weight"):
                fan_in = int(np.prod(param.shape[1:]))
                arr = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=tuple(param.shape))
            else:
                arr = rng.normal(0.0, 0.01, size=tuple(param.shape))
            state[key] = torch.from_numpy(arr.astype(np.float32))
        return state

    return fill(build_encoder()), fill(build_decoder())


def adain(content_feat: torch.Tensor, style_feat: torch.Tensor,
          alpha: float = 1.0, eps: float = 1e-5) -> torch.Tensor:
    """Channel-statistics alignment on (1, C, H, W) features.

    Same formula as the engine: population std, eps added to the content
    std, alpha blending toward the unmodified content features.
    """
    c = content_feat.double()
    s = style_feat.double()
    c_mu = c.mean(dim=(2, 3), keepdim=True)
    c_sigma = c.std(dim=(2, 3), keepdim=True, unbiased=False)
    s_mu = s.mean(dim=(2, 3), keepdim=True)
    s_sigma = s.std(dim=(2, 3), keepdim=True, unbiased=False)
    out = (c - c_mu) * (s_sigma / (c_sigma + eps)) + s_mu
    out = alpha * out + (1.0 - alpha) * c
    return out.float()


def to_tensor(image: np.ndarray) -> torch.Tensor:
    """(H, W, 3) float32 in [0, 1] -> (1, 3, H, W)."""
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1)))[None]


def to_image(tensor: torch.Tensor) -> np.ndarray:
    """(1, 3, H, W) -> (H, W, 3) float32 clamped to [0, 1]."""
    return tensor.clamp(0.0, 1.0)[0].permute(1, 2, 0).numpy()
