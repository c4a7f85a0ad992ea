"""Training-time sampling and online transforms.

Draws each training item from the augmentation manifest (stylized variant
with probability ``p_aug``, original otherwise) and applies photometric
distortion, Gaussian blur, and mirroring. Every choice is a pure function
of (seed, epoch, position), so parallel consumers partitioned by position
reproduce the single-stream sequence exactly.
"""

from dataclasses import dataclass

import numpy as np

import cv2

from .seeding import derive_seed, rng_for


@dataclass(frozen=True)
class SamplerConfig:
    p_aug: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p_aug <= 1.0:
            raise ValueError("p_aug must be in [0, 1]")


@dataclass(frozen=True)
class PmdConfig:
    brightness_delta: float = 32.0
    contrast_range: tuple = (0.5, 1.5)
    saturation_range: tuple = (0.5, 1.5)
    hue_delta: float = 18.0
    apply_p: float = 0.5

    def __post_init__(self):
        for lo, hi in (self.contrast_range, self.saturation_range):
            if not (0.0 < lo <= 1.0 <= hi):
                raise ValueError("ranges must be positive intervals containing 1.0")
        if self.brightness_delta < 0 or self.hue_delta < 0:
            raise ValueError("deltas must be non-negative")


@dataclass(frozen=True)
class BlurMirrorConfig:
    mirror_p: float = 0.5
    blur_p: float = 0.5
    blur_radius_range: tuple = (0.0, 1.0)

    def __post_init__(self):
        if not (0.0 <= self.mirror_p <= 1.0 and 0.0 <= self.blur_p <= 1.0):
            raise ValueError("probabilities must be in [0, 1]")
        if self.blur_radius_range[0] < 0 or self.blur_radius_range[1] <= self.blur_radius_range[0]:
            raise ValueError("blur radius range must be a positive interval")


@dataclass(frozen=True)
class SampleItem:
    """One training draw: which file to load and the transform sub-seed."""

    position: int
    image_path: str
    label_path: str | None
    stylized: bool
    transform_seed: int


def epoch_items(manifest: dict, cfg: SamplerConfig, epoch: int) -> list:
    """The full sampling sequence for one epoch.

    Source images are visited exactly once in a seeded shuffle; at each
    visit a coin with probability ``p_aug`` picks one of the stylized
    variants uniformly, otherwise the original. Item ``position`` is the
    index within the epoch, so workers may partition positions freely.
    """
    entries = manifest["entries"]
    if not entries:
        raise ValueError("manifest has no entries")
    order = rng_for(cfg.seed, "epoch-order", epoch).permutation(len(entries))
    items = []
    for pos, entry_idx in enumerate(order):
        entry = entries[int(entry_idx)]
        rng = rng_for(cfg.seed, "draw", epoch, pos)
        variants = entry["variants"]
        if variants and rng.random() < cfg.p_aug:
            chosen = variants[int(rng.integers(len(variants)))]
            path, stylized = chosen["path"], True
        else:
            path, stylized = entry["original"], False
        items.append(SampleItem(
            position=pos,
            image_path=path,
            label_path=entry.get("label"),
            stylized=stylized,
            transform_seed=derive_seed(cfg.seed, "transform", epoch, pos),
        ))
    return items


def sample_stream(manifest: dict, cfg: SamplerConfig, epochs: int):
    """Yield items for the requested number of epochs in order."""
    for epoch in range(epochs):
        yield from epoch_items(manifest, cfg, epoch)


# ---------------------------------------------------------------------------
# Online transforms
# ---------------------------------------------------------------------------

def adjust_brightness(image: np.ndarray, delta: float) -> np.ndarray:
    """Additive shift on the [0, 255] scale, clamped."""
    return np.clip(image.astype(np.float32) + delta, 0.0, 255.0)


def adjust_contrast(image: np.ndarray, scale: float) -> np.ndarray:
    """Multiplicative scaling on the [0, 255] scale, clamped."""
    return np.clip(image.astype(np.float32) * scale, 0.0, 255.0)


def adjust_saturation_hue(image: np.ndarray, saturation_scale: float,
                          hue_degrees: float) -> np.ndarray:
    """Scale saturation and rotate hue in HSV space; input/output [0, 255] RGB."""
    hsv = cv2.cvtColor(np.clip(image.astype(np.float32), 0, 255) / 255.0,
                       cv2.COLOR_RGB2HSV)
    hsv[..., 1] = np.clip(hsv[..., 1] * saturation_scale, 0.0, 1.0)
    hsv[..., 0] = (hsv[..., 0] + hue_degrees) % 360.0
    return np.clip(cv2.cvtColor(hsv, cv2.COLOR_HSV2RGB) * 255.0, 0.0, 255.0)


def photometric_distortion(image: np.ndarray, cfg: PmdConfig, seed: int) -> np.ndarray:
    """Random brightness / contrast / saturation / hue jitter.

    Works on (H, W, 3) RGB with values in [0, 255]; each op is applied
    with probability ``apply_p`` and the contrast op is randomly ordered
    before or after the saturation/hue block. Output is float32, clamped.
    """
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValueError("photometric_distortion expects an (H, W, 3) image")
    rng = rng_for(seed, "pmd")
    img = image.astype(np.float32)
    contrast_last = rng.integers(2) == 0

    if rng.random() < cfg.apply_p:
        img = adjust_brightness(img, rng.uniform(-cfg.brightness_delta,
                                                 cfg.brightness_delta))

    def contrast(im):
        if rng.random() < cfg.apply_p:
            return adjust_contrast(im, rng.uniform(*cfg.contrast_range))
        return im

    if not contrast_last:
        img = contrast(img)

    do_saturation = rng.random() < cfg.apply_p
    do_hue = rng.random() < cfg.apply_p
    if do_saturation or do_hue:
        sat = rng.uniform(*cfg.saturation_range) if do_saturation else 1.0
        hue = rng.uniform(-cfg.hue_delta, cfg.hue_delta) if do_hue else 0.0
        img = adjust_saturation_hue(img, sat, hue)

    if contrast_last:
        img = contrast(img)

    return np.clip(img, 0.0, 255.0).astype(np.float32)


def _gaussian_kernel(sigma: float) -> np.ndarray:
    taps = int(np.ceil(3.0 * sigma))
    x = np.arange(-taps, taps + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return (k / k.sum()).astype(np.float32)


def gaussian_blur(image: np.ndarray, radius: float, apply: bool = True) -> np.ndarray:
    """Separable Gaussian filter with sigma = radius, truncated at 3 sigma."""
    if not apply:
        return image
    if not radius > 0.0:
        raise ValueError("blur radius must be positive when applied")
    k = _gaussian_kernel(radius)
    img = image.astype(np.float32)
    return cv2.sepFilter2D(img, -1, k, k, borderType=cv2.BORDER_REFLECT_101)


def mirror(image: np.ndarray, label: np.ndarray | None, apply: bool = True):
    """Horizontal flip of image and label in lockstep; an involution."""
    if label is not None and label.shape[:2] != image.shape[:2]:
        raise ValueError(
            f"image {image.shape[:2]} and label {label.shape[:2]} dims differ")
    if not apply:
        return image, label
    flipped = image[:, ::-1].copy()
    flipped_label = label[:, ::-1].copy() if label is not None else None
    return flipped, flipped_label


def apply_online_transforms(image: np.ndarray, label: np.ndarray | None, seed: int,
                            pmd: PmdConfig = PmdConfig(),
                            bm: BlurMirrorConfig = BlurMirrorConfig()):
    """The full online chain for one item, deterministic under its seed."""
    rng = rng_for(seed, "online")
    image, label = mirror(image, label, apply=rng.random() < bm.mirror_p)
    if rng.random() < bm.blur_p:
        lo, hi = bm.blur_radius_range
        radius = rng.uniform(lo, hi)
        while radius <= lo:  # open interval: resample the measure-zero edge
            radius = rng.uniform(lo, hi)
        image = gaussian_blur(image, radius)
    image = photometric_distortion(image, pmd, derive_seed(seed, "online-pmd"))
    return image, label
