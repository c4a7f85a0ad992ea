"""Texture-complexity scoring of style images.

An image's complexity score is the fraction of pixels whose combined
squared gradient falls below a threshold, computed on a grayscale
512x512 square-center crop. Scores are binned into low / medium / high
pools that can be sampled reproducibly.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .imops import center_square_crop, resize_bilinear, to_gray601
from .seeding import rng_for

SENTINEL_COLOR = (255, 0, 255)


class Bin(str, Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"


# Half-open score intervals, except the last which includes 1.0.
DEFAULT_BINS = ((Bin.LOW, 0.0, 0.5), (Bin.MEDIUM, 0.5, 0.75), (Bin.HIGH, 0.75, 1.0))


@dataclass(frozen=True)
class TcpsConfig:
    epsilon: float = 20.0
    eval_size: int = 512
    bins: tuple = DEFAULT_BINS

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.eval_size < 1:
            raise ValueError("eval_size must be positive")


@dataclass(frozen=True)
class ComplexityScore:
    score: float
    bin: Bin


def bin_for_score(score: float, cfg: TcpsConfig = TcpsConfig()) -> Bin:
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"score {score} outside [0, 1]")
    for name, lo, hi in cfg.bins:
        if lo <= score < hi:
            return name
    return cfg.bins[-1][0]  # score == upper edge of the last interval


def gradient_map(gray: np.ndarray, size: int = 512) -> np.ndarray:
    """Combined squared first differences of a grayscale image.

    grad_x(i, j) = I(i+1, j) - I(i, j) (zero in the last row) and
    grad_y(i, j) = I(i, j+1) - I(i, j) (zero in the last column);
    returns grad_x**2 + grad_y**2 at the input size.
    """
    if gray.shape != (size, size):
        raise ValueError(f"expected {size}x{size} grayscale input, got {gray.shape}")
    g = gray.astype(np.float64)
    gx = np.zeros_like(g)
    gy = np.zeros_like(g)
    gx[:-1, :] = g[1:, :] - g[:-1, :]
    gy[:, :-1] = g[:, 1:] - g[:, :-1]
    return gx * gx + gy * gy


def _eval_gray(image: np.ndarray, cfg: TcpsConfig) -> np.ndarray:
    """Square-center crop, resize to eval size, convert to grayscale."""
    if image.size == 0 or min(image.shape[:2]) < 1:
        raise ValueError("empty image")
    crop = center_square_crop(image)
    resized = resize_bilinear(crop, cfg.eval_size, cfg.eval_size)
    if resized.ndim == 3:
        return to_gray601(resized)
    return resized.astype(np.float64)


def complexity(image: np.ndarray, cfg: TcpsConfig = TcpsConfig()) -> ComplexityScore:
    """Smooth-pixel fraction of the image and its complexity bin."""
    gray = _eval_gray(image, cfg)
    grad = gradient_map(gray, cfg.eval_size)
    smooth = int(np.count_nonzero(grad < cfg.epsilon))
    score = smooth / float(cfg.eval_size * cfg.eval_size)
    return ComplexityScore(score=score, bin=bin_for_score(score, cfg))


def smooth_mask(image: np.ndarray, cfg: TcpsConfig = TcpsConfig()):
    """Split the evaluated crop into smooth and unsmooth renderings.

    Returns (smooth_image, unsmooth_image) at the eval size; pixels not
    belonging to each mask are painted with the sentinel color. The two
    masks partition the image exactly.
    """
    if image.ndim != 3:
        raise ValueError("smooth_mask expects an RGB image")
    crop = center_square_crop(image)
    resized = resize_bilinear(crop, cfg.eval_size, cfg.eval_size)
    grad = gradient_map(to_gray601(resized), cfg.eval_size)
    mask = grad < cfg.epsilon
    sentinel = np.array(SENTINEL_COLOR, dtype=resized.dtype)
    smooth_img = np.where(mask[..., None], resized, sentinel)
    unsmooth_img = np.where(mask[..., None], sentinel, resized)
    return smooth_img, unsmooth_img


def partition_pool(records, cfg: TcpsConfig = TcpsConfig()) -> dict:
    """Group scored style records into disjoint per-bin sub-pools."""
    pools = {name: [] for name, _, _ in cfg.bins}
    for rec in records:
        if rec.score is None:
            raise ValueError(f"record {rec.id!r} has no complexity score")
        pools[rec.score.bin].append(rec)
    return pools


def sample_bin(pool: list, k: int, seed: int, label: str = "") -> list:
    """Seeded sampling of k records without replacement, order-stable."""
    if k > len(pool):
        raise ValueError(f"requested {k} records from a bin of {len(pool)}")
    rng = rng_for(seed, "tcps-bin-sample", label)
    idx = rng.choice(len(pool), size=k, replace=False)
    return [pool[i] for i in sorted(idx)]


# Scores file: one record per line, tab-separated "id path score bin".

def write_scores(path, records) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for rec in records:
            f.write(f"{rec.id}\t{rec.path}\t{rec.score.score:.6f}\t{rec.score.bin.value}\n")


def read_scores(path) -> list:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            rec_id, rec_path, score, bin_name = line.split("\t")
            out.append((rec_id, rec_path,
                        ComplexityScore(score=float(score), bin=Bin(bin_name))))
    return out
