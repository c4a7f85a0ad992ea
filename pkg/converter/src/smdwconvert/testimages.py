"""Deterministic synthetic test images for the fixture bundle."""

import numpy as np


def content_image(side: int = 256) -> np.ndarray:
    """Structured scene stand-in: sky/ground gradient with blocky shapes."""
    y, x = np.mgrid[0:side, 0:side].astype(np.float32) / (side - 1)
    img = np.stack([0.3 + 0.4 * y, 0.5 - 0.2 * y, 0.8 - 0.6 * y], axis=-1)
    img[int(side * 0.55):, :] = (0.35, 0.33, 0.3)  # ground plane
    rng = np.random.default_rng(1234)
    for _ in range(12):  # buildings / obstacles
        w, h = rng.integers(side // 16, side // 4, size=2)
        x0 = rng.integers(0, side - w)
        y0 = rng.integers(side // 4, side - h)
        img[y0:y0 + h, x0:x0 + w] = rng.uniform(0.1, 0.9, size=3)
    img += rng.normal(0.0, 0.015, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def style_image(side: int = 256) -> np.ndarray:
    """Painterly stand-in: overlapping color waves with brush-like noise."""
    y, x = np.mgrid[0:side, 0:side].astype(np.float32) / side
    rng = np.random.default_rng(4321)
    img = np.zeros((side, side, 3), dtype=np.float32)
    for c in range(3):
        fx, fy, phase = rng.uniform(2, 9), rng.uniform(2, 9), rng.uniform(0, 6)
        img[..., c] = 0.5 + 0.35 * np.sin(2 * np.pi * (fx * x + fy * y) + phase)
    img += rng.normal(0.0, 0.05, size=img.shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)
