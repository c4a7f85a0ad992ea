"""Image I/O and shared raster helpers (RGB, bilinear resize, crops)."""

import numpy as np
from PIL import Image

import cv2


def load_rgb(path) -> np.ndarray:
    """Read an image file as (H, W, 3) uint8 RGB."""
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"))


def save_rgb(path, image: np.ndarray) -> None:
    """Write (H, W, 3) uint8 RGB losslessly (format from extension)."""
    Image.fromarray(np.ascontiguousarray(image)).save(path)


def load_label(path) -> np.ndarray:
    """Read a single-channel integer label image."""
    with Image.open(path) as im:
        arr = np.asarray(im)
    if arr.ndim == 3:
        arr = arr[..., 0]
    return arr.astype(np.int64)


def save_label(path, label: np.ndarray) -> None:
    Image.fromarray(label.astype(np.uint8), mode="L").save(path)


def to_unit(image: np.ndarray) -> np.ndarray:
    """uint8 [0, 255] -> float32 [0, 1]."""
    return image.astype(np.float32) / 255.0


def to_uint8(image: np.ndarray) -> np.ndarray:
    """float32 [0, 1] -> rounded uint8."""
    return np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)


def resize_bilinear(image: np.ndarray, width: int, height: int) -> np.ndarray:
    if image.shape[1] == width and image.shape[0] == height:
        return image
    return cv2.resize(image, (width, height), interpolation=cv2.INTER_LINEAR)


def center_square_crop(image: np.ndarray) -> np.ndarray:
    """Largest square crop centered in the image."""
    h, w = image.shape[:2]
    side = min(h, w)
    y0 = (h - side) // 2
    x0 = (w - side) // 2
    return image[y0:y0 + side, x0:x0 + side]


def to_gray601(image: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an (H, W, 3) RGB image, float64, same value scale.

    Kept in double precision: the complexity score thresholds squared
    gradients and must match unvectorized reference arithmetic exactly.
    """
    img = image.astype(np.float64)
    return img[..., 0] * 0.299 + img[..., 1] * 0.587 + img[..., 2] * 0.114
