"""Minimal dense-tensor kernels for the embedded CNN inference engine.

Public operations work on the NCHW :class:`Tensor` type. The performance
paths are NHWC kernels (``*_nhwc``) built around accumulating BLAS sgemm
calls on contiguous views, which the network runner uses directly to avoid
layout churn between layers.

All kernels are pure functions; float32 throughout.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import blas

__all__ = [
    "Tensor",
    "ConvSpec",
    "conv2d",
    "reflection_pad",
    "relu",
    "maxpool2",
    "upsample_nearest2",
]


class Tensor:
    """Rank-4 (batch, channels, height, width) float32 array, C-contiguous."""

    __slots__ = ("array",)

    def __init__(self, array: np.ndarray):
        arr = np.ascontiguousarray(array, dtype=np.float32)
        if arr.ndim != 4:
            raise ValueError(f"Tensor must be rank 4, got shape {arr.shape}")
        if any(d < 1 for d in arr.shape):
            raise ValueError(f"all Tensor dims must be >= 1, got {arr.shape}")
        self.array = arr

    @property
    def dims(self) -> tuple:
        return self.array.shape

    def __repr__(self) -> str:
        return f"Tensor(dims={self.array.shape})"


@dataclass(frozen=True)
class ConvSpec:
    """A 3x3 or 1x1 stride-1 convolution layer: weight (out, in, k, k), bias (out,)."""

    in_channels: int
    out_channels: int
    kernel: int
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.kernel not in (1, 3):
            raise ValueError(f"kernel must be 1 or 3, got {self.kernel}")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError("channel counts must be positive")
        expect = (self.out_channels, self.in_channels, self.kernel, self.kernel)
        if self.weight.shape != expect:
            raise ValueError(f"weight shape {self.weight.shape} != {expect}")
        if self.bias.shape != (self.out_channels,):
            raise ValueError(f"bias shape {self.bias.shape} != ({self.out_channels},)")


# ---------------------------------------------------------------------------
# NHWC kernels (performance path)
# ---------------------------------------------------------------------------

# Below this many input channels the shifted-gemm K dim is too small for
# BLAS to be efficient; fall back to im2col (K = 9*C).
_IM2COL_MAX_C = 16
# Below this many output channels the gemm N dim is too small; use the
# widened-gemm (N = 9*O) + shifted-accumulate path instead.
_SCATTER_MAX_O = 16


class BufferPool:
    """Thread-confined recycler of large float32 scratch buffers.

    Fresh anonymous allocations of hundreds of megabytes pay a page-fault
    tax on first touch every layer; reusing warmed buffers across layers
    and calls removes it. Kernels that accept a pool still behave as pure
    functions of their inputs.
    """

    def __init__(self, max_bytes: int = 1 << 30):
        self._free = []
        self._max_bytes = max_bytes

    def take(self, size: int) -> np.ndarray:
        """Smallest pooled 1-D float32 buffer of at least ``size`` elements."""
        best = None
        for i, arr in enumerate(self._free):
            if arr.size >= size and (best is None or arr.size < self._free[best].size):
                best = i
        if best is not None:
            return self._free.pop(best)
        return np.empty(size, np.float32)

    def give(self, arr: np.ndarray) -> None:
        """Return a contiguous base array for later reuse."""
        arr = arr.reshape(-1)
        if (sum(a.size for a in self._free) + arr.size) * 4 <= self._max_bytes:
            self._free.append(arr)


def base_of(arr: np.ndarray) -> np.ndarray:
    """Root base array a view ultimately refers to (itself if not a view)."""
    while arr.base is not None:
        arr = arr.base
    return arr


def _alloc(pool, shape) -> np.ndarray:
    size = 1
    for d in shape:
        size *= int(d)
    if pool is None:
        return np.empty(shape, np.float32)
    return pool.take(size)[:size].reshape(shape)


def _fill_pad_border(out: np.ndarray) -> None:
    """Reflect the single-pixel border of a padded map from its interior."""
    out[0, 1:-1] = out[2, 1:-1]
    out[-1, 1:-1] = out[-3, 1:-1]
    out[:, 0] = out[:, 2]
    out[:, -1] = out[:, -3]


def conv3x3_nhwc(x: np.ndarray, w: np.ndarray, b: np.ndarray, fuse_relu: bool = False,
                 emit_pad: bool = False, pool: BufferPool | None = None) -> np.ndarray:
    """Valid (unpadded) 3x3 stride-1 convolution.

    x: (H, W, C) C-contiguous float32; w: (3, 3, C, O); b: (O,).
    Returns (H-2, W-2, O); the result may be a strided view into a larger
    buffer, callers needing contiguity must copy. With ``emit_pad`` the
    result is instead returned reflection-padded by one pixel, i.e. with
    the input's spatial dims, fusing the pad that would otherwise follow.
    """
    H, W, C = x.shape
    O = w.shape[3]
    if H < 3 or W < 3:
        raise ValueError(f"input {H}x{W} smaller than 3x3 kernel")
    x = np.ascontiguousarray(x)

    if C < _IM2COL_MAX_C:
        out = _conv3x3_im2col(x, w, b, fuse_relu, emit_pad, pool)
    elif O < _SCATTER_MAX_O:
        out = _conv3x3_scatter(x, w, b, fuse_relu, emit_pad, pool)
    else:
        out = _conv3x3_shift_gemm(x, w, b, fuse_relu, emit_pad, pool)

    if emit_pad:
        _fill_pad_border(out)
    return out


def _finish_block(cb, b, fuse_relu):
    """Bias + relu applied per block while it is still cache-resident."""
    cb += b
    if fuse_relu:
        np.maximum(cb, 0.0, out=cb)


# Output pixels per gemm block. The nine per-tap accumulations re-touch the
# same output block, so it is sized to stay resident in L2 between them.
_BLOCK_PIXELS = 4096


def _conv_out(x, O, emit_pad, pool):
    """Flat output view for the width-junk trick, plus the array to return.

    Valid results for output pixel (r, j) land at flat row r*W + j of a
    width-W row layout, so the two trailing columns of each row collect
    wrap-around junk. Starting the flat view at W+1 instead centers the
    valid region in an (H, W, O) buffer: the junk falls exactly on the
    one-pixel border that ``emit_pad`` later refills with reflection.
    """
    H, W, _ = x.shape
    Ho, Wo = H - 2, W - 2
    n = Ho * W - 2
    if emit_pad:
        out = _alloc(pool, (H, W, O))
        return out, out.reshape(-1, O)[W + 1:W + 1 + n], n
    out = _alloc(pool, (Ho * W, O))
    return out.reshape(Ho, W, O)[:, :Wo], out.reshape(-1, O)[:n], n


def _conv3x3_shift_gemm(x, w, b, fuse_relu, emit_pad, pool) -> np.ndarray:
    """9 accumulating sgemms over contiguous flat views; no im2col copies."""
    H, W, C = x.shape
    O = w.shape[3]
    xf = x.reshape(-1, C)
    out, cf, n = _conv_out(x, O, emit_pad, pool)
    for start in range(0, n, _BLOCK_PIXELS):
        m = min(_BLOCK_PIXELS, n - start)
        cb = cf[start:start + m]
        first = True
        for dr in range(3):
            for dj in range(3):
                off = dr * W + dj + start
                # Fortran view trick: compute out^T = w^T @ x^T in place.
                blas.sgemm(1.0, w[dr, dj].T, xf[off:off + m].T,
                           0.0 if first else 1.0, cb.T, overwrite_c=1)
                first = False
        _finish_block(cb, b, fuse_relu)
    return out


def _conv3x3_im2col(x, w, b, fuse_relu, emit_pad, pool) -> np.ndarray:
    """Blocked im2col gemm; only used when C is small (K = 9*C stays modest)."""
    H, W, C = x.shape
    O = w.shape[3]
    xf = x.reshape(-1, C)
    wm = w.reshape(9 * C, O)
    out, cf, n = _conv_out(x, O, emit_pad, pool)
    nb = min(_BLOCK_PIXELS, n)
    patch = _alloc(pool, (nb, 9, C))
    for start in range(0, n, nb):
        m = min(nb, n - start)
        cb = cf[start:start + m]
        for dr in range(3):
            for dj in range(3):
                off = dr * W + dj + start
                patch[:m, dr * 3 + dj, :] = xf[off:off + m]
        np.matmul(patch[:m].reshape(m, 9 * C), wm, out=cb)
        _finish_block(cb, b, fuse_relu)
    if pool is not None:
        pool.give(base_of(patch))
    return out


def _conv3x3_scatter(x, w, b, fuse_relu, emit_pad, pool) -> np.ndarray:
    """Widened gemm (N = 9*O) followed by shifted accumulation.

    Efficient when O is small (e.g. the final image-projection layer):
    the gemm keeps K = C large while the accumulate touches only O
    channels per shift. Blocks recompute a 2W+2-row overlap so the wide
    intermediate stays cache-resident.
    """
    H, W, C = x.shape
    O = w.shape[3]
    xf = x.reshape(-1, C)
    wm = np.ascontiguousarray(w.transpose(2, 0, 1, 3).reshape(C, 9 * O))
    out, cf, n = _conv_out(x, O, emit_pad, pool)
    reach = 2 * W + 2
    nb = max(_BLOCK_PIXELS, 4 * reach)
    y = _alloc(pool, (min(nb, n) + reach, 9 * O))
    for start in range(0, n, nb):
        m = min(nb, n - start)
        np.matmul(xf[start:start + m + reach], wm, out=y[:m + reach])
        cb = cf[start:start + m]
        cb[:] = y[:m, :O]
        for s in range(1, 9):
            off = (s // 3) * W + s % 3
            cb += y[off:off + m, s * O:(s + 1) * O]
        _finish_block(cb, b, fuse_relu)
    if pool is not None:
        pool.give(base_of(y))
    return out


def conv1x1_nhwc(x: np.ndarray, w: np.ndarray, b: np.ndarray, fuse_relu: bool = False,
                 emit_pad: bool = False, pool: BufferPool | None = None) -> np.ndarray:
    """Pointwise convolution: x (H, W, C), w (1, 1, C, O) or (C, O)."""
    H, W, C = x.shape
    wm = w.reshape(C, -1)
    O = wm.shape[1]
    out = np.ascontiguousarray(x).reshape(-1, C) @ wm
    out += b
    if fuse_relu:
        np.maximum(out, 0.0, out=out)
    if emit_pad:
        padded = _alloc(pool, (H + 2, W + 2, O))
        padded[1:-1, 1:-1] = out.reshape(H, W, O)
        _fill_pad_border(padded)
        return padded
    return out.reshape(H, W, O)


def pad_reflect_nhwc(x: np.ndarray, pad: int,
                     pool: BufferPool | None = None) -> np.ndarray:
    """Reflection padding (no edge repeat) of an (H, W, C) map."""
    H, W, C = x.shape
    if pad == 0:
        return x
    if pad >= H or pad >= W:
        raise ValueError(f"pad {pad} too large for {H}x{W} input")
    out = _alloc(pool, (H + 2 * pad, W + 2 * pad, C))
    out[pad:pad + H, pad:pad + W] = x
    for k in range(pad):
        out[pad - 1 - k, pad:pad + W] = x[k + 1]
        out[pad + H + k, pad:pad + W] = x[H - 2 - k]
    for k in range(pad):
        out[:, pad - 1 - k] = out[:, pad + 1 + k]
        out[:, pad + W + k] = out[:, pad + W - 2 - k]
    return out


def maxpool2_nhwc(x: np.ndarray, emit_pad: bool = False,
                  pool: BufferPool | None = None) -> np.ndarray:
    """2x2/stride-2 max pooling with ceiling semantics on odd dims.

    Trailing windows on odd dims cover a single row/column. Accepts
    strided views; with ``emit_pad`` the output carries a one-pixel
    reflection border.
    """
    H, W, C = x.shape
    Ho, Wo = (H + 1) // 2, (W + 1) // 2
    He, We = H // 2, W // 2
    if emit_pad:
        out = _alloc(pool, (Ho + 2, Wo + 2, C))
        o = out[1:-1, 1:-1]
    else:
        out = o = _alloc(pool, (Ho, Wo, C))
    body = o[:He, :We]
    np.maximum(x[0:2 * He:2, 0:2 * We:2], x[0:2 * He:2, 1:2 * We:2], out=body)
    np.maximum(body, x[1:2 * He:2, 0:2 * We:2], out=body)
    np.maximum(body, x[1:2 * He:2, 1:2 * We:2], out=body)
    if W % 2:
        np.maximum(x[0:2 * He:2, W - 1], x[1:2 * He:2, W - 1], out=o[:He, We])
    if H % 2:
        np.maximum(x[H - 1, 0:2 * We:2], x[H - 1, 1:2 * We:2], out=o[Ho - 1, :We])
        if W % 2:
            o[Ho - 1, We] = x[H - 1, W - 1]
    if emit_pad:
        _fill_pad_border(out)
    return out


def upsample2_nhwc(x: np.ndarray, emit_pad: bool = False,
                   pool: BufferPool | None = None) -> np.ndarray:
    """Nearest-neighbour 2x upsampling: each pixel becomes a 2x2 block.

    Widths are doubled into a scratch map first so that the row doubling
    runs as whole-row copies instead of pixel-interleaved writes.
    """
    H, W, C = x.shape
    if emit_pad:
        out = _alloc(pool, (2 * H + 2, 2 * W + 2, C))
        o = out[1:-1, 1:-1]
    else:
        out = o = _alloc(pool, (2 * H, 2 * W, C))
    wide = _alloc(pool, (H, W, 2, C))
    wide[:, :, 0] = x
    wide[:, :, 1] = x
    flat = wide.reshape(H, 2 * W, C)
    o[0::2] = flat
    o[1::2] = flat
    if pool is not None:
        pool.give(base_of(wide))
    if emit_pad:
        _fill_pad_border(out)
    return out


# ---------------------------------------------------------------------------
# Public NCHW operations
# ---------------------------------------------------------------------------

def _nhwc(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x.transpose(1, 2, 0))


def _nchw(x: np.ndarray) -> np.ndarray:
    return x.transpose(2, 0, 1)


def conv2d(input: Tensor, spec: ConvSpec) -> Tensor:
    """Unpadded stride-1 convolution of every batch item."""
    N, C, H, W = input.dims
    if C != spec.in_channels:
        raise ValueError(f"input has {C} channels, spec expects {spec.in_channels}")
    if H < spec.kernel or W < spec.kernel:
        raise ValueError(f"input {H}x{W} smaller than {spec.kernel}x{spec.kernel} kernel")
    w_nhwc = np.ascontiguousarray(spec.weight.transpose(2, 3, 1, 0), dtype=np.float32)
    bias = np.ascontiguousarray(spec.bias, dtype=np.float32)
    outs = []
    for i in range(N):
        x = _nhwc(input.array[i])
        if spec.kernel == 1:
            y = conv1x1_nhwc(x, w_nhwc, bias)
        else:
            y = conv3x3_nhwc(x, w_nhwc, bias)
        outs.append(_nchw(y))
    return Tensor(np.stack(outs))


def reflection_pad(input: Tensor, pad: int) -> Tensor:
    """Grow spatial dims by 2*pad, mirroring without repeating the edge pixel."""
    if pad < 0:
        raise ValueError("pad must be non-negative")
    N, C, H, W = input.dims
    if pad >= min(H, W):
        raise ValueError(f"pad {pad} must be < min(H, W) = {min(H, W)}")
    if pad == 0:
        return input
    return Tensor(np.stack([_nchw(pad_reflect_nhwc(_nhwc(input.array[i]), pad))
                            for i in range(N)]))


def relu(input: Tensor) -> Tensor:
    """Elementwise max(value, 0)."""
    return Tensor(np.maximum(input.array, 0.0))


def maxpool2(input: Tensor) -> Tensor:
    """2x2 stride-2 max pooling; output size = ceil(size / 2) per spatial dim."""
    N = input.dims[0]
    return Tensor(np.stack([_nchw(maxpool2_nhwc(_nhwc(input.array[i])))
                            for i in range(N)]))


def upsample_nearest2(input: Tensor) -> Tensor:
    """Replicate each pixel into a 2x2 block; spatial dims exactly double."""
    N = input.dims[0]
    return Tensor(np.stack([_nchw(upsample2_nhwc(_nhwc(input.array[i])))
                            for i in range(N)]))
