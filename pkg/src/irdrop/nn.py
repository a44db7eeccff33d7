"""Deterministic numpy tensor operations for inference.

Feature maps are ``(c, h, w)`` arrays and token sequences ``(n, d)`` arrays.
Convolutions use cross-correlation (no kernel flip) and the usual
``(out_c, in_c, kh, kw)`` weight layout; transposed convolutions use
``(in_c, out_c, kh, kw)``.  Every reduction runs in a fixed order, and the
output dtype follows the operands.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erf

from .errors import ShapeError

BN_EPS = 1e-5
LN_EPS = 1e-5
BICUBIC_A = -0.5


def _check_chw(x, name="x"):
    if x.ndim != 3:
        raise ShapeError(f"{name} must be (c, h, w), got shape {x.shape}")
    if x.size == 0:
        raise ShapeError(f"{name} is empty")


def _pads(padding, kh, kw):
    if padding == "same":
        if kh % 2 == 0 or kw % 2 == 0:
            raise ShapeError(f"'same' padding needs odd kernels, got {kh}x{kw}")
        return (kh - 1) // 2, (kw - 1) // 2
    if isinstance(padding, int):
        return padding, padding
    ph, pw = padding
    return int(ph), int(pw)


def conv2d(x, weight, bias=None, stride: int = 1, padding="same"):
    """2-D cross-correlation with zero padding.

    Accumulates one ``(out_c, in_c) @ (in_c, pixels)`` product per kernel tap,
    which keeps memory at one shifted view of the input.
    """
    _check_chw(x)
    out_c, in_c, kh, kw = weight.shape
    if x.shape[0] != in_c:
        raise ShapeError(f"conv2d expects {in_c} input channels, got {x.shape[0]}")
    ph, pw = _pads(padding, kh, kw)
    _, h, w = x.shape
    xp = np.pad(x, ((0, 0), (ph, ph), (pw, pw))) if ph or pw else x
    ho = (h + 2 * ph - kh) // stride + 1
    wo = (w + 2 * pw - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {h}x{w}")
    dtype = np.result_type(x, weight)
    taps = np.ascontiguousarray(weight.transpose(2, 3, 0, 1))  # (kh, kw, out_c, in_c)
    out = np.zeros((out_c, ho * wo), dtype=dtype)
    for i in range(kh):
        for j in range(kw):
            patch = xp[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride]
            out += taps[i, j] @ patch.reshape(in_c, -1)
    out = out.reshape(out_c, ho, wo)
    if bias is not None:
        out += bias[:, None, None]
    return out


def deconv2d_x2(x, weight, bias=None):
    """Stride-2 transposed convolution doubling h and w.

    Kernels are even-sized; a k x k kernel is cropped by (k - 2) / 2 on each
    side so the output is always exactly (out_c, 2h, 2w).
    """
    _check_chw(x)
    in_c, out_c, kh, kw = weight.shape
    if x.shape[0] != in_c:
        raise ShapeError(f"deconv2d expects {in_c} input channels, got {x.shape[0]}")
    if kh % 2 or kw % 2:
        raise ShapeError(f"deconv2d_x2 needs even kernels, got {kh}x{kw}")
    _, h, w = x.shape
    dtype = np.result_type(x, weight)
    full = np.zeros((out_c, 2 * (h - 1) + kh, 2 * (w - 1) + kw), dtype=dtype)
    flat = x.reshape(in_c, -1)
    taps = np.ascontiguousarray(weight.transpose(2, 3, 1, 0))  # (kh, kw, out_c, in_c)
    for i in range(kh):
        for j in range(kw):
            full[:, i:i + 2 * h:2, j:j + 2 * w:2] += (taps[i, j] @ flat).reshape(out_c, h, w)
    ph, pw = (kh - 2) // 2, (kw - 2) // 2
    out = full[:, ph:ph + 2 * h, pw:pw + 2 * w]
    if bias is not None:
        out = out + bias[:, None, None]
    return np.ascontiguousarray(out)


def maxpool2(x):
    """2x2 max pooling, stride 2; odd trailing rows/columns are dropped."""
    _check_chw(x)
    c, h, w = x.shape
    h2, w2 = h // 2, w // 2
    if h2 == 0 or w2 == 0:
        raise ShapeError(f"maxpool2 needs at least 2x2 input, got {h}x{w}")
    return x[:, :2 * h2, :2 * w2].reshape(c, h2, 2, w2, 2).max(axis=(2, 4))


def avgpool3(x):
    """3x3 average pooling, stride 1; border windows average only real pixels."""
    _check_chw(x)
    c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    ones = np.pad(np.ones((h, w), dtype=x.dtype), 1)
    total = np.zeros_like(x)
    count = np.zeros((h, w), dtype=x.dtype)
    for i in range(3):
        for j in range(3):
            total += xp[:, i:i + h, j:j + w]
            count += ones[i:i + h, j:j + w]
    return total / count


def channel_avg(x):
    _check_chw(x)
    return x.reshape(x.shape[0], -1).mean(axis=1)


def channel_max(x):
    _check_chw(x)
    return x.reshape(x.shape[0], -1).max(axis=1)


def spatial_avg(x):
    _check_chw(x)
    return x.mean(axis=0, keepdims=True)


def spatial_max(x):
    _check_chw(x)
    return x.max(axis=0, keepdims=True)


def batchnorm(x, gamma, beta, mean, var, eps: float = BN_EPS):
    """Inference-form batch norm with stored statistics."""
    scale = gamma / np.sqrt(var + eps)
    shift = beta - mean * scale
    return x * scale[:, None, None].astype(x.dtype) + shift[:, None, None].astype(x.dtype)


def relu(x):
    return np.maximum(x, 0)


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def gelu(x):
    return 0.5 * x * (1.0 + erf(x / np.sqrt(2.0)).astype(x.dtype))


def softmax(x, axis: int = -1):
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def layernorm(x, gamma=None, beta=None, eps: float = LN_EPS):
    """Normalise over the last axis, then apply the optional affine."""
    mu = x.mean(axis=-1, keepdims=True)
    var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
    y = (x - mu) / np.sqrt(var + eps)
    if gamma is not None:
        y = y * gamma
    if beta is not None:
        y = y + beta
    return y


def linear(x, weight, bias=None):
    """``x @ weight.T + bias`` with weight shaped (out, in)."""
    y = x @ weight.T
    if bias is not None:
        y = y + bias
    return y


def _cubic(t, a=BICUBIC_A):
    t = np.abs(t)
    return np.where(
        t <= 1, ((a + 2) * t - (a + 3)) * t * t + 1,
        np.where(t < 2, ((t - 5) * t + 8) * t * a - 4 * a, 0.0),
    )


def bicubic_matrix(n_in: int, n_out: int, a: float = BICUBIC_A) -> np.ndarray:
    """(n_out, n_in) interpolation matrix: half-pixel centres, edge clamped."""
    if n_in < 1 or n_out < 1:
        raise ShapeError(f"resize sizes must be >= 1, got {n_in} -> {n_out}")
    src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    base = np.floor(src).astype(np.int64)
    frac = src - base
    m = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for k in range(-1, 3):
        idx = np.clip(base + k, 0, n_in - 1)
        np.add.at(m, (rows, idx), _cubic(frac - k, a))
    return m


def bicubic_resize(x, out_h: int, out_w: int):
    """Separable cubic-convolution resize of every channel of (c, h, w)."""
    _check_chw(x)
    c, h, w = x.shape
    if (h, w) == (out_h, out_w):
        return x.copy()
    my = bicubic_matrix(h, out_h).astype(x.dtype)
    mx = bicubic_matrix(w, out_w).astype(x.dtype)
    return np.einsum("oh,chw,pw->cop", my, x, mx, optimize=True)


def mhsa(x, p, heads: int, return_attention: bool = False):
    """Multi-head scaled dot-product self-attention over tokens (n, d)."""
    n, d = x.shape
    if d % heads:
        raise ShapeError(f"token dim {d} not divisible by {heads} heads")
    hd = d // heads
    q = linear(x, p["wq"], p.get("bq")).reshape(n, heads, hd).transpose(1, 0, 2)
    k = linear(x, p["wk"], p.get("bk")).reshape(n, heads, hd).transpose(1, 0, 2)
    v = linear(x, p["wv"], p.get("bv")).reshape(n, heads, hd).transpose(1, 0, 2)
    att = softmax(q @ k.transpose(0, 2, 1) / np.sqrt(hd).astype(x.dtype), axis=-1)
    ctx = (att @ v).transpose(1, 0, 2).reshape(n, d)
    out = linear(ctx, p["wo"], p.get("bo"))
    return (out, att) if return_attention else out


def mhsa_block(x, p, heads: int, return_attention: bool = False):
    """Pre-norm transformer layer: ``x + MHSA(LN(x))`` then ``+ MLP(LN(.))``.

    ``p`` keys: ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b,
    fc1_w, fc1_b, fc2_w, fc2_b.  The MLP uses GELU.
    """
    if x.ndim != 2:
        raise ShapeError(f"tokens must be (n, d), got {x.shape}")
    a, att = mhsa(layernorm(x, p["ln1_g"], p["ln1_b"]), p, heads, return_attention=True)
    x = x + a
    hidden = gelu(linear(layernorm(x, p["ln2_g"], p["ln2_b"]), p["fc1_w"], p["fc1_b"]))
    x = x + linear(hidden, p["fc2_w"], p["fc2_b"])
    return (x, att) if return_attention else x
