"""Dense forward operations and their hand-derived gradients.

Every op is a pure function of ndarrays. The test suite checks each
backward against central finite differences in float64; training runs
in float32 by default.
"""

from __future__ import annotations

import numpy as np

from multires.errors import (
    ConfigError,
    DegenerateVectorError,
    EmptyInputError,
    NumericalError,
    ShapeError,
)
from multires.numerics import kernels

NORM_FLOOR = 1e-12


def as_tensor(data, dtype=None, checked: bool = False) -> np.ndarray:
    """Array constructor; in checked mode rejects NaN/Inf entries."""
    arr = np.asarray(data, dtype=dtype)
    if checked and not np.all(np.isfinite(arr)):
        raise NumericalError("non-finite entries in tensor")
    return arr


def _common_dtype(*arrays: np.ndarray) -> np.dtype:
    return np.result_type(*arrays)


def _check_conv_shapes(inp: np.ndarray, kern: np.ndarray, bias: np.ndarray) -> None:
    if inp.ndim != 2:
        raise ShapeError(f"conv input must be k x d_in, got shape {inp.shape}")
    if kern.ndim != 3:
        raise ShapeError(f"kernels must be n_k x ws x d_in, got shape {kern.shape}")
    if bias.ndim != 1 or bias.shape[0] != kern.shape[0]:
        raise ShapeError(f"bias shape {bias.shape} does not match {kern.shape[0]} kernels")
    if kern.shape[1] % 2 == 0:
        raise ConfigError(f"conv window must be odd, got ws={kern.shape[1]}")
    if kern.shape[2] != inp.shape[1]:
        raise ShapeError(
            f"kernel feature dim {kern.shape[2]} does not match input columns {inp.shape[1]}"
        )


def conv1d_same(inp: np.ndarray, kern: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """Zero-padded "same" 1-D convolution: (k,d_in) x (n_k,ws,d_in) -> (k,n_k).

    out[t, c] = bias[c] + sum_{s,f} inp[t+s-pad, f] * kern[c, s, f],
    rows outside [0, k) read as zero, pad = (ws-1)//2.
    """
    _check_conv_shapes(inp, kern, bias)
    dt = _common_dtype(inp, kern, bias)
    out = kernels.conv_forward(
        inp[None].astype(dt, copy=False),
        kern.astype(dt, copy=False),
        bias.astype(dt, copy=False),
    )
    return out[0]


def conv1d_same_backward(
    inp: np.ndarray, kern: np.ndarray, bias: np.ndarray, upstream: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exact gradients of conv1d_same; returns (grad_input, grad_kernels, grad_bias)."""
    _check_conv_shapes(inp, kern, bias)
    if upstream.shape != (inp.shape[0], kern.shape[0]):
        raise ShapeError(
            f"upstream shape {upstream.shape} does not match ({inp.shape[0]}, {kern.shape[0]})"
        )
    dt = _common_dtype(inp, kern, upstream)
    gx, gw, gb = kernels.conv_backward(
        inp[None].astype(dt, copy=False),
        kern.astype(dt, copy=False),
        upstream[None].astype(dt, copy=False),
    )
    return gx[0], gw, gb


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(x, 0)."""
    return np.maximum(x, 0)


def relu_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Pass upstream where x > 0, zero elsewhere (subgradient 0 at 0)."""
    if x.shape != upstream.shape:
        raise ShapeError(f"upstream shape {upstream.shape} does not match input {x.shape}")
    return np.where(x > 0, upstream, 0)


def mean_over_positions(x: np.ndarray) -> np.ndarray:
    """Column-wise mean of a (k,d) matrix; k must be >= 1."""
    if x.ndim != 2:
        raise ShapeError(f"expected k x d matrix, got shape {x.shape}")
    if x.shape[0] == 0:
        raise EmptyInputError("mean over zero positions")
    return x.mean(axis=0)


def mean_over_positions_backward(upstream: np.ndarray, k: int) -> np.ndarray:
    """Distribute upstream/k to every one of the k rows."""
    if k < 1:
        raise EmptyInputError("mean over zero positions")
    return np.broadcast_to(upstream / k, (k, upstream.shape[0])).copy()


def l2_normalize(v: np.ndarray, norm_floor: float = NORM_FLOOR) -> np.ndarray:
    """v / ||v||; rejects vectors with norm at or below the floor."""
    norm = float(np.linalg.norm(v))
    if norm <= norm_floor:
        raise DegenerateVectorError(f"vector norm {norm:g} at or below floor {norm_floor:g}")
    return v / norm


def l2_normalize_backward(
    v: np.ndarray, upstream: np.ndarray, norm_floor: float = NORM_FLOOR
) -> np.ndarray:
    """Jacobian-transpose product (I - y y^T) g / ||v|| with y = v/||v||."""
    if v.shape != upstream.shape:
        raise ShapeError(f"upstream shape {upstream.shape} does not match input {v.shape}")
    norm = float(np.linalg.norm(v))
    if norm <= norm_floor:
        raise DegenerateVectorError(f"vector norm {norm:g} at or below floor {norm_floor:g}")
    y = v / norm
    return (upstream - y * np.dot(y, upstream)) / norm
