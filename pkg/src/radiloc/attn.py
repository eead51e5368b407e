"""Triplet attention on dense (B, C, H, W) float64 arrays, forward and backward.

Each branch rotates the input so a different pair of axes forms the spatial
plane, compresses the leading (non-batch) axis with Z-pool (max and mean),
runs a 2 -> 1 channel convolution and a sigmoid, and scales the rotated
input by the resulting gate before rotating back:

    branch "cw": rotate in the (C, W) plane -> gate over (H, C)
    branch "ch": rotate in the (C, H) plane -> gate over (C, W)
    branch "hw": no rotation                -> gate over (H, W)

The output is the mean of the three gated copies. Because rotation only
permutes entries, each branch equals ``x * G_b`` with ``G_b`` the gate
broadcast and rotated back, so the forward pass averages the gates first
and multiplies once: ``y = x * (G_1 + G_2 + G_3) / 3``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError

PLANES = {"cw": (1, 3), "ch": (1, 2), "hw": None}
BRANCHES = ("cw", "ch", "hw")
DEFAULT_KERNEL = 7
MAX_GRADCHECK_EXTENT = 8


def as_tensor4(x):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 4:
        raise InputError(f"expected a rank-4 (B, C, H, W) tensor, got shape {x.shape}")
    if min(x.shape) < 1:
        raise InputError(f"tensor dims must be >= 1, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InputError("tensor entries must be finite")
    return x


def _plane(plane):
    if plane is None or plane == "none":
        return None
    if isinstance(plane, str):
        if plane not in PLANES:
            raise InputError(f"unknown rotation plane {plane!r}")
        return PLANES[plane]
    plane = tuple(plane)
    if plane not in ((1, 3), (1, 2)):
        raise InputError(f"rotation plane must be (C, W)=(1, 3) or (C, H)=(1, 2), got {plane}")
    return plane


def rotate90(x, plane, direction=1):
    """Rotate by 90 degrees in ``plane``; ``direction=1`` is anticlockwise, -1 undoes it.

    The batch axis is never touched.
    """
    axes = _plane(plane)
    if direction not in (1, -1):
        raise InputError("direction must be 1 or -1")
    if axes is None:
        return np.array(x, dtype=np.float64, copy=True)
    return np.ascontiguousarray(np.rot90(x, k=direction, axes=axes))


def zpool(x, axis=1):
    """Stack max and mean over ``axis``; that axis ends up with extent 2."""
    return np.concatenate([x.max(axis=axis, keepdims=True),
                           x.mean(axis=axis, keepdims=True)], axis=axis)


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _windows(x, k):
    """Read-only (B, C, H, W, k, k) view of every zero-padded k x k patch."""
    pad = (k - 1) // 2
    b, c, h, w = x.shape
    xp = np.zeros((b, c, h + 2 * pad, w + 2 * pad))
    xp[:, :, pad:pad + h, pad:pad + w] = x
    st = xp.strides
    return np.lib.stride_tricks.as_strided(xp, (b, c, h, w, k, k), st + st[2:], writeable=False)


def _im2col(x, k):
    win = _windows(x, k)
    b, c, h, w = x.shape
    return np.ascontiguousarray(win.transpose(0, 2, 3, 1, 4, 5)).reshape(b * h * w, c * k * k)


def _check_kernel(x, kernel):
    if kernel.ndim != 4 or kernel.shape[2] != kernel.shape[3]:
        raise InputError(f"kernel must have shape (O, I, k, k), got {kernel.shape}")
    if kernel.shape[2] % 2 == 0:
        raise ConfigError(f"kernel size must be odd, got {kernel.shape[2]}")
    if kernel.shape[1] != x.shape[1]:
        raise InputError(f"kernel expects {kernel.shape[1]} input channels, got {x.shape[1]}")


def conv2d(x, kernel, bias):
    """Zero-padded 'same' cross-correlation, stride 1. kernel is (O, I, k, k)."""
    kernel = np.asarray(kernel, dtype=np.float64)
    bias = np.asarray(bias, dtype=np.float64).reshape(-1)
    _check_kernel(x, kernel)
    b, _, h, w = x.shape
    cols = _im2col(x, kernel.shape[2])
    out = (cols @ kernel.reshape(kernel.shape[0], -1).T + bias).reshape(b, h, w, -1)
    return out.transpose(0, 3, 1, 2)


def conv2d_backward(x, kernel, dout):
    """Gradients ``(dx, dkernel, dbias)`` of a same-padded cross-correlation."""
    k = kernel.shape[2]
    pad = (k - 1) // 2
    dflat = dout.transpose(0, 2, 3, 1).reshape(-1, dout.shape[1])
    dkernel = (dflat.T @ _im2col(x, k)).reshape(kernel.shape)
    dbias = dout.sum(axis=(0, 2, 3))
    b, c, h, w = x.shape
    dxp = np.zeros((b, c, h + 2 * pad, w + 2 * pad))
    for u in range(k):
        for v in range(k):
            dxp[:, :, u:u + h, v:v + w] += np.einsum("bohw,oi->bihw", dout, kernel[:, :, u, v])
    return dxp[:, :, pad:pad + h, pad:pad + w], dkernel, dbias


@dataclass(frozen=True)
class TripletParams:
    """Three (1, 2, k, k) kernels and three scalar biases, one per branch."""

    kernels: tuple
    biases: tuple

    def __post_init__(self):
        if len(self.kernels) != 3 or len(self.biases) != 3:
            raise InputError("triplet attention needs exactly three kernels and biases")
        ks = []
        for kern in self.kernels:
            kern = np.array(kern, dtype=np.float64)
            if kern.ndim != 4 or kern.shape[:2] != (1, 2) or kern.shape[2] != kern.shape[3]:
                raise InputError(f"each kernel must be (1, 2, k, k), got {kern.shape}")
            if kern.shape[2] % 2 == 0:
                raise ConfigError(f"kernel size must be odd, got {kern.shape[2]}")
            kern.setflags(write=False)
            ks.append(kern)
        if len({kern.shape for kern in ks}) != 1:
            raise InputError("all three kernels must share one size")
        object.__setattr__(self, "kernels", tuple(ks))
        object.__setattr__(self, "biases", tuple(float(b) for b in self.biases))

    @property
    def k(self):
        return self.kernels[0].shape[2]

    @classmethod
    def zeros(cls, k=DEFAULT_KERNEL):
        return cls(tuple(np.zeros((1, 2, k, k)) for _ in range(3)), (0.0, 0.0, 0.0))

    @classmethod
    def random(cls, k=DEFAULT_KERNEL, rng=None, scale=None):
        rng = np.random.default_rng(rng)
        bound = scale if scale is not None else 1.0 / np.sqrt(2 * k * k)
        kernels = tuple(rng.uniform(-bound, bound, (1, 2, k, k)) for _ in range(3))
        biases = tuple(rng.uniform(-bound, bound, 3))
        return cls(kernels, biases)

    def flat(self):
        return np.concatenate([kern.ravel() for kern in self.kernels] + [np.array(self.biases)])

    def to_dict(self):
        return {"k": self.k, "kernels": [kern.tolist() for kern in self.kernels],
                "biases": list(self.biases)}

    @classmethod
    def from_dict(cls, d):
        try:
            params = cls(tuple(np.array(kk) for kk in d["kernels"]), tuple(d["biases"]))
        except KeyError as exc:
            raise InputError(f"parameter file is missing {exc}") from None
        if "k" in d and int(d["k"]) != params.k:
            raise InputError(f"declared k={d['k']} does not match kernel size {params.k}")
        return params


@dataclass
class TripletCache:
    x: np.ndarray
    params: TripletParams
    gate: np.ndarray
    branches: list


def triplet_forward(x, params):
    """Return ``(y, cache)``; ``y`` has the same dims as ``x``."""
    x = as_tensor4(x)
    branches = []
    gate = np.zeros_like(x)
    for name, kern, bias in zip(BRANCHES, params.kernels, params.biases):
        plane = PLANES[name]
        xr = rotate90(x, plane, 1) if plane else x
        z = zpool(xr, axis=1)
        g = sigmoid(conv2d(z, kern, bias))
        full = np.broadcast_to(g, xr.shape)
        gate += rotate90(full, plane, -1) if plane else full
        branches.append({"plane": plane, "xr": xr, "z": z, "g": g})
    gate /= 3.0
    return x * gate, TripletCache(x, params, gate, branches)


def _zpool_backward(xr, dz):
    """Route Z-pool gradients back: max to the (first) argmax, mean spread evenly."""
    n = xr.shape[1]
    dxr = np.broadcast_to(dz[:, 1:2] / n, xr.shape).copy()
    idx = xr.argmax(axis=1)[:, None]
    np.put_along_axis(dxr, idx, np.take_along_axis(dxr, idx, axis=1) + dz[:, 0:1], axis=1)
    return dxr


def triplet_backward(cache, dy):
    """Return ``(dx, dparams)`` for upstream gradient ``dy``."""
    if not isinstance(cache, TripletCache):
        raise InputError("cache must come from triplet_forward")
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape != cache.x.shape:
        raise InputError(f"dy shape {dy.shape} does not match cached input {cache.x.shape}")
    x = cache.x
    dx = dy * cache.gate
    dgate = dy * x / 3.0
    dkernels, dbiases = [], []
    for br, kern in zip(cache.branches, cache.params.kernels):
        plane, xr, z, g = br["plane"], br["xr"], br["z"], br["g"]
        dfull = rotate90(dgate, plane, 1) if plane else dgate
        dg = dfull.sum(axis=1, keepdims=True)
        da = dg * g * (1.0 - g)
        dz, dkern, dbias = conv2d_backward(z, kern, da)
        dxr = _zpool_backward(xr, dz)
        dx += rotate90(dxr, plane, -1) if plane else dxr
        dkernels.append(dkern)
        dbiases.append(float(dbias[0]))
    return dx, TripletParams(tuple(dkernels), tuple(dbiases))


GROUPS = ("input", "kernel1", "kernel2", "kernel3", "bias1", "bias2", "bias3")


def _half_sq_diff(y_plus, y_minus):
    # (L(+) - L(-)) for L = sum(y^2)/2, formed elementwise to avoid cancellation
    return float(np.sum((y_plus - y_minus) * (y_plus + y_minus)) / 2.0)


def _numeric_grads(x, params, eps):
    """Central differences of L(y) = sum(y^2)/2 for every input and parameter entry."""
    fwd = lambda xx, pp: triplet_forward(xx, pp)[0]  # noqa: E731
    gx = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[i] += eps
        xm[i] -= eps
        gx[i] = _half_sq_diff(fwd(xp, params), fwd(xm, params)) / (2 * eps)
    gk = []
    for b in range(3):
        g = np.zeros_like(params.kernels[b])
        for i in np.ndindex(g.shape):
            kp = [kk.copy() for kk in params.kernels]
            km = [kk.copy() for kk in params.kernels]
            kp[b][i] += eps
            km[b][i] -= eps
            yp = fwd(x, TripletParams(tuple(kp), params.biases))
            ym = fwd(x, TripletParams(tuple(km), params.biases))
            g[i] = _half_sq_diff(yp, ym) / (2 * eps)
        gk.append(g)
    gb = []
    for b in range(3):
        bp, bm = list(params.biases), list(params.biases)
        bp[b] += eps
        bm[b] -= eps
        yp = fwd(x, TripletParams(params.kernels, tuple(bp)))
        ym = fwd(x, TripletParams(params.kernels, tuple(bm)))
        gb.append(_half_sq_diff(yp, ym) / (2 * eps))
    return [gx] + gk + [np.array(v) for v in gb]


def relative_error(analytic, numeric):
    """Max-norm relative error ``max|a - n| / max(max|a|, max|n|)``."""
    a, n = np.asarray(analytic, dtype=np.float64), np.asarray(numeric, dtype=np.float64)
    scale = max(np.abs(a).max(), np.abs(n).max())
    if scale == 0:
        return 0.0
    return float(np.abs(a - n).max() / scale)


def gradcheck(dims=(1, 2, 4, 4), seed=0, k=DEFAULT_KERNEL, eps=1e-6, x=None, params=None):
    """Compare analytic and central-difference gradients of ``sum(y**2)/2``.

    ``x`` and ``params`` default to standard-normal input and uniform kernels
    drawn from ``seed``. Returns a JSON-ready report.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 4 or min(dims) < 1:
        raise InputError(f"dims must be four positive extents, got {dims}")
    if max(dims) > MAX_GRADCHECK_EXTENT:
        raise InputError(f"gradcheck dims are limited to {MAX_GRADCHECK_EXTENT} per axis")
    rng = np.random.default_rng(seed)
    if x is None:
        x = rng.standard_normal(dims)
    if params is None:
        params = TripletParams.random(k, rng, scale=0.5)
    x = as_tensor4(x)
    y, cache = triplet_forward(x, params)
    dx, dp = triplet_backward(cache, y)
    analytic = [dx] + list(dp.kernels) + [np.array(b) for b in dp.biases]
    numeric = _numeric_grads(x, params, eps)
    errs = {g: relative_error(a, n) for g, a, n in zip(GROUPS, analytic, numeric)}
    return {"dims": list(x.shape), "seed": seed, "k": params.k, "eps": eps,
            "max_rel_err": errs, "max": max(errs.values())}
