"""Classification loss, feature projections, and the radiomics-regularized loss.

    L_I  = sum_k BCE(p_k, y_k)
    L_II = L_I + lam * || P_img(i_f) - P_rad(r_f) ||_p

``lam`` defaults to 1 (no weighting); it is exposed as an extension.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InputError

EPS = 1e-12
NUM_CLASSES = 14


def bce(p, y, eps=EPS):
    """Binary cross-entropy in nats, with ``p`` clamped to ``[eps, 1 - eps]``."""
    p = np.clip(np.asarray(p, dtype=np.float64), eps, 1.0 - eps)
    y = np.asarray(y, dtype=np.float64)
    return -y * np.log(p) - (1.0 - y) * np.log1p(-p)


def _check_labels(y):
    y = np.asarray(y, dtype=np.float64).ravel()
    if not np.all((y == 0) | (y == 1)):
        raise InputError("labels must be 0 or 1")
    return y


def classification_loss(probs, labels):
    probs = np.asarray(probs, dtype=np.float64).ravel()
    labels = _check_labels(labels)
    if probs.shape != labels.shape:
        raise InputError(f"{probs.size} probabilities but {labels.size} labels")
    if not np.all(np.isfinite(probs)):
        raise InputError("probabilities must be finite")
    return float(np.sum(bce(probs, labels)))


@dataclass(frozen=True)
class Projection:
    """Affine map ``weights @ v + bias`` (one linear layer)."""

    weights: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.bias, dtype=np.float64).ravel()
        if w.ndim != 2:
            raise InputError(f"projection weights must be 2D, got shape {w.shape}")
        if b.size != w.shape[0]:
            raise InputError(f"bias length {b.size} does not match d_out {w.shape[0]}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise InputError("projection entries must be finite")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    @property
    def d_in(self):
        return self.weights.shape[1]

    @property
    def d_out(self):
        return self.weights.shape[0]

    @classmethod
    def init(cls, d_in, d_out, rng=None):
        """Uniform in ``[-1/sqrt(d_in), 1/sqrt(d_in)]``."""
        rng = np.random.default_rng(rng)
        bound = 1.0 / np.sqrt(d_in)
        return cls(rng.uniform(-bound, bound, (d_out, d_in)), rng.uniform(-bound, bound, d_out))

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), np.zeros(d))

    def to_dict(self):
        return {"d_in": self.d_in, "d_out": self.d_out,
                "weights": self.weights.tolist(), "bias": self.bias.tolist()}

    @classmethod
    def from_dict(cls, d):
        try:
            proj = cls(d["weights"], d["bias"])
        except KeyError as exc:
            raise InputError(f"projection is missing {exc}") from None
        for key, actual in (("d_in", proj.d_in), ("d_out", proj.d_out)):
            if key in d and int(d[key]) != actual:
                raise InputError(f"declared {key}={d[key]} but weights give {actual}")
        return proj


def project(v, proj):
    v = np.asarray(v, dtype=np.float64).ravel()
    if v.size != proj.d_in:
        raise InputError(f"vector of length {v.size} cannot feed a projection with d_in={proj.d_in}")
    return proj.weights @ v + proj.bias


def pnorm(v, p):
    if p < 1:
        raise InputError(f"norm degree must be >= 1, got {p}")
    a = np.abs(v)
    if p == 1:
        return float(a.sum())
    if p == 2:
        return float(np.sqrt(np.dot(a, a)))
    return float(np.sum(a ** p) ** (1.0 / p))


def radiomic_distance(i_f, r_f, proj_i, proj_r, p_norm=2):
    if proj_i.d_out != proj_r.d_out:
        raise InputError(f"projections disagree on d_out ({proj_i.d_out} vs {proj_r.d_out})")
    return pnorm(project(i_f, proj_i) - project(r_f, proj_r), p_norm)


@dataclass(frozen=True)
class LossReport:
    L_I: float
    distance: float
    L_II: float

    def to_dict(self):
        return {"L_I": self.L_I, "distance": self.distance, "L_II": self.L_II}


def total_loss(probs, labels, i_f, r_f, proj_i, proj_r, p_norm=2, lam=1.0):
    if lam < 0:
        raise InputError("lam must be non-negative")
    l1 = classification_loss(probs, labels)
    dist = radiomic_distance(i_f, r_f, proj_i, proj_r, p_norm)
    return LossReport(l1, dist, l1 + lam * dist)


def _pnorm_grad(d, p):
    """Gradient of ||d||_p; zero at d = 0 where the norm is not differentiable."""
    n = pnorm(d, p)
    if n == 0:
        return np.zeros_like(d)
    if p == 1:
        return np.sign(d)
    return np.sign(d) * np.abs(d) ** (p - 1) / n ** (p - 1)


def total_loss_grad(probs, labels, i_f, r_f, proj_i, proj_r, p_norm=2, lam=1.0, eps=EPS):
    """Analytic gradients of ``L_II`` with respect to its inputs and projections.

    Returns a dict with keys ``probs``, ``i_f``, ``r_f``, ``proj_i_weights``,
    ``proj_i_bias``, ``proj_r_weights`` and ``proj_r_bias``.
    """
    probs = np.asarray(probs, dtype=np.float64).ravel()
    labels = _check_labels(labels)
    i_f = np.asarray(i_f, dtype=np.float64).ravel()
    r_f = np.asarray(r_f, dtype=np.float64).ravel()
    pc = np.clip(probs, eps, 1.0 - eps)
    inside = (probs > eps) & (probs < 1.0 - eps)
    dprobs = np.where(inside, -labels / pc + (1.0 - labels) / (1.0 - pc), 0.0)
    d = project(i_f, proj_i) - project(r_f, proj_r)
    g = lam * _pnorm_grad(d, p_norm)
    return {
        "probs": dprobs,
        "i_f": proj_i.weights.T @ g,
        "r_f": -(proj_r.weights.T @ g),
        "proj_i_weights": np.outer(g, i_f),
        "proj_i_bias": g,
        "proj_r_weights": -np.outer(g, r_f),
        "proj_r_bias": -g,
    }
