import math

import numpy as np
import pytest

from radiloc.errors import InputError
from radiloc.objective import (Projection, bce, classification_loss, project, radiomic_distance,
                               total_loss, total_loss_grad)


def bce_oracle(p, y):
    return -(y * math.log(p) + (1 - y) * math.log(1 - p))


def test_bce_values():
    assert bce(0.5, 1) == pytest.approx(math.log(2), rel=1e-15)
    assert bce(0.9, 0) == pytest.approx(-math.log(0.1), rel=1e-14)
    assert bce(1.0, 1) < 1e-11
    assert np.isfinite(bce(0.0, 1))


def test_classification_loss():
    assert classification_loss([0.5] * 14, [1, 0] * 7) == pytest.approx(14 * math.log(2), rel=1e-14)
    assert classification_loss([1, 0, 1], [1, 0, 1]) < 1e-11
    p, y = [0.2, 0.7, 0.55], [0, 1, 1]
    ref = math.fsum(bce_oracle(a, b) for a, b in zip(p, y))
    assert classification_loss(p, y) == pytest.approx(ref, rel=1e-14)


def test_classification_loss_errors():
    with pytest.raises(InputError):
        classification_loss([0.5, 0.5], [1])
    with pytest.raises(InputError):
        classification_loss([0.5], [2])


def test_project(rng):
    v = rng.normal(size=4)
    assert np.array_equal(project(v, Projection.identity(4)), v)
    b = rng.normal(size=3)
    assert np.array_equal(project(v, Projection(np.zeros((3, 4)), b)), b)
    w = rng.normal(size=(2, 3))
    bias = rng.normal(size=2)
    u = rng.normal(size=3)
    ref = [sum(w[r, c] * u[c] for c in range(3)) + bias[r] for r in range(2)]
    assert np.allclose(project(u, Projection(w, bias)), ref, rtol=0, atol=1e-14)
    with pytest.raises(InputError):
        project(np.ones(5), Projection.identity(4))


def test_distance():
    ident = Projection.identity(2)
    assert radiomic_distance([3, 4], [3, 4], ident, ident) == 0
    assert radiomic_distance([3, 4], [0, 0], ident, ident, 2) == 5
    assert radiomic_distance([3, 4], [0, 0], ident, ident, 1) == 7
    with pytest.raises(InputError):
        radiomic_distance([1, 2], [1], ident, Projection.identity(1))


def test_total_loss(rng):
    ident = Projection.identity(2)
    r = total_loss([0.3, 0.6], [0, 1], [1, 1], [1, 1], ident, ident)
    assert r.L_II == r.L_I and r.distance == 0
    r = total_loss([1.0, 0.0], [1, 0], [3, 4], [0, 0], ident, ident)
    assert r.L_II == pytest.approx(5.0, abs=1e-10)
    pi, pr = Projection.init(5, 3, 1), Projection.init(4, 3, 2)
    i_f, r_f = rng.normal(size=5), rng.normal(size=4)
    probs, labels = rng.uniform(0.05, 0.95, 6), rng.integers(0, 2, 6)
    r = total_loss(probs, labels, i_f, r_f, pi, pr)
    d = np.linalg.norm(pi.weights @ i_f + pi.bias - (pr.weights @ r_f + pr.bias))
    ref = math.fsum(bce_oracle(a, b) for a, b in zip(probs, labels)) + d
    assert r.L_II == pytest.approx(ref, rel=1e-13)


@pytest.mark.parametrize("p_norm", [1, 2, 3])
def test_gradients_fd(rng, p_norm):
    pi, pr = Projection.init(5, 3, 1), Projection.init(4, 3, 2)
    i_f, r_f = rng.normal(size=5), rng.normal(size=4)
    probs, labels = rng.uniform(0.1, 0.9, 4), rng.integers(0, 2, 4).astype(float)
    g = total_loss_grad(probs, labels, i_f, r_f, pi, pr, p_norm)
    f = lambda pp, ii, rr: total_loss(pp, labels, ii, rr, pi, pr, p_norm).L_II  # noqa: E731
    eps = 1e-6
    for key, base in (("probs", probs), ("i_f", i_f), ("r_f", r_f)):
        num = np.zeros_like(base)
        for k in range(base.size):
            up, dn = base.copy(), base.copy()
            up[k] += eps
            dn[k] -= eps
            args_up = {"probs": probs, "i_f": i_f, "r_f": r_f, key: up}
            args_dn = {"probs": probs, "i_f": i_f, "r_f": r_f, key: dn}
            num[k] = (f(args_up["probs"], args_up["i_f"], args_up["r_f"])
                      - f(args_dn["probs"], args_dn["i_f"], args_dn["r_f"])) / (2 * eps)
        assert np.allclose(g[key], num, rtol=1e-6, atol=1e-8), key


def test_projection_weight_grads(rng):
    pi, pr = Projection.init(3, 2, 4), Projection.init(3, 2, 5)
    i_f, r_f = rng.normal(size=3), rng.normal(size=3)
    g = total_loss_grad([0.5], [1], i_f, r_f, pi, pr)
    eps = 1e-6
    for r in range(2):
        for c in range(3):
            wp, wm = pi.weights.copy(), pi.weights.copy()
            wp[r, c] += eps
            wm[r, c] -= eps
            num = (radiomic_distance(i_f, r_f, Projection(wp, pi.bias), pr)
                   - radiomic_distance(i_f, r_f, Projection(wm, pi.bias), pr)) / (2 * eps)
            assert g["proj_i_weights"][r, c] == pytest.approx(num, rel=1e-6, abs=1e-9)


def test_projection_io():
    p = Projection.init(4, 2, 0)
    assert np.array_equal(Projection.from_dict(p.to_dict()).weights, p.weights)
    with pytest.raises(InputError):
        Projection.from_dict({"weights": [[1, 2]], "bias": [0], "d_in": 3})
    with pytest.raises(InputError):
        Projection([[1, 2]], [0, 1])
