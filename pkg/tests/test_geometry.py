import itertools
import math

import numpy as np
import pytest

from colnorm import ensemble, geometry, recovery
from colnorm.recovery import BudgetExceeded
from colnorm.spike import InvalidParameterError, SpikeParams


def small_inradius(A, **kw):
    kw.setdefault("budget", 64)
    kw.setdefault("steps", 600)
    return geometry.inradius(A, **kw)


@pytest.mark.parametrize("m", range(1, 9))
def test_identity_inradius(m):
    res = geometry.inradius(np.eye(m))
    assert res.radius == pytest.approx(1 / math.sqrt(m), abs=1e-6)
    assert np.allclose(np.abs(res.minimizing_direction), 1 / math.sqrt(m), atol=1e-6)


def test_inradius_examples():
    assert geometry.inradius([[1.0, 1.0], [1.0, -1.0]]).radius == pytest.approx(1.0, abs=1e-9)
    assert geometry.inradius([[5.0]]).radius == pytest.approx(5.0)


def test_inradius_degenerate_inputs():
    res = geometry.inradius(np.zeros((3, 4)))
    assert res.radius == 0.0 and res.certificate_gap == 0.0
    assert geometry.inradius([[1.0, 2.0], [2.0, 4.0]]).radius == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InvalidParameterError):
        geometry.inradius(np.eye(2), budget=0)


def test_inradius_result_invariants():
    rng = np.random.default_rng(5)
    for _ in range(5):
        A = rng.standard_normal((4, 9))
        res = small_inradius(A)
        w = res.minimizing_direction
        assert np.linalg.norm(w) == pytest.approx(1.0, abs=1e-12)
        assert np.abs(A.T @ w).max() == pytest.approx(res.radius, abs=1e-7)
        assert res.certificate_gap >= -1e-12


def test_inradius_invariances():
    rng = np.random.default_rng(6)
    for _ in range(5):
        A = rng.standard_normal((3, 7))
        base = small_inradius(A).radius
        assert small_inradius(2.5 * A).radius == pytest.approx(2.5 * base, abs=1e-7)
        assert small_inradius(A[:, rng.permutation(7)]).radius == pytest.approx(base, abs=1e-7)
        flips = rng.choice([-1.0, 1.0], size=7)
        assert small_inradius(A * flips).radius == pytest.approx(base, abs=1e-7)


def test_inradius_square_lower_bound():
    rng = np.random.default_rng(7)
    for m in (2, 4, 6):
        A = rng.standard_normal((m, m))
        smin = np.linalg.svd(A, compute_uv=False)[-1]
        assert small_inradius(A).radius >= smin / math.sqrt(m) - 1e-9


def test_inradius_matches_grid_oracle():
    rng = np.random.default_rng(2025)
    for i in range(100):
        m = 2 + i % 2
        A = rng.standard_normal((m, int(rng.integers(m, 7))))
        got = small_inradius(A, check_grid=False, seed=i).radius
        grid = geometry.inradius_grid_oracle(A)
        assert got == pytest.approx(grid, rel=1e-3)


def test_ball_inclusion():
    eta = np.zeros((3, 8), np.int8)
    eta[0, 7] = 1
    eps = np.ones((3, 8), np.int8)
    eps[:, :3] = np.eye(3, dtype=np.int8) * 2 - 1
    gamma = eps * np.where(eta == 1, 5.0, 1.0)
    dr = ensemble.EnsembleDraw(m=3, d=8, gamma=gamma, eps=eps, eta=eta,
                               params=SpikeParams(0.1, 5.0), seed=0)
    J = [0, 1, 2, 3, 4, 5]
    r = geometry.inradius(gamma[:, J]).radius
    assert geometry.check_ball_inclusion(dr, J, r - 1e-6)
    assert not geometry.check_ball_inclusion(dr, J, r + 0.1)
    lhs, rhs, ok = geometry.ball_inclusion_comparison(dr, J)
    assert lhs == pytest.approx(math.sqrt(3) / 5) and rhs == pytest.approx(r / math.sqrt(3))
    assert ok == (lhs <= rhs)
    with pytest.raises(ValueError):
        geometry.check_ball_inclusion(dr, [0, 7], 0.1)


def test_identity_extended_sign_block():
    m = 4
    block = np.hstack([np.eye(m), np.ones((m, m))])
    assert small_inradius(block).radius >= 1 / math.sqrt(m) - 1e-7


def test_spike_free_block_radii_are_bounded_below():
    # rank-deficient sign blocks (e.g. two equal rows) have radius exactly 0
    radii, singular = [], 0
    for seed in range(100):
        A = np.random.default_rng(seed).choice([-1.0, 1.0], size=(5, 10))
        r = small_inradius(A, seed=seed).radius
        if np.linalg.matrix_rank(A) < 5:
            singular += 1
            assert r == 0.0
        else:
            radii.append(r)
    print(f"full-rank min radius {min(radii):.4f}; {singular} rank-deficient blocks")
    assert min(radii) >= 0.3
    assert singular <= 10


def gram_oracle(A, s):
    best = math.inf
    for S in itertools.combinations(range(A.shape[1]), s):
        G = A[:, S].T @ A[:, S]
        a, b, c = G[0, 0], G[0, 1], G[1, 1]
        lam = (a + c) / 2 - math.sqrt(((a - c) / 2) ** 2 + b * b)
        best = min(best, math.sqrt(max(lam, 0.0)))
    return best


def test_restricted_min_singular():
    assert geometry.restricted_min_singular(np.eye(5), 3)[0] == pytest.approx(1.0)
    A = np.random.default_rng(0).standard_normal((4, 6))
    A[:, 4] = A[:, 1]
    alpha, worst = geometry.restricted_min_singular(A, 2)
    assert alpha == pytest.approx(0.0, abs=1e-12) and worst == (1, 4)
    for seed in range(10):
        A = np.random.default_rng(seed).choice([-1.0, 1.0], size=(4, 6))
        assert geometry.restricted_min_singular(A, 2)[0] == pytest.approx(gram_oracle(A, 2), abs=1e-9)


def test_restricted_min_singular_refusals():
    with pytest.raises(BudgetExceeded):
        geometry.restricted_min_singular(np.eye(40), 20)
    with pytest.raises(InvalidParameterError):
        geometry.restricted_min_singular(np.eye(3), 0)


def test_lemma16_order():
    assert geometry.lemma16_order(1, 1, 9) == 1
    assert geometry.lemma16_order(2, 1, 6) == 4
    assert geometry.lemma16_order(0.7, 3.0, 1) == -1
    with pytest.raises(InvalidParameterError):
        geometry.lemma16_order(1, 0, 4)


def lemma16_instance(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(10, 17))
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    A = Q + 0.02 * rng.standard_normal((d, d))
    s = int(rng.integers(9, d + 1))
    return A, s


def test_lemma16_guarantee_small():
    for seed in range(4):
        A, s = lemma16_instance(seed)
        alpha, _ = geometry.restricted_min_singular(A, s)
        beta = float(np.linalg.norm(A, axis=0).max())
        order = geometry.lemma16_order(alpha, beta, s)
        if order >= 1:
            assert recovery.certify_erp(A, order).holds


def test_rescaling_identity():
    params = SpikeParams(0.1, 6.0)
    rng = np.random.default_rng(1)
    for seed in range(100):
        dr = ensemble.draw(4, 12, params, seed)
        nm = ensemble.normalize_columns(dr)
        t = rng.standard_normal(12) * (rng.random(12) < 0.4)
        scale = max(1.0, np.abs(t).sum() * params.R)
        assert geometry.rescaling_identity_check(dr, nm, t) <= 1e-12 * scale
    dr = ensemble.draw(4, 12, params, 0)
    nm = ensemble.normalize_columns(dr)
    assert geometry.rescaling_identity_check(dr, nm, np.zeros(12)) == 0.0
    e = np.zeros(12)
    e[3] = 1.0
    assert geometry.rescaling_identity_check(dr, nm, e) <= 1e-15
