import numpy as np
import pytest

from branchhull.harness import brute_force_projection_oracle
from branchhull.projection import (
    is_feasible,
    project_block,
    project_point2,
    project_point3,
    project_point3_degenerate,
)


def _random_instance(rng):
    y = rng.choice([-1, 1]) * rng.uniform(0.1, 5.0)
    t = rng.choice([-1, 1])
    pt = rng.uniform(-4, 4, size=3)
    return pt, y, np.sign(y), t


def kkt_residuals3(p_in, p_out, y, s, t):
    """Stationarity and complementarity residuals at an active projection."""
    x0, w0, xi0 = p_in
    x, w, xi = p_out
    mu = (x - x0) / (s * w)
    r_w = w - w0 - mu * s * (x + xi)
    r_xi = xi - xi0 - mu * s * w
    slack = abs(y) - s * (x + xi) * w
    return mu, max(abs(r_w), abs(r_xi)), abs(mu * slack)


def kkt_residuals2(p_in, p_out, y, s, t):
    x0, w0 = p_in
    x, w = p_out
    mu = (x - x0) / (s * w)
    r_w = w - w0 - mu * s * x
    slack = abs(y) - s * x * w
    return mu, abs(r_w), abs(mu * slack)


def test_feasible_input_unchanged():
    assert project_point3(2.0, 1.0, 0.0, 1.0, 1, 1) == (2.0, 1.0, 0.0)
    assert project_point2(2.0, 1.0, 1.0, 1, 1) == (2.0, 1.0)


def test_origin_symmetric_case():
    x, w, xi = project_point3(0.0, 0.0, 0.0, 1.0, 1, 1)
    assert w == pytest.approx(2 ** -0.25, abs=1e-12)
    assert x == pytest.approx(xi, abs=1e-14)
    assert (x + xi) * w == pytest.approx(1.0, abs=1e-12)
    oracle = brute_force_projection_oracle(np.zeros(3), 1.0, 1, 1, True)
    assert np.linalg.norm(np.array([x, w, xi]) - oracle) < 1e-6


def test_two_variable_vertex():
    x, w = project_point2(0.0, 0.0, 1.0, 1, 1)
    assert (x, w) == pytest.approx((1.0, 1.0), abs=1e-12)


def test_wrong_branch_lands_on_right_branch():
    p = project_point3(-3.0, -3.0, 0.0, 1.0, 1, 1)
    assert p[1] > 0
    oracle = brute_force_projection_oracle(np.array([-3.0, -3.0, 0.0]), 1.0, 1, 1, True)
    assert np.linalg.norm(np.array(p) - oracle) < 1e-6


def test_degenerate_clamp():
    assert project_point3_degenerate(5, -2, 1, 1) == (5, 0, 1)
    assert project_point3_degenerate(5, 2, 1, 1) == (5, 2, 1)
    assert project_point3(5.0, -2.0, 1.0, 0.0, 0, 1) == (5.0, 0.0, 1.0)
    rng = np.random.default_rng(3)
    for _ in range(200):
        x, w, xi = rng.normal(size=3)
        t = rng.choice([-1, 1])
        # nearest point of {t w >= 0} on a grid through the input
        grid = np.linspace(-10, 10, 20001)
        feas = grid[t * grid >= 0]
        w_star = feas[np.argmin(np.abs(feas - w))]
        out = project_point3_degenerate(x, w, xi, t)
        assert out[0] == x and out[2] == xi
        assert out[1] == pytest.approx(w_star, abs=1e-3)


def test_sign_validation():
    with pytest.raises(ValueError):
        project_point3(0.0, 0.0, 0.0, 1.0, 1, 0)


@pytest.mark.parametrize("with_slack", [True, False])
def test_agrees_with_oracle(with_slack):
    rng = np.random.default_rng(100 + with_slack)
    for _ in range(100):
        pt, y, s, t = _random_instance(rng)
        if with_slack:
            got = np.array(project_point3(*pt, y, s, t))
        else:
            pt = pt[:2]
            got = np.array(project_point2(*pt, y, s, t))
        oracle = brute_force_projection_oracle(pt, y, s, t, with_slack)
        assert np.linalg.norm(got - oracle) < 1e-6
        # argmin property: the projection is at least as close as the oracle
        assert np.linalg.norm(got - pt) <= np.linalg.norm(oracle - pt) + 1e-9


def test_kkt_residuals():
    rng = np.random.default_rng(8)
    n3 = n2 = 0
    for _ in range(2000):
        pt, y, s, t = _random_instance(rng)
        out = project_point3(*pt, y, s, t)
        if not np.allclose(out, pt):
            mu, stat, comp = kkt_residuals3(pt, out, y, s, t)
            assert mu >= -1e-10
            assert stat <= 1e-8 * max(1.0, np.abs(pt).max())
            assert comp <= 1e-8 * max(1.0, abs(y))
            n3 += 1
        out2 = project_point2(pt[0], pt[1], y, s, t)
        if not np.allclose(out2, pt[:2]):
            mu, stat, comp = kkt_residuals2(pt[:2], out2, y, s, t)
            assert mu >= -1e-10
            assert stat <= 1e-8 * max(1.0, np.abs(pt).max())
            assert comp <= 1e-8 * max(1.0, abs(y))
            n2 += 1
    assert n3 > 500 and n2 > 500


@pytest.mark.parametrize("with_slack", [True, False])
def test_feasible_and_idempotent(with_slack):
    rng = np.random.default_rng(4)
    L = 3000
    y = rng.normal(size=L) * rng.uniform(0.01, 10, size=L)
    s, t = np.sign(y), rng.choice([-1.0, 1.0], size=L)
    x, w, xi = rng.normal(scale=3, size=(3, L))
    px, pw, pxi = project_block(x, w, xi, y, s, t, with_slack)
    assert is_feasible(px, pw, pxi, y, s, t, tol=1e-9)
    qx, qw, qxi = project_block(px, pw, pxi, y, s, t, with_slack)
    assert np.max(np.abs(qx - px)) <= 1e-10
    assert np.max(np.abs(qw - pw)) <= 1e-10
    if with_slack:
        assert np.max(np.abs(qxi - pxi)) <= 1e-10


@pytest.mark.parametrize("with_slack", [True, False])
def test_non_expansive(with_slack):
    rng = np.random.default_rng(9)
    for _ in range(2000):
        y = rng.choice([-1, 1]) * rng.uniform(0.1, 5)
        s, t = np.sign(y), rng.choice([-1, 1])
        p = rng.uniform(-4, 4, 3)
        q = p + rng.normal(scale=rng.choice([1e-3, 0.1, 2.0]), size=3)
        if with_slack:
            pp = np.array(project_point3(*p, y, s, t))
            pq = np.array(project_point3(*q, y, s, t))
            d = np.linalg.norm(p - q)
        else:
            pp = np.array(project_point2(p[0], p[1], y, s, t))
            pq = np.array(project_point2(q[0], q[1], y, s, t))
            d = np.linalg.norm(p[:2] - q[:2])
        assert np.linalg.norm(pp - pq) <= d + 1e-9


def test_local_mesh_optimality():
    rng = np.random.default_rng(12)
    offsets = np.stack(np.meshgrid(*[np.linspace(-0.05, 0.05, 11)] * 3), -1).reshape(-1, 3)
    for _ in range(500):
        pt, y, s, t = _random_instance(rng)
        out = np.array(project_point3(*pt, y, s, t))
        mesh = out + offsets
        feas = (np.abs(y) - s * (mesh[:, 0] + mesh[:, 2]) * mesh[:, 1] <= 0) & (t * mesh[:, 1] >= 0)
        if feas.any():
            dmesh = np.linalg.norm(mesh[feas] - pt, axis=1).min()
            assert dmesh >= np.linalg.norm(out - pt) - 1e-12


@pytest.mark.parametrize("with_slack", [True, False])
def test_block_equals_loop_and_permutes(with_slack):
    rng = np.random.default_rng(21)
    L = 300
    y = rng.normal(size=L)
    y[:5] = 0.0
    s, t = np.sign(y), rng.choice([-1.0, 1.0], size=L)
    x, w, xi = rng.normal(scale=2, size=(3, L))
    bx, bw, bxi = project_block(x, w, xi, y, s, t, with_slack)
    for i in range(L):
        if with_slack:
            assert (bx[i], bw[i], bxi[i]) == pytest.approx(project_point3(x[i], w[i], xi[i], y[i], s[i], t[i]), abs=0)
        else:
            assert (bx[i], bw[i]) == pytest.approx(project_point2(x[i], w[i], y[i], s[i], t[i]), abs=0)
    perm = rng.permutation(L)
    px, pw, pxi = project_block(x[perm], w[perm], xi[perm], y[perm], s[perm], t[perm], with_slack)
    assert np.array_equal(px, bx[perm]) and np.array_equal(pw, bw[perm])


def test_block_of_one_is_point():
    out = project_block([0.3], [-0.2], [0.1], [2.0], [1.0], [1.0], True)
    assert tuple(float(v[0]) for v in out) == project_point3(0.3, -0.2, 0.1, 2.0, 1, 1)


@pytest.mark.parametrize("with_slack", [True, False])
def test_bracket_matches_companion(with_slack):
    rng = np.random.default_rng(33)
    L = 2000
    y = rng.normal(size=L) * 3
    s, t = np.sign(y), rng.choice([-1.0, 1.0], size=L)
    x, w, xi = rng.normal(scale=3, size=(3, L))
    a = project_block(x, w, xi, y, s, t, with_slack, method="bracket")
    b = project_block(x, w, xi, y, s, t, with_slack, method="companion")
    for u, v in zip(a, b):
        if u is not None:
            assert np.max(np.abs(u - v)) < 1e-9


def test_length_mismatch():
    with pytest.raises(ValueError):
        project_block([0, 1], [0], [0], [1], [1], [1])
