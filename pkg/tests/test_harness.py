import math

import numpy as np
import pytest
import scipy.sparse as sp

from branchhull.dictionaries import partial_idct_dictionary, tv_operator
from branchhull.harness import (
    brute_force_projection_oracle,
    generate_synthetic,
    image_pipeline,
    line_value,
    noisy_bound_check,
    phase_portrait,
    phase_rows,
    prepare_image,
    shift_noise,
    sparsity_count,
)
from branchhull.model import recovery_distance
from branchhull.projection import project_point3


def test_synthetic_protocol():
    pr, tr = generate_synthetic(20, 20, 30, 0.05, seed=1)
    assert tr.S1 == tr.S2 == 1
    assert np.count_nonzero(tr.h_nat) == 1 and np.count_nonzero(tr.m_nat) == 1
    assert set(np.abs(tr.h_nat[tr.h_nat != 0])) == {1.0}
    assert np.all(pr.t != 0) and np.all(pr.y != 0)
    pr2, tr2 = generate_synthetic(20, 20, 30, 0.05, seed=1)
    assert np.array_equal(pr.B, pr2.B) and np.array_equal(tr.m_nat, tr2.m_nat)
    assert sparsity_count(40, 0.05) == 2 and sparsity_count(10, 0.05) == 1


def test_synthetic_dictionary_scale():
    pr, _ = generate_synthetic(50, 50, 400, seed=0)
    assert np.mean(np.sum(pr.B**2, axis=0)) == pytest.approx(1.0, rel=0.1)


def test_synthetic_errors():
    with pytest.raises(ValueError):
        generate_synthetic(4, 4, 10, sparsity_fraction=0.0)
    with pytest.raises(ValueError):
        generate_synthetic(4, 4, 10, S1=5)


def test_line_value():
    # 0.25 (S1 + S2) log^2(K + N) with the natural log
    assert line_value(2, 2, 40, 40) == pytest.approx(math.log(80) ** 2)
    assert line_value(2, 2, 40, 40) == pytest.approx(19.2, abs=0.05)


def test_phase_zero_trials():
    cells = phase_portrait([(20, 8), (20, 40)], trials=0)
    assert [c.successes for c in cells] == [0, 0]
    assert all(c.trials == 0 and c.distances == [] for c in cells)


def test_phase_small_grid_deterministic_and_monotone():
    grid = [(20, 4), (20, 12), (20, 40)]
    a = phase_portrait(grid, trials=10, seed=3)
    b = phase_portrait(grid, trials=10, seed=3)
    assert phase_rows(a) == phase_rows(b)
    fr = [c.successes for c in a]
    assert fr[0] <= fr[1] + 1 and fr[1] <= fr[2] + 1
    assert fr[2] >= 8 and fr[0] <= 2
    row = phase_rows(a)[0]
    assert row[:5] == [20, 20, 4, 1, 1]
    assert float(row[7]) == pytest.approx(0.25 * 2 * math.log(40) ** 2)


def test_phase_parallel_matches_serial():
    grid = [(20, 8), (20, 40)]
    assert phase_rows(phase_portrait(grid, trials=2, workers=2)) == phase_rows(phase_portrait(grid, trials=2, workers=1))


def test_shift_noise():
    rng = np.random.default_rng(0)
    for _ in range(50):
        xi = rng.uniform(-0.9, 0.5, 40)
        s, eta = shift_noise(xi)
        assert s == pytest.approx(1 + xi.max())
        assert np.all(eta <= 1e-15) and np.all(eta >= -1)
        assert eta.max() == pytest.approx(0.0, abs=1e-15)
        assert np.allclose(s * (1 + eta), 1 + xi, rtol=1e-14)


def test_bound_check_noiseless_is_tight():
    rep = noisy_bound_check(20, 20, 40, 1, 1, 0.0, trials=2, seed=1)
    assert rep["bound"] == [0.0, 0.0]
    assert max(rep["distance"]) < 1e-8
    assert rep["fraction_holding"] == 1.0 and all(rep["shift_ok"])


def test_bound_check_small_noise():
    rep = noisy_bound_check(20, 20, 60, 1, 1, 1e-4, trials=3, seed=2, max_iters=3000)
    assert rep["fraction_holding"] == 1.0 and all(rep["shift_ok"])


def test_prepare_image():
    img = np.array([[0, 128], [255, 64]])
    out = prepare_image(img)
    assert out.max() == 1.0 and out.min() == pytest.approx(1 / 255)
    with pytest.raises(ValueError):
        prepare_image(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        prepare_image(np.ones(4))


def _piecewise_image():
    img = np.ones((16, 16))
    img[4:11, 5:13] = 2.0
    img[10:14, 2:6] = 1.5
    return img


def test_image_pipeline_parameters_echoed():
    res, _ = image_pipeline(_piecewise_image(), "dct", {"ncols": 20}, rho=1e-4, lam=1e3, max_iters=50)
    d = res.diagnostics
    assert d["rho"] == 1e-4 and d["lam"] == 1e3 and d["ncols"] == 20 and (d["p"], d["q"]) == (16, 16)
    assert res.recovered.shape == (16, 16)
    res, _ = image_pipeline(_piecewise_image(), "bessel", {"ncols": 10}, max_iters=20)
    assert res.diagnostics["ncols"] == 10


def test_image_pipeline_scale_invariance():
    img = _piecewise_image()
    _, a = image_pipeline(img, "dct", {"ncols": 20}, max_iters=500)
    _, b = image_pipeline(7.3 * img, "dct", {"ncols": 20}, max_iters=500)
    d, _ = recovery_distance(b.h, b.m, a.h, a.m)
    assert d <= 1e-4


def test_tv_program_is_unbounded_below_toward_constants():
    # (h, m) = (c 1, m0 / c) stays feasible and costs |m0|_1 / c -> 0
    img = _piecewise_image() / 2.0
    p, q = img.shape
    L = p * q
    C, _ = partial_idct_dictionary(L, 30, seed=0)
    m0 = np.zeros(30)
    m0[0] = 1.0 / C[0, 0]  # C m0 = 1 >= y everywhere
    y = img.flatten(order="F")
    tv = tv_operator(p, q)
    costs = []
    for c in (1.0, 10.0, 100.0):
        h, m = c * np.ones(L), m0 / c
        assert np.all(h * (C @ m) >= y - 1e-12)
        costs.append(tv.tv(h) + np.abs(m).sum())
    assert np.allclose(costs, costs[0] / np.array([1.0, 10.0, 100.0]), rtol=1e-12)
    # while the "true" pair has strictly positive cost
    assert tv.tv(y) > costs[2]


@pytest.mark.xfail(reason="TV-BH has infimum 0 along constant h; the solver drifts there "
                          "instead of returning h proportional to y (see README)", strict=False)
def test_image_constant_distortion_returns_observation():
    img = _piecewise_image()
    res, _ = image_pipeline(img, "dct", {"ncols": 30}, max_iters=5000)
    y = prepare_image(img)
    assert np.corrcoef(res.recovered.ravel(), y.ravel())[0, 1] >= 0.99


def test_oracle_feasible_input_returned():
    pt = np.array([2.0, 1.0, 0.0])
    assert np.array_equal(brute_force_projection_oracle(pt, 1.0, 1, 1, True), pt)


def test_oracle_argmin_property():
    rng = np.random.default_rng(1)
    for _ in range(50):
        y = rng.choice([-1, 1]) * rng.uniform(0.2, 3)
        s, t = np.sign(y), rng.choice([-1, 1])
        pt = rng.uniform(-3, 3, 3)
        o = brute_force_projection_oracle(pt, y, s, t, True)
        samples = rng.uniform(-6, 6, (5000, 3))
        feas = (abs(y) - s * (samples[:, 0] + samples[:, 2]) * samples[:, 1] <= 0) & (t * samples[:, 1] >= 0)
        d = np.linalg.norm(samples[feas] - pt, axis=1)
        assert np.linalg.norm(o - pt) <= d.min() + 1e-12
        assert np.linalg.norm(o - np.array(project_point3(*pt, y, s, t))) < 1e-6
