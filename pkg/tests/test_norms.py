import itertools
import math

import numpy as np
import pytest
from scipy import integrate

from vortexlab.errors import UnbalancedMeasureError
from vortexlab.norms import (AtomicMeasure, GridMeasure, NormBracket, aggregate_grid,
                             anchored_ramp, log_weight, minimal_connection,
                             pair_with_test_function, radial_ramp, wminus2_estimate, xlog_cost,
                             xlog_distance)


def dirac(*pairs):
    return AtomicMeasure([p for p, _ in pairs], [w for _, w in pairs])


def brute(mu):
    pos = mu.points[mu.weights > 0]
    neg = mu.points[mu.weights < 0]
    return min(np.sum(np.hypot(*(pos - neg[list(p)]).T))
               for p in itertools.permutations(range(len(neg))))


def test_atomic_measure_normalizes():
    mu = AtomicMeasure([[0, 0], [1, 0], [2, 0]], [1.0, 0.0, -1.0])
    assert len(mu.weights) == 2 and mu.total_mass == 0
    assert AtomicMeasure.from_json(mu.to_json()).to_dict() == mu.to_dict()


def test_minimal_connection_examples():
    assert minimal_connection(dirac(([0, 0], 1), ([3, 4], -1))) == pytest.approx(5)
    assert minimal_connection(AtomicMeasure.empty()) == 0
    mu = dirac(([0, 0], 1), ([1, 0], 1), ([0, 1], -1), ([1, 1], -1))
    assert minimal_connection(mu) == pytest.approx(2)
    with pytest.raises(UnbalancedMeasureError):
        minimal_connection(dirac(([0, 0], 1)))


def test_minimal_connection_brute_force():
    rng = np.random.default_rng(5)
    for _ in range(50):
        k = int(rng.integers(1, 7))
        mu = AtomicMeasure(rng.uniform(-1, 1, (2 * k, 2)), np.r_[np.ones(k), -np.ones(k)])
        assert abs(minimal_connection(mu) - brute(mu)) < 1e-12


def test_minimal_connection_triangle():
    rng = np.random.default_rng(6)
    for _ in range(20):
        p, q, r = (rng.uniform(-1, 1, (3, 2)) for _ in range(3))
        one = np.ones(3)
        a = AtomicMeasure(np.vstack([p, q]), np.r_[one, -one])
        b = AtomicMeasure(np.vstack([q, r]), np.r_[one, -one])
        c = AtomicMeasure(np.vstack([p, r]), np.r_[one, -one])
        assert minimal_connection(c) <= minimal_connection(a) + minimal_connection(b) + 1e-12


def test_weight_and_ramps():
    assert log_weight(np.array([0.5, 0])) == 1.0
    assert log_weight(np.array([math.e, 0])) == pytest.approx(2.0)
    z = np.array([[0.3, 0.0], [5.0, 0.0]])
    assert radial_ramp(z)[0] == pytest.approx(0.3)
    # Psi(5) = 1 + int_1^5 dr/(1+ln r)
    exact = 1 + integrate.quad(lambda r: 1 / (1 + math.log(r)), 1, 5)[0]
    assert radial_ramp(z)[1] == pytest.approx(exact, rel=1e-12)


def test_anchored_ramp_admissible():
    rng = np.random.default_rng(7)
    y = rng.normal(size=2) * 3
    x = rng.normal(size=(500, 2)) * 10
    step = 1e-6
    gx = (anchored_ramp(x + [step, 0], y) - anchored_ramp(x - [step, 0], y)) / (2 * step)
    gy = (anchored_ramp(x + [0, step], y) - anchored_ramp(x - [0, step], y)) / (2 * step)
    assert np.max(np.hypot(gx, gy) * log_weight(x)) <= 1 + 1e-5


def test_xlog_cost_segment():
    c = xlog_cost([[math.e**2, 0]], [[math.e**2 + 1, 0]])[0, 0]
    exact = integrate.quad(lambda r: 1 / (1 + math.log(r)), math.e**2, math.e**2 + 1)[0]
    assert c == pytest.approx(exact, rel=1e-10)
    assert c == pytest.approx(0.32633, abs=1e-5)
    # crossing the unit disk
    c = xlog_cost([[-3, 0]], [[3, 0]])[0, 0]
    exact = 2 + 2 * integrate.quad(lambda r: 1 / (1 + math.log(r)), 1, 3)[0]
    assert c == pytest.approx(exact, rel=1e-10)


def test_xlog_examples():
    b = xlog_distance(dirac(([0, 0], 1), ([0.2, 0], -1)))
    assert b.lower == pytest.approx(0.2, abs=1e-12) and b.upper == pytest.approx(0.2, abs=1e-12)
    mu = dirac(([math.e**2, 0], 1), ([math.e**2 + 1, 0], -1))
    b = xlog_distance(mu)
    assert b.upper == pytest.approx(0.32633, abs=1e-5) and b.lower <= b.upper
    b3 = xlog_distance(mu.scaled(np.pi))
    assert b3.upper == pytest.approx(np.pi * b.upper, rel=1e-12)
    assert b3.lower == pytest.approx(np.pi * b.lower, rel=1e-9)


def test_xlog_bracket_collapses_in_unit_disk():
    rng = np.random.default_rng(8)
    for _ in range(10):
        k = int(rng.integers(1, 5))
        r = np.sqrt(rng.uniform(0, 0.2, 2 * k))
        th = rng.uniform(0, 2 * np.pi, 2 * k)
        pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
        b = xlog_distance(AtomicMeasure(pts, np.r_[np.ones(k), -np.ones(k)]))
        assert b.upper - b.lower <= 1e-9


def test_xlog_controls_minimal_connection():
    # minimal connection inside Omega <= sup_Omega(1 + ln+|x|) * xlog upper
    rng = np.random.default_rng(9)
    for _ in range(10):
        pts = rng.uniform(-6, 6, (6, 2))
        mu = AtomicMeasure(pts, [1, 1, 1, -1, -1, -1])
        sup = np.max(log_weight(pts)) if True else None
        # Omega = ball containing all atoms and the segments between them
        sup = 1 + np.log(max(1.0, np.max(np.hypot(*pts.T))))
        b = xlog_distance(mu)
        assert b.lower <= b.upper
        assert minimal_connection(mu) <= sup * b.upper + 1e-9


def test_xlog_unbalanced():
    with pytest.raises(UnbalancedMeasureError):
        xlog_distance(dirac(([0, 0], 1.0), ([1, 0], -0.5)))


def test_bracket_validation():
    with pytest.raises(ValueError):
        NormBracket(1.0, 0.5)
    with pytest.raises(ValueError):
        NormBracket(0.0, np.inf)


def test_pairing_examples():
    mu = dirac(([0.5, 0], 1), ([0, 0], -1))
    phi = lambda x: np.minimum(np.hypot(x[..., 0], x[..., 1]), 1.0)  # noqa: E731
    assert pair_with_test_function(mu, phi) == pytest.approx(0.5)
    assert pair_with_test_function(mu, lambda x: 3.0 + 0 * x[..., 0]) == 0.0
    with pytest.raises(ValueError):
        pair_with_test_function(mu, lambda x: x[..., 0] ** 2)


def test_dual_estimate_property():
    rng = np.random.default_rng(10)
    for _ in range(100):
        pts = rng.normal(size=(2, 2)) * 2
        mu = AtomicMeasure(pts, [1, -1])
        b = xlog_distance(mu)
        y = rng.normal(size=2)
        phi = lambda x, y=y: anchored_ramp(x, y)  # noqa: E731  seminorm <= 1
        assert abs(pair_with_test_function(mu, phi)) <= b.upper + 1e-9


def test_grid_measure_and_aggregation():
    N = 64
    gm = GridMeasure((0.0, 0.0), 1.0, np.zeros((N, N)))
    assert gm.h == pytest.approx(2 / N)
    xs, _ = gm.axes()
    assert xs[0] == pytest.approx(-1 + 1 / N)
    rng = np.random.default_rng(11)
    v = rng.normal(size=(N, N))
    atoms, moved = aggregate_grid(GridMeasure((0, 0), 1.0, v), max_atoms=500)
    assert len(atoms.weights) <= 500
    assert atoms.total_mass == pytest.approx(v.sum(), abs=1e-9)
    assert moved >= 0
    # non power-of-two sizes
    atoms, _ = aggregate_grid(GridMeasure((0, 0), 1.0, rng.normal(size=(45, 45))), 300)
    assert len(atoms.weights) <= 300


def test_grid_xlog_matches_atoms():
    N = 32
    v = np.zeros((N, N))
    v[10, 16] = 1.0
    v[20, 16] = -1.0
    gm = GridMeasure((0, 0), 1.0, v)
    xs, ys = gm.axes()
    b = xlog_distance(gm)
    assert b.upper == pytest.approx(xs[20] - xs[10], abs=1e-12)


def test_wminus2_examples():
    z = wminus2_estimate(AtomicMeasure.empty(), radius=2.0, N=16)
    assert z.lower == 0 and z.upper == 0
    h = 2 * 2.0 / 64
    mu = dirac(([0, 0], 1), ([h, 0], -1))
    b = wminus2_estimate(mu, radius=2.0, N=64)
    assert abs(b.lower - h) <= 0.1 * h
    assert b.lower <= b.upper
    with pytest.raises(UnbalancedMeasureError):
        wminus2_estimate(dirac(([0, 0], 1)), radius=2.0, N=16)


def test_projected_cone_admissible():
    from vortexlab.norms import projected_cone
    rng = np.random.default_rng(12)
    y = np.array([0.3, -0.2])
    x = rng.normal(size=(500, 2)) * 4
    step = 1e-6
    gx = (projected_cone(x + [step, 0], y) - projected_cone(x - [step, 0], y)) / (2 * step)
    gy = (projected_cone(x + [0, step], y) - projected_cone(x - [0, step], y)) / (2 * step)
    assert np.max(np.hypot(gx, gy) * log_weight(x)) <= 1 + 1e-5
    assert projected_cone(np.array([0.5, 0.0]), np.array([-0.2, 0.0])) == pytest.approx(0.7)


def test_transport_lp_tolerates_tiny_weights_and_roundoff():
    from vortexlab.norms import euclidean_cost, solve_transport

    rng = np.random.default_rng(5)
    xp, xn = rng.normal(size=(40, 2)), rng.normal(size=(7, 2))
    wp = rng.uniform(size=40)
    wp[:4] = [1e-46, 1e-25, 1e-21, 1e-17]
    wp /= wp.sum()
    wn = rng.uniform(size=7)
    wn /= wn.sum() * (1 + 3e-16)
    tr = solve_transport(xp, wp, xn, wn, euclidean_cost, duals=True)
    C = euclidean_cost(xp, xn)
    assert np.all(tr.u[:, None] + tr.v[None, :] <= C + 1e-9)
    dual = tr.u @ wp + tr.v @ (wn * wp.sum() / wn.sum())
    assert dual == pytest.approx(tr.value, rel=1e-7)
