import math

import numpy as np
import pytest

from vortexlab.errors import InvariantError, SingularityError
from vortexlab.geometry import (VortexConfiguration, biot_savart_kernel, canonical_current,
                                canonical_harmonic_map, energies, kirchhoff_onsager,
                                mbounds_check, separation_scales)


def test_kernel_values():
    np.testing.assert_allclose(biot_savart_kernel([1.0, 0.0]), [0, 1 / (2 * np.pi)], atol=1e-16)
    np.testing.assert_allclose(biot_savart_kernel([0.0, 1.0]), [-1 / (2 * np.pi), 0], atol=1e-16)
    x = np.array([1.0, 0.0])
    np.testing.assert_allclose(biot_savart_kernel(2 * x), biot_savart_kernel(x) / 2)


def test_kernel_antisymmetry_exact():
    x = np.random.default_rng(0).normal(size=(50, 2))
    assert np.array_equal(biot_savart_kernel(-x), -biot_savart_kernel(x))


def test_kernel_singular():
    with pytest.raises(SingularityError):
        biot_savart_kernel([0.0, 0.0])


@pytest.mark.parametrize("pts,rho,R", [
    ([[0, 0], [1, 0]], 0.25, 4.0),
    ([[0, 0], [3, 0]], 0.25, 12.0),
    ([[0, 0], [0.2, 0]], 0.05, 4.0),
])
def test_separation_scales(pts, rho, R):
    s = separation_scales(VortexConfiguration(pts))
    assert s.rho == pytest.approx(rho, abs=1e-15)
    assert s.R == R


def test_configuration_invariants():
    with pytest.raises(InvariantError):
        VortexConfiguration([[0, 0], [0, 0]])
    with pytest.raises(InvariantError):
        VortexConfiguration([[0, 0]], [2])
    c = VortexConfiguration([[0, 0], [1, 0]], [1, -1])
    assert c.total_degree == 0
    assert VortexConfiguration.from_json(c.to_json()).to_dict() == c.to_dict()


def test_energies_examples():
    e = math.e
    assert energies(VortexConfiguration([[0, 0], [1, 0]]), 0.1, 0.0).W == pytest.approx(0.0)
    assert energies(VortexConfiguration([[0, 0], [e, 0]]), 0.1, 0.0).W == pytest.approx(-2 * np.pi)
    assert energies(VortexConfiguration([[0, 0], [e, 0]], [1, -1]), 0.1, 0.0).W == \
        pytest.approx(2 * np.pi)
    rep = energies(VortexConfiguration([[0, 0], [1, 0]]), 0.01, 1.5)
    assert rep.W_eps == pytest.approx(2 * (np.pi * abs(np.log(0.01)) + 1.5))


def test_W_symmetries():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(6, 2))
    W = kirchhoff_onsager(a, np.ones(6))
    th = 0.7
    Rm = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    assert kirchhoff_onsager(a @ Rm.T + [3.0, -2.0], np.ones(6)) == pytest.approx(W, abs=1e-12)
    lam = 2.5
    assert kirchhoff_onsager(lam * a, np.ones(6)) == \
        pytest.approx(W - np.pi * 6 * 5 * np.log(lam), abs=1e-12)


def test_canonical_map_examples():
    one = VortexConfiguration([[0, 0]])
    assert canonical_harmonic_map(one, [0, 2]) == pytest.approx(1j)
    pair = VortexConfiguration([[-1, 0], [1, 0]])
    assert canonical_harmonic_map(pair, [0, 0]) == pytest.approx(-1)
    anti = VortexConfiguration([[0, 0]], [-1])
    assert canonical_harmonic_map(anti, [0, 2]) == pytest.approx(-1j)
    x = np.random.default_rng(2).normal(size=(200, 2)) * 3
    conf = VortexConfiguration([[0.1, 0.2], [-0.5, 0.3], [0.7, -0.4]], [1, -1, 1])
    assert np.max(np.abs(np.abs(canonical_harmonic_map(conf, x)) - 1)) < 1e-14
    with pytest.raises(SingularityError):
        canonical_harmonic_map(one, [0, 0])


def test_canonical_current():
    one = VortexConfiguration([[0, 0]])
    np.testing.assert_allclose(canonical_current(one, [1, 0]), [0, 1])
    th = 2 * np.pi * np.arange(2048) / 2048
    pts = 5 * np.column_stack([np.cos(th), np.sin(th)])
    tang = np.column_stack([-np.sin(th), np.cos(th)])
    circ = np.sum(np.sum(canonical_current(one, pts) * tang, axis=1)) * 5 * 2 * np.pi / 2048
    assert circ == pytest.approx(2 * np.pi, abs=1e-12)


def test_current_far_field():
    conf = VortexConfiguration([[0.3, 0.1], [-0.4, 0.2], [0.1, -0.5]], [1, 1, -1])
    R = separation_scales(conf).R
    th = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    x = 10 * R * np.column_stack([np.cos(th), np.sin(th)])
    D = conf.total_degree
    perp = np.column_stack([-x[:, 1], x[:, 0]])
    dev = np.linalg.norm(canonical_current(conf, x) - D * perp / (10 * R) ** 2, axis=1)
    assert np.all(dev <= 2 * conf.n * R / (10 * R) ** 2)


def test_current_divergence_second_order():
    conf = VortexConfiguration([[0.0, 0.0]])
    errs = []
    for h in (0.02, 0.01):
        xs = np.arange(1.0, 2.0, h)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        j = canonical_current(conf, np.stack([X, Y], -1))
        div = np.gradient(j[..., 0], h, axis=0) + np.gradient(j[..., 1], h, axis=1)
        errs.append(np.abs(div[2:-2, 2:-2]).max())
    assert errs[1] < errs[0] / 3.5 or errs[1] < 1e-12


def test_mbounds():
    ok, rep = mbounds_check(VortexConfiguration([[-0.5, 0], [0.5, 0]]), 1.0)
    assert ok and rep["second_moment"] == pytest.approx(0.25)
    ok, rep = mbounds_check(VortexConfiguration([[0, 0], [np.exp(-3), 0]]), 1.0)
    assert not ok and rep["log_pair_avg"] == pytest.approx(3.0)
    ok, rep = mbounds_check(VortexConfiguration([[0.2, 0]]), 1.0)
    assert ok and rep["log_pair_avg"] is None
