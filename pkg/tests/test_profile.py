import math
import time

import numpy as np
import pytest

from vortexlab.profile import (bbh_gamma_estimate, core_energy, model_vortex_profile,
                               solve_radial)


@pytest.fixture(scope="module")
def prof():
    return model_vortex_profile(40.0, 8000)


def test_profile_basic(prof):
    assert prof.values[0] == 0.0
    assert np.all(np.diff(prof.values) >= 0)
    assert prof.residual < 1e-8
    v = 20.0**2 * (1 - prof(20.0))
    assert 0.45 <= v <= 0.55


def test_profile_tail(prof):
    assert prof(80.0) == pytest.approx(1 - 0.5 / 80**2)
    assert prof(0.0) == 0.0


def test_profile_guards():
    with pytest.raises(ValueError):
        model_vortex_profile(10.0, 8000)
    with pytest.raises(ValueError):
        model_vortex_profile(40.0, 100)


def test_scaling_identity():
    a = core_energy(0.64, eps=0.01, h=0.01)
    b = core_energy(64.0, eps=1.0, h=0.01)
    assert a == pytest.approx(b, rel=1e-10)


def test_dyadic_difference():
    d = core_energy(128.0) - core_energy(64.0)
    assert abs(d - math.pi * math.log(2)) < 1e-3


def test_gamma_ladder():
    t0 = time.time()
    g = bbh_gamma_estimate((16, 32, 64, 128, 256))
    assert time.time() - t0 < 30
    diffs = np.abs(np.diff(g.ladder))
    assert np.all(np.diff(diffs) < 0)
    # differences shrink roughly like s^-2
    assert diffs[-1] / diffs[-2] == pytest.approx(0.25, abs=0.05)
    assert 1.1 < g.value < 1.3
    assert g.error < 1e-3


def test_gamma_validation():
    with pytest.raises(ValueError):
        bbh_gamma_estimate((8, 16))
    with pytest.raises(ValueError):
        bbh_gamma_estimate((16, 40))


def test_solve_radial_boundary():
    r, f, res = solve_radial(20.0, 1.0, 2000)
    assert f[0] == 0 and f[-1] == pytest.approx(1.0)
