import json
import math

import numpy as np
import pytest

from vortexlab.errors import HypothesisError
from vortexlab.experiments import (DEFAULTS, SCENARIOS, ConfigError, brute_force_connection,
                                   default_config, interpolation_instance, random_balanced_instance,
                                   run_experiment, validate_config, verify_manifest)
from vortexlab.io import read_csv
from vortexlab.norms import minimal_connection
from vortexlab.sampling import make_rng


@pytest.mark.parametrize("scenario", SCENARIOS)
def test_defaults_validate(scenario):
    cfg = default_config(scenario)
    assert cfg["params"] == DEFAULTS[scenario]
    assert cfg["seed"] == 0


def test_validation_collects_every_error():
    with pytest.raises(ConfigError) as exc:
        validate_config({"scenario": "gp_vs_ode", "seed": -1,
                         "params": {"eps": "small", "extra": 1}})
    msgs = exc.value.errors
    assert len(msgs) >= 3
    assert any("seed" in m for m in msgs) and any("extra" in m for m in msgs)


def test_semantic_checks():
    with pytest.raises(ConfigError) as exc:
        validate_config({"scenario": "gp_vs_ode",
                         "params": {"N": 64, "dt": 1.0,
                                    "positions": [[0, 0], [0.3, 0], [0.6, 0], [0.9, 0], [1.2, 0]]}})
    text = " ".join(exc.value.errors)
    assert "n <= 4" in text and "resolve" in text
    with pytest.raises(ConfigError):
        validate_config({"scenario": "sampler_stats", "params": {"M": 1.0}})
    with pytest.raises(ConfigError):
        validate_config({"scenario": "pv_trajectory", "params": {"positions": None}})
    with pytest.raises(ConfigError):
        validate_config({"scenario": "unknown"})


def test_pv_trajectory_bytes_deterministic(tmp_path):
    doc = {"scenario": "pv_trajectory", "seed": 3,
           "params": {"random_n": 5, "T": 0.5, "samples": 21}}
    a = run_experiment(dict(doc), tmp_path / "a")
    b = run_experiment(dict(doc), tmp_path / "b")
    ta = (tmp_path / "a" / "trajectory.csv").read_bytes()
    assert ta == (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a.files == b.files
    _, bad = verify_manifest(tmp_path / "a")
    assert bad == []
    head = ta.decode().splitlines()[0].split(",")
    assert head[0] == "t" and head[-3:] == ["W", "m2", "rho"] and len(head) == 1 + 2 * 5 + 3


def test_gp_zero_time_run(tmp_path):
    doc = {"scenario": "gp_vs_ode",
           "params": {"eps": 0.1, "N": 128, "L": 2.5, "T": 0.0, "enforce_hypotheses": False,
                      "gamma_scales": [16, 32, 64]}}
    man = run_experiment(doc, tmp_path)
    head, data = read_csv(tmp_path / "trajectory.csv")
    assert data.shape[0] == 1 and data[0, 0] == 0.0
    assert man.results["sup_tracking_error"] < 2 * 2.5 * 2 / 128
    assert man.gamma == pytest.approx(1.1966, abs=5e-3)
    assert set(man.results["hypotheses"]) >= {"jacobian_ok", "surplus_ok"}
    stored = json.loads((tmp_path / "manifest.json").read_text())
    assert stored["config"]["params"]["T"] == 0.0


def test_gp_hypothesis_enforcement(tmp_path):
    # a mis-centred pair (degrees of opposite sign packed close) is not well prepared
    doc = {"scenario": "gp_vs_ode",
           "params": {"eps": 0.1, "N": 128, "L": 2.5, "T": 0.0, "C": 1.0,
                      "positions": [[-0.1, 0.0], [0.1, 0.0]], "degrees": [1, -1],
                      "gamma_scales": [16, 32, 64]}}
    with pytest.raises(HypothesisError):
        run_experiment(doc, tmp_path)
    stored = json.loads((tmp_path / "manifest.json").read_text())
    assert stored["status"] == "hypothesis_failed"


def test_gp_checkpoints(tmp_path):
    doc = {"scenario": "gp_vs_ode",
           "params": {"eps": 0.1, "N": 128, "L": 2.5, "T": 0.01, "samples": 2,
                      "norms_every": 1000, "checkpoint_every": 1, "enforce_hypotheses": False,
                      "gamma_scales": [16, 32, 64]}}
    man = run_experiment(doc, tmp_path)
    cks = sorted((tmp_path / "checkpoints").glob("*.bin"))
    assert len(cks) == man.results["samples"]
    _, bad = verify_manifest(tmp_path)
    assert bad == []


def test_brute_force_agrees():
    rng = make_rng(1)
    for _ in range(20):
        mu = random_balanced_instance(rng, int(rng.integers(1, 5)))
        assert minimal_connection(mu) == pytest.approx(brute_force_connection(mu), abs=1e-9)


def test_interpolation_instance_moments():
    rng = make_rng(2)
    for _ in range(10):
        mu = interpolation_instance(rng, M=4.0)
        assert abs(mu.weights.sum()) < 1e-12
        pos = mu.weights > 0
        assert mu.weights[pos] @ np.sum(mu.points[pos] ** 2, axis=1) <= 4.0 + 1e-9


def test_sampler_stats_small(tmp_path):
    doc = {"scenario": "sampler_stats", "seed": 4,
           "params": {"samples": 2000, "attempts": 200, "pair_samples": 2000,
                      "rho_n_list": [4, 8], "rho_samples": 100}}
    man = run_experiment(doc, tmp_path)
    assert man.results["ks_radial"] < 0.05
    assert (tmp_path / "batch.jsonl").exists() and (tmp_path / "rho.csv").exists()


def test_hydrodynamic_small(tmp_path):
    doc = {"scenario": "hydrodynamic", "seed": 1,
           "params": {"n_list": [10, 40], "seeds": 3, "T": 0.2, "rings": 5, "angles": 8}}
    man = run_experiment(doc, tmp_path)
    head, data = read_csv(tmp_path / "distances.csv")
    assert head == ["n", "seed_index", "t", "xlog_lower", "xlog_upper"]
    assert data.shape == (2 * 3 * 2, 5)
    assert set(man.results["median_by_n"]) == {"10", "40"}


def test_euler_suite_small(tmp_path):
    doc = {"scenario": "euler_suite",
           "params": {"N": 128, "L": 16.0, "T": 0.5, "samples": 3, "weak_tests": 2}}
    man = run_experiment(doc, tmp_path)
    assert man.results["weak_residual_max"] < 1e-6
    assert man.results["enstrophy_drift"] < 1e-8
