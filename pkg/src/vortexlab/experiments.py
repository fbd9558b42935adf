"""Scenario runners: configuration schema, orchestration and output files.

A config is a JSON object ``{"scenario": ..., "seed": ..., "params": {...}}``.
Each runner writes its CSV/JSON files into an output directory together with
``manifest.json``, which lists every file with its sha256 hash.

CSV column orders
-----------------
gp_vs_ode  ``trajectory.csv``: t, xi_x1, xi_y1, ..., a_x1, a_y1, ..., eta,
           surplus, norm_lower, norm_upper, track_error, energy, mass
pv_trajectory ``trajectory.csv``: t, x1, y1, ..., xn, yn, W, m2, rho
hydrodynamic ``distances.csv``: n, seed_index, t, xlog_lower, xlog_upper
sampler_stats ``rho.csv``: n, mean, stderr, acceptance
norms_suite ``interpolation.csv``: instance, xlog_lower, xlog_upper,
           w21_lower, w21_upper, ratio
euler_suite ``euler.csv``: t, enstrophy, circulation, kinetic_energy, rel_change
"""
from __future__ import annotations

import copy
import functools
import itertools
import json
import math
import time
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator
from scipy import stats

from . import euler as eu
from .errors import HypothesisError
from .evolution import EvolutionSettings, run_tracked_evolution
from .fields import (assemble_initial_data, jacobian_measure, surplus)
from .geometry import VortexConfiguration, energies, separation_scales
from .io import RunManifest, csv_text, dump_json, save_field, write_text
from .norms import AtomicMeasure, GridMeasure, minimal_connection, wminus2_estimate, xlog_distance
from .pointvortex import IntegratorSettings, conserved_drift, empirical_measure, integrate, tau_star
from .profile import bbh_gamma_estimate
from . import sampling as sp

SCENARIOS = ("gp_vs_ode", "hydrodynamic", "sampler_stats", "norms_suite", "euler_suite",
             "pv_trajectory")


class ConfigError(ValueError):
    """Raised with every validation problem found in a config."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


# ------------------------------------------------------------------ schema

_pos = {"type": "number", "exclusiveMinimum": 0}
_posint = {"type": "integer", "minimum": 1}
_point = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_points = {"type": "array", "items": _point, "minItems": 1}
_degrees = {"type": "array", "items": {"enum": [-1, 1]}}

PARAM_SCHEMAS = {
    "gp_vs_ode": {
        "positions": _points, "degrees": _degrees,
        "eps": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "N": {"type": "integer", "minimum": 32}, "L": _pos,
        "T": {"type": "number", "minimum": 0},
        "scheme": {"enum": ["relaxation", "split"]},
        "dt": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "samples": _posint, "norms_every": _posint, "C": _pos,
        "enforce_hypotheses": {"type": "boolean"},
        "checkpoint_every": {"type": "integer", "minimum": 0},
        "gamma_scales": {"type": "array", "items": _posint, "minItems": 2},
    },
    "pv_trajectory": {
        "positions": _points, "degrees": _degrees,
        "random_n": {"type": ["integer", "null"], "minimum": 1}, "R": _pos,
        "T": {"type": "number"}, "scaling": {"enum": ["gp", "mean_field"]},
        "samples": {"type": "integer", "minimum": 2},
        "rel_tol": _pos, "abs_tol": _pos,
    },
    "hydrodynamic": {
        "mode": {"enum": ["gaussian", "two_blob"]},
        "n_list": {"type": "array", "items": _posint, "minItems": 1},
        "seeds": _posint, "T": {"type": "number", "minimum": 0},
        "samples": {"type": "integer", "minimum": 2}, "R": _pos,
        "rel_tol": _pos, "rings": _posint, "angles": _posint,
        "lower_bounds": {"type": "boolean"},
        "blob_centers": _points, "blob_sigma": _pos, "mollifier": _pos,
        "euler_N": {"type": "integer", "minimum": 128}, "euler_L": _pos,
    },
    "sampler_stats": {
        "n": _posint, "R": _pos, "M": _pos, "samples": _posint, "attempts": _posint,
        "admissible_n": {"type": "integer", "minimum": 2},
        "pair_n": {"type": "integer", "minimum": 2}, "pair_samples": _posint,
        "rho_n_list": {"type": "array", "items": {"type": "integer", "minimum": 2},
                       "minItems": 1},
        "rho_samples": _posint, "write_batch": {"type": "boolean"},
    },
    "norms_suite": {
        "brute_instances": _posint,
        "max_pairs": {"type": "integer", "minimum": 1, "maximum": 7},
        "interp_instances": _posint, "M": _pos,
        "wgrid_N": {"type": "integer", "minimum": 8},
    },
    "euler_suite": {
        "N": {"type": "integer", "minimum": 128}, "L": _pos, "sigma": _pos,
        "T": _pos, "samples": {"type": "integer", "minimum": 2},
        "weak_tests": _posint, "weak_n": {"type": "integer", "minimum": 2},
    },
}

DEFAULTS = {
    "gp_vs_ode": {
        "positions": [[-0.5, 0.0], [0.5, 0.0]], "degrees": None, "eps": 0.04, "N": 256,
        "L": 2.5, "T": math.pi / 8, "scheme": "split", "dt": None, "samples": 200,
        "norms_every": 10, "C": 1.0, "enforce_hypotheses": True, "checkpoint_every": 0,
        "gamma_scales": [16, 32, 64, 128, 256],
    },
    "pv_trajectory": {
        "positions": [[-0.5, 0.0], [0.5, 0.0]], "degrees": None, "random_n": None, "R": 1.0,
        "T": 4 * math.pi, "scaling": "gp", "samples": 201, "rel_tol": 1e-10,
        "abs_tol": 1e-12,
    },
    "hydrodynamic": {
        "mode": "gaussian", "n_list": [50, 100, 200, 400], "seeds": 50, "T": 1.0,
        "samples": 2, "R": 1.0, "rel_tol": 1e-9, "rings": 20, "angles": 40,
        "lower_bounds": False, "blob_centers": [[-0.6, 0.0], [0.6, 0.0]],
        "blob_sigma": 0.3, "mollifier": 0.15, "euler_N": 128, "euler_L": 8.0,
    },
    "sampler_stats": {
        "n": 4, "R": 1.0, "M": 8.0, "samples": 100000, "attempts": 10000,
        "admissible_n": 16, "pair_n": 8, "pair_samples": 100000,
        "rho_n_list": [4, 8, 16, 32], "rho_samples": 2000, "write_batch": True,
    },
    "norms_suite": {
        "brute_instances": 200, "max_pairs": 6, "interp_instances": 100, "M": 4.0,
        "wgrid_N": 32,
    },
    "euler_suite": {
        "N": 256, "L": 24.0, "sigma": 0.5, "T": 5.0, "samples": 6, "weak_tests": 5,
        "weak_n": 4,
    },
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["scenario"],
    "additionalProperties": False,
    "properties": {
        "scenario": {"enum": list(SCENARIOS)},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "out": {"type": "string"},
        "params": {"type": "object"},
    },
    "allOf": [
        {"if": {"properties": {"scenario": {"const": name}}},
         "then": {"properties": {"params": {"type": "object", "properties": props,
                                            "additionalProperties": False}}}}
        for name, props in PARAM_SCHEMAS.items()
    ],
}


def _semantic_errors(scenario: str, p: dict) -> list:
    errs = []
    if scenario in ("gp_vs_ode", "pv_trajectory") and p.get("positions") is not None:
        deg = p.get("degrees")
        if deg is not None and len(deg) != len(p["positions"]):
            errs.append("params.degrees: length differs from positions")
        try:
            VortexConfiguration(p["positions"], deg)
        except Exception as exc:  # collect rather than stop
            errs.append(f"params.positions: {exc}")
    if scenario == "gp_vs_ode":
        n = len(p["positions"])
        if n > 4:
            errs.append(f"params.positions: {n} vortices exceeds the desk-scale guard n <= 4")
        h = 2 * p["L"] / p["N"]
        if not h < p["eps"] / 2:
            errs.append(f"params.N: grid spacing {h:.4g} does not resolve eps/2")
        if not errs:
            cfg = VortexConfiguration(p["positions"], p.get("degrees"))
            rho = separation_scales(cfg).rho
            if p["L"] - np.max(np.abs(cfg.positions)) < 4 * rho:
                errs.append("params.L: vortices must sit at least 4 rho inside the box")
        if p.get("dt") is not None and p["dt"] >= p["eps"] * h / 2:
            errs.append(f"params.dt: must be below eps*h/2 = {p['eps'] * h / 2:.4g}")
    if scenario == "pv_trajectory" and p.get("random_n") is None and p.get("positions") is None:
        errs.append("params: give positions or random_n")
    if scenario == "hydrodynamic" and p["mode"] == "two_blob":
        ext = max(np.max(np.abs(p["blob_centers"])) + 6 * (p["blob_sigma"] + p["mollifier"]), 0)
        if ext > p["euler_L"] / 2:
            errs.append("params.euler_L: box too small for the blobs")
    if scenario == "sampler_stats" and p["M"] < sp.M0(p["R"]):
        errs.append(f"params.M: must be >= M0(R) = {sp.M0(p['R']):.4g}")
    return errs


def validate_config(doc: dict) -> dict:
    """Schema plus precondition checks; returns the config with defaults filled in.

    All problems are collected and raised together as a ConfigError.
    """
    v = Draft202012Validator(CONFIG_SCHEMA)
    errs = [f"{'.'.join(str(x) for x in e.absolute_path) or '<root>'}: {e.message}"
            for e in sorted(v.iter_errors(doc), key=lambda e: list(e.absolute_path))]
    if errs:
        raise ConfigError(errs)
    out = {"scenario": doc["scenario"], "seed": int(doc.get("seed", 0)),
           "out": doc.get("out")}
    params = copy.deepcopy(DEFAULTS[doc["scenario"]])
    params.update(doc.get("params", {}))
    out["params"] = params
    errs = _semantic_errors(doc["scenario"], params)
    if errs:
        raise ConfigError(errs)
    return out


def load_config(path) -> dict:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"<file>: not valid JSON ({exc})"]) from None
    return doc


def default_config(scenario: str) -> dict:
    return validate_config({"scenario": scenario})


# ---------------------------------------------------------------- helpers


@functools.lru_cache(maxsize=4)
def gamma_estimate(scales: tuple = (16, 32, 64, 128, 256)):
    return bbh_gamma_estimate(scales)


def _configuration(p: dict, seed: int) -> VortexConfiguration:
    if p.get("random_n"):
        return sp.sample_uniform_ball(p["random_n"], p["R"], seed)
    return VortexConfiguration(p["positions"], p.get("degrees"))


def _finish(man: RunManifest, out: Path, t0: float) -> RunManifest:
    man.wall_clock = time.time() - t0
    man.write(out)
    return man


# ---------------------------------------------------------------- runners


def gp_vs_ode_experiment(cfg: dict, out) -> RunManifest:
    """Well-prepared data, hypothesis checks, and a tracked GP run against the ODE."""
    t0 = time.time()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg["params"]
    conf = VortexConfiguration(p["positions"], p.get("degrees"))
    g = gamma_estimate(tuple(p["gamma_scales"]))
    man = RunManifest("gp_vs_ode", cfg, gamma=g.value, gamma_error=g.error)
    eps, N, L = p["eps"], p["N"], p["L"]
    h = 2 * L / N
    sc = separation_scales(conf)
    f0 = assemble_initial_data(conf, eps, N, L)

    target = AtomicMeasure(conf.positions, -np.pi * conf.degrees.astype(float))
    br = xlog_distance(jacobian_measure(f0), target)
    S = surplus(f0, conf, g.value)
    jac_bound = math.sqrt(eps) + 2 * h
    h1 = br.upper <= jac_bound
    h2 = (not S.flagged) and S.value <= math.sqrt(eps) + S.error
    man.results["hypotheses"] = {
        "jacobian_bracket": br.to_dict(), "jacobian_bound": jac_bound, "jacobian_ok": h1,
        "surplus": S.to_dict(), "surplus_bound": math.sqrt(eps), "surplus_ok": h2,
    }

    settings = EvolutionSettings(dt=p["dt"], scheme=p["scheme"])
    ode = integrate(conf, max(p["T"], 1e-12), scaling="gp", samples=401,
                    time_factor=settings.ode_time_factor)
    ts = tau_star(ode, eps, p["C"])
    T_run = min(p["T"], ts)
    man.scales = {"rho": sc.rho, "R": sc.R, "tau_star": ts, "T_run": T_run, "h": h,
                  "dt": settings.resolve_dt(f0)}
    if not (h1 and h2):
        man.status = "hypothesis_failed"
        if not h1:
            man.flags.append("jacobian_hypothesis_failed")
        if not h2:
            man.flags.append("surplus_hypothesis_failed")
        if p["enforce_hypotheses"]:
            _finish(man, out, t0)
            raise HypothesisError(
                f"initial data not well prepared: Jacobian upper {br.upper:.4g} "
                f"(bound {jac_bound:.4g}), surplus {S.value:.4g} +- {S.error:.2g} "
                f"(bound {math.sqrt(eps):.4g}, flagged={S.flagged})")

    ck = None
    if p["checkpoint_every"]:
        def ck(k, st):
            if k % p["checkpoint_every"] == 0:
                paths = save_field(st.field, out / "checkpoints" / f"field_{k:05d}",
                                   {"time": st.time, "steps": st.steps,
                                    "code_version": man.code_version})
                for q in paths:
                    man.add_file(q, root=out)

    tr = run_tracked_evolution(f0, conf, T_run, settings, gamma=g.value,
                               norms_every=p["norms_every"], samples=p["samples"],
                               checkpoint=ck)
    write_text(out, "trajectory.csv", tr.to_csv(), man)
    err = tr.tracking_error
    en = np.asarray(tr.energy)
    ms = np.asarray(tr.mass)
    man.results.update({
        "sup_tracking_error": float(err.max()) if len(err) else None,
        "separation": float(sc.R if conf.n == 1 else np.min(
            [np.hypot(*(a - b)) for a, b in itertools.combinations(conf.positions, 2)])),
        "energy_drift": float(np.max(np.abs(en - en[0]))) if len(en) else None,
        "mass_drift": float(np.max(np.abs(ms - ms[0]))) if len(ms) else None,
        "run_status": tr.status, "samples": len(tr.times),
    })
    man.scales["dt"] = tr.dt
    if tr.status != "ok":
        man.status = tr.status
    man.flags.extend(fl["flag"] for fl in tr.flags if fl["flag"] not in man.flags)
    return _finish(man, out, t0)


def pv_trajectory_experiment(cfg: dict, out) -> RunManifest:
    t0 = time.time()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg["params"]
    conf = _configuration(p, cfg["seed"])
    man = RunManifest("pv_trajectory", cfg)
    tr = integrate(conf, p["T"], IntegratorSettings(rel_tol=p["rel_tol"], abs_tol=p["abs_tol"]),
                   scaling=p["scaling"], samples=p["samples"])
    write_text(out, "trajectory.csv", tr.to_csv(), man)
    write_text(out, "initial.json", conf.to_json() + "\n", man)
    sc = separation_scales(conf)
    man.scales = {"rho": sc.rho, "R": sc.R}
    man.results = {"drift": conserved_drift(tr), "run_status": tr.status,
                   "t_end": float(tr.times[-1])}
    man.status = tr.status
    return _finish(man, out, t0)


def _blob_sample(rng, centers, sigma, n):
    centers = np.asarray(centers, float)
    pick = rng.integers(0, len(centers), n)
    return centers[pick] + sigma * rng.standard_normal((n, 2))


def _mollified(points, weights, N, L, width):
    st = eu.EulerState(np.zeros((N, N)), L)
    X, Y = st.mesh()
    w = np.zeros((N, N))
    for (x, y), m in zip(points, weights):
        w += m * np.exp(-((X - x) ** 2 + (Y - y) ** 2) / (2 * width**2))
    w /= 2 * np.pi * width**2
    return eu.EulerState(w, L, 0.0, st.origin)


def hydrodynamic_experiment(cfg: dict, out) -> RunManifest:
    """Mean-field vortex systems against their Euler limit, over an n ladder."""
    t0 = time.time()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg["params"]
    seed = cfg["seed"]
    man = RunManifest("hydrodynamic", cfg)
    times = np.linspace(0.0, p["T"], p["samples"])
    ist = IntegratorSettings(rel_tol=p["rel_tol"], abs_tol=p["rel_tol"] * 1e-2)
    rows = []
    med = {}
    if p["mode"] == "gaussian":
        G = sp.gaussian_atoms(p["rings"], p["angles"], p["R"])
        for n in p["n_list"]:
            d = np.zeros((p["seeds"], len(times)))
            for s in range(p["seeds"]):
                conf = sp.sample_uniform_ball(n, p["R"], seed, stream=s)
                tr = integrate(conf, p["T"], ist, scaling="mean_field", samples=times) \
                    if p["T"] > 0 and n > 1 else None
                for k, t in enumerate(times):
                    c = conf if tr is None else tr.state(k)
                    b = xlog_distance(empirical_measure(c), -G, lower=p["lower_bounds"])
                    d[s, k] = b.upper
                    rows.append([n, s, t, b.lower, b.upper])
            med[n] = np.median(d, axis=0)
    else:
        N, L, width = p["euler_N"], p["euler_L"], p["mollifier"]
        for n in p["n_list"]:
            d = np.zeros((p["seeds"], len(times)))
            for s in range(p["seeds"]):
                rng = sp.make_rng(seed, stream=s)
                pts = _blob_sample(rng, p["blob_centers"], p["blob_sigma"], n)
                conf = VortexConfiguration(pts)
                tr = integrate(conf, p["T"], ist, scaling="mean_field", samples=times) \
                    if p["T"] > 0 else None
                ref = eu.run_euler(_mollified(pts, np.full(n, 1.0 / n), N, L, width),
                                   p["T"], samples=len(times)) if p["T"] > 0 else \
                    [_mollified(pts, np.full(n, 1.0 / n), N, L, width)]
                for k, t in enumerate(times):
                    c = conf if tr is None else tr.state(k)
                    gm = eu.state_to_measure(ref[k])
                    b = xlog_distance(gm, -empirical_measure(c), lower=p["lower_bounds"])
                    d[s, k] = b.upper
                    rows.append([n, s, t, b.lower, b.upper])
            med[n] = np.median(d, axis=0)
    write_text(out, "distances.csv",
               csv_text(["n", "seed_index", "t", "xlog_lower", "xlog_upper"], rows), man)
    ns = list(p["n_list"])
    final = [float(med[n][-1]) for n in ns]
    man.results = {
        "median_by_n": {str(n): [float(v) for v in med[n]] for n in ns},
        "times": times.tolist(),
        "nonincreasing_in_n": bool(all(b <= a for a, b in zip(final, final[1:]))),
        "final_over_initial_at_max_n": float(med[ns[-1]][-1] / med[ns[-1]][0])
        if med[ns[-1]][0] > 0 else None,
    }
    return _finish(man, out, t0)


def radial_law_ks(n: int, R: float, samples: int, seed: int) -> float:
    Y = sp.uniform_ball_draws(n, R, sp.make_rng(seed), samples)
    r = np.linalg.norm(Y.reshape(samples, -1), axis=1) / (R * math.sqrt(n))
    return float(stats.kstest(r ** (2 * n), "uniform").statistic)


def sampler_stats_experiment(cfg: dict, out) -> RunManifest:
    t0 = time.time()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg["params"]
    seed = cfg["seed"]
    man = RunManifest("sampler_stats", cfg)
    n, R = p["n"], p["R"]
    Y = sp.uniform_ball_draws(n, R, sp.make_rng(seed), p["samples"])
    r = np.linalg.norm(Y.reshape(p["samples"], -1), axis=1) / (R * math.sqrt(n))
    m2 = float(np.mean(np.sum(Y**2, axis=(1, 2)) / n))
    batch = sp.sample_admissible(p["admissible_n"], p["M"], R, seed, p["attempts"])
    if p["write_batch"]:
        write_text(out, "batch.jsonl", batch.to_jsonl(), man)
        write_text(out, "batch_manifest.json", dump_json(batch.manifest()), man)
    pairs = {name: sp.pair_statistic(fn, p["pair_n"], R, p["pair_samples"], seed, stream=1 + k)
             for k, (name, fn) in enumerate((("log", np.log), ("r2", np.square)))}
    rho = sp.rho_inverse_square_expectation(p["rho_n_list"], p["M"], R, p["rho_samples"], seed)
    write_text(out, "rho.csv", csv_text(["n", "mean", "stderr", "acceptance"],
                                        zip(rho["n"], rho["mean"], rho["stderr"],
                                            rho["acceptance"])), man)
    man.results = {
        "ks_radial": float(stats.kstest(r ** (2 * n), "uniform").statistic),
        "second_moment": m2, "second_moment_exact": R**2 * n / (n + 1),
        "acceptance_rate": batch.acceptance_rate, "M0": sp.M0(R), "lambda": sp.lambda_R(R),
        "pair_statistics": pairs, "rho_slope": rho["slope"],
    }
    return _finish(man, out, t0)


def random_balanced_instance(rng, k: int) -> AtomicMeasure:
    """k unit positive and k unit negative atoms in [-1, 1]^2."""
    pts = rng.uniform(-1, 1, (2 * k, 2))
    return AtomicMeasure(pts, np.r_[np.ones(k), -np.ones(k)])


def brute_force_connection(mu: AtomicMeasure) -> float:
    pos = mu.points[mu.weights > 0]
    neg = mu.points[mu.weights < 0]
    best = math.inf
    for perm in itertools.permutations(range(len(neg))):
        best = min(best, float(np.sum(np.hypot(*(pos - neg[list(perm)]).T))))
    return best


def interpolation_instance(rng, M: float = 4.0, max_atoms: int = 6) -> AtomicMeasure:
    """Difference of two random atomic probability measures with second moments <= M."""
    parts = []
    for sign in (1.0, -1.0):
        k = int(rng.integers(1, max_atoms + 1))
        pts = rng.normal(0.0, 1.0, (k, 2))
        w = rng.dirichlet(np.ones(k))
        m2 = float(w @ np.sum(pts**2, axis=1))
        lim = M * rng.uniform(0.1, 1.0)
        if m2 > lim:
            pts *= math.sqrt(lim / m2)
        parts.append(AtomicMeasure(pts, sign * w))
    return parts[0] + parts[1]


def norms_suite_experiment(cfg: dict, out) -> RunManifest:
    t0 = time.time()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg["params"]
    rng = sp.make_rng(cfg["seed"])
    man = RunManifest("norms_suite", cfg)
    mismatches = 0
    for _ in range(p["brute_instances"]):
        mu = random_balanced_instance(rng, int(rng.integers(1, p["max_pairs"] + 1)))
        if abs(minimal_connection(mu) - brute_force_connection(mu)) > 1e-9:
            mismatches += 1
    rows = []
    for i in range(p["interp_instances"]):
        mu = interpolation_instance(rng, p["M"])
        x = xlog_distance(mu)
        w = wminus2_estimate(mu, N=p["wgrid_N"])
        ratio = x.upper / (math.sqrt(p["M"]) * w.upper**0.25)
        rows.append([i, x.lower, x.upper, w.lower, w.upper, ratio])
    write_text(out, "interpolation.csv",
               csv_text(["instance", "xlog_lower", "xlog_upper", "w21_lower", "w21_upper",
                         "ratio"], rows), man)
    ratios = np.array([r[-1] for r in rows])
    man.results = {
        "brute_force_mismatches": mismatches,
        "ratio_max": float(ratios.max()), "ratio_median": float(np.median(ratios)),
        "ratio_bounded": bool(ratios.max() <= 10 * np.median(ratios)),
    }
    return _finish(man, out, t0)


def euler_suite_experiment(cfg: dict, out) -> RunManifest:
    t0 = time.time()
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    p = cfg["params"]
    man = RunManifest("euler_suite", cfg)
    st0 = eu.gaussian_state(p["N"], p["L"], p["sigma"])
    states = eu.run_euler(st0, p["T"], samples=p["samples"])
    norm0 = math.sqrt(np.sum(st0.omega**2))
    rows = []
    for st in states:
        rel = math.sqrt(np.sum((st.omega - st0.omega) ** 2)) / norm0
        rows.append([st.time, eu.enstrophy(st), eu.circulation(st), eu.kinetic_energy(st), rel])
    write_text(out, "euler.csv", csv_text(["t", "enstrophy", "circulation", "kinetic_energy",
                                           "rel_change"], rows), man)
    ens = np.array([r[1] for r in rows])
    rng = sp.make_rng(cfg["seed"], stream=7)
    conf = sp.sample_uniform_ball(p["weak_n"], 1.0, cfg["seed"], stream=8)
    tr = integrate(conf, 1.0, scaling="mean_field", samples=11)
    res = [eu.weak_residual(tr, eu.SpaceTimeBump.random(rng, (0.0, 1.0)))["residual"]
           for _ in range(p["weak_tests"])]
    man.results = {
        "max_rel_change": float(max(r[-1] for r in rows)),
        "enstrophy_drift": float(np.max(np.abs(ens - ens[0])) / ens[0]),
        "weak_residual_max": float(np.max(np.abs(res))),
        "weak_residual_diagonal": "excluded",
    }
    return _finish(man, out, t0)


RUNNERS = {
    "gp_vs_ode": gp_vs_ode_experiment,
    "pv_trajectory": pv_trajectory_experiment,
    "hydrodynamic": hydrodynamic_experiment,
    "sampler_stats": sampler_stats_experiment,
    "norms_suite": norms_suite_experiment,
    "euler_suite": euler_suite_experiment,
}


def run_experiment(cfg: dict, out=None) -> RunManifest:
    """Validate ``cfg`` and run its scenario into ``out`` (or the config's ``out``)."""
    cfg = validate_config(cfg)
    out = out or cfg.get("out") or f"runs/{cfg['scenario']}"
    cfg["out"] = str(out)
    return RUNNERS[cfg["scenario"]](cfg, out)


def verify_manifest(out) -> tuple[RunManifest, list]:
    """Reload a manifest and recompute every listed hash; returns mismatches."""
    from .io import sha256_file

    out = Path(out)
    man = RunManifest.read(out / "manifest.json")
    bad = []
    for name, digest in man.files.items():
        q = out / name
        if not q.exists() or sha256_file(q) != digest:
            bad.append(name)
    return man, bad
