"""Random vortex configurations: uniform law on a 2n-ball and admissible sets.

Generator: numpy's Philox-4x64 counter-based bit generator keyed by
``(seed, stream)``. Uniform doubles come from ``Generator.random``; Gaussians
are formed by Box-Muller from consecutive uniforms (u1 -> 1 - u1 to avoid
log 0). Each sample consumes 2n uniforms for its Gaussian vector and one more
for the radial variable, in that order, so draws are reproducible given the
seed, the stream index and this recipe.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .geometry import VortexConfiguration
from .norms import AtomicMeasure


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _box_muller(u):
    """Pairs of uniforms (..., 2k) -> standard normals (..., 2k)."""
    u1 = 1.0 - u[..., 0::2]
    u2 = u[..., 1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    out = np.empty_like(u)
    out[..., 0::2] = r * np.cos(2 * np.pi * u2)
    out[..., 1::2] = r * np.sin(2 * np.pi * u2)
    return out


def uniform_ball_draws(n: int, R: float, rng: np.random.Generator, count: int) -> np.ndarray:
    """``count`` points uniform on the ball of radius R sqrt(n) in R^{2n}, as (count, n, 2).

    Z has density prod_i G(z_i) with G(z) = exp(-|z|^2)/pi, S = U^{1/(2n)},
    and Y = (Z / |Z|) R sqrt(n) S.
    """
    if n < 1:
        raise ValueError("n must be positive")
    u = rng.random((count, 2 * n + 1))
    Z = _box_muller(u[:, : 2 * n]) / math.sqrt(2.0)
    S = u[:, 2 * n] ** (1.0 / (2 * n))
    norm = np.linalg.norm(Z, axis=1)
    Y = Z / norm[:, None] * (R * math.sqrt(n) * S)[:, None]
    return Y.reshape(count, n, 2)


def sample_uniform_ball(n: int, R: float, seed: int, stream: int = 0) -> VortexConfiguration:
    """One configuration (degrees +1) drawn uniformly from B^{2n}_{R sqrt n}."""
    Y = uniform_ball_draws(n, R, make_rng(seed, stream), 1)[0]
    return VortexConfiguration(Y)


def _log_energy(Y):
    """-sum_{i != j} ln |a_i - a_j| for each row of (m, n, 2)."""
    n = Y.shape[1]
    d = np.hypot(Y[:, :, None, 0] - Y[:, None, :, 0], Y[:, :, None, 1] - Y[:, None, :, 1])
    iu = np.triu_indices(n, 1)
    return -2.0 * np.sum(np.log(d[:, iu[0], iu[1]]), axis=1)


@dataclass
class SampleBatch:
    seed: int
    n: int
    M: float
    R: float
    samples: list = field(default_factory=list)
    attempts: int = 0
    accepted: int = 0

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.attempts if self.attempts else 0.0

    def positions(self) -> np.ndarray:
        return np.array([c.positions for c in self.samples])

    def to_jsonl(self) -> str:
        return "".join(c.to_json() + "\n" for c in self.samples)

    def manifest(self) -> dict:
        return {"seed": self.seed, "n": self.n, "M": self.M, "R": self.R,
                "attempts": self.attempts, "accepted": self.accepted,
                "acceptance_rate": self.acceptance_rate}


def sample_admissible(n: int, M: float, R: float, seed: int, max_attempts: int,
                      target: int | None = None, stream: int = 0,
                      block: int = 4096) -> SampleBatch:
    """Rejection-sample the uniform ball, keeping draws with
    -sum_{i != j} ln|a_i - a_j| <= n (n - 1) M.

    Stops after ``target`` acceptances (if given) or ``max_attempts`` draws.
    """
    if not (M > 0 and R > 0):
        raise ValueError("M and R must be positive")
    if n < 2:
        raise ValueError("the admissibility constraint needs n >= 2")
    rng = make_rng(seed, stream)
    batch = SampleBatch(seed=seed, n=n, M=M, R=R)
    bound = n * (n - 1) * M
    while batch.attempts < max_attempts:
        m = min(block, max_attempts - batch.attempts)
        Y = uniform_ball_draws(n, R, rng, m)
        ok = _log_energy(Y) <= bound
        idx = np.flatnonzero(ok)
        if target is not None:
            need = target - batch.accepted
            if len(idx) >= need:
                # count attempts only up to the draw that completed the target
                idx = idx[:need]
                m = int(idx[-1]) + 1 if need > 0 else 0
        batch.attempts += m
        for k in idx:
            batch.samples.append(VortexConfiguration(Y[k]))
        batch.accepted = len(batch.samples)
        if target is not None and batch.accepted >= target:
            break
    if batch.accepted == 0:
        raise RuntimeError(f"no admissible samples in {batch.attempts} attempts; try a larger M")
    return batch


def lambda_R(R: float) -> float:
    """lambda(R) = -int_0^inf ln(sqrt(2t)) e^{-t/R^2} dt / R^2."""
    return -(0.5 * math.log(2.0) + math.log(R) - 0.5 * np.euler_gamma)


def M0(R: float) -> float:
    """Threshold 3 lambda(R) + 8 R^2 above which half the ball is admissible."""
    return 3.0 * lambda_R(R) + 8.0 * R**2


def _quad(fun, a, b):
    val, err = integrate.quad(fun, a, b, limit=400, points=None if np.isinf(b) else None)
    if not np.isfinite(val) or err > 1e-6 * max(1.0, abs(val)):
        raise RuntimeError(f"pair-statistic quadrature did not converge (err {err:.2e})")
    return val


def pair_exact(f, n: int, R: float) -> float:
    """(1/R^2) int_0^{n R^2} f(sqrt(2t)) (1 - t/(n R^2))^{n-1} dt."""
    T = n * R**2
    return _quad(lambda t: f(math.sqrt(2 * t)) * (1 - t / T) ** (n - 1), 0.0, T) / R**2


def pair_limit(f, R: float) -> float:
    """(1/R^2) int_0^inf f(sqrt(2t)) exp(-t/R^2) dt."""
    return _quad(lambda t: f(math.sqrt(2 * t)) * math.exp(-t / R**2), 0.0, np.inf) / R**2


def pair_statistic(f, n: int, R: float, samples: int, seed: int, stream: int = 0) -> dict:
    """Monte-Carlo mean of F_n(a) = (1/(n(n-1))) sum_{i != j} f(|a_i - a_j|) over the ball.

    ``f`` must accept numpy arrays. Returns the mean, its standard error,
    the exact finite-n value and the n -> infinity limit.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = make_rng(seed, stream)
    vals = []
    left = samples
    while left > 0:
        m = min(left, 8192)
        Y = uniform_ball_draws(n, R, rng, m)
        d = np.hypot(Y[:, :, None, 0] - Y[:, None, :, 0], Y[:, :, None, 1] - Y[:, None, :, 1])
        iu = np.triu_indices(n, 1)
        vals.append(np.mean(f(d[:, iu[0], iu[1]]), axis=1))
        left -= m
    v = np.concatenate(vals)
    return {"mean": float(v.mean()), "stderr": float(v.std(ddof=1) / math.sqrt(len(v))),
            "exact": pair_exact(lambda r: float(f(np.asarray(r))), n, R),
            "limit": pair_limit(lambda r: float(f(np.asarray(r))), R), "samples": samples}


def _rho_inv_sq(Y):
    n = Y.shape[1]
    d = np.hypot(Y[:, :, None, 0] - Y[:, None, :, 0], Y[:, :, None, 1] - Y[:, None, :, 1])
    d[:, np.arange(n), np.arange(n)] = np.inf
    rho = 0.25 * np.minimum(1.0, d.min(axis=(1, 2)))
    return rho**-2


def rho_inverse_square_expectation(n_list, M: float, R: float, samples: int, seed: int,
                                   max_attempts_factor: int = 4) -> dict:
    """Per-n Monte-Carlo mean of rho_a^-2 over A(n, M, R) and a log-log slope in n."""
    means, errs, rates = [], [], []
    for k, n in enumerate(n_list):
        b = sample_admissible(n, M, R, seed, max_attempts=max_attempts_factor * samples,
                              target=samples, stream=k)
        if b.accepted < samples // 2:
            raise RuntimeError(f"only {b.accepted} admissible samples at n={n}")
        r = _rho_inv_sq(b.positions())
        means.append(float(r.mean()))
        errs.append(float(r.std(ddof=1) / math.sqrt(len(r))))
        rates.append(b.acceptance_rate)
    slope = float(np.polyfit(np.log(n_list), np.log(means), 1)[0]) if len(n_list) > 1 else float("nan")
    return {"n": list(n_list), "mean": means, "stderr": errs, "acceptance": rates, "slope": slope}


def gaussian_atoms(n_r: int = 20, n_theta: int = 40, R: float = 1.0) -> AtomicMeasure:
    """Equal-mass polar quantisation of G_R(x) = exp(-|x|^2/R^2) / (pi R^2).

    Ring radii sit at radial mass-quantile midpoints, angles are staggered
    between rings; total mass one.
    """
    p = (np.arange(n_r) + 0.5) / n_r
    r = R * np.sqrt(-np.log(1.0 - p))
    pts = []
    for k, rk in enumerate(r):
        th = 2 * np.pi * (np.arange(n_theta) + 0.5 * (k % 2)) / n_theta
        pts.append(np.column_stack([rk * np.cos(th), rk * np.sin(th)]))
    pts = np.vstack(pts)
    return AtomicMeasure(pts, np.full(len(pts), 1.0 / len(pts)))


def batch_to_json(batch: SampleBatch) -> str:
    return json.dumps(batch.manifest())
