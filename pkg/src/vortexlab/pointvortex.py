"""Kirchhoff-Onsager point-vortex dynamics.

Two time scalings are supported:

``gp``          da_j/dt = 2 pi sum_{k != j} d_k K(a_j - a_k)
``mean_field``  db_j/dt = (1/n) sum_{k != j} d_k K(b_j - b_k)

so that ``b(t) = a(t / (2 pi n))``. Integration uses scipy's Dormand-Prince
5(4) pair with dense output and a terminal collision event.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.spatial.distance import pdist

from .errors import InvariantError, SingularityError
from .geometry import TWO_PI, VortexConfiguration, kirchhoff_onsager
from .norms import AtomicMeasure


@dataclass(frozen=True)
class IntegratorSettings:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = np.inf
    collision_floor: float = 1e-6

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not 0 < v <= 1e-2:
                raise ValueError(f"{name} must lie in (0, 1e-2], got {v}")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if not self.collision_floor > 0:
            raise ValueError("collision_floor must be positive")


def _prefactor(scaling: str, n: int, n_mf: int | None) -> float:
    if scaling == "gp":
        return TWO_PI
    if scaling == "mean_field":
        return 1.0 / (n if n_mf is None else n_mf)
    raise ValueError(f"unknown scaling {scaling!r}")


def _velocity_numpy(pos, deg, pref):
    # sum_k d_k (a_j - a_k)_perp / (2 pi |a_j - a_k|^2); in complex form x_perp / |x|^2 = i / conj(x)
    z = pos[:, 0] + 1j * pos[:, 1]
    dz = z[:, None] - z[None, :]
    np.fill_diagonal(dz, np.inf)
    if np.any(dz == 0):
        raise SingularityError("coincident vortices")
    v = 1j * ((1.0 / np.conj(dz)) @ deg)
    return (pref / TWO_PI) * np.column_stack([v.real, v.imag])


try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

if njit is not None:
    @njit(cache=True)
    def _pair_sums(x, y, deg):
        n = x.shape[0]
        vx = np.zeros(n)
        vy = np.zeros(n)
        for i in range(n):
            for j in range(i + 1, n):
                dx = x[i] - x[j]
                dy = y[i] - y[j]
                r2 = dx * dx + dy * dy
                if r2 == 0.0:
                    return vx, vy, True
                inv = 1.0 / r2
                vx[i] -= deg[j] * dy * inv
                vy[i] += deg[j] * dx * inv
                vx[j] += deg[i] * dy * inv
                vy[j] -= deg[i] * dx * inv
        return vx, vy, False

    def _velocity(pos, deg, pref):
        if len(pos) < 64:  # below this the compiled loop gains nothing
            return _velocity_numpy(pos, deg, pref)
        vx, vy, hit = _pair_sums(np.ascontiguousarray(pos[:, 0]),
                                 np.ascontiguousarray(pos[:, 1]), deg)
        if hit:
            raise SingularityError("coincident vortices")
        return (pref / TWO_PI) * np.column_stack([vx, vy])
else:  # pragma: no cover
    _velocity = _velocity_numpy


def ode_velocity(config: VortexConfiguration, scaling: str = "gp", n: int | None = None):
    """Velocities of all vortices, shape ``(n, 2)``."""
    pref = _prefactor(scaling, config.n, n)
    return _velocity(config.positions, config.degrees.astype(float), pref)


def _min_sep(pos):
    if len(pos) < 2:
        return np.inf
    return float(pdist(pos).min())


@dataclass
class Trajectory:
    """Sampled point-vortex trajectory with its conserved-quantity diagnostics."""

    times: np.ndarray
    positions: np.ndarray  # (K, n, 2)
    degrees: np.ndarray
    scaling: str = "gp"
    status: str = "ok"
    W: np.ndarray = None
    m2: np.ndarray = None
    center: np.ndarray = None
    rho: np.ndarray = None
    rho_integral: np.ndarray = None
    dense: object = field(default=None, repr=False)
    time_factor: float = 1.0
    prefactor: float = TWO_PI

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.positions = np.asarray(self.positions, float)
        dt = np.diff(self.times)
        if len(dt) and not (np.all(dt > 0) or np.all(dt < 0)):
            raise InvariantError("trajectory times must be strictly monotone")
        if self.W is None:
            self._diagnose()

    def _diagnose(self):
        deg = self.degrees
        self.W = np.array([kirchhoff_onsager(p, deg) for p in self.positions])
        self.m2 = np.sum(self.positions**2, axis=(1, 2))
        self.center = self.positions.sum(axis=1)
        self.rho = np.array([0.25 * min(1.0, _min_sep(p)) for p in self.positions])
        inc = 0.5 * (self.rho[1:] ** -2 + self.rho[:-1] ** -2) * np.abs(np.diff(self.times))
        self.rho_integral = np.concatenate([[0.0], np.cumsum(inc)])

    @property
    def n(self) -> int:
        return self.positions.shape[1]

    def state(self, k: int) -> VortexConfiguration:
        return VortexConfiguration(self.positions[k], self.degrees)

    @property
    def states(self):
        return [self.state(k) for k in range(len(self.times))]

    def positions_at(self, t):
        """Dense-output positions at time(s) ``t``; shape ``(..., n, 2)``."""
        if self.dense is None:
            raise ValueError("trajectory carries no dense output")
        t = np.asarray(t, float)
        y = self.dense(t)
        return np.moveaxis(y, 0, -1).reshape(t.shape + (self.n, 2))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["t"]
        for j in range(self.n):
            head += [f"x{j + 1}", f"y{j + 1}"]
        w.writerow(head + ["W", "m2", "rho"])
        for k, t in enumerate(self.times):
            row = [t, *self.positions[k].ravel(), self.W[k], self.m2[k], self.rho[k]]
            w.writerow(["%.17g" % v for v in row])
        return buf.getvalue()


def integrate(config: VortexConfiguration, T: float, settings: IntegratorSettings | None = None,
              scaling: str = "gp", samples=201, n: int | None = None,
              time_factor: float = 1.0) -> Trajectory:
    """Integrate to time ``T`` (negative ``T`` integrates backwards).

    ``samples`` is either a count of uniformly spaced output times or an
    explicit increasing array starting at 0. ``time_factor`` multiplies the
    right-hand side, i.e. the ODE runs on the clock ``tau = time_factor * t``.
    A pairwise distance below ``collision_floor`` stops the run with status
    ``"collision"``; the partial trajectory is returned.
    """
    settings = settings or IntegratorSettings()
    if T == 0:
        raise ValueError("T must be nonzero")
    pref = _prefactor(scaling, config.n, n) * time_factor
    deg = config.degrees.astype(float)
    nv = config.n
    if np.isscalar(samples):
        t_eval = np.linspace(0.0, T, int(samples))
    else:
        t_eval = np.asarray(samples, float)

    def rhs(_t, y):
        return _velocity(y.reshape(nv, 2), deg, pref).ravel()

    def collide(_t, y):
        return _min_sep(y.reshape(nv, 2)) - settings.collision_floor

    collide.terminal = True
    if nv > 1 and _min_sep(config.positions) < settings.collision_floor:
        return Trajectory(times=t_eval[:1], positions=config.positions[None].copy(),
                          degrees=config.degrees, scaling=scaling, status="collision",
                          time_factor=time_factor, prefactor=pref)
    events = [collide] if nv > 1 else None
    sol = solve_ivp(rhs, (0.0, T), config.positions.ravel().copy(), method="RK45",
                    t_eval=t_eval, dense_output=True, events=events,
                    rtol=settings.rel_tol, atol=settings.abs_tol, max_step=settings.max_step)
    if sol.status < 0:
        raise RuntimeError(f"integration failed: {sol.message}")
    status = "collision" if sol.status == 1 else "ok"
    pos = sol.y.T.reshape(-1, nv, 2)
    # backwards runs keep their (decreasing) clock
    return Trajectory(times=sol.t, positions=pos, degrees=config.degrees, scaling=scaling,
                      status=status, dense=sol.sol, time_factor=time_factor, prefactor=pref)


def conserved_drift(traj: Trajectory) -> dict:
    """Max relative drift |q(t) - q(0)| / (1 + |q(0)|) of W, sum |a|^2 and sum a."""
    if len(traj.times) < 2:
        raise ValueError("need at least two samples")
    out = {}
    for name, series in (("W", traj.W), ("m2", traj.m2)):
        out[name] = float(np.max(np.abs(series - series[0])) / (1.0 + abs(series[0])))
    c0 = traj.center[0]
    out["center"] = float(np.max(np.hypot(*(traj.center - c0).T)) / (1.0 + np.hypot(*c0)))
    return out


def tau_star(traj: Trajectory, eps: float, C: float = 1.0, n: int | None = None) -> float:
    """sup{T : C n int_0^T rho^-2 dt <= |ln eps|}, by linear interpolation."""
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    n = traj.n if n is None else n
    budget = abs(np.log(eps)) / (C * n)
    I = traj.rho_integral
    times = np.abs(traj.times)
    if I[-1] <= budget:
        return float(times[-1])
    k = int(np.searchsorted(I, budget, side="right"))
    t0, t1 = times[k - 1], times[k]
    frac = (budget - I[k - 1]) / (I[k] - I[k - 1])
    return float(t0 + frac * (t1 - t0))


def empirical_measure(config: VortexConfiguration, convention: str = "mean") -> AtomicMeasure:
    """Atoms at the vortices with weight 1/n (``mean``) or pi d_j (``pi``)."""
    if convention == "mean":
        w = np.full(config.n, 1.0 / config.n)
    elif convention == "pi":
        w = np.pi * config.degrees.astype(float)
    else:
        raise ValueError(f"unknown convention {convention!r}")
    return AtomicMeasure(config.positions, w)
