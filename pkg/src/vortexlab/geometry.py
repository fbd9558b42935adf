"""Static geometry and energetics of point-vortex configurations."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantError, SingularityError

TWO_PI = 2.0 * np.pi


def perp(x):
    """Rotate vectors by +90 degrees: (x1, x2) -> (-x2, x1)."""
    x = np.asarray(x, dtype=float)
    return np.stack([-x[..., 1], x[..., 0]], axis=-1)


@dataclass(frozen=True)
class VortexConfiguration:
    """Positions ``(n, 2)`` and degrees ``(n,)`` in {-1, +1}."""

    positions: np.ndarray
    degrees: np.ndarray = field(default=None)

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        if pos.shape[0] < 1:
            raise InvariantError("a configuration needs at least one vortex")
        if not np.isfinite(pos).all():
            raise InvariantError("positions must be finite")
        if self.degrees is None:
            deg = np.ones(pos.shape[0], dtype=int)
        else:
            deg = np.array(self.degrees).reshape(-1)
            if deg.shape[0] != pos.shape[0]:
                raise InvariantError("degrees and positions differ in length")
            if not np.all(np.isin(deg, (-1, 1))):
                raise InvariantError("degrees must be +1 or -1")
            deg = deg.astype(int)
        if pos.shape[0] > 1 and _min_separation(pos) == 0.0:
            raise InvariantError("vortex positions must be pairwise distinct")
        pos.setflags(write=False)
        deg.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "degrees", deg)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def total_degree(self) -> int:
        return int(self.degrees.sum())

    def translated(self, shift) -> "VortexConfiguration":
        return VortexConfiguration(self.positions + np.asarray(shift, float), self.degrees)

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist(), "degrees": self.degrees.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "VortexConfiguration":
        return cls(np.asarray(doc["positions"], float), doc.get("degrees"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "VortexConfiguration":
        return cls.from_dict(json.loads(text))


def _pair_distances(pos):
    diff = pos[:, None, :] - pos[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def _min_separation(pos):
    d = _pair_distances(pos)
    np.fill_diagonal(d, np.inf)
    return float(d.min())


@dataclass(frozen=True)
class SeparationScales:
    rho: float
    R: float


@dataclass(frozen=True)
class EnergyReport:
    W: float
    W_eps: float
    second_moment: float
    log_pair_avg: float


def biot_savart_kernel(x):
    """K(x) = x_perp / (2 pi |x|^2); accepts a point or an array of points."""
    x = np.asarray(x, dtype=float)
    r2 = np.sum(x * x, axis=-1)
    if np.any(r2 == 0.0):
        raise SingularityError("Biot-Savart kernel is singular at the origin")
    return perp(x) / (TWO_PI * r2[..., None])


def separation_scales(config: VortexConfiguration) -> SeparationScales:
    pos = config.positions
    if config.n > 1:
        dmin = _min_separation(pos)
        if dmin == 0.0:
            raise InvariantError("coincident vortices")
    else:
        dmin = np.inf
    rho = 0.25 * min(1.0, dmin)
    R = 4.0 * max(1.0, float(np.max(np.hypot(pos[:, 0], pos[:, 1]))))
    return SeparationScales(rho=rho, R=R)


def kirchhoff_onsager(positions, degrees) -> float:
    """W = -pi * sum over ordered pairs j != k of d_j d_k ln|a_j - a_k|."""
    pos = np.asarray(positions, float)
    if pos.shape[0] < 2:
        return 0.0
    d = _pair_distances(pos)
    dd = np.outer(degrees, degrees).astype(float)
    iu = np.triu_indices(pos.shape[0], 1)
    # each unordered pair appears twice in the ordered sum
    return float(-2.0 * np.pi * np.sum(dd[iu] * np.log(d[iu])))


def energies(config: VortexConfiguration, eps: float, gamma: float) -> EnergyReport:
    n = config.n
    W = kirchhoff_onsager(config.positions, config.degrees)
    W_eps = n * (np.pi * abs(np.log(eps)) + gamma) + W
    m2 = float(np.mean(np.sum(config.positions**2, axis=1)))
    if n > 1:
        d = _pair_distances(config.positions)
        iu = np.triu_indices(n, 1)
        log_avg = float(-2.0 * np.sum(np.log(d[iu])) / (n * (n - 1)))
    else:
        log_avg = float("nan")
    return EnergyReport(W=W, W_eps=float(W_eps), second_moment=m2, log_pair_avg=log_avg)


def _displacements(config, x):
    x = np.asarray(x, dtype=float)
    z = x[..., None, :] - config.positions  # (..., n, 2)
    r2 = np.sum(z * z, axis=-1)
    if np.any(r2 == 0.0):
        raise SingularityError("evaluation point coincides with a vortex")
    return z, r2


def canonical_harmonic_map(config: VortexConfiguration, x):
    """prod_j ((x - a_j)/|x - a_j|)^{d_j}, unit-modulus complex values."""
    z, r2 = _displacements(config, x)
    w = (z[..., 0] + 1j * z[..., 1]) / np.sqrt(r2)
    w = np.where(config.degrees > 0, w, np.conj(w))
    return np.prod(w, axis=-1)


def canonical_current(config: VortexConfiguration, x):
    """j(u_*)(x) = sum_i d_i (x - a_i)_perp / |x - a_i|^2."""
    z, r2 = _displacements(config, x)
    terms = perp(z) * (config.degrees / r2)[..., None]
    return terms.sum(axis=-2)


def mbounds_check(config: VortexConfiguration, M0: float):
    """Check the second-moment and log-separation bounds against ``M0``.

    Returns ``(ok, report)``; for a single vortex only the second moment is
    defined and ``report["log_pair_avg"]`` is None.
    """
    rep = energies(config, eps=0.5, gamma=0.0)
    report = {"second_moment": rep.second_moment, "log_pair_avg": None, "M0": M0}
    ok = rep.second_moment <= M0
    if config.n >= 2:
        report["log_pair_avg"] = rep.log_pair_avg
        ok = ok and rep.log_pair_avg <= M0
    return bool(ok), report
