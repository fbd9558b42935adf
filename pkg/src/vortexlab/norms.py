"""Distances between signed measures in the plane.

Three families are provided:

* the minimal-connection (transport) norm, solved exactly;
* a certified bracket ``[lower, upper]`` for the log-weighted dual norm whose
  test functions satisfy ``(1 + ln+|x|) |D phi(x)| <= 1``;
* a grid linear program bounding the ``W^{-2,1}`` norm.

Upper brackets come from feasible transport plans under the straight-line
weighted cost; lower brackets come from explicit admissible test functions,
so ``lower <= norm <= upper`` holds up to quadrature round-off.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.optimize import linear_sum_assignment, linprog
from scipy.special import expi

from .errors import UnbalancedMeasureError

_GL_X, _GL_W = np.polynomial.legendre.leggauss(10)


# ---------------------------------------------------------------- measures


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite sum of weighted Dirac masses."""

    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float).reshape(-1, 2)
        w = np.array(self.weights, dtype=float).reshape(-1)
        if pts.shape[0] != w.shape[0]:
            raise ValueError("points and weights differ in length")
        keep = w != 0.0
        object.__setattr__(self, "points", pts[keep])
        object.__setattr__(self, "weights", w[keep])

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    @property
    def variation(self) -> float:
        return float(np.abs(self.weights).sum())

    def __add__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return AtomicMeasure(np.vstack([self.points, other.points]),
                             np.concatenate([self.weights, other.weights]))

    def __neg__(self) -> "AtomicMeasure":
        return AtomicMeasure(self.points, -self.weights)

    def __sub__(self, other: "AtomicMeasure") -> "AtomicMeasure":
        return self + (-other)

    def scaled(self, factor: float) -> "AtomicMeasure":
        return AtomicMeasure(self.points, factor * self.weights)

    @classmethod
    def empty(cls) -> "AtomicMeasure":
        return cls(np.zeros((0, 2)), np.zeros(0))

    def to_dict(self) -> dict:
        return {"atoms": [[float(p[0]), float(p[1]), float(w)]
                          for p, w in zip(self.points, self.weights)]}

    @classmethod
    def from_dict(cls, doc: dict) -> "AtomicMeasure":
        atoms = np.asarray(doc["atoms"], float).reshape(-1, 3)
        return cls(atoms[:, :2], atoms[:, 2])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "AtomicMeasure":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class GridMeasure:
    """Signed measure on a uniform square grid of cell-centred atoms.

    ``values[i, j]`` is the mass of cell (i, j), i.e. density times ``h**2``;
    the first index runs along x.
    """

    center: tuple
    half_width: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("values must be a square array")
        if v.shape[0] < 8:
            raise ValueError("grid measures need N >= 8")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def h(self) -> float:
        return 2.0 * self.half_width / self.n

    def axes(self):
        off = -self.half_width + (np.arange(self.n) + 0.5) * self.h
        return self.center[0] + off, self.center[1] + off

    @property
    def total_mass(self) -> float:
        return float(self.values.sum())

    def to_atomic(self) -> AtomicMeasure:
        xs, ys = self.axes()
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        return AtomicMeasure(np.column_stack([X.ravel(), Y.ravel()]), self.values.ravel())


@dataclass(frozen=True)
class NormBracket:
    lower: float
    upper: float
    method: str = ""
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ValueError("bracket ends must be finite")
        if self.lower < 0 or self.upper < self.lower:
            raise ValueError(f"invalid bracket [{self.lower}, {self.upper}]")

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "method": self.method,
                "parameters": self.parameters}


# ------------------------------------------------------ log-weighted metric


def log_weight(x):
    """omega(x) = 1 + ln+|x|."""
    x = np.asarray(x, float)
    return 1.0 + np.log(np.maximum(np.hypot(x[..., 0], x[..., 1]), 1.0))


def _li_shift(t):
    # antiderivative of 1/(1 + ln t) for t >= 1
    return np.exp(-1.0) * expi(1.0 + np.log(t))


def anchored_ramp(z, y):
    """Admissible ramp anchored at ``y``: integral of 1/(1+ln+(|y|+s)) over [0, |z-y|].

    Its gradient has size 1/(1+ln+(|y|+|z-y|)) <= 1/(1+ln+|z|), so the
    weighted Lipschitz seminorm is at most one. Broadcasts over z and y.
    """
    z = np.asarray(z, float)
    y = np.asarray(y, float)
    b = np.hypot(y[..., 0], y[..., 1])
    r = np.hypot(z[..., 0] - y[..., 0], z[..., 1] - y[..., 1])
    inner = np.clip(1.0 - b, 0.0, None)
    s_in = np.minimum(r, inner)
    lo = np.maximum(b, 1.0)
    hi = np.maximum(b + r, lo)
    out = np.where(hi > lo, _li_shift(hi) - _li_shift(lo), 0.0)
    return s_in + out


def radial_ramp(z):
    """Psi(|z|) with Psi' = 1/(1 + ln+ r); seminorm exactly one."""
    return anchored_ramp(z, np.zeros(2))


def xlog_cost(P, Q, chunk=200_000):
    """Straight-line weighted length c(x, y) = int_0^1 |y-x| / omega(x + t(y-x)) dt.

    Returns the ``(len(P), len(Q))`` matrix. The part of each segment inside
    the unit disk has weight one and is integrated exactly; the outer pieces
    use split Gauss-Legendre quadrature.
    """
    P = np.asarray(P, float).reshape(-1, 2)
    Q = np.asarray(Q, float).reshape(-1, 2)
    out = np.empty((P.shape[0], Q.shape[0]))
    rows = max(1, chunk // max(Q.shape[0], 1))
    for s in range(0, P.shape[0], rows):
        out[s:s + rows] = _xlog_cost_block(P[s:s + rows], Q)
    return out


def _xlog_cost_block(P, Q):
    x = P[:, None, :]
    d = Q[None, :, :] - x
    A = np.sum(d * d, axis=-1)
    L = np.sqrt(A)
    B = 2.0 * np.sum(x * d, axis=-1)
    C = np.sum(x * x, axis=-1) - 1.0
    C = np.broadcast_to(C, A.shape)
    disc = B * B - 4.0 * A * C
    has = (disc > 0) & (A > 0)
    sq = np.sqrt(np.where(has, disc, 0.0))
    Asafe = np.where(A > 0, A, 1.0)
    t1 = np.where(has, (-B - sq) / (2 * Asafe), 1.0)
    t2 = np.where(has, (-B + sq) / (2 * Asafe), 1.0)
    lo = np.clip(t1, 0.0, 1.0)
    hi = np.clip(t2, 0.0, 1.0)
    inside = has & (hi > lo)
    cost = np.where(inside, (hi - lo) * L, 0.0)
    # outer pieces: [0, lo] and [hi, 1] when the chord is hit, else [0, 1]
    a1 = np.zeros_like(A)
    b1 = np.where(inside, lo, 1.0)
    a2 = np.where(inside, hi, 1.0)
    b2 = np.ones_like(A)
    for a, b in ((a1, b1), (a2, b2)):
        m = 0.5 * (a + b)
        for sa, sb in ((a, m), (m, b)):
            half = 0.5 * (sb - sa)
            if not np.any(half > 0):
                continue
            mid = 0.5 * (sa + sb)
            acc = np.zeros_like(A)
            for xk, wk in zip(_GL_X, _GL_W):
                t = mid + half * xk
                zx = x[..., 0] + t * d[..., 0]
                zy = x[..., 1] + t * d[..., 1]
                rr = np.maximum(np.hypot(zx, zy), 1.0)
                acc += wk / (1.0 + np.log(rr))
            cost += half * acc * L
    return cost


def euclidean_cost(P, Q):
    P = np.asarray(P, float).reshape(-1, 2)
    Q = np.asarray(Q, float).reshape(-1, 2)
    diff = P[:, None, :] - Q[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


# ------------------------------------------------------------- transport


@dataclass
class TransportResult:
    value: float
    method: str
    u: np.ndarray | None = None  # potentials on positive atoms
    v: np.ndarray | None = None  # potentials on negative atoms


def _split(mu: AtomicMeasure, balance_tol: float):
    w = mu.weights
    pos = w > 0
    var = float(np.abs(w).sum())
    total = float(w.sum())
    if var > 0 and abs(total) > balance_tol * var:
        raise UnbalancedMeasureError(
            f"total mass {total:.3e} is not zero (variation {var:.3e})")
    return mu.points[pos], w[pos], mu.points[~pos], -w[~pos]


def _equal(w):
    return w.size == 0 or np.allclose(w, w[0], rtol=1e-12, atol=0.0)


LP_MAX_PAIRS = 400_000


def solve_transport(xp, wp, xn, wn, cost_fn, *, duals=False, max_lp=None,
                    max_assignment=3000) -> TransportResult:
    """Exact optimal transport between two positive atomic measures of equal mass.

    Equal-weight problems reduce to an assignment (after replicating atoms to
    a common unit mass) and use ``linear_sum_assignment``; everything else is
    the transport linear program solved by HiGHS, which also yields the
    Kantorovich potentials when ``duals`` is set.
    """
    p, q = len(wp), len(wn)
    if p == 0 or q == 0:
        return TransportResult(0.0, "empty")
    wn = wn * (wp.sum() / wn.sum())
    lp_ok = p * q <= (LP_MAX_PAIRS if max_lp is None else max_lp)
    if _equal(wp) and _equal(wn) and not (duals and lp_ok):
        m = math.lcm(p, q)
        if m <= max_assignment:
            Cm = cost_fn(xp, xn)
            Cr = np.repeat(np.repeat(Cm, m // p, axis=0), m // q, axis=1)
            r, c = linear_sum_assignment(Cr)
            unit = wp.sum() / m
            return TransportResult(float(unit * Cr[r, c].sum()), "assignment")
    if not lp_ok:
        raise ValueError(f"transport problem too large for the LP ({p} x {q})")
    Cfull = cost_fn(xp, xn)
    # unit total mass, and atoms below 1e-13 of it dropped: weights spanning
    # dozens of decades (coarsened grid tails) defeat the LP tolerances
    mass = wp.sum()
    kp = wp > 1e-13 * mass
    kn = wn > 1e-13 * mass
    a = wp[kp] / wp[kp].sum()
    b = wn[kn] / wn[kn].sum()
    Cm = Cfull[np.ix_(kp, kn)]
    p2, q2 = len(a), len(b)
    rows = np.concatenate([np.repeat(np.arange(p2), q2), p2 + np.tile(np.arange(q2), p2)])
    cols = np.concatenate([np.arange(p2 * q2), np.arange(p2 * q2)])
    A = sparse.csr_matrix((np.ones(2 * p2 * q2), (rows, cols)), shape=(p2 + q2, p2 * q2))
    # the last marginal row is implied by the others; presolve can call the
    # system infeasible when both are kept and the masses differ at round-off
    res = linprog(Cm.ravel(), A_eq=A[:-1], b_eq=np.concatenate([a, b])[:-1], bounds=(0, None),
                  method="highs")
    if res.status != 0:
        raise RuntimeError(f"transport LP failed: {res.message}")
    marg = np.append(res.eqlin.marginals, 0.0)  # free constant of the potentials
    u = np.full(p, np.nan)
    v = np.full(q, np.nan)
    u[kp], v[kn] = marg[:p2], marg[p2:]
    # complete the potentials on dropped atoms by c-transforms (keeps u + v <= c)
    if not kp.all():
        u[~kp] = np.min(Cfull[~kp][:, kn] - v[kn][None, :], axis=1)
    if not kn.all():
        v[~kn] = np.min(Cfull[:, ~kn] - u[:, None], axis=0)
    dropped = float(np.sum(wp[~kp]) + np.sum(wn[~kn]))
    value = float(res.fun) * mass + dropped * float(Cfull.max(initial=0.0))
    return TransportResult(value, "lp", u=u, v=v)


def minimal_connection(mu: AtomicMeasure, balance_tol: float = 1e-9) -> float:
    """Length of a minimal connection between the positive and negative parts.

    Equals the dual norm against 1-Lipschitz test functions on the plane.
    """
    xp, wp, xn, wn = _split(mu, balance_tol)
    return solve_transport(xp, wp, xn, wn, euclidean_cost).value


# ------------------------------------------------------- xlog bracket


def _coordinate_ramps(z):
    """Dictionary of clipped coordinate ramps, each rescaled to seminorm <= 1."""
    out = []
    r = np.hypot(z[:, 0], z[:, 1])
    for e in ((1.0, 0.0), (0.0, 1.0), (0.7071067811865476, 0.7071067811865476),
              (0.7071067811865476, -0.7071067811865476)):
        s = z @ np.asarray(e)
        for r0, c in ((0.25, 0.25), (0.5, 0.5), (1.0, 1.0), (2.0, 2.0), (4.0, 4.0)):
            g = np.maximum(0.0, c - np.maximum(r - r0, 0.0))
            out.append(np.clip(s, -g, g) / (1.0 + math.log(max(r0 + c, 1.0))))
    return out


def _project_disk(z):
    r = np.hypot(z[..., 0], z[..., 1])
    return z / np.maximum(r, 1.0)[..., None]


def projected_cone(z, y):
    """|P(z) - P(y)| with P the radial projection onto the closed unit disk.

    P is 1-Lipschitz and |DP(z)| = 1/|z| <= 1/(1 + ln|z|) outside the disk,
    so the seminorm is at most one; on the disk it is the Euclidean cone.
    """
    a = _project_disk(np.asarray(z, float))
    b = _project_disk(np.asarray(y, float))
    return np.hypot(a[..., 0] - b[..., 0], a[..., 1] - b[..., 1])


def _ctransform_lower(xp, wp, xn, wn, v_neg=None, u_pos=None, max_pairs=2e7):
    """Best integral over test functions min_j(k(.;y_j) - v_j) and max_i(u_i - k(.;x_i)).

    Two admissible kernels are tried: the anchored ramp and the projected cone.
    """
    best = 0.0
    pts = np.vstack([xp, xn])
    wts = np.concatenate([wp, -wn])
    for kern in (anchored_ramp, projected_cone):
        if len(pts) * len(xn) <= max_pairs:
            v = np.zeros(len(xn)) if v_neg is None else v_neg
            K = kern(pts[:, None, :], xn[None, :, :])
            phi = np.min(K - v[None, :], axis=1)
            best = max(best, float(wts @ phi))
        if len(pts) * len(xp) <= max_pairs:
            u = np.zeros(len(xp)) if u_pos is None else u_pos
            K = kern(pts[:, None, :], xp[None, :, :])
            phi = np.max(u[None, :] - K, axis=1)
            best = max(best, float(wts @ phi))
    return best


def _capped_cones(points, max_centres=64):
    """Cones anchored at atoms, capped at a few heights (min of admissible maps)."""
    centres = points[:max_centres]
    for y in centres:
        k = anchored_ramp(points, y)
        for cap in (0.1, 0.25, 0.5, 1.0, 2.0):
            yield np.minimum(k, cap)


def _dictionary_lower(points, weights):
    best = 0.0
    psi = radial_ramp(points)
    best = max(best, abs(float(weights @ psi)))
    for phi in _coordinate_ramps(points):
        best = max(best, abs(float(weights @ phi)))
    for phi in _capped_cones(points):
        best = max(best, abs(float(weights @ phi)))
    return best


def aggregate_grid(gm: GridMeasure, max_atoms: int = 3000, metric=euclidean_cost):
    """Quadtree-coarsen a grid measure into at most ``max_atoms`` net atoms.

    Light blocks are collapsed to one atom at their |mass|-weighted centroid.
    Returns ``(atoms, moved)`` where ``moved`` bounds the transport cost of the
    coarsening, sum |m_c| * dist(x_c, representative).
    """
    vals = gm.values
    N = gm.n
    xs, ys = gm.axes()
    absv = np.abs(vals)
    total_abs = float(absv.sum())
    if total_abs == 0.0:
        return AtomicMeasure.empty(), 0.0
    sat = np.zeros((N + 1, N + 1))
    sat[1:, 1:] = absv.cumsum(0).cumsum(1)

    def block_abs(i0, j0, s):
        if i0 >= N or j0 >= N:
            return 0.0
        i1, j1 = min(i0 + s, N), min(j0 + s, N)
        return sat[i1, j1] - sat[i0, j1] - sat[i1, j0] + sat[i0, j0]

    top = 1 << max(0, int(math.floor(math.log2(max(N // 4, 1)))))
    frac = 1e-5
    while True:
        tau = frac * total_abs
        pts, wts, moved = [], [], 0.0
        stack = [(i0, j0, top) for i0 in range(0, N, top) for j0 in range(0, N, top)]
        while stack:
            i0, j0, s = stack.pop()
            ba = block_abs(i0, j0, s)
            if ba == 0.0:
                continue
            if s == 1 or ba <= tau:
                blk = vals[i0:i0 + s, j0:j0 + s]
                ab = absv[i0:i0 + s, j0:j0 + s]
                bx = xs[i0:i0 + blk.shape[0]][:, None]
                by = ys[j0:j0 + blk.shape[1]][None, :]
                cx = float((ab * bx).sum() / ab.sum())
                cy = float((ab * by).sum() / ab.sum())
                if s > 1:
                    moved += float((ab * np.hypot(bx - cx, by - cy)).sum())
                net = float(blk.sum())
                if net != 0.0:
                    pts.append((cx, cy))
                    wts.append(net)
            else:
                h = s // 2
                stack.extend([(i0, j0, h), (i0 + h, j0, h), (i0, j0 + h, h),
                              (i0 + h, j0 + h, h)])
        if len(wts) <= max_atoms or frac >= 0.5:
            break
        frac *= 2.0
    return AtomicMeasure(np.array(pts).reshape(-1, 2), np.array(wts)), moved


def _balance(mu: AtomicMeasure, balance_tol: float):
    total = mu.total_mass
    var = mu.variation
    if var > 0 and abs(total) > balance_tol * var:
        raise UnbalancedMeasureError(
            f"total mass {total:.3e} exceeds tolerance (variation {var:.3e})")
    if var == 0.0 or abs(total) <= 1e-12 * var:
        # round-off only: the transport solver rescales the masses itself
        return mu, 0.0
    # park the residual mass at the |mass|-weighted centroid
    c = (np.abs(mu.weights) @ mu.points) / var
    return mu + AtomicMeasure(c[None, :], [-total]), total


def xlog_distance(mu, atoms: AtomicMeasure | None = None, *, balance_tol=None,
                  max_atoms: int = 3000, dual_pairs: int = 300_000,
                  lower: bool = True) -> NormBracket:
    """Certified bracket on the log-weighted dual norm of a balanced measure.

    ``mu`` may be an :class:`AtomicMeasure` or a :class:`GridMeasure`; for a
    grid measure ``atoms`` (e.g. ``-pi * sum delta_a``) is added after the grid
    has been coarsened. Any residual grid imbalance within ``balance_tol`` is
    parked at the centroid and reported as ``imbalance``; the coarsening cost
    is added to the upper end and subtracted from the lower end. With
    ``lower=False`` only the transport upper end is computed and the bracket
    is reported as ``[0, upper]``.
    """
    moved = 0.0
    params = {}
    if isinstance(mu, GridMeasure):
        tol = 1e-2 if balance_tol is None else balance_tol
        cap = max_atoms
        while True:
            agg, moved = aggregate_grid(mu, max_atoms=cap)
            meas = agg if atoms is None else agg + atoms
            meas, imb = _balance(meas, tol)
            # signed grids split into two large halves; coarsen until the LP fits
            n_pos = int(np.sum(meas.weights > 0))
            if n_pos * (len(meas.weights) - n_pos) <= LP_MAX_PAIRS or cap <= 64:
                break
            cap //= 2
        params.update(grid_n=mu.n, grid_h=mu.h, coarsening_cost=moved, imbalance=imb,
                      atoms=len(meas.weights))
    else:
        tol = 1e-9 if balance_tol is None else balance_tol
        meas = mu if atoms is None else mu + atoms
        _split(meas, tol)
        meas, imb = _balance(meas, tol)
        if imb:
            params["imbalance"] = imb
    xp, wp, xn, wn = _split(meas, 1e-6)
    if len(wp) == 0:
        return NormBracket(0.0, 0.0, "xlog-bracket", params)
    want = lower and len(wp) * len(wn) <= dual_pairs
    tr = solve_transport(xp, wp, xn, wn, xlog_cost, duals=want)
    upper = tr.value + moved
    params["transport"] = tr.method
    if not lower:
        return NormBracket(0.0, float(upper), "xlog-upper", params)
    lower = _ctransform_lower(xp, wp, xn, wn)
    if tr.v is not None:
        lower = max(lower, _ctransform_lower(xp, wp, xn, wn, v_neg=tr.v, u_pos=tr.u))
    lower = max(lower, _dictionary_lower(meas.points, meas.weights))
    lower = max(0.0, lower - moved)
    # round-off in the quadrature can push lower above upper by ~1e-12
    if lower > upper:
        if lower - upper > 1e-8 * max(1.0, upper):
            raise RuntimeError(f"bracket inverted: lower {lower} > upper {upper}")
        lower = upper
    return NormBracket(float(lower), float(upper), "xlog-bracket", params)


# ----------------------------------------------------- test-function pairing


def _gradient_norm(phi, pts, step):
    ex = np.array([step, 0.0])
    ey = np.array([0.0, step])
    gx = (phi(pts + ex) - phi(pts - ex)) / (2 * step)
    gy = (phi(pts + ey) - phi(pts - ey)) / (2 * step)
    return np.hypot(gx, gy)


def check_gradient_decay(phi, min_exponent: float = 0.05) -> bool:
    """Probe |D phi| on circles of radius 1e1..1e6 for power-law decay.

    Accepts when the gradient vanishes at large radius or its log-log slope
    is at most ``-min_exponent``.
    """
    angles = np.linspace(0.0, 2 * np.pi, 8, endpoint=False)
    radii = np.logspace(1, 6, 6)
    gmax = []
    for r in radii:
        pts = r * np.column_stack([np.cos(angles), np.sin(angles)])
        gmax.append(float(np.max(_gradient_norm(phi, pts, 1e-4 * r))))
    gmax = np.array(gmax)
    if gmax[-1] <= 1e-12 * max(1.0, gmax[0]):
        return True
    if np.any(gmax <= 0):
        return bool(gmax[-1] <= 1e-12)
    slope = np.polyfit(np.log(radii[2:]), np.log(gmax[2:]), 1)[0]
    return bool(slope <= -min_exponent)


def _eval_phi(phi, pts):
    val = np.asarray(phi(pts), float)
    if val.shape != (len(pts),):
        val = np.array([float(phi(p)) for p in pts])
    return val


def pair_with_test_function(mu, phi, *, check_decay: bool = True) -> float:
    """Integral of ``phi`` against an atomic or grid measure.

    ``phi`` takes an ``(m, 2)`` array and returns ``(m,)`` values. Functions
    whose gradient does not decay like a power of ``|x|`` are rejected, since
    the pairing is then not controlled by the dual norm.
    """
    if check_decay and not check_gradient_decay(phi):
        raise ValueError("test function gradient does not decay like |x|^-p")
    if isinstance(mu, GridMeasure):
        mu = mu.to_atomic()
    if len(mu.weights) == 0:
        return 0.0
    return float(mu.weights @ _eval_phi(phi, mu.points))


# ------------------------------------------------------------- W^{-2,1}


def _bilinear_rows(points, lo, h, N):
    """Sparse interpolation matrix from grid-node values to point values."""
    fx = (points[:, 0] - lo) / h
    fy = (points[:, 1] - lo) / h
    i = np.clip(np.floor(fx).astype(int), 0, N - 2)
    j = np.clip(np.floor(fy).astype(int), 0, N - 2)
    tx = fx - i
    ty = fy - j
    m = len(points)
    rows = np.repeat(np.arange(m), 4)
    cols = np.stack([i * N + j, (i + 1) * N + j, i * N + j + 1, (i + 1) * N + j + 1], 1).ravel()
    vals = np.stack([(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty], 1).ravel()
    return sparse.csr_matrix((vals, (rows, cols)), shape=(m, N * N))


def _difference_ops(N):
    I = sparse.identity(N, format="csr")
    D1 = sparse.diags([-np.ones(N - 1), np.ones(N - 1)], [0, 1], shape=(N - 1, N))
    D2 = sparse.diags([np.ones(N - 2), -2 * np.ones(N - 2), np.ones(N - 2)], [0, 1, 2],
                      shape=(N - 2, N))
    # node (i, j) -> index i*N + j, i along x
    dx = sparse.kron(D1, I)
    dy = sparse.kron(I, D1)
    dxx = sparse.kron(D2, I)
    dyy = sparse.kron(I, D2)
    dxy = sparse.kron(D1, D1)
    return dx, dy, dxx, dyy, dxy


def wminus2_estimate(mu: AtomicMeasure, radius: float | None = None, N: int = 64,
                     balance_tol: float = 1e-9) -> NormBracket:
    """Bracket sup{ int phi dmu : |phi|, |D phi|, |D^2 phi| <= 1 } by a grid LP.

    Derivative bounds are imposed componentwise through forward differences
    on an ``N x N`` node grid over ``[-radius, radius]^2``; ``phi`` at the
    atoms is the bilinear interpolant. ``lower`` is the LP optimum and
    ``upper`` adds the discretisation correction ``h * |mu|``.
    """
    _split(mu, balance_tol)
    if len(mu.weights) == 0:
        return NormBracket(0.0, 0.0, "w-2,1-lp", {"N": N})
    rmax = float(np.max(np.hypot(mu.points[:, 0], mu.points[:, 1])))
    if radius is None:
        radius = 2.0 * (rmax + 1.0)
    if rmax > radius:
        raise ValueError("atoms lie outside the LP domain")
    h = 2.0 * radius / (N - 1)
    interp = _bilinear_rows(mu.points, -radius, h, N)
    c = -(interp.T @ mu.weights)
    ops = _difference_ops(N)
    bounds_rhs = [h, h, h * h, h * h, h * h]
    blocks, rhs = [], []
    for op, b in zip(ops, bounds_rhs):
        blocks.extend([op, -op])
        rhs.append(np.full(2 * op.shape[0], b))
    A = sparse.vstack(blocks, format="csr")
    res = linprog(c, A_ub=A, b_ub=np.concatenate(rhs), bounds=(-1.0, 1.0), method="highs")
    if res.status != 0:
        raise RuntimeError(f"W^-2,1 LP failed: {res.message}")
    lower = max(0.0, -float(res.fun))
    upper = lower + h * mu.variation
    return NormBracket(lower, upper, "w-2,1-lp", {"N": N, "radius": radius, "h": h})
