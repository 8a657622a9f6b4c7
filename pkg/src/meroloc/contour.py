"""Boundary argument tracking and adaptive evaluation of contour moments.

The k-th moment over a rectangle's boundary is computed in the
integration-by-parts form that avoids f':

    G_k = zeta_s**k * W - (1/(2*pi*i)) * loop_integral( k * T(z)**(k-1) * T'(z) * ln f(z) dz )

with ln f = ln|f| + i*Theta taken on one continuous branch.  Theta is the
extended argument, tracked by adaptive boundary sampling until no adjacent
jump reaches pi/2 (half the aliasing limit) and a midpoint probe of every
surviving interval confirms both half-jumps and near-log-linearity of f,
so a full-turn excursion cannot wrap invisibly between samples.  Since
T'(z) = -i*(2*pi - eps0)*exp(-i*alpha)*T(z)/L, the pullback integrand for
k >= 1 collapses to a constant times k * T(z)**k * ln f(z); the k = 0
boundary term is exactly the winding number and is stored as such, never
integrated.

Quadrature is a per-edge adaptive panel scheme with an embedded
Gauss(7)/Kronrod(15) pair.  Panels coincide with trace intervals, so every
panel endpoint carries a continuity-verified Theta seed; splitting a panel
inserts its midpoint (already a Kronrod node, hence already evaluated)
into the trace.  All f evaluations are cached per region and shared
between the trace and every moment order.
"""

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from ._wcoef import KRONROD_NODES
from .errors import (
    BoundaryProximityError,
    EvaluationOverflowError,
    InconsistentTraceError,
    InvalidInputError,
    ToleranceNotMetError,
)
from .geometry import TWO_PI, Rectangle, to_annulus

#: Adjacent-sample argument jumps at or above this trigger bisection.
JUMP_LIMIT = math.pi / 2.0

#: Midpoint-probe limit on |ln(f_mid**2 / (f_left*f_right))|.  A 2*pi
#: argument excursion hiding inside one interval (which wraps to a small
#: endpoint jump) requires roots close to the segment, and those force a
#: log-magnitude dip at this scale; smooth integrands are log-linear over
#: refined intervals and sit orders of magnitude below it.
LOG_LINEARITY_LIMIT = 1.0

#: |ln|f|| beyond this is treated as a root or pole sitting on the contour.
LOG_ABS_LIMIT = 600.0

#: Interval-bisection depth limit for the argument trace.
DEFAULT_TRACE_DEPTH = 42

#: Default f-evaluation budget for one rectangle.
DEFAULT_EVAL_BUDGET = 200_000

#: Theta seeds drifting less than this reuse cached panel results; a missed
#: branch shows up as a 2*pi shift, orders of magnitude above it.
_THETA_SEED_TOL = 1e-9

#: Refinement pushes the error estimate this far below eps_i.  The Kronrod
#: rule converges spectrally on these analytic integrands, so the cushion
#: costs a handful of extra panels while leaving the true quadrature error
#: far below the tolerance the downstream pencil inherits.
REFINE_MARGIN = 0.02

_INITIAL_EDGE_SAMPLES = 9


def _wrap(d):
    """Wrap angle differences into [-pi, pi)."""
    return (d + math.pi) % TWO_PI - math.pi


@dataclass
class BoundaryTrace:
    """Samples of f along the counterclockwise boundary, starting at corner D.

    The loop is closed: the last entry repeats the first boundary point,
    with ``theta`` continued so that (theta[-1] - theta[0]) / (2*pi) is the
    winding number.
    """

    points: np.ndarray
    f_values: np.ndarray
    theta: np.ndarray
    log_abs: np.ndarray

    def winding_estimate(self) -> float:
        return float(self.theta[-1] - self.theta[0]) / TWO_PI


@dataclass
class MomentVector:
    """Moments G_0..G_{2K-1} plus the quadrature tolerance that produced them."""

    values: np.ndarray
    winding: int
    eps_i: float
    zeta_start: complex

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values[0] != complex(self.winding):
            raise InvalidInputError("values[0] must equal the winding number exactly")
        if not np.all(np.isfinite(self.values)):
            raise InvalidInputError("moments must be finite")

    def __len__(self):
        return len(self.values)


class _EvalCache:
    """Deduplicating, counting wrapper around a FunctionHandle."""

    def __init__(self, handle):
        self.handle = handle
        self.values = {}
        self.misses = 0

    def eval_many(self, points):
        missing = [p for p in points if p not in self.values]
        if missing:
            unique = list(dict.fromkeys(missing))
            batch = self.handle(np.asarray(unique, dtype=complex))
            for p, v in zip(unique, batch):
                self.values[p] = complex(v)
            self.misses += len(unique)
        return np.asarray([self.values[p] for p in points], dtype=complex)


def _check_values(points, values, rect):
    mag = np.abs(values)
    with np.errstate(divide="ignore"):
        log_mag = np.log(mag)
    bad = (mag == 0.0) | ~np.isfinite(mag) | (np.abs(log_mag) > LOG_ABS_LIMIT)
    if np.any(bad):
        where = np.asarray(points)[bad][0]
        raise BoundaryProximityError(
            f"|f| is degenerate at boundary point z = {complex(where)!r} "
            f"(root or pole on or near the contour)",
            rect=rect,
        )


class _Traced:
    """Adaptively sampled boundary of one rectangle.

    Keeps, per edge, the sorted parameter values with cached f data, and
    assembles the continuous argument over the whole loop.
    """

    def __init__(self, handle, rect: Rectangle, max_depth: int = DEFAULT_TRACE_DEPTH):
        self.rect = rect
        self.cache = _EvalCache(handle)
        self.max_depth = max_depth
        corners = rect.boundary_corners()  # D, A, B, C
        self.edge_ends = [
            (corners[0], corners[1]),
            (corners[1], corners[2]),
            (corners[2], corners[3]),
            (corners[3], corners[0]),
        ]
        t0 = np.linspace(0.0, 1.0, _INITIAL_EDGE_SAMPLES)
        self.edge_ts = [t0.copy() for _ in range(4)]
        self.edge_f = [None] * 4
        self.edge_theta = [None] * 4
        self._validated = set()
        self._dirty = True
        self.refine()

    def edge_points(self, i, ts):
        """Points on edge i; endpoints are returned exactly for cache sharing."""
        a, b = self.edge_ends[i]
        ts = np.asarray(ts, dtype=float)
        pts = a + ts * (b - a)
        pts = np.where(ts == 0.0, a, pts)
        pts = np.where(ts == 1.0, b, pts)
        return pts

    def insert(self, edge_index, t_new) -> bool:
        """Add a sample parameter; returns False if it already exists or
        cannot be represented between its neighbours."""
        ts = self.edge_ts[edge_index]
        pos = int(np.searchsorted(ts, t_new))
        if pos < len(ts) and ts[pos] == t_new:
            return False
        if pos > 0 and ts[pos - 1] == t_new:
            return False
        self.edge_ts[edge_index] = np.insert(ts, pos, t_new)
        self._dirty = True
        return True

    def refine(self):
        """Bisect until every interval passes the jump and probe criteria.

        An interval survives only if the endpoint argument jump is below
        JUMP_LIMIT and a midpoint probe confirms it: both half-jumps below
        JUMP_LIMIT and ln f close to log-linear.  The probe closes the
        aliasing hole where a full 2*pi excursion between samples wraps to
        a small endpoint jump.
        """
        min_len = 2.0 ** (-float(self.max_depth))

        def too_short(edge_i, lo, hi, jump):
            if hi - lo <= min_len:
                mid_z = complex(
                    self.edge_points(edge_i, np.array([(lo + hi) / 2]))[0])
                raise BoundaryProximityError(
                    f"argument jump of {jump:.3f} rad persists at trace depth "
                    f"limit on edge {edge_i} near z = {mid_z!r}", rect=self.rect)

        while True:
            pending = []
            probes = []
            for i in range(4):
                ts = self.edge_ts[i]
                pts = self.edge_points(i, ts)
                vals = self.cache.eval_many(pts)
                _check_values(pts, vals, self.rect)
                jumps = np.abs(_wrap(np.diff(np.angle(vals))))
                for idx in range(len(ts) - 1):
                    lo, hi = float(ts[idx]), float(ts[idx + 1])
                    if jumps[idx] >= JUMP_LIMIT:
                        too_short(i, lo, hi, jumps[idx])
                        pending.append((i, 0.5 * (lo + hi)))
                    elif (i, lo, hi) not in self._validated:
                        probes.append((i, lo, hi, vals[idx], vals[idx + 1]))
            if probes:
                mids = np.concatenate([
                    self.edge_points(i, np.array([0.5 * (lo + hi)]))
                    for i, lo, hi, _, _ in probes])
                mid_vals = self.cache.eval_many(mids)
                _check_values(mids, mid_vals, self.rect)
                for (i, lo, hi, f_lo, f_hi), f_mid in zip(probes, mid_vals):
                    half1 = abs(_wrap(np.angle(f_mid) - np.angle(f_lo)))
                    half2 = abs(_wrap(np.angle(f_hi) - np.angle(f_mid)))
                    log_dev = abs(2.0 * math.log(abs(f_mid))
                                  - math.log(abs(f_lo)) - math.log(abs(f_hi)))
                    if (half1 >= JUMP_LIMIT or half2 >= JUMP_LIMIT
                            or log_dev >= LOG_LINEARITY_LIMIT):
                        too_short(i, lo, hi, max(half1, half2))
                        pending.append((i, 0.5 * (lo + hi)))
                    else:
                        self._validated.add((i, lo, hi))
            if not pending:
                break
            inserted = False
            for i, t in pending:
                inserted |= self.insert(i, t)
            if not inserted:
                raise BoundaryProximityError(
                    "trace refinement stalled (parameters exhausted double "
                    "precision)", rect=self.rect)
        self.assemble()

    def assemble(self):
        """Recompute the loop arrays and scatter theta back onto the edges."""
        if not self._dirty and self.edge_theta[0] is not None:
            return
        blocks = []
        counts = []
        for i in range(4):
            pts = self.edge_points(i, self.edge_ts[i])
            counts.append(len(pts))
            blocks.append(pts if i == 0 else pts[1:])
        loop_pts = np.concatenate(blocks)
        vals = self.cache.eval_many(loop_pts)
        args = np.angle(vals)
        theta = np.empty_like(args)
        theta[0] = args[0]
        theta[1:] = args[0] + np.cumsum(_wrap(np.diff(args)))
        offset = 0
        for i in range(4):
            n = counts[i]
            sl = slice(offset, offset + n) if i else slice(0, n)
            self.edge_f[i] = vals[sl]
            self.edge_theta[i] = theta[sl]
            offset = (sl.stop) - 1
        self._loop = (loop_pts, vals, theta)
        self._dirty = False

    def boundary_trace(self) -> BoundaryTrace:
        self.assemble()
        loop_pts, vals, theta = self._loop
        with np.errstate(divide="ignore"):
            log_abs = np.log(np.abs(vals))
        return BoundaryTrace(loop_pts, vals, theta, log_abs)

    def winding(self) -> int:
        self.assemble()
        _, _, theta = self._loop
        raw = float(theta[-1] - theta[0]) / TWO_PI
        nearest = round(raw)
        if abs(raw - nearest) > 0.25:
            raise InconsistentTraceError(
                f"total argument change {raw:.6f} turns is not within 0.25 of "
                f"an integer")
        return int(nearest)


def trace_argument(handle, rect: Rectangle,
                   max_depth: int = DEFAULT_TRACE_DEPTH) -> BoundaryTrace:
    """Adaptively sampled continuous argument of f along the boundary."""
    try:
        traced = _Traced(handle, rect, max_depth)
    except EvaluationOverflowError as exc:
        raise BoundaryProximityError(
            f"function overflowed on the boundary: {exc}", rect=rect) from exc
    return traced.boundary_trace()


def winding_number(trace: BoundaryTrace) -> int:
    """Rounded total argument change; errors if not close to an integer."""
    raw = trace.winding_estimate()
    nearest = round(raw)
    if abs(raw - nearest) > 0.25:
        raise InconsistentTraceError(
            f"total argument change {raw:.6f} turns is not within 0.25 of an "
            f"integer")
    return int(nearest)


class MomentEngine:
    """Adaptive moment evaluation over one rectangle, reusable across K.

    ``compute(K)`` returns a MomentVector for moments 0..2K-1, refining the
    shared panel set until every moment's estimated absolute quadrature
    error is at or below eps_i.  Growing K reuses every cached function
    value and all previously converged panels.
    """

    def __init__(self, handle, rect: Rectangle, eps_i: float,
                 eval_budget: int = DEFAULT_EVAL_BUDGET,
                 trace_depth: int = DEFAULT_TRACE_DEPTH):
        if eps_i <= 0:
            raise InvalidInputError("eps_i must be positive")
        self.rect = rect
        self.eps_i = eps_i
        self.eval_budget = eval_budget
        try:
            self.traced = _Traced(handle, rect, trace_depth)
        except EvaluationOverflowError as exc:
            raise BoundaryProximityError(
                f"function overflowed on the boundary: {exc}", rect=rect) from exc
        self.zeta_start = to_annulus(rect, rect.boundary_corners()[0])
        # constant of the pullback integral: c * exp(-i*alpha) / (2*pi)
        self._prefactor = (rect.angular_rate * cmath.exp(-1j * rect.alpha) / TWO_PI)
        self._panel_cache = {}
        self._x01 = (KRONROD_NODES + 1.0) / 2.0

    @property
    def evaluations(self) -> int:
        return self.traced.cache.misses

    def winding(self) -> int:
        return self.traced.winding()

    def compute(self, num_pairs: int) -> MomentVector:
        """MomentVector of length 2*num_pairs (moments 0..2*num_pairs-1)."""
        if num_pairs < 1:
            raise InvalidInputError("K must be at least 1")
        kmax = 2 * num_pairs - 1
        target = self.eps_i * REFINE_MARGIN
        totals = np.zeros(kmax)
        while True:
            self.traced.refine()
            winding = self.traced.winding()
            unsafe, totals = self._compute_panels(kmax)
            if unsafe:
                if not self._insert_midpoints(unsafe):
                    raise ToleranceNotMetError(
                        "branch-safety refinement exhausted double precision",
                        achieved=float(np.max(totals)))
                self._check_budget(totals)
                continue
            failing = [k for k in range(kmax) if totals[k] > target]
            if not failing:
                break
            if self.traced.cache.misses > self.eval_budget:
                if float(np.max(totals)) <= self.eps_i:
                    break  # contract met, only the cushion was abandoned
                self._check_budget(totals)
            if not self._split_for_error(failing, target):
                if float(np.max(totals)) <= self.eps_i:
                    break
                raise ToleranceNotMetError(
                    "quadrature refinement exhausted double precision with "
                    f"max moment error {float(np.max(totals)):.3e}",
                    achieved=float(np.max(totals)))
        values = np.empty(kmax + 1, dtype=complex)
        values[0] = complex(winding)
        powers = self.zeta_start ** np.arange(1, kmax + 1)
        values[1:] = powers * winding + self._accumulate(kmax)
        achieved = float(np.max(totals)) if kmax else 0.0
        return MomentVector(values, winding, achieved, self.zeta_start)

    def _insert_midpoints(self, panels) -> bool:
        inserted = False
        for edge_i, t0, t1 in panels:
            inserted |= self.traced.insert(edge_i, 0.5 * (t0 + t1))
        return inserted

    def _check_budget(self, totals):
        if self.traced.cache.misses > self.eval_budget:
            raise ToleranceNotMetError(
                f"evaluation budget {self.eval_budget} exhausted with max "
                f"moment error {float(np.max(totals)):.3e} > {self.eps_i:.3e}",
                achieved=float(np.max(totals)))

    def _panels(self):
        for i in range(4):
            ts = self.traced.edge_ts[i]
            for j in range(len(ts) - 1):
                yield i, float(ts[j]), float(ts[j + 1]), j

    def _compute_panels(self, kmax):
        """Fill the panel cache; returns (unsafe_panels, per-k error totals)."""
        self.traced.assemble()
        needed = []
        for i, t0, t1, j in self._panels():
            entry = self._panel_cache.get((i, t0, t1))
            theta_left = float(self.traced.edge_theta[i][j])
            if (entry is None or entry["kmax"] < kmax
                    or abs(entry["theta_left"] - theta_left) > _THETA_SEED_TOL):
                needed.append((i, t0, t1, j, theta_left))
        unsafe = self._fill(needed, kmax) if needed else []
        totals = np.zeros(kmax)
        if not unsafe:
            for i, t0, t1, j in self._panels():
                totals += self._panel_cache[(i, t0, t1)]["err"][:kmax]
        return unsafe, totals

    def _fill(self, needed, kmax):
        pts_blocks = [
            self.traced.edge_points(i, t0 + (t1 - t0) * self._x01)
            for i, t0, t1, j, _ in needed
        ]
        all_pts = np.concatenate(pts_blocks)
        try:
            vals = self.traced.cache.eval_many(all_pts)
        except EvaluationOverflowError as exc:
            raise BoundaryProximityError(
                f"function overflowed at a quadrature node: {exc}",
                rect=self.rect) from exc
        _check_values(all_pts, vals, self.rect)
        vals = vals.reshape(len(needed), 15)
        pts = all_pts.reshape(len(needed), 15)

        theta_left = np.array([item[4] for item in needed])
        theta_right = np.array(
            [float(self.traced.edge_theta[i][j + 1]) for i, _, _, j, _ in needed])
        left_raw = np.angle(
            [self.traced.edge_f[i][j] for i, _, _, j, _ in needed])
        right_raw = np.angle(
            [self.traced.edge_f[i][j + 1] for i, _, _, j, _ in needed])

        # unwrap node arguments left endpoint -> nodes -> right endpoint
        raw = np.angle(vals)
        seq = np.column_stack([left_raw, raw])
        steps = _wrap(np.diff(seq, axis=1))
        theta_nodes = theta_left[:, None] + np.cumsum(steps, axis=1)
        closing = _wrap(right_raw - raw[:, -1])
        implied_right = theta_nodes[:, -1] + closing
        bad = np.max(np.abs(steps), axis=1) >= JUMP_LIMIT
        bad |= np.abs(closing) >= JUMP_LIMIT
        bad |= np.abs(implied_right - theta_right) > math.pi

        lnf = np.log(np.abs(vals)) + 1j * theta_nodes
        zeta = to_annulus(self.rect, pts)
        kron, gauss = kernels.panel_moment_sums(zeta, lnf, kmax)
        ks = np.arange(1, kmax + 1)
        unsafe = []
        for row, (i, t0, t1, j, tl) in enumerate(needed):
            if bad[row]:
                unsafe.append((i, t0, t1))
                continue
            a, b = self.traced.edge_ends[i]
            half_dz = 0.5 * (b - a) * (t1 - t0)
            contrib = self._prefactor * ks * half_dz * kron[row]
            err = (abs(self._prefactor) * ks * abs(half_dz)
                   * np.abs(kron[row] - gauss[row]))
            self._panel_cache[(i, t0, t1)] = {
                "kmax": kmax, "theta_left": tl, "contrib": contrib, "err": err,
            }
        return unsafe

    def _split_for_error(self, failing, target) -> bool:
        entries = []
        for i, t0, t1, j in self._panels():
            err = self._panel_cache[(i, t0, t1)]["err"]
            score = max(err[k] for k in failing)
            entries.append((score, i, t0, t1))
        entries.sort(reverse=True)
        threshold = target / (2.0 * max(len(entries), 1))
        to_split = [e for e in entries if e[0] > threshold] or entries[:1]
        return self._insert_midpoints([(i, t0, t1) for _, i, t0, t1 in to_split])

    def _accumulate(self, kmax):
        sums = np.zeros(kmax, dtype=complex)
        for i, t0, t1, j in self._panels():
            sums += self._panel_cache[(i, t0, t1)]["contrib"][:kmax]
        return sums


def moments(handle, rect: Rectangle, num_pairs: int, eps_i: float,
            eval_budget: int = DEFAULT_EVAL_BUDGET) -> MomentVector:
    """Moments G_0..G_{2*num_pairs-1} with absolute error at most eps_i each.

    G_0 is the winding number exactly (the k = 0 integral term vanishes
    identically and is never computed).
    """
    engine = MomentEngine(handle, rect, eps_i, eval_budget)
    return engine.compute(num_pairs)
