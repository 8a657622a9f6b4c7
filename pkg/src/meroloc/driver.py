"""Search orchestration: subdivide, transform, calculate, gate, report.

One region is processed as: trace the boundary argument and integrate the
moments (contour), count roots by rank stabilization, solve the Hankel
pencil, evaluate the explicit condition bound, and either accept (error
estimates + multiplicities + mapping back to z-space) or subdivide and
recurse.  Subdivision bisects the longer side, except that flat annuli
(inner radius < 0.1) prefer the height so root radii stay near the unit
circle where the pencil is well conditioned.

Roots on or near a boundary surface as boundary-proximity errors; the
region is deterministically expanded ("jittered") and re-run, and the
resulting reports are filtered back to the original region so partition
semantics survive.  Since jittered sibling regions overlap slightly, the
merge step drops near-edge duplicates.

Region processing is a pure function of (handle, rectangle, config), so
any number of workers produces identical output; reports are merged by a
deterministic sort.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

from . import prony
from .contour import MomentEngine
from .errors import (
    BoundaryProximityError,
    BoundaryRootError,
    BranchCutError,
    DegeneratePencilError,
    InconsistentTraceError,
    InvalidInputError,
    MultiplicityInconsistencyError,
    PartialResultError,
    ToleranceNotMetError,
)
from .geometry import (
    Rectangle,
    contains,
    expand,
    from_annulus,
    inverse_derivative_magnitude,
    subdivide,
)

#: Inner radii below this make the driver bisect the height regardless of
#: aspect ratio (keeps (r+/r-) growth in the condition bound in check).
R_IN_GUARD = 0.1

#: Roots solved at |zeta| below this force a height bisection: the Hankel
#: columns decay like |zeta|**k, so deep roots are information-starved and
#: the inverse-map derivative (proportional to 1/|zeta|) amplifies their
#: error.  Keeping accepted roots in [0.3, 1] realizes the transform's
#: near-unit-circle design and restores the condition bound's premises.
R_MIN_ROOT_RADIUS = 0.3

_MAX_JITTER_ATTEMPTS = 3


@dataclass(frozen=True)
class SearchConfig:
    """Knobs of the search loop; defaults follow the reference settings."""

    kappa_c_sq: float = 128.0
    eps_i: float = 1.49e-8
    eps0: float = 0.1
    n_max_region: int = 16
    max_depth: int = 24
    jitter_fraction: float = 0.007
    eval_budget: int = 200_000
    rank_tol: float = None
    workers: int = 1

    def __post_init__(self):
        if not self.kappa_c_sq >= 1.0:
            raise InvalidInputError("kappa_c_sq must be at least 1")
        if not (0.0 < self.eps0 <= 0.5):
            raise InvalidInputError("eps0 must lie in (0, 0.5]")
        if not (0.0 < self.eps_i < 1e-2):
            raise InvalidInputError("eps_i must lie in (0, 1e-2)")
        if self.n_max_region < 1 or self.max_depth < 0:
            raise InvalidInputError("n_max_region >= 1 and max_depth >= 0 required")
        if not (0.0 < self.jitter_fraction < 0.25):
            raise InvalidInputError("jitter_fraction must lie in (0, 0.25)")
        if self.eval_budget < 1000:
            raise InvalidInputError("eval_budget must be at least 1000")
        if self.workers < 1:
            raise InvalidInputError("workers must be at least 1")

    def effective_rank_tol(self) -> float:
        # moment errors <= eps_i feed Hankel singular values scaled ~sqrt(K);
        # the sqrt(K) factor is applied per matrix size in count_roots
        return self.rank_tol if self.rank_tol is not None else 10.0 * self.eps_i


@dataclass(frozen=True)
class RootReport:
    """One located zero (multiplicity > 0) or pole (multiplicity < 0)."""

    location: complex
    multiplicity: int
    error_estimate: float
    region_path: str
    kappa_sq: float
    flags: tuple = ()

    def sort_key(self):
        return (self.location.real, self.location.imag, self.multiplicity)


@dataclass
class RegionRecord:
    """Diagnostics tree node for one processed rectangle."""

    path: str
    rect: Rectangle
    depth: int
    status: str = "pending"
    winding: int = None
    n_roots: int = None
    kappa_sq: float = None
    achieved_eps: float = None
    evaluations: int = 0
    jitter_attempts: int = 0
    notes: tuple = ()
    children: list = field(default_factory=list)


@dataclass
class SearchResult:
    reports: list
    diagnostics: RegionRecord
    unresolved: list

    @property
    def complete(self) -> bool:
        return not self.unresolved


def jitter_retry(rect: Rectangle, attempt: int, config: SearchConfig) -> Rectangle:
    """Deterministically expanded copy of rect for boundary-root retries."""
    if attempt > _MAX_JITTER_ATTEMPTS:
        raise BoundaryRootError(
            f"a root appears to lie on the boundary of {rect} and jitter "
            f"retries are exhausted", rect=rect)
    pad = config.jitter_fraction * (1 + attempt) * min(rect.L, rect.h)
    return expand(rect, pad)


def _stage_sizes(n_max: int):
    sizes = [s for s in (4, 8) if s < n_max]
    sizes.append(n_max)
    return sizes


class _Outcome:
    """Terminal or split result of processing a single rectangle."""

    def __init__(self, kind, reports=(), reason="", record_info=None,
                 prony_result=None, jittered=False, force_axis=None):
        self.kind = kind  # "accepted" | "split" | "unresolved"
        self.reports = list(reports)
        self.reason = reason
        self.record_info = record_info or {}
        self.prony_result = prony_result
        self.jittered = jittered
        self.force_axis = force_axis


def _reports_from_prony(rect, result, path, jitter_fraction, extra_flags=()):
    """Map a PronyResult back to z-space, applying the containment policy."""
    reports = []
    margin_pad = jitter_fraction * min(rect.L, rect.h)
    for zeta, mult, delta, radius_flag in zip(
            result.zetas, result.multiplicities, result.deltas,
            result.radius_flags):
        flags = list(extra_flags)
        if not result.error_estimate_exact:
            flags.append("error-estimate-conservative")
        try:
            z = from_annulus(rect, zeta)
        except BranchCutError:
            # legitimate roots cannot image onto the slot; treat as noise
            flags.append("dropped-branch-cut")
            continue
        err_z = float(delta) * inverse_derivative_magnitude(rect, zeta)
        if radius_flag:
            if not contains(rect, z, margin=margin_pad + err_z):
                continue  # quadrature noise pushed it out; covered elsewhere
            flags.append("radius-flagged")
        reports.append(RootReport(
            location=complex(z),
            multiplicity=int(mult),
            error_estimate=err_z,
            region_path=path,
            kappa_sq=result.kappa_sq,
            flags=tuple(flags),
        ))
    return reports


def _process_region(handle, rect, config, path):
    """Run the per-region pipeline; never subdivides by itself."""
    engine = MomentEngine(handle, rect, config.eps_i, config.eval_budget)
    info = {"evaluations": 0, "achieved_eps": None, "winding": None,
            "n_roots": None, "kappa_sq": None}

    def _finish(kind, **kw):
        info["evaluations"] = engine.evaluations
        return _Outcome(kind, record_info=info, **kw)

    try:
        mv = None
        n_roots = None
        for n_eff in _stage_sizes(config.n_max_region):
            mv = engine.compute(n_eff + 2)
            n = prony.count_roots(mv, n_eff, config.effective_rank_tol())
            if n <= n_eff:
                n_roots = n
                break
    except ToleranceNotMetError as exc:
        info["achieved_eps"] = exc.achieved
        return _finish("split", reason="quadrature-budget")
    info["winding"] = mv.winding
    info["achieved_eps"] = mv.eps_i
    if n_roots is None:
        return _finish("split", reason="rank-unstable")
    info["n_roots"] = n_roots
    if n_roots == 0:
        if mv.winding == 0:
            return _finish("accepted")
        return _finish("split", reason="rank-zero-with-winding")
    try:
        result = prony.analyze(mv, n_roots)
    except (DegeneratePencilError, MultiplicityInconsistencyError) as exc:
        return _finish("split", reason=type(exc).__name__)
    info["kappa_sq"] = result.kappa_sq
    if result.kappa_sq > config.kappa_c_sq:
        return _finish("split", reason="conditioning", prony_result=result)
    if result.r_minus < R_MIN_ROOT_RADIUS:
        return _finish("split", reason="deep-roots", prony_result=result,
                       force_axis="h")
    return _finish("accepted",
                   reports=_reports_from_prony(rect, result, path,
                                               config.jitter_fraction))


class _Searcher:
    def __init__(self, handle, config):
        self.handle = handle
        self.config = config

    def resolve(self, rect, path, depth):
        """Fully resolve one rectangle into a terminal outcome or a split.

        Boundary-proximity errors are retried here on jitter-expanded
        copies (run as complete nested sequential searches), so the caller
        only ever sees terminal or split outcomes.
        """
        record = RegionRecord(path=path, rect=rect, depth=depth)
        try:
            outcome = _process_region(self.handle, rect, self.config, path)
        except (BoundaryProximityError, InconsistentTraceError):
            outcome = None
            for attempt in range(_MAX_JITTER_ATTEMPTS + 1):
                outcome = self._jittered(rect, path, depth, attempt)
                if outcome is not None:
                    record.jitter_attempts = attempt + 1
                    break
            if outcome is None:
                raise BoundaryRootError(
                    f"root on the boundary of {rect}; jitter retries "
                    f"exhausted", rect=rect) from None
        record.winding = outcome.record_info.get("winding")
        record.n_roots = outcome.record_info.get("n_roots")
        record.kappa_sq = outcome.record_info.get("kappa_sq")
        record.achieved_eps = outcome.record_info.get("achieved_eps")
        record.evaluations = outcome.record_info.get("evaluations", 0)
        if outcome.reason:
            record.notes = record.notes + (outcome.reason,)
        return outcome, record

    def _jittered(self, rect, path, depth, attempt):
        """One jitter attempt; returns a terminal outcome or None to retry."""
        expanded = jitter_retry(rect, attempt, self.config)
        sub_path = f"{path}~{attempt}"
        try:
            result = run_search(self.handle, expanded, self.config,
                                base_path=sub_path, base_depth=depth,
                                workers=1)
        except (BoundaryProximityError, InconsistentTraceError):
            return None
        filter_margin = self.config.jitter_fraction * min(rect.L, rect.h)
        kept = [r for r in result.reports
                if contains(rect, r.location, margin=filter_margin)]
        kept = [replace(r, region_path=path, flags=r.flags + ("jittered",))
                for r in kept]
        info = {"evaluations": _total_evals(result.diagnostics),
                "winding": result.diagnostics.winding,
                "n_roots": result.diagnostics.n_roots,
                "kappa_sq": result.diagnostics.kappa_sq,
                "achieved_eps": result.diagnostics.achieved_eps}
        outcome = _Outcome("accepted", reports=kept, record_info=info,
                           jittered=True)
        if result.unresolved:
            outcome.kind = "unresolved"
            outcome.reason = "jittered-run-partial"
        return outcome


def _total_evals(record: RegionRecord) -> int:
    return record.evaluations + sum(_total_evals(c) for c in record.children)


def _dedup_merge(parent: Rectangle, axis: str, left, right, config,
                 any_jitter: bool):
    """Concatenate child reports, dropping near-edge duplicates after jitter."""
    if not any_jitter or not left or not right:
        return left + right
    jdist = 5.0 * config.jitter_fraction * min(parent.L, parent.h)

    def near_edge(report):
        w = parent.rotated(report.location)
        if axis == "L":
            return abs(w.real) <= jdist
        return abs(w.imag + parent.h / 2.0) <= jdist

    kept_right = []
    for b in right:
        duplicate = False
        if near_edge(b):
            for a in left:
                if (a.multiplicity == b.multiplicity and near_edge(a)
                        and abs(a.location - b.location)
                        <= max(20.0 * (a.error_estimate + b.error_estimate),
                               1e-12 * parent.scale())):
                    duplicate = True
                    break
        if not duplicate:
            kept_right.append(b)
    return left + kept_right


def run_search(handle, rect: Rectangle, config: SearchConfig = None, *,
               base_path: str = "", base_depth: int = 0,
               workers: int = None) -> SearchResult:
    """Breadth-first subdivision search; returns reports + diagnostics.

    Does not raise on unresolved regions (inspect ``result.unresolved``);
    use :func:`locate` for the raising variant.
    """
    config = config or SearchConfig()
    workers = config.workers if workers is None else workers
    searcher = _Searcher(handle, config)

    outcomes = {}
    records = {}
    splits = {}
    frontier = [(rect, base_path, base_depth)]

    def task(args):
        return searcher.resolve(*args)

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        while frontier:
            if pool is not None and len(frontier) > 1:
                resolved = list(pool.map(task, frontier))
            else:
                resolved = [task(t) for t in frontier]
            next_frontier = []
            for (r, path, depth), (outcome, record) in zip(frontier, resolved):
                outcomes[path] = outcome
                records[path] = record
                if outcome.kind != "split":
                    continue
                if depth >= base_depth + config.max_depth:
                    continue  # handled in assembly as depth-capped
                axis = outcome.force_axis
                if axis is None:
                    axis = "h" if r.r_in < R_IN_GUARD else ("L" if r.L >= r.h else "h")
                splits[path] = axis
                first, second = subdivide(r, axis)
                next_frontier.append((first, path + "0", depth + 1))
                next_frontier.append((second, path + "1", depth + 1))
            frontier = next_frontier
    finally:
        if pool is not None:
            pool.shutdown()

    unresolved = []

    def assemble(path):
        outcome = outcomes[path]
        record = records[path]
        if path in splits:
            left_reports, l_jit = assemble(path + "0")
            right_reports, r_jit = assemble(path + "1")
            record.children = [records[path + "0"], records[path + "1"]]
            record.status = "subdivided"
            merged = _dedup_merge(record.rect, splits[path], left_reports,
                                  right_reports, config, l_jit or r_jit)
            return merged, (l_jit or r_jit or outcome.jittered)
        if outcome.kind == "split":
            # depth cap reached: accept flagged best-effort results if the
            # pencil was solvable, otherwise leave the region unresolved
            if outcome.prony_result is not None:
                record.status = "accepted-depth-limit"
                reports = _reports_from_prony(
                    record.rect, outcome.prony_result, path,
                    config.jitter_fraction,
                    extra_flags=("depth-limit-conditioning",))
                return reports, outcome.jittered
            record.status = "unresolved"
            unresolved.append((record.rect, outcome.reason or "depth-limit"))
            return [], outcome.jittered
        if outcome.kind == "unresolved":
            record.status = "unresolved"
            unresolved.append((record.rect, outcome.reason))
            return list(outcome.reports), outcome.jittered
        record.status = ("accepted" if outcome.reports or record.n_roots
                         else "no-roots")
        if record.jitter_attempts:
            record.status = "jittered"
        return list(outcome.reports), outcome.jittered

    reports, _ = assemble(base_path)
    reports.sort(key=RootReport.sort_key)
    return SearchResult(reports=reports, diagnostics=records[base_path],
                        unresolved=unresolved)


def locate(handle, rect: Rectangle, config: SearchConfig = None):
    """All zeros and poles of the handle inside rect, sorted by location.

    Raises PartialResultError when subregions stay unresolved at the
    recursion limit; the exception carries the partial reports.
    """
    result = run_search(handle, rect, config)
    if result.unresolved:
        raise PartialResultError(
            f"{len(result.unresolved)} subregion(s) unresolved at the "
            f"recursion limit",
            reports=result.reports,
            unresolved=result.unresolved,
            diagnostics=result.diagnostics)
    return result.reports
