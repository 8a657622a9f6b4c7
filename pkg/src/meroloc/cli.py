"""Command-line front end: locate / scan / selftest.

Jobs are JSON documents validated against the published schema (unknown
keys are rejected).  Result documents are canonical JSON: sorted keys,
two-space indent, shortest round-trip float repr, so identical runs are
byte-identical and parse -> serialize is the identity.
"""

import argparse
import csv
import importlib.resources
import json
import sys
import time

import jsonschema
import numpy as np

from . import __version__, kernels
from .driver import SearchConfig, run_search
from .errors import (
    BoundaryRootError,
    EvaluationError,
    InvalidInputError,
    JobValidationError,
    MerolocError,
)
from .external import external_function
from .functions import (
    GyrokineticParams,
    Nlevp3Spec,
    RationalSpec,
    make_gyrokinetic,
    make_nlevp3,
    make_plasma_z,
    make_rational,
)
from .geometry import rect_from_corners

_SCHEMA_CACHE = {}


def _schema(name):
    if name not in _SCHEMA_CACHE:
        ref = importlib.resources.files("meroloc").joinpath(f"schemas/{name}")
        _SCHEMA_CACHE[name] = json.loads(ref.read_text(encoding="utf-8"))
    return _SCHEMA_CACHE[name]


def bundled_job_path(name: str):
    """Filesystem path of a job document shipped with the package."""
    return importlib.resources.files("meroloc").joinpath(f"jobs/{name}.json")


def load_job(path: str) -> dict:
    """Parse and schema-validate a job document.

    ``bundled:<name>`` references a packaged job.  Parse errors carry the
    offending position; schema errors carry the JSON path.
    """
    if path.startswith("bundled:"):
        ref = bundled_job_path(path[len("bundled:"):])
        text, shown = ref.read_text(encoding="utf-8"), str(ref)
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise JobValidationError(f"cannot read config {path}: {exc}") from exc
        shown = path
    try:
        job = json.loads(text)
    except json.JSONDecodeError as exc:
        raise JobValidationError(
            f"{shown}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        jsonschema.validate(job, _schema("job.schema.json"))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise JobValidationError(f"{shown}: at {where}: {exc.message}") from exc
    return job


def build_handle(function_obj: dict):
    """FunctionHandle for the single variant in a job's function object."""
    (kind, spec), = function_obj.items()
    try:
        if kind == "rational":
            return make_rational(RationalSpec(
                zeros=tuple((complex(*e["location"]), e["multiplicity"])
                            for e in spec.get("zeros", ())),
                poles=tuple((complex(*e["location"]), e["multiplicity"])
                            for e in spec.get("poles", ())),
            ))
        if kind == "nlevp3":
            return make_nlevp3(Nlevp3Spec(spec["A0"], spec["A1"], spec["A2"]))
        if kind == "plasma_z":
            return make_plasma_z()
        if kind == "gyrokinetic":
            return make_gyrokinetic(GyrokineticParams(
                beta_i_perp=spec["beta_i_perp"],
                b_i=spec["b_i"],
                tau=spec["tau"],
                a_i=spec.get("a_i", 0.0),
                a_e=spec.get("a_e", 0.0),
                mass_ratio=spec.get("mass_ratio", 1836.0),
            ))
        if kind == "external":
            return external_function(
                spec["command"],
                timeout=spec.get("timeout", 30.0),
                symmetry=spec.get("symmetry", "none"),
            )
    except InvalidInputError as exc:
        raise JobValidationError(f"invalid {kind} function: {exc}") from exc
    raise JobValidationError(f"unknown function kind {kind!r}")


def build_region(region_obj: dict, default_eps0: float, override_eps0=None):
    eps0 = region_obj.get("eps0", default_eps0)
    if override_eps0 is not None:  # explicit flags beat the file
        eps0 = override_eps0
    try:
        return rect_from_corners(
            complex(*region_obj["corner_a"]),
            complex(*region_obj["corner_b"]),
            alpha=region_obj.get("alpha", 0.0),
            eps0=eps0,
        )
    except InvalidInputError as exc:
        raise JobValidationError(f"invalid region: {exc}") from exc


def build_config(job: dict, args=None) -> SearchConfig:
    settings = dict(job.get("search", {}))
    if args is not None:
        for flag, key in (("kappa_c", "kappa_c_sq"), ("eps_i", "eps_i"),
                          ("eps0", "eps0"), ("max_depth", "max_depth"),
                          ("workers", "workers"), ("rank_tol", "rank_tol")):
            value = getattr(args, flag, None)
            if value is not None:
                settings[key] = value
    try:
        return SearchConfig(**settings)
    except (InvalidInputError, TypeError) as exc:
        raise JobValidationError(f"invalid search settings: {exc}") from exc


def _pair(z: complex):
    return [z.real, z.imag]


def _rect_doc(rect):
    return {"z0": _pair(rect.z0), "alpha": rect.alpha, "L": rect.L,
            "h": rect.h, "eps0": rect.eps0}


def _record_doc(rec):
    return {
        "path": rec.path,
        "depth": rec.depth,
        "status": rec.status,
        "rect": _rect_doc(rec.rect),
        "winding": rec.winding,
        "n_roots": rec.n_roots,
        "kappa_sq": rec.kappa_sq,
        "achieved_eps": rec.achieved_eps,
        "evaluations": rec.evaluations,
        "jitter_attempts": rec.jitter_attempts,
        "notes": list(rec.notes),
        "children": [_record_doc(c) for c in rec.children],
    }


def build_document(job: dict, result, timing=None) -> dict:
    doc = {
        "job": job,
        "status": "complete" if result.complete else "partial",
        "roots": [
            {
                "location": _pair(r.location),
                "multiplicity": r.multiplicity,
                "error_estimate": r.error_estimate,
                "region_path": r.region_path,
                "kappa_sq": r.kappa_sq,
                "flags": list(r.flags),
            }
            for r in result.reports
        ],
        "diagnostics": _record_doc(result.diagnostics),
        "versions": {"meroloc": __version__,
                     "kernel_backend": kernels.BACKEND},
    }
    if result.unresolved:
        doc["unresolved"] = [{"rect": _rect_doc(r), "reason": reason}
                             for r, reason in result.unresolved]
    if timing is not None:
        doc["timing"] = timing
    return doc


def serialize_document(doc: dict) -> str:
    jsonschema.validate(doc, _schema("result.schema.json"))
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _write_output(text: str, path):
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run_locate(args) -> int:
    job = load_job(args.config)
    config = build_config(job, args)
    handle = build_handle(job["function"])
    rect = build_region(job["region"], config.eps0,
                        override_eps0=getattr(args, "eps0", None))
    t0 = time.perf_counter()
    try:
        result = run_search(handle, rect, config)
    finally:
        handle.close()
    timing = None
    if args.timing:
        timing = {"wall_seconds": time.perf_counter() - t0,
                  "evaluations": handle.evaluation_count}
    text = serialize_document(build_document(job, result, timing))
    out_path = args.output or job.get("output", {}).get("path")
    _write_output(text, out_path)
    return 0 if result.complete else 2


def _resolve_pointer(obj, pointer: str):
    """RFC 6901-style pointer into nested dicts/lists; returns (parent, key)."""
    if not pointer.startswith("/"):
        raise JobValidationError(f"sweep pointer {pointer!r} must start with '/'")
    parts = [p.replace("~1", "/").replace("~0", "~")
             for p in pointer[1:].split("/")]
    node = obj
    for part in parts[:-1]:
        node = node[int(part)] if isinstance(node, list) else node[part]
    leaf = parts[-1]
    key = int(leaf) if isinstance(node, list) else leaf
    _ = node[key]  # must already exist
    return node, key


def sweep_values(sweep_obj: dict):
    if "values" in sweep_obj:
        vals = list(sweep_obj["values"])
    else:
        try:
            start, stop, step = (sweep_obj["start"], sweep_obj["stop"],
                                 sweep_obj["step"])
        except KeyError as exc:
            raise JobValidationError(
                "sweep needs either 'values' or start/stop/step") from exc
        if step == 0:
            raise JobValidationError("sweep step must be nonzero")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        vals = [start + i * step for i in range(max(count, 0))]
    if not vals:
        raise JobValidationError("sweep range is empty")
    return vals


def run_scan(args) -> int:
    job = load_job(args.config)
    if "sweep" not in job:
        raise JobValidationError("scan jobs need a 'sweep' section")
    values = sweep_values(job["sweep"])
    config = build_config(job, args)
    rows = []
    for value in values:
        point_job = json.loads(json.dumps(job["function"]))
        try:
            parent, key = _resolve_pointer(point_job, job["sweep"]["pointer"])
            parent[key] = value
            handle = build_handle(point_job)
        except (KeyError, IndexError, ValueError) as exc:
            raise JobValidationError(
                f"sweep pointer {job['sweep']['pointer']!r} does not resolve: "
                f"{exc}") from exc
        rect = build_region(job["region"], config.eps0,
                            override_eps0=getattr(args, "eps0", None))
        try:
            try:
                result = run_search(handle, rect, config)
            finally:
                handle.close()
        except (MerolocError, EvaluationError, BoundaryRootError) as exc:
            rows.append([repr(value), "", "", "", "",
                         f"error:{type(exc).__name__}"])
            continue
        status = "ok" if result.complete else "partial"
        for r in result.reports:
            rows.append([repr(value), repr(r.location.real),
                         repr(r.location.imag), str(r.multiplicity),
                         repr(r.error_estimate), status])
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sweep_value", "root_re", "root_im", "multiplicity",
                         "error_estimate", "status"])
        writer.writerows(rows)
    return 0


def _selftest_reference(name, expected, tol, config):
    job = load_job(f"bundled:{name}")
    handle = build_handle(job["function"])
    rect = build_region(job["region"], config.eps0)
    try:
        result = run_search(handle, rect, config)
    except MerolocError as exc:
        return False, f"search failed: {type(exc).__name__}"
    finally:
        handle.close()
    if not result.complete:
        return False, f"{len(result.unresolved)} unresolved regions"
    if len(result.reports) != len(expected):
        return False, f"found {len(result.reports)} roots, expected {len(expected)}"
    worst = max(min(abs(r.location - e) for e in expected)
                for r in result.reports)
    if worst > tol:
        return False, f"worst deviation {worst:.2e} > {tol:g}"
    return True, f"{len(expected)} roots, worst deviation <= {tol:g}"


RATIONAL_REFERENCE_ROOTS = [
    -0.5999999999753678 - 0.6999999999322971j,
    0.7000000004745937 - 0.7999999997652205j,
    0.7999999995583811 + 0.9000000002491819j,
    -0.5000000000007568 + 0.5999999999992878j,
]

TRANSCENDENTAL_REFERENCE_ROOTS = [
    0.065949131387977 - 1.10e-12j,
    0.853377172251995 + 2.12e-12j,
    3.638975634806435 + 3.22e-11j,
    -5.587398329471895 + 9.17e-13j,
    -1.940259421974321 + 4.22e-12j,
    -0.936953776134564 + 4.39e-12j,
    4.750269139855016 - 5.443800760044676j,
    3.061926419734661 - 5.265134384625599j,
    3.858870604351882 - 4.985782136928656j,
    3.858870604352364 + 4.985782136922126j,
    3.061926419737111 + 5.265134384628629j,
    4.750269139854812 + 5.443800760044741j,
]

PLASMA_Z_REFERENCE_ZEROS = [
    1.99146684283858 - 1.35481012808997j,
    2.69114902411825 - 2.17704490608676j,
    3.23533086843928 - 2.78438761010462j,
    3.69730970246813 - 3.28741078938962j,
    4.10610728467995 - 3.72594871944305j,
    4.47681569296707 - 4.11963522761023j,
    4.81848829189866 - 4.47983279758210j,
    5.13706727240611 - 4.81380668333976j,
]


def _selftest_random(config, trials=25):
    rng = np.random.RandomState(1234)
    rect = rect_from_corners(-1 - 1j, 1 + 1j, eps0=config.eps0)
    for trial in range(trials):
        n_roots = rng.randint(1, 9)
        locs = []
        while len(locs) < n_roots:
            cand = complex(rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9))
            if all(abs(cand - o) >= 1e-3 for o in locs):
                locs.append(cand)
        mults = [int(rng.randint(1, 4)) * int(rng.choice([-1, 1]))
                 for _ in locs]
        spec = RationalSpec(
            zeros=tuple((l, m) for l, m in zip(locs, mults) if m > 0),
            poles=tuple((l, -m) for l, m in zip(locs, mults) if m < 0))
        handle = make_rational(spec)
        try:
            result = run_search(handle, rect, config)
        except MerolocError as exc:
            return False, f"trial {trial}: {type(exc).__name__}"
        if not result.complete or len(result.reports) != n_roots:
            return False, f"trial {trial}: wrong root count"
        truth = dict(zip(locs, mults))
        for r in result.reports:
            near = min(truth, key=lambda t: abs(r.location - t))
            if abs(r.location - near) > 1e-6 or truth[near] != r.multiplicity:
                return False, f"trial {trial}: root mismatch"
    return True, f"{trials} random rationals recovered exactly"


def run_selftest(args) -> int:
    config = build_config({}, args)
    suites = [
        ("rational", lambda: _selftest_reference("example1", RATIONAL_REFERENCE_ROOTS, 1e-8, config)),
        ("transcendental", lambda: _selftest_reference("nlevp3", TRANSCENDENTAL_REFERENCE_ROOTS, 1e-8, config)),
        ("plasma-z", lambda: _selftest_reference("plasma_z", PLASMA_Z_REFERENCE_ZEROS, 1e-7, config)),
        ("random-rational", lambda: _selftest_random(config)),
    ]
    failed = []
    for name, fn in suites:
        ok, detail = fn()
        print(f"{name}: {'PASS' if ok else 'FAIL'} ({detail})")
        if not ok:
            failed.append(name)
    if failed:
        print(f"failing suites: {', '.join(failed)}")
        return 1
    print("all suites passed")
    return 0


def _add_common_flags(sub):
    sub.add_argument("--kappa-c", dest="kappa_c", type=float, default=None,
                     help="critical squared condition number (default 128)")
    sub.add_argument("--eps-i", dest="eps_i", type=float, default=None,
                     help="contour integration tolerance (default 1.49e-8)")
    sub.add_argument("--eps0", type=float, default=None,
                     help="slot parameter (default 0.1)")
    sub.add_argument("--max-depth", dest="max_depth", type=int, default=None,
                     help="subdivision recursion limit (default 24)")
    sub.add_argument("--workers", type=int, default=None,
                     help="concurrent region workers (default 1)")
    sub.add_argument("--rank-tol", dest="rank_tol", type=float, default=None,
                     help="override the Hankel rank tolerance (testing hook)")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="meroloc",
        description="Locate zeros and poles of a meromorphic function in a "
                    "rectangle.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_locate = sub.add_parser("locate", help="run a search job")
    p_locate.add_argument("--config", required=True,
                          help="job JSON (or bundled:<name>)")
    p_locate.add_argument("--output", default=None, help="result JSON path")
    p_locate.add_argument("--timing", action="store_true",
                          help="include wall time in the document "
                               "(breaks byte-for-byte reproducibility)")
    _add_common_flags(p_locate)

    p_scan = sub.add_parser("scan", help="run a parameter sweep")
    p_scan.add_argument("--config", required=True)
    p_scan.add_argument("--output", required=True, help="CSV path")
    _add_common_flags(p_scan)

    p_self = sub.add_parser("selftest", help="run the built-in regressions")
    _add_common_flags(p_self)

    args = parser.parse_args(argv)
    try:
        if args.command == "locate":
            return run_locate(args)
        if args.command == "scan":
            return run_scan(args)
        return run_selftest(args)
    except JobValidationError as exc:
        print(f"meroloc: {exc}", file=sys.stderr)
        return 1
    except (BoundaryRootError, EvaluationError) as exc:
        print(f"meroloc: {exc}", file=sys.stderr)
        return 1
    except MerolocError as exc:
        print(f"meroloc: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
