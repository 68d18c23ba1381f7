"""Command-line front end.

Every command reads one JSON problem document (``--spec``), computes, and
only then writes its outputs atomically into ``--out`` together with a
``run_record.json`` describing the run. Exit codes: 0 success, 2 invalid
input, 3 enumeration guard exceeded, 4 property-suite failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import tempfile
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import __version__
from .errors import EmptyFeasibleSetError, GuardExceeded, InfeasibleError, SecrexpError, ValidationError
from .simplex import Dist, DistortionSpec, Joint2, kl_divergence

EXIT_OK, EXIT_INVALID, EXIT_GUARD, EXIT_SUITE = 0, 2, 3, 4
SCENARIOS = ("nokey", "keyed", "perfect")
NOKEY_STRATEGIES = ("map", "genie_map", "two_stage", "blind")
KEYED_STRATEGIES = ("keyed_map", "key_guess", "two_stage", "blind")


# ------------------------------------------------------------- problem spec


def _matrix(value, rows, cols, name):
    if isinstance(value, str):
        if value != "hamming":
            raise ValidationError(f"{name}: unknown shorthand {value!r} (only 'hamming')")
        return DistortionSpec.hamming(rows, 0.0, cols).matrix
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{name}: not a numeric matrix ({exc})") from None
    if arr.ndim != 2:
        raise ValidationError(f"{name}: expected a 2-d matrix, got {arr.ndim} dimensions")
    if rows is not None and arr.shape[0] != rows:
        raise ValidationError(f"{name}: has {arr.shape[0]} rows, the source has {rows} symbols")
    bad = np.argwhere(~np.isfinite(arr) | (arr < 0))
    if bad.size:
        i, j = bad[0]
        raise ValidationError(f"{name}[{i}][{j}] = {arr[i, j]} must be finite and >= 0")
    return arr


def _real(doc, key, default=None, required=False, allow_inf=False):
    if key not in doc or doc[key] is None:
        if required:
            raise ValidationError(f"{key}: required for this scenario")
        return default
    v = doc[key]
    if allow_inf and isinstance(v, str) and v.lower() in ("inf", "infinity", "+inf"):
        return math.inf
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValidationError(f"{key}: expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v) and not allow_inf:
        raise ValidationError(f"{key}: must be finite")
    return v


@dataclass(frozen=True)
class ProblemSpec:
    """Validated problem document.

    ``d`` and ``d_e`` may be given as ``"hamming"``. ``alpha`` accepts the
    string ``"inf"``. ``joint`` (an X x Y table) is only needed by ``crd``.
    """

    source: tuple
    d: np.ndarray
    D: float
    d_e: np.ndarray
    D_e: float
    scenario: str = "nokey"
    R: float = None
    r: float = None
    alpha: float = None
    r_disc: float = None
    delta: float = 0.0
    epsilon: float = 0.5
    seed: int = 0
    n: tuple = ()
    strategies: tuple = ()
    theory: float = None
    joint: np.ndarray = None
    sweep: str = None
    options: dict = field(default_factory=dict)

    @property
    def sizes(self):
        return len(self.source), self.d.shape[1], self.d_e.shape[1]

    @property
    def spec_d(self):
        return DistortionSpec(self.d, self.D)

    @property
    def spec_e(self):
        return DistortionSpec(self.d_e, self.D_e)

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ValidationError("spec: top level must be a JSON object")
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ValidationError(f"spec: unknown field(s) {unknown}")
        if "source" not in doc:
            raise ValidationError("source: required")
        try:
            src = Dist(np.asarray(doc["source"], dtype=float))
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"source: {exc}") from None
        k = src.size
        d = _matrix(doc.get("d", "hamming"), k, None, "d")
        d_e = _matrix(doc.get("d_e", "hamming"), k, None, "d_e")
        D = _real(doc, "D", required=True)
        D_e = _real(doc, "D_e", required=True)
        if D < d.min(axis=1).max() - 1e-12:
            raise ValidationError(f"D: {D} is below the smallest attainable level "
                                  f"{d.min(axis=1).max()}")
        if D_e < d_e.min(axis=1).max() - 1e-12:
            raise ValidationError(f"D_e: {D_e} is below the smallest attainable level "
                                  f"{d_e.min(axis=1).max()}")
        scenario = doc.get("scenario", "nokey")
        if scenario not in SCENARIOS:
            raise ValidationError(f"scenario: must be one of {SCENARIOS}, got {scenario!r}")
        R = _real(doc, "R", required=scenario == "keyed")
        r = _real(doc, "r", required=scenario == "keyed")
        alpha = _real(doc, "alpha", required=scenario == "keyed", allow_inf=True)
        if r is not None and r < 0:
            raise ValidationError(f"r: must be >= 0, got {r}")
        if alpha is not None and not alpha > 0:
            raise ValidationError(f"alpha: must be > 0, got {alpha}")
        seed = doc.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ValidationError(f"seed: expected a non-negative integer, got {seed!r}")
        n = doc.get("n", [])
        n = (n,) if isinstance(n, int) else tuple(n)
        if any(isinstance(v, bool) or not isinstance(v, int) or v < 1 for v in n):
            raise ValidationError(f"n: expected positive integers, got {list(n)}")
        strategies = tuple(doc.get("strategies", ()))
        allowed = KEYED_STRATEGIES if scenario == "keyed" else NOKEY_STRATEGIES
        for s in strategies:
            if s not in allowed:
                raise ValidationError(f"strategies: {s!r} not available for scenario "
                                      f"{scenario!r} (choose from {allowed})")
        joint = None
        if doc.get("joint") is not None:
            try:
                joint = Joint2(np.asarray(doc["joint"], dtype=float)).table
            except (TypeError, ValueError) as exc:
                raise ValidationError(f"joint: {exc}") from None
            if joint.shape[0] != k:
                raise ValidationError(f"joint: has {joint.shape[0]} rows, the source has {k}")
        options = doc.get("options", {})
        if not isinstance(options, dict):
            raise ValidationError("options: expected an object")
        return cls(tuple(float(v) for v in src.probs), d, D, d_e, D_e, scenario, R, r, alpha,
                   _real(doc, "r_disc"), _real(doc, "delta", 0.0), _real(doc, "epsilon", 0.5),
                   seed, n, strategies, _real(doc, "theory"), joint, doc.get("sweep"),
                   dict(options))

    def to_dict(self):
        out = {
            "source": list(self.source),
            "d": self.d.tolist(),
            "D": self.D,
            "d_e": self.d_e.tolist(),
            "D_e": self.D_e,
            "scenario": self.scenario,
            "seed": self.seed,
            "delta": self.delta,
            "epsilon": self.epsilon,
        }
        for key in ("R", "r", "r_disc", "theory", "sweep"):
            if getattr(self, key) is not None:
                out[key] = getattr(self, key)
        if self.alpha is not None:
            out["alpha"] = "inf" if math.isinf(self.alpha) else self.alpha
        if self.n:
            out["n"] = list(self.n)
        if self.strategies:
            out["strategies"] = list(self.strategies)
        if self.joint is not None:
            out["joint"] = self.joint.tolist()
        if self.options:
            out["options"] = self.options
        return out

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_spec(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"--spec: cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"--spec: invalid JSON ({exc})") from None
    return ProblemSpec.from_dict(doc)


def _search(spec):
    from .exponents import DEFAULT_SEARCH, SearchOptions

    known = SearchOptions.__dataclass_fields__
    opts = {k: v for k, v in spec.options.items() if k in known}
    return replace(DEFAULT_SEARCH, **opts) if opts else DEFAULT_SEARCH


def _solver(spec):
    from .rd import DEFAULT_OPTIONS, SolverOptions

    known = SolverOptions.__dataclass_fields__
    opts = {k: v for k, v in spec.options.items() if k in known}
    return replace(DEFAULT_OPTIONS, **opts) if opts else DEFAULT_OPTIONS


# ------------------------------------------------------------------ output


def _g17(x):
    if isinstance(x, (float, np.floating)):
        return f"{x:.17g}" if math.isfinite(x) else str(float(x))
    return x


def csv_text(header, rows):
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    for row in rows:
        wr.writerow([_g17(v) for v in row])
    return buf.getvalue()


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else str(float(obj))
    if isinstance(obj, Fraction):
        return f"{obj.numerator}/{obj.denominator}"
    if isinstance(obj, (str, int, bool)) or obj is None:
        return obj
    if hasattr(obj, "rows"):
        return _plain(obj.rows)
    return str(obj)


def json_text(obj):
    return json.dumps(_plain(obj), indent=2, sort_keys=True) + "\n"


def write_atomic(path, text):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _versions():
    import numba
    import scipy

    return {"secrexp": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__, "numba": numba.__version__}


@dataclass(frozen=True)
class RunRecord:
    spec_digest: str
    command: list
    outputs: dict
    wall_time: float
    versions: dict
    seed: int

    def to_dict(self):
        return {"spec_digest": self.spec_digest, "command": self.command,
                "outputs": self.outputs, "wall_time": self.wall_time,
                "versions": self.versions, "seed": self.seed}


def emit(outdir, files, spec, argv, started):
    """Write every output and the run record, each atomically."""
    digests = {}
    for name, text in files.items():
        write_atomic(os.path.join(outdir, name), text)
        digests[name] = hashlib.sha256(text.encode()).hexdigest()
    rec = RunRecord(spec.digest() if spec else None, list(argv), digests,
                    time.perf_counter() - started, _versions(), spec.seed if spec else None)
    write_atomic(os.path.join(outdir, "run_record.json"), json_text(rec.to_dict()))
    return rec


# ---------------------------------------------------------------- commands


def parse_grid(text):
    """``start:stop:step`` inclusive of ``stop`` (up to rounding)."""
    try:
        a, b, s = (float(v) for v in text.split(":"))
    except ValueError:
        raise ValidationError(f"--grid: expected start:stop:step, got {text!r}") from None
    if s <= 0 or b < a:
        raise ValidationError(f"--grid: need step > 0 and stop >= start, got {text!r}")
    count = int(math.floor((b - a) / s + 1e-9)) + 1
    return [round(a + i * s, 12) for i in range(count)]


def parse_n(text):
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ValidationError(f"--n: expected an integer or comma list, got {text!r}") from None
    if any(v < 1 for v in vals):
        raise ValidationError("--n: blocklengths must be positive")
    return vals


def run_exponent(spec):
    from .exponents import exponent_key, exponent_nokey, exponent_perfect

    search, opts = _search(spec), _solver(spec)
    if spec.scenario == "perfect":
        return exponent_perfect(spec.source, spec.spec_e, search, opts, spec.seed)
    if spec.scenario == "nokey":
        return exponent_nokey(spec.source, spec.spec_d, spec.spec_e, spec.seed, search, opts)
    return exponent_key(spec.source, spec.spec_d, spec.spec_e, spec.R, spec.r, spec.alpha,
                        spec.seed, search, opts)


def _exponent_dict(res):
    return {"value": res.value, "argmin_q": np.asarray(res.argmin_q).tolist(),
            "branch": res.branch, "diagnostics": res.diagnostics}


def cmd_exponent(spec, args):
    res = run_exponent(spec)
    out = _exponent_dict(res)
    print(f"{'scenario':<10} {'value (bits)':>14}  {'branch':<8} argmin Q")
    print(f"{spec.scenario:<10} {res.value:>14.6f}  {res.branch:<8} "
          f"{np.round(np.asarray(res.argmin_q), 6).tolist()}")
    if args.format == "csv":
        q = np.asarray(res.argmin_q)
        text = csv_text(["scenario", "value", "branch"] + [f"q{i}" for i in range(q.size)],
                        [[spec.scenario, res.value, res.branch] + q.tolist()])
        return {"exponent.csv": text}
    return {"exponent.json": json_text(out)}


def _check_monotone_convex(xs, ys, tol=1e-6):
    for i in range(1, len(ys)):
        if ys[i] > ys[i - 1] + tol:
            raise AssertionError(f"output not non-increasing at {xs[i]}")
    for i in range(1, len(ys) - 1):
        h0, h1 = xs[i] - xs[i - 1], xs[i + 1] - xs[i]
        interp = (h1 * ys[i - 1] + h0 * ys[i + 1]) / (h0 + h1)
        if ys[i] > interp + tol:
            raise AssertionError(f"output not convex at {xs[i]}")


def _curve(spec, args, label, fn, d_range):
    grid = parse_grid(args.grid) if args.grid else None
    if grid is None:
        raise ValidationError("--grid: required (start:stop:step)")
    lo, hi = d_range
    for g in grid:
        if g < lo - 1e-12 or g > hi + 1e-12:
            raise ValidationError(f"--grid: level {g} outside [{lo}, {hi}]")
    vals = [fn(g) for g in grid]
    _check_monotone_convex(grid, vals)
    if args.format == "json":
        return json_text({"level": grid, "value": vals})
    return csv_text([label, "value"], zip(grid, vals))


def cmd_crd(spec, args):
    from .rd import conditional_rd

    if spec.joint is None:
        raise ValidationError("joint: required by crd (an |X| x |Y| table)")
    opts = _solver(spec)
    rng = (float(spec.d_e.min(axis=1).max()), float(spec.d_e.max()))
    text = _curve(spec, args, "D_e",
                  lambda g: conditional_rd(spec.joint, DistortionSpec(spec.d_e, g), opts).value, rng)
    return {f"crd.{args.format}": text}


def cmd_rd(spec, args):
    from .rd import rd_function

    opts = _solver(spec)
    p = np.asarray(spec.source)
    rng = (float(spec.d[p > 0].min(axis=1).max()), float(spec.d.max()))
    text = _curve(spec, args, "D",
                  lambda g: rd_function(spec.source, DistortionSpec(spec.d, g), opts).value, rng)
    return {f"rd.{args.format}": text}


def _reports_for(spec, n):
    from . import ciphersim as cs

    strategies = spec.strategies or (("keyed_map", "key_guess") if spec.scenario == "keyed"
                                     else ("map", "two_stage"))
    out = {}
    need = set(strategies) - {"blind"}
    if spec.scenario == "keyed" and need:
        r_disc = spec.r_disc if spec.r_disc is not None else spec.r
        system = cs.build_keyed_system(spec.source, n, spec.spec_d, spec.spec_e, spec.R, r_disc,
                                       spec.alpha, spec.delta, spec.seed, spec.epsilon)
    elif need:
        system = cs.build_blur_system(spec.source, n, spec.spec_d, spec.spec_e)
    for s in strategies:
        if s == "blind":
            out[s] = cs.blind_adversary(spec.source, n, spec.spec_e)
        elif s == "map":
            out[s] = cs.map_adversary(system)
        elif s == "genie_map":
            out[s] = cs.genie_map_adversary(system)
        elif s == "two_stage":
            out[s] = cs.two_stage_adversary(system)
        elif s == "keyed_map":
            out[s] = cs.keyed_map_adversary(system)
        elif s == "key_guess":
            out[s] = cs.key_guess_adversary(system, spec.seed)
    return out


def cmd_simulate(spec, args):
    from .ciphersim import exponent_trend

    ns = parse_n(args.n) if args.n else spec.n
    if not ns:
        raise ValidationError("--n: required (or give n in the spec)")
    per_n = {n: _reports_for(spec, n) for n in ns}
    rows, reports = [], []
    for n, reps in per_n.items():
        for s, rep in reps.items():
            p = rep.success_probability
            rows.append([s, n, p.numerator, p.denominator, float(p), rep.empirical_exponent])
            reports.append(rep.to_dict())
    files = {
        "simulate.csv": csv_text(["strategy", "n", "success_num", "success_den",
                                  "success_float", "empirical_exponent"], rows),
        "simulate.json": json_text({"spec": spec.to_dict(), "reports": reports}),
    }
    if len(ns) > 1:
        for s in next(iter(per_n.values())):
            table = exponent_trend(lambda n, s=s: per_n[n][s], ns, spec.theory)
            files[f"trend_{s}.csv"] = table.to_csv()
    for r in rows:
        print(f"{r[0]:<10} n={r[1]:<3} success={r[2]}/{r[3]} ({r[4]:.6g}) exponent={r[5]:.6f}")
    return files


def cmd_types(spec, args):
    from .typelab import qstar, type_class_size, enum_types, pstar_value

    ns = parse_n(args.n) if args.n else spec.n
    if len(ns) != 1:
        raise ValidationError("--n: types needs a single blocklength")
    n = ns[0]
    rows = []
    for t in enum_types(n, len(spec.source)):
        jt = qstar(t, spec.spec_d, spec.spec_e)
        div = kl_divergence(t.probs(), spec.source)
        val = pstar_value(jt, spec.spec_e)
        rows.append([" ".join(map(str, t.counts)), type_class_size(t), div, jt.digest(), val,
                     div + val])
    header = ["counts", "class_size", "divergence", "qstar_digest", "pstar_value", "contribution"]
    if args.format == "json":
        return {"types.json": json_text([dict(zip(header, r)) for r in rows])}
    return {"types.csv": csv_text(header, rows)}


def cmd_sweep(spec, args):
    """Exponent over a grid of one scalar field (``spec.sweep``, default r or D_e)."""
    param = spec.sweep or ("r" if spec.scenario == "keyed" else "D_e")
    if param not in ("r", "R", "D", "D_e", "alpha"):
        raise ValidationError(f"sweep: cannot sweep {param!r}")
    if not args.grid:
        raise ValidationError("--grid: required (start:stop:step)")
    rows = []
    for g in parse_grid(args.grid):
        res = run_exponent(replace(spec, **{param: g}))
        rows.append([g, res.value, res.branch] + np.asarray(res.argmin_q).tolist())
    k = len(spec.source)
    header = [param, "value", "branch"] + [f"q{i}" for i in range(k)]
    if args.format == "json":
        return {"sweep.json": json_text([dict(zip(header, r)) for r in rows])}
    return {"sweep.csv": csv_text(header, rows)}


# -------------------------------------------------------------- suites


def _suite_lemma3():
    from .exponents import closed_form_binary, r_blur

    out = []
    for q in np.round(np.arange(0.05, 0.501, 0.05), 2):
        for D in (0.15, 0.25, 0.35):
            for De in sorted({0.05, 0.1, D}):
                if De > D:
                    continue
                got = r_blur([1 - q, q], DistortionSpec.hamming(2, D),
                             DistortionSpec.hamming(2, De)).value
                want = closed_form_binary(q, D, De)
                out.append({"case": [float(q), D, De], "value": got, "oracle": want,
                            "pass": abs(got - want) <= 1e-3})
    return out


def _suite_sandwich(count=100, seed=0):
    from .exponents import r_blur, r_blur_rate
    from .rd import rd_function

    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        k, m, v = (int(x) for x in rng.integers(2, 5, size=3))
        p = rng.dirichlet(np.ones(k))
        d = rng.uniform(0, 1, size=(k, m))
        de = rng.uniform(0, 1, size=(k, v))
        dmin, dmax = d.min(axis=1).max(), d.max()
        emin, emax = de.min(axis=1).max(), de.max()
        sd = DistortionSpec(d, dmin + rng.uniform(0.1, 0.9) * (dmax - dmin))
        se = DistortionSpec(de, emin + rng.uniform(0.1, 0.9) * (emax - emin))
        re = rd_function(p, se).value
        rl = rd_function(p, sd).value
        blur = r_blur(p, sd, se, seed=i).value
        rate = rl + rng.uniform(0.05, 0.5)
        capped = r_blur_rate(p, rate, sd, se, seed=i).value
        ok = (max(0.0, re - rl) - 1e-3 <= blur <= re + 1e-3) and capped <= blur + 1e-3
        out.append({"case": i, "R_e": re, "R": rl, "r_blur": blur, "r_blur_rate": capped,
                    "rate": rate, "pass": bool(ok)})
    return out


def _suite_lemma2(n_max=6):
    from .typelab import JointTypeVec, enum_types, lemma2_holds

    out = []
    for n in range(1, n_max + 1):
        for t in enum_types(n, 8):
            jt = JointTypeVec(np.array(t.counts).reshape(2, 2, 2))
            out.append({"case": jt.counts.tolist(), "pass": bool(lemma2_holds(jt, exponent=8))})
    return out


SUITES = {"lemma3": _suite_lemma3, "sandwich": _suite_sandwich, "lemma2": _suite_lemma2}


def cmd_verify(spec, args):
    name = args.suite
    if name not in SUITES:
        raise ValidationError(f"--suite: unknown suite {name!r} (choose from {sorted(SUITES)})")
    results = SUITES[name]()
    failed = [r for r in results if not r["pass"]]
    report = {"suite": name, "checked": len(results), "failed": len(failed),
              "pass": not failed, "counterexamples": failed}
    print(f"{name}: {'PASS' if not failed else 'FAIL'} ({len(results)} checks, "
          f"{len(failed)} failures)")
    files = {f"verify_{name}.json": json_text(report)}
    return files, bool(failed)


COMMANDS = {
    "exponent": cmd_exponent,
    "crd": cmd_crd,
    "rd": cmd_rd,
    "simulate": cmd_simulate,
    "types": cmd_types,
    "sweep": cmd_sweep,
}


def build_parser():
    ap = argparse.ArgumentParser(prog="secrexp", description="Secrecy exponents of lossy cipher "
                                 "systems: solvers, exact small-n simulation and checks.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, default_fmt in (("exponent", "json"), ("crd", "csv"), ("rd", "csv"),
                              ("simulate", "csv"), ("types", "csv"), ("sweep", "csv"),
                              ("verify", "json")):
        p = sub.add_parser(name)
        p.add_argument("--spec", required=name != "verify", help="JSON problem document")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, help="override the spec's seed")
        p.add_argument("--n", help="blocklength or comma list")
        p.add_argument("--grid", help="start:stop:step")
        p.add_argument("--suite", help="verification suite name")
        p.add_argument("--format", choices=("csv", "json"), default=default_fmt)
    return ap


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    started = time.perf_counter()
    try:
        spec = load_spec(args.spec) if args.spec else None
        if spec is not None and args.seed is not None:
            if args.seed < 0:
                raise ValidationError("--seed: must be non-negative")
            spec = replace(spec, seed=args.seed)
        if args.command == "verify":
            if not args.suite:
                raise ValidationError("--suite: required by verify")
            files, failed = cmd_verify(spec, args)
            emit(args.out, files, spec, argv, started)
            return EXIT_SUITE if failed else EXIT_OK
        files = COMMANDS[args.command](spec, args)
        emit(args.out, files, spec, argv, started)
        return EXIT_OK
    except GuardExceeded as exc:
        print(f"error: {exc}. Exact evaluation is limited to {exc.limit} objects; "
              f"a smaller n or alphabet keeps it tractable.", file=sys.stderr)
        return EXIT_GUARD
    except (ValidationError, InfeasibleError, EmptyFeasibleSetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AssertionError as exc:
        print(f"error: post-check failed: {exc}", file=sys.stderr)
        return EXIT_SUITE
    except SecrexpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
