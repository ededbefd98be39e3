"""Experiment configuration, dispatch, persistence and reporting.

An experiment is a subcommand plus parameters. Trial ``t`` draws from the
generator stream ``(root_seed, t)`` (sweeps over ``n`` use
``(root_seed, n << 32 | t)``), so the rows depend on nothing but the config
and run in any order or thread count. Data files carry no timestamps: the
wall clock and library version go to a ``.meta.json`` next to them.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np
from scipy.stats import binomtest

from . import __version__
from .anticonc import elo_tail
from .endgame import endgame_trial
from .errors import TheoremViolation
from .growth import GrowthParams, grow_single_minor_run, iterative_cover_run, iterative_growth_run, weak_growth_run
from .matrix import IndexSet, SeedSpec, sample_symmetric
from .moments import monte_carlo_second_moment, markov_upper_tail, second_moment_chain
from .permanent import permanent, permanent_submatrix
from .polynomial import QuadraticPolynomial

SCHEMA = "# permlab-schema v1"
THREADS_ENV = "PERMLAB_THREADS"
MAX_PERMANENT_N = 30


class ConfigError(ValueError):
    """An experiment configuration violates a stated constraint."""


# ---------------------------------------------------------------- parameters


def _int(s) -> int:
    return int(s)


def _frac(s) -> Fraction:
    return Fraction(str(s))


def _ints(s) -> tuple[int, ...]:
    if isinstance(s, (tuple, list)):
        return tuple(int(v) for v in s)
    return tuple(int(v) for v in str(s).split(",") if v.strip())


def _opt_frac(s):
    return None if s in (None, "", "auto") else _frac(s)


def _str(s) -> str:
    return str(s)


# name -> (parser, default, help)
COMMON = {
    "trials": (_int, 100, "number of trials (samples)"),
    "seed": (_int, 0, "root seed, 0 <= seed < 2**64"),
}

PARAMS: dict[str, dict[str, tuple[Callable, Any, str]]] = {
    "permanent": {
        "n": (_int, 12, "matrix size"),
        "method": (_str, "glynn", "ryser, glynn or naive"),
    },
    "moments": {
        "n": (_int, 8, "largest matrix size; one row per size 1..n"),
        "eps": (_frac, Fraction(1, 10), "exponent slack in the upper-tail bound"),
    },
    "anticonc": {
        "n": (_int, 12, "number of variables of the random linear form"),
        "t": (_frac, Fraction(1), "small-ball radius in units of r (t >= 1)"),
        "r": (_frac, Fraction(1), "coefficient scale r"),
        "coef_max": (_int, 5, "coefficients are uniform integers in [-coef_max, coef_max]"),
    },
    "grow": {
        "process": (_str, "single", "single, weak, cover or growth"),
        "n": (_int, 16, "final matrix size"),
        "L": (_int, 2, "number of missing rows of the final block"),
        "R": (_int, 5, "offset of the weak-growth stage"),
        "S": (_int, 3, "starting offset (cover/growth processes)"),
        "T": (_int, 2, "target offset (growth process)"),
        "delta": (_frac, Fraction(1, 20), "weak-growth delta"),
        "K": (_frac, Fraction(4), "weak-growth K"),
        "lam": (_opt_frac, None, "starting heaviness (default: the starting block's |per|)"),
        "steps": (_ints, (5, 1, 2, 2), "stage budgets for the single process"),
        "family_cap": (_int, 1 << 16, "largest family the weak stage may track"),
    },
    "endgame": {
        "n": (_int, 12, "matrix size before the step"),
        "L": (_int, 1, "missing rows per block"),
        "m": (_int, 4, "family size"),
        "lam": (_opt_frac, None, "family heaviness (default: smallest |per| found)"),
        "offset": (_int, 0, "constant subtracted from every polynomial"),
    },
    "magnitude-sweep": {
        "ns": (_ints, (8, 12, 16, 20, 24), "matrix sizes"),
        "method": (_str, "glynn", "ryser or glynn"),
    },
    "report": {},
}

SUBCOMMANDS = tuple(PARAMS)


def _validate(sub: str, p: dict, trials: int, seed: int) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(f"{sub}: {msg}")

    need(trials >= 0, "trials >= 0")
    need(0 <= seed < 1 << 64, "0 <= seed < 2**64")
    if sub == "permanent":
        need(1 <= p["n"] <= MAX_PERMANENT_N, f"1 <= n <= {MAX_PERMANENT_N}")
        need(p["method"] in ("ryser", "glynn", "naive"), "method in {ryser, glynn, naive}")
        need(p["method"] != "naive" or p["n"] <= 12, "naive method needs n <= 12")
    elif sub == "moments":
        need(1 <= p["n"] <= 40, "1 <= n <= 40")
        need(p["eps"] >= 0, "eps >= 0")
        need(trials == 0 or p["n"] <= MAX_PERMANENT_N, f"Monte Carlo needs n <= {MAX_PERMANENT_N}")
    elif sub == "anticonc":
        need(1 <= p["n"] <= 64, "1 <= n <= 64")
        need(p["t"] >= 1, "t >= 1")
        need(p["r"] > 0, "r > 0")
        need(p["coef_max"] >= 1, "coef_max >= 1")
    elif sub == "grow":
        n, L, R, S, T = (p[k] for k in ("n", "L", "R", "S", "T"))
        need(p["process"] in ("single", "weak", "cover", "growth"), "process in {single, weak, cover, growth}")
        need(0 < p["delta"] < Fraction(1, 2), "0 < delta < 1/2")
        need(p["K"] > 1, "K > 1")
        need(p["lam"] is None or p["lam"] > 0, "lam > 0")
        need(n <= MAX_PERMANENT_N + 10, f"n <= {MAX_PERMANENT_N + 10}")
        if p["process"] == "single":
            need(L >= 2, "L >= 2")
            need(L * L < R, "L^2 < R")
            need(len(p["steps"]) == 4 and min(p["steps"]) >= 0, "steps has four non-negative budgets")
            need(p["steps"][3] <= 3 * L, "final cover budget steps[3] <= 3L")
            need(n - sum(p["steps"]) > R, "n - sum(steps) > R")
            need(n >= 4 * L, "n >= 4L (room for X and Y)")
        elif p["process"] == "weak":
            need(1 <= R < n, "1 <= R < n")
        elif p["process"] == "cover":
            need(1 <= S and 5 * S <= n, "1 <= S <= n/5 (start at n - 3S with room for S rows)")
        else:
            need(2 <= T < S and 7 * S <= n, "2 <= T < S <= n/7 (start at n - 5S with room for S rows)")
    elif sub == "endgame":
        n, L, m = p["n"], p["L"], p["m"]
        need(2 <= n <= 20, "2 <= n <= 20")
        need(1 <= L and 2 * L * m <= n, "L >= 1 and 2 L m <= n")
        need(m >= 1, "m >= 1")
        need(p["lam"] is None or p["lam"] > 0, "lam > 0")
    elif sub == "magnitude-sweep":
        need(len(p["ns"]) > 0, "at least one n")
        need(all(1 <= n <= MAX_PERMANENT_N for n in p["ns"]), f"every n in 1..{MAX_PERMANENT_N}")
        need(p["method"] in ("ryser", "glynn"), "method in {ryser, glynn}")


def read_config_file(path: str | os.PathLike) -> dict[str, str]:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out


def default_threads() -> int:
    v = os.environ.get(THREADS_ENV)
    try:
        return max(1, int(v)) if v else 1
    except ValueError:
        raise ConfigError(f"{THREADS_ENV}={v!r} is not an integer") from None


@dataclass
class ExperimentConfig:
    subcommand: str
    params: dict[str, Any]
    trials: int = 100
    seed: int = 0
    threads: int = 1
    out: str | None = None
    fmt: str = "csv"

    @classmethod
    def build(cls, subcommand: str, values: dict | None = None, **io_opts) -> ExperimentConfig:
        """Parse and validate. ``values`` maps parameter names to raw values (strings or numbers)."""
        if subcommand not in PARAMS or subcommand == "report":
            raise ConfigError(f"unknown experiment {subcommand!r}")
        values = dict(values or {})
        spec = {**COMMON, **PARAMS[subcommand]}
        unknown = set(values) - set(spec) - {"threads", "out", "format"}
        if unknown:
            raise ConfigError(f"{subcommand}: unknown keys {sorted(unknown)}")
        parsed = {}
        for k, (parse, default, _) in spec.items():
            raw = values.get(k)
            try:
                parsed[k] = default if raw is None else parse(raw)
            except (TypeError, ValueError, ZeroDivisionError):
                raise ConfigError(f"{subcommand}: cannot parse {k}={raw!r}") from None
        trials, seed = parsed.pop("trials"), parsed.pop("seed")
        _validate(subcommand, parsed, trials, seed)
        threads = io_opts.get("threads") or values.get("threads") or default_threads()
        fmt = io_opts.get("fmt") or values.get("format") or "csv"
        if fmt not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        out = io_opts.get("out") or values.get("out")
        return cls(subcommand, parsed, trials, seed, int(threads), out, fmt)

    def snapshot(self) -> dict[str, str]:
        """Everything that determines the data rows, as strings."""
        snap = {k: _fmt(v) for k, v in sorted(self.params.items())}
        snap["trials"] = str(self.trials)
        snap["seed"] = str(self.seed)
        return snap


# ---------------------------------------------------------------- formatting


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, bool) or v is None or isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)) and math.isfinite(v):
        return float(v)
    return _fmt(v)


# ---------------------------------------------------------------- trials


@dataclass
class TrialOutput:
    row: dict[str, Any]
    diagnostics: dict[str, Any] | None = None


def _log_abs(per: int) -> float:
    if per == 0:
        return -math.inf
    # exact ints can exceed float range in principle; log via bit length
    a = abs(per)
    shift = max(0, a.bit_length() - 900)
    return math.log(a >> shift) + shift * math.log(2)


def _normalized_log(per: int, n: int) -> float:
    if n < 2:
        return math.nan
    return _log_abs(per) / (0.5 * n * math.log(n))


def _trial_permanent(cfg: ExperimentConfig, t: int) -> TrialOutput:
    n = cfg.params["n"]
    M = sample_symmetric(n, seed=SeedSpec(cfg.seed, t))
    per = permanent(M, cfg.params["method"])
    return TrialOutput({"trial": t, "n": n, "per": per, "log_abs_per": _log_abs(per)})


def _trial_anticonc(cfg: ExperimentConfig, t: int) -> TrialOutput:
    p = cfg.params
    rng = SeedSpec(cfg.seed, t).generator()
    c = p["coef_max"]
    coeffs = [int(v) * p["r"] for v in rng.integers(-c, c + 1, size=p["n"])]
    f = QuadraticPolynomial.linear_form(coeffs, n_vars=p["n"])
    row = {"trial": t, "m": 0, "t": p["t"], "exact_prob": None, "bound": None, "simple_bound": None,
           "margin": None, "holds": None}
    if not any(abs(v) >= p["r"] for v in coeffs):
        return TrialOutput(row)  # no coefficient reaches r: the inequality says nothing
    e = elo_tail(f, p["r"], p["t"])
    row.update(m=e.m, exact_prob=e.exact_prob, bound=e.binomial_bound, simple_bound=e.simple_bound,
               margin=e.binomial_bound - e.exact_prob, holds=e.chain_holds)
    if not e.chain_holds:
        raise TheoremViolation(f"small-ball chain fails: {e}")
    return TrialOutput(row)


def _lam_or_per(lam, per: int):
    if lam is not None:
        return lam
    return Fraction(abs(per)) if per else None


def _trial_grow(cfg: ExperimentConfig, t: int) -> TrialOutput:
    p = cfg.params
    seed = SeedSpec(cfg.seed, t)
    n = p["n"]
    row = {"trial": t, "process": p["process"], "success": False, "detail": "", "final_lam": None, "per": None}
    if p["process"] == "single":
        L = p["L"]
        params = GrowthParams(n, R=p["R"], L=L, delta=p["delta"], K=p["K"], family_cap=p["family_cap"],
                              lam=p["lam"] or 1)
        X = IndexSet.interval(1, L, n)
        Y = IndexSet.interval(n - 3 * L + 1, n, n)
        res = grow_single_minor_run(n, X, Y, params, seed, stage_steps=p["steps"])
        for st in res.stages:
            tr = st.trace
            tr.check()
        row.update(success=res.success, detail=res.failed_stage or "", final_lam=res.lam, per=res.per)
        diag = {"stages": [
            {"name": st.name, "success": st.success, "start": st.start_dim, "end": st.end_dim,
             "lam": st.lam, **_trace_series(st.trace)} for st in res.stages]}
        return TrialOutput(row, diag)
    if p["process"] == "weak":
        params = GrowthParams(n, R=p["R"], delta=p["delta"], K=p["K"], family_cap=p["family_cap"],
                              lam=p["lam"] or 1)
        res = weak_growth_run(params, seed)
        res.trace.check()
        if res.family is not None and not res.family.verify(res.matrix):
            raise TheoremViolation("weak-growth family fails re-verification")
        row.update(success=not res.aborted, detail=",".join(res.trace.cases),
                   final_lam=res.final_lam, per=len(res.family) if res.family else None)
        return TrialOutput(row, _trace_series(res.trace))
    S = p["S"]
    M = sample_symmetric(n - 3 * S if p["process"] == "cover" else n - 5 * S, seed=seed)
    m0 = M.n
    B = IndexSet.interval(1, m0 - S, m0)
    per0 = permanent_submatrix(M, IndexSet.interval(S + 1, m0, m0), B)
    lam = _lam_or_per(p["lam"], per0)
    if lam is None or abs(per0) < lam:
        row["detail"] = "start block not heavy"
        return TrialOutput(row)
    if p["process"] == "cover":
        res = iterative_cover_run(M, B, S, lam, seed)
    else:
        res = iterative_growth_run(M, B, S, p["T"], lam, seed)
    res.trace.check()
    row.update(success=res.success, detail=",".join(res.trace.moves), final_lam=res.lam, per=res.per)
    return TrialOutput(row, _trace_series(res.trace))


def _trace_series(trace) -> dict:
    out = {}
    for name in ("Q", "N", "W", "moves", "cases"):
        v = getattr(trace, name, None)
        if v is None:
            continue
        out[name] = list(v() if callable(v) else v)
    if hasattr(trace, "lam"):
        out["lam"] = [str(x) for x in trace.lam]
    return out


def _trial_endgame(cfg: ExperimentConfig, t: int) -> TrialOutput:
    p = cfg.params
    tr = endgame_trial(p["n"], p["L"], p["m"], SeedSpec(cfg.seed, t), p["lam"], offset=p["offset"])
    row = {"trial": t, "family_found": tr.result is not None, "easy": 0, "short": 0, "interesting": 0,
           "bad": 0, "qualifying": 0, "needed": -(-p["m"] // 36), "X": 0, "Y": 0, "success": tr.success}
    if tr.result is None:
        return TrialOutput(row)
    r, st = tr.result, tr.result.state
    row.update(st.label_histogram, bad=len(st.bad), qualifying=len(r.qualifying), X=st.X, Y=st.Y)
    diag = {"trial": t, "lam": str(st.lam), "values": r.values, "labels": st.labels, "nu": st.nu,
            "covers": [None if S is None else S.to_list() for S in st.covers],
            "bad": st.bad.to_list(), "T": {str(k): v for k, v in sorted(st.t_counts.items())},
            "pairs": [[q.i, q.j, q.coefficient] for q in r.quadruples]}
    return TrialOutput(row, diag)


def _trial_magnitude(cfg: ExperimentConfig, job: tuple[int, int]) -> TrialOutput:
    n, t = job
    M = sample_symmetric(n, seed=SeedSpec(cfg.seed, n << 32 | t))
    per = permanent(M, cfg.params["method"])
    return TrialOutput({"n": n, "trial": t, "per": per, "log_abs_per": _log_abs(per),
                        "normalized_log_per": _normalized_log(per, n)})


def _trial_moments(cfg: ExperimentConfig, n: int) -> TrialOutput:
    ch = second_moment_chain(n)
    if not ch.holds:
        raise TheoremViolation(f"second-moment bound chain fails at n={n}")
    tail = markov_upper_tail(n, cfg.params["eps"])
    row = {"n": n, "second_moment": ch.exact, "class_bound": ch.class_bound, "explicit_bound": ch.explicit_bound,
           "tail_bound": float(tail.bound), "mc_mean": None, "mc_stderr": None, "relative_error": None,
           "z_score": None}
    if cfg.trials > 0:
        est = monte_carlo_second_moment(n, cfg.trials, SeedSpec(cfg.seed, n << 32))
        row.update(mc_mean=est.mean, mc_stderr=est.stderr, relative_error=est.mean / ch.exact - 1,
                   z_score=(est.mean - ch.exact) / est.stderr if est.stderr > 0 else 0.0)
    return TrialOutput(row)


COLUMNS = {
    "permanent": ["trial", "n", "per", "log_abs_per"],
    "moments": ["n", "second_moment", "class_bound", "explicit_bound", "tail_bound", "mc_mean", "mc_stderr",
                "relative_error", "z_score"],
    "anticonc": ["trial", "m", "t", "exact_prob", "bound", "simple_bound", "margin", "holds"],
    "grow": ["trial", "process", "success", "detail", "final_lam", "per"],
    "endgame": ["trial", "family_found", "easy", "short", "interesting", "bad", "qualifying", "needed", "X", "Y",
                "success"],
    "magnitude-sweep": ["n", "trial", "per", "log_abs_per", "normalized_log_per"],
}


def _jobs(cfg: ExperimentConfig) -> tuple[Callable, list, list[dict]]:
    """Trial function, job list and the seed audit (which stream each job reads)."""
    sub = cfg.subcommand
    if sub == "magnitude-sweep":
        jobs = [(n, t) for n in cfg.params["ns"] for t in range(cfg.trials)]
        audit = [{"n": n, "trial": t, "stream": n << 32 | t} for n, t in jobs]
        return _trial_magnitude, jobs, audit
    if sub == "moments":
        jobs = list(range(1, cfg.params["n"] + 1))
        audit = [{"n": n, "stream": n << 32, "samples": cfg.trials} for n in jobs]
        return _trial_moments, jobs, audit
    fn = {"permanent": _trial_permanent, "anticonc": _trial_anticonc, "grow": _trial_grow,
          "endgame": _trial_endgame}[sub]
    jobs = list(range(cfg.trials))
    return fn, jobs, [{"trial": t, "stream": t} for t in jobs]


# ---------------------------------------------------------------- records


@dataclass
class ExperimentRecord:
    subcommand: str
    config: dict[str, str]
    columns: list[str]
    rows: list[dict[str, Any]]
    summary: dict[str, Any]
    diagnostics: list[dict] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    metadata: dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(SCHEMA + "\n")
        buf.write(f"# subcommand: {self.subcommand}\n")
        buf.write("# config: " + json.dumps(self.config, sort_keys=True) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        cols = self.columns + ["violation"]
        w.writerow(cols)
        for r in self.rows:
            w.writerow([_fmt(r.get(c)) for c in cols])
        for msg in self.summary.get("warnings", []):
            buf.write(f"# warning: {msg}\n")
        return buf.getvalue()

    def to_json(self) -> str:
        data = {"schema": SCHEMA[2:], "subcommand": self.subcommand, "config": self.config,
                "columns": self.columns + ["violation"],
                "rows": [{c: _jsonable(r.get(c)) for c in self.columns + ["violation"]} for r in self.rows],
                "summary": _jsonable(self.summary)}
        return json.dumps(data, indent=1, sort_keys=False) + "\n"


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    ci = binomtest(k, n).proportion_ci(confidence_level=level, method="exact")
    return float(ci.low), float(ci.high)


def _success_summary(rows: Sequence[dict], key: str = "success") -> dict:
    n = len(rows)
    k = sum(1 for r in rows if r.get(key) in (True, "true"))
    if n == 0:
        return {"trials": 0, "successes": 0, "vacuous": True}
    lo, hi = clopper_pearson(k, n)
    return {"trials": n, "successes": k, "success_rate": Fraction(k, n), "ci_low": lo, "ci_high": hi,
            "vacuous": False}


def _median(xs: Sequence[float]) -> float:
    return float(np.median(np.asarray(xs, dtype=float))) if len(xs) else math.nan


def _summarize(cfg: ExperimentConfig, rows: list[dict]) -> dict:
    sub = cfg.subcommand
    s: dict[str, Any] = {"rows": len(rows), "warnings": []}
    if not rows:
        s["vacuous"] = True
        return s
    if sub in ("grow", "endgame"):
        s.update(_success_summary(rows))
    if sub == "endgame":
        m = cfg.params["m"]
        ref = 1 - m ** (-1 / 24)
        s["reference_bound"] = ref
        found = sum(1 for r in rows if r["family_found"])
        s["families_found"] = found
        if s["successes"] < ref * s["trials"]:
            s["warnings"].append(f"success rate below 1 - m^(-1/24) = {ref:.4f} (not guaranteed at this m)")
    if sub == "anticonc":
        margins = [r["margin"] for r in rows if r["margin"] is not None]
        s["instances"] = len(margins)
        s["min_margin"] = min(margins) if margins else None
    if sub == "permanent":
        s["zero_fraction"] = Fraction(sum(1 for r in rows if r["per"] == 0), len(rows))
        s["median_log_abs_per"] = _median([r["log_abs_per"] for r in rows])
    if sub == "magnitude-sweep":
        s["by_n"] = _by_n(rows)
        for n, d in s["by_n"].items():
            med = d["normalized_log_per"]
            if not 0.5 <= med <= 1.1:
                s["warnings"].append(f"n={n}: median normalized log|per| {med:.4f} outside [0.5, 1.1]")
    if sub == "moments" and cfg.trials > 0:
        for r in rows:
            if r["z_score"] is not None and abs(r["z_score"]) > 5:
                s["warnings"].append(f"n={r['n']}: Monte Carlo mean is {r['z_score']:.2f} standard errors off")
    return s


def _by_n(rows: Iterable[dict]) -> dict:
    groups: dict[int, list] = {}
    for r in rows:
        groups.setdefault(int(r["n"]), []).append(r)
    out = {}
    for n in sorted(groups):
        g = groups[n]
        vals = [float(r["normalized_log_per"]) for r in g]
        zeros = sum(1 for r in g if int(r["per"]) == 0)
        out[n] = {"samples": len(g), "zeros": zeros, "zero_fraction": zeros / len(g),
                  "normalized_log_per": _median(vals)}
    return out


def _run_job(fn, cfg, job) -> tuple[TrialOutput | None, str | None]:
    try:
        return fn(cfg, job), None
    except TheoremViolation as exc:
        return None, f"{job}: {exc}"


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentRecord:
    """Run every trial, summarize, and (when ``cfg.out`` is set) write the outputs atomically."""
    fn, jobs, audit = _jobs(cfg)
    start = time.perf_counter()
    if cfg.threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as ex:
            results = list(ex.map(lambda j: _run_job(fn, cfg, j), jobs))
    else:
        results = [_run_job(fn, cfg, j) for j in jobs]
    wall = time.perf_counter() - start
    rows, diags, violations = [], [], []
    cols = COLUMNS[cfg.subcommand]
    for job, (out, err) in zip(jobs, results):
        if err is not None:
            violations.append(err)
            key = dict(zip(("n", "trial"), job)) if isinstance(job, tuple) else {cols[0]: job}
            rows.append({**key, "violation": err})
            continue
        rows.append({**out.row, "violation": ""})
        if out.diagnostics is not None:
            diags.append(out.diagnostics)
    summary = _summarize(cfg, [r for r in rows if not r["violation"]])
    summary["violations"] = len(violations)
    rec = ExperimentRecord(cfg.subcommand, cfg.snapshot(), cols, rows, summary, diags, violations)
    rec.metadata = {
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "wall_clock_seconds": wall,
        "version": __version__,
        "threads": cfg.threads,
        "seed_audit": {"root_seed": cfg.seed, "jobs": audit},
        "summary": _jsonable(summary),
        "config": rec.config,
    }
    if write and cfg.out:
        save_record(rec, cfg.out, cfg.fmt)
    return rec


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write to a temporary file in the same directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_record(rec: ExperimentRecord, out: str | os.PathLike, fmt: str = "csv") -> None:
    atomic_write(out, rec.to_csv() if fmt == "csv" else rec.to_json())
    atomic_write(f"{out}.meta.json", json.dumps(_jsonable(rec.metadata), indent=1) + "\n")
    if rec.diagnostics:
        atomic_write(f"{out}.diag.json", json.dumps(_jsonable(rec.diagnostics), indent=1) + "\n")


# ---------------------------------------------------------------- reports


@dataclass
class LoadedRecord:
    subcommand: str
    config: dict[str, str]
    rows: list[dict[str, str]]


def load_record(path: str | os.PathLike) -> LoadedRecord:
    """Read a CSV or JSON record written by :func:`save_record`; values come back as strings."""
    text = Path(path).read_text(encoding="utf-8")
    if text.lstrip().startswith("{"):
        data = json.loads(text)
        rows = [{k: _fmt(v) if not isinstance(v, str) else v for k, v in r.items()} for r in data["rows"]]
        return LoadedRecord(data["subcommand"], data["config"], rows)
    lines = text.splitlines()
    if not lines or lines[0] != SCHEMA:
        raise ConfigError(f"{path}: missing schema header {SCHEMA!r}")
    sub, config, body = None, {}, []
    for line in lines[1:]:
        if line.startswith("# subcommand: "):
            sub = line[len("# subcommand: "):]
        elif line.startswith("# config: "):
            config = json.loads(line[len("# config: "):])
        elif not line.startswith("#"):
            body.append(line)
    if sub is None:
        raise ConfigError(f"{path}: no subcommand line")
    return LoadedRecord(sub, config, list(csv.DictReader(body)))


def report_summary(records: Sequence[LoadedRecord]) -> tuple[list[str], list[dict]]:
    """Pool records of one subcommand into a summary table ``(columns, rows)``."""
    if not records:
        raise ConfigError("no records to report")
    subs = {r.subcommand for r in records}
    if len(subs) > 1:
        raise ConfigError(f"cannot pool different subcommands: {sorted(subs)}")
    sub = subs.pop()
    rows = [row for r in records for row in r.rows if not row.get("violation")]
    violations = sum(1 for r in records for row in r.rows if row.get("violation"))
    if sub == "magnitude-sweep":
        cols = ["n", "samples", "zeros", "zero_fraction", "normalized_log_per"]
        return cols, [{"n": n, **d} for n, d in _by_n(rows).items()]
    table: dict[str, Any] = {"subcommand": sub, "records": len(records), "rows": len(rows),
                             "violations": violations}
    if rows and "success" in rows[0]:
        s = _success_summary(rows)
        table.update({k: s.get(k) for k in ("trials", "successes", "success_rate", "ci_low", "ci_high")})
    if rows and "margin" in rows[0]:
        ms = [Fraction(r["margin"]) for r in rows if r["margin"]]
        table["min_margin"] = min(ms) if ms else None
        table["median_margin"] = _median([float(x) for x in ms]) if ms else None
    if rows and "log_abs_per" in rows[0]:
        table["median_log_abs_per"] = _median([float(r["log_abs_per"]) for r in rows])
    return list(table), [table]


def table_csv(cols: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    buf.write(SCHEMA + "\n# subcommand: report\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r.get(c)) for c in cols])
    return buf.getvalue()


def magnitude_svg(by_n: Sequence[dict], width: int = 480, height: int = 320) -> str:
    """Polyline of the median normalized log-permanent against ``n``, with axes and labels."""
    pts = [(float(r["n"]), float(r["normalized_log_per"])) for r in by_n if math.isfinite(float(r["normalized_log_per"]))]
    pad = 50
    xs = [p[0] for p in pts] or [0.0, 1.0]
    ys = [p[1] for p in pts] + [0.0, 1.0]
    x0, x1 = min(xs), max(xs) if max(xs) > min(xs) else min(xs) + 1
    y0, y1 = min(ys), max(ys)
    sx = lambda x: pad + (x - x0) / (x1 - x0) * (width - 2 * pad)  # noqa: E731
    sy = lambda y: height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)  # noqa: E731
    poly = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in pts)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle">n</text>',
        f'<text x="14" y="{height / 2}" transform="rotate(-90 14 {height / 2})" text-anchor="middle">'
        "median log|per| / (n log n / 2)</text>",
    ]
    for x, _ in pts:
        parts.append(f'<text x="{sx(x):.1f}" y="{height - pad + 14}" text-anchor="middle">{x:g}</text>')
    for y in (y0, (y0 + y1) / 2, y1):
        parts.append(f'<text x="{pad - 4}" y="{sy(y) + 4:.1f}" text-anchor="end">{y:.2f}</text>')
    parts.append(f'<polyline points="{poly}" fill="none" stroke="steelblue" stroke-width="2"/>')
    for x, y in pts:
        parts.append(f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="3" fill="steelblue"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
