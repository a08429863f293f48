"""Randomised identity suites: configuration, parameter sampling and reports.

Every (identity, r1, r2, draw) task owns an independent counter-based
random stream, so results do not depend on evaluation order or on how the
tasks are spread over worker processes.
"""

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import identities as idn
from .core import BaseNome, Evaluator, NonGenericError, Q, reflect_identities_check, sym
from .matrices import (
    EllipticFParams, EllipticGParams, HypergeomParams, QHypergeomParams,
    SylvesterBinomialParams, _Params)
from .report import IdentityId, IdentityReport

SCHEMA = 1
GENERICITY_FLOOR = 1e-6
MAX_RETRIES = 1000
MODULUS_RANGE = (0.2, 2.0)

# the fifteen identities of the determinant study; REFLECT is opt-in
ALL_IDENTITIES = tuple(i for i in IdentityId if i is not IdentityId.REFLECT)


class ConfigError(ValueError):
    """Invalid run configuration; the message names the field (and line)."""


class GenericityExhausted(RuntimeError):
    """No generic parameter point found within the retry budget."""

    def __init__(self, message, factor=None):
        super().__init__(message)
        self.factor = factor


# configuration ---------------------------------------------------------------------

def parse_grid(cells):
    """Grid from ``"2x3"``, ``"n<=8"`` tokens or ``[r1, r2]`` pairs.

    ``n<=N`` expands to every (r1, r2) with ``1 <= r1 + r2 <= N``.
    """
    if isinstance(cells, str):
        cells = [t for t in cells.split(",") if t.strip()]
    out = []
    for item in cells:
        if isinstance(item, str):
            t = item.strip().lower().replace(" ", "")
            if t.startswith("n<="):
                top = int(t[3:])
                out.extend((r1, n - r1) for n in range(1, top + 1) for r1 in range(n + 1))
                continue
            r1, _, r2 = t.partition("x")
            out.append((int(r1), int(r2)))
        else:
            r1, r2 = item
            out.append((int(r1), int(r2)))
    for r1, r2 in out:
        if r1 < 0 or r2 < 0:
            raise ValueError(f"negative block size in {(r1, r2)}")
    return tuple(dict.fromkeys(out))


def parse_identities(ids):
    if isinstance(ids, str):
        if ids.strip().lower() == "all":
            return ALL_IDENTITIES
        ids = [t for t in ids.split(",") if t.strip()]
    if list(ids) == ["all"]:
        return ALL_IDENTITIES
    return tuple(IdentityId.parse(s) if isinstance(s, str) else IdentityId(s) for s in ids)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    identities: tuple = ALL_IDENTITIES
    grid: tuple = ((2, 2),)
    draws_per_cell: int = 20
    tolerance: float = 1e-8
    p_modulus_max: float = 0.5
    output_format: str = "json"

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("field 'seed': must be a 64-bit unsigned integer")
        if self.draws_per_cell < 1:
            raise ConfigError("field 'draws_per_cell': must be >= 1")
        if not self.tolerance > 0:
            raise ConfigError("field 'tolerance': must be > 0")
        if not 0 <= self.p_modulus_max < 1:
            raise ConfigError("field 'p_modulus_max': must lie in [0, 1)")
        if self.output_format not in ("json", "csv", "text"):
            raise ConfigError("field 'output_format': one of json, csv, text")
        if not self.identities:
            raise ConfigError("field 'identities': empty")
        if not self.grid:
            raise ConfigError("field 'grid': empty")

    def to_dict(self):
        d = asdict(self)
        d["identities"] = [i.value for i in self.identities]
        d["grid"] = [list(c) for c in self.grid]
        return d

    @classmethod
    def from_dict(cls, d, lines=None):
        """Build from a mapping; errors name the offending field."""
        known = {f for f in cls.__dataclass_fields__}
        kw = {}
        for key, value in d.items():
            where = _where(lines, key)
            if key not in known:
                raise ConfigError(f"{where}unknown field {key!r}")
            try:
                if key == "identities":
                    value = parse_identities(value)
                elif key == "grid":
                    value = parse_grid(value)
                elif key in ("seed", "draws_per_cell"):
                    if isinstance(value, bool) or int(value) != value:
                        raise ValueError("expected an integer")
                    value = int(value)
                elif key in ("tolerance", "p_modulus_max"):
                    value = float(value)
                elif key == "output_format":
                    value = str(value)
            except (TypeError, ValueError) as e:
                raise ConfigError(f"{where}field {key!r}: {e}") from None
            kw[key] = value
        try:
            return cls(**kw)
        except ConfigError as e:
            name = str(e).split("'")[1] if "'" in str(e) else ""
            raise ConfigError(f"{_where(lines, name)}{e}") from None

    @classmethod
    def from_json(cls, text):
        try:
            d = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
        if not isinstance(d, dict):
            raise ConfigError("line 1: top level must be a JSON object")
        return cls.from_dict(d, text.splitlines())


def _where(lines, key):
    if not lines or not key:
        return ""
    for n, line in enumerate(lines, 1):
        if f'"{key}"' in line:
            return f"line {n}: "
    return ""


# random streams --------------------------------------------------------------------

def prng_info():
    return {"name": "numpy.random.Philox", "variant": "4x64-10",
            "seeding": "SeedSequence(entropy=seed, spawn_key=(identity, r1, r2, draw))",
            "numpy": np.__version__}


def task_rng(seed, ident, r1, r2, draw):
    """Independent stream for one task; ``ident`` enters by its enum position."""
    key = (list(IdentityId).index(ident), r1, r2, draw)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


class _Draw:
    """Parameter sampling policy on top of a numpy Generator."""

    def __init__(self, rng, p_max):
        self.rng = rng
        self.p_max = p_max

    def z(self):
        """Modulus log-uniform in MODULUS_RANGE, phase uniform."""
        lo, hi = MODULUS_RANGE
        mod = math.exp(self.rng.uniform(math.log(lo), math.log(hi)))
        ph = self.rng.uniform(0.0, 2 * math.pi)
        return complex(mod * math.cos(ph), mod * math.sin(ph))

    def zs(self, n):
        return tuple(self.z() for _ in range(n))

    def nome(self):
        mod = self.rng.uniform(0.0, self.p_max)
        ph = self.rng.uniform(0.0, 2 * math.pi)
        return complex(mod * math.cos(ph), mod * math.sin(ph))

    def bn(self, elliptic=True):
        q = self.z()
        return BaseNome(q, self.nome() if elliptic else 0j)


@dataclass(frozen=True)
class ReflectParams(_Params):
    """Point for the theta factorial reflection checks."""

    bn: BaseNome
    a: complex
    n: int

    def evaluator(self, min_abs=0.0):
        return Evaluator(self.bn, {"a": self.a}, min_abs)


def _sample_f(d, r1, r2):
    return EllipticFParams(d.bn(), *d.zs(4), r1, r2)


def _sample_g(d, r1, r2):
    return EllipticGParams(d.bn(), *d.zs(6), r1, r2)


def _sample_sec5(d, r1, r2):
    a, b, c, e, f = d.zs(5)
    return EllipticGParams(d.bn(), a, b, c, None, e, f, r1, r2)


def _sample_lemma32(d, r1, r2):
    bn = d.bn()
    ks = tuple(sorted(int(k) for k in d.rng.choice(r1 + r2, size=r2, replace=False)))
    return idn.Lemma32Params(bn, d.z(), r1, r2, ks)


def _sample_warnaar(d, r1, r2):
    n = r2
    return idn.WarnaarParams(d.bn(), d.z(), d.zs(n), d.zs(n), n)


SAMPLERS = {
    IdentityId.SYL_BIN: lambda d, r1, r2: SylvesterBinomialParams(*d.zs(2), r1, r2),
    IdentityId.FKX: lambda d, r1, r2: HypergeomParams(*d.zs(2), r1, r2),
    IdentityId.THM21: _sample_f,
    IdentityId.THM21_ALT: _sample_f,
    IdentityId.COR22: lambda d, r1, r2: QHypergeomParams(d.bn(False), *d.zs(2), r1, r2),
    IdentityId.COR23: lambda d, r1, r2: QHypergeomParams(d.bn(False), *d.zs(2), r1, r2),
    IdentityId.WARNAAR_LEMMA: _sample_warnaar,
    IdentityId.LEMMA32: _sample_lemma32,
    IdentityId.CN_SUM: _sample_f,
    IdentityId.LAPLACE_XCHECK: _sample_f,
    IdentityId.THM41: _sample_g,
    IdentityId.RCG: _sample_g,
    IdentityId.SEC5_LHS: _sample_sec5,
    IdentityId.SEC5_HPRIME: _sample_sec5,
    IdentityId.SEC5_RHS: _sample_sec5,
    IdentityId.REFLECT: lambda d, r1, r2: ReflectParams(d.bn(), d.z(), r1 + r2),
}


def _fkx_screen(p, floor):
    for j in range(1, p.r1 + 1):
        for i in range(p.r2):
            x = p.s1 + p.s2 + p.r1 + p.r2 + j - 2 + i
            if abs(x) < floor:
                raise NonGenericError(f"|{x:.3g}| below {floor:g}", factor=f"s1+s2+{p.r1 + p.r2 + j - 2 + i}")


def _reflect(p, tolerance, min_abs):
    ev = p.evaluator(min_abs)
    ev.fac(sym("a"), p.n)
    ev.fac(Q ** (1 - p.n) / sym("a"), p.n)
    return reflect_identities_check(p.a, p.n, p.bn, min(tolerance, 1e-10))


def _fkx(p, tolerance, min_abs):
    _fkx_screen(p, min_abs)
    return idn.fkx_check(p, tolerance)


CHECKS = {
    IdentityId.SYL_BIN: lambda p, tol, m: idn.syl_bin_check(p, tol),
    IdentityId.FKX: _fkx,
    IdentityId.THM21: lambda p, tol, m: idn.thm21_check(p, "main", tolerance=tol, min_abs=m),
    IdentityId.THM21_ALT: lambda p, tol, m: idn.thm21_check(p, "alt", tolerance=tol, min_abs=m),
    IdentityId.COR22: lambda p, tol, m: idn.cor22_check(p, tolerance=tol, min_abs=m),
    IdentityId.COR23: lambda p, tol, m: idn.cor23_check(p, tolerance=tol, min_abs=m),
    IdentityId.WARNAAR_LEMMA: lambda p, tol, m: idn.warnaar_lemma_check(p, tolerance=tol, min_abs=m),
    IdentityId.LEMMA32: lambda p, tol, m: idn.lemma32_check(p, tolerance=tol, min_abs=m),
    IdentityId.CN_SUM: lambda p, tol, m: idn.cn_sum_check(p, tolerance=tol, min_abs=m),
    IdentityId.LAPLACE_XCHECK: lambda p, tol, m: idn.laplace_cross_check(p, tolerance=tol, min_abs=m),
    IdentityId.THM41: lambda p, tol, m: idn.thm41_check(p, tolerance=tol, min_abs=m),
    IdentityId.RCG: lambda p, tol, m: idn.rcg_check(p, tolerance=tol, min_abs=m),
    IdentityId.SEC5_LHS: lambda p, tol, m: idn.sec5_lhs_check(p, tolerance=tol, min_abs=m),
    IdentityId.SEC5_HPRIME: lambda p, tol, m: idn.sec5_hprime_check(
        p, tolerance=min(tol, 1e-9), min_abs=m),
    IdentityId.SEC5_RHS: lambda p, tol, m: idn.sec5_rhs_check(p, tolerance=tol, min_abs=m),
    IdentityId.REFLECT: _reflect,
}

PARAM_TYPES = {cls.__name__: cls for cls in (
    SylvesterBinomialParams, HypergeomParams, EllipticFParams, QHypergeomParams,
    EllipticGParams, idn.Lemma32Params, idn.WarnaarParams, ReflectParams)}


def run_check(ident, params, tolerance=1e-8, min_abs=0.0):
    """Evaluate one identity at a parameter point (no sampling)."""
    return CHECKS[ident](params, tolerance, min_abs)


def sample_and_check(ident, r1, r2, rng, tolerance=1e-8, p_modulus_max=0.5):
    """Rejection-sample a generic point and check it.

    Returns ``(params, report, rejections)``. A draw is rejected when any
    non-structural theta factor met while evaluating both sides has reduced
    modulus below GENERICITY_FLOOR.
    """
    d = _Draw(rng, p_modulus_max)
    last = None
    for tries in range(MAX_RETRIES):
        params = SAMPLERS[ident](d, r1, r2)
        try:
            rep = run_check(ident, params, tolerance, GENERICITY_FLOOR)
        except NonGenericError as e:
            last = e
            continue
        return params, rep, tries
    raise GenericityExhausted(
        f"{ident.value} at ({r1}, {r2}): no generic draw in {MAX_RETRIES} tries; "
        f"last offending factor {last.factor}", factor=last.factor)


def sample_params(ident, r1, r2, rng, p_modulus_max=0.5):
    """A generic parameter bundle for ``ident`` (screened by a full evaluation)."""
    return sample_and_check(ident, r1, r2, rng, p_modulus_max=p_modulus_max)[0]


# suites ------------------------------------------------------------------------------

@dataclass
class SuiteSummary:
    total: int
    passed: int
    worst_residual: float
    worst_case: dict
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self):
        """Serialisable form; wall time is left out so reports are reproducible."""
        return {"total": self.total, "passed": self.passed,
                "worst_residual": _jsonable(self.worst_residual),
                "worst_case": self.worst_case}


def tasks(cfg):
    """All (identity, r1, r2, draw) tasks in report order."""
    return [(ident, r1, r2, draw) for ident in cfg.identities
            for r1, r2 in cfg.grid for draw in range(cfg.draws_per_cell)]


def _run_task(args):
    seed, tol, pmax, (ident, r1, r2, draw) = args
    rng = task_rng(seed, ident, r1, r2, draw)
    rec = {"identity": ident.value, "r1": r1, "r2": r2, "draw": draw}
    try:
        _, rep, rejected = sample_and_check(ident, r1, r2, rng, tol, pmax)
    except GenericityExhausted as e:
        rec.update(passed=False, rel_residual=None, error=str(e), factor=e.factor)
        return rec
    except (ArithmeticError, ValueError) as e:
        rec.update(passed=False, rel_residual=None, error=f"{type(e).__name__}: {e}")
        return rec
    rec.update(report_to_dict(rep))
    rec["rejected_draws"] = rejected
    return rec


def run_cases(cfg, jobs=1):
    """Evaluate every task; results come back in deterministic task order."""
    work = [(cfg.seed, cfg.tolerance, cfg.p_modulus_max, t) for t in tasks(cfg)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            recs = list(pool.map(_run_task, work, chunksize=4))
    else:
        recs = [_run_task(w) for w in work]
    for n, rec in enumerate(recs):
        rec["case"] = n
    return recs


def summarise(recs, wall_time=0.0):
    passed = sum(1 for r in recs if r["passed"])
    worst, worst_case = 0.0, {}
    for r in recs:
        res = r.get("rel_residual")
        res = math.inf if res is None or isinstance(res, str) else res
        if not worst_case or res > worst:
            worst = res
            worst_case = {"case": r["case"], "identity": r["identity"], "r1": r["r1"],
                          "r2": r["r2"], "draw": r["draw"],
                          "params": r.get("params_echo")}
    return SuiteSummary(len(recs), passed, worst, worst_case, wall_time)


def run_suite(cfg, stream=None, jobs=1):
    """Run a configured suite, writing the report to ``stream`` if given.

    Returns the SuiteSummary; its ``records`` attribute holds the per-case
    dictionaries in report order.
    """
    start = time.perf_counter()
    recs = run_cases(cfg, jobs)
    summary = summarise(recs, time.perf_counter() - start)
    summary.records = recs
    if stream is not None:
        write_report(cfg, recs, summary, stream)
    return summary


# report formats --------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, np.integer)):
        return _jsonable(x.item())
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def tracked_to_dict(v):
    if v.is_pole:
        return {"zero_order": v.zero_order}
    m = complex(v.mantissa)
    return {"mantissa": [m.real, m.imag], "exp2": v.exp2, "zero_order": v.zero_order}


def report_to_dict(rep):
    return _jsonable({
        "id": rep.id.value, "passed": bool(rep.passed), "rel_residual": float(rep.rel_residual),
        "tolerance": rep.tolerance, "lhs": tracked_to_dict(rep.lhs),
        "rhs": tracked_to_dict(rep.rhs), "params_echo": rep.params_echo,
        "diagnostics": rep.diagnostics})


def header(cfg):
    return {"schema": SCHEMA, "prng": prng_info(), "config": cfg.to_dict()}


def write_report(cfg, recs, summary, stream):
    fmt = cfg.output_format
    if fmt == "json":
        stream.write(json.dumps(header(cfg), sort_keys=True) + "\n")
        for r in recs:
            stream.write(json.dumps(r, sort_keys=True) + "\n")
        stream.write(json.dumps({"summary": summary.to_dict()}, sort_keys=True) + "\n")
    elif fmt == "csv":
        w = csv.writer(stream, lineterminator="\n")
        w.writerow(["identity", "r1", "r2", "draw", "residual", "passed"])
        for r in recs:
            res = r.get("rel_residual")
            w.writerow([r["identity"], r["r1"], r["r2"], r["draw"],
                        "" if res is None else repr(res), str(bool(r["passed"])).lower()])
    else:
        for r in recs:
            res = r.get("rel_residual")
            tag = "PASS" if r["passed"] else "FAIL"
            shown = r.get("error") or f"residual {res:.3e}"
            extra = r.get("diagnostics", {}).get("precision")
            extra = f" [{extra}]" if extra else ""
            stream.write(f"{tag} {r['identity']:<15} ({r['r1']},{r['r2']}) "
                         f"draw {r['draw']:>3}  {shown}{extra}\n")
        stream.write(f"{summary.passed}/{summary.total} passed, worst residual "
                     f"{summary.worst_residual:.3e}, {summary.wall_time:.1f} s\n")


def render(cfg, recs, summary):
    buf = io.StringIO()
    write_report(cfg, recs, summary, buf)
    return buf.getvalue()


# replay ------------------------------------------------------------------------------------

def read_report(path):
    """Header, case records and summary of a JSON-lines report."""
    head, recs, summary = None, [], None
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            obj = json.loads(line)
            if "schema" in obj:
                head = obj
            elif "summary" in obj:
                summary = obj["summary"]
            else:
                recs.append(obj)
    return head, recs, summary


def params_from_echo(echo):
    cls = PARAM_TYPES[echo["type"]]
    return cls.from_dict(echo)


def replay(path, case):
    """Re-evaluate one case of a stored report from its params echo.

    Returns ``(stored record, fresh IdentityReport)``.
    """
    head, recs, _ = read_report(path)
    matches = [r for r in recs if r.get("case") == case]
    if not matches:
        raise KeyError(f"no case {case} in {path}")
    rec = matches[0]
    if "params_echo" not in rec:
        raise ValueError(f"case {case} has no parameters: {rec.get('error')}")
    ident = IdentityId.parse(rec["identity"])
    tol = head["config"]["tolerance"] if head else rec["tolerance"]
    rep = run_check(ident, params_from_echo(rec["params_echo"]), tol, GENERICITY_FLOOR)
    return rec, rep

