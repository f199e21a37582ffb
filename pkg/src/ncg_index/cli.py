"""Batch runner: ``ncg-index run <config>``.

Every task yields exactly one report row.  Failures are caught per task and
reported with NaN values so the rest of the batch still runs.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .config import JobConfig, ModelConfig, TaskConfig, load_config
from .cyclic import MonomialAlphabet, TableAlphabet, chern_idempotent, chern_invertible, pair, total_boundary
from .errors import ConfigError, NCGError, SymbolError
from .fredholm import (
    KAPPA,
    bounded_transform,
    index_pairing_even,
    index_pairing_odd,
    phase_module,
    winding_number,
)
from .jlo import AsymptoticSampleSet, _basis, densify, finite_part, jlo_pairing
from .local import local_cocycle_all
from .models import SpectralTriple, WindingSymbol, build_circle_dirac, build_finite_even, multiplication_operator
from .zeta import mckean_singer, zeta_index

log = logging.getLogger("ncg_index")

FIELDS = ("task", "method", "k", "re", "im", "tail_bound", "rounded", "defect", "seconds")
INTEGRAL_METHODS = {"winding", "direct", "tau", "chn", "jlo", "local", "heat", "zeta"}


@dataclass
class ReportRow:
    task: str
    method: str
    k: Optional[int]
    re: float
    im: float
    tail_bound: float
    rounded: Optional[int]
    defect: Optional[float]  # None means "not applicable"
    seconds: float
    passed: Optional[bool] = None
    error: Optional[str] = None

    def record(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in FIELDS}


# model construction -------------------------------------------------------------------

def build_model(m: ModelConfig) -> SpectralTriple:
    if m.kind == "circle":
        return build_circle_dirac(int(m.params.get("cutoff", 0)))
    p = m.params
    return build_finite_even(int(p["dim_plus"]), int(p["dim_minus"]), p["P"], p.get("generators"), float(p.get("p", 0.5)))


def _symbol_parts(t: TaskConfig):
    s = WindingSymbol(t.symbol)
    return s, multiplication_operator(s)


def _monomial_chain(t: TaskConfig, cap: int):
    s = WindingSymbol(t.symbol)
    w = s.monomial_degree()
    if w is None:
        raise SymbolError("pairing methods need a monomial symbol")
    c = complex(t.symbol[w])
    if abs(abs(c) - 1.0) > 1e-12:
        raise SymbolError("pairing methods need a unimodular coefficient")
    A = MonomialAlphabet(max(abs(w), 1))
    chain = chern_invertible(A.label(w), A.label(-w), cap, A)
    # a unimodular constant cancels between u and u^-1 in every word
    return w, A, chain


def _idempotent(t: TaskConfig, T: SpectralTriple):
    e = t.idempotent
    if e is None:
        return "1"
    if isinstance(e, str):
        if e != "1" and e not in T.generators:
            raise ConfigError(f"unknown idempotent label {e!r}")
        return e
    if isinstance(e, list):
        return e
    raise ConfigError("idempotent must be a label or a matrix of labels")


def _generator_alphabet(T: SpectralTriple) -> TableAlphabet:
    """Multiplication table of the bound generators, matched numerically."""
    labels = list(T.generators)
    mats = {lab: np.asarray(T.generators[lab]) for lab in labels}
    one = T.unit()
    table = {}
    for a in labels:
        for b in labels:
            prod = mats[a] @ mats[b]
            hit = next((c for c in labels if np.allclose(prod, mats[c], atol=1e-12)), None)
            if hit is None and np.allclose(prod, one, atol=1e-12):
                hit = "1"
            if hit is not None:
                table[(a, b)] = hit
            elif np.allclose(prod, 0, atol=1e-12):
                table[(a, b)] = {}
    return TableAlphabet(table)


def _fit_grid(T: SpectralTriple, eps: Sequence[float]) -> Tuple[float, ...]:
    """The task's epsilons, densified until the finite-part fit is determined."""
    need = len(_basis(AsymptoticSampleSet((1.0, 0.5), (0j, 0j), T.asymptotic_basis))) + 2
    grid = tuple(sorted(set(eps), reverse=True))
    return grid if len(grid) >= need else densify(grid, need)


# task execution -----------------------------------------------------------------------

def _value(t: TaskConfig, T: SpectralTriple) -> Tuple[complex, float, Optional[int]]:
    """(value, tail bound, degree used) of one task."""
    meth = t.method
    if T.parity == "odd":
        if meth == "winding":
            return complex(winding_number(WindingSymbol(t.symbol))), 0.0, None
        if meth == "direct":
            _, u = _symbol_parts(t)
            v = index_pairing_odd(phase_module(T), u, method="direct", window=t.window)
            return v.value, v.tail_bound, None
        if meth in ("tau", "chn"):
            n = t.degree if t.degree is not None else (1 if meth == "tau" else 3)
            s, u = _symbol_parts(t)
            u_inv = multiplication_operator(s.inverse())
            M = phase_module(T) if meth == "tau" else bounded_transform(T)
            v = index_pairing_odd(M, u, u_inv, meth, n, t.window)
            return v.value, v.tail_bound, n
        if meth == "jlo":
            w, _, _ = _monomial_chain(t, 1)
            Tw = build_circle_dirac(abs(w))
            return _jlo_task(t, Tw, lambda cap: _monomial_chain(t, cap)[2], Tw.bindings())
        if meth == "local":
            cap = t.degree if t.degree is not None else 3
            w, _, chain = _monomial_chain(t, cap)
            Tw = build_circle_dirac(abs(w))
            phi = local_cocycle_all(Tw, cap, t.options.get("variant", "renormalized"), t.m_cap)
            return pair(phi, chain, Tw.bindings()) / KAPPA, 0.0, cap
        if meth == "cyclic":
            cap = t.degree if t.degree is not None else 5
            _, A, chain = _monomial_chain(t, cap)
            return _cyclic_defect(chain, A, cap), 0.0, cap
        raise ConfigError(f"method {meth!r} is not available on an odd model")

    e = _idempotent(t, T)
    b = T.bindings()
    if meth == "direct":
        v = index_pairing_even(bounded_transform(T), e, b, "direct")
        return v.value, v.tail_bound, None
    if meth in ("tau", "chn"):
        n = t.degree if t.degree is not None else (0 if meth == "tau" else 2)
        v = index_pairing_even(bounded_transform(T), e, b, meth, n, t.window)
        return v.value, v.tail_bound, n
    if meth == "jlo":
        alpha = _generator_alphabet(T)
        return _jlo_task(t, T, lambda cap: chern_idempotent(e, cap + 1 if cap % 2 else cap, alpha), b)
    if meth == "local":
        cap = t.degree if t.degree is not None else 2
        phi = local_cocycle_all(T, cap, t.options.get("variant", "renormalized"), t.m_cap)
        return pair(phi, chern_idempotent(e, cap, _generator_alphabet(T)), b), 0.0, cap
    if meth == "heat":
        if e != "1":
            raise ConfigError("heat tasks compute the index of D itself; drop 'idempotent'")
        return complex(mckean_singer(T, float(t.options.get("t", 1.0)))), 0.0, None
    if meth == "zeta":
        if e != "1":
            raise ConfigError("zeta tasks compute the index of D itself; drop 'idempotent'")
        dp = int(np.sum(np.diag(T.grading).real > 0))
        P = np.asarray(T.D)[dp:, :dp]
        return zeta_index(P, complex(t.options.get("s", 0.0))), 0.0, None
    if meth == "cyclic":
        cap = t.degree if t.degree is not None else 4
        alpha = _generator_alphabet(T)
        return _cyclic_defect(chern_idempotent(e, cap, alpha), alpha, cap), 0.0, cap
    raise ConfigError(f"method {meth!r} is not available on an even model")


def _cyclic_defect(chain, alphabet, cap: int) -> complex:
    """Largest coefficient of ``(b + B) Ch`` below the truncation degree."""
    return complex(total_boundary(chain, alphabet).truncate(cap - 1).max_abs())


def _jlo_task(t: TaskConfig, T: SpectralTriple, chain_factory, bindings) -> Tuple[complex, float, Optional[int]]:
    grid = _fit_grid(T, t.eps)
    vals, tail = [], 0.0
    for eps in grid:
        v = jlo_pairing(T, chain_factory, bindings, eps, t.window)
        vals.append(v.value)
        tail = max(tail, v.tail_bound)
    fp = finite_part(AsymptoticSampleSet(grid, tuple(vals), T.asymptotic_basis))
    value = fp.value / KAPPA if T.parity == "odd" else fp.value
    return value, tail + fp.residual, None


def run_task(t: TaskConfig, T: SpectralTriple) -> ReportRow:
    start = time.perf_counter()
    try:
        value, tail, k = _value(t, T)
    except (NCGError, ValueError, KeyError, np.linalg.LinAlgError) as exc:
        secs = time.perf_counter() - start
        msg = f"{type(exc).__name__}: {exc}"
        log.warning("task %s (%s) failed: %s", t.id, t.method, msg)
        return ReportRow(t.id, t.method, t.degree, math.nan, math.nan, math.nan, None, None, secs,
                         passed=False if t.tolerance is not None else None, error=msg)
    secs = time.perf_counter() - start
    value = complex(value)
    integral = t.method in INTEGRAL_METHODS
    rounded = int(round(value.real)) if integral and math.isfinite(value.real) else None
    defect = abs(value - rounded) if rounded is not None else None
    passed = None
    if t.tolerance is not None:
        if integral:
            passed = defect is not None and defect <= t.tolerance
        else:
            passed = abs(value) <= t.tolerance
        if t.expect is not None:
            passed = passed and abs(value - complex(t.expect)) <= t.tolerance
    return ReportRow(t.id, t.method, k, value.real, value.imag, float(tail), rounded, defect, secs, passed)


def _threads() -> int:
    raw = os.environ.get("NCG_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"NCG_THREADS must be an integer, got {raw!r}") from None


def run(job: JobConfig) -> Tuple[List[ReportRow], int]:
    """Execute every task; rows keep declaration order. Returns ``(rows, exit_code)``."""
    try:
        T = build_model(job.model)
    except NCGError as exc:
        raise ConfigError(f"model construction failed: {exc}") from exc
    workers = min(_threads(), max(1, len(job.tasks)))
    if workers == 1:
        rows = [run_task(t, T) for t in job.tasks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda t: run_task(t, T), job.tasks))
    code = 0 if all(r.passed is not False for r in rows) else 1
    return rows, code


def _fmt(v) -> str:
    if v is None:
        return "NA"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_report(rows: Sequence[ReportRow], fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(FIELDS)
        for r in rows:
            rec = r.record()
            w.writerow([_fmt(rec[k]) for k in FIELDS])
        return buf.getvalue()
    if fmt == "jsonl":
        out = []
        for r in rows:
            rec = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in r.record().items()}
            out.append(json.dumps(rec))
        return "".join(line + "\n" for line in out)
    raise ConfigError(f"unknown format {fmt!r}")


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="ncg-index")
    sub = parser.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the tasks of a JSON job file")
    r.add_argument("config")
    r.add_argument("--out")
    r.add_argument("--format", choices=("csv", "jsonl"))
    r.add_argument("--window", type=int)
    r.add_argument("--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        with open(args.config, encoding="utf-8") as fh:
            job = load_config(fh.read(), args.window)
        rows, code = run(job)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for row in rows:
        if args.verbose:
            status = "skip" if row.passed is None else ("ok" if row.passed else "FAIL")
            log.info("%s %s %s %.3fs%s", status, row.task, row.method, row.seconds, f" ({row.error})" if row.error else "")
    text = emit_report(rows, args.format or job.format)
    dest = args.out or job.output
    if dest:
        with open(dest, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
