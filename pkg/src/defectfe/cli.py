"""Batch front-end: config file in, CSV artifacts out.

One schema serves every value-producing selector so downstream tooling
parses a single shape: rows of (N, estimator, value, stderr, abs_err,
ginf), floats at 17 significant digits, one provenance comment line
prefixed '#' and free of timestamps so identical config plus seed gives
a byte-identical file. The assumption check and the strain-energy table
write their own smaller schemas.

Exit codes: 0 success, 2 configuration problem, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import math
import os
import sys
from typing import NamedTuple

import numpy as np
import yaml

from .cauchy_born import CauchyBornEvaluator
from .coarse_grain import ChainSpec, cg_free_energy, limit_free_energy
from .errors import ConfigError, DefectFEError, NumericalError
from .oracles import dense_free_energy
from .potentials import (DefectSpec, Potential, build_force_sequence,
                         check_assumptions, make_potential)
from .quadrature import QuadratureConfig
from .sampler import MalaConfig, estimate_gn

__all__ = [
    "RunConfig",
    "ConvergenceReport",
    "SlopeFit",
    "load_config",
    "fit_slope",
    "run",
    "main",
]

_SELECTORS = ("gn-sample", "gn-dense", "gncg", "ginf", "convergence",
              "check", "cb-table")
_ESTIMATORS = ("gn-sample", "gn-dense", "gncg")
_TOP_KEYS = {"selector", "potential", "defect", "forces", "A", "N", "beta",
             "seed", "out", "estimators", "sampler", "quadrature", "table",
             "window"}


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """A fully validated run: model, grid, knobs, destination."""

    selector: str
    psi: Potential
    defect: DefectSpec | None
    forces_raw: dict | None
    A: float
    n_list: tuple[int, ...]
    seed: int
    mala: MalaConfig
    quad: QuadratureConfig
    estimators: tuple[str, ...]
    out: str | None
    workers: int | None
    table: tuple[float, float, int] | None
    window: tuple[float, float] | None


class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    residual: float
    n_excluded: int


@dataclasses.dataclass(frozen=True)
class CsvRow:
    N: int
    estimator: str
    value: float
    stderr: float
    abs_err: float
    ginf: float


@dataclasses.dataclass(frozen=True)
class ConvergenceReport:
    """Rows plus per-series log-log fits against the limit value.

    A load sweep (forces.p given as a list) labels each series
    "estimator:p=..." and gives it its own limit value; rows carry their
    own ginf, and the report-level ginf is the first series' value.
    """

    rows: tuple[CsvRow, ...]
    ginf: float
    fits: tuple[tuple[str, SlopeFit | None], ...]


def fit_slope(pairs, stderrs=None) -> SlopeFit:
    """Ordinary least squares of log error against log N.

    pairs is a sequence of (N, error). When stderrs is given, rows whose
    error sits below 10x their standard error are excluded before the
    fit (below that floor the error is sampling noise, not convergence)
    and the exclusion count is reported. residual is the RMS misfit in
    log-log space. Raises ValueError with fewer than 3 usable pairs.
    """
    pts = [(float(n), float(e)) for n, e in pairs]
    if stderrs is None:
        stderrs = [0.0] * len(pts)
    if len(stderrs) != len(pts):
        raise ValueError("stderrs must match pairs")
    usable = [(n, e) for (n, e), s in zip(pts, stderrs)
              if e > 0.0 and e >= 10.0 * s]
    excluded = sum(1 for (_, e), s in zip(pts, stderrs)
                   if e > 0.0 and e < 10.0 * s)
    if len(usable) < 3:
        raise ValueError(f"slope fit needs at least 3 usable pairs, got {len(usable)}")
    x = np.log([n for n, _ in usable])
    y = np.log([e for _, e in usable])
    slope, intercept = np.polyfit(x, y, 1)
    resid = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    return SlopeFit(float(slope), float(intercept), resid, excluded)


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


def _build_potential(section, name: str) -> Potential:
    _require(isinstance(section, dict) and "kind" in section,
             f"{name}: expected a mapping with a 'kind' field")
    extra = set(section) - {"kind", "params", "window"}
    _require(not extra, f"{name}: unknown fields {sorted(extra)}")
    window = section.get("window")
    if window is not None:
        _require(isinstance(window, (list, tuple)) and len(window) == 2,
                 f"{name}.window: expected [lo, hi]")
        window = (float(window[0]), float(window[1]))
    try:
        return make_potential(str(section["kind"]),
                              tuple(float(p) for p in section.get("params", ())),
                              window)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def _build_section(cls, section, name: str, **fixed):
    section = dict(section or {})
    known = {f.name for f in dataclasses.fields(cls)} - set(fixed)
    extra = set(section) - known
    _require(not extra, f"{name}: unknown fields {sorted(extra)}")
    try:
        return cls(**section, **fixed)
    except (TypeError, ValueError, ConfigError) as exc:
        raise ConfigError(f"{name}: {exc}") from exc


def load_config(path: str, *, selector: str, out: str | None = None,
                seed: int | None = None, workers: int | None = None) -> RunConfig:
    """Parse and validate a YAML run configuration.

    Command-line values (selector, out, seed, workers) override the
    file; a selector named in the file must agree with the command line.
    Every validation failure names the offending field.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    _require(isinstance(raw, dict), f"config {path}: top level must be a mapping")
    extra = set(raw) - _TOP_KEYS
    _require(not extra, f"config: unknown fields {sorted(extra)}")

    _require(selector in _SELECTORS,
             f"selector: unknown value {selector!r}")
    named = raw.get("selector")
    _require(named is None or named == selector,
             f"selector: config names {named!r} but the command line asked for {selector!r}")

    beta = raw.get("beta")
    _require(beta is None or float(beta) == 1.0,
             f"beta: must equal 1 (fixed model convention), got {beta}")

    psi = _build_potential(raw.get("potential"), "potential")
    defect = None
    if raw.get("defect") is not None:
        defect = DefectSpec(_build_potential(raw["defect"], "defect"))

    forces_raw = raw.get("forces")
    if forces_raw is not None:
        _require(isinstance(forces_raw, dict) and "kind" in forces_raw,
                 "forces: expected a mapping with a 'kind' field")
        extra = set(forces_raw) - {"kind", "p", "entries"}
        _require(not extra, f"forces: unknown fields {sorted(extra)}")
        if isinstance(forces_raw.get("p"), (list, tuple)):
            _require(selector == "convergence",
                     "forces.p: a decay-exponent sweep is only valid with the "
                     "convergence selector")

    n_raw = raw.get("N", [2])
    _require(isinstance(n_raw, (list, tuple)) and len(n_raw) > 0,
             "N: expected a non-empty list")
    n_list = tuple(int(n) for n in n_raw)
    _require(all(n >= 2 for n in n_list), "N: every entry must be >= 2")
    _require(all(b > a for a, b in zip(n_list, n_list[1:])),
             "N: list must be strictly increasing")

    if forces_raw is not None:
        # fail at load time, not mid-run: entries must fit the smallest N
        # and every swept exponent must be admissible
        for _, variant in _forces_variants(forces_raw):
            _build_forces(variant, n_list[0])

    a_val = raw.get("A")
    _require(a_val is not None and math.isfinite(float(a_val)),
             "A: a finite boundary strain is required")

    eff_seed = seed if seed is not None else int(raw.get("seed", 0))
    mala = _build_section(MalaConfig, raw.get("sampler"), "sampler", seed=eff_seed)
    quad = _build_section(QuadratureConfig, raw.get("quadrature"), "quadrature")

    est_raw = raw.get("estimators", ["gncg"])
    _require(isinstance(est_raw, (list, tuple)) and len(est_raw) > 0,
             "estimators: expected a non-empty list")
    estimators = tuple(str(e) for e in est_raw)
    bad = [e for e in estimators if e not in _ESTIMATORS]
    _require(not bad, f"estimators: unknown entries {bad} (choose from {list(_ESTIMATORS)})")

    table = None
    if raw.get("table") is not None:
        t = raw["table"]
        extra = set(t) - {"lo", "hi", "n"}
        _require(isinstance(t, dict) and not extra,
                 f"table: unknown fields {sorted(extra) if isinstance(t, dict) else t}")
        table = (float(t.get("lo", float(a_val) - 2.0)),
                 float(t.get("hi", float(a_val) + 2.0)), int(t.get("n", 129)))
        _require(table[1] > table[0] and table[2] >= 2,
                 "table: need hi > lo and n >= 2")

    window = None
    if raw.get("window") is not None:
        w = raw["window"]
        _require(isinstance(w, (list, tuple)) and len(w) == 2 and float(w[1]) > float(w[0]),
                 "window: expected [lo, hi] with hi > lo")
        window = (float(w[0]), float(w[1]))

    if workers is None:
        env = os.environ.get("DEFECTFE_WORKERS")
        if env is not None:
            try:
                workers = int(env)
            except ValueError as exc:
                raise ConfigError(f"DEFECTFE_WORKERS: not an integer: {env!r}") from exc
    _require(workers is None or workers >= 1, "workers: must be >= 1")

    return RunConfig(selector=selector, psi=psi, defect=defect,
                     forces_raw=dict(forces_raw) if forces_raw else None,
                     A=float(a_val), n_list=n_list, seed=eff_seed, mala=mala,
                     quad=quad, estimators=estimators,
                     out=out if out is not None else raw.get("out"),
                     workers=workers, table=table, window=window)


def _forces_variants(forces_raw: dict | None):
    """Expand a load spec into (series suffix, scalar spec) pairs."""
    if forces_raw is None:
        return [("", None)]
    p = forces_raw.get("p")
    if isinstance(p, (list, tuple)):
        return [(f":p={float(pi):g}", {**forces_raw, "p": float(pi)}) for pi in p]
    return [("", dict(forces_raw))]


def _build_forces(forces_raw: dict, n: int):
    kind = str(forces_raw["kind"])
    try:
        if kind == "explicit":
            return build_force_sequence("explicit", n,
                                        entries=forces_raw.get("entries"))
        if kind == "power-law":
            p = forces_raw.get("p")
            return build_force_sequence("power-law", n,
                                        p=None if p is None else float(p))
        raise ConfigError(f"forces.kind: unknown value {kind!r}")
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"forces: {exc}") from exc


def _chain_spec(config: RunConfig, n: int,
                forces_raw: dict | None = None) -> ChainSpec:
    forces_raw = forces_raw if forces_raw is not None else config.forces_raw
    forces = _build_forces(forces_raw, n) if forces_raw else None
    return ChainSpec(N=n, A=config.A, psi=config.psi, defect=config.defect,
                     forces=forces)


def _stream_seed(master: int, n: int) -> int:
    """Per-N sampling seed so chains at different N are independent."""
    return int(np.random.SeedSequence([master, n]).generate_state(1, np.uint64)[0])


def _config_digest(config: RunConfig) -> str:
    parts = [config.selector, config.psi.coeffs,
             config.defect.perturbation.coeffs if config.defect else None,
             sorted(config.forces_raw.items()) if config.forces_raw else None,
             config.A, config.n_list, config.seed,
             dataclasses.astuple(config.mala), dataclasses.astuple(config.quad),
             config.estimators]
    return hashlib.sha256(repr(parts).encode()).hexdigest()[:16]


def _estimate(estimator: str, config: RunConfig, n: int,
              forces_raw: dict | None) -> tuple[float, float]:
    spec = _chain_spec(config, n, forces_raw)
    if estimator == "gncg":
        return cg_free_energy(spec, config.quad), 0.0
    if estimator == "gn-dense":
        return dense_free_energy(spec, config.quad), 0.0
    if estimator == "gn-sample":
        mala = dataclasses.replace(config.mala, seed=_stream_seed(config.mala.seed, n))
        est = estimate_gn(spec, mala, workers=config.workers)
        return est.value, est.stderr
    raise ConfigError(f"estimators: unknown entry {estimator!r}")


def build_convergence_report(config: RunConfig,
                             estimators: tuple[str, ...]) -> ConvergenceReport:
    rows = []
    fits = []
    first_ginf = None
    for suffix, forces_raw in _forces_variants(config.forces_raw):
        ginf = limit_free_energy(
            _chain_spec(config, config.n_list[-1], forces_raw), quad=config.quad)
        if first_ginf is None:
            first_ginf = ginf
        for est in estimators:
            label = est + suffix
            mine = []
            for n in config.n_list:
                value, stderr = _estimate(est, config, n, forces_raw)
                mine.append(CsvRow(n, label, value, stderr,
                                   abs(value - ginf), ginf))
            rows.extend(mine)
            try:
                fit = fit_slope([(r.N, r.abs_err) for r in mine],
                                [r.stderr for r in mine])
            except ValueError:
                fit = None
            fits.append((label, fit))
    return ConvergenceReport(rows=tuple(rows), ginf=first_ginf, fits=tuple(fits))


def _resolve_out(config: RunConfig) -> str:
    path = config.out or f"{config.selector}.csv"
    if not os.path.isabs(path):
        base = os.environ.get("DEFECTFE_OUT_DIR")
        if base:
            path = os.path.join(base, path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _write_rows(path: str, sidecar: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# {sidecar}\n")
        fh.write("N,estimator,value,stderr,abs_err,ginf\n")
        for r in rows:
            fh.write(f"{r.N},{r.estimator},{r.value:.17g},{r.stderr:.17g},"
                     f"{r.abs_err:.17g},{r.ginf:.17g}\n")


def run(config: RunConfig) -> int:
    """Execute one selector; writes the artifact and a stdout summary."""
    from . import __version__

    out = _resolve_out(config)
    sidecar = (f"defectfe {__version__} selector={config.selector} "
               f"seed={config.seed} digest={_config_digest(config)}")

    if config.selector == "check":
        window = config.window or config.psi.window or (config.A - 8.0, config.A + 8.0)
        rep = check_assumptions(config.psi, config.defect, window)
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"# {sidecar}\n")
            fh.write("kappa1,kappa2,varsigma1,varsigma2,passed,window_lo,window_hi\n")
            fh.write(f"{rep.kappa1:.17g},{rep.kappa2:.17g},{rep.varsigma1:.17g},"
                     f"{rep.varsigma2:.17g},{int(rep.passed)},"
                     f"{rep.window[0]:.17g},{rep.window[1]:.17g}\n")
        verdict = "pass" if rep.passed else "FAIL"
        print(f"assumptions {verdict}: kappa in [{rep.kappa1:.6g}, {rep.kappa2:.6g}], "
              f"defected bond in [{rep.varsigma1:.6g}, {rep.varsigma2:.6g}] "
              f"on [{rep.window[0]:g}, {rep.window[1]:g}]")
        print(f"wrote {out}")
        return 0

    if config.selector == "cb-table":
        lo, hi, n = config.table or (config.A - 2.0, config.A + 2.0, 129)
        try:
            ev = CauchyBornEvaluator(config.psi, config.quad)
        except ValueError as exc:
            raise NumericalError(str(exc)) from exc
        ev.export_table_csv(out, lo, hi, n)
        print(f"wrote {out} ({n} rows)")
        return 0

    if config.selector == "convergence":
        report = build_convergence_report(config, config.estimators)
        for label, fit in report.fits:
            if fit is not None:
                sidecar += (f" slope[{label}]={fit.slope:.8g}"
                            f" resid[{label}]={fit.residual:.4g}"
                            f" excl[{label}]={fit.n_excluded}")
        _write_rows(out, sidecar, report.rows)
        for label, fit in report.fits:
            if fit is None:
                print(f"{label}: slope undefined (fewer than 3 usable points)")
            else:
                print(f"{label}: slope {fit.slope:.4f} (residual {fit.residual:.4g}, "
                      f"excluded {fit.n_excluded})")
        print(f"wrote {out} ({len(report.rows)} rows)")
        return 0

    # single-estimator selectors share the convergence schema
    ginf = limit_free_energy(_chain_spec(config, config.n_list[-1]),
                             quad=config.quad)
    if config.selector == "ginf":
        rows = [CsvRow(0, "ginf", ginf, 0.0, 0.0, ginf)]
    else:
        rows = []
        for n in config.n_list:
            value, stderr = _estimate(config.selector, config, n,
                                      config.forces_raw)
            rows.append(CsvRow(n, config.selector, value, stderr,
                               abs(value - ginf), ginf))
    _write_rows(out, sidecar, rows)
    print(f"wrote {out} ({len(rows)} rows)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="defectfe",
        description="Defect formation free energy of a pinned atomistic chain: "
                    "sampled, coarse-grained, and limiting values with CSV output.")
    parser.add_argument("selector", choices=_SELECTORS,
                        help="which computation to run")
    parser.add_argument("--config", required=True, help="YAML run configuration")
    parser.add_argument("--out", help="output CSV path (overrides the config)")
    parser.add_argument("--seed", type=int, help="master seed (overrides the config)")
    parser.add_argument("--workers", type=int,
                        help="worker processes for replica fan-out")
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config, selector=args.selector, out=args.out,
                             seed=args.seed, workers=args.workers)
        return run(config)
    except ConfigError as exc:
        print(f"defectfe: {exc}", file=sys.stderr)
        return 2
    except DefectFEError as exc:
        print(f"defectfe: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
