"""Command-line driver.

    cubicerg <command> --config run.json [--out PREFIX] [--threads N]

Exit codes: 0 all checks pass, 1 a check failed (or the computation
raised), 2 the configuration is invalid.
"""

from __future__ import annotations

import argparse
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .averaging import (
    CubeSpec,
    FAST_ORDERS,
    continuity_modulus,
    convergence_report,
    cubic_average_fast,
    cubic_average_naive,
    cubic_field,
    dual_series,
    required_length,
    uniform_deviation,
    vertex_sequences,
)
from .config import COMMANDS, DEFAULT_VERIFY_TOL, ConfigError, RunConfig, load_config
from .observables import TrigPolynomial, conditional_expectation, e
from .oracles import rotation_cubic_exact, ww_rotation_exact
from .report import RunReport, coord_header, series_rows, write_csv
from .systems import Doubling, FactorProjection, Rotation, apply_projection, orbit
from .wiener_wintner import PolynomialPhase, weight_sequence, ww_average, ww_limit_field

CHUNK = 256


def _series_header(dim: int) -> list[str]:
    return ["point_id", *coord_header(dim), "N", "re", "im", "delta"]


def _map_points(fn, points, threads: int):
    """Apply ``fn`` to each point; results always come back in point order."""
    if threads <= 1:
        return [fn(p) for p in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, points))


def _chunks(points):
    # fixed chunk size: batched FFT rounding depends on batch shape, not on threads
    return [points[i:i + CHUNK] for i in range(0, len(points), CHUNK)]


def _map_chunks(fn, points, threads: int):
    """Apply a batched ``fn`` to contiguous chunks of points and concatenate."""
    return np.concatenate(_map_points(fn, _chunks(points), threads))


def _metadata(cfg: RunConfig) -> dict:
    seeds = {}
    if isinstance(cfg.system, Doubling):
        seeds["doubling_seed"] = cfg.system.seed
    if cfg.grid is not None and cfg.grid.get("jitter_seed") is not None:
        seeds["jitter_seed"] = cfg.grid["jitter_seed"]
    return {
        "tool": "cubicerg",
        "versions": {"cubicerg": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "command": cfg.command,
        "config": cfg.raw,
        "seeds": seeds,
    }


def _convergence_checks(report: RunReport, cfg: RunConfig, series_list):
    if "convergence" not in cfg.tolerances or len(cfg.schedule) < 3:
        return
    tol = cfg.tolerances["convergence"]
    worst = max(convergence_report(s, tol).deltas[-1] for s in series_list)
    report.check("convergence", worst, tol, worst < tol)


def _run_cubic(cfg: RunConfig, prefix: str, threads: int, report: RunReport):
    series = _map_points(lambda p: dual_series(cfg.system, cfg.cube, p, cfg.schedule), cfg.points, threads)
    path = Path(f"{prefix}-{cfg.command}.csv")
    write_csv(path, _series_header(cfg.system.dim), series_rows(cfg.points, series))
    report.files[cfg.command] = path
    return series


def _run_dual(cfg: RunConfig, prefix: str, threads: int, report: RunReport):
    series = _run_cubic(cfg, prefix, threads, report)
    tol = cfg.tolerances.get("convergence", 1.0)
    rows = []
    for pid, (pt, s) in enumerate(zip(cfg.points, series)):
        if len(s) >= 3:
            rep = convergence_report(s, tol)
            rows.append([pid, *pt, rep.limit_estimate.real, rep.limit_estimate.imag, rep.deltas[-1], rep.converged])
    path = Path(f"{prefix}-dual-convergence.csv")
    write_csv(path, ["point_id", *coord_header(cfg.system.dim), "limit_re", "limit_im", "last_delta", "converged"], rows)
    report.files["dual-convergence"] = path
    _convergence_checks(report, cfg, series)

    if cfg.level is not None:
        proj = FactorProjection(cfg.system, cfg.level)
        fcube = CubeSpec(
            cfg.cube.l,
            {k: conditional_expectation(cfg.system, cfg.level, o) for k, o in cfg.cube.observables.items()},
        )
        fpts = apply_projection(proj, cfg.points)
        fseries = _map_points(lambda p: dual_series(proj.target, fcube, p, cfg.schedule), fpts, threads)
        path = Path(f"{prefix}-dual-factor.csv")
        write_csv(path, _series_header(cfg.system.dim), series_rows(cfg.points, fseries))
        report.files["dual-factor"] = path
        if "factor_agreement" in cfg.tolerances:
            gap = max(abs(a.values[-1] - b.values[-1]) for a, b in zip(series, fseries))
            report.check("factor_agreement", gap, cfg.tolerances["factor_agreement"])


def _lipschitz_check(report: RunReport, cfg: RunConfig, modulus):
    if "lipschitz" not in cfg.tolerances:
        return
    lip = cfg.tolerances["lipschitz"]
    slack = cfg.tolerances.get("slack", 0.0)
    excess = max(w - lip * d for d, w in modulus)
    report.check("lipschitz", excess, slack)


def _write_modulus(prefix: str, name: str, modulus, report: RunReport):
    path = Path(f"{prefix}-{name}.csv")
    write_csv(path, ["delta", "omega"], modulus)
    report.files[name] = path


def _run_ww(cfg: RunConfig, prefix: str, threads: int, report: RunReport):
    fields = _map_points(
        lambda p: ww_limit_field(cfg.system, cfg.f0, cfg.weight, p[None, :], cfg.schedule).series[0],
        cfg.points,
        threads,
    )
    path = Path(f"{prefix}-ww.csv")
    write_csv(path, _series_header(cfg.system.dim), series_rows(cfg.points, fields))
    report.files["ww"] = path
    _convergence_checks(report, cfg, fields)
    if len(cfg.points) >= 2:
        modulus = continuity_modulus(cfg.points, [s.values[-1] for s in fields])
        _write_modulus(prefix, "ww-modulus", modulus, report)
        _lipschitz_check(report, cfg, modulus)


def _require_rotation(cfg: RunConfig):
    if not isinstance(cfg.system, Rotation):
        raise ConfigError("command 'verify' compares against rotation oracles; field 'system.kind' must be 'rotation'")


def _verify_cube(cfg: RunConfig, threads: int):
    l = cfg.cube.l
    alpha = cfg.system.alpha

    def one(p):
        seqs = vertex_sequences(cfg.system, cfg.cube, p, required_length(l, cfg.schedule[-1]))
        rows = []
        for N in cfg.schedule:
            naive = cubic_average_naive(seqs, l, N)
            fast = cubic_average_fast(seqs, l, N) if l in FAST_ORDERS else None
            exact = rotation_cubic_exact(cfg.cube, alpha, p[None, :], N)[0]
            diffs = [abs(naive - exact)] + ([abs(fast - exact), abs(fast - naive)] if fast is not None else [])
            rows.append([N, naive, fast, exact, max(diffs)])
        return rows

    return _map_points(one, cfg.points, threads)


def _verify_ww(cfg: RunConfig, threads: int):
    w = cfg.weight
    if not isinstance(w, PolynomialPhase) or len(w.coeffs) > 2 or not isinstance(cfg.f0, TrigPolynomial):
        raise ConfigError(
            "command 'verify' with 'f0' needs a trigonometric f0 and a weight "
            "'polynomial_phase' of degree <= 1"
        )
    if cfg.system.dim != 1:
        raise ConfigError("command 'verify' with 'f0' needs a 1-dimensional rotation")
    c0 = w.coeffs[0]
    beta = w.coeffs[1] if len(w.coeffs) > 1 else 0.0
    alpha = cfg.system.alpha[0]
    wseq = weight_sequence(w, cfg.schedule[-1])

    def one(p):
        fseq = cfg.f0(orbit(cfg.system, p, cfg.schedule[-1]))
        rows = []
        for N in cfg.schedule:
            val = ww_average(fseq, wseq, N)
            exact = e(c0) * ww_rotation_exact(cfg.f0, alpha, beta, p[0], N)
            rows.append([N, val, None, exact, abs(val - exact)])
        return rows

    return _map_points(one, cfg.points, threads)


def _run_verify(cfg: RunConfig, prefix: str, threads: int, report: RunReport):
    _require_rotation(cfg)
    tol = cfg.tolerances.get("verify", DEFAULT_VERIFY_TOL)
    header = ["point_id", *coord_header(cfg.system.dim), "N", "naive_re", "naive_im", "fast_re", "fast_im",
              "oracle_re", "oracle_im", "max_abs_diff"]
    rows = []
    worst = 0.0
    parts = []
    if cfg.cube is not None:
        parts.append(("cube", _verify_cube(cfg, threads)))
    if cfg.f0 is not None:
        parts.append(("ww", _verify_ww(cfg, threads)))
    for _, per_point in parts:
        for pid, (pt, prow) in enumerate(zip(cfg.points, per_point)):
            for N, val, fast, exact, diff in prow:
                rows.append([
                    pid, *pt, N, val.real, val.imag,
                    "" if fast is None else fast.real, "" if fast is None else fast.imag,
                    exact.real, exact.imag, diff,
                ])
                worst = max(worst, diff)
    path = Path(f"{prefix}-verify.csv")
    write_csv(path, header, rows)
    report.files["verify"] = path
    report.check("verify_max_abs_diff", worst, tol)


def _run_uniform(cfg: RunConfig, prefix: str, threads: int, report: RunReport):
    pairs = [(N, 2 * N) for N in cfg.schedule]
    per_chunk = _map_points(lambda pts: uniform_deviation(cfg.system, cfg.cube, pts, pairs), _chunks(cfg.points), threads)
    devs = np.max(np.asarray(per_chunk), axis=0)
    path = Path(f"{prefix}-uniform.csv")
    write_csv(path, ["N", "N2", "sup_deviation"], [[a, b, d] for (a, b), d in zip(pairs, devs)])
    report.files["uniform"] = path
    if "monotone_slack" in cfg.tolerances and len(devs) >= 2:
        rise = float(np.max(np.diff(devs)))
        report.check("uniform_nonincreasing", rise, cfg.tolerances["monotone_slack"])


def _run_continuity(cfg: RunConfig, prefix: str, threads: int, report: RunReport):
    N = cfg.schedule[-1]
    if cfg.cube is not None:
        values = _map_chunks(lambda pts: cubic_field(cfg.system, cfg.cube, pts, N), cfg.points, threads)
    else:
        values = np.array(_map_points(
            lambda p: ww_limit_field(cfg.system, cfg.f0, cfg.weight, p[None, :], [N]).series[0].values[-1],
            cfg.points, threads,
        ))
    modulus = continuity_modulus(cfg.points, values)
    _write_modulus(prefix, "continuity", modulus, report)
    _lipschitz_check(report, cfg, modulus)


RUNNERS = {
    "cubic": _run_cubic,
    "dual": _run_dual,
    "ww": _run_ww,
    "verify": _run_verify,
    "uniform": _run_uniform,
    "continuity": _run_continuity,
}


def run(cfg: RunConfig, out: str | None = None, threads: int = 1) -> RunReport:
    """Execute a validated configuration, writing CSV files and a summary."""
    prefix = out or cfg.output
    report = RunReport(_metadata(cfg))
    if cfg.command == "cubic":
        series = _run_cubic(cfg, prefix, threads, report)
        _convergence_checks(report, cfg, series)
    else:
        RUNNERS[cfg.command](cfg, prefix, threads, report)
    report.write_summary(prefix)
    return report


def _module_context(exc: BaseException) -> str:
    mod = "cubicerg"
    for frame, _ in traceback.walk_tb(exc.__traceback__):
        name = frame.f_globals.get("__name__", "")
        if name.startswith("cubicerg."):
            mod = name
    return mod


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="cubicerg", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="JSON run configuration")
    parser.add_argument("--out", default=None, help="output path prefix (overrides config 'output')")
    parser.add_argument("--threads", type=int, default=1, help="worker threads for per-point work")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.command)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(cfg, args.out, max(1, args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - reported with module context
        print(f"error in {_module_context(exc)}: {exc}", file=sys.stderr)
        return 1

    for c in report.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value:.6g} (threshold {c.threshold:.6g})")
    for name, path in sorted(report.files.items()):
        print(f"wrote {name}: {path}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
