"""``padic-morphogen`` command line.

Usage::

    padic-morphogen <analyze|spectrum|simulate> --config FILE [--out DIR] [--threads K]

Exit codes:

    0   success (``analyze`` succeeds whatever the verdict)
    2   malformed configuration or invalid parameter
    10  invalid kinetics
    11  steady-state solve failed
    20  numerical spectrum disagrees with the analytic one
    21  dense cap exceeded (only the analytic spectrum is written)
    30  numerical blow-up during simulation (last good snapshot is kept)
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, _io
from .errors import (
    DenseCapExceeded,
    GeometryError,
    KineticsError,
    OperatorError,
    SimulationBlowup,
    SimulationError,
    SteadyStateError,
)
from .padic import GridGeometry
from .simulate import (
    SCHEMES,
    SimulationConfig,
    cluster_analysis,
    distinct_patterns,
    measure_growth_rate,
    pattern_distance,
    project_modes,
    run,
    write_cluster_dot,
    write_clusters_json,
    write_modes_csv,
    write_snapshots_csv,
)
from .turing import (
    KINETICS,
    make_kinetics,
    turing_report,
    write_dispersion_csv,
    write_report_json,
    write_report_text,
)
from .vladimirov import (
    DEFAULT_DENSE_CAP,
    analytic_spectrum,
    assemble,
    verify_spectrum,
    write_matrix_binary,
    write_matrix_csv,
    write_residuals_csv,
    write_spectrum_json,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_KINETICS = 10
EXIT_STEADY = 11
EXIT_SPECTRUM_MISMATCH = 20
EXIT_DENSE_CAP = 21
EXIT_BLOWUP = 30

THREADS_ENV = "PADIC_MORPHOGEN_THREADS"


class ConfigError(Exception):
    """Configuration problem; ``field`` is a dotted path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_real(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def _int(path, x, minimum=None):
    if not _is_int(x):
        raise ConfigError(path, f"expected an integer, got {x!r}")
    if minimum is not None and x < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {x}")
    return x


def _real(path, x, positive=False, nonneg=False):
    if not _is_real(x):
        raise ConfigError(path, f"expected a finite number, got {x!r}")
    if positive and not x > 0:
        raise ConfigError(path, f"must be > 0, got {x}")
    if nonneg and x < 0:
        raise ConfigError(path, f"must be >= 0, got {x}")
    return float(x)


def _bool(path, x):
    if not isinstance(x, bool):
        raise ConfigError(path, f"expected true or false, got {x!r}")
    return x


def _str(path, x):
    if not isinstance(x, str):
        raise ConfigError(path, f"expected a string, got {x!r}")
    return x


SCHEMA = {
    "grid": {"p": True, "M": True, "L": True},
    "operator": {"alpha": True, "paper_literal_matrix": False, "dense_cap": False},
    "kinetics": {"model": True, "params": False, "gamma": False, "d": False,
                 "initial_guess": False},
    "simulation": {"t_end": True, "dt": True, "scheme": False, "epsilon": False, "seed": False,
                   "seeds": False, "snapshot_stride": False, "cluster_threshold": False,
                   "growth_fit": False},
    "output": {"dir": False, "export_matrix": False},
}


def _section(raw: dict, name: str, required: bool) -> dict:
    if name not in raw:
        if required:
            raise ConfigError(name, "missing section")
        return {}
    sec = raw[name]
    if not isinstance(sec, dict):
        raise ConfigError(name, "section must be a JSON object")
    for key in sec:
        if key not in SCHEMA[name]:
            raise ConfigError(f"{name}.{key}", f"unknown key (allowed: {sorted(SCHEMA[name])})")
    for key, req in SCHEMA[name].items():
        if req and key not in sec:
            raise ConfigError(f"{name}.{key}", "missing required field")
    return sec


def load_config(path) -> dict:
    """Read and fully validate a JSON configuration; returns the raw document."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("", f"cannot read config {path}: {exc.strerror}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError("", "top level must be a JSON object")
    for key in raw:
        if key not in SCHEMA:
            raise ConfigError(key, f"unknown section (allowed: {sorted(SCHEMA)})")
    return raw


def parse_grid(raw) -> GridGeometry:
    sec = _section(raw, "grid", True)
    p = _int("grid.p", sec["p"])
    M = _int("grid.M", sec["M"])
    L = _int("grid.L", sec["L"])
    try:
        return GridGeometry(p, M, L)
    except GeometryError as exc:
        field = "grid.p" if "prime" in str(exc) else "grid.L"
        raise ConfigError(field, str(exc)) from None


def parse_operator(raw) -> dict:
    sec = _section(raw, "operator", True)
    return {
        "alpha": _real("operator.alpha", sec["alpha"], positive=True),
        "paper_literal": _bool("operator.paper_literal_matrix",
                               sec.get("paper_literal_matrix", False)),
        "dense_cap": _int("operator.dense_cap", sec.get("dense_cap", DEFAULT_DENSE_CAP), 1),
    }


def parse_kinetics(raw) -> dict:
    sec = _section(raw, "kinetics", True)
    model = _str("kinetics.model", sec["model"])
    params = sec.get("params", {})
    if not isinstance(params, dict):
        raise ConfigError("kinetics.params", "must be a JSON object")
    for key, val in params.items():
        _real(f"kinetics.params.{key}", val)
    guess = sec.get("initial_guess", [1.0, 1.0])
    if not (isinstance(guess, list) and len(guess) == 2):
        raise ConfigError("kinetics.initial_guess", "must be a list of two numbers")
    guess = tuple(_real(f"kinetics.initial_guess[{i}]", g) for i, g in enumerate(guess))
    return {
        "model": model,
        "params": {k: float(v) for k, v in params.items()},
        "gamma": _real("kinetics.gamma", sec.get("gamma", 1.0), positive=True),
        "d": _real("kinetics.d", sec.get("d", 1.0), positive=True),
        "initial_guess": guess,
    }


def parse_simulation(raw) -> dict:
    sec = _section(raw, "simulation", True)
    if "seed" in sec and "seeds" in sec:
        raise ConfigError("simulation.seeds", "give either seed or seeds, not both")
    if "seeds" in sec:
        seeds = sec["seeds"]
        if not (isinstance(seeds, list) and seeds):
            raise ConfigError("simulation.seeds", "must be a non-empty list of integers")
        seeds = [_int(f"simulation.seeds[{i}]", s, 0) for i, s in enumerate(seeds)]
    else:
        seeds = [_int("simulation.seed", sec.get("seed", 0), 0)]
    for s in seeds:
        if s >= 2**64:
            raise ConfigError("simulation.seed", "must fit in 64 bits")
    scheme = _str("simulation.scheme", sec.get("scheme", "imex_euler"))
    if scheme not in SCHEMES:
        raise ConfigError("simulation.scheme", f"must be one of {list(SCHEMES)}")
    eps = _real("simulation.epsilon", sec.get("epsilon", 0.01), nonneg=True)
    if eps >= 1:
        raise ConfigError("simulation.epsilon", "must be < 1")
    threshold = sec.get("cluster_threshold")
    if threshold is not None:
        threshold = _real("simulation.cluster_threshold", threshold, nonneg=True)
    return {
        "t_end": _real("simulation.t_end", sec["t_end"], nonneg=True),
        "dt": _real("simulation.dt", sec["dt"], positive=True),
        "scheme": scheme,
        "epsilon": eps,
        "seeds": seeds,
        "snapshot_stride": _int("simulation.snapshot_stride", sec.get("snapshot_stride", 1), 1),
        "cluster_threshold": threshold,
        "growth_fit": _bool("simulation.growth_fit", sec.get("growth_fit", True)),
    }


def parse_output(raw) -> dict:
    sec = _section(raw, "output", False)
    return {
        "dir": _str("output.dir", sec.get("dir", "out")),
        "export_matrix": _bool("output.export_matrix", sec.get("export_matrix", False)),
    }


def git_blob_sha1(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


class Context:
    def __init__(self, command: str, config_path: Path, raw: dict, out_dir: Path, threads: int):
        self.command = command
        self.config_path = config_path
        self.raw = raw
        self.out_dir = out_dir
        self.threads = threads
        self.files: list[str] = []
        self.timings: dict[str, float] = {}
        self.summary: dict = {}

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.out_dir / name

    def timed(self, phase: str):
        ctx = self

        class _Timer:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                ctx.timings[phase] = ctx.timings.get(phase, 0.0) + time.perf_counter() - self.start

        return _Timer()

    def write_manifest(self, exit_code: int):
        files = {name: _sha256(self.out_dir / name) for name in sorted(set(self.files))}
        manifest = {
            "tool": "padic-morphogen",
            "version": __version__,
            "command": self.command,
            "exit_code": exit_code,
            "config_path": str(self.config_path),
            "config_sha1": git_blob_sha1(self.config_path.read_bytes()),
            "config": self.raw,
            "files": files,
            "summary": self.summary,
            # invocation details; everything above is reproducible byte for byte
            "runtime": {"output_dir": str(self.out_dir), "threads": self.threads,
                        "timings": self.timings},
        }
        _io.write_json(self.out_dir / "manifest.json", manifest)


def _model_from(kin: dict):
    if kin["model"] not in KINETICS:
        raise KineticsError(f"unknown kinetics model {kin['model']!r}; available: {sorted(KINETICS)}")
    return make_kinetics(kin["model"], kin["params"], kin["gamma"], kin["d"])


def cmd_analyze(ctx: Context) -> int:
    geometry = parse_grid(ctx.raw)
    op_cfg = parse_operator(ctx.raw)
    kin = parse_kinetics(ctx.raw)
    with ctx.timed("analysis"):
        model = _model_from(kin)
        report = turing_report(model, geometry, op_cfg["alpha"], kin["initial_guess"])
    with ctx.timed("write"):
        write_report_json(report, ctx.path("turing_report.json"))
        write_report_text(report, ctx.path("turing_report.txt"))
        write_dispersion_csv(report, ctx.path("dispersion.csv"))
    ctx.summary = {"verdict": report.verdict,
                   "unstable_scales": [s.r for s in report.unstable_scales],
                   "d_c": report.d_c}
    print(f"verdict: {report.verdict}; unstable scales: {ctx.summary['unstable_scales']}")
    return EXIT_OK


def cmd_spectrum(ctx: Context) -> int:
    geometry = parse_grid(ctx.raw)
    op_cfg = parse_operator(ctx.raw)
    out_cfg = parse_output(ctx.raw)
    with ctx.timed("assemble"):
        op = assemble(geometry, op_cfg["alpha"], op_cfg["paper_literal"], op_cfg["dense_cap"])
    code = EXIT_OK
    try:
        with ctx.timed("verify"):
            report = verify_spectrum(op, raise_on_mismatch=False)
    except DenseCapExceeded as exc:
        report = analytic_spectrum(geometry, op_cfg["alpha"])
        write_spectrum_json(report, ctx.path("spectrum.json"))
        ctx.summary = {"matched": None, "analytic_only": True}
        print(f"error: {exc}; wrote the analytic spectrum only", file=sys.stderr)
        return EXIT_DENSE_CAP
    with ctx.timed("write"):
        write_spectrum_json(report, ctx.path("spectrum.json"))
        write_residuals_csv(report, ctx.path("residuals.csv"))
        if out_cfg["export_matrix"]:
            write_matrix_csv(op, ctx.path("matrix.csv"))
            write_matrix_binary(op, ctx.path("matrix.bin"))
    ctx.summary = {"matched": report.matched,
                   "max_relative_deviation": report.max_relative_deviation,
                   "max_residual": report.max_residual,
                   "paper_literal_matrix": op.paper_literal}
    if not report.matched:
        print(f"spectrum mismatch: {len(report.offending)} eigenvalues differ "
              f"(max relative deviation {report.max_relative_deviation:.3e})", file=sys.stderr)
        for pos, num, ana in report.offending[:20]:
            print(f"  #{pos}: numerical {num:.12g} vs analytic {ana:.12g}", file=sys.stderr)
        code = EXIT_SPECTRUM_MISMATCH
    else:
        print(f"spectrum matches (max relative deviation {report.max_relative_deviation:.3e})")
    return code


def _seed_outputs(ctx: Context, geometry, result_or_blowup, seed: int, reference, threshold):
    """Write snapshot, mode, cluster and tree files for one seed."""
    trajectory, final = result_or_blowup
    tag = f"seed{seed}"
    write_snapshots_csv(trajectory, geometry, ctx.path(f"snapshots_{tag}.csv"))
    u0, v0 = reference
    modes = project_modes(final.u - u0, geometry)
    write_modes_csv(modes, ctx.path(f"modes_{tag}.csv"))
    clusters = cluster_analysis(final.u, geometry, u0, final.v, threshold)
    write_clusters_json(clusters, ctx.path(f"clusters_{tag}.json"))
    write_cluster_dot(clusters, geometry, ctx.path(f"tree_{tag}.dot"))
    return clusters


def cmd_simulate(ctx: Context) -> int:
    geometry = parse_grid(ctx.raw)
    op_cfg = parse_operator(ctx.raw)
    kin = parse_kinetics(ctx.raw)
    sim = parse_simulation(ctx.raw)
    model = _model_from(kin)
    try:
        base = SimulationConfig(geometry, op_cfg["alpha"], model, sim["t_end"], sim["dt"],
                                sim["scheme"], sim["epsilon"], sim["seeds"][0],
                                sim["snapshot_stride"], op_cfg["paper_literal"],
                                initial_guess=kin["initial_guess"])
    except SimulationError as exc:
        raise ConfigError("simulation", str(exc)) from None
    with ctx.timed("assemble"):
        op = assemble(geometry, op_cfg["alpha"], op_cfg["paper_literal"], op_cfg["dense_cap"])

    def one(seed):
        try:
            return seed, run(base.with_(seed=seed), op), None
        except SimulationBlowup as exc:
            return seed, None, exc

    with ctx.timed("integrate"):
        if ctx.threads > 1 and len(sim["seeds"]) > 1:
            with ThreadPoolExecutor(max_workers=ctx.threads) as pool:
                outcomes = list(pool.map(one, sim["seeds"]))
        else:
            outcomes = [one(s) for s in sim["seeds"]]

    code = EXIT_OK
    finals, ok_seeds, per_seed = [], [], []
    reference = None
    with ctx.timed("write"):
        for seed, result, blowup in outcomes:
            if blowup is not None:
                trajectory = list(blowup.trajectory)
                if not trajectory or trajectory[-1] is not blowup.last_state:
                    trajectory.append(blowup.last_state)
                write_snapshots_csv(trajectory, geometry, ctx.path(f"snapshots_seed{seed}.csv"))
                per_seed.append({"seed": seed, "blowup_step": blowup.step, "message": str(blowup)})
                print(f"seed {seed}: {blowup}", file=sys.stderr)
                code = EXIT_BLOWUP
                continue
            reference = result.reference
            clusters = _seed_outputs(ctx, geometry, (result.trajectory, result.final), seed,
                                     result.reference, sim["cluster_threshold"])
            dev = result.final.u - result.reference[0]
            finals.append(dev)
            ok_seeds.append(seed)
            per_seed.append({"seed": seed, "t_final": result.final.t,
                             "std_u": float(np.std(result.final.u)),
                             "clusters": len(clusters.clusters), "cluster_counts": clusters.counts})
    summary = {"seeds": per_seed}
    if finals:
        reps = distinct_patterns(finals)
        dist = [[pattern_distance(a, b) for b in finals] for a in finals]
        summary["multistability"] = {
            "distinct_patterns": len(reps),
            "representative_seeds": [ok_seeds[i] for i in reps],
            "max_pairwise_distance": max(max(row) for row in dist),
            "threshold": 1e-2,
        }
    if sim["growth_fit"] and code == EXIT_OK and reference is not None:
        with ctx.timed("growth_fit"):
            try:
                fit = measure_growth_rate(base, op)
                summary["growth_rate"] = fit.to_dict()
            except SimulationError as exc:
                summary["growth_rate"] = {"skipped": str(exc)}
            except SimulationBlowup as exc:
                summary["growth_rate"] = {"skipped": f"blow-up during fit: {exc}"}
    ctx.summary = summary
    if code == EXIT_OK:
        n_distinct = summary.get("multistability", {}).get("distinct_patterns")
        print(f"simulated {len(sim['seeds'])} seed(s); distinct final patterns: {n_distinct}")
    return code


COMMANDS = {"analyze": cmd_analyze, "spectrum": cmd_spectrum, "simulate": cmd_simulate}


def _threads(arg) -> int:
    if arg is not None:
        return arg
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            val = int(env)
        except ValueError:
            raise ConfigError(THREADS_ENV, f"expected an integer, got {env!r}") from None
        if val < 1:
            raise ConfigError(THREADS_ENV, "must be >= 1")
        return val
    return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="padic-morphogen",
                                     description="p-adic reaction-diffusion Turing systems")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="JSON configuration file")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--threads", type=int, help=f"worker threads (fallback: ${THREADS_ENV})")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    config_path = Path(args.config)
    try:
        threads = _threads(args.threads)
        raw = load_config(config_path)
        out_dir = Path(args.out) if args.out else Path(parse_output(raw)["dir"])
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ctx = Context(args.command, config_path, raw, out_dir, threads)
    out_dir.mkdir(parents=True, exist_ok=True)
    with threadpool_limits(limits=1):
        try:
            code = COMMANDS[args.command](ctx)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except (OperatorError, GeometryError) as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except SteadyStateError as exc:
            print(f"steady state error: {exc}", file=sys.stderr)
            return EXIT_STEADY
        except KineticsError as exc:
            print(f"kinetics error: {exc}", file=sys.stderr)
            return EXIT_KINETICS
    ctx.write_manifest(code)
    return code


if __name__ == "__main__":
    sys.exit(main())
