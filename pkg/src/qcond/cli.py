"""Command-line frontend: model files in, tables, curves, and reports out.

Subcommands
    thermo  CSV table of restricted thermodynamics over a beta grid
    phase   CSV critical curve over a coupling sweep
    mc      JSON trajectory-sampling estimate of a diagonal element
    graph   JSON partition boundary statistics (exact degree identity)
    t0      JSON zero-temperature crossing of the block ground energies
    verify  JSON report of the exact inequality suite at given betas

Every run writes one artifact plus ``<artifact>.manifest.json`` echoing
the fully resolved configuration.  Timestamps appear only in the
manifest, so reruns with the same configuration and seed are
byte-identical in the artifact, independent of worker count.  Relative
output paths resolve under $QCOND_OUTDIR (default: current directory).
Failures print one JSON object to stderr and exit nonzero.
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import io
import json
import math
import os
import sys

from . import __version__, eprmc, exactthermo, phasediagram
from .configspace import Partition, partition_from_threshold, partition_stats
from .errors import QCondError
from .models import GroverSpec, load_model_file

DEFAULT_NAMES = {
    "thermo": "thermo.csv",
    "phase": "phase.csv",
    "mc": "mc.json",
    "graph": "graph.json",
    "t0": "t0.json",
    "verify": "verify.json",
}

OUTDIR_ENV = "QCOND_OUTDIR"


def parse_grid(text: str) -> list:
    """Grid spec: ``lo:hi:step`` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid must be lo:hi:step, got {text!r}")
        lo, hi, step = (float(p) for p in parts)
        if step <= 0:
            raise ValueError("grid step must be positive")
        if hi < lo:
            raise ValueError("grid upper edge is below the lower edge")
        count = int(math.floor((hi - lo) / step + 1e-9)) + 1
        values = [lo + i * step for i in range(count)]
        if abs(values[-1] - hi) <= 1e-9 * max(1.0, abs(hi)):
            values[-1] = hi
        return values
    return [float(x) for x in text.split(",")]


def parse_bracket(text: str) -> tuple:
    parts = text.split(":")
    if len(parts) != 2:
        raise ValueError(f"bracket must be lo:hi, got {text!r}")
    return (float(parts[0]), float(parts[1]))


def _add_model_flags(sub):
    sub.add_argument("--model", required=True,
                     help="model definition file (key = value lines)")
    sub.add_argument("--N", type=int, default=None, dest="n_override",
                     help="override the model file's system size")
    sub.add_argument("--out", default=None,
                     help="output path (default: per-command name under "
                          f"${OUTDIR_ENV})")


def _add_partition_flags(sub):
    group = sub.add_mutually_exclusive_group()
    group.add_argument("--threshold", type=float, default=None,
                       help="condensed side = configurations with V <= this")
    group.add_argument("--partition-file", default=None,
                       help="JSON file with the condensed member list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qcond",
        description="finite-temperature condensation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_thermo = sub.add_parser("thermo", help="restricted thermodynamics table")
    _add_model_flags(p_thermo)
    _add_partition_flags(p_thermo)
    p_thermo.add_argument("--beta", required=True,
                          help="beta grid, lo:hi:step or comma list")
    p_thermo.add_argument("--k-B", type=float, default=1.0, dest="k_B")

    p_phase = sub.add_parser("phase", help="critical curve over a sweep")
    _add_model_flags(p_phase)
    p_phase.add_argument("--sweep", nargs=2, required=True,
                         metavar=("AXIS", "GRID"),
                         help="swept axis (gamma) and its grid")
    route = p_phase.add_mutually_exclusive_group()
    route.add_argument("--closed-form", action="store_true",
                       help="closed-form free energies (default)")
    route.add_argument("--spectral", action="store_true",
                       help="dense finite-size block spectra")
    p_phase.add_argument("--k-B", type=float, default=1.0, dest="k_B")
    p_phase.add_argument("--tol", type=float, default=phasediagram.DEFAULT_TOL)

    p_mc = sub.add_parser("mc", help="trajectory-sampling diagonal estimate")
    _add_model_flags(p_mc)
    _add_partition_flags(p_mc)
    p_mc.add_argument("--start", type=lambda s: int(s, 0), default=0,
                      help="starting configuration bits (default 0)")
    p_mc.add_argument("--t", type=float, required=True,
                      help="imaginary-time horizon")
    p_mc.add_argument("--samples", type=int, required=True)
    p_mc.add_argument("--seed", type=int, required=True)
    p_mc.add_argument("--workers", type=int, default=1)
    p_mc.add_argument("--constraint", default=None,
                      choices=sorted(eprmc.CONSTRAINTS),
                      help="restrict to trajectories with this transit count")

    p_graph = sub.add_parser("graph", help="partition boundary statistics")
    _add_model_flags(p_graph)
    _add_partition_flags(p_graph)

    p_t0 = sub.add_parser("t0", help="zero-temperature crossing")
    _add_model_flags(p_t0)
    p_t0.add_argument("--bracket", default=None,
                      help="gamma bracket lo:hi (default j/8 : 8j)")
    p_t0.add_argument("--tol", type=float, default=phasediagram.DEFAULT_TOL)

    p_verify = sub.add_parser("verify", help="exact inequality suite")
    _add_model_flags(p_verify)
    _add_partition_flags(p_verify)
    p_verify.add_argument("--beta", required=True,
                          help="beta grid, lo:hi:step or comma list")
    p_verify.add_argument("--t", type=float, default=1.0,
                          help="horizon for the crossing-probability check")
    p_verify.add_argument("--samples", type=int, default=20_000)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--workers", type=int, default=1)
    p_verify.add_argument("--rtol", type=float, default=1e-8)
    return parser


def _resolve_out(args) -> str:
    name = args.out if args.out else DEFAULT_NAMES[args.command]
    if os.path.isabs(name):
        return name
    return os.path.join(os.environ.get(OUTDIR_ENV, "."), name)


def _resolve_partition(args, wrapper) -> tuple:
    """(Partition, manifest entry) from flags, else the model default."""
    threshold = getattr(args, "threshold", None)
    part_file = getattr(args, "partition_file", None)
    if part_file is not None:
        with open(part_file, "r", encoding="utf-8") as fh:
            p = Partition.from_json(fh.read())
        if p.n_qubits != wrapper.n_qubits:
            raise ValueError("partition file size disagrees with the model")
        return p, {"source": "file", "path": part_file, "dim_cond": p.dim_cond}
    if threshold is not None:
        p = partition_from_threshold(wrapper.model(), threshold)
        return p, {"source": "threshold", "max_v_cond": threshold,
                   "dim_cond": p.dim_cond}
    p = wrapper.partition()
    return p, {"source": "model_default", "dim_cond": p.dim_cond}


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write_artifacts(args, text: str, config: dict) -> str:
    path = _resolve_out(args)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    manifest = {
        "command": args.command,
        "config": config,
        "created": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "version": __version__,
    }
    with open(path + ".manifest.json", "w", encoding="utf-8") as fh:
        fh.write(_json_text(manifest))
    print(f"wrote {path}")
    print(f"wrote {path}.manifest.json")
    return path


def cmd_thermo(args) -> int:
    wrapper = load_model_file(args.model, n_override=args.n_override)
    p, part_cfg = _resolve_partition(args, wrapper)
    betas = parse_grid(args.beta)
    rows = exactthermo.thermo_scan(wrapper.model(), p, betas, k_B=args.k_B)
    buf = io.StringIO()
    exactthermo.write_thermo_csv(buf, rows)
    config = {"model": wrapper.describe(), "partition": part_cfg,
              "beta_grid": betas, "k_B": args.k_B, "units": "energy in J"}
    _write_artifacts(args, buf.getvalue(), config)
    return 0


def cmd_phase(args) -> int:
    wrapper = load_model_file(args.model, n_override=args.n_override)
    if not isinstance(wrapper, GroverSpec):
        raise ValueError("phase curves are implemented for the grover model")
    axis, grid_text = args.sweep
    if axis != "gamma":
        raise ValueError(f"swept axis must be gamma, got {axis!r}")
    sweep = parse_grid(grid_text)
    if args.spectral:
        family = phasediagram.GroverSpectralFamily(wrapper.n_qubits, k_B=args.k_B)
    else:
        family = phasediagram.GroverClosedFormFamily(k_B=args.k_B)
    curve = phasediagram.critical_curve(family, wrapper.j, sweep, tol=args.tol)
    buf = io.StringIO()
    phasediagram.write_curve_csv(buf, curve)
    config = {"model": wrapper.describe(), "axis": axis, "sweep": sweep,
              "method": family.method, "k_B": args.k_B, "tol": args.tol,
              "units": "energy in J"}
    _write_artifacts(args, buf.getvalue(), config)
    return 0


def cmd_mc(args) -> int:
    wrapper = load_model_file(args.model, n_override=args.n_override)
    spec = wrapper.model()
    if not 0 <= args.start < spec.dim:
        raise ValueError(f"start must be in [0, {spec.dim}), got {args.start}")
    if args.constraint is None:
        part_cfg = None
        result = eprmc.estimate_diagonal(spec, args.start, args.t,
                                         args.samples, seed=args.seed,
                                         workers=args.workers)
    else:
        p, part_cfg = _resolve_partition(args, wrapper)
        result = eprmc.estimate_constrained(spec, p, args.start, args.t,
                                            args.constraint, args.samples,
                                            seed=args.seed,
                                            workers=args.workers)
    report = result.to_dict()
    report["t"] = args.t
    report["model"] = wrapper.describe()
    report["constraint"] = args.constraint
    config = {"model": wrapper.describe(), "start": args.start, "t": args.t,
              "n_samples": args.samples, "seed": args.seed,
              "workers": args.workers, "constraint": args.constraint,
              "partition": part_cfg, "backend": eprmc.kernel_backend()}
    _write_artifacts(args, _json_text(report), config)
    return 0


def cmd_graph(args) -> int:
    wrapper = load_model_file(args.model, n_override=args.n_override)
    p, part_cfg = _resolve_partition(args, wrapper)
    stats = partition_stats(wrapper.model(), p)
    report = {"model": wrapper.describe(), "partition": part_cfg,
              "stats": stats.to_dict()}
    config = {"model": wrapper.describe(), "partition": part_cfg}
    _write_artifacts(args, _json_text(report), config)
    return 0


def cmd_t0(args) -> int:
    wrapper = load_model_file(args.model, n_override=args.n_override)
    bracket = (parse_bracket(args.bracket) if args.bracket
               else (wrapper.j / 8.0, 8.0 * wrapper.j))
    if isinstance(wrapper, GroverSpec):
        pair = phasediagram.grover_t0_energy_pair(wrapper.n_qubits, wrapper.j)
    else:
        def spec_at(gamma):
            w = dataclasses.replace(wrapper, gamma=gamma)
            return w.model(), w.partition()

        pair = phasediagram.spec_t0_energy_pair(spec_at)
    cp = phasediagram.t0_crossing(pair, bracket, tol=args.tol)
    report = {"model": wrapper.describe(), "gamma_c": cp.value,
              "residual": cp.residual, "iterations": cp.iterations,
              "degenerate": cp.degenerate}
    config = {"model": wrapper.describe(), "bracket": list(bracket),
              "tol": args.tol}
    _write_artifacts(args, _json_text(report), config)
    return 0


def cmd_verify(args) -> int:
    wrapper = load_model_file(args.model, n_override=args.n_override)
    spec = wrapper.model()
    p, part_cfg = _resolve_partition(args, wrapper)
    betas = parse_grid(args.beta)
    matrix = []
    bounds = []
    for beta in betas:
        matrix.append(exactthermo.matrix_inequality_report(
            spec, p, beta, rtol=args.rtol).to_dict())
        bounds.append(exactthermo.free_energy_bounds_report(
            spec, p, beta, rtol=args.rtol).to_dict())
    crossing = []
    for side in ("norm", "cond"):
        crossing.append(eprmc.crossing_probability_report(
            spec, p, side, args.t, args.samples, seed=args.seed,
            workers=args.workers).to_dict())
    report = {"model": wrapper.describe(), "betas": betas,
              "matrix_ratio": matrix, "free_energy_bounds": bounds,
              "crossing_bounds": crossing, "all_pass": True}
    config = {"model": wrapper.describe(), "partition": part_cfg,
              "betas": betas, "t": args.t, "n_samples": args.samples,
              "seed": args.seed, "workers": args.workers, "rtol": args.rtol,
              "backend": eprmc.kernel_backend()}
    _write_artifacts(args, _json_text(report), config)
    return 0


COMMANDS = {
    "thermo": cmd_thermo,
    "phase": cmd_phase,
    "mc": cmd_mc,
    "graph": cmd_graph,
    "t0": cmd_t0,
    "verify": cmd_verify,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except QCondError as err:
        payload = {"error": {"code": err.code, "module": err.module,
                             "message": str(err)}}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as err:
        payload = {"error": {"code": "config", "module": "cli",
                             "message": str(err)}}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
