"""
Command-line interface.

Exit codes: 0 success, 1 domain or I/O error, 2 usage, parse or compile error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
from pathlib import Path

from sagnacbell import __version__
from sagnacbell.bell import (
    DEFAULT_SETTINGS,
    SWEEP_COLUMNS,
    chsh_S,
    coincidence_constraint,
    omega_bell,
    simulate_postselected,
    sweep,
    write_sweep_csv,
)
from sagnacbell.errors import SagnacBellError
from sagnacbell.fock import state_to_json
from sagnacbell.lang import CompileError, ParseError, compile_source, parse, pretty_print
from sagnacbell.optics import REFERENCE_CONFIG, SagnacConfig, preset_circuit, sagnac_phase
from sagnacbell.plot import sweep_svg
from sagnacbell.sampler import DetectorModel, run_experiment


class UsageError(Exception):
    pass


# -- helpers ----------------------------------------------------------------


def _emit(args, text: str, path: str | None = None):
    target = path if path is not None else args.output
    if target in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(target).write_text(text, encoding="utf-8")


def _write_manifest(args, path: str | None, seed: int | None = None):
    """Sidecar ``<path>.manifest.json``; kept out of the data files so they stay byte-stable."""
    if path in (None, "-"):
        return
    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "command": args.command,
        "parameters": params,
        "argv": sys.argv[1:],
        "tool_version": __version__,
        "seed": seed,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    Path(str(path) + ".manifest.json").write_text(json.dumps(manifest, indent=2) + "\n",
                                                  encoding="utf-8")


def _info(args, msg: str):
    if not args.quiet:
        print(msg, file=sys.stderr)


def _config_from_args(args, need_rotation: bool) -> SagnacConfig:
    if getattr(args, "config", None):
        cfg = SagnacConfig.from_json(json.loads(Path(args.config).read_text()))
        return cfg
    if args.area_m2 is not None and (args.loops is not None or args.radius_m is not None):
        raise UsageError("give either --area-m2 or --loops/--radius-m, not both")
    if args.loops is not None or args.radius_m is not None:
        if args.loops is None or args.radius_m is None:
            raise UsageError("--loops and --radius-m must be given together")
        area = args.loops * math.pi * args.radius_m**2
    else:
        area = args.area_m2 if args.area_m2 is not None else REFERENCE_CONFIG.area_m2
    rot_hz = getattr(args, "rotation_hz", None)
    rot_rad = getattr(args, "rotation_rad_s", None)
    if rot_hz is not None and rot_rad is not None:
        raise UsageError("give at most one of --rotation-hz and --rotation-rad-s")
    if need_rotation and rot_hz is None and rot_rad is None:
        raise UsageError("a rotation rate (--rotation-hz or --rotation-rad-s) is required")
    omega = rot_rad if rot_rad is not None else 2 * math.pi * (rot_hz or 0.0)
    return SagnacConfig(area, args.wavelength_m, omega)


def _resolve_phi(args) -> float:
    has_rot = any(getattr(args, k, None) is not None
                  for k in ("rotation_hz", "rotation_rad_s", "config"))
    if args.phi is not None and has_rot:
        raise UsageError("give either --phi or a rotation configuration, not both")
    if args.phi is not None:
        return args.phi
    if not has_rot:
        raise UsageError("one of --phi or a rotation configuration is required")
    return sagnac_phase(_config_from_args(args, need_rotation=True))


def _load_circuit(args):
    if args.circuit and args.preset:
        raise UsageError("give either --circuit or --preset, not both")
    if args.circuit:
        source = Path(args.circuit).read_text(encoding="utf-8")
        return args.circuit, compile_source(source)[1]
    name = args.preset or "core4"
    return name, preset_circuit(name)


# -- commands ---------------------------------------------------------------


def cmd_simulate(args) -> int:
    name, circuit = _load_circuit(args)
    phi = _resolve_phi(args)
    post = simulate_postselected(circuit, phi)
    result = {
        "circuit": name,
        "phi_rad": phi,
        "output_state": state_to_json(post.output),
        "constraint": coincidence_constraint(circuit),
        "coincidence_probability": post.probability,
        "postselected": post.qubits.to_json() if post.qubits else None,
        "S_signed": chsh_S(post.qubits, DEFAULT_SETTINGS) if post.qubits else None,
        "concurrence": post.qubits.concurrence() if post.qubits else None,
    }
    _emit(args, json.dumps(result, indent=2) + "\n")
    _write_manifest(args, args.output)
    if post.qubits:
        q = post.qubits
        _info(args, f"p_coinc = {post.probability:.6g}  amp_HV = {q.amp_HV.real:+.4f}"
                    f"{q.amp_HV.imag:+.4f}j  amp_VH = {q.amp_VH.real:+.4f}{q.amp_VH.imag:+.4f}j")
    return 0


def cmd_sweep(args) -> int:
    if args.n < 2:
        raise UsageError("--n must be at least 2")
    if not args.f_min < args.f_max:
        raise UsageError("--f-min must be smaller than --f-max")
    cfg = _config_from_args(args, need_rotation=False)
    circuit = None
    if args.circuit or args.preset:
        circuit = _load_circuit(args)[1]
    rows = sweep(cfg, args.f_min, args.f_max, args.n, circuit=circuit)
    fmt = args.format or "csv"
    if fmt == "csv":
        import io
        buf = io.StringIO()
        write_sweep_csv(rows, buf)
        _emit(args, buf.getvalue())
    elif fmt == "json":
        _emit(args, json.dumps([dict(zip(SWEEP_COLUMNS, (r.f_hz, r.omega_rad_s, r.phi_rad,
                                                        r.S_abs, r.S_signed, r.P_coincidence,
                                                        r.violation))) for r in rows],
                               indent=1) + "\n")
    elif fmt == "svg":
        _emit(args, sweep_svg(rows))
    else:
        raise UsageError(f"sweep does not support --format {fmt}")
    _write_manifest(args, args.output)
    if args.svg:
        _emit(args, sweep_svg(rows, title=f"A = {cfg.area_m2:.4g} m², λ = {cfg.wavelength_m:.3g} m"),
              path=args.svg)
        _write_manifest(args, args.svg)
    n_viol = sum(r.violation for r in rows)
    _info(args, f"{len(rows)} rows, {n_viol} with |S| > 2, max |S| = {max(r.S_abs for r in rows):.6f}")
    return 0


def cmd_bell_freq(args) -> int:
    if args.k_max < args.k_min:
        raise UsageError("empty k range")
    cfg = _config_from_args(args, need_rotation=False)
    rows = [(k, *omega_bell(cfg, k)) for k in range(args.k_min, args.k_max + 1)]
    if (args.format or "csv") == "json":
        text = json.dumps([{"k": k, "omega_rad_s": w, "f_hz": f} for k, w, f in rows],
                          indent=1) + "\n"
    else:
        text = "k,omega_rad_s,f_hz\n" + "".join(f"{k},{w!r},{f!r}\n" for k, w, f in rows)
    _emit(args, text)
    _write_manifest(args, args.output)
    return 0


def cmd_sample(args) -> int:
    if args.shots < 1:
        raise UsageError("--shots must be at least 1")
    phi = _resolve_phi(args)
    det = DetectorModel(efficiency=args.efficiency, seed=args.seed, shots=args.shots)
    records, est = run_experiment(phi, DEFAULT_SETTINGS, det, circuit=args.model)
    est_json = dict(est.to_json())
    est_text = json.dumps(est_json, indent=2) + "\n"
    if args.output not in (None, "-"):
        with open(args.output, "w", encoding="utf-8") as fh:
            records.write_ndjson(fh)
        _write_manifest(args, args.output, seed=args.seed)
    est_path = args.estimate
    if est_path is None and args.output not in (None, "-"):
        est_path = str(Path(args.output).with_suffix("")) + ".estimate.json"
    if est_path:
        Path(est_path).write_text(est_text, encoding="utf-8")
    elif args.output in (None, "-"):
        sys.stdout.write(est_text)
    if est.defined:
        msg = f"S_hat = {est.S_hat:.6f} ± {est.stderr:.6f}  (coincidence rate {est.coincidence_rate:.6g})"
        if not args.quiet:
            print(msg)
    else:
        print("warning: no coincidences in some setting pair; estimate undefined",
              file=sys.stderr)
    return 0


def cmd_parse_check(args) -> int:
    source = Path(args.file).read_text(encoding="utf-8")
    ast = parse(source)
    compile_source(source)
    if (args.format or "text") == "json":
        _emit(args, json.dumps(ast.to_json(), indent=1) + "\n")
    else:
        _emit(args, pretty_print(ast))
    return 0


# -- parser -----------------------------------------------------------------


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _ArgParser(add_help=False)
    common.add_argument("--output", "-o", help="output file (default stdout)")
    common.add_argument("--format", choices=("csv", "json", "ndjson", "svg", "text"))
    common.add_argument("--quiet", "-q", action="store_true")

    physics = _ArgParser(add_help=False)
    physics.add_argument("--config", help="SagnacConfig JSON file")
    physics.add_argument("--area-m2", type=float)
    physics.add_argument("--loops", type=int)
    physics.add_argument("--radius-m", type=float)
    physics.add_argument("--wavelength-m", type=float, default=REFERENCE_CONFIG.wavelength_m)

    rotation = _ArgParser(add_help=False)
    rotation.add_argument("--rotation-hz", type=float)
    rotation.add_argument("--rotation-rad-s", type=float)
    rotation.add_argument("--phi", type=float, help="Sagnac phase (rad)")

    circ = _ArgParser(add_help=False)
    circ.add_argument("--preset", choices=("core4", "full12"))
    circ.add_argument("--circuit", help=".icl circuit file")

    parser = _ArgParser(prog="sagnacbell", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_ArgParser)

    p = sub.add_parser("simulate", parents=[common, physics, rotation, circ],
                       help="propagate |H V> through a circuit and post-select")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common, physics, circ],
                       help="|S| and P against rotation frequency")
    p.add_argument("--f-min", type=float, default=0.0)
    p.add_argument("--f-max", type=float, default=2.0)
    p.add_argument("--n", type=int, default=401)
    p.add_argument("--svg", help="also write an SVG plot here")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bell-freq", parents=[common, physics],
                       help="rotation rates giving the singlet")
    p.add_argument("--k-min", type=int, default=0)
    p.add_argument("--k-max", type=int, default=2)
    p.set_defaults(func=cmd_bell_freq)

    p = sub.add_parser("sample", parents=[common, physics, rotation],
                       help="Monte Carlo Bell test")
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--efficiency", type=float, default=1.0)
    p.add_argument("--model", choices=("core4", "full12"), default="full12")
    p.add_argument("--estimate", help="estimate JSON path")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("parse-check", parents=[common], help="parse and compile an .icl file")
    p.add_argument("file")
    p.set_defaults(func=cmd_parse_check)
    return parser


def _diagnostic(path: str | None, exc, source: str | None) -> str:
    where = f"{path}:" if path else ""
    if exc.span is None:
        return f"{where} error: {exc.message}"
    msg = f"{where}{exc.span.line}:{exc.span.column}: error: {exc.message}"
    if source is not None:
        lines = source.splitlines()
        if exc.span.line <= len(lines):
            msg += "\n  " + lines[exc.span.line - 1] + "\n  " + " " * (exc.span.column - 1) \
                + "^" * exc.span.length
    return msg


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (ParseError, CompileError) as exc:
        path = getattr(args, "file", None) or getattr(args, "circuit", None)
        source = Path(path).read_text(encoding="utf-8") if path else None
        print(_diagnostic(path, exc, source), file=sys.stderr)
        return 2
    except SagnacBellError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
