"""Command-line interface.

Commands
--------
validate        check a model file and print its basic invariants
lindblad-check  compare the direct and Lindblad-form generators
evolve          unconditional evolution on a time grid
sme             conditioned stochastic trajectories with recorded currents
correlate       two-time output-current correlations

Exit codes: 0 success, 1 validation failure, 2 numerical-tolerance failure,
3 I/O or parse failure.  Every file-writing run leaves a ``manifest.json``
beside its outputs recording the command, model hash, seed and parameters,
so results can be reproduced bit-for-bit.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__
from .correlation import (
    current_correlation,
    current_correlation_measurement_only,
    steady_state,
)
from .errors import (
    FeedbackSimError,
    ParseError,
)
from .liouvillian import (
    evolve_unconditional,
    full_liouvillian,
    lindblad_form,
    measurement_liouvillian,
)
from .model import (
    Measurement,
    SystemModel,
    measurement_efficiencies,
    noise_covariance,
)
from .modelio import load_model, load_observable, load_state
from .numkit import hermiticity_residual, max_abs
from .sme import SMEConfig, TrajectoryRecord, run_trajectories

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_TOLERANCE = 2
EXIT_IO = 3


def _fmt(x) -> str:
    """Full-precision, locale-independent float formatting."""
    return repr(float(x))


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ParseError(f"cannot parse {what} list {text!r}") from exc


def _pauli(which: str) -> np.ndarray:
    return {
        "sx": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
        "sy": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
        "sz": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
    }[which]


def resolve_observables(names: str, dim: int):
    """Map a comma-separated observable list onto (name, matrix) pairs.

    Registry names: ``sx``, ``sy``, ``sz`` (dimension 2 only) and ``n``
    (number operator diag(0..d-1)).  Any other token is read as the path of
    a TOML observable file.
    """
    out = []
    for token in (t.strip() for t in names.split(",")):
        if not token:
            continue
        if token in ("sx", "sy", "sz"):
            if dim != 2:
                raise ParseError(f"observable {token!r} needs a dimension-2 model, got {dim}")
            out.append((token, _pauli(token)))
        elif token == "n":
            out.append(("n", np.diag(np.arange(dim, dtype=complex))))
        else:
            out.append(load_observable(token, dim))
    return out


def _load_model_with_overrides(args) -> SystemModel:
    model = load_model(args.model)
    hbar = getattr(args, "hbar", None)
    if hbar is not None and hbar != model.hbar:
        # keep the stored measurement matrix; efficiencies are revalidated
        model = SystemModel(
            dim=model.dim,
            hbar=hbar,
            hamiltonian=model.hamiltonian,
            coupling=model.coupling,
            feedback=model.feedback,
            measurement=Measurement(model.measurement.matrix, hbar),
        )
    return model


def _model_sha256(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def write_manifest(outdir, args, outputs) -> str:
    """Write manifest.json beside the outputs; returns its path."""
    skip = {"func", "out"}
    params = {}
    for key, value in sorted(vars(args).items()):
        if key in skip or callable(value):
            continue
        params[key] = value
    manifest = {
        "tool": "mimofb",
        "version": __version__,
        "command": args.command,
        "model_file": str(args.model),
        "model_sha256": _model_sha256(args.model),
        "seed": getattr(args, "seed", None),
        "parameters": params,
        "outputs": sorted(os.path.basename(str(p)) for p in outputs),
    }
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _ensure_outdir(args) -> str:
    outdir = args.out
    os.makedirs(outdir, exist_ok=True)
    return outdir


def _csv_header_lines(args) -> list[str]:
    return [
        f"# mimofb {args.command} v{__version__}",
        f"# model: {args.model} sha256={_model_sha256(args.model)}",
        f"# seed: {getattr(args, 'seed', None)}",
    ]


def _write_csv(path, header_lines, columns, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _initial_state(args, model) -> np.ndarray:
    if getattr(args, "rho0", None):
        return load_state(args.rho0, model.dim)
    # default: first basis state
    rho = np.zeros((model.dim, model.dim), dtype=complex)
    rho[0, 0] = 1.0
    return rho


# ---------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    model = _load_model_with_overrides(args)
    eta = measurement_efficiencies(model.measurement, args.tol)
    z = noise_covariance(model.measurement, args.tol)
    z_eigs = np.linalg.eigvalsh(z) if z.size else np.array([])
    lines = [
        f"model: {args.model}",
        f"dim = {model.dim}, channels L = {model.n_channels}, "
        f"currents R = {model.n_currents}, hbar = {_fmt(model.hbar)}",
        "efficiencies eta = [" + ", ".join(_fmt(x) for x in eta) + "]",
        "noise covariance Z eigenvalues = ["
        + ", ".join(_fmt(x) for x in z_eigs) + "]",
        f"hermiticity residual H1 = {hermiticity_residual(model.hamiltonian):.3e}",
    ]
    if model.n_currents:
        worst = max(hermiticity_residual(f) for f in model.feedback)
        lines.append(f"hermiticity residual feedback (worst) = {worst:.3e}")
    lines.append("validation: OK")
    report = "\n".join(lines)
    print(report)
    if args.out:
        outdir = _ensure_outdir(args)
        report_path = os.path.join(outdir, "validate.txt")
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(report + "\n")
        write_manifest(outdir, args, [report_path])
    return EXIT_OK


def cmd_lindblad_check(args) -> int:
    model = _load_model_with_overrides(args)
    direct = full_liouvillian(model)
    decomposed = lindblad_form(model)
    diff = max_abs(direct.matrix - decomposed.matrix)
    ok = diff <= args.tol
    report = (
        f"max |G_direct - G_lindblad| = {diff:.6e} (tol {args.tol:.1e})\n"
        f"lindblad-check: {'OK' if ok else 'FAILED'}"
    )
    print(report)
    if args.out:
        outdir = _ensure_outdir(args)
        report_path = os.path.join(outdir, "lindblad_check.txt")
        with open(report_path, "w", encoding="utf-8") as fh:
            fh.write(report + "\n")
        write_manifest(outdir, args, [report_path])
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_evolve(args) -> int:
    model = _load_model_with_overrides(args)
    if args.times:
        times = np.array(_parse_floats(args.times, "times"))
    else:
        n = int(round(args.t_final / args.dt))
        times = np.arange(n + 1) * args.dt
    rho0 = _initial_state(args, model)
    states = evolve_unconditional(full_liouvillian(model), rho0, times)

    outdir = _ensure_outdir(args)
    if args.observables:
        named = resolve_observables(args.observables, model.dim)
        columns = ["t"] + [name for name, _ in named]
        rows = []
        for t, rho in zip(times, states):
            vals = [np.trace(op @ rho).real for _, op in named]
            rows.append([_fmt(t)] + [_fmt(v) for v in vals])
    else:
        d = model.dim
        columns = ["t"]
        for i in range(d):
            for j in range(d):
                columns += [f"re_{i}_{j}", f"im_{i}_{j}"]
        rows = []
        for t, rho in zip(times, states):
            row = [_fmt(t)]
            for i in range(d):
                for j in range(d):
                    row += [_fmt(rho[i, j].real), _fmt(rho[i, j].imag)]
            rows.append(row)
    csv_path = os.path.join(outdir, "evolve.csv")
    _write_csv(csv_path, _csv_header_lines(args), columns, rows)
    write_manifest(outdir, args, [csv_path])
    return EXIT_OK


def _traj_rows(rec: TrajectoryRecord, n_r: int):
    """Rows for one trajectory CSV: observables at t_k, currents over [t_k, t_k + dt)."""
    n_save = rec.times.size
    rows = []
    for k in range(n_save):
        row = [_fmt(rec.times[k])]
        if rec.expectations is not None:
            for v in rec.expectations[k]:
                row += [_fmt(v.real), _fmt(v.imag)]
        if k < rec.currents.shape[0]:
            row += [_fmt(y) for y in rec.currents[k]]
        else:
            row += ["nan"] * n_r
        rows.append(row)
    return rows


def cmd_sme(args) -> int:
    model = _load_model_with_overrides(args)
    rho0 = _initial_state(args, model)
    named = resolve_observables(args.observables, model.dim) if args.observables else []
    config = SMEConfig(
        dt=args.dt,
        t_final=args.t_final,
        n_traj=args.n_traj,
        seed=args.seed,
        renormalize=not args.no_renormalize,
        observables=tuple(op for _, op in named),
    )
    records = run_trajectories(model, rho0, config)

    outdir = _ensure_outdir(args)
    n_r = model.n_currents
    obs_cols = []
    for name, _ in named:
        obs_cols += [f"re_{name}", f"im_{name}"]
    columns = ["t"] + obs_cols + [f"y_{r + 1}" for r in range(n_r)]
    outputs = []
    if not args.averaged_only:
        for rec in records:
            path = os.path.join(outdir, f"traj_{rec.stream_id:04d}.csv")
            header = _csv_header_lines(args) + [f"# stream_id: {rec.stream_id}"]
            _write_csv(path, header, columns, _traj_rows(rec, n_r))
            outputs.append(path)

    # ensemble averages on the same grid
    mean_exp = np.mean([rec.expectations for rec in records], axis=0)
    mean_y = np.mean([rec.currents for rec in records], axis=0)
    rows = []
    for k in range(records[0].times.size):
        row = [_fmt(records[0].times[k])]
        for v in mean_exp[k]:
            row += [_fmt(v.real), _fmt(v.imag)]
        if k < mean_y.shape[0]:
            row += [_fmt(y) for y in mean_y[k]]
        else:
            row += ["nan"] * n_r
        rows.append(row)
    avg_path = os.path.join(outdir, "average.csv")
    header = _csv_header_lines(args) + [f"# n_traj: {len(records)}"]
    _write_csv(avg_path, header, columns, rows)
    outputs.append(avg_path)
    write_manifest(outdir, args, outputs)
    return EXIT_OK


def cmd_correlate(args) -> int:
    model = _load_model_with_overrides(args)
    taus = np.array(_parse_floats(args.taus, "taus"))
    generator = (
        full_liouvillian(model) if not args.no_feedback else measurement_liouvillian(model)
    )
    if args.rho == "steady":
        rho = steady_state(generator)
    else:
        rho = load_state(args.rho, model.dim)
    if args.no_feedback:
        result = current_correlation_measurement_only(model, rho, taus)
    else:
        result = current_correlation(model, rho, taus)

    outdir = _ensure_outdir(args)
    n_r = model.n_currents
    columns = ["tau"] + [
        f"C_{r + 1}_{s + 1}" for r in range(n_r) for s in range(n_r)
    ]
    delta_diag = np.diag(result.delta_weight)
    header = _csv_header_lines(args) + [
        "# delta_weight (coefficient of delta(tau), diagonal): ["
        + ", ".join(_fmt(x) for x in delta_diag) + "]",
    ]
    rows = []
    for k, tau in enumerate(result.taus):
        row = [_fmt(tau)]
        row += [_fmt(result.values[k, r, s]) for r in range(n_r) for s in range(n_r)]
        rows.append(row)
    csv_path = os.path.join(outdir, "correlation.csv")
    _write_csv(csv_path, header, columns, rows)
    write_manifest(outdir, args, [csv_path])
    return EXIT_OK


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mimofb",
        description="Simulate multi-channel Markovian feedback mediated by diffusive measurements.",
    )
    parser.add_argument("--version", action="version", version=f"mimofb {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, tol_default=1e-10):
        p.add_argument("--model", required=True, help="model file (TOML)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=0, help="base RNG seed")
        p.add_argument("--tol", type=float, default=tol_default, help="tolerance")
        p.add_argument(
            "--hbar", type=float, default=None,
            help="override the model file's hbar (measurement matrix kept as stored)",
        )

    p = sub.add_parser("validate", help="validate a model file")
    common(p, tol_default=1e-9)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser(
        "lindblad-check",
        help="compare the direct generator against its Lindblad decomposition",
    )
    common(p)
    p.set_defaults(func=cmd_lindblad_check)

    p = sub.add_parser("evolve", help="unconditional evolution")
    common(p)
    p.add_argument("--rho0", default=None, help="initial state file (default: first basis state)")
    p.add_argument("--t-final", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--times", default=None, help="comma-separated time list (overrides the grid)")
    p.add_argument("--observables", default=None,
                   help="comma-separated names (sx, sy, sz, n) or observable files")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("sme", help="conditioned stochastic trajectories")
    common(p)
    p.add_argument("--rho0", default=None, help="initial state file (default: first basis state)")
    p.add_argument("--t-final", type=float, default=1.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--n-traj", type=int, default=1)
    p.add_argument("--observables", default="",
                   help="comma-separated names (sx, sy, sz, n) or observable files")
    p.add_argument("--no-renormalize", action="store_true")
    p.add_argument("--averaged-only", action="store_true",
                   help="skip per-trajectory files, write only the ensemble average")
    p.set_defaults(func=cmd_sme)

    p = sub.add_parser("correlate", help="two-time current correlations")
    common(p)
    p.add_argument("--rho", default="steady",
                   help="'steady' or a state file for the anchor time")
    p.add_argument("--taus", default="0.0,0.1,0.5,1.0", help="comma-separated lags")
    p.add_argument("--no-feedback", action="store_true",
                   help="open-loop correlations (feedback operators ignored)")
    p.set_defaults(func=cmd_correlate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("evolve", "sme", "correlate") and not args.out:
        print("error: --out is required for this command", file=sys.stderr)
        return EXIT_IO
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FeedbackSimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
