"""Command-line front end: ``treepoisson <command> --model <path> ...``.

Results go to stdout as CSV or ``key=value`` rows; diagnostics go to stderr.
The exit status is 0 iff every requested tolerance is met.
"""
from __future__ import annotations

import argparse
import sys
from typing import Iterable, Optional, Sequence

import numpy as np

from . import __version__
from .fourier import EnergyWindow, TestFunction, plancherel_check
from .green import (PoleError, SpectralParameter, compute_zeta_batch, compute_zeta_field,
                    green_matrix, green_pair, identity_suite, psi)
from .measure import (CylinderMeasure, SpectralBoundary, nu_from_eigenfunction,
                      reconstruct)
from .oracle import dense_resolvent, effective_core_resolvent, finite_truncation
from .poisson import PoissonTable, eigen_check
from .tree import (ModelError, RayAddress, TreeModel, format_address, parse_address,
                   read_model, regular_ball)

EXIT_OK, EXIT_TOLERANCE, EXIT_ERROR = 0, 1, 2


# -- formatting -------------------------------------------------------------------
def _num(x) -> str:
    return format(float(x), ".17g")


def _flatten(row: dict) -> dict:
    out = {}
    for k, v in row.items():
        if isinstance(v, dict):
            for kk, vv in _flatten(v).items():
                out[f"{k}.{kk}"] = vv
        elif isinstance(v, (complex, np.complexfloating)):
            out[f"{k}_re"] = _num(v.real)
            out[f"{k}_im"] = _num(v.imag)
        elif isinstance(v, (bool, np.bool_)):
            out[k] = "true" if v else "false"
        elif isinstance(v, (int, np.integer)):
            out[k] = str(int(v))
        elif isinstance(v, (float, np.floating)):
            out[k] = _num(v)
        else:
            out[k] = str(v)
    return out


def emit(rows: Iterable[dict], fmt: str, out=None) -> None:
    out = sys.stdout if out is None else out
    rows = [_flatten(r) for r in rows]
    if not rows:
        return
    if fmt == "csv":
        keys = list(rows[0])
        out.write(",".join(keys) + "\n")
        for r in rows:
            out.write(",".join(r[k] for k in keys) + "\n")
    else:
        for r in rows:
            out.write(" ".join(f"{k}={v}" for k, v in r.items()) + "\n")


# -- argument parsing --------------------------------------------------------------
def load_model_arg(text: str) -> TreeModel:
    """A JSON model path, or ``regular:<degree>:<radius>[:<potential>]``."""
    if text.startswith("regular:"):
        parts = text.split(":")[1:]
        if len(parts) not in (2, 3):
            raise ModelError(f"bad builtin model {text!r}; use regular:<degree>:<radius>[:<V>]")
        pot = float(parts[2]) if len(parts) == 3 else 0.0
        return regular_ball(int(parts[0]), int(parts[1]), potential=pot)
    return read_model(text)


def parse_vector(text: str) -> dict:
    """``addr=value,addr=value`` with complex values like ``1+2i``."""
    out = {}
    for item in text.split(","):
        addr, _, val = item.partition("=")
        out[parse_address(addr.strip())] = complex((val or "1").strip().replace("i", "j"))
    return out


def parse_band(text: str, model: TreeModel, panels: int, nodes: int) -> EnergyWindow:
    if text == "full":
        return EnergyWindow.full_band(model, panels, nodes)
    a, b = (float(x) for x in text.split(","))
    band = model.tail.band if model.tail is not None else (a, b)
    return EnergyWindow(a, b, 1e-6 * (band[1] - band[0]), panels, nodes)


def _parameter(args) -> SpectralParameter:
    if args.gamma is not None:
        return SpectralParameter.parse(args.gamma)
    if args.E is not None:
        return SpectralParameter(float(args.E), 0.0)
    raise ValueError("give --gamma or --E")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="treepoisson", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp):
        sp.add_argument("--model", required=True, help="model JSON path or regular:<d>:<r>[:<V>]")
        sp.add_argument("--format", choices=("csv", "structured"), default="csv")
        sp.add_argument("--tol", type=float, default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)

    def spectral(sp):
        sp.add_argument("--gamma", help="spectral parameter E+etai; eta=0 means E+i0")
        sp.add_argument("--E", type=float, help="real energy, taken as E+i0")

    sp = sub.add_parser("green", help="G(v,w;gamma)")
    common(sp), spectral(sp)
    sp.add_argument("--v", default="o")
    sp.add_argument("--w", default="o")

    sp = sub.add_parser("density", help="Psi_{E,o}(o) on an energy grid")
    common(sp)
    sp.add_argument("--E", type=float, action="append", help="energy (repeatable)")
    sp.add_argument("--band", default=None, help="a,b or full: uniform grid with --points")
    sp.add_argument("--points", type=int, default=101)
    sp.add_argument("--v", default="o")
    sp.add_argument("--w", default=None)

    sp = sub.add_parser("poisson", help="Poisson kernel on a ball, with eigen residual")
    common(sp), spectral(sp)
    sp.add_argument("--ray", default="0")
    sp.add_argument("--depth", type=int, default=3, help="radius of the ball")

    sp = sub.add_parser("measure", help="nu_E cylinder masses to a depth")
    common(sp)
    sp.add_argument("--E", type=float, required=True)
    sp.add_argument("--depth", type=int, default=2)

    sp = sub.add_parser("reconstruct", help="eigenfunction -> measure -> Poisson integral round trip")
    common(sp), spectral(sp)
    sp.add_argument("--ray", action="append", help="ray prefix (repeatable); random if omitted")
    sp.add_argument("--depth", type=int, default=3, help="radius of the checked ball")

    sp = sub.add_parser("identities", help="residuals of the zeta and Green identities")
    common(sp), spectral(sp)
    sp.add_argument("--samples", type=int, default=50)

    sp = sub.add_parser("plancherel", help="<f, F(H) g>: dense oracle against the boundary integral")
    common(sp)
    sp.add_argument("--F", default="one", help="one | poly:c0,c1,... | indicator:a,b")
    sp.add_argument("--band", default="full")
    sp.add_argument("--panels", type=int, default=64)
    sp.add_argument("--nodes", type=int, default=16)
    sp.add_argument("--f", default="o=1")
    sp.add_argument("--g", default=None, help="defaults to --f")
    sp.add_argument("--depth", type=int, default=None)

    sp = sub.add_parser("oracle", help="green engine against dense linear algebra on all stored pairs")
    common(sp), spectral(sp)
    return p


# -- commands ---------------------------------------------------------------------
def _within(value: float, tol: Optional[float], default: float) -> bool:
    return value < (default if tol is None else tol)


def cmd_green(args, model) -> int:
    par = _parameter(args)
    v, w = parse_address(args.v), parse_address(args.w)
    field = compute_zeta_field(model, par)
    G = green_pair(model, v, w, field)
    emit([{"v": format_address(v), "w": format_address(w), "gamma": str(par), "G": G}], args.format)
    return EXIT_OK


def cmd_density(args, model) -> int:
    if args.E:
        grid = np.array(args.E, dtype=float)
    elif args.band:
        win = parse_band(args.band, model, 1, 1)
        grid = np.linspace(win.lo, win.hi, args.points)
    else:
        raise ValueError("give --E or --band")
    v = parse_address(args.v)
    w = v if args.w is None else parse_address(args.w)
    field = compute_zeta_batch(model, grid)
    vals = psi(model, v, w, field=field)
    emit(({"E": float(E), "psi": float(x)} for E, x in zip(grid, vals)), args.format)
    return EXIT_OK


def cmd_poisson(args, model) -> int:
    par = _parameter(args)
    xi = RayAddress(parse_address(args.ray))
    xi.validate(model)
    field = compute_zeta_field(model, par)
    table = PoissonTable(field)
    region = model.ball(args.depth)
    interior = [v for v in region if xi.terminal_depth(model) is None
                or v != xi.vertex_at(model, xi.terminal_depth(model))]
    res = eigen_check(model, field, xi, interior)
    emit(({"v": format_address(v), "on_ray": xi.contains(model, v), "P": complex(table.ray(xi, v))}
          for v in region), args.format)
    print(f"eigen residual {res:.3e}", file=sys.stderr)
    return EXIT_OK if _within(res, args.tol, 1e-10) else EXIT_TOLERANCE


def cmd_measure(args, model) -> int:
    field = compute_zeta_field(model, SpectralParameter(args.E, 0.0))
    sb = SpectralBoundary(field)
    masses = {s: sb.nu(s) for s in model.ball(args.depth) if s}
    meas = CylinderMeasure(complex(sb.total()), {s: complex(x) for s, x in masses.items()},
                           "spectral", args.depth)
    add = meas.additivity_residual(model)
    neg = min((float(x) for x in masses.values()), default=0.0)
    emit(({"cylinder": format_address(s), "nu": float(masses[s]) if s else float(sb.total())}
          for s in model.ball(args.depth)), args.format)
    print(f"additivity residual {add:.3e}; min mass {neg:.3e}", file=sys.stderr)
    ok = _within(add, args.tol, 1e-10) and neg >= 0.0
    return EXIT_OK if ok else EXIT_TOLERANCE


def cmd_reconstruct(args, model) -> int:
    par = _parameter(args)
    field = compute_zeta_field(model, par)
    table = PoissonTable(field)
    rng = np.random.default_rng(args.seed)
    if args.ray:
        rays = [RayAddress(parse_address(r)) for r in args.ray]
    else:
        leaves = model.shell(args.depth + 1)
        picks = rng.choice(len(leaves), size=min(3, len(leaves)), replace=False)
        rays = [RayAddress(leaves[i]) for i in sorted(picks)]
    for xi in rays:
        xi.validate(model)
    coef = rng.normal(size=len(rays)) + 1j * rng.normal(size=len(rays))

    def f(v):
        return sum(c * table.ray(xi, v) for c, xi in zip(coef, rays))

    meas = nu_from_eigenfunction(model, field, f, args.depth + 1)
    rows, worst = [], 0.0
    for v in model.ball(args.depth):
        r = reconstruct(model, field, meas, v, args.depth + 1)
        err = abs(r - f(v))
        worst = max(worst, err)
        rows.append({"v": format_address(v), "f": complex(f(v)), "reconstructed": complex(r), "err": err})
    add = meas.additivity_residual(model)
    emit(rows, args.format)
    print(f"max error {worst:.3e}; additivity residual {add:.3e}", file=sys.stderr)
    tol = 1e-10 if args.tol is None else args.tol
    return EXIT_OK if worst < tol and add < tol else EXIT_TOLERANCE


def cmd_identities(args, model) -> int:
    par = _parameter(args)
    rep = identity_suite(model, par, samples=args.samples, seed=args.seed)
    tol = 1e-10 if args.tol is None else args.tol
    emit(({"identity": k, "residual": r, "pass": r < tol} for k, r in rep.residuals.items()),
         args.format)
    return EXIT_OK if rep.passed(tol) else EXIT_TOLERANCE


def cmd_plancherel(args, model) -> int:
    F = TestFunction.parse(args.F)
    win = parse_band(args.band, model, args.panels, args.nodes)
    f = parse_vector(args.f)
    g = f if args.g is None else parse_vector(args.g)
    rep = plancherel_check(model, F, f, g, win, depth=args.depth, threads=args.threads)
    emit([rep.as_dict()], args.format)
    return EXIT_OK if _within(rep.abs_err, args.tol, 1e-5) else EXIT_TOLERANCE


def cmd_oracle(args, model) -> int:
    par = _parameter(args)
    field = compute_zeta_field(model, par)
    G = green_matrix(model, field)
    if model.tail is None:
        if par.boundary:
            raise ValueError("a finite model needs eta > 0")
        ref = dense_resolvent(finite_truncation(model), par.gamma)
        method = "dense_lu"
    else:
        ref = effective_core_resolvent(model, par.gamma)
        method = "dense_schur"
    rel = np.abs(G - ref) / np.maximum(np.abs(ref), 1e-300)
    worst = float(rel.max())
    emit([{"gamma": str(par), "method": method, "pairs": int(G.size), "max_rel_err": worst}],
         args.format)
    return EXIT_OK if _within(worst, args.tol, 1e-10) else EXIT_TOLERANCE


COMMANDS = {
    "green": cmd_green,
    "density": cmd_density,
    "poisson": cmd_poisson,
    "measure": cmd_measure,
    "reconstruct": cmd_reconstruct,
    "identities": cmd_identities,
    "plancherel": cmd_plancherel,
    "oracle": cmd_oracle,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        model = load_model_arg(args.model)
        return COMMANDS[args.command](args, model)
    except (ModelError, PoleError, ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
