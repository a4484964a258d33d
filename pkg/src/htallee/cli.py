"""Command-line interface: every analysis writes CSV/JSON files into --out.

Exit codes: 0 success, 2 invalid parameters, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import basins, bifurcation, equilibria, manifolds
from .integrate import IntegrationConfig, IntegrationError, integrate
from .model import DimensionalParams, NondimParams, ParameterError, nondimensionalize

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_PARAMS, EXIT_NUMERIC = 0, 2, 3

NONDIM_KEYS = ("A", "M", "Q", "S")
DIM_KEYS = ("r", "s", "K", "q", "n", "a", "m")
FIND_CHOICES = ("sn", "bt", "hom", "het", "hopf")
CFG_KEYS = {"rtol": "rel_tol", "atol": "abs_tol", "max_time": "max_time", "attractor_radius": "attractor_radius"}

log = logging.getLogger("htallee")


class UsageError(ValueError):
    pass


# --- config plumbing --------------------------------------------------------


def _merged(args: argparse.Namespace) -> dict:
    """Config-file values overlaid by every flag that was given explicitly."""
    merged: dict = {}
    if args.config:
        with open(args.config) as fh:
            merged.update(json.load(fh))
    for key, value in vars(args).items():
        if key in ("config", "command", "func"):
            continue
        if value is not None:
            merged[key] = value
    return merged


def _params(opts: dict, need: Sequence[str] = NONDIM_KEYS) -> NondimParams:
    has_dim = any(k in opts for k in DIM_KEYS)
    has_nd = any(k in opts for k in NONDIM_KEYS)
    if has_dim and has_nd:
        raise UsageError("give either nondimensional (A, M, Q, S) or dimensional (r, s, K, q, n, a, m) parameters, not both")
    if has_dim:
        missing = [k for k in DIM_KEYS if k not in opts]
        if missing:
            raise UsageError(f"missing dimensional parameters: {', '.join(missing)}")
        return nondimensionalize(DimensionalParams(**{k: float(opts[k]) for k in DIM_KEYS}))
    missing = [k for k in need if k not in opts]
    if missing:
        raise UsageError(f"missing parameters: {', '.join(missing)}")
    # placeholders for parameters the command does not use
    values = {k: float(opts.get(k, 1.0 if k in ("Q", "S") else 0.5)) for k in NONDIM_KEYS}
    return NondimParams(**values)


def _integration_config(opts: dict) -> IntegrationConfig:
    kw = {field: float(opts[key]) for key, field in CFG_KEYS.items() if key in opts}
    return IntegrationConfig(**kw)


def _out_dir(opts: dict) -> Path:
    out = Path(opts.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict) -> None:
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _emit(payload: dict) -> None:
    print(json.dumps({"schema_version": SCHEMA_VERSION, **payload}, indent=2, sort_keys=True))


# --- analyze ----------------------------------------------------------------


def summarize(report: equilibria.EquilibriumReport) -> str:
    cs = report.structure
    if cs.has_no_interior:
        return "no interior equilibria; origin globally attracting"
    if cs.is_double:
        return f"double interior equilibrium (E,E): {report.get(equilibria.E_DOUBLE).classification}"
    if report.get(equilibria.P2).classification == equilibria.REPELLER:
        return "P2 repelling; origin attracts the unit box"
    return "origin and P2 both attracting"


def analysis_payload(p: NondimParams) -> dict:
    cs = equilibria.solve_cubic_structure(p)
    report = equilibria.classify_all(p, cs)
    s_star = equilibria.hopf_threshold(p, cs) if not cs.has_no_interior else None
    return {
        "params": p.as_dict(),
        "structure": {"H": cs.H, "delta": cs.delta, "u1": cs.u1, "u2": cs.u2, "E": cs.E},
        "S_star": s_star,
        "f_E": equilibria.f_at_double_root(cs),
        "equilibria": [eq.as_dict() for eq in report.equilibria],
        "summary": summarize(report),
    }


def cmd_analyze(opts: dict) -> int:
    payload = analysis_payload(_params(opts))
    _write_json(_out_dir(opts) / "analyze.json", payload)
    _emit(payload)
    return EXIT_OK


# --- portrait ---------------------------------------------------------------


def _write_polyline(path: Path, pts, header=("u", "v")) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in pts:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def cmd_portrait(opts: dict) -> int:
    p = _params(opts)
    cfg = _integration_config(opts)
    out = _out_dir(opts)
    seeds = [tuple(map(float, s)) for s in opts.get("seed") or []]
    n = int(opts.get("seed_grid") or 0)
    if n:
        grid = (np.arange(n) + 0.5) / n
        seeds += [(float(a), float(b)) for b in grid for a in grid]
    if not seeds:
        raise UsageError("portrait needs --seed U V or --seed-grid N")
    t_max = float(opts.get("t_max", 2000.0))
    files = []
    for k, s0 in enumerate(seeds):
        traj = integrate(p, s0, cfg, t_max=t_max)
        name = f"trajectory_{k:03d}.csv"
        traj.to_csv(out / name)
        files.append({"file": name, "seed": list(s0), "status": traj.status})
    us = np.linspace(0.0, 1.0, 401)
    prey = np.column_stack([us, (us + p.A) * (1.0 - us) * (us - p.M) / p.Q])
    _write_polyline(out / "nullcline_prey.csv", prey)
    _write_polyline(out / "nullcline_predator.csv", np.column_stack([us, us]))
    payload = {"params": p.as_dict(), "trajectories": files, "equilibria": analysis_payload(p)["equilibria"]}
    _write_json(out / "portrait.json", payload)
    _emit({"params": p.as_dict(), "n_trajectories": len(files), "out": str(out)})
    return EXIT_OK


# --- basin ------------------------------------------------------------------


def cmd_basin(opts: dict) -> int:
    p = _params(opts)
    cfg = _integration_config(opts)
    out = _out_dir(opts)
    box = tuple(map(float, opts.get("box", basins.UNIT_BOX)))
    grid = basins.compute_basins(p, box, int(opts.get("resolution", 200)), cfg)
    grid.to_csv(out / "basin.csv")
    grid.save_labels(out / "basin.labels")
    to_p2, to_origin, rest = basins.basin_area_fraction(grid)
    payload = {**grid.header(), "area_fraction": {"ToP2": to_p2, "ToOrigin": to_origin, "other": rest}}
    _write_json(out / "basin.json", payload)
    _emit(payload)
    return EXIT_OK


# --- manifolds --------------------------------------------------------------


def cmd_manifolds(opts: dict) -> int:
    p = _params(opts)
    cfg = _integration_config(opts)
    out = _out_dir(opts)
    cs = equilibria.solve_cubic_structure(p)
    if not cs.has_two_interior:
        raise ParameterError(f"the saddle P1 needs a positive discriminant, got {cs.delta:.3e}")
    eps = float(opts.get("eps", 1e-6))
    branches = {}
    for which in manifolds.BRANCHES:
        br = manifolds.trace_branch(p, which, eps, cfg, cs)
        name = f"{which}.csv"
        br.to_csv(out / name)
        branches[which] = {"file": name, "termination": br.termination, "target": br.target, "end": br.end.tolist()}
    try:
        topo = manifolds.classify_connection(p, cfg, cs, eps=eps)
        case, name = topo.case, topo.name
    except manifolds.AmbiguousConnectionError:
        case, name = None, "ambiguous"
    payload = {"params": p.as_dict(), "branches": branches, "case": case, "case_name": name}
    if p.S > equilibria.hopf_threshold(p, cs) and case is not None:
        sep = manifolds.separatrix(p, cfg, cs)
        sep.to_csv(out / "separatrix.csv")
        payload["separatrix"] = {"file": "separatrix.csv", "kind": sep.kind, "closed": sep.closed}
    _write_json(out / "manifolds.json", payload)
    _emit(payload)
    return EXIT_OK


# --- bifurcate --------------------------------------------------------------


def cmd_bifurcate(opts: dict) -> int:
    find = opts.get("find")
    if find not in FIND_CHOICES:
        raise UsageError(f"--find must be one of {', '.join(FIND_CHOICES)}, got {find!r}")
    need = ("A", "M", "Q") if find in ("hom", "het", "hopf") else ("A", "M")
    p = _params(opts, need)
    A, M = p.A, p.M
    cfg = _integration_config(opts)
    bracket = tuple(map(float, opts["bracket"])) if opts.get("bracket") else None
    tol = float(opts.get("tol", bifurcation.S_BISECTION_TOL))
    if find == "sn":
        result = {"Q_sn": bifurcation.find_saddle_node_Q(A, M)}
    elif find == "bt":
        q, s = bifurcation.find_bt_point(A, M)
        result = {"Q_sn": q, "S_bt": s}
    elif find == "hopf":
        result = {"S_star": equilibria.hopf_threshold(p)}
    elif find in ("hom", "het"):
        fn = bifurcation.find_homoclinic_S if find == "hom" else bifurcation.find_heteroclinic_S
        g = fn(A, M, p.Q, bracket, cfg, tol)
        result = {
            "S": g.S,
            "bracket": list(g.bracket),
            "labels": list(g.labels),
            "matching_distance": g.matching_distance,
            "iterations": g.iterations,
        }
    payload = {"find": find, "A": A, "M": M, "Q": p.Q if "Q" in need else None, "result": result}
    _write_json(_out_dir(opts) / f"bifurcate_{find}.json", payload)
    _emit(payload)
    return EXIT_OK


# --- diagram ----------------------------------------------------------------


def cmd_diagram(opts: dict) -> int:
    p = _params(opts, ("A", "M"))
    cfg = _integration_config(opts)
    out = _out_dir(opts)
    q_range = tuple(map(float, opts.get("q_range", (0.15, 0.25))))
    s_range = tuple(map(float, opts.get("s_range", (0.005, 0.25))))
    res = tuple(int(x) for x in opts.get("grid", (60, 60)))
    global_qs = [float(q) for q in opts.get("global_q") or []]
    diag = bifurcation.region_diagram(p.A, p.M, q_range, s_range, res, cfg, curves=True, global_qs=global_qs)
    diag.to_csv(out / "regions.csv")
    payload = {"A": p.A, "M": p.M, "q_range": list(q_range), "s_range": list(s_range), "resolution": list(res),
               "counts": diag.counts(), "curves": diag.curves}
    _write_json(out / "diagram.json", payload)
    _emit({k: payload[k] for k in ("A", "M", "counts")})
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_params(sp: argparse.ArgumentParser) -> None:
    g = sp.add_argument_group("nondimensional parameters")
    for k in NONDIM_KEYS:
        g.add_argument(f"--{k}", type=float)
    d = sp.add_argument_group("dimensional parameters (mapped to A, M, Q, S)")
    for k in DIM_KEYS:
        d.add_argument(f"--{k}", type=float)
    c = sp.add_argument_group("integration")
    c.add_argument("--rtol", type=float)
    c.add_argument("--atol", type=float)
    c.add_argument("--max-time", dest="max_time", type=float)
    c.add_argument("--attractor-radius", dest="attractor_radius", type=float)
    sp.add_argument("--config", help="JSON file with any of these options; flags win")
    sp.add_argument("--out", help="output directory (default: current)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="htallee", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("analyze", help="equilibria, classification and thresholds")
    _add_params(sp)
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("portrait", help="trajectories and nullclines")
    _add_params(sp)
    sp.add_argument("--seed", nargs=2, type=float, action="append", metavar=("U", "V"))
    sp.add_argument("--seed-grid", dest="seed_grid", type=int)
    sp.add_argument("--t-max", dest="t_max", type=float)
    sp.set_defaults(func=cmd_portrait)

    sp = sub.add_parser("basin", help="basins of attraction on a grid")
    _add_params(sp)
    sp.add_argument("--resolution", type=int)
    sp.add_argument("--box", nargs=4, type=float, metavar=("U0", "U1", "V0", "V1"))
    sp.set_defaults(func=cmd_basin)

    sp = sub.add_parser("manifolds", help="manifold branches of P1 and the connection case")
    _add_params(sp)
    sp.add_argument("--eps", type=float)
    sp.set_defaults(func=cmd_manifolds)

    sp = sub.add_parser("bifurcate", help="locate one bifurcation value")
    _add_params(sp)
    sp.add_argument("--find", choices=FIND_CHOICES, help="required, here or in --config")
    sp.add_argument("--bracket", nargs=2, type=float, metavar=("LO", "HI"))
    sp.add_argument("--tol", type=float)
    sp.set_defaults(func=cmd_bifurcate)

    sp = sub.add_parser("diagram", help="(Q, S) region diagram with bifurcation curves")
    _add_params(sp)
    sp.add_argument("--q-range", dest="q_range", nargs=2, type=float)
    sp.add_argument("--s-range", dest="s_range", nargs=2, type=float)
    sp.add_argument("--grid", nargs=2, type=int, metavar=("NQ", "NS"))
    sp.add_argument("--global-q", dest="global_q", nargs="+", type=float)
    sp.set_defaults(func=cmd_diagram)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        opts = _merged(args)
        opts.pop("verbose", None)
        return args.func(opts)
    except (ParameterError, UsageError, equilibria.NoInteriorEquilibriumError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    except (
        bifurcation.BracketError,
        IntegrationError,
        basins.NoCycleError,
        manifolds.AmbiguousConnectionError,
    ) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS


if __name__ == "__main__":
    sys.exit(main())
