"""Command-line front end.

Exit codes: 0 success (or experiment pass), 2 experiment failure, 1 usage,
input or numerical error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io, svg
from .errors import KFLError

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _emit(obj, args, csv_rows=None) -> None:
    fmt = getattr(args, "format", None) or "json"
    out = getattr(args, "out", None)
    if fmt == "csv" and csv_rows is not None:
        if out:
            io.write_csv(csv_rows, out)
        else:
            import csv

            cols = list(dict.fromkeys(k for r in csv_rows for k in r))
            w = csv.writer(sys.stdout)
            w.writerow(cols)
            for r in csv_rows:
                w.writerow([io._cell(r.get(c)) for c in cols])
        return
    text = io.dumps(obj)
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _polytope(spec: str):
    from .polytope import NAMED, named, polytope_from_json

    if spec in NAMED:
        return named(spec)
    p = Path(spec)
    if not p.exists():
        raise FileNotFoundError(f"{spec!r} is neither a named model ({', '.join(NAMED)}) nor a file")
    obj = json.loads(p.read_text())
    return polytope_from_json(obj.get("polytope", obj))


def _floats(text: str | None):
    if text is None:
        return None
    return np.array([float(v) for v in text.split(",")], dtype=float)


def _manifest(path):
    """JSON list of potential paths, or of {"path": ..., "label": ...} entries."""
    base = Path(path).parent
    items = []
    for k, e in enumerate(json.loads(Path(path).read_text())):
        if isinstance(e, str):
            e = {"path": e}
        e = dict(e)
        e.setdefault("label", e.get("path", f"sample{k}"))
        if "path" in e and not Path(e["path"]).is_absolute():
            e["path"] = str(base / e["path"])
        items.append(e)
    return items


def _tol_overrides(extra: list[str]) -> dict:
    """Parse ``--tol.key value`` and ``--tol.key=value`` pairs."""
    tol, k = {}, 0
    while k < len(extra):
        tok = extra[k]
        if not tok.startswith("--tol."):
            raise SystemExit(f"unrecognized argument {tok!r}")
        key = tok[len("--tol."):]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            k += 1
            if k >= len(extra):
                raise SystemExit(f"{tok} needs a value")
            val = extra[k]
        tol[key] = float(val)
        k += 1
    return tol


# ---------------------------------------------------------------------------
# subcommands


def cmd_build_polytope(args):
    from .model import ToricModel

    poly = _polytope(args.polytope)
    info = {"name": poly.name, **poly.to_json(), "vertices": poly.vertices, "volume": poly.volume,
            "boundary_measure": poly.boundary_measure, "barycenter": poly.barycenter,
            "fano": poly.is_fano, "hash": poly.hash}
    if args.grid:
        m = ToricModel(poly, args.grid)
        info["grid"] = {"N": args.grid, "shape": list(m.grid.shape), "inside_nodes": int(m.grid.size)}
    _emit(info, args)
    return EXIT_OK


def cmd_potential(args):
    from .model import AffineFunction, ToricModel, save_potential
    from .potentials import quadratic, random_convex, symmetric_p1
    from .toric_model import torus_act

    model = ToricModel(_polytope(args.polytope), args.grid)
    rng = np.random.default_rng(args.seed)
    fam = args.family
    if fam == "zero":
        pot = model.zero()
    elif fam == "random":
        pot = random_convex(model, rng, scale=args.scale, bumps=args.bumps, normalize=args.normalize)
    elif fam == "quadratic":
        A = _floats(args.matrix) if args.matrix else np.eye(model.n).ravel()
        pot = quadratic(model, args.scale * A.reshape(model.n, model.n), _floats(args.b), normalize=args.normalize)
    elif fam == "orbit":
        b = _floats(args.b) if args.b else np.eye(model.n)[0]
        pot = torus_act(model.zero(), AffineFunction(args.t * b, 0.0))
    elif fam == "symmetric":
        pot = symmetric_p1(model, rng, args.scale)
    else:  # pragma: no cover - argparse restricts the choices
        raise ValueError(fam)
    if not args.out:
        raise SystemExit("potential needs --out")
    path = save_potential(pot, args.out)
    io_info = {"path": str(path), "family": fam, "grid_N": args.grid, "polytope": model.poly.name,
               "normalized": pot.normalized, "am": pot.am()}
    sys.stdout.write(io.dumps(io_info))
    return EXIT_OK


def _load(path, model=None):
    from .model import load_potential

    return load_potential(path, model)


def cmd_report(args):
    from .functionals import energy_report

    rows, reports = [], []
    model = None
    for p in args.potentials:
        pot = _load(p, model)
        model = pot.model
        rep = energy_report(pot, beta=args.beta, soliton=args.soliton, extrapolate=args.extrapolate)
        d = rep.to_dict()
        reports.append({"path": p, **d})
        rows.append({"path": p, **{k: v for k, v in d.items() if not isinstance(v, list)},
                     "grid": "x".join(str(s) for s in model.grid.shape), "polytope": model.poly.name})
    _emit(reports[0] if len(reports) == 1 else reports, args, rows)
    return EXIT_OK


def cmd_dist(args):
    from .metric import d1

    if args.manifest:
        items = _manifest(args.manifest)
        pots = []
        model = None
        for e in items:
            pots.append(_load(e["path"], model))
            model = pots[-1].model
        n = len(pots)
        D = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                D[i, j] = D[j, i] = d1(pots[i], pots[j], tol=args.tol).d1_l1
        rows = [{"label": items[i]["label"], **{items[j]["label"]: D[i, j] for j in range(n)}} for i in range(n)]
        args.format = "csv" if args.format == "csv" or not args.format else args.format
        _emit({"labels": [e["label"] for e in items], "matrix": D}, args, rows)
        return EXIT_OK
    if len(args.potentials) != 2:
        raise SystemExit("dist needs two potential files or --manifest")
    u = _load(args.potentials[0])
    v = _load(args.potentials[1], u.model)
    rep = d1(u, v, pathlength=args.pathlength, mixed=args.mixed, tol=args.tol)
    _emit(rep.to_dict(), args, [rep.to_dict()])
    return EXIT_OK


def cmd_quotient(args):
    from .quotient import d1_quotient, j_quotient

    u = _load(args.potentials[0])
    if args.j:
        res = j_quotient(u, seed=args.seed)
    else:
        if len(args.potentials) != 2:
            raise SystemExit("quotient needs two potential files (or one with --j)")
        v = _load(args.potentials[1], u.model)
        res = d1_quotient(u, v, tol=args.tol, free_constant=not args.fixed_constant)
    _emit(res.to_dict(), args, [{"value": res.value, "iterations": res.iterations, "residual": res.residual,
                                 **{f"b{k}": x for k, x in enumerate(res.minimizer.b)}, "c": res.minimizer.c}])
    return EXIT_OK


def cmd_properness(args):
    from .functionals import ding, k_energy
    from .quotient import d1_quotient, properness_fit

    items = _manifest(args.manifest)
    F = {"k_energy": k_energy, "ding": ding}[args.functional]
    samples, rows = [], []
    base = _load(args.base) if args.base else None
    F0 = None
    for e in items:
        if "d" in e and "F" in e:
            d, f = float(e["d"]), float(e["F"])
        else:
            pot = _load(e["path"], base.model if base is not None else None)
            if base is None:
                base = pot.model.zero()
            if F0 is None:
                F0 = F(base)
            d = d1_quotient(base, pot, free_constant=False).value
            f = F(pot) - F0
        samples.append((d, f))
        rows.append({"label": e["label"], "d": d, "F": f})
    rep = properness_fit(samples, family=args.family or Path(args.manifest).name, threshold=args.threshold)
    out = {**rep.to_dict(), "samples": rows}
    if args.svg:
        ds = np.array([s[0] for s in samples])
        line = np.array([0.0, ds.max()])
        svg.plot([{"x": ds, "y": [s[1] for s in samples], "label": "samples", "style": "points"},
                  {"x": line, "y": rep.C * line - rep.D, "label": "C d - D"}],
                 args.svg, title="properness fit", xlabel="quotient distance", ylabel="functional")
    _emit(out, args, rows)
    return EXIT_OK


def _principle_model(name: str, grid: int | None):
    from .model import ToricModel
    from .polytope import NAMED, named
    from .principle import TOYS, ToricVariationalModel

    if name in TOYS:
        return TOYS[name]()
    key = name[len("toric-"):] if name.startswith("toric-") else name
    if key in NAMED:
        poly = named(key)
        N = grid or (1025 if poly.n == 1 else 65)
        return ToricVariationalModel(ToricModel(poly, N))
    raise SystemExit(f"unknown model {name!r}; toys: {', '.join(TOYS)}; toric: toric-<{'|'.join(NAMED)}>")


def cmd_principle(args):
    from .principle import check_hypotheses, existence_properness_test

    model = _principle_model(args.model, args.grid)
    rep = check_hypotheses(model, budget=args.budget, seed=args.seed)
    out = rep.to_dict()
    if args.existence:
        out["existence"] = existence_properness_test(model, budget=args.budget, seed=args.seed)
    _emit(out, args)
    return EXIT_OK


def cmd_experiment(args, tol):
    from .experiments import ExperimentConfig, run_experiment

    grids = tuple(int(g) for spec in (args.grid or []) for g in str(spec).split(",") if g)
    cfg = ExperimentConfig(args.name, grids=grids, seed=args.seed, out=Path(args.out or "kfl-out"), tol=tol)
    summary = run_experiment(cfg)
    sys.stdout.write(io.dumps(summary))
    return EXIT_OK if summary["pass"] else EXIT_FAIL


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    from .experiments import EXPERIMENTS

    p = _Parser(prog="kfl", description="d1 geometry of toric Kahler metrics")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    def common(sp, out=True, fmt=True):
        if out:
            sp.add_argument("--out", help="output file (default stdout)")
        if fmt:
            sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = sub.add_parser("build-polytope", help="validate a polytope and print its data")
    sp.add_argument("polytope", help="named model or JSON file with a 'facets' list")
    sp.add_argument("--grid", type=int)
    common(sp, fmt=False)

    sp = sub.add_parser("potential", help="generate a potential file")
    sp.add_argument("polytope")
    sp.add_argument("--family", choices=("zero", "random", "quadratic", "orbit", "symmetric"), default="random")
    sp.add_argument("--grid", type=int, default=65)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scale", type=float, default=1.0)
    sp.add_argument("--bumps", type=int, default=3)
    sp.add_argument("--matrix", help="row-major quadratic form, comma separated")
    sp.add_argument("--b", help="linear part or orbit direction, comma separated")
    sp.add_argument("--t", type=float, default=1.0, help="orbit parameter")
    sp.add_argument("--normalize", action="store_true")
    sp.add_argument("--out", required=True)

    sp = sub.add_parser("report", help="energy functionals of potential files")
    sp.add_argument("potentials", nargs="+")
    sp.add_argument("--beta", type=float, default=1.0)
    sp.add_argument("--soliton", action="store_true")
    sp.add_argument("--extrapolate", action="store_true")
    common(sp)

    sp = sub.add_parser("dist", help="d1 distance of two potentials, or a matrix over a manifest")
    sp.add_argument("potentials", nargs="*")
    sp.add_argument("--manifest")
    sp.add_argument("--pathlength", action="store_true")
    sp.add_argument("--mixed", action="store_true")
    sp.add_argument("--tol", type=float, default=1e-3)
    common(sp)
    # a manifest gives a CSV matrix unless --format json is asked for
    sp.set_defaults(format=None)

    sp = sub.add_parser("quotient", help="d1 distance modulo the torus (or J modulo the torus with --j)")
    sp.add_argument("potentials", nargs="+")
    sp.add_argument("--j", action="store_true")
    sp.add_argument("--fixed-constant", action="store_true", help="constant fixed by the action on AM-normalised potentials")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tol", type=float, default=1e-8)
    common(sp)

    sp = sub.add_parser("properness", help="fit F >= C d - D over a manifest of samples")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--base", help="basepoint potential (default: the reference)")
    sp.add_argument("--functional", choices=("k_energy", "ding"), default="k_energy")
    sp.add_argument("--family", default="")
    sp.add_argument("--threshold", type=float, default=1e-3)
    sp.add_argument("--svg", help="scatter plot with the fitted line")
    common(sp)

    sp = sub.add_parser("principle", help="sampled check of the existence principle hypotheses")
    sp.add_argument("model", help="toy name or toric-<polytope>")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=int, default=100)
    sp.add_argument("--grid", type=int)
    sp.add_argument("--existence", action="store_true", help="also run the properness verdict")
    common(sp, fmt=False)

    sp = sub.add_parser("experiment", help="run a registered experiment (exit 2 when it fails)")
    sp.add_argument("name", choices=EXPERIMENTS)
    sp.add_argument("--grid", action="append", help="grid size(s), repeatable or comma separated")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", help="output directory (default kfl-out)")
    return p


COMMANDS = {
    "build-polytope": cmd_build_polytope, "potential": cmd_potential, "report": cmd_report, "dist": cmd_dist,
    "quotient": cmd_quotient, "properness": cmd_properness, "principle": cmd_principle,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args, extra = parser.parse_known_args(argv)
        if args.cmd == "experiment":
            return cmd_experiment(args, _tol_overrides(extra))
        if extra:
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        return COMMANDS[args.cmd](args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(f"kfl: {exc.code}", file=sys.stderr)
            return EXIT_ERROR
        return EXIT_OK if exc.code in (0, None) else EXIT_ERROR
    except (KFLError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"kfl: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
