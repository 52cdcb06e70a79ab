"""fatloc command line: build/query scenes, run benches, verify vs oracle.

Exit codes: 0 success, 1 verification mismatch, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bench import (
    build_structure,
    render_figures,
    run_experiment,
    run_verify,
    rows_to_csv,
    write_csv,
)
from .errors import FatLocError, MismatchError, ParseError, ValidationError
from .geometry import Point2
from .scene import SceneConfig, parse_scene


def _cmd_build(args):
    cfg, objects = parse_scene(args.scene, full=args.verify == "full")
    structure = build_structure(cfg, objects, verify=args.verify == "full")
    errs = structure.check_invariants() if args.verify == "full" else []
    tags = 0
    if cfg.dim == 2:
        tags = sum(len(h.tag_nodes) for h in structure.handles)
    print(
        f"built dim={cfg.dim} objects={len(objects)} "
        f"nodes={structure.tree.node_count} tag_entries={tags}"
    )
    if errs:
        for e in errs[:20]:
            print(f"invariant violation: {e}", file=sys.stderr)
        return 1
    return 0


def _cmd_query(args):
    cfg, objects = parse_scene(args.scene)
    structure = build_structure(cfg, objects)
    handles = {id(h): i for i, h in enumerate(structure.handles)}
    out = sys.stdout
    with open(args.points) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
                if cfg.dim == 1:
                    got = structure.query(float(doc["x"]))
                else:
                    got = structure.query(Point2(float(doc["x"]), float(doc["y"])))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise ParseError(lineno, f"bad point: {e}")
            idx = handles[id(got)] if got is not None else None
            out.write(json.dumps({"index": idx}) + "\n")
    return 0


def _cmd_bench(args):
    sizes = [int(s) for s in args.sizes.split(",") if s]
    root = (0.0, 1.0) if args.dim == 1 else (0.0, 0.0, 1.0)
    cfg = SceneConfig(
        dim=args.dim, root=root, beta=args.beta, rho=args.rho, seed=args.seed
    )
    rows = run_experiment(cfg, sizes, args.ops)
    if args.csv:
        write_csv(args.csv, rows)
        print(f"wrote {args.csv}")
    else:
        sys.stdout.write(rows_to_csv(rows))
    if args.plot:
        render_figures(rows, args.plot)
        print(f"wrote {args.plot}")
    return 0


def _cmd_verify(args):
    code = run_verify(
        args.dim, args.n, args.ops, args.seed, beta=args.beta, rho=args.rho
    )
    if code == 0:
        print(f"verified dim={args.dim} n={args.n} ops={args.ops} seed={args.seed}: OK")
    return code


def make_parser():
    p = argparse.ArgumentParser(
        prog="fatloc",
        description="dynamic point location over disjoint fat regions",
    )
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a structure from a scene file")
    b.add_argument("--scene", required=True)
    b.add_argument("--verify", choices=["full"], default=None)
    b.set_defaults(func=_cmd_build)

    q = sub.add_parser("query", help="answer point queries from a file")
    q.add_argument("--scene", required=True)
    q.add_argument("--points", required=True)
    q.set_defaults(func=_cmd_query)

    be = sub.add_parser("bench", help="counter-based scaling experiments")
    be.add_argument("--dim", type=int, choices=[1, 2], required=True)
    be.add_argument("--sizes", required=True, help="comma-separated sizes")
    be.add_argument("--ops", type=int, default=1000)
    be.add_argument("--rho", type=float, default=4.0)
    be.add_argument("--beta", type=float, default=2.0)
    be.add_argument("--seed", type=int, default=0)
    be.add_argument("--csv", default=None)
    be.add_argument("--plot", default=None, help="also render figures (PNG)")
    be.set_defaults(func=_cmd_bench)

    v = sub.add_parser("verify", help="oracle-verified randomized soak")
    v.add_argument("--dim", type=int, choices=[1, 2], required=True)
    v.add_argument("--n", type=int, required=True)
    v.add_argument("--ops", type=int, required=True)
    v.add_argument("--seed", type=int, default=7)
    v.add_argument("--beta", type=float, default=2.0)
    v.add_argument("--rho", type=float, default=4.0)
    v.set_defaults(func=_cmd_verify)
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except MismatchError as e:
        print(f"verification mismatch: {e}", file=sys.stderr)
        return 1
    except (ParseError, ValidationError, OSError) as e:
        print(f"input error: {e}", file=sys.stderr)
        return 2
    except FatLocError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
