"""Instrumented experiments: build scenes, replay workloads, verify every
query against the brute-force oracle, and report counter statistics as
RFC-4180 CSV (LF line endings, '.' decimals).  Identical configuration and
seed give byte-identical CSV.  The report path can also render the scaling
figures next to the CSV."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

from .counters import FIELDS, Counters
from .errors import MismatchError, UnknownHandle
from .geometry import Interval1, Point2
from .locate1d import IntervalSet
from .locate2d import RegionStore
from .scene import SceneConfig, VerifyOracle, gen_scene, gen_workload

CSV_COLUMNS = (
    ["n", "seed", "op_kind", "count"]
    + [f"mean_{f}" for f in FIELDS]
    + [f"max_{f}" for f in FIELDS]
    + ["nodes", "tag_entries"]
)


@dataclass
class ExperimentRow:
    n: int
    seed: int
    op_kind: str
    count: int
    mean: dict = field(default_factory=dict)
    max: dict = field(default_factory=dict)
    nodes: int = 0
    tag_entries: int = 0

    def csv_values(self):
        out = [str(self.n), str(self.seed), self.op_kind, str(self.count)]
        for f in FIELDS:
            out.append(_fmt(self.mean.get(f, 0.0)))
        for f in FIELDS:
            out.append(_fmt(float(self.max.get(f, 0))))
        out.append(str(self.nodes))
        out.append(str(self.tag_entries))
        return out


def _fmt(v):
    return format(v, ".9g")


class _Agg:
    __slots__ = ("count", "sums", "maxes")

    def __init__(self):
        self.count = 0
        self.sums = dict.fromkeys(FIELDS, 0)
        self.maxes = dict.fromkeys(FIELDS, 0)

    def add(self, delta):
        self.count += 1
        for f in FIELDS:
            v = delta[f]
            self.sums[f] += v
            if v > self.maxes[f]:
                self.maxes[f] = v

    def row(self, n, seed, kind, nodes=0, tag_entries=0):
        mean = {
            f: (self.sums[f] / self.count if self.count else 0.0) for f in FIELDS
        }
        return ExperimentRow(
            n, seed, kind, self.count, mean, dict(self.maxes), nodes, tag_entries
        )


def build_structure(cfg: SceneConfig, objects, verify=False):
    if cfg.dim == 1:
        root = Interval1(cfg.root_lo[0], cfg.root_lo[0] + cfg.root_side)
        return IntervalSet.build(
            objects, root, a=cfg.a, r_nbr=cfg.r_nbr, verify=verify
        )
    return RegionStore.build(
        objects, cfg.root_lo, cfg.root_side, beta=cfg.beta, a=cfg.a, verify=verify
    )


def _tag_entry_count(structure):
    if isinstance(structure, RegionStore):
        return sum(len(h.tag_nodes) for h in structure.handles)
    return 0


def run_workload(cfg: SceneConfig, structure, objects, ops_list, check=True):
    """Replay a workload; every query is verified against the oracle."""
    dim = cfg.dim
    counters = structure.counters
    oracle = VerifyOracle(dim, objects, capacity=len(objects) + len(ops_list))
    handles = {}
    for slot, obj in enumerate(objects):
        handles[slot] = structure.handles[slot]
    next_slot = len(objects)
    aggs = {}
    for idx, op in enumerate(ops_list):
        kind = op[0]
        agg = aggs.get(kind)
        if agg is None:
            agg = aggs[kind] = _Agg()
        before = counters.snapshot()
        if kind == "query":
            coords = op[1]
            if dim == 1:
                got = structure.query(coords[0])
            else:
                got = structure.query(Point2(coords[0], coords[1]))
            if check:
                want_slot = oracle.query(coords)
                want = handles.get(want_slot) if want_slot is not None else None
                if got is not want:
                    raise MismatchError(idx, want, got)
        elif kind == "update":
            slot, new = op[1], op[2]
            structure.local_update(handles[slot], new, cfg.rho)
            oracle.replace(slot, new)
        elif kind == "insert":
            new = op[1]
            handles[next_slot] = structure.insert(new)
            oracle.append(new)
            next_slot += 1
        elif kind == "delete":
            slot = op[1]
            structure.delete(handles.pop(slot))
            oracle.remove(slot)
        else:
            raise ValueError(f"unknown op kind {kind!r}")
        agg.add(counters.delta(before))
    return aggs


def run_experiment(cfg: SceneConfig, sizes, ops, check=True, progress=None):
    """Build, exercise, and verify one structure per requested size."""
    rows = []
    for n in sizes:
        objects = gen_scene(n, cfg.beta, cfg.seed ^ n, dim=cfg.dim, root=cfg.root)
        structure = build_structure(cfg, objects)
        counters = structure.counters
        counters.reset()
        workload = gen_workload(
            objects, ops, cfg.rho, cfg.seed ^ n, dim=cfg.dim, root=cfg.root
        )
        aggs = run_workload(cfg, structure, objects, workload, check=check)
        nodes = structure.tree.node_count
        tag_entries = _tag_entry_count(structure)
        rows.append(
            ExperimentRow(n, cfg.seed, "build", len(objects), {}, {}, nodes, tag_entries)
        )
        for kind in ("query", "update", "insert", "delete"):
            if kind in aggs:
                rows.append(aggs[kind].row(n, cfg.seed, kind, nodes, tag_entries))
        if progress is not None:
            progress(n, rows)
    return rows


def rows_to_csv(rows):
    lines = [",".join(CSV_COLUMNS)]
    for row in rows:
        lines.append(",".join(row.csv_values()))
    return "\n".join(lines) + "\n"


def write_csv(path, rows):
    data = rows_to_csv(rows)
    with open(path, "w", newline="") as fh:
        fh.write(data)
    return data


def fit_affine_log(ns, ys):
    """Least-squares fit y = alpha * log2(n) + gamma; returns
    (alpha, gamma, r_squared)."""
    import math

    xs = [math.log2(n) for n in ns]
    m = len(xs)
    mx = sum(xs) / m
    my = sum(ys) / m
    sxx = sum((x - mx) ** 2 for x in xs)
    sxy = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    alpha = sxy / sxx if sxx else 0.0
    gamma = my - alpha * mx
    ss_res = sum((y - (alpha * x + gamma)) ** 2 for x, y in zip(xs, ys))
    ss_tot = sum((y - my) ** 2 for y in ys)
    r2 = 1.0 - ss_res / ss_tot if ss_tot else 1.0
    return alpha, gamma, r2


def render_figures(rows, path):
    """Scaling plots (query cost and update locality) next to the CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_kind = {}
    for r in rows:
        by_kind.setdefault(r.op_kind, []).append(r)
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
    ax = axes[0]
    q = sorted(by_kind.get("query", []), key=lambda r: r.n)
    if q:
        ns = [r.n for r in q]
        means = [r.mean["edges_examined"] for r in q]
        ax.plot(ns, means, "o-", label="mean edges examined")
        alpha, gamma, r2 = fit_affine_log(ns, means)
        import math

        ax.plot(
            ns,
            [alpha * math.log2(n) + gamma for n in ns],
            "--",
            label=f"{alpha:.2f} log2 n + {gamma:.2f} (R^2={r2:.3f})",
        )
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("edges examined per query")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    ax = axes[1]
    upd = sorted(by_kind.get("update", []), key=lambda r: r.n)
    if upd:
        ns = [r.n for r in upd]
        ax.plot(ns, [r.max["cells_touched"] + r.max["tags_changed"] for r in upd],
                "s-", label="max cells+tags per update")
        ax.plot(ns, [r.mean["cells_touched"] + r.mean["tags_changed"] for r in upd],
                "o-", label="mean cells+tags per update")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("n")
    ax.set_ylabel("local update work")
    ax.grid(True, alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def run_verify(dim, n, ops, seed, beta=2.0, rho=4.0, report=sys.stderr):
    """Oracle-verified soak; returns 0 on full agreement, 1 on a mismatch."""
    root = (0.0, 1.0) if dim == 1 else (0.0, 0.0, 1.0)
    cfg = SceneConfig(dim=dim, root=root, beta=beta, rho=rho, seed=seed)
    objects = gen_scene(n, beta, seed, dim=dim, root=root)
    structure = build_structure(cfg, objects)
    workload = gen_workload(objects, ops, rho, seed, dim=dim, root=root)
    try:
        run_workload(cfg, structure, objects, workload, check=True)
    except MismatchError as e:
        print(f"verification mismatch: {e}", file=report)
        return 1
    return 0
