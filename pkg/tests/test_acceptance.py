"""Acceptance suite: one test per criterion, each printing a PASS line.

Frozen constants (calibrated by exhaustive counting on seeds 0..9 before
freezing; see the module-level notes next to each criterion):

* c_pack = 16   scale-level tag cells per region, per unit beta
* c_ovl  = 8    regions intersecting one leaf, per unit beta
* c_walk = 6    walk length per local update, per (log2 rho + 1)
"""

import math
import os
import random
import time

import pytest

from fatloc.bench import (
    build_structure,
    fit_affine_log,
    rows_to_csv,
    run_experiment,
    run_workload,
    write_csv,
)
from fatloc.cli import main
from fatloc.errors import DuplicatePoint
from fatloc.geometry import Interval1, region_intersects_cell
from fatloc.locate1d import IntervalSet
from fatloc.locate2d import RegionStore
from fatloc.marked_ancestor import MarkedAncestorForest, NaiveMarkedAncestor
from fatloc.quadtree import QuadTree
from fatloc.scene import SceneConfig, gen_scene, gen_workload

C_PACK = 16
C_OVL = 8
C_WALK = 6

ARTIFACTS = os.path.join(os.path.dirname(__file__), "..", "build", "acceptance")


def report(criterion, ok, detail):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'} - {detail}"
    print(line)
    assert ok, line


# ---------------------------------------------------------------- criteria 1+2


class TestOracleEquivalence:
    def test_criterion_1_dim1(self):
        t0 = time.time()
        rc = main(["verify", "--dim", "1", "--n", "10000", "--ops", "100000",
                   "--seed", "7"])
        dt = time.time() - t0
        report(1, rc == 0 and dt < 60.0,
               f"dim-1 verify n=10000 ops=100000 seed=7: exit {rc}, {dt:.1f}s (< 60s)")

    def test_criterion_2_dim2(self):
        t0 = time.time()
        rc = main(["verify", "--dim", "2", "--n", "2000", "--ops", "50000",
                   "--seed", "7", "--beta", "2", "--rho", "4"])
        dt = time.time() - t0
        report(2, rc == 0 and dt < 120.0,
               f"dim-2 verify n=2000 ops=50000 seed=7 beta=2 rho=4: exit {rc}, "
               f"{dt:.1f}s (< 120s)")


# ------------------------------------------------------------------ criterion 3


def scan_balance(tree):
    """Violations of: true leaves 2-balanced, B leaves 4-balanced.

    Independent full-scan evaluation over the cell grid: a leaf is violated
    when the same-component cell covering an adjacent position is more than
    the allowed factor coarser (compressed pseudo-leaves count as leaves;
    compressed edges cut components)."""
    nodes = tree.nodes()
    by_cell = {}
    comp = {}

    def comp_root(n):
        while not tree.is_component_root(n):
            n = n.parent
        return n

    for n in nodes:
        by_cell[(n.depth, n.idx)] = n
        comp[id(n)] = comp_root(n)
    out = []
    for n in nodes:
        if n.children is not None:
            continue
        alpha_exp = 1 if n.is_true else 2
        size = 1 << n.depth
        for dir_ in tree.dirs:
            tgt = tuple(n.idx[d] + dir_[d] for d in range(tree.dim))
            if any(not 0 <= t < size for t in tgt):
                continue
            # probe covers from n's depth up through the allowed window
            found = False
            for up in range(alpha_exp + 1):
                pos = tuple(t >> up for t in tgt)
                cover = by_cell.get((n.depth - up, pos))
                if cover is not None and comp[id(cover)] is comp[id(n)]:
                    found = True
                    break
            if not found:
                # the same-component cover is coarser than allowed, unless
                # the position belongs to another component entirely
                d = n.depth - alpha_exp - 1
                pos = tuple(t >> (alpha_exp + 1) for t in tgt)
                while d >= 0:
                    cover = by_cell.get((d, pos))
                    if cover is not None:
                        if comp[id(cover)] is comp[id(n)]:
                            out.append((n, cover))
                        break
                    d -= 1
                    pos = tuple(p >> 1 for p in pos)
    return out


class TestBalance:
    def test_criterion_3_balance_soak(self):
        rng = random.Random(303)

        def coord():
            if rng.random() < 0.5:
                return rng.choice([0.21, 0.68]) + rng.random() * 2.0 ** -rng.randint(6, 16)
            return rng.random()

        tree = QuadTree(2, (0.0, 0.0), 1.0, a=16)
        refs = []
        for _ in range(24):
            c = (coord(), coord())
            try:
                refs.append(tree.insert_point(c, tree.leaf_for_grid(tree.grid_of(c))))
            except DuplicatePoint:
                pass
        violations = 0
        ops = 0
        for _ in range(10_000):
            op = rng.random()
            try:
                if op < 0.4 or len(refs) < 8:
                    c = (coord(), coord())
                    refs.append(
                        tree.insert_point(c, tree.leaf_for_grid(tree.grid_of(c)))
                    )
                elif op < 0.7:
                    tree.delete_point(refs.pop(rng.randrange(len(refs))))
                else:
                    tree.move_point(refs[rng.randrange(len(refs))], (coord(), coord()))
            except DuplicatePoint:
                continue
            ops += 1
            violations += len(scan_balance(tree))
        report(3, violations == 0,
               f"{ops} mutations, full balance scan after each: {violations} violations")


# ----------------------------------------------------------- criteria 4, 5, 6


@pytest.fixture(scope="module")
def scaling_2d():
    """Shared 2D builds and workload stats for n in {2^10, 2^13, 2^16}."""
    stats = {}
    for exp in (10, 13, 16):
        n = 1 << exp
        seed = 7 ^ n
        objs = gen_scene(n, 1.0, seed, dim=2)
        store = RegionStore.build(objs, beta=1.0)
        cfg = SceneConfig(dim=2, beta=1.0, rho=4.0, seed=seed)
        store.counters.reset()
        workload = gen_workload(objs, 3000, 4.0, seed, dim=2)
        aggs = run_workload(cfg, store, objs, workload)
        stats[n] = {
            "nodes": store.tree.node_count,
            "tags": sum(len(h.tag_nodes) for h in store.handles),
            "query": aggs["query"],
            "update": aggs["update"],
        }
        del store
    return stats


class TestScaling:
    def test_criterion_4_size_linearity(self, scaling_2d):
        os.makedirs(ARTIFACTS, exist_ok=True)
        lines = ["n,nodes,tag_entries,node_ratio,tag_ratio"]
        ok = True
        detail = []
        for n, st in sorted(scaling_2d.items()):
            lines.append(
                f"{n},{st['nodes']},{st['tags']},{st['nodes']/n:.4f},{st['tags']/n:.4f}"
            )
            if st["nodes"] > 8 * n or st["tags"] > C_PACK * 1.0 * n:
                ok = False
            detail.append(f"n={n}: nodes={st['nodes']} ({st['nodes']/n:.2f}n), "
                          f"tags={st['tags']} ({st['tags']/n:.2f}n)")
        path = os.path.join(ARTIFACTS, "criterion4_sizes.csv")
        with open(path, "w", newline="") as fh:
            fh.write("\n".join(lines) + "\n")
        report(4, ok, "; ".join(detail) + f"; bounds 8n and {C_PACK}n; CSV at {path}")

    def test_criterion_5_query_scaling(self, scaling_2d):
        # affine-in-log fit over the 1D sweep, worst case bounded in both
        # dimensions
        ns, means, maxes = [], [], []
        for exp in range(10, 17):
            n = 1 << exp
            seed = 7 ^ n
            objs = gen_scene(n, 1.0, seed, dim=1)
            cfg = SceneConfig(dim=1, root=(0.0, 1.0), beta=1.0, rho=4.0, seed=seed)
            s = build_structure(cfg, objs)
            workload = gen_workload(objs, 2000, 4.0, seed, dim=1, root=(0.0, 1.0))
            s.counters.reset()
            aggs = run_workload(cfg, s, objs, workload)
            q = aggs["query"]
            ns.append(n)
            means.append(q.sums["edges_examined"] / q.count)
            maxes.append(q.maxes["edges_examined"])
        alpha, gamma, r2 = fit_affine_log(ns, means)
        ok = r2 >= 0.95
        for n, mx in zip(ns, maxes):
            if mx > 4 * math.log2(n):
                ok = False
        for n, st in scaling_2d.items():
            if st["query"].maxes["edges_examined"] > 4 * math.log2(n):
                ok = False
        worst2d = max(
            st["query"].maxes["edges_examined"] / math.log2(n)
            for n, st in scaling_2d.items()
        )
        report(5, ok,
               f"1D fit {alpha:.2f}*log2(n)+{gamma:.2f}, R^2={r2:.4f} (>= 0.95); "
               f"1D max/log2n <= {max(m / math.log2(n) for n, m in zip(ns, maxes)):.2f}, "
               f"2D max/log2n <= {worst2d:.2f} (bound 4)")

    def test_criterion_6_update_locality(self, scaling_2d):
        lo = scaling_2d[1 << 10]["update"]
        hi = scaling_2d[1 << 16]["update"]
        m_lo = lo.maxes["cells_touched"] + lo.maxes["tags_changed"]
        m_hi = hi.maxes["cells_touched"] + hi.maxes["tags_changed"]
        flat_ok = m_hi <= 1.5 * m_lo
        # walk length against rho with n fixed
        rng = random.Random(606)
        worst = {}
        for rho in (2.0, 8.0, 32.0, 128.0):
            objs = gen_scene(4096, 1.0, 77, dim=1)
            root = Interval1(0.0, 1.0)
            s = IntervalSet.build(objs, root)
            wl = gen_workload(objs, 10_000, rho, 77, dim=1, root=(0.0, 1.0),
                              mix=(0.0, 1.0, 0.0))
            handles = dict(enumerate(s.handles))
            wmax = 0
            next_slot = len(objs)
            for op in wl:
                if op[0] == "update":
                    s.local_update(handles[op[1]], op[2], rho)
                    wmax = max(wmax, s.tree.last_walk_len)
            worst[rho] = wmax
        rho_ok = all(
            wmax <= C_WALK * (math.log2(rho) + 1) for rho, wmax in worst.items()
        ) and worst[2.0] <= worst[128.0]
        report(6, flat_ok and rho_ok,
               f"max(cells+tags)/update: n=2^10 -> {m_lo}, n=2^16 -> {m_hi} "
               f"(ratio {m_hi/m_lo:.2f} <= 1.5); walks by rho {worst} "
               f"<= {C_WALK}*(log2 rho + 1)")


# ------------------------------------------------------------------ criterion 7


class TestMarkedAncestor:
    def test_criterion_7_oracle_and_touch_bound(self):
        rng = random.Random(7)
        f = MarkedAncestorForest()
        g = NaiveMarkedAncestor()
        fn = [f.add_root()]
        gn = [g.add_root()]
        while len(fn) < 10_000:
            i = rng.randrange(len(fn))
            fn.append(f.add_leaf(fn[i]))
            gn.append(g.add_leaf(gn[i]))
        n = len(fn)
        bound = 4 * math.log2(n)
        mismatches = 0
        worst = 0
        queries = 0
        for _ in range(100_000):
            op = rng.random()
            i = rng.randrange(len(fn))
            if op < 0.25:
                f.mark(fn[i])
                g.mark(gn[i])
            elif op < 0.45:
                f.unmark(fn[i])
                g.unmark(gn[i])
            elif op < 0.55:
                fn.append(f.add_leaf(fn[i]))
                gn.append(g.add_leaf(gn[i]))
            else:
                queries += 1
                f.counters.reset()
                a = f.lowest_marked_ancestor(fn[i])
                worst = max(worst, f.counters.ma_nodes_touched)
                b = g.lowest_marked_ancestor(gn[i])
                same = (a is None and b is None) or (
                    a is not None and b is not None and fn.index(a) == gn.index(b)
                )
                if not same:
                    mismatches += 1
        report(7, mismatches == 0 and worst <= bound,
               f"{queries} queries on 10^5 ops: {mismatches} oracle mismatches; "
               f"max nodes touched {worst} <= {bound:.1f}")


# ------------------------------------------------------------------ criterion 8


class TestTagMarkCanonicity:
    def test_criterion_8_scratch_rebuild(self):
        seed = 88
        objs = gen_scene(500, 1.0, seed, dim=2)
        store = RegionStore.build(objs, beta=1.0)
        cfg = SceneConfig(dim=2, beta=1.0, rho=4.0, seed=seed)
        workload = gen_workload(objs, 10_000, 4.0, seed, dim=2)
        run_workload(cfg, store, objs, workload)
        exp_t, exp_m = store.expected_tags_marks()
        act_t, act_m = store.actual_tags_marks()
        tag_diff = sum(
            1 for k in set(exp_t) | set(act_t) if exp_t.get(k) != act_t.get(k)
        )
        mark_diff = sum(
            1 for k in set(exp_m) | set(act_m) if exp_m.get(k) != act_m.get(k)
        )
        report(8, tag_diff == 0 and mark_diff == 0,
               f"after 10^4 mixed ops: {tag_diff} tag diffs, {mark_diff} mark "
               f"diffs vs from-scratch rules")


# ------------------------------------------------------------------ criterion 9


def _ray_hits_disk(ox, oy, ux, uy, cx, cy, r):
    dx, dy = cx - ox, cy - oy
    t = dx * ux + dy * uy
    if t < 0:
        return dx * dx + dy * dy <= r * r
    px, py = ox + t * ux, oy + t * uy
    ex, ey = cx - px, cy - py
    return ex * ex + ey * ey <= r * r


class TestGeometricLemmas:
    def test_criterion_9_spot_checks(self):
        pack_worst = 0.0
        ovl_worst = 0.0
        ray_viol = 0
        nest_viol = 0
        scenes = 0
        for beta in (1.0, 2.0, 4.0):
            for seed in range(17):
                scenes += 1
                objs = gen_scene(200, beta, seed, dim=2)
                store = RegionStore.build(objs, beta=beta)
                # (a) packing: scale-level tag cells per region
                for h in store.handles:
                    pack_worst = max(
                        pack_worst, len(store.tag_scale_cells(h)) / beta
                    )
                # (b) leaf overlap: regions intersecting one leaf
                ovl = {}
                for h in store.handles:
                    for node in h.tag_nodes:
                        if node.children is None:
                            ovl[id(node)] = ovl.get(id(node), 0) + 1
                if ovl:
                    ovl_worst = max(ovl_worst, max(ovl.values()) / beta)
                # (c) blocking: nested marked cells in one wedge instance
                marked = []
                for node in store.tree.nodes():
                    if node.mark_map:
                        for inst, hs in node.mark_map.items():
                            marked.append((node, inst, list(hs)))
                by_inst = {}
                for node, inst, hs in marked:
                    by_inst.setdefault(inst, []).append((node, hs))
                for inst, cells in by_inst.items():
                    for n1, hs1 in cells:
                        for n2, _hs2 in cells:
                            if n2.depth <= n1.depth or n2 is n1:
                                continue
                            sh = n2.depth - n1.depth
                            if any(n2.idx[d] >> sh != n1.idx[d] for d in range(2)):
                                continue
                            for h1 in hs1:
                                stack = [n2]
                                while stack:
                                    x = stack.pop()
                                    if not region_intersects_cell(
                                        h1.region, store.tree.extent_of(x)
                                    ):
                                        continue
                                    if x.children is not None:
                                        stack.extend(x.children)
                                    else:
                                        nest_viol += 1
                                        stack = []
                # (d) sampled rays from every marked cell's corners
                phi = store.wedge.phi
                for node, inst, hs in marked:
                    ext = store.tree.extent_of(node)
                    corners = (
                        (ext.anchor.x, ext.anchor.y),
                        (ext.anchor.x + ext.side, ext.anchor.y),
                        (ext.anchor.x + ext.side, ext.anchor.y + ext.side),
                        (ext.anchor.x, ext.anchor.y + ext.side),
                    )
                    angles = (
                        inst * phi,
                        (inst + 0.5) * phi,
                        (inst + 1) * phi - 1e-9 * phi,
                    )
                    for h in hs:
                        c = h.region
                        for ox, oy in corners:
                            for ang in angles:
                                if not _ray_hits_disk(
                                    ox, oy, math.cos(ang), math.sin(ang),
                                    c.center.x, c.center.y, c.radius,
                                ):
                                    ray_viol += 1
        ok = (
            pack_worst <= C_PACK
            and ovl_worst <= C_OVL
            and nest_viol == 0
            and ray_viol == 0
        )
        report(9, ok,
               f"{scenes} scenes (n=200, beta in 1/2/4): max |S_R|/beta "
               f"{pack_worst:.1f} <= {C_PACK}; max leaf overlap/beta "
               f"{ovl_worst:.1f} <= {C_OVL}; nesting violations {nest_viol}; "
               f"ray violations {ray_viol}")


# ----------------------------------------------------------------- criterion 10


class TestDeterminism:
    def test_criterion_10_byte_identical_csv(self):
        cfg = SceneConfig(dim=2, beta=2.0, rho=4.0, seed=55)
        rows1 = run_experiment(cfg, [256, 512], 600)
        rows2 = run_experiment(cfg, [256, 512], 600)
        a = rows_to_csv(rows1).encode()
        b = rows_to_csv(rows2).encode()
        cfg1 = SceneConfig(dim=1, root=(0.0, 1.0), beta=1.0, rho=8.0, seed=99)
        c = rows_to_csv(run_experiment(cfg1, [512], 600)).encode()
        d = rows_to_csv(run_experiment(cfg1, [512], 600)).encode()
        report(10, a == b and c == d,
               f"two dim-2 runs: {len(a)} bytes identical: {a == b}; "
               f"two dim-1 runs: {len(c)} bytes identical: {c == d}")
