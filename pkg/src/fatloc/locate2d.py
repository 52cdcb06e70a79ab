"""Point location over disjoint convex fat regions with local updates.

Region representative points live in a balanced compressed quadtree.  Two
bookkeeping layers route a query from the located leaf to every region that
could contain the point:

* tags: a region R with tag scale d(R) (the smallest cell side at least
  |R| / (4 * beta)) tags every cell of side exactly d(R) it intersects and
  every leaf or compressed pseudo-leaf it intersects, so the located leaf
  always carries the small-and-medium regions that reach it;
* marks: each region marks the cells C with 2*beta*|C| <= |R| < 4*beta*|C|
  it intersects, in the marked-ancestor instance of the wedge (out of
  k = ceil(13 * beta) sectors around the cell center) containing its
  representative point.  A query asks each instance for the lowest marked
  ancestor of the located leaf; fatness and disjointness guarantee the
  lowest marked cell per wedge already carries every relevant big region.

Tags and marks are maintained incrementally through the quadtree's
structural hooks and re-derived per touched cell from the same rules the
from-scratch oracle uses.
"""

from __future__ import annotations

import math

from .counters import Counters
from .edge_oracle import EdgeOracleTree
from .errors import (
    DuplicatePoint,
    NotSimilar,
    NotThickEnough,
    OutOfBounds,
    OverlappingInput,
    OverlapViolation,
    UnknownHandle,
)
from .geometry import (
    ConvexRegion,
    Point2,
    WedgeParams,
    is_rho_similar,
    region_inside_cell,
    region_intersects_cell,
    union_diameter,
    wedge_index,
)
from .marked_ancestor import MarkedAncestorForest
from .quadtree import QuadTree, TreeHooks


class RegionHandle:
    """Stable identity of a stored region."""

    __slots__ = ("region", "ref", "active", "tag_nodes", "mark_nodes", "d_depth", "w_depth")

    def __init__(self, region):
        self.region = region
        self.ref = None
        self.active = False
        self.tag_nodes = []   # nodes currently tagged by this region
        self.mark_nodes = []  # (node, instance) pairs currently marked
        self.d_depth = 0
        self.w_depth = 0

    def __repr__(self):
        return f"<RegionHandle {self.region!r} active={self.active}>"


class _StoreHook(TreeHooks):
    __slots__ = ("store", "eot")

    def __init__(self, store):
        self.store = store
        self.eot = None

    def node_created(self, node, above_child=None):
        store = self.store
        if above_child is not None:
            node.ma_node = store.maf.add_unary(above_child.ma_node)
        elif node.parent is not None:
            node.ma_node = store.maf.add_leaf(node.parent.ma_node)
        else:
            node.ma_node = store.maf.add_root()
        node.ma_node.payload = node
        if self.eot is not None:
            self.eot.node_created(node, above_child)

    def node_removing(self, node, unary_child=None):
        store = self.store
        store._clear_node(node)
        if unary_child is not None:
            store.maf.remove_unary(node.ma_node)
        else:
            store.maf.remove_leaf(node.ma_node)
        node.ma_node = None
        if self.eot is not None:
            self.eot.node_removing(node, unary_child)

    def committed(self, dirty, created):
        if self.eot is not None:
            self.eot.committed(dirty, created)
        self.store._reconcile(dirty, created)


class RegionStore:
    def __init__(self, root_lo=(0.0, 0.0), root_side=1.0, beta=1.0, a=16,
                 verify=False, counters=None):
        if beta < 1.0:
            raise ValueError("thickness bound must be >= 1")
        self.beta = float(beta)
        self.wedge = WedgeParams.for_beta(self.beta)
        self.k = self.wedge.k
        self.verify = verify
        self.counters = counters if counters is not None else Counters()
        self.maf = MarkedAncestorForest(counters=self.counters)
        self.handles = []
        self._pool = None  # per-update candidate handles
        self._hook = _StoreHook(self)
        self.tree = QuadTree(
            2, root_lo, root_side, a=a, counters=self.counters, hooks=self._hook
        )
        self.eot = EdgeOracleTree(self.tree)
        self._hook.eot = self.eot
        self.eot.node_created(self.tree.root)
        self.eot.committed([], [self.tree.root])

    @staticmethod
    def build(regions, root_lo=(0.0, 0.0), root_side=1.0, beta=1.0, a=16, verify=False):
        store = RegionStore(root_lo, root_side, beta=beta, a=a, verify=verify)
        if verify and len(regions) <= 10_000:
            for i, r1 in enumerate(regions):
                for r2 in regions[i + 1:]:
                    if _regions_overlap(r1, r2):
                        raise OverlappingInput(f"{r1!r} overlaps {r2!r}")
        for r in regions:
            store.insert(r, _checked=not verify)
        return store

    def __len__(self):
        return len(self.handles)

    # ------------------------------------------------------------- rule scales

    def _depth_for_min_side(self, x):
        """Largest depth whose cell side is still >= x (tag scale)."""
        root = self.tree.root_side
        if x >= root:
            return 0
        d = int(math.floor(math.log2(root / x)))
        while root / (1 << d) < x and d > 0:
            d -= 1
        while d + 1 <= 48 and root / (1 << (d + 1)) >= x:
            d += 1
        return d

    # lower edge of the marking window, in cell diameters.  Blocking every
    # ray that starts anywhere in a marked cell C and points into its wedge
    # needs (beta/2 |I| + |C|/2) sin(phi) + |C|/2 <= |I|/2; with
    # phi = 2 pi / ceil(13 beta) this holds for every beta >= 1 once
    # |R| >= 2.8 beta |C|, and the factor-2 window keeps exactly one cell
    # size eligible per region.
    MARK_WINDOW = 2.8

    def _mark_depth(self, diam):
        """The unique depth with w*beta*|C| <= diam < 2*w*beta*|C| where
        |C| is the cell diameter (side * sqrt(2)) and w the window factor,
        clamped to the root for oversized regions."""
        w = self.MARK_WINDOW * self.beta
        eff = math.sqrt(2.0) * self.tree.root_side
        if diam >= w * eff:
            return 0
        d = max(0, int(math.ceil(math.log2(w * eff / diam))))
        while w * (eff / (1 << d)) > diam:
            d += 1
        while d > 0 and w * (eff / (1 << (d - 1))) <= diam:
            d -= 1
        return d

    # -------------------------------------------------------------- tag rules

    def _annulus_intersects(self, node, region):
        if not region_intersects_cell(region, self.tree.extent_of(node)):
            return False
        return not region_inside_cell(region, self.tree.extent_of(node.comp_child))

    def _tag_rule(self, node, h):
        if node.children is not None:
            return node.depth == h.d_depth and region_intersects_cell(
                h.region, self.tree.extent_of(node)
            )
        if node.comp_child is not None:
            if node.depth == h.d_depth:
                return region_intersects_cell(h.region, self.tree.extent_of(node))
            return self._annulus_intersects(node, h.region)
        return region_intersects_cell(h.region, self.tree.extent_of(node))

    def _mark_rule(self, node, h):
        """Wedge instance this region marks on the cell, or None."""
        if node.depth != h.w_depth:
            return None
        if not region_intersects_cell(h.region, self.tree.extent_of(node)):
            return None
        center = self.tree.extent_of(node).center()
        return wedge_index(center, h.region.rep, self.wedge)

    # ------------------------------------------------------- incremental hooks

    def _clear_node(self, node):
        """Remove all tag/mark references before the node disappears."""
        pool = self._pool
        if node.tags:
            for h in list(node.tags):
                if pool is not None:
                    pool[id(h)] = h
                h.tag_nodes.remove(node)
                self.counters.tags_changed += 1
            node.tags = None
        if node.mark_map:
            for inst, hs in list(node.mark_map.items()):
                for h in list(hs):
                    if pool is not None:
                        pool[id(h)] = h
                    h.mark_nodes.remove((node, inst))
                self.maf.unmark(node.ma_node, inst)
            node.mark_map = None

    def _tag(self, node, h):
        if node.tags is None:
            node.tags = {}
        node.tags[h] = True
        h.tag_nodes.append(node)
        self.counters.tags_changed += 1

    def _untag(self, node, h):
        del node.tags[h]
        h.tag_nodes.remove(node)
        self.counters.tags_changed += 1

    def _mark(self, node, h, inst):
        if node.mark_map is None:
            node.mark_map = {}
        hs = node.mark_map.get(inst)
        if hs is None:
            hs = node.mark_map[inst] = {}
            self.maf.mark(node.ma_node, inst)
        hs[h] = True
        h.mark_nodes.append((node, inst))

    def _unmark(self, node, h, inst):
        hs = node.mark_map[inst]
        del hs[h]
        h.mark_nodes.remove((node, inst))
        if not hs:
            del node.mark_map[inst]
            self.maf.unmark(node.ma_node, inst)

    def _reconcile(self, dirty, created):
        """Re-derive tags and marks of every touched cell from the rules."""
        pool = self._pool if self._pool is not None else {}
        touched = [n for n in dirty if n.alive] + created
        for n in touched:
            if n.tags:
                for h in n.tags:
                    pool[id(h)] = h
            if n.mark_map:
                for hs in n.mark_map.values():
                    for h in hs:
                        pool[id(h)] = h
            p = n.parent
            if p is not None and p.tags:
                for h in p.tags:
                    pool[id(h)] = h
        if self._pool is not None:
            self._pool = {}  # reset for the next commit within this update
        if not pool:
            return
        for n in touched:
            self.recompute_marks_for_cell(n, pool.values())

    def recompute_marks_for_cell(self, node, candidates=None):
        """Re-derive a cell's tags and marks from the storage rules.

        candidates restricts the regions examined; by default the cell's and
        its parent's current references are used (sufficient after a local
        structural change, since every region reaching the cell tags the
        containing leaf)."""
        if not node.alive:
            return
        if candidates is None:
            pool = {}
            for src in (node, node.parent):
                if src is None:
                    continue
                if src.tags:
                    for h in src.tags:
                        pool[id(h)] = h
                if src.mark_map:
                    for hs in src.mark_map.values():
                        for h in hs:
                            pool[id(h)] = h
            candidates = pool.values()
        for h in candidates:
            if not h.active:
                continue
            want_tag = self._tag_rule(node, h)
            have_tag = node.tags is not None and h in node.tags
            if want_tag and not have_tag:
                self._tag(node, h)
            elif have_tag and not want_tag:
                self._untag(node, h)
            want_inst = self._mark_rule(node, h)
            have_inst = None
            if node.mark_map:
                for inst, hs in node.mark_map.items():
                    if h in hs:
                        have_inst = inst
                        break
            if want_inst != have_inst:
                if have_inst is not None:
                    self._unmark(node, h, have_inst)
                if want_inst is not None:
                    self._mark(node, h, want_inst)

    # ------------------------------------------------------------ install flow

    def _cover_node(self, depth, ix, iy, near):
        """Materialized node covering grid cell (ix, iy) at depth, found by
        walking from a nearby node; None when outside the root."""
        size = 1 << depth
        if not (0 <= ix < size and 0 <= iy < size):
            return None
        shift = 48 - depth
        grid = (ix << shift, iy << shift)
        node = self.tree._walk_to(near, grid)
        while node.depth > depth:
            node = node.parent
        return node

    def _install(self, h):
        region = h.region
        h.d_depth = self._depth_for_min_side(region.diam / (4.0 * self.beta))
        h.w_depth = self._mark_depth(region.diam)
        near = h.ref.node
        root = self.tree.root_side
        lo = self.tree.root_lo
        seen = set()
        # flood at the coarser (mark) scale; tag cells live strictly below it
        depth = min(h.w_depth, h.d_depth)
        side = root / (1 << depth)
        if region.kind == "disk":
            x0, x1 = region.center.x - region.radius, region.center.x + region.radius
            y0, y1 = region.center.y - region.radius, region.center.y + region.radius
        else:
            xs = [v[0] for v in region.vertices]
            ys = [v[1] for v in region.vertices]
            x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
        ix0 = max(0, int((x0 - lo[0]) / side))
        iy0 = max(0, int((y0 - lo[1]) / side))
        ix1 = min((1 << depth) - 1, int((x1 - lo[0]) / side))
        iy1 = min((1 << depth) - 1, int((y1 - lo[1]) / side))
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                node = self._cover_node(depth, ix, iy, near)
                if node is None or id(node) in seen:
                    continue
                seen.add(id(node))
                if not region_intersects_cell(region, self.tree.extent_of(node)):
                    continue
                self._apply_rules_down(node, h)
                near = node

    def _apply_rules_down(self, node, h):
        """Apply tag/mark rules to node and its intersecting descendants."""
        stack = [node]
        region = h.region
        while stack:
            n = stack.pop()
            if not region_intersects_cell(region, self.tree.extent_of(n)):
                continue
            if self._tag_rule(n, h) and (n.tags is None or h not in n.tags):
                self._tag(n, h)
            inst = self._mark_rule(n, h)
            if inst is not None:
                have = n.mark_map is not None and inst in n.mark_map and h in n.mark_map[inst]
                if not have:
                    self._mark(n, h, inst)
            if n.children is not None:
                stack.extend(n.children)
            elif n.comp_child is not None:
                stack.append(n.comp_child)

    def _uninstall(self, h):
        for node in list(h.tag_nodes):
            self._untag(node, h)
        for node, inst in list(h.mark_nodes):
            self._unmark(node, h, inst)

    # -------------------------------------------------------------- public ops

    def _validate_region(self, region):
        if region.thickness() > self.beta * (1.0 + 1e-12):
            raise NotThickEnough(
                f"thickness {region.thickness():.4f} exceeds bound {self.beta}"
            )
        root_extent = self.tree.extent_of(self.tree.root)
        if not region_inside_cell(region, root_extent):
            raise OutOfBounds(f"{region!r} not inside the root square")

    def insert(self, region: ConvexRegion, _checked=False) -> RegionHandle:
        self._validate_region(region)
        if self.verify and not _checked:
            for other in self.handles:
                if _regions_overlap(region, other.region):
                    raise OverlapViolation(f"{region!r} overlaps {other.region!r}")
        h = RegionHandle(region)
        self._pool = {}
        try:
            hint = self.eot.locate((region.rep.x, region.rep.y))
            try:
                ref = self.tree.insert_point((region.rep.x, region.rep.y), hint)
            except DuplicatePoint:
                raise OverlappingInput(
                    f"representative of {region!r} coincides with a stored one"
                )
            ref.payload = h
            h.ref = ref
            h.active = True
            self.handles.append(h)
            self._install(h)
        finally:
            self._pool = None
        return h

    def delete(self, h: RegionHandle):
        if not isinstance(h, RegionHandle) or not h.active:
            raise UnknownHandle(f"{h}")
        self._pool = {}
        try:
            self._uninstall(h)
            h.active = False
            self.tree.delete_point(h.ref)
            h.ref = None
            self.handles.remove(h)
        finally:
            self._pool = None

    def local_update(self, h: RegionHandle, new: ConvexRegion, rho: float):
        if not isinstance(h, RegionHandle) or not h.active:
            raise UnknownHandle(f"{h}")
        if not is_rho_similar(h.region, new, rho):
            raise NotSimilar(
                f"union diameter {union_diameter(h.region, new):.4f} exceeds "
                f"{rho} x {min(h.region.diam, new.diam):.4f}"
            )
        self._validate_region(new)
        if self.verify:
            for other in self.handles:
                if other is not h and _regions_overlap(new, other.region):
                    raise OverlapViolation(f"{new!r} overlaps {other.region!r}")
        self._pool = {}
        try:
            self._uninstall(h)
            self.tree.move_point(h.ref, (new.rep.x, new.rep.y))
            h.region = new
            self._install(h)
        finally:
            self._pool = None

    def query(self, q: Point2):
        """The unique handle whose region contains q, or None."""
        counters = self.counters
        node = self.eot.locate((q.x, q.y))
        candidates = {}
        if node.tags:
            for h in node.tags:
                candidates[id(h)] = h
        maf = self.maf
        ma_node = node.ma_node
        for inst in range(self.k):
            hit = maf.lowest_marked_ancestor(ma_node, inst)
            if hit is not None:
                cell = hit.payload
                for h in cell.mark_map[inst]:
                    candidates[id(h)] = h
        counters.candidates_tested += len(candidates)
        found = None
        for h in candidates.values():
            if h.region.contains_point(q):
                if found is not None:
                    raise OverlapViolation("two stored regions contain the query")
                found = h
                if not self.verify:
                    break
        return found

    def storage_node(self, h: RegionHandle):
        """Cell carrying the region pointer: the lowest ancestor-or-self of
        the representative's leaf with side at least |R| / (4*beta)."""
        node = h.ref.node
        need = h.region.diam / (4.0 * self.beta)
        while node.parent is not None and self.tree.cell_side(node) < need:
            node = node.parent
        return node

    # ------------------------------------------------------------- inspection

    def tag_scale_cells(self, h):
        """The scale-level tag set of a region: tagged cells that are at its
        tag depth, plus tagged coarser leaves (the packing-bound set)."""
        return [
            n for n in h.tag_nodes
            if n.depth == h.d_depth
            or (n.depth < h.d_depth and n.children is None)
        ]

    def expected_tags_marks(self):
        """From-scratch rule evaluation over every node and region."""
        tags = {}
        marks = {}
        for n in self.tree.nodes():
            for h in self.handles:
                if self._tag_rule(n, h):
                    tags.setdefault(id(n), set()).add(id(h))
                inst = self._mark_rule(n, h)
                if inst is not None:
                    marks.setdefault(id(n), {}).setdefault(inst, set()).add(id(h))
        return tags, marks

    def actual_tags_marks(self):
        tags = {}
        marks = {}
        for n in self.tree.nodes():
            if n.tags:
                tags[id(n)] = {id(h) for h in n.tags}
            if n.mark_map:
                marks[id(n)] = {
                    inst: {id(h) for h in hs} for inst, hs in n.mark_map.items()
                }
        return tags, marks

    def check_invariants(self, size_factor=16):
        errs = self.tree.check_invariants(size_factor=size_factor)
        errs += self.eot.check_invariants()
        errs += self.maf.check_invariants()
        need_factor = 1.0 - 1e-9
        for h in self.handles:
            node = self.storage_node(h)
            if self.tree.cell_side(node) < need_factor * h.region.diam / (4.0 * self.beta):
                errs.append(f"storage cell of {h!r} below |R|/(4 beta)")
        exp_t, exp_m = self.expected_tags_marks()
        act_t, act_m = self.actual_tags_marks()
        if exp_t != act_t:
            errs.append("tag sets differ from the from-scratch rules")
        if exp_m != act_m:
            errs.append("mark sets differ from the from-scratch rules")
        return errs


def _regions_overlap(r1, r2):
    d = r1.rep.dist(r2.rep)
    if d > r1.r_outer + r2.r_outer:
        return False
    if d <= r1.r_inner + r2.r_inner:
        return True
    if r1.kind == "disk" and r2.kind == "disk":
        return d <= r1.radius + r2.radius
    # at least one polygon from here on
    probe, other = (r1, r2) if r1.kind == "polygon" else (r2, r1)
    for x, y in probe.vertices:
        if other.contains_point(Point2(x, y)):
            return True
    if other.kind == "polygon":
        for x, y in other.vertices:
            if probe.contains_point(Point2(x, y)):
                return True
        return _convex_polys_overlap(probe, other)
    # polygon vs disk: distance from center to polygon
    return _point_to_poly_dist(other.center, probe) <= other.radius


def _point_to_poly_dist(p, poly):
    if poly.contains_point(p):
        return 0.0
    best = float("inf")
    verts = poly.vertices
    n = len(verts)
    for i in range(n):
        ax, ay = verts[i]
        bx, by = verts[(i + 1) % n]
        ex, ey = bx - ax, by - ay
        t = ((p.x - ax) * ex + (p.y - ay) * ey) / (ex * ex + ey * ey)
        t = min(1.0, max(0.0, t))
        best = min(best, math.hypot(ax + t * ex - p.x, ay + t * ey - p.y))
    return best


def _convex_polys_overlap(a, b):
    for poly, other in ((a, b), (b, a)):
        verts = poly.vertices
        n = len(verts)
        for i in range(n):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % n]
            nx, ny = ay - by, bx - ax
            amax = max(nx * x + ny * y for x, y in poly.vertices)
            amin = min(nx * x + ny * y for x, y in poly.vertices)
            bmax = max(nx * x + ny * y for x, y in other.vertices)
            bmin = min(nx * x + ny * y for x, y in other.vertices)
            if amax < bmin or bmax < amin:
                return False
    return True
