"""Dynamic balanced compressed quadtree (degree 4 in 2D, degree 2 in 1D).

The tree stores points inside a fixed root square and keeps itself in a
canonical shape that depends only on the current point set:

* data skeleton: every cell holding two or more points is subdivided; a
  single-occupancy chain longer than log2(a) levels is bridged by a
  compressed node whose child is the smallest cell containing the points
  below (aligned compression, factor ``a``);
* balance closure: a leaf whose parent subdivision was forced by data
  ("true" cells) keeps every larger same-component neighbor leaf within 2x
  its side; balance-only leaves ("B" cells) within 4x.  Oversized neighbors
  are split until no violation remains, and subdivisions that are no longer
  demanded are merged back.

Because the shape is canonical, deleting a point restores exactly the tree
that would exist had the point never been inserted.

Compressed edges cut the tree into components; balance and level links are
maintained within components only.  A compressed node acts as a pseudo-leaf
covering the part of its cell not occupied by the compressed child.

All containment/separation decisions go through one float-to-grid map
(per-dimension integer index at a fixed maximum depth) so they are mutually
consistent regardless of floating-point rounding.
"""

from __future__ import annotations

from collections import deque

from .counters import Counters
from .errors import DuplicatePoint, OutOfBounds, PrecisionLimit, UnknownPoint
from .geometry import CellExtent, Interval1, Point2

MAX_GRID_DEPTH = 48
SEP_DEPTH_LIMIT = 46

DIRS_1D = ((-1,), (1,))
DIRS_2D = tuple(
    (dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if (dx, dy) != (0, 0)
)


class PointRef:
    """Stable identity of a stored point; coords update on move."""

    __slots__ = ("coords", "node", "grid", "payload")

    def __init__(self, coords, grid):
        self.coords = coords
        self.node = None
        self.grid = grid  # per-dim index at MAX_GRID_DEPTH
        self.payload = None  # client slot (owning handle)

    def __repr__(self):
        return f"PointRef({self.coords})"


class QuadNode:
    __slots__ = (
        "depth",
        "idx",
        "parent",
        "children",
        "comp_child",
        "links",
        "is_true",
        "point",
        "occupied",
        "two_plus",
        "alive",
        "in_tx",
        "tags",
        "mark_map",
        "ma_node",
        "eot_items",
        "eot_record",
    )

    def __init__(self, depth, idx, parent):
        self.depth = depth
        self.idx = idx
        self.parent = parent
        self.children = None
        self.comp_child = None
        self.links = {}
        self.is_true = True
        self.point = None
        self.occupied = False
        self.two_plus = False
        self.alive = True
        self.in_tx = False
        self.tags = None       # client slot: region handles tagging this cell
        self.mark_map = None   # client slot: wedge index -> marking handles
        self.ma_node = None    # client slot: marked-ancestor twin
        self.eot_items = None  # client slot: edge-oracle zone items
        self.eot_record = None  # client slot: edge-oracle edge record

    def is_leaf(self):
        return self.children is None and self.comp_child is None

    def __repr__(self):
        kind = "T" if self.is_true else "B"
        shape = "comp" if self.comp_child else ("leaf" if self.is_leaf() else "int")
        return f"<QuadNode d={self.depth} idx={self.idx} {kind} {shape}>"


class TreeHooks:
    """Client callbacks mirroring structural changes.

    node_created/node_removing fire immediately, parents before descendants
    on creation and children before parents on removal.  ``above_child`` is
    set when the new node is spliced into an existing parent-child edge (it
    becomes the new parent of that child); ``unary_child`` is set when a
    node with exactly one remaining child is spliced out.  committed fires
    once per public operation with every node whose covering shape changed
    plus every surviving created node.
    """

    def node_created(self, node, above_child=None):
        pass

    def node_removing(self, node, unary_child=None):
        pass

    def committed(self, dirty_nodes, created_nodes):
        pass


class QuadTree:
    def __init__(self, dim, root_lo, root_side, a=16, counters=None, hooks=None):
        if dim not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if a < 4 or (a & (a - 1)) != 0:
            raise ValueError("compression factor must be a power of two >= 4")
        self.dim = dim
        self.root_lo = tuple(float(v) for v in root_lo)
        self.root_side = float(root_side)
        self.a = a
        self.gap_depth = a.bit_length() - 1
        self.counters = counters if counters is not None else Counters()
        self.hooks = hooks if hooks is not None else TreeHooks()
        self.dirs = DIRS_1D if dim == 1 else DIRS_2D
        self.degree = 1 << dim
        self.root = QuadNode(0, (0,) * dim, None)
        self.node_count = 1
        self.point_count = 0
        self._by_coords = {}
        self._queue = deque()
        self._struct_version = 0
        self._tx_dirty = []
        self._tx_created = []
        self.last_walk_len = 0  # cells traversed by the latest move walk
        self.hooks.node_created(self.root)
        self.hooks.committed([], [self.root])

    # ---------------------------------------------------------------- grid

    def grid_of(self, coords):
        """Per-dim index at MAX_GRID_DEPTH; raises OutOfBounds outside."""
        out = []
        scale = 1 << MAX_GRID_DEPTH
        for d in range(self.dim):
            f = (coords[d] - self.root_lo[d]) / self.root_side
            if not 0.0 <= f < 1.0:
                raise OutOfBounds(f"coordinate {coords} outside root")
            i = int(f * scale)
            if i >= scale:
                i = scale - 1
            out.append(i)
        return tuple(out)

    def _node_contains_grid(self, node, grid):
        shift = MAX_GRID_DEPTH - node.depth
        for d in range(self.dim):
            if grid[d] >> shift != node.idx[d]:
                return False
        return True

    def _child_pos(self, node, grid):
        shift = MAX_GRID_DEPTH - node.depth - 1
        pos = 0
        for d in range(self.dim):
            pos |= ((grid[d] >> shift) & 1) << d
        return pos

    def _sep_depth(self, grid_a, grid_b):
        depth = MAX_GRID_DEPTH
        for d in range(self.dim):
            x = grid_a[d] ^ grid_b[d]
            if x:
                depth = min(depth, MAX_GRID_DEPTH - x.bit_length())
        return depth

    def node_grid(self, node):
        return tuple(g << (MAX_GRID_DEPTH - node.depth) for g in node.idx)

    def cell_side(self, node):
        return self.root_side / (1 << node.depth)

    def cell_anchor(self, node):
        side = self.cell_side(node)
        return tuple(self.root_lo[d] + node.idx[d] * side for d in range(self.dim))

    def extent_of(self, node):
        """CellExtent (2D) or Interval1 (1D) of a node's cell."""
        side = self.cell_side(node)
        anchor = self.cell_anchor(node)
        if self.dim == 2:
            return CellExtent(Point2(anchor[0], anchor[1]), side, node.depth)
        return Interval1(anchor[0], anchor[0] + side)

    # ------------------------------------------------------------ tx plumbing

    def _mark_dirty(self, node):
        if not node.in_tx:
            node.in_tx = True
            self._tx_dirty.append(node)

    def _commit(self):
        self._flush_queue()
        if self._tx_dirty or self._tx_created:
            dirty = self._tx_dirty
            created_all = self._tx_created
            self._tx_dirty = []
            self._tx_created = []
            for n in dirty:
                n.in_tx = False
            for n in created_all:
                n.in_tx = False
            created = [n for n in created_all if n.alive]
            self.hooks.committed(dirty, created)

    # ------------------------------------------------------------- structure

    def _new_node(self, depth, idx, parent, above_child=None):
        n = QuadNode(depth, idx, parent)
        self.node_count += 1
        self.counters.cells_touched += 1
        n.in_tx = True
        self._tx_created.append(n)
        self.hooks.node_created(n, above_child)
        return n

    def _drop_node(self, node, unary_child=None):
        self.hooks.node_removing(node, unary_child)
        for dir_, nb in list(node.links.items()):
            nb.links.pop(tuple(-v for v in dir_), None)
        node.links.clear()
        node.alive = False
        self._mark_dirty(node)
        self.node_count -= 1
        self._struct_version += 1
        self.counters.cells_touched += 1

    def _subdivide(self, node, reuse=None, above=None):
        """Create the 2^d children of a childless node.

        reuse maps a child position to an existing subtree root attached as
        a direct child; above maps positions to an existing descendant the
        new child is spliced above (for hook bookkeeping).  A stored point
        re-homes into the child containing it.
        """
        self._mark_dirty(node)
        kids = []
        reused = None
        for pos in range(self.degree):
            if reuse is not None and pos in reuse:
                reused = reuse[pos]
                reused.parent = node
                kids.append(reused)
                continue
            idx = tuple(node.idx[d] * 2 + ((pos >> d) & 1) for d in range(self.dim))
            kid = self._new_node(
                node.depth + 1, idx, node,
                above_child=(above.get(pos) if above else None),
            )
            kid.is_true = node.two_plus
            kids.append(kid)
        node.children = kids
        self._wire_child_links(node)
        if node.point is not None:
            ref = node.point
            node.point = None
            kid = kids[self._child_pos(node, ref.grid)]
            kid.point = ref
            ref.node = kid
            kid.occupied = True
        for kid in kids:
            if kid is reused:
                continue
            self._enqueue_check_split(kid)
            self._enqueue_facing_bigger(kid)
        return kids

    def _wire_child_links(self, node):
        kids = node.children
        base = tuple(v * 2 for v in node.idx)
        for pos, kid in enumerate(kids):
            for dir_ in self.dirs:
                tgt = tuple(kid.idx[d] + dir_[d] for d in range(self.dim))
                rel = tuple(tgt[d] - base[d] for d in range(self.dim))
                if all(0 <= r <= 1 for r in rel):
                    other = kids[sum(rel[d] << d for d in range(self.dim))]
                    kid.links[dir_] = other
                    other.links[tuple(-v for v in dir_)] = kid
                    continue
                pdir = tuple(
                    -1 if tgt[d] < base[d] else (1 if tgt[d] > base[d] + 1 else 0)
                    for d in range(self.dim)
                )
                pn = node.links.get(pdir)
                if pn is None or pn.children is None:
                    continue
                rel = tuple(tgt[d] - pn.idx[d] * 2 for d in range(self.dim))
                other = pn.children[sum(rel[d] << d for d in range(self.dim))]
                kid.links[dir_] = other
                other.links[tuple(-v for v in dir_)] = kid

    def _pair_links(self, a, b, dir_):
        a.links[dir_] = b
        b.links[tuple(-v for v in dir_)] = a
        if a.children is None or b.children is None:
            return
        for kid in a.children:
            tgt = tuple(kid.idx[d] + dir_[d] for d in range(self.dim))
            rel = tuple(tgt[d] - b.idx[d] * 2 for d in range(self.dim))
            if all(0 <= r <= 1 for r in rel):
                other = b.children[sum(rel[d] << d for d in range(self.dim))]
                self._pair_links(kid, other, dir_)

    def _wire_seam(self, top):
        """After a component merge, connect top's subtree to equal-size
        neighbors around it."""
        for dir_ in self.dirs:
            nb = self._facing_cover(top, tuple(
                top.idx[d] + dir_[d] for d in range(self.dim)
            ), use_link=False)
            if nb is not None and nb.depth == top.depth:
                self._pair_links(top, nb, dir_)

    # ------------------------------------------------------------ navigation

    def is_component_root(self, node):
        return node.parent is None or node.parent.comp_child is node

    def _facing_cover(self, node, tgt, use_link=True):
        """Same-component node at grid position tgt (a cell at node.depth):
        the node at that exact position, or the shallower leaf/pseudo-leaf
        covering it; None if the position is outside the component."""
        size = 1 << node.depth
        for d in range(self.dim):
            if not 0 <= tgt[d] < size:
                return None
        if use_link:
            delta = tuple(tgt[d] - node.idx[d] for d in range(self.dim))
            ln = node.links.get(delta)
            if ln is not None:
                return ln
        a = node
        while True:
            shift = node.depth - a.depth
            if all(tgt[d] >> shift == a.idx[d] for d in range(self.dim)):
                break
            if self.is_component_root(a):
                return None
            a = a.parent
        while a.depth < node.depth:
            if a.comp_child is not None:
                c = a.comp_child
                if c.depth <= node.depth:
                    sh = node.depth - c.depth
                    if all(tgt[d] >> sh == c.idx[d] for d in range(self.dim)):
                        return None  # position lies in the inner component
                return a  # annulus covers (or straddles) the position
            if a.children is None:
                return a
            sh = node.depth - a.depth - 1
            pos = 0
            for d in range(self.dim):
                pos |= ((tgt[d] >> sh) & 1) << d
            a = a.children[pos]
        return a

    def _find_facing(self, node, dir_):
        return self._facing_cover(
            node, tuple(node.idx[d] + dir_[d] for d in range(self.dim))
        )

    def equal_size_neighbor(self, node, direction):
        """Existing equal-side neighbor node in the given direction."""
        return node.links.get(tuple(direction))

    def leaf_for_grid(self, grid, start=None):
        """Leaf or compressed pseudo-leaf whose exclusive area contains grid."""
        node = start if start is not None else self.root
        while True:
            if node.comp_child is not None:
                c = node.comp_child
                if self._node_contains_grid(c, grid):
                    node = c
                    continue
                return node
            if node.children is None:
                return node
            node = node.children[self._child_pos(node, grid)]

    def locate_by_descent(self, coords):
        """Plain root-to-leaf descent (no search structure)."""
        return self.leaf_for_grid(self.grid_of(coords))

    # ------------------------------------------------------- balance closure

    def _enqueue_check_split(self, node):
        self._queue.append((0, node))

    def _enqueue_check_merge(self, node):
        if node is not None:
            self._queue.append((1, node))

    def _enqueue_facing_bigger(self, leaf):
        for dir_ in self.dirs:
            f = self._find_facing(leaf, dir_)
            if f is not None and f.depth < leaf.depth and f.children is None:
                self._enqueue_check_split(f)

    def _enqueue_neighbor_merges(self, node):
        for dir_ in self.dirs:
            f = self._find_facing(node, dir_)
            if f is None:
                continue
            if f.children is not None:
                self._enqueue_check_merge(f)
            else:
                self._enqueue_check_merge(f.parent)

    def _facing_demand(self, node):
        """True iff a same-component leaf adjacent to node's cell is deep
        enough to force a leaf of node's size to split (2x for true leaves,
        4x for B leaves, pseudo-leaves count as true)."""
        limit = node.depth + 2
        for dir_ in self.dirs:
            tgt = tuple(node.idx[d] + dir_[d] for d in range(self.dim))
            f = self._facing_cover(node, tgt)
            if f is None or f.depth < node.depth:
                continue
            if self._demand_scan(f, dir_, limit):
                return True
        return False

    def _demand_scan(self, f, dir_, limit):
        back = tuple(-v for v in dir_)
        stack = [f]
        while stack:
            n = stack.pop()
            if n.comp_child is not None:
                if n.depth >= limit:
                    return True
                continue  # inner component is balance-independent
            if n.children is None:
                if n.depth > limit or (n.depth == limit and n.is_true):
                    return True
                continue
            if n.depth >= limit:
                return True  # leaves below are deeper than any allowance
            for pos, kid in enumerate(n.children):
                ok = True
                for d in range(self.dim):
                    b = back[d]
                    bit = (pos >> d) & 1
                    if (b == 1 and not bit) or (b == -1 and bit):
                        ok = False
                        break
                if ok:
                    stack.append(kid)
        return False

    def _check_split(self, node):
        if not node.alive or node.children is not None:
            return
        if not self._facing_demand(node):
            return
        if node.comp_child is not None:
            self._split_compressed(node)
        else:
            self._subdivide(node)

    def _split_compressed(self, node):
        """Push the compressed edge one level down; if the remaining gap
        falls below the compression factor, materialize the whole chain and
        merge the components."""
        target = node.comp_child
        node.comp_child = None
        self._mark_dirty(node)
        tgrid = self.node_grid(target)
        cur = node
        while True:
            pos = self._child_pos(cur, tgrid)
            if target.depth == cur.depth + 1:
                self._subdivide(cur, reuse={pos: target})
                self._wire_seam(target)
                self._enqueue_boundary_checks(target)
                return
            kids = self._subdivide(cur, above={pos: target})
            w = kids[pos]
            w.occupied = True
            w.two_plus = True
            if target.depth - w.depth >= self.gap_depth:
                w.comp_child = target
                target.parent = w
                self._mark_dirty(w)
                return
            cur = w

    def _enqueue_boundary_checks(self, top):
        """Re-check balance along the seam of a freshly merged component."""
        stack = [top]
        while stack:
            n = stack.pop()
            sh = n.depth - top.depth
            on_bdry = False
            for d in range(self.dim):
                low = top.idx[d] << sh
                high = ((top.idx[d] + 1) << sh) - 1
                if n.idx[d] == low or n.idx[d] == high:
                    on_bdry = True
                    break
            if not on_bdry:
                continue
            if n.children is None:
                self._enqueue_check_split(n)
                self._enqueue_facing_bigger(n)
                for dir_ in self.dirs:
                    f = self._find_facing(n, dir_)
                    if f is not None and f.children is None:
                        self._enqueue_check_split(f)
            else:
                stack.extend(n.children)

    def _occupied_children(self, node):
        return [c for c in node.children if c.occupied]

    def _defer_neighbors(self, node, defer):
        for dir_ in self.dirs:
            f = self._find_facing(node, dir_)
            if f is None:
                continue
            if f.children is not None:
                defer.append(f)
            elif f.parent is not None:
                defer.append(f.parent)

    def _check_merge(self, node, defer):
        """Attempt one undo step at node; merges blocked by an outside
        demand are appended to defer for the next closure round."""
        if not node.alive:
            return
        if node.comp_child is not None:
            t = node.comp_child
            if not t.two_plus:
                # a single point (or nothing) no longer justifies compression
                self._absorb_comp(node)
                self._enqueue_check_merge(node.parent)
                self._enqueue_neighbor_merges(node)
                return
            root_ = self._cluster_root(t)
            if root_ is not None and root_ is not t:
                # points below now cluster deeper: re-target the edge
                self._compress_chain(node, root_)
                self._enqueue_check_merge(node.parent)
            return
        if node.children is None:
            return
        if node.two_plus:
            occ = self._occupied_children(node)
            if len(occ) != 1:
                # ancestors may still compress onto this cluster
                self._enqueue_check_merge(node.parent)
                return
            root_ = self._cluster_root(occ[0])
            if root_ is None or root_.depth - node.depth < self.gap_depth:
                # the compressible span may start at an ancestor instead
                self._enqueue_check_merge(node.parent)
                return
            if self._facing_demand(node):
                # partial compression deeper down the chain is still possible
                defer.append(node)
                self._defer_neighbors(node, defer)
                for c in node.children:
                    if c.children is not None or c.comp_child is not None:
                        self._enqueue_check_merge(c)
                return
            self._compress_chain(node, root_)
            self._enqueue_check_merge(node.parent)
            self._enqueue_neighbor_merges(node)
            return
        # at most one point below: the whole subtree collapses to a leaf
        if self._facing_demand(node):
            defer.append(node)
            self._defer_neighbors(node, defer)
            for c in node.children:
                if c.children is not None or c.comp_child is not None:
                    self._enqueue_check_merge(c)
            return
        self._merge_to_leaf(node)
        self._enqueue_check_merge(node.parent)
        self._enqueue_neighbor_merges(node)

    def _cluster_root(self, start):
        """Descend the single-occupancy chain to the cell whose subdivision
        separates points, walking through compressed edges."""
        cur = start
        while True:
            if cur.comp_child is not None:
                cur = cur.comp_child
                continue
            if cur.children is None:
                return None
            occ = self._occupied_children(cur)
            if len(occ) >= 2:
                return cur
            if not occ:
                return None
            cur = occ[0]

    def _is_ancestor(self, anc, node):
        shift = node.depth - anc.depth
        if shift < 0:
            return False
        return all(node.idx[d] >> shift == anc.idx[d] for d in range(self.dim))

    def _drop_subtree(self, top):
        """Remove an entire unoccupied (or single-point) subtree, children
        before parents; returns the stored point found, if any."""
        order = []
        stack = [top]
        while stack:
            x = stack.pop()
            order.append(x)
            if x.children is not None:
                stack.extend(x.children)
            elif x.comp_child is not None:
                stack.append(x.comp_child)
        pt = None
        for x in reversed(order):
            if x.point is not None:
                pt = x.point
            x.children = None
            x.comp_child = None
            self._drop_node(x)
        return pt

    def _merge_to_leaf(self, node):
        """Undo every subdivision below a cell holding at most one point."""
        pt = None
        for c in node.children:
            got = self._drop_subtree(c)
            if got is not None:
                pt = got
        node.children = None
        node.point = pt
        if pt is not None:
            pt.node = node
        self._mark_dirty(node)

    def _absorb_comp(self, node):
        t = node.comp_child
        pt = self._drop_subtree(t)
        node.comp_child = None
        node.point = pt
        if pt is not None:
            pt.node = node
        self._mark_dirty(node)
        self._update_flags_up(node)

    def _compress_chain(self, node, root_):
        """Replace everything between node and its cluster root (all of it
        point-free) by a single compressed edge."""
        self._unlink_subtree_boundary(root_)
        plan = []
        cur = node
        while cur is not root_:
            if cur.comp_child is not None:
                plan.append((cur, None, cur.comp_child))
                cur = cur.comp_child
                continue
            nxt = None
            sibs = []
            for c in cur.children:
                if c is root_ or self._is_ancestor(c, root_):
                    nxt = c
                else:
                    sibs.append(c)
            plan.append((cur, sibs, nxt))
            cur = nxt
        for cell, sibs, nxt in plan:
            if sibs is not None:
                for sib in sibs:
                    self._drop_subtree(sib)
            if cell is not node:
                cell.children = None
                cell.comp_child = None
                self._drop_node(cell, unary_child=nxt)
            else:
                cell.children = None
                cell.comp_child = None
        node.comp_child = root_
        root_.parent = node
        self._mark_dirty(node)

    def _unlink_subtree_boundary(self, top):
        stack = [top]
        while stack:
            n = stack.pop()
            for dir_ in list(n.links.keys()):
                nb = n.links[dir_]
                if not self._is_ancestor(top, nb):
                    nb.links.pop(tuple(-v for v in dir_), None)
                    del n.links[dir_]
            if n.children is not None:
                stack.extend(n.children)
            elif n.comp_child is not None:
                stack.append(n.comp_child)




    def _flush_queue(self):
        """Run split/merge checks to a fixpoint.

        A merge blocked by other structure is deferred together with its
        blockers and retried in rounds; each retry round requires progress
        (a structural change), so the loop terminates."""
        q = self._queue
        while True:
            defer = []
            checked = set()
            before = self._struct_version
            while q:
                kind, node = q.popleft()
                if kind == 0:
                    self._check_split(node)
                elif id(node) not in checked:
                    # at most one merge attempt per node per round
                    checked.add(id(node))
                    self._check_merge(node, defer)
            if self._struct_version == before or not defer:
                break
            seen = set()
            for n in defer:
                if n.alive and id(n) not in seen:
                    seen.add(id(n))
                    q.append((1, n))

    # ------------------------------------------------------------ flag climb

    def _recompute_flags(self, n):
        if n.comp_child is not None:
            t = n.comp_child
            return t.occupied, t.two_plus
        if n.children is not None:
            occ = 0
            tp = False
            for c in n.children:
                if c.occupied:
                    occ += 1
                if c.two_plus:
                    tp = True
            return occ > 0, tp or occ >= 2
        return n.point is not None, False

    def _update_flags_up(self, start):
        n = start
        while n is not None:
            occ, tp = self._recompute_flags(n)
            if occ == n.occupied and tp == n.two_plus:
                break
            n.occupied = occ
            changed = tp != n.two_plus
            n.two_plus = tp
            if changed:
                self._kind_flip(n, tp)
            n = n.parent

    def _kind_flip(self, node, now_two_plus):
        if node.children is not None:
            targets = node.children
        elif node.comp_child is not None:
            targets = (node.comp_child,)
        else:
            return
        for c in targets:
            if c.is_true == now_two_plus:
                continue
            c.is_true = now_two_plus
            if now_two_plus:
                if c.children is None:
                    self._enqueue_facing_bigger(c)
            else:
                self._enqueue_neighbor_merges(c)
        if not now_two_plus:
            self._enqueue_check_merge(node)

    # ------------------------------------------------------------ public ops

    def insert_point(self, coords, hint):
        """Store a point; hint must be the leaf or compressed pseudo-leaf
        whose exclusive area contains it."""
        coords = tuple(float(v) for v in coords)
        grid = self.grid_of(coords)
        if coords in self._by_coords:
            raise DuplicatePoint(f"{coords} already stored")
        if hint is None or not hint.alive or not self._node_contains_grid(hint, grid):
            raise ValueError("hint does not contain the point")
        if hint.children is not None:
            raise ValueError("hint is not a leaf")
        ref = PointRef(coords, grid)
        self._place(hint, ref)
        self._by_coords[coords] = ref
        self.point_count += 1
        self._commit()
        return ref

    def _place(self, leaf, ref):
        if leaf.comp_child is not None:
            old_target = leaf.comp_child
            leaf.comp_child = None
            self._mark_dirty(leaf)
            self._build_down(leaf, [("point", ref), ("subtree", old_target)])
            if leaf.parent is not None:
                self._update_flags_up(leaf.parent)
        elif leaf.point is None:
            leaf.point = ref
            ref.node = leaf
            self._update_flags_up(leaf)
        else:
            other = leaf.point
            leaf.point = None
            self._build_down(leaf, [("point", ref), ("point", other)])
            if leaf.parent is not None:
                self._update_flags_up(leaf.parent)

    def _part_grid(self, part):
        kind, payload = part
        if kind == "point":
            return payload.grid
        return self.node_grid(payload)

    def _part_depth(self, part):
        return MAX_GRID_DEPTH if part[0] == "point" else part[1].depth

    def _attach_single(self, container, part):
        kind, payload = part
        if kind == "point":
            container.point = payload
            payload.node = container
            container.occupied = True
            return
        t = payload
        tgrid = self.node_grid(t)
        cur = container
        while True:
            cur.occupied = True
            cur.two_plus = True
            if t.depth - cur.depth >= self.gap_depth:
                cur.comp_child = t
                t.parent = cur
                self._mark_dirty(cur)
                return
            pos = self._child_pos(cur, tgrid)
            if t.depth == cur.depth + 1:
                self._subdivide(cur, reuse={pos: t})
                for c in cur.children:
                    c.is_true = True
                self._wire_seam(t)
                self._enqueue_boundary_checks(t)
                return
            kids = self._subdivide(cur, above={pos: t})
            for c in kids:
                c.is_true = True
            cur = kids[pos]

    def _build_down(self, container, parts):
        """Build canonical structure under a gutted container holding the
        given parts (stored points and at most one detached subtree)."""
        if len(parts) == 1:
            self._attach_single(container, parts[0])
            return
        sub = None
        for p in parts:
            if p[0] == "subtree":
                sub = p[1]
        ga = self._part_grid(parts[0])
        gb = self._part_grid(parts[1])
        sep = self._sep_depth(ga, gb)
        sep = min(sep, self._part_depth(parts[0]) - 1, self._part_depth(parts[1]) - 1)
        if sep > SEP_DEPTH_LIMIT:
            raise PrecisionLimit("points too close to separate")
        cur = container
        if sep - cur.depth >= self.gap_depth:
            idx = tuple(g >> (MAX_GRID_DEPTH - sep) for g in ga)
            d_node = self._new_node(sep, idx, cur, above_child=sub)
            d_node.is_true = True
            cur.comp_child = d_node
            cur.occupied = True
            cur.two_plus = True
            self._mark_dirty(cur)
            cur = d_node
        else:
            while cur.depth < sep:
                pos = self._child_pos(cur, ga)
                kids = self._subdivide(
                    cur, above=({pos: sub} if sub is not None else None)
                )
                for c in kids:
                    c.is_true = True
                cur.occupied = True
                cur.two_plus = True
                cur = kids[pos]
        cur.occupied = True
        cur.two_plus = True
        above = None
        reuse = None
        if sub is not None:
            pos_sub = self._child_pos(cur, self.node_grid(sub))
            if sub.depth == cur.depth + 1:
                reuse = {pos_sub: sub}
            else:
                above = {pos_sub: sub}
        kids = self._subdivide(cur, reuse=reuse, above=above)
        for c in kids:
            c.is_true = True
        for part in parts:
            pos = self._child_pos(cur, self._part_grid(part))
            if reuse is not None and part[0] == "subtree":
                self._wire_seam(part[1])
                self._enqueue_boundary_checks(part[1])
            else:
                self._attach_single(kids[pos], part)

    def delete_point(self, ref):
        if ref.node is None or not ref.node.alive or ref.node.point is not ref:
            raise UnknownPoint(f"{ref} is not stored")
        node = ref.node
        self._unplace(node, ref)
        self._commit()

    def _unplace(self, node, ref):
        node.point = None
        ref.node = None
        del self._by_coords[ref.coords]
        self.point_count -= 1
        self._update_flags_up(node)
        self._enqueue_neighbor_merges(node)
        # the deletion can enable merges or deeper compression anywhere on
        # the single-occupancy chain above, not just at the first ancestor
        n = node.parent
        while n is not None:
            self._enqueue_check_merge(n)
            if n.comp_child is not None:
                occ_cnt = 1 if n.comp_child.occupied else 0
            elif n.children is not None:
                occ_cnt = sum(1 for c in n.children if c.occupied)
            else:
                occ_cnt = 0
            if occ_cnt >= 2:
                break
            n = n.parent

    def move_point(self, ref, new_coords):
        """Relocate a stored point via the up/level-link/down walk."""
        if ref.node is None or not ref.node.alive or ref.node.point is not ref:
            raise UnknownPoint(f"{ref} is not stored")
        new_coords = tuple(float(v) for v in new_coords)
        grid = self.grid_of(new_coords)
        if new_coords == ref.coords:
            self.counters.cells_touched += 1
            return ref.node
        if new_coords in self._by_coords:
            raise DuplicatePoint(f"{new_coords} already stored")
        target = self._walk_to(ref.node, grid)
        if target is ref.node:
            del self._by_coords[ref.coords]
            ref.coords = new_coords
            ref.grid = grid
            self._by_coords[new_coords] = ref
            return ref.node
        anchor = []
        n = target
        while n is not None:
            anchor.append(n)
            n = n.parent
        old_node = ref.node
        self._unplace(old_node, ref)
        self._flush_queue()
        base = None
        for n in anchor:
            if n.alive:
                base = n
                break
        leaf = self.leaf_for_grid(grid, start=base)
        ref.coords = new_coords
        ref.grid = grid
        self._place(leaf, ref)
        self._by_coords[new_coords] = ref
        self.point_count += 1
        self._commit()
        return ref.node

    def _walk_to(self, start, grid):
        """Up along parents until the cell is near the target, across via a
        level link, then down to the covering leaf or pseudo-leaf."""
        cur = start
        counters = self.counters
        steps = 0
        while True:
            steps += 1
            counters.cells_touched += 1
            if self._node_contains_grid(cur, grid):
                break
            shift = MAX_GRID_DEPTH - cur.depth
            delta = []
            ok = True
            for d in range(self.dim):
                dd = (grid[d] >> shift) - cur.idx[d]
                if dd < -1 or dd > 1:
                    ok = False
                    break
                delta.append(dd)
            if ok:
                nb = cur.links.get(tuple(delta))
                if nb is not None:
                    cur = nb
                    continue
            if cur.parent is None:
                break
            cur = cur.parent
        while True:
            if cur.comp_child is not None:
                c = cur.comp_child
                if self._node_contains_grid(c, grid):
                    cur = c
                    steps += 1
                    counters.cells_touched += 1
                    continue
                break
            if cur.children is None:
                break
            cur = cur.children[self._child_pos(cur, grid)]
            steps += 1
            counters.cells_touched += 1
        self.last_walk_len = steps
        return cur

    # ------------------------------------------------------------ inspection

    def nodes(self):
        out = []
        stack = [self.root]
        while stack:
            n = stack.pop()
            out.append(n)
            if n.children is not None:
                stack.extend(n.children)
            elif n.comp_child is not None:
                stack.append(n.comp_child)
        return out

    def leaves(self):
        return [n for n in self.nodes() if n.children is None]

    def check_invariants(self, size_factor=8):
        """Full structural scan; returns a list of violation strings."""
        errs = []
        nodes = self.nodes()
        by_cell = {}
        comp_root_of = {}

        def comp_root(n):
            while not self.is_component_root(n):
                n = n.parent
            return n

        for n in nodes:
            by_cell[(n.depth, n.idx)] = n
            comp_root_of[id(n)] = comp_root(n)
            if not n.alive:
                errs.append(f"{n}: dead node reachable")
            if n.children is not None and n.comp_child is not None:
                errs.append(f"{n}: both children and compressed child")
            if n.children is not None:
                if len(n.children) != self.degree:
                    errs.append(f"{n}: wrong child count")
                for pos, c in enumerate(n.children):
                    want = tuple(
                        n.idx[d] * 2 + ((pos >> d) & 1) for d in range(self.dim)
                    )
                    if c.idx != want or c.depth != n.depth + 1 or c.parent is not n:
                        errs.append(f"{n}: child {pos} misplaced")
            if n.comp_child is not None:
                t = n.comp_child
                if t.parent is not n:
                    errs.append(f"{n}: compressed child parent broken")
                if t.depth - n.depth < self.gap_depth:
                    errs.append(f"{n}: compression gap below factor")
                if not self._is_ancestor(n, t):
                    errs.append(f"{n}: compressed child not aligned")
            occ, tp = self._recompute_flags_deep(n)
            if occ != n.occupied or tp != n.two_plus:
                errs.append(f"{n}: stale occupancy flags")
            want_true = n.parent is None or n.parent.two_plus
            if n.is_true != want_true:
                errs.append(f"{n}: kind flag wrong (is_true={n.is_true})")
            if n.point is not None:
                if n.children is not None or n.comp_child is not None:
                    errs.append(f"{n}: stores a point but is not a leaf")
                if n.point.node is not n:
                    errs.append(f"{n}: point backlink broken")
                if self._by_coords.get(n.point.coords) is not n.point:
                    errs.append(f"{n}: point not indexed")
        for n in nodes:
            for dir_, nb in n.links.items():
                if not nb.alive:
                    errs.append(f"{n}: link to dead node")
                    continue
                if nb.depth != n.depth:
                    errs.append(f"{n}: link depth mismatch")
                want = tuple(n.idx[d] + dir_[d] for d in range(self.dim))
                if nb.idx != want:
                    errs.append(f"{n}: link to wrong cell")
                if nb.links.get(tuple(-v for v in dir_)) is not n:
                    errs.append(f"{n}: link not symmetric")
                if comp_root_of[id(nb)] is not comp_root_of[id(n)]:
                    errs.append(f"{n}: link crosses components")
            for dir_ in self.dirs:
                want = tuple(n.idx[d] + dir_[d] for d in range(self.dim))
                other = by_cell.get((n.depth, want))
                if (
                    other is not None
                    and comp_root_of[id(other)] is comp_root_of[id(n)]
                    and n.links.get(dir_) is not other
                ):
                    errs.append(f"{n}: missing link {dir_}")
        for n in nodes:
            if n.children is not None:
                continue
            alpha_exp = 1 if n.is_true else 2
            for dir_ in self.dirs:
                f = self._find_facing(n, dir_)
                if f is None:
                    continue
                if f.children is None and n.depth - f.depth > alpha_exp:
                    errs.append(
                        f"{n}: {'true' if n.is_true else 'B'} leaf has "
                        f"{2 ** (n.depth - f.depth)}x neighbor {f}"
                    )
        if self.node_count != len(nodes):
            errs.append(f"node_count {self.node_count} != {len(nodes)}")
        # linear size with a flat allowance for the deep chains a handful
        # of close point pairs can legitimately materialize
        allowance = 16 * self.gap_depth * self.degree
        if len(nodes) > size_factor * max(1, self.point_count) + allowance:
            errs.append(
                f"tree size {len(nodes)} exceeds {size_factor}x points "
                f"({self.point_count})"
            )
        if self.point_count != len(self._by_coords):
            errs.append("point index size mismatch")
        return errs

    def _recompute_flags_deep(self, n):
        if n.comp_child is not None:
            return self._recompute_flags_deep(n.comp_child)
        if n.children is not None:
            occ = 0
            tp = False
            for c in n.children:
                co, ct = self._recompute_flags_deep(c)
                if co:
                    occ += 1
                tp = tp or ct
            return occ > 0, tp or occ >= 2
        return n.point is not None, False
