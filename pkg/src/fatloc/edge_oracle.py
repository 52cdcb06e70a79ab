"""Search structure over the quadtree giving logarithmic point location.

The leaves and compressed pseudo-leaves of the quadtree tile the root
square; in space-filling (Morton) order they form a sorted list of zones.
Point location is a search over that list, answered at every internal node
by a constant-time containment test.  The list is indexed by a (2,4)-tree
whose lowest level is collapsed into buckets of Theta(log N) zone items
kept as plain linked-list runs, so a structural update given its location
is a constant number of list operations; oversized or underfull buckets
are repaired incrementally, a fixed number of item moves per update.

Each quadtree edge (identified by its child endpoint) has an EdgeRecord;
records of leaf edges own the zone items stored in the buckets.
"""

from __future__ import annotations

from collections import deque

from .errors import OutOfBounds, UnknownEdge
from .quadtree import MAX_GRID_DEPTH, TreeHooks

_SPREAD16 = None


def _spread16_table():
    global _SPREAD16
    if _SPREAD16 is None:
        table = []
        for v in range(1 << 16):
            s = 0
            for b in range(16):
                if v & (1 << b):
                    s |= 1 << (2 * b)
            table.append(s)
        _SPREAD16 = table
    return _SPREAD16


def _morton2(ix, iy):
    t = _spread16_table()
    sx = t[ix & 0xFFFF] | (t[(ix >> 16) & 0xFFFF] << 32) | (t[ix >> 32] << 64)
    sy = t[iy & 0xFFFF] | (t[(iy >> 16) & 0xFFFF] << 32) | (t[iy >> 32] << 64)
    return sx | (sy << 1)


class EdgeRecord:
    """One per quadtree edge, identified by the child endpoint."""

    __slots__ = ("child_node",)

    def __init__(self, child_node):
        self.child_node = child_node


class ZoneItem:
    __slots__ = ("node", "zlo", "zhi", "prev", "next", "bucket")

    def __init__(self, node, zlo, zhi):
        self.node = node
        self.zlo = zlo
        self.zhi = zhi
        self.prev = None
        self.next = None
        self.bucket = None

    def __repr__(self):
        return f"<Zone {self.node} [{self.zlo},{self.zhi})>"


class _Bucket:
    __slots__ = ("head", "tail", "size", "parent", "hi", "alive", "split_sib")

    def __init__(self):
        self.head = None
        self.tail = None
        self.size = 0
        self.parent = None
        self.hi = 0
        self.alive = True
        self.split_sib = None


class _INode:
    __slots__ = ("children", "parent", "hi")

    def __init__(self, children):
        self.children = children
        self.parent = None
        self.hi = children[-1].hi
        for c in children:
            c.parent = self


class EdgeOracleTree(TreeHooks):
    """Point-location index over a QuadTree; also usable as its hooks."""

    def __init__(self, tree):
        self.tree = tree
        self.counters = tree.counters
        self._root = _Bucket()
        self._head = None
        self._tail = None
        self._n_items = 0
        self._jobs = deque()
        self._cursor = None

    # ------------------------------------------------------------- geometry

    def _zspan(self, node):
        dim = self.tree.dim
        shift = dim * (MAX_GRID_DEPTH - node.depth)
        if dim == 1:
            zlo = node.idx[0] << shift
        else:
            zlo = _morton2(node.idx[0], node.idx[1]) << shift
        return zlo, zlo + (1 << shift)

    def _zones_of(self, node):
        """Current zone intervals covered exclusively by a node."""
        if node.children is not None:
            return []
        lo, hi = self._zspan(node)
        if node.comp_child is None:
            return [(node, lo, hi)]
        clo, chi = self._zspan(node.comp_child)
        out = []
        if lo < clo:
            out.append((node, lo, clo))
        if chi < hi:
            out.append((node, chi, hi))
        return out

    def _zpoint(self, grid):
        if self.tree.dim == 1:
            return grid[0]
        return _morton2(grid[0], grid[1])

    # ------------------------------------------------------------ tree hooks

    def node_created(self, node, above_child=None):
        self.on_edge_inserted(EdgeRecord(node))

    def node_removing(self, node, unary_child=None):
        if node.eot_record is not None:
            self.on_edge_deleted(node.eot_record)

    def committed(self, dirty_nodes, created_nodes):
        old_items = []
        for n in dirty_nodes:
            if n.eot_items:
                old_items.extend(n.eot_items)
            n.eot_items = None
        specs = []
        for n in dirty_nodes:
            if n.alive:
                specs.extend(self._zones_of(n))
        for n in created_nodes:
            specs.extend(self._zones_of(n))
        self._splice(old_items, specs)

    # --------------------------------------------------------- record registry

    def on_edge_inserted(self, record):
        """Register a new edge; its zones are placed by the same update."""
        record.child_node.eot_record = record

    def on_edge_deleted(self, record):
        node = record.child_node
        if node.eot_record is not record:
            raise UnknownEdge(f"record for {node} is not registered")
        node.eot_record = None

    # ---------------------------------------------------------------- search

    def locate(self, coords):
        """Quadtree leaf/pseudo-leaf whose exclusive area contains coords."""
        return self.locate_item(coords)[0]

    def locate_item(self, coords):
        grid = self.tree.grid_of(tuple(float(v) for v in coords))
        z = self._zpoint(grid)
        item = self._locate_z(z)
        if item is None:
            raise RuntimeError(f"zone coverage broken at {coords}")
        return item.node, item

    def _locate_z(self, z):
        if self._n_items == 1:
            return self._head
        counters = self.counters
        n = self._root
        while isinstance(n, _INode):
            kids = n.children
            last = len(kids) - 1
            for i, c in enumerate(kids):
                if i == last:
                    n = c
                    break
                counters.edges_examined += 1
                if z < c.hi:
                    n = c
                    break
        it = n.head
        while it is not None and it.bucket is n:
            counters.edges_examined += 1
            if z < it.zhi:
                return it if it.zlo <= z else None
            it = it.next
        return None

    # ----------------------------------------------------------- list splice

    def _splice(self, old_items, new_specs):
        if not old_items:
            if new_specs:
                # initial attachment: the root zone
                assert self._n_items == 0 and len(new_specs) == 1
                node, lo, hi = new_specs[0]
                it = ZoneItem(node, lo, hi)
                b = self._root if isinstance(self._root, _Bucket) else None
                self._head = self._tail = it
                it.bucket = b
                b.head = b.tail = it
                b.size = 1
                b.hi = hi
                self._n_items = 1
                node.eot_items = [it]
            return
        old_items.sort(key=lambda it: it.zlo)
        new_specs.sort(key=lambda s: s[1])
        runs = []
        run = [old_items[0]]
        for it in old_items[1:]:
            if run[-1].next is it:
                run.append(it)
            else:
                runs.append(run)
                run = [it]
        runs.append(run)
        si = 0
        for run in runs:
            hi = run[-1].zhi
            specs = []
            while si < len(new_specs) and new_specs[si][1] < hi:
                specs.append(new_specs[si])
                si += 1
            self._replace_run(run, specs)
        assert si == len(new_specs), "zone specs outside replaced spans"
        # the repair budget covers what this update added, plus headroom
        self._advance_jobs(budget=8 + 2 * len(new_specs))
        self._cursor_step()

    def _replace_run(self, run, specs):
        prev = run[0].prev
        nxt = run[-1].next
        for it in run:
            self._detach(it)
        items = []
        for node, lo, hi in specs:
            it = ZoneItem(node, lo, hi)
            if node.eot_items is None:
                node.eot_items = []
            node.eot_items.append(it)
            items.append(it)
        if not items:
            return
        # link into the global list
        first, last = items[0], items[-1]
        for a, b in zip(items, items[1:]):
            a.next = b
            b.prev = a
        first.prev = prev
        last.next = nxt
        if prev is not None:
            prev.next = first
        else:
            self._head = first
        if nxt is not None:
            nxt.prev = last
        else:
            self._tail = last
        # bucket assignment: join the neighboring run
        if prev is not None:
            b = prev.bucket
            if b.tail is prev:
                b.tail = last
        elif nxt is not None:
            b = nxt.bucket
            if b.head is nxt:
                b.head = first
        else:
            b = _Bucket()
            self._root = b
            b.head = first
            b.tail = last
        for it in items:
            it.bucket = b
        b.size += len(items)
        self._n_items += len(items)
        self._bubble_hi(b)
        self._check_size(b)

    def _detach(self, it):
        b = it.bucket
        if it.prev is not None:
            it.prev.next = it.next
        else:
            self._head = it.next
        if it.next is not None:
            it.next.prev = it.prev
        else:
            self._tail = it.prev
        b.size -= 1
        self._n_items -= 1
        if b.size == 0:
            b.head = b.tail = None
            self._remove_bucket(b)
        else:
            if b.head is it:
                b.head = it.next
            if b.tail is it:
                b.tail = it.prev
                self._bubble_hi(b)
        it.bucket = None
        it.prev = it.next = None

    # ----------------------------------------------------- (2,4)-tree repair

    def _bubble_hi(self, node):
        while node is not None:
            if isinstance(node, _Bucket):
                hi = node.tail.zhi if node.tail is not None else 0
            else:
                hi = node.children[-1].hi
            if node.hi == hi:
                break
            node.hi = hi
            node = node.parent

    def _remove_bucket(self, b):
        b.alive = False
        p = b.parent
        if p is None:
            # b was the only bucket; a replacement root is created by the
            # next insertion within the same update
            return
        p.children.remove(b)
        b.parent = None
        self._bubble_hi(p)
        self._fix_underflow(p)

    def _fix_underflow(self, p):
        while p is not None and len(p.children) < 2:
            parent = p.parent
            if parent is None:
                if len(p.children) == 1:
                    self._root = p.children[0]
                    self._root.parent = None
                return
            i = parent.children.index(p)
            sib = parent.children[i - 1] if i > 0 else parent.children[i + 1]
            if len(sib.children) > 2:
                if i > 0:
                    moved = sib.children.pop()
                    p.children.insert(0, moved)
                else:
                    moved = sib.children.pop(0)
                    p.children.append(moved)
                moved.parent = p
                self._bubble_hi(sib)
                self._bubble_hi(p)
                return
            # merge p into sib
            if i > 0:
                sib.children.extend(p.children)
            else:
                sib.children[0:0] = p.children
            for c in p.children:
                c.parent = sib
            parent.children.remove(p)
            self._bubble_hi(sib)
            self._bubble_hi(parent)
            p = parent

    def _insert_after(self, ref, newnode):
        p = ref.parent
        if p is None:
            self._root = _INode([ref, newnode])
            return
        i = p.children.index(ref)
        p.children.insert(i + 1, newnode)
        newnode.parent = p
        self._bubble_hi(p)
        while p is not None and len(p.children) > 4:
            right = _INode(p.children[2:])
            p.children = p.children[:2]
            for c in p.children:
                c.parent = p
            p.hi = p.children[-1].hi
            gp = p.parent
            if gp is None:
                self._root = _INode([p, right])
                return
            j = gp.children.index(p)
            gp.children.insert(j + 1, right)
            right.parent = gp
            self._bubble_hi(gp)
            p = gp

    # -------------------------------------------------------- size discipline

    def _bounds(self):
        n = max(2, self._n_items)
        lg = n.bit_length() - 1  # floor(log2 n)
        upper = 2 * (lg + (0 if n == 1 << lg else 1))
        upper = max(upper, 4)
        lower = max(1, lg // 2)
        return lower, upper

    def _check_size(self, b):
        lower, upper = self._bounds()
        if b.size > upper:
            self._jobs.append(("split", b))
        elif b.size < lower and b.parent is not None:
            self._jobs.append(("shrink", b))

    def _advance_jobs(self, budget=4):
        jobs = self._jobs
        while budget > 0 and jobs:
            kind, b = jobs[0]
            if not b.alive:
                jobs.popleft()
                continue
            lower, upper = self._bounds()
            if kind == "split":
                target = max(1, (lower + upper) // 2)
                if b.size <= upper:
                    jobs.popleft()
                    b.split_sib = None
                    continue
                if b.split_sib is None or not b.split_sib.alive:
                    sib = _Bucket()
                    b.split_sib = sib
                    self._insert_after(b, sib)
                sib = b.split_sib
                while budget > 0 and b.size > target:
                    it = b.tail
                    b.tail = it.prev
                    b.size -= 1
                    it.bucket = sib
                    sib.head = it
                    if sib.tail is None:
                        sib.tail = it
                    sib.size += 1
                    budget -= 1
                self._bubble_hi(b)
                self._bubble_hi(sib)
                if b.size <= target:
                    jobs.popleft()
                    b.split_sib = None
                    self._check_size(sib)
            else:
                if b.size >= max(1, self._bounds()[0]) or b.parent is None:
                    jobs.popleft()
                    continue
                nb = None
                if b.head is not None and b.head.prev is not None:
                    nb = b.head.prev.bucket
                elif b.tail is not None and b.tail.next is not None:
                    nb = b.tail.next.bucket
                if nb is None or nb is b:
                    jobs.popleft()
                    continue
                take_from_prev = b.head is not None and b.head.prev is not None
                while budget > 0 and b.size > 0:
                    if take_from_prev:
                        it = b.head
                        b.head = it.next
                        nb.tail = it
                    else:
                        it = b.tail
                        b.tail = it.prev
                        nb.head = it
                    b.size -= 1
                    it.bucket = nb
                    nb.size += 1
                    budget -= 1
                if b.size == 0:
                    b.head = b.tail = None
                    self._remove_bucket(b)
                    jobs.popleft()
                self._bubble_hi(nb)
                if b.alive:
                    self._bubble_hi(b)
                self._check_size(nb)

    def _cursor_step(self):
        """Roving re-target check: one bucket per update."""
        c = self._cursor
        if c is None or not c.alive:
            c = self._head.bucket if self._head is not None else None
            if c is None:
                self._cursor = None
                return
        self._check_size(c)
        nxt = c.tail.next.bucket if (c.tail is not None and c.tail.next is not None) else None
        self._cursor = nxt

    # ------------------------------------------------------------- inspection

    def items(self):
        out = []
        it = self._head
        while it is not None:
            out.append(it)
            it = it.next
        return out

    def check_invariants(self):
        errs = []
        items = self.items()
        if len(items) != self._n_items:
            errs.append(f"item count {len(items)} != {self._n_items}")
        prev_hi = None
        for it in items:
            if it.zlo >= it.zhi:
                errs.append(f"{it}: empty zone")
            if prev_hi is not None and it.zlo != prev_hi:
                errs.append(f"{it}: gap or overlap in coverage")
            prev_hi = it.zhi
            if it.node.eot_items is None or it not in it.node.eot_items:
                errs.append(f"{it}: node does not own the item")
            if not it.node.alive:
                errs.append(f"{it}: dead node")
        if items:
            full = 1 << (self.tree.dim * MAX_GRID_DEPTH)
            if items[0].zlo != 0 or items[-1].zhi != full:
                errs.append("coverage does not span the root")
        # bucket segmentation
        seen = 0
        it = self._head
        while it is not None:
            b = it.bucket
            if b.head is not it:
                errs.append(f"{it}: bucket head mismatch")
            cnt = 0
            while it is not None and it.bucket is b:
                cnt += 1
                last = it
                it = it.next
            if cnt != b.size:
                errs.append(f"bucket size {b.size} != run {cnt}")
            if b.tail is not last:
                errs.append("bucket tail mismatch")
            if b.hi != last.zhi:
                errs.append("bucket hi stale")
            seen += cnt
        if seen != self._n_items:
            errs.append("bucket runs do not cover the list")
        # index structure
        def walk(n):
            if isinstance(n, _Bucket):
                return [n], n.hi
            if len(n.children) < 2 and n is not self._root:
                errs.append("internal fan-out below 2")
            if len(n.children) > 4:
                errs.append("internal fan-out above 4")
            out = []
            hi = 0
            for c in n.children:
                if c.parent is not n:
                    errs.append("child parent backlink broken")
                got, hi = walk(c)
                out.extend(got)
            if n.hi != hi:
                errs.append("internal hi stale")
            return out, hi

        if self._n_items:
            buckets, _ = walk(self._root)
            order = []
            it = self._head
            while it is not None:
                if not order or order[-1] is not it.bucket:
                    order.append(it.bucket)
                it = it.next
            if buckets != order:
                errs.append("index bucket order differs from list order")
        return errs
