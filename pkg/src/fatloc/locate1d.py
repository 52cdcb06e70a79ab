"""Point location over disjoint intervals on a line with local updates.

Interval midpoints live in a 1D compressed balanced quadtree; a search
tree over its leaf subdivision answers point location in O(log n).  A
local update (replace an interval by a similar one) moves the midpoint by
an up/level-link/down walk whose length depends on the similarity factor
only, not on n.

Candidate collection at query time scans from the located leaf to the
first midpoint-carrying leaf on each side.  Disjointness makes this exact:
any cell strictly between a query point and the midpoint of its containing
interval lies inside that interval, so it can hold no other midpoint, and
the first midpoint found on a side either answers the query or rules that
side out.
"""

from __future__ import annotations

from .counters import Counters
from .edge_oracle import EdgeOracleTree
from .errors import (
    DuplicatePoint,
    NotSimilar,
    OutOfBounds,
    OverlappingInput,
    UnknownHandle,
)
from .geometry import Interval1, interval_union_span
from .quadtree import QuadTree, TreeHooks


class IntervalHandle:
    """Stable identity of a stored interval."""

    __slots__ = ("interval", "ref", "active")

    def __init__(self, interval):
        self.interval = interval
        self.ref = None
        self.active = False

    def __repr__(self):
        return f"<IntervalHandle [{self.interval.lo}, {self.interval.hi}] active={self.active}>"


class _Hook(TreeHooks):
    __slots__ = ("eot",)

    def __init__(self):
        self.eot = None

    def node_created(self, node, above_child=None):
        if self.eot is not None:
            self.eot.node_created(node, above_child)

    def node_removing(self, node, unary_child=None):
        if self.eot is not None:
            self.eot.node_removing(node, unary_child)

    def committed(self, dirty, created):
        if self.eot is not None:
            self.eot.committed(dirty, created)


class IntervalSet:
    def __init__(self, root: Interval1, a=16, r_nbr=1, verify=False, counters=None):
        self.root_interval = root
        self.counters = counters if counters is not None else Counters()
        self.r_nbr = r_nbr  # minimum scan radius; kept for configuration
        self.verify = verify
        self._hook = _Hook()
        self.tree = QuadTree(
            1, (root.lo,), root.diameter(), a=a,
            counters=self.counters, hooks=self._hook,
        )
        self.eot = EdgeOracleTree(self.tree)
        self._hook.eot = self.eot
        self.eot.node_created(self.tree.root)
        self.eot.committed([], [self.tree.root])
        self.handles = []

    @staticmethod
    def build(intervals, root: Interval1, a=16, r_nbr=1, verify=False):
        """Construct a set from pairwise-disjoint intervals inside root."""
        ordered = sorted(range(len(intervals)), key=lambda i: intervals[i].lo)
        for j in range(1, len(ordered)):
            a_iv = intervals[ordered[j - 1]]
            b_iv = intervals[ordered[j]]
            if a_iv.overlaps(b_iv):
                raise OverlappingInput(f"{a_iv} overlaps {b_iv}")
        s = IntervalSet(root, a=a, r_nbr=r_nbr, verify=verify)
        for iv in intervals:
            s.insert(iv)
        return s

    def __len__(self):
        return len(self.handles)

    # ------------------------------------------------------------------- ops

    def _check_inside_root(self, iv):
        if not (self.root_interval.lo <= iv.lo and iv.hi <= self.root_interval.hi):
            raise OutOfBounds(f"{iv} outside root {self.root_interval}")

    def _check_disjoint(self, iv, skip=None):
        for h in self.handles:
            if h is skip:
                continue
            if h.interval.overlaps(iv):
                raise OverlappingInput(f"{iv} overlaps {h.interval}")

    def insert(self, interval: Interval1) -> IntervalHandle:
        self._check_inside_root(interval)
        if self.verify:
            self._check_disjoint(interval)
        h = IntervalHandle(interval)
        mid = interval.midpoint()
        hint = self.eot.locate((mid,))
        try:
            ref = self.tree.insert_point((mid,), hint)
        except DuplicatePoint:
            # two disjoint intervals cannot share a midpoint
            raise OverlappingInput(f"midpoint of {interval} already stored")
        ref.payload = h
        h.ref = ref
        h.active = True
        self.handles.append(h)
        return h

    def delete(self, h: IntervalHandle):
        if not isinstance(h, IntervalHandle) or not h.active:
            raise UnknownHandle(f"{h}")
        self.tree.delete_point(h.ref)
        h.active = False
        h.ref = None
        self.handles.remove(h)

    def local_update(self, h: IntervalHandle, new: Interval1, rho: float):
        if not isinstance(h, IntervalHandle) or not h.active:
            raise UnknownHandle(f"{h}")
        old = h.interval
        if interval_union_span(old, new) > rho * min(old.diameter(), new.diameter()):
            raise NotSimilar(f"{old} -> {new} is not {rho}-similar")
        self._check_inside_root(new)
        if self.verify:
            self._check_disjoint(new, skip=h)
        self.tree.move_point(h.ref, (new.midpoint(),))
        h.interval = new

    def query(self, x: float):
        """The unique handle whose interval contains x, or None."""
        if not self.root_interval.lo <= x <= self.root_interval.hi:
            raise OutOfBounds(f"{x} outside root {self.root_interval}")
        counters = self.counters
        if x == self.root_interval.hi:
            # half-open cells exclude the root maximum; use the last leaf
            node, item = self._last_leaf()
        else:
            node, item = self.eot.locate_item((x,))
        if node.point is not None:
            h = node.point.payload
            counters.candidates_tested += 1
            if h.interval.contains(x):
                return h
        for step in (self._scan_left, self._scan_right):
            h = step(item, counters)
            if h is not None and h.interval.contains(x):
                return h
        return None

    def _last_leaf(self):
        it = self.eot._tail
        return it.node, it

    def _scan_left(self, item, counters):
        it = item.prev
        while it is not None:
            if it.node.point is not None:
                counters.candidates_tested += 1
                return it.node.point.payload
            it = it.prev
        return None

    def _scan_right(self, item, counters):
        it = item.next
        while it is not None:
            if it.node.point is not None:
                counters.candidates_tested += 1
                return it.node.point.payload
            it = it.next
        return None

    # ------------------------------------------------------------ inspection

    def check_invariants(self, size_factor=16):
        errs = self.tree.check_invariants(size_factor=size_factor)
        errs += self.eot.check_invariants()
        ivs = sorted((h.interval for h in self.handles), key=lambda iv: iv.lo)
        for a_iv, b_iv in zip(ivs, ivs[1:]):
            if a_iv.overlaps(b_iv):
                errs.append(f"stored intervals overlap: {a_iv}, {b_iv}")
        for h in self.handles:
            node = h.ref.node
            side = self.tree.cell_side(node)
            if h.interval.diameter() > 4.0 * side * (1.0 + 1e-12):
                errs.append(
                    f"interval {h.interval} wider than 4x its leaf side {side}"
                )
        return errs
