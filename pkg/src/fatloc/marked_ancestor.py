"""Lowest-marked-ancestor queries over a dynamic rooted tree.

The host tree is partitioned into micro-trees, each holding a bounded
number of heavy (branching) nodes.  Within a micro-tree the nodes are
decomposed into vertical paths with no interior branching; each path is
summarized by a path-node, and the path-nodes of one micro-tree form a
small tree indexed by a link-cut forest in which a marked path is cut from
its parent, so find-root lands on the nearest marked path.  A path keeps
its marked nodes in a list ordered by position, answering the within-path
part by bisection.

Marks are keyed by an instance id, so one forest serves many logical
marked-ancestor trees over the same topology; per-instance link-cut state
is cached per micro-tree and rebuilt lazily after topology changes.

The same module provides NaiveMarkedAncestor, the walk-up reference used
as the correctness oracle.
"""

from __future__ import annotations

from bisect import bisect_right, insort

from .counters import Counters
from .errors import RemoveMarked, RemoveNonLeaf, UnknownNode
from .linkcut import LCNode, LinkCutForest


class MANode:
    __slots__ = (
        "parent",
        "children",
        "micro",
        "path",
        "path_pos",
        "marks",
        "alive",
        "payload",
    )

    def __init__(self, parent):
        self.parent = parent
        self.children = []
        self.micro = None
        self.path = None
        self.path_pos = 0
        self.marks = set()
        self.alive = True
        self.payload = None

    def __repr__(self):
        return f"<MANode marks={sorted(self.marks)}>"


class HeavyPath:
    __slots__ = ("nodes", "parent_path", "micro", "marked")

    def __init__(self, micro):
        self.nodes = []
        self.parent_path = None
        self.micro = micro
        self.marked = {}  # instance -> nodes sorted by path_pos

    def renumber(self, start=0):
        for i in range(start, len(self.nodes)):
            self.nodes[i].path_pos = i

    def marked_at_or_above(self, instance, pos):
        lst = self.marked.get(instance)
        if not lst:
            return None
        i = bisect_right(lst, pos, key=lambda n: n.path_pos)
        return lst[i - 1] if i else None

    def deepest_marked(self, instance):
        lst = self.marked.get(instance)
        return lst[-1] if lst else None


class MicroTree:
    __slots__ = ("root", "paths", "heavy_count", "version", "mark_counts", "lc_cache")

    def __init__(self, root):
        self.root = root
        self.paths = []
        self.heavy_count = 0
        self.version = 0
        self.mark_counts = {}  # instance -> number of marked nodes inside
        self.lc_cache = {}     # instance -> (version, {path: LCNode})

    def bump(self):
        self.version += 1
        if self.lc_cache:
            self.lc_cache.clear()


class MarkedAncestorForest:
    """Pointer-structure marked-ancestor answering; one instance id per
    logical marked set."""

    def __init__(self, counters=None):
        self.counters = counters if counters is not None else Counters()
        self.lc = LinkCutForest()
        self.size = 0
        self.epoch_size = 8
        self.roots = []
        self.total_marks = {}  # instance -> total marked nodes

    # --------------------------------------------------------------- budgets

    def _heavy_budget(self):
        n = max(2, self.epoch_size)
        lg = (n - 1).bit_length()
        return max(4, lg)

    def _path_budget(self):
        return 2 * self._heavy_budget() + 2

    def _maybe_epoch(self):
        if self.size > 2 * self.epoch_size or 2 * self.size < self.epoch_size:
            self.epoch_size = max(8, self.size)
            self._rebuild_all()

    # ------------------------------------------------------------ structure

    def add_root(self):
        node = MANode(None)
        micro = MicroTree(node)
        self._new_singleton_path(node, micro, None)
        self.roots.append(node)
        self.size += 1
        return node

    def _new_singleton_path(self, node, micro, parent_path):
        path = HeavyPath(micro)
        path.nodes.append(node)
        path.parent_path = parent_path
        node.micro = micro
        node.path = path
        node.path_pos = 0
        micro.paths.append(path)
        micro.bump()
        return path

    def _micro_children(self, node):
        m = node.micro
        return [c for c in node.children if c.micro is m]

    def add_leaf(self, parent):
        if parent is None or not parent.alive:
            raise UnknownNode("parent is not in the forest")
        node = MANode(parent)
        parent.children.append(node)
        self._attach(node, parent)
        self.size += 1
        self._maybe_epoch()
        return node

    def _attach(self, node, parent):
        micro = parent.micro
        mc = self._micro_children(parent)  # node not yet assigned a micro
        will_be_heavy = len(mc) == 1
        over = (
            micro.heavy_count + (1 if will_be_heavy else 0) > self._heavy_budget()
            or len(micro.paths) + (2 if will_be_heavy else 1) > self._path_budget()
        )
        if over:
            m2 = MicroTree(node)
            self._new_singleton_path(node, m2, None)
            return
        if not mc:
            # parent is a micro-leaf: the chain extends
            p = parent.path
            node.micro = micro
            node.path = p
            node.path_pos = len(p.nodes)
            p.nodes.append(node)
            micro.bump()
            return
        if will_be_heavy:
            micro.heavy_count += 1
            self._split_path_below(parent)
        self._new_singleton_path(node, micro, parent.path)

    def _split_path_below(self, node):
        """Make node the bottom of its path (its in-path successors become
        a separate path)."""
        p = node.path
        i = node.path_pos
        if i == len(p.nodes) - 1:
            return
        micro = p.micro
        tail = HeavyPath(micro)
        tail.nodes = p.nodes[i + 1:]
        tail.parent_path = p
        del p.nodes[i + 1:]
        for j, nd in enumerate(tail.nodes):
            nd.path = tail
            nd.path_pos = j
        micro.paths.append(tail)
        # re-home marked entries and reparent child paths of the moved nodes
        tail_set = set(map(id, tail.nodes))
        for inst, lst in list(p.marked.items()):
            stay = [nd for nd in lst if id(nd) not in tail_set]
            moved = [nd for nd in lst if id(nd) in tail_set]
            if moved:
                tail.marked[inst] = moved
                if stay:
                    p.marked[inst] = stay
                else:
                    del p.marked[inst]
        for q in micro.paths:
            if q is not p and q is not tail and q.parent_path is p:
                top_parent = q.nodes[0].parent
                if top_parent is not None and id(top_parent) in tail_set:
                    q.parent_path = tail
        micro.bump()

    def add_unary(self, child):
        """Splice a new node into the edge above child."""
        if child is None or not child.alive:
            raise UnknownNode("child is not in the forest")
        parent = child.parent
        if parent is None:
            raise UnknownNode("cannot splice above a root")
        node = MANode(parent)
        node.children.append(child)
        parent.children.remove(child)
        parent.children.append(node)
        child.parent = node
        micro = parent.micro
        if child.micro is not micro:
            # the child hangs in another micro-tree: structurally a leaf here
            self._attach(node, parent)
        else:
            p = child.path
            if p.nodes[0] is child:
                # child tops a path: node becomes the new top
                node.micro = micro
                node.path = p
                p.nodes.insert(0, node)
                p.renumber(0)
                micro.bump()
            else:
                # parent and child are consecutive within one path
                idx = child.path_pos
                node.micro = micro
                node.path = child.path
                child.path.nodes.insert(idx, node)
                child.path.renumber(idx)
                micro.bump()
        self.size += 1
        self._maybe_epoch()
        return node

    def remove_leaf(self, node):
        if node is None or not node.alive:
            raise UnknownNode("node is not in the forest")
        if node.children:
            raise RemoveNonLeaf(f"{node} has children")
        if node.marks:
            raise RemoveMarked(f"{node} is marked")
        self._detach_from_path(node)
        if node.parent is not None:
            node.parent.children.remove(node)
            m = node.parent.micro
            if node.micro is m and len(self._micro_children(node.parent)) == 1:
                m.heavy_count = max(0, m.heavy_count - 1)
        else:
            self.roots.remove(node)
        node.alive = False
        self.size -= 1
        self._maybe_epoch()

    def remove_unary(self, node):
        if node is None or not node.alive:
            raise UnknownNode("node is not in the forest")
        if len(node.children) != 1:
            raise RemoveNonLeaf(f"{node} does not have exactly one child")
        if node.marks:
            raise RemoveMarked(f"{node} is marked")
        child = node.children[0]
        parent = node.parent
        if parent is None:
            raise UnknownNode("cannot splice out a root")
        self._detach_from_path(node, splice_child=child)
        parent.children.remove(node)
        parent.children.append(child)
        child.parent = parent
        node.alive = False
        self.size -= 1
        if child.micro is not parent.micro and node.micro is parent.micro:
            # parent lost an in-micro child; it may stop being heavy
            if len(self._micro_children(parent)) == 1:
                parent.micro.heavy_count = max(0, parent.micro.heavy_count - 1)
        self._maybe_epoch()

    def _detach_from_path(self, node, splice_child=None):
        p = node.path
        micro = p.micro
        i = node.path_pos
        del p.nodes[i]
        p.renumber(i)
        if not p.nodes:
            micro.paths.remove(p)
            if splice_child is not None and splice_child.micro is micro:
                splice_child.path.parent_path = p.parent_path
            if micro.root is node:
                if splice_child is not None and splice_child.micro is micro:
                    micro.root = splice_child
                # otherwise the micro-tree dies with its last node
        else:
            if micro.root is node:
                micro.root = p.nodes[0]
        micro.bump()
        node.path = None

    # ------------------------------------------------------------------ marks

    def mark(self, node, instance=0):
        if node is None or not node.alive:
            raise UnknownNode("node is not in the forest")
        if instance in node.marks:
            return
        node.marks.add(instance)
        p = node.path
        lst = p.marked.get(instance)
        first_on_path = not lst
        if lst is None:
            lst = p.marked[instance] = []
        insort(lst, node, key=lambda n: n.path_pos)
        micro = p.micro
        micro.mark_counts[instance] = micro.mark_counts.get(instance, 0) + 1
        self.total_marks[instance] = self.total_marks.get(instance, 0) + 1
        if first_on_path:
            cached = micro.lc_cache.get(instance)
            if cached is not None and cached[0] == micro.version:
                if p.parent_path is not None:
                    self.lc.cut(cached[1][id(p)])
        self.counters.marks_changed += 1

    def unmark(self, node, instance=0):
        if node is None or not node.alive:
            raise UnknownNode("node is not in the forest")
        if instance not in node.marks:
            return
        node.marks.discard(instance)
        p = node.path
        lst = p.marked[instance]
        lst.remove(node)
        micro = p.micro
        micro.mark_counts[instance] -= 1
        if micro.mark_counts[instance] == 0:
            del micro.mark_counts[instance]
        self.total_marks[instance] -= 1
        if self.total_marks[instance] == 0:
            del self.total_marks[instance]
        if not lst:
            del p.marked[instance]
            cached = micro.lc_cache.get(instance)
            if cached is not None and cached[0] == micro.version:
                if p.parent_path is not None:
                    parent_lc = cached[1][id(p.parent_path)]
                    self.lc.link(cached[1][id(p)], parent_lc)
        self.counters.marks_changed += 1

    # ----------------------------------------------------------------- query

    def _lc_state(self, micro, instance):
        cached = micro.lc_cache.get(instance)
        if cached is not None and cached[0] == micro.version:
            return cached[1]
        nodes = {}
        for p in micro.paths:
            nodes[id(p)] = LCNode(p)
        for p in micro.paths:
            if p.parent_path is not None and instance not in p.marked:
                self.lc.link(nodes[id(p)], nodes[id(p.parent_path)])
        micro.lc_cache[instance] = (micro.version, nodes)
        return nodes

    def lowest_marked_ancestor(self, node, instance=0):
        if node is None or not node.alive:
            raise UnknownNode("node is not in the forest")
        if not self.total_marks.get(instance):
            return None
        counters = self.counters
        lc = self.lc
        cur = node
        while cur is not None:
            micro = cur.micro
            counters.ma_nodes_touched += 1
            if micro.mark_counts.get(instance):
                p = cur.path
                counters.ma_nodes_touched += 1
                hit = p.marked_at_or_above(instance, cur.path_pos)
                if hit is not None:
                    return hit
                if p.parent_path is not None:
                    state = self._lc_state(micro, instance)
                    before = lc.touches
                    root_lc = lc.find_root(state[id(p.parent_path)])
                    counters.ma_nodes_touched += lc.touches - before
                    root_path = root_lc.payload
                    hit = root_path.deepest_marked(instance)
                    if hit is not None:
                        return hit
            cur = micro.root.parent
        return None

    # ------------------------------------------------------------ inspection

    def _rebuild_all(self):
        """Stop-the-world repartition into fresh micro-trees."""
        budget_h = self._heavy_budget()
        budget_p = self._path_budget()
        for root in self.roots:
            order = []
            stack = [root]
            while stack:
                n = stack.pop()
                order.append(n)
                stack.extend(n.children)
            # greedy parents-first micro assignment (fresh MicroTree objects,
            # so stale pointers of unassigned nodes never collide)
            micros = []
            path_count = {}
            for n in order:
                par = n.parent
                if n is root or par.micro not in path_count:
                    m = MicroTree(n)
                    n.micro = m
                    micros.append(m)
                    path_count[m] = 1
                    continue
                m = par.micro
                assigned = sum(
                    1 for c in par.children if c is not n and c.micro is m
                )
                will_heavy = assigned == 1
                delta = 2 if will_heavy else (0 if assigned == 0 else 1)
                if (
                    m.heavy_count + (1 if will_heavy else 0) > budget_h
                    or path_count[m] + delta > budget_p
                ):
                    m2 = MicroTree(n)
                    n.micro = m2
                    micros.append(m2)
                    path_count[m2] = 1
                else:
                    n.micro = m
                    path_count[m] += delta
                    if will_heavy:
                        m.heavy_count += 1
            # rebuild paths, marks, and counts per micro
            for n in order:
                n.path = None
            for m in micros:
                m.heavy_count = 0
            for n in order:  # parents first
                m = n.micro
                par = n.parent
                in_same = par is not None and par.micro is m
                if in_same and len(self._micro_children(par)) == 1:
                    p = par.path
                    n.path = p
                    n.path_pos = len(p.nodes)
                    p.nodes.append(n)
                else:
                    path = HeavyPath(m)
                    path.nodes.append(n)
                    path.parent_path = par.path if in_same else None
                    n.path = path
                    n.path_pos = 0
                    m.paths.append(path)
            for n in order:
                m = n.micro
                if len(self._micro_children(n)) >= 2:
                    m.heavy_count += 1
                for inst in n.marks:
                    lst = n.path.marked.setdefault(inst, [])
                    insort(lst, n, key=lambda x: x.path_pos)
                    m.mark_counts[inst] = m.mark_counts.get(inst, 0) + 1

    def check_invariants(self):
        errs = []
        for root in self.roots:
            order = []
            stack = [root]
            while stack:
                n = stack.pop()
                order.append(n)
                stack.extend(n.children)
            seen_paths = set()
            for n in order:
                if not n.alive:
                    errs.append("dead node reachable")
                for c in n.children:
                    if c.parent is not n:
                        errs.append("broken parent pointer")
                p = n.path
                if p is None or n.path_pos >= len(p.nodes) or p.nodes[n.path_pos] is not n:
                    errs.append("path position broken")
                    continue
                seen_paths.add(id(p))
                if n.micro is not p.micro:
                    errs.append("node micro differs from path micro")
            for n in order:
                p = n.path
                i = n.path_pos
                mc = self._micro_children(n)
                if i < len(p.nodes) - 1:
                    if len(mc) != 1 or mc[0] is not p.nodes[i + 1]:
                        errs.append("interior path node is branching")
                if i > 0 and n.parent is not p.nodes[i - 1]:
                    errs.append("path nodes not a vertical chain")
            micros = {}
            for n in order:
                micros.setdefault(id(n.micro), n.micro)
            budget = self._heavy_budget()
            for m in micros.values():
                heavy = sum(
                    1
                    for p in m.paths
                    for n in p.nodes
                    if len(self._micro_children(n)) >= 2
                )
                if heavy != m.heavy_count:
                    errs.append(f"heavy count stale ({m.heavy_count} != {heavy})")
                if heavy > budget:
                    errs.append(f"micro-tree has {heavy} heavy nodes > {budget}")
                counts = {}
                for p in m.paths:
                    for inst, lst in p.marked.items():
                        counts[inst] = counts.get(inst, 0) + len(lst)
                        if [x.path_pos for x in lst] != sorted(x.path_pos for x in lst):
                            errs.append("marked list out of order")
                        for nd in lst:
                            if inst not in nd.marks:
                                errs.append("marked list has unmarked node")
                    if p.parent_path is not None:
                        top_parent = p.nodes[0].parent
                        if top_parent is None or top_parent.path is not p.parent_path:
                            errs.append("parent path pointer wrong")
                if counts != m.mark_counts:
                    errs.append(f"mark counts stale {m.mark_counts} != {counts}")
            for n in order:
                for inst in n.marks:
                    lst = n.path.marked.get(inst, [])
                    if n not in lst:
                        errs.append("node mark missing from path list")
        return errs


class NaiveMarkedAncestor:
    """Walk-up reference with the same surface."""

    class Node:
        __slots__ = ("parent", "children", "marks", "alive")

        def __init__(self, parent):
            self.parent = parent
            self.children = []
            self.marks = set()
            self.alive = True

    def __init__(self):
        self.size = 0

    def add_root(self):
        n = self.Node(None)
        self.size += 1
        return n

    def add_leaf(self, parent):
        if parent is None or not parent.alive:
            raise UnknownNode("parent is not in the forest")
        n = self.Node(parent)
        parent.children.append(n)
        self.size += 1
        return n

    def add_unary(self, child):
        if child is None or not child.alive or child.parent is None:
            raise UnknownNode("bad splice")
        n = self.Node(child.parent)
        n.children.append(child)
        child.parent.children.remove(child)
        child.parent.children.append(n)
        child.parent = n
        self.size += 1
        return n

    def remove_leaf(self, node):
        if node is None or not node.alive:
            raise UnknownNode("node is not in the forest")
        if node.children:
            raise RemoveNonLeaf("not a leaf")
        if node.marks:
            raise RemoveMarked("marked")
        if node.parent is not None:
            node.parent.children.remove(node)
        node.alive = False
        self.size -= 1

    def remove_unary(self, node):
        if node is None or not node.alive or node.parent is None:
            raise UnknownNode("bad splice")
        if len(node.children) != 1:
            raise RemoveNonLeaf("not unary")
        if node.marks:
            raise RemoveMarked("marked")
        child = node.children[0]
        node.parent.children.remove(node)
        node.parent.children.append(child)
        child.parent = node.parent
        node.alive = False
        self.size -= 1

    def mark(self, node, instance=0):
        if node is None or not node.alive:
            raise UnknownNode("node is not in the forest")
        node.marks.add(instance)

    def unmark(self, node, instance=0):
        if node is None or not node.alive:
            raise UnknownNode("node is not in the forest")
        node.marks.discard(instance)

    def lowest_marked_ancestor(self, node, instance=0):
        if node is None or not node.alive:
            raise UnknownNode("node is not in the forest")
        cur = node
        while cur is not None:
            if instance in cur.marks:
                return cur
            cur = cur.parent
        return None
