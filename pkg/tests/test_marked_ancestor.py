import math
import random

import pytest

from fatloc.errors import RemoveMarked, RemoveNonLeaf, UnknownNode
from fatloc.marked_ancestor import MarkedAncestorForest, NaiveMarkedAncestor


class Mirror:
    """Drives the real forest and the walk-up oracle in lockstep."""

    def __init__(self, seed):
        self.rng = random.Random(seed)
        self.f = MarkedAncestorForest()
        self.g = NaiveMarkedAncestor()
        self.fn = [self.f.add_root()]
        self.gn = [self.g.add_root()]

    def add_leaf(self, i):
        self.fn.append(self.f.add_leaf(self.fn[i]))
        self.gn.append(self.g.add_leaf(self.gn[i]))

    def add_unary(self, j):
        self.fn.append(self.f.add_unary(self.fn[j]))
        self.gn.append(self.g.add_unary(self.gn[j]))

    def query(self, j, inst=0):
        a = self.f.lowest_marked_ancestor(self.fn[j], inst)
        b = self.g.lowest_marked_ancestor(self.gn[j], inst)
        ai = self.fn.index(a) if a is not None else None
        bi = self.gn.index(b) if b is not None else None
        assert ai == bi, f"query({j}, {inst}) -> {ai} != oracle {bi}"
        return ai


class TestBasics:
    def test_mark_root_answers_everything(self):
        m = Mirror(1)
        for _ in range(20):
            m.add_leaf(m.rng.randrange(len(m.fn)))
        m.f.mark(m.fn[0])
        m.g.mark(m.gn[0])
        for j in range(len(m.fn)):
            assert m.query(j) == 0

    def test_mark_unmark_roundtrip(self):
        m = Mirror(2)
        for _ in range(10):
            m.add_leaf(m.rng.randrange(len(m.fn)))
        v = 5
        m.f.mark(m.fn[v]); m.g.mark(m.gn[v])
        m.f.unmark(m.fn[v]); m.g.unmark(m.gn[v])
        for j in range(len(m.fn)):
            assert m.query(j) is None
        assert not m.f.total_marks

    def test_chain_example(self):
        f = MarkedAncestorForest()
        a = f.add_root()
        b = f.add_leaf(a)
        c = f.add_leaf(b)
        d = f.add_leaf(c)
        f.mark(b)
        assert f.lowest_marked_ancestor(d) is b
        assert f.lowest_marked_ancestor(b) is b  # not necessarily proper
        assert f.lowest_marked_ancestor(a) is None

    def test_no_marks_anywhere(self):
        f = MarkedAncestorForest()
        a = f.add_root()
        assert f.lowest_marked_ancestor(a) is None

    def test_idempotent_mark(self):
        f = MarkedAncestorForest()
        a = f.add_root()
        f.mark(a, 3)
        f.mark(a, 3)
        assert f.total_marks[3] == 1
        f.unmark(a, 3)
        f.unmark(a, 3)
        assert 3 not in f.total_marks


class TestStructureOps:
    def test_add_then_remove_leaf(self):
        f = MarkedAncestorForest()
        a = f.add_root()
        b = f.add_leaf(a)
        f.remove_leaf(b)
        assert f.size == 1
        assert not f.check_invariants()

    def test_remove_marked_rejected(self):
        f = MarkedAncestorForest()
        a = f.add_root()
        b = f.add_leaf(a)
        f.mark(b, 1)
        with pytest.raises(RemoveMarked):
            f.remove_leaf(b)

    def test_remove_non_leaf_rejected(self):
        f = MarkedAncestorForest()
        a = f.add_root()
        b = f.add_leaf(a)
        f.add_leaf(b)
        with pytest.raises(RemoveNonLeaf):
            f.remove_leaf(b)

    def test_unknown_node(self):
        f = MarkedAncestorForest()
        a = f.add_root()
        b = f.add_leaf(a)
        f.remove_leaf(b)
        with pytest.raises(UnknownNode):
            f.mark(b)

    def test_unary_splice_preserves_answers(self):
        m = Mirror(3)
        for _ in range(30):
            m.add_leaf(m.rng.randrange(len(m.fn)))
        for j in (5, 9, 20):
            m.f.mark(m.fn[j], 0)
            m.g.mark(m.gn[j], 0)
        for j in (3, 7, 11):
            if m.gn[j].parent is not None:
                m.add_unary(j)
        for j in range(len(m.fn)):
            m.query(j)


class TestSoak:
    @pytest.mark.parametrize("seed", [42, 99])
    def test_randomized_oracle_agreement(self, seed):
        m = Mirror(seed)
        rng = m.rng
        K = 3
        for step in range(4000):
            op = rng.random()
            i = rng.randrange(len(m.fn))
            inst = rng.randrange(K)
            if op < 0.35:
                m.add_leaf(i)
            elif op < 0.45 and len(m.fn) > 1:
                j = rng.randrange(1, len(m.fn))
                if m.gn[j].parent is not None:
                    m.add_unary(j)
            elif op < 0.55:
                m.f.mark(m.fn[i], inst)
                m.g.mark(m.gn[i], inst)
            elif op < 0.65:
                m.f.unmark(m.fn[i], inst)
                m.g.unmark(m.gn[i], inst)
            elif op < 0.75 and len(m.fn) > 1:
                j = rng.randrange(1, len(m.fn))
                gj = m.gn[j]
                if not gj.children and not gj.marks:
                    m.f.remove_leaf(m.fn[j])
                    m.g.remove_leaf(m.gn[j])
                    m.fn.pop(j)
                    m.gn.pop(j)
                elif len(gj.children) == 1 and not gj.marks and gj.parent is not None:
                    m.f.remove_unary(m.fn[j])
                    m.g.remove_unary(m.gn[j])
                    m.fn.pop(j)
                    m.gn.pop(j)
            else:
                m.query(rng.randrange(len(m.fn)), inst)
            if step % 500 == 499:
                errs = m.f.check_invariants()
                assert not errs, errs[:6]

    def test_query_touch_bound(self):
        rng = random.Random(7)
        f = MarkedAncestorForest()
        nodes = [f.add_root()]
        while len(nodes) < 4096:
            nodes.append(f.add_leaf(nodes[rng.randrange(len(nodes))]))
        for _ in range(400):
            f.mark(nodes[rng.randrange(len(nodes))])
        bound = 4 * math.log2(len(nodes))
        worst = 0
        for _ in range(3000):
            f.counters.reset()
            f.lowest_marked_ancestor(nodes[rng.randrange(len(nodes))])
            worst = max(worst, f.counters.ma_nodes_touched)
        assert worst <= bound, (worst, bound)

    def test_work_trend_grows_slowly(self):
        # mean structure touches per query should grow slower than log2 n
        rng = random.Random(13)
        means = []
        for exp in (10, 12, 14):
            n = 1 << exp
            f = MarkedAncestorForest()
            nodes = [f.add_root()]
            while len(nodes) < n:
                nodes.append(f.add_leaf(nodes[rng.randrange(len(nodes))]))
            for _ in range(n // 10):
                f.mark(nodes[rng.randrange(len(nodes))])
            f.counters.reset()
            q = 1500
            for _ in range(q):
                f.lowest_marked_ancestor(nodes[rng.randrange(len(nodes))])
            means.append(f.counters.ma_nodes_touched / q)
        # ratio of means grows slower than the ratio of log n
        assert means[-1] <= means[0] * (14 / 10)
