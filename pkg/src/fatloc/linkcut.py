"""Link-cut forest over rooted trees (splay-based, amortized).

Supports link (attach a tree root below a node), cut (detach a node from
its parent) and find_root.  Preferred paths are splay trees ordered by
depth with the root-most node leftmost; a detached right child keeps its
parent pointer as a path-parent.  No reroot/evert is needed for rooted
usage.
"""

from __future__ import annotations


class LCNode:
    __slots__ = ("parent", "left", "right", "payload")

    def __init__(self, payload=None):
        self.parent = None
        self.left = None
        self.right = None
        self.payload = payload


class LinkCutForest:
    __slots__ = ("touches",)

    def __init__(self):
        self.touches = 0

    def _is_root(self, x):
        p = x.parent
        return p is None or (p.left is not x and p.right is not x)

    def _rotate(self, x):
        p = x.parent
        g = p.parent
        if not self._is_root(p):
            if g.left is p:
                g.left = x
            else:
                g.right = x
        x.parent = g
        if p.left is x:
            p.left = x.right
            if x.right is not None:
                x.right.parent = p
            x.right = p
        else:
            p.right = x.left
            if x.left is not None:
                x.left.parent = p
            x.left = p
        p.parent = x

    def _splay(self, x):
        self.touches += 1
        while not self._is_root(x):
            p = x.parent
            self.touches += 1
            if self._is_root(p):
                self._rotate(x)
            else:
                g = p.parent
                if (g.left is p) == (p.left is x):
                    self._rotate(p)
                    self._rotate(x)
                else:
                    self._rotate(x)
                    self._rotate(x)

    def access(self, x):
        self._splay(x)
        if x.right is not None:
            x.right = None  # detached child keeps x as its path-parent
        while x.parent is not None:
            p = x.parent
            self._splay(p)
            p.right = x
            self._splay(x)
        return x

    def find_root(self, x):
        self.access(x)
        while x.left is not None:
            x = x.left
            self.touches += 1
        self._splay(x)
        return x

    def link(self, child, parent):
        """Attach child (a tree root) below parent."""
        self.access(child)
        self.access(parent)
        child.parent = parent

    def cut(self, x):
        """Detach x from its tree parent (no-op at a root)."""
        self.access(x)
        if x.left is not None:
            x.left.parent = None
            x.left = None
