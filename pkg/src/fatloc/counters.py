"""Operation counters: empirical stand-ins for the asymptotic cost bounds.

A single Counters object is shared by a structure and everything wired to
it (quadtree, edge-oracle tree, marked-ancestor forest).  Counts are
monotone within an operation; callers snapshot around an operation to get
per-op deltas.
"""

FIELDS = (
    "edges_examined",
    "cells_touched",
    "tags_changed",
    "marks_changed",
    "ma_nodes_touched",
    "candidates_tested",
)


class Counters:
    __slots__ = FIELDS

    def __init__(self):
        self.reset()

    def reset(self):
        for f in FIELDS:
            setattr(self, f, 0)

    def snapshot(self):
        return {f: getattr(self, f) for f in FIELDS}

    def delta(self, before):
        return {f: getattr(self, f) - before[f] for f in FIELDS}

    def __repr__(self):
        inner = ", ".join(f"{f}={getattr(self, f)}" for f in FIELDS)
        return f"Counters({inner})"
