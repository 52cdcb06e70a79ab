"""Scene files, workload generation, and the brute-force query oracle.

A scene file is JSON-lines: the first line holds the configuration, every
following line one object::

    {"config": {"dim": 2, "root": [x, y, side], "beta": 1.0, "a": 16}}
    {"type": "disk", "cx": 0.25, "cy": 0.5, "r": 0.05}
    {"type": "polygon", "vertices": [[x, y], ...]}
    {"type": "interval", "lo": 0.1, "hi": 0.2}      (dim 1; root = [lo, side])

Generated scenes are disks (intervals in 1D) with radii log-uniform across
scales, placed by dart throwing with rejection against a spatial hash; all
randomness comes from the seeded splitmix64 generator, so identical
(config, seed) pairs reproduce byte-identical workloads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError, PlacementFailure, ValidationError
from .geometry import ConvexRegion, Interval1, Point2, is_rho_similar
from .rng import SplitMix64

RADIUS_MIN_EXP = -14  # radii are log-uniform in [2^-14, 2^-4] * root side
RADIUS_MAX_EXP = -4
RADIUS_SPAN = 2.0 ** (RADIUS_MAX_EXP - RADIUS_MIN_EXP)  # 2^10 dynamic range


def _radius_cap(n, dim, side):
    """Largest radius that keeps n log-uniform objects placeable.

    The nominal 2^-4 cap is kept for small n; beyond that the cap shrinks
    so the expected total measure stays a fixed fraction of the root
    (length in 1D, area in 2D), preserving the 2^10 size spread."""
    nominal = side * 2.0 ** RADIUS_MAX_EXP
    if n <= 1:
        return nominal
    if dim == 1:
        return min(nominal, side * 1.0 / n)
    return min(nominal, side * 0.8 / math.sqrt(n))


@dataclass
class SceneConfig:
    dim: int = 2
    root: tuple = (0.0, 0.0, 1.0)  # (x, y, side) or (lo, side) for dim 1
    beta: float = 1.0
    rho: float = 4.0
    a: int = 16
    seed: int = 0
    r_nbr: int = 1

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError(f"dimension must be 1 or 2, got {self.dim}")
        if self.beta < 1.0:
            raise ValidationError(f"beta must be >= 1, got {self.beta}")
        if self.rho < 1.0:
            raise ValidationError(f"rho must be >= 1, got {self.rho}")
        if self.a < 8:
            raise ValidationError(f"compression factor must be >= 8, got {self.a}")

    @property
    def root_lo(self):
        return tuple(self.root[:-1])

    @property
    def root_side(self):
        return float(self.root[-1])


def parse_scene(path, full=False):
    """(SceneConfig, objects) from a scene file.

    Thickness and bounds are always validated; disjointness by a sweep in
    1D always, pairwise in 2D (up to 10^4 objects) only when full is set.
    """
    cfg = None
    objects = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as e:
                raise ParseError(lineno, f"invalid JSON: {e.msg}")
            if lineno == 1 or (cfg is None and "config" in doc):
                if "config" not in doc:
                    raise ParseError(lineno, "first line must hold the config")
                c = doc["config"]
                try:
                    cfg = SceneConfig(
                        dim=int(c.get("dim", 2)),
                        root=tuple(float(v) for v in c["root"]),
                        beta=float(c.get("beta", 1.0)),
                        rho=float(c.get("rho", 4.0)),
                        a=int(c.get("a", 16)),
                        seed=int(c.get("seed", 0)),
                        r_nbr=int(c.get("r_nbr", 1)),
                    )
                except (KeyError, TypeError) as e:
                    raise ParseError(lineno, f"bad config: {e}")
                want = 2 if cfg.dim == 1 else 3
                if len(cfg.root) != want:
                    raise ParseError(lineno, f"root needs {want} numbers")
                continue
            try:
                objects.append(_parse_object(doc, cfg.dim))
            except (KeyError, TypeError, ValueError) as e:
                raise ParseError(lineno, f"bad object: {e}")
    if cfg is None:
        raise ParseError(1, "empty scene file")
    _validate(cfg, objects, full)
    return cfg, objects


def _parse_object(doc, dim):
    kind = doc["type"]
    if dim == 1:
        if kind != "interval":
            raise ValueError(f"dim 1 scenes hold intervals, got {kind!r}")
        return Interval1(float(doc["lo"]), float(doc["hi"]))
    if kind == "disk":
        return ConvexRegion.disk(
            Point2(float(doc["cx"]), float(doc["cy"])), float(doc["r"])
        )
    if kind == "polygon":
        return ConvexRegion.polygon(doc["vertices"])
    raise ValueError(f"unknown object type {kind!r}")


def _validate(cfg, objects, full):
    if cfg.dim == 1:
        lo, side = cfg.root
        for i, iv in enumerate(objects):
            if iv.lo < lo or iv.hi > lo + side:
                raise ValidationError(f"object {i}: {iv} outside root")
        order = sorted(range(len(objects)), key=lambda i: objects[i].lo)
        for j in range(1, len(order)):
            a, b = objects[order[j - 1]], objects[order[j]]
            if a.overlaps(b):
                raise ValidationError(
                    f"objects {order[j - 1]} and {order[j]} overlap"
                )
        return
    x0, y0, side = cfg.root
    for i, r in enumerate(objects):
        if r.thickness() > cfg.beta * (1 + 1e-12):
            raise ValidationError(
                f"object {i}: thickness {r.thickness():.3f} > beta {cfg.beta}"
            )
        if not (
            x0 <= r.rep.x - r.r_outer
            and r.rep.x + r.r_outer <= x0 + side
            and y0 <= r.rep.y - r.r_outer
            and r.rep.y + r.r_outer <= y0 + side
        ):
            # outer-disk check is conservative; fall back to exact bounds
            from .geometry import CellExtent, region_inside_cell

            cell = CellExtent(Point2(x0, y0), side, 0)
            if not region_inside_cell(r, cell):
                raise ValidationError(f"object {i}: {r!r} outside root")
    if full and len(objects) <= 10_000:
        from .locate2d import _regions_overlap

        for i in range(len(objects)):
            for j in range(i + 1, len(objects)):
                if _regions_overlap(objects[i], objects[j]):
                    raise ValidationError(f"objects {i} and {j} overlap")


def write_scene(path, cfg: SceneConfig, objects):
    with open(path, "w") as fh:
        c = {"dim": cfg.dim, "root": list(cfg.root), "beta": cfg.beta,
             "a": cfg.a, "rho": cfg.rho, "seed": cfg.seed, "r_nbr": cfg.r_nbr}
        fh.write(json.dumps({"config": c}) + "\n")
        for obj in objects:
            if isinstance(obj, Interval1):
                fh.write(json.dumps({"type": "interval", "lo": obj.lo, "hi": obj.hi}) + "\n")
            elif obj.kind == "disk":
                fh.write(json.dumps(
                    {"type": "disk", "cx": obj.center.x, "cy": obj.center.y, "r": obj.radius}
                ) + "\n")
            else:
                fh.write(json.dumps(
                    {"type": "polygon", "vertices": [list(v) for v in obj.vertices]}
                ) + "\n")


# ---------------------------------------------------------------- generation

class _HashGrid:
    """Uniform grid over the root square for disjointness rejection."""

    def __init__(self, dim, lo, side, cell):
        self.dim = dim
        self.lo = lo
        self.cell = cell
        self.buckets = {}

    def _key(self, coords):
        return tuple(int((coords[d] - self.lo[d]) / self.cell) for d in range(self.dim))

    def neighbors(self, coords):
        key = self._key(coords)
        rng_ = range(-1, 2)
        if self.dim == 1:
            for dx in rng_:
                yield from self.buckets.get((key[0] + dx,), ())
        else:
            for dx in rng_:
                for dy in rng_:
                    yield from self.buckets.get((key[0] + dx, key[1] + dy), ())

    def add(self, coords, payload):
        self.buckets.setdefault(self._key(coords), []).append(payload)


def gen_scene(n, beta, seed, dim=2, root=None):
    """n pairwise-disjoint disks (intervals in 1D), deterministic per seed."""
    if root is None:
        root = (0.0, 1.0) if dim == 1 else (0.0, 0.0, 1.0)
    lo = tuple(root[:-1])
    side = float(root[-1])
    rng = SplitMix64(seed)
    rmax = _radius_cap(n, dim, side)
    grid = _HashGrid(dim, lo, side, cell=2.0 * rmax)
    out = []
    budget = 1000 * max(1, n)
    lg_lo = math.log(rmax / RADIUS_SPAN)
    lg_hi = math.log(rmax)
    while len(out) < n:
        if budget <= 0:
            raise PlacementFailure(f"placed {len(out)} of {n} objects")
        budget -= 1
        r = math.exp(rng.uniform(lg_lo, lg_hi))
        c = tuple(rng.uniform(lo[d] + r, lo[d] + side - r) for d in range(dim))
        ok = True
        for (oc, orad) in grid.neighbors(c):
            if dim == 1:
                if abs(c[0] - oc[0]) <= r + orad:
                    ok = False
                    break
            else:
                dx = c[0] - oc[0]
                dy = c[1] - oc[1]
                if dx * dx + dy * dy <= (r + orad) * (r + orad):
                    ok = False
                    break
        if not ok:
            continue
        grid.add(c, (c, r))
        if dim == 1:
            out.append(Interval1(c[0] - r, c[0] + r))
        else:
            out.append(ConvexRegion.disk(Point2(c[0], c[1]), r))
    return out


# misses under the neighbor radius happen when a candidate overlaps
# something bigger than a grid cell; disks are capped at rmax so one
# ring of cells of size 2*rmax is always enough


def _obj_center(obj, dim):
    if dim == 1:
        return (obj.midpoint(),)
    return (obj.rep.x, obj.rep.y)


def _obj_radius(obj, dim):
    if dim == 1:
        return obj.diameter() / 2.0
    return obj.radius if obj.kind == "disk" else obj.r_outer


class _Occupancy:
    """Incremental disjointness index over objects of bounded radius."""

    def __init__(self, dim, lo, cell):
        self.dim = dim
        self.lo = lo
        self.cell = cell
        self.buckets = {}
        self.entries = {}  # slot -> (key, center, radius)

    def _key(self, c):
        return tuple(int((c[d] - self.lo[d]) / self.cell) for d in range(self.dim))

    def free(self, c, r, skip=None):
        key = self._key(c)
        rng_ = (-1, 0, 1)
        if self.dim == 1:
            cells = ((key[0] + dx,) for dx in rng_)
        else:
            cells = ((key[0] + dx, key[1] + dy) for dx in rng_ for dy in rng_)
        for k in cells:
            for slot, (oc, orad) in self.buckets.get(k, {}).items():
                if slot == skip:
                    continue
                if self.dim == 1:
                    if abs(c[0] - oc[0]) <= r + orad:
                        return False
                else:
                    dx = c[0] - oc[0]
                    dy = c[1] - oc[1]
                    rr = r + orad
                    if dx * dx + dy * dy <= rr * rr:
                        return False
        return True

    def put(self, slot, c, r):
        old = self.entries.pop(slot, None)
        if old is not None:
            del self.buckets[old[0]][slot]
        key = self._key(c)
        self.buckets.setdefault(key, {})[slot] = (c, r)
        self.entries[slot] = (key, c, r)

    def remove(self, slot):
        key, _, _ = self.entries.pop(slot)
        del self.buckets[key][slot]


def gen_workload(objects, ops, rho, seed, dim=2, root=None, mix=(0.6, 0.3, 0.1)):
    """Deterministic op list: queries, similar replacements, insert/delete
    pair traffic.  Replacements displace by at most (rho-1)/2 the diameter
    and rescale within provably rho-similar bounds; candidates that would
    overlap are resampled.

    Ops: ("query", coords), ("update", slot, new_object),
    ("insert", new_object), ("delete", slot).  Slots index the table built
    by appending scene objects, then every insert, in order.
    """
    if root is None:
        root = (0.0, 1.0) if dim == 1 else (0.0, 0.0, 1.0)
    lo = tuple(root[:-1])
    side = float(root[-1])
    rng = SplitMix64(seed ^ 0x5851F42D4C957F2D)
    q_share, u_share, _ = mix
    rmax = _radius_cap(max(1, len(objects)), dim, side)
    occ = _Occupancy(dim, lo, cell=2.0 * rmax)
    live = []  # slots currently stored
    pos = {}   # slot -> index into live
    obj_of = {}
    slots = 0
    for obj in objects:
        occ.put(slots, _obj_center(obj, dim), _obj_radius(obj, dim))
        pos[slots] = len(live)
        live.append(slots)
        obj_of[slots] = obj
        slots += 1
    inserted = []
    out = []
    scale_hi = min(rho, (2.0 * rho - 1.0) / rho)
    fails = 0
    limit = 1000 + 10 * ops

    def drop(slot):
        i = pos.pop(slot)
        last = live.pop()
        if last != slot:
            live[i] = last
            pos[last] = i
        occ.remove(slot)
        del obj_of[slot]

    while len(out) < ops:
        u = rng.uniform()
        if u < q_share or not live:
            out.append(("query", tuple(
                rng.uniform(lo[d], lo[d] + side) for d in range(dim)
            )))
            continue
        if u < q_share + u_share:
            slot = live[rng.randint(len(live))]
            new = _sample_similar(
                obj_of[slot], slot, occ, rho, scale_hi, rng, dim, lo, side, rmax
            )
            if new is None:
                fails += 1
                if fails > limit:
                    raise PlacementFailure("could not sample a similar replacement")
                continue
            obj_of[slot] = new
            occ.put(slot, _obj_center(new, dim), _obj_radius(new, dim))
            out.append(("update", slot, new))
            continue
        # insert/delete pair traffic
        if inserted and rng.chance(0.5):
            slot = inserted[rng.randint(len(inserted))]
            inserted.remove(slot)
            if slot in pos:
                drop(slot)
                out.append(("delete", slot))
                continue
        new = _sample_fresh(occ, rng, dim, lo, side, rmax)
        if new is None:
            fails += 1
            if fails > limit:
                raise PlacementFailure("could not place an insert")
            continue
        slot = slots
        slots += 1
        occ.put(slot, _obj_center(new, dim), _obj_radius(new, dim))
        pos[slot] = len(live)
        live.append(slot)
        obj_of[slot] = new
        inserted.append(slot)
        out.append(("insert", new))
    return out


def _sample_similar(obj, slot, occ, rho, scale_hi, rng, dim, lo, side, rmax):
    c = _obj_center(obj, dim)
    r = _obj_radius(obj, dim)
    diam = 2.0 * r
    for _ in range(60):
        scale = math.exp(rng.uniform(math.log(1.0 / scale_hi), math.log(scale_hi)))
        nr = min(r * scale, rmax)
        move = rng.uniform(0.0, (rho - 1.0) / 2.0 * diam)
        if dim == 1:
            nc = (c[0] + (move if rng.chance(0.5) else -move),)
        else:
            ang = rng.uniform(0.0, 2.0 * math.pi)
            nc = (c[0] + move * math.cos(ang), c[1] + move * math.sin(ang))
        if any(not lo[d] + nr < nc[d] < lo[d] + side - nr for d in range(dim)):
            continue
        if not occ.free(nc, nr, skip=slot):
            continue
        if dim == 1:
            new = Interval1(nc[0] - nr, nc[0] + nr)
            from .geometry import interval_union_span

            if interval_union_span(obj, new) > rho * min(obj.diameter(), new.diameter()):
                continue
        else:
            new = ConvexRegion.disk(Point2(nc[0], nc[1]), nr)
            if not is_rho_similar(obj, new, rho):
                continue
        return new
    return None


def _sample_fresh(occ, rng, dim, lo, side, rmax):
    lg_lo = math.log(rmax / RADIUS_SPAN)
    lg_hi = math.log(rmax)
    for _ in range(60):
        r = math.exp(rng.uniform(lg_lo, lg_hi))
        c = tuple(rng.uniform(lo[d] + r, lo[d] + side - r) for d in range(dim))
        if occ.free(c, r):
            if dim == 1:
                return Interval1(c[0] - r, c[0] + r)
            return ConvexRegion.disk(Point2(c[0], c[1]), r)
    return None


# ------------------------------------------------------------------- oracle

class VerifyOracle:
    """Vectorized linear-scan ground truth over disks or intervals."""

    def __init__(self, dim, objects, capacity):
        self.dim = dim
        cap = max(capacity, len(objects) + 8)
        self.a = np.full(cap, np.nan)
        self.b = np.full(cap, np.nan)
        self.r = np.full(cap, -1.0)   # radius (half-length in 1D)
        self.r2 = np.full(cap, -1.0)  # squared radius; negative = no hit
        self.generic = []  # slots needing exact python checks (polygons)
        self.size = 0
        for obj in objects:
            self.append(obj)

    def append(self, obj):
        i = self.size
        if i >= len(self.r):
            grow = len(self.r) * 2
            for name in ("a", "b", "r", "r2"):
                arr = getattr(self, name)
                new = np.full(grow, np.nan if name in ("a", "b") else -1.0)
                new[: len(arr)] = arr
                setattr(self, name, new)
        self._write(i, obj)
        self.size += 1
        return i

    def _write(self, i, obj):
        if self.dim == 1:
            self.a[i] = obj.midpoint()
            self.r[i] = obj.diameter() / 2.0
            self.r2[i] = self.r[i] * self.r[i]
        elif obj.kind == "disk":
            self.a[i] = obj.center.x
            self.b[i] = obj.center.y
            self.r[i] = obj.radius
            self.r2[i] = obj.radius * obj.radius
        else:
            self.a[i] = obj.rep.x
            self.b[i] = obj.rep.y
            self.r[i] = -1.0  # exact check below
            self.r2[i] = -1.0
            self.generic.append((i, obj))

    def replace(self, slot, obj):
        self.generic = [(i, o) for i, o in self.generic if i != slot]
        self._write(slot, obj)

    def remove(self, slot):
        self.a[slot] = np.nan
        self.b[slot] = np.nan
        self.r[slot] = -1.0
        self.r2[slot] = -1.0
        self.generic = [(i, o) for i, o in self.generic if i != slot]

    def query(self, coords):
        """Index of the unique containing object, or None."""
        n = self.size
        if n == 0:
            return None
        if self.dim == 1:
            d = np.abs(coords[0] - self.a[:n])
            hits = np.flatnonzero(d <= self.r[:n])
        else:
            dx = coords[0] - self.a[:n]
            dy = coords[1] - self.b[:n]
            hits = np.flatnonzero(dx * dx + dy * dy <= self.r2[:n])
        if hits.size:
            return int(hits[0])
        for i, obj in self.generic:
            if obj.contains_point(Point2(coords[0], coords[1])):
                return i
        return None


def oracle_query(objects, coords):
    """Plain linear scan; ground truth for a static object list."""
    for i, obj in enumerate(objects):
        if isinstance(obj, Interval1):
            if obj.contains(coords[0]):
                return i
        elif obj.contains_point(Point2(coords[0], coords[1])):
            return i
    return None
