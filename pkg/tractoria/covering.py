#!/usr/bin/env python

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import integrate

from tractoria import config
from tractoria.complexfn import Example2, FunctionSpec
from tractoria.errors import (
    AnnulusMissesTract,
    BoundaryHitsProbe,
    BudgetExceeded,
    InvalidParam,
    KNotAboveOne,
    LevelArcMismatch,
    NearZero,
    PointNotInterior,
    PreconditionFails,
    TractoriaError,
    VanishingF,
)
from tractoria.geometry import Polygon, signed_area
from tractoria.metrics import (
    C_eps,
    HarmonicEstimate,
    batch_generator,
    bcover_floor,
    choose_eta,
    harmonic_measure_wos,
    lambda_threshold_log,
)
from tractoria.tract import TractRegion, Window, contour_paths, max_modulus_on_tract

logger = logging.getLogger(__name__)

PROBE_RADII = config.PROBE_RADII
PROBE_ANGLES = config.PROBE_ANGLES
BOUNDARY_SAMPLES = config.BOUNDARY_SAMPLES
MAX_BOUNDARY_SAMPLES = config.MAX_BOUNDARY_SAMPLES
REFINE_ROUNDS = config.REFINE_ROUNDS
PATH_DETOURS = config.PATH_DETOURS
PATH_SAMPLES = config.PATH_SAMPLES

# arg(e^d - 1) を漸近形で置き換える |Re d|
ASYMPTOTIC_LOG = 30.0
# 像がこれより近い探針は判定しない
PROBE_HIT_TOL = 1e-9
PROBE_CHUNK = 64
PROBE_CELLS = 2 ** 22
IMPLICIT_NODES = 400
SLIT_TAG = -2
CORNER_TAG = -1


def _principal(theta: np.ndarray) -> np.ndarray:
    return np.angle(np.exp(1j * theta))


# ----------------------------------------------------------------------
# 制約（陰的な領域の辺）
# ----------------------------------------------------------------------


class CircleConstraint:
    """|z| > r（outside=True）または |z| < r"""

    def __init__(self, r: float, outside: bool) -> None:
        if not r > 0:
            raise InvalidParam("radius must be positive", {"r": r})
        self.r = float(r)
        self.outside = outside
        self.name = "inner" if outside else "outer"

    def value_array(self, Z: np.ndarray) -> np.ndarray:
        d = np.abs(Z) - self.r
        return d if self.outside else -d

    def project_array(self, Z: np.ndarray) -> np.ndarray:
        a = np.abs(Z)
        return np.where(a > 0, self.r * Z / np.where(a > 0, a, 1.0), self.r)


class HalfPlaneConstraint:
    """point を通り direction の左側"""

    def __init__(self, point: complex, direction: complex, name: str = "line") -> None:
        if direction == 0:
            raise InvalidParam("direction must be nonzero")
        self.point = complex(point)
        self.direction = complex(direction) / abs(direction)
        self.name = name

    def value_array(self, Z: np.ndarray) -> np.ndarray:
        return np.imag(np.conj(self.direction) * (Z - self.point))

    def project_array(self, Z: np.ndarray) -> np.ndarray:
        t = np.real(np.conj(self.direction) * (Z - self.point))
        return self.point + t * self.direction


class LevelConstraint:
    """|f| > R（値は log|f| - log R を勾配で割った符号付き距離の近似）"""

    def __init__(self, fn: FunctionSpec, level: float) -> None:
        if not level > 0:
            raise InvalidParam("level must be positive", {"level": level})
        self.fn = fn
        self.log_level = math.log(level)
        self.name = "level"

    def value_array(self, Z: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"):
            u = self.fn.log_modulus_array(Z) - self.log_level
            g = np.abs(self.fn.log_derivative_array(Z))
            d = np.where(g > 0, u / g, u)
        return np.nan_to_num(d, nan=-1e300, posinf=1e300, neginf=-1e300)

    def project_array(self, Z: np.ndarray) -> np.ndarray:
        Z = Z.copy()
        with np.errstate(all="ignore"):
            for _ in range(config.NEWTON_LEVEL_STEPS):
                u = self.fn.log_modulus_array(Z) - self.log_level
                if np.all(np.abs(u) <= config.TOL_LEVEL * (1 + abs(self.log_level))):
                    break
                step = u / self.fn.log_derivative_array(Z)
                step = np.where(np.isfinite(step), step, 0)
                Z = Z - step
        return Z


Constraint = Any


# ----------------------------------------------------------------------
# 領域
# ----------------------------------------------------------------------


class Region:
    """Region クラス

    被覆を調べる領域 Sigma（多角形で近似、外周は反時計回り、穴は時計回り）

    Attributes:
        kind (str): polygon, rectangle, disk, annulus-sector, quadrilateral, annulus-tract
        polygon (Polygon): 境界
        tags (np.ndarray): 各辺が乗っている制約の番号（-1 は角、-2 は切れ目）
        constraints (List[str]): 制約の名前
        tract_label (str): 由来の tract（なければ None）
    """

    def __init__(
        self,
        kind: str,
        polygon: Polygon,
        tags: Optional[np.ndarray] = None,
        constraints: Optional[List[str]] = None,
        tract_label: Optional[str] = None,
    ) -> None:
        self.kind = kind
        self.polygon = polygon
        self.tags = np.full(len(polygon), CORNER_TAG, dtype=int) if tags is None else np.asarray(tags, dtype=int)
        self.constraints = constraints or []
        self.tract_label = tract_label

    def __repr__(self) -> str:
        return "<Region {} {} segments, {} holes>".format(self.kind, len(self.polygon), len(self.polygon.holes))

    def get_polygon(self) -> Polygon:
        return self.polygon

    def has_holes(self) -> bool:
        return bool(self.polygon.holes)

    def contains(self, z: complex) -> bool:
        return self.polygon.contains(z)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "polygon": self.polygon.to_dict(),
            "tags": self.tags.tolist(),
            "constraints": self.constraints,
            "tract_label": self.tract_label,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> Region:
        if "polygon" not in data:
            return cls("polygon", Polygon.from_dict(data))
        polygon = Polygon.from_dict(data["polygon"])
        tags = data.get("tags")
        if tags is not None and len(tags) != len(polygon):
            raise InvalidParam("tags do not match the polygon", {"tags": len(tags), "segments": len(polygon)})
        return cls(data.get("kind", "polygon"), polygon, tags, data.get("constraints"), data.get("tract_label"))

    # 構成

    @classmethod
    def from_polygon(cls, polygon: Polygon) -> Region:
        return cls("polygon", polygon)

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float) -> Region:
        return cls("rectangle", Polygon.rectangle(x0, x1, y0, y1))

    @classmethod
    def disk(cls, radius: float = 1.0, center: complex = 0, sides: int = 256) -> Region:
        return cls("disk", Polygon.regular(sides, radius, center))

    @classmethod
    def annular_sector(cls, r0: float, r1: float, t0: float, t1: float, samples: int = 64) -> Region:
        polygon = Polygon.annular_sector(r0, r1, t0, t1, samples)
        tags = np.full(len(polygon), CORNER_TAG, dtype=int)
        names = ["outer", "ray_end", "inner", "ray_start"]
        for k, name in enumerate(names):
            tags[polygon.arcs[name]] = k
        return cls("annulus-sector", polygon, tags, names)

    @classmethod
    def implicit(
        cls,
        constraints: Sequence[Constraint],
        seed: complex,
        window: Window,
        nodes: int = IMPLICIT_NODES,
        kind: str = "implicit",
        tract_label: Optional[str] = None,
    ) -> Region:
        """すべての制約が正になる集合のうち seed を含む成分"""
        seed = complex(seed)
        xs, ys = window.nodes(max(window.get_width(), window.get_height()) / nodes)
        step = float(xs[1] - xs[0])

        def values(Z: np.ndarray) -> np.ndarray:
            return np.stack([c.value_array(Z) for c in constraints])

        Zg = xs[np.newaxis, :] + 1j * ys[:, np.newaxis]
        V = values(Zg).min(axis=0)
        if not float(values(np.array([seed])).min()) > 0:
            raise InvalidParam("seed violates a constraint", {"seed": [seed.real, seed.imag]})

        # seed の成分（4 近傍、辺の中点も正）
        P = V > 0
        ny, nx_ = V.shape
        flat = np.arange(ny * nx_).reshape(ny, nx_)
        xm = (xs[:-1] + xs[1:]) / 2
        ym = (ys[:-1] + ys[1:]) / 2
        H = values(xm[np.newaxis, :] + 1j * ys[:, np.newaxis]).min(axis=0) > 0
        W = values(xs[np.newaxis, :] + 1j * ym[:, np.newaxis]).min(axis=0) > 0
        horizontal = P[:, :-1] & P[:, 1:] & H
        vertical = P[:-1, :] & P[1:, :] & W
        graph = nx.Graph()
        graph.add_nodes_from(flat[P].tolist())
        graph.add_edges_from(zip(flat[:, :-1][horizontal].tolist(), flat[:, 1:][horizontal].tolist()))
        graph.add_edges_from(zip(flat[:-1, :][vertical].tolist(), flat[1:, :][vertical].tolist()))
        i = int(np.clip(round((seed.imag - ys[0]) / (ys[1] - ys[0])), 0, ny - 1))
        j = int(np.clip(round((seed.real - xs[0]) / step), 0, nx_ - 1))
        candidates = sorted(
            ((i + di, j + dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if 0 <= i + di < ny and 0 <= j + dj < nx_),
            key=lambda c: abs(complex(xs[c[1]], ys[c[0]]) - seed),
        )
        start = next((c for c in candidates if P[c]), None)
        if start is None:
            raise InvalidParam("grid too coarse near the seed", {"seed": [seed.real, seed.imag], "step": step})
        mask = np.zeros(V.shape, dtype=bool)
        mask.flat[list(nx.node_connected_component(graph, start[0] * nx_ + start[1]))] = True
        if mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any():
            raise InvalidParam("region is not bounded inside the window", {"window": window.to_list()})

        # 成分だけを正にして輪郭を取る
        Vm = np.where(mask, V, -np.abs(V) - step)
        rings: List[np.ndarray] = []
        ring_tags: List[np.ndarray] = []
        for path in contour_paths(Vm, xs, ys):
            if not path.closed or len(path.points) < 3:
                continue
            Z, tags = _project_ring(constraints, path.points, step)
            if len(Z) >= 3:
                rings.append(Z)
                ring_tags.append(tags)
        if not rings:
            raise InvalidParam("no closed boundary found", {"window": window.to_list()})
        outer = int(np.argmax([abs(signed_area(r)) for r in rings]))
        order = [outer] + [k for k in range(len(rings)) if k != outer]
        oriented: List[np.ndarray] = []
        oriented_tags: List[np.ndarray] = []
        for n, k in enumerate(order):
            ring, tags = rings[k], ring_tags[k]
            ccw = signed_area(ring) > 0
            if ccw != (n == 0):
                # 頂点 i の辺は (i, i+1)、反転すると辺の並びは一つずれる
                ring = ring[::-1]
                tags = np.roll(tags[::-1], -1)
            oriented.append(ring)
            oriented_tags.append(tags)
        polygon = Polygon(oriented[0], oriented[1:])
        tags = np.concatenate(oriented_tags)
        names = [c.name for c in constraints]
        polygon.arcs = {}
        for k, name in enumerate(names):
            ids = np.flatnonzero(tags == k).tolist()
            if ids:
                polygon.arcs.setdefault(name, []).extend(ids)
        return cls(kind, polygon, tags, names, tract_label)

    @classmethod
    def annulus_tract(
        cls,
        tract: TractRegion,
        r_in: float,
        r_out: float,
        extra: Sequence[Constraint] = (),
        seed: Optional[complex] = None,
        nodes: int = IMPLICIT_NODES,
    ) -> Region:
        """A(r_in, r_out) と tract の共通部分（seed を含む成分）"""
        if not 0 < r_in < r_out:
            raise InvalidParam("bad annulus", {"r": [r_in, r_out]})
        fn = tract.get_fn()
        constraints: List[Constraint] = [
            CircleConstraint(r_in, outside=True),
            CircleConstraint(r_out, outside=False),
            LevelConstraint(fn, tract.get_level()),
        ] + list(extra)
        if seed is None:
            seed = _annulus_seed(tract, r_in, r_out, constraints)
        window = Window.square(r_out * 1.02 + 4 * r_out / nodes)
        return cls.implicit(constraints, seed, window, nodes, "annulus-tract", tract.get_label())

    @classmethod
    def example2_quadrilateral(cls, n: int, nodes: int = IMPLICIT_NODES) -> Region:
        """A((2n+1)pi/2, (2n+3)pi/2) と {|e^{z^2} cos z| > 1} と上半平面の共通部分（z_n を含む成分）"""
        if n < 0:
            raise InvalidParam("n must be nonnegative", {"n": n})
        fn = FunctionSpec("EXPZ2COS")
        r_in = (2 * n + 1) * math.pi / 2
        r_out = (2 * n + 3) * math.pi / 2
        constraints: List[Constraint] = [
            CircleConstraint(r_in, outside=True),
            CircleConstraint(r_out, outside=False),
            LevelConstraint(fn, 1.0),
            HalfPlaneConstraint(0, 1, name="axis"),
        ]
        pad = 4 * r_out / nodes
        window = Window(-pad, r_out + pad, -pad, r_out + pad)
        return cls.implicit(constraints, Example2.z_point(n), window, nodes, "quadrilateral")

    def simply_connected(self) -> Region:
        """各穴から外向きの半径方向の切れ目を入れて単連結にする"""
        if not self.polygon.holes:
            return self
        rings = self.polygon.get_rings()
        offsets = np.cumsum([0] + [len(r) for r in rings])
        ring = rings[0]
        tags = self.tags[offsets[0]:offsets[1]]
        pending = list(range(1, len(rings)))
        while pending:
            current = Polygon(ring, [rings[k] for k in pending])
            for k in pending:
                hole = rings[k]
                v = int(np.argmax(np.abs(hole)))
                hv = hole[v]
                direction = (hv / abs(hv) if abs(hv) > 0 else 1.0) * 4 * current.get_diameter()
                s, seg = current.ray_hits(np.array([hv + 1e-12 * direction]), np.array([direction]))
                if np.isfinite(s[0]) and seg[0] < len(ring):
                    break
            else:
                raise InvalidParam("no radial slit reaches the outer boundary", {"holes": len(pending)})
            hit = hv + float(s[0]) * direction
            e = int(seg[0])
            hole_tags = self.tags[offsets[k]:offsets[k + 1]]
            loop = np.concatenate([hole[v:], hole[:v]])
            loop_tags = np.concatenate([hole_tags[v:], hole_tags[:v]])
            # 外周の辺 e を hit で分け、hit -> 穴 -> hit と回る
            ring = np.concatenate([ring[: e + 1], [hit], loop, [hv, hit], ring[e + 1:]])
            tags = np.concatenate([tags[: e + 1], [SLIT_TAG], loop_tags, [SLIT_TAG, tags[e]], tags[e + 1:]])
            pending.remove(k)
        polygon = Polygon(ring)
        polygon.arcs = {}
        for t, name in enumerate(self.constraints):
            ids = np.flatnonzero(tags == t).tolist()
            if ids:
                polygon.arcs[name] = ids
        return Region(self.kind, polygon, tags, self.constraints, self.tract_label)


def _project_ring(constraints: Sequence[Constraint], points: np.ndarray, step: float) -> Tuple[np.ndarray, np.ndarray]:
    """各頂点を値が 0 に最も近い制約に射影し、重なった頂点を除く"""
    values = np.abs(np.stack([c.value_array(points) for c in constraints]))
    active = np.argmin(values, axis=0)
    Z = points.copy()
    for k, c in enumerate(constraints):
        sel = active == k
        if np.any(sel):
            Z[sel] = c.project_array(points[sel])
    moved = np.abs(Z - points) > 2 * step
    Z[moved] = points[moved]
    keep = np.abs(Z - np.roll(Z, 1)) > 1e-12 * max(1.0, float(np.max(np.abs(Z))))
    Z, active = Z[keep], active[keep]
    tags = np.where(active == np.roll(active, -1), active, CORNER_TAG)
    return Z, tags


def _annulus_seed(tract: TractRegion, r_in: float, r_out: float, constraints: Sequence[Constraint]) -> complex:
    """中間の円上で tract に入り、全制約の最小値が最大の点"""
    r = (r_in + r_out) / 2
    Z = r * np.exp(2j * np.pi * np.arange(config.ARC_SAMPLES) / config.ARC_SAMPLES)
    inside = tract.contains_array(Z)
    if not np.any(inside):
        raise AnnulusMissesTract(
            "annulus does not meet the tract inside its window",
            {"r": [r_in, r_out], "tract": tract.get_label()},
        )
    Z = Z[inside]
    V = np.stack([c.value_array(Z) for c in constraints]).min(axis=0)
    return complex(Z[int(np.argmax(V))])


def boundary_arcs(region: Region, predicate: Any = "level") -> List[List[int]]:
    """predicate を満たす辺を輪に沿った連続な弧にまとめる（長い順）

    predicate は制約の名前か、辺番号の配列を受け取る真偽値の関数
    """
    polygon = region.polygon
    if callable(predicate):
        marked = np.asarray(predicate(np.arange(len(polygon))), dtype=bool)
    else:
        if predicate not in region.constraints:
            return []
        marked = region.tags == region.constraints.index(predicate)
    arcs: List[List[int]] = []
    start = 0
    for ring in polygon.get_rings():
        ids = np.arange(start, start + len(ring))
        start += len(ring)
        m = marked[ids]
        if not np.any(m):
            continue
        if np.all(m):
            arcs.append(ids.tolist())
            continue
        # 印のない辺から回り始める
        first = int(np.flatnonzero(~m)[0])
        ids = np.roll(ids, -first)
        m = np.roll(m, -first)
        current: List[int] = []
        for i, flag in zip(ids, m):
            if flag:
                current.append(int(i))
            elif current:
                arcs.append(current)
                current = []
        if current:
            arcs.append(current)
    lengths = np.abs(polygon.B - polygon.A)
    arcs.sort(key=lambda a: -float(np.sum(lengths[a])))
    return arcs


# ----------------------------------------------------------------------
# 像の被覆証明
# ----------------------------------------------------------------------


class ProbeGrid:
    """対数極座標の探針（log|w| は両端を含む、arg は半刻みずらす）"""

    def __init__(self, annulus: Sequence[float], radii: int = PROBE_RADII, angles: int = PROBE_ANGLES) -> None:
        lo, hi = float(annulus[0]), float(annulus[1])
        if not lo <= hi or radii < 1 or angles < 1:
            raise InvalidParam("bad probe grid", {"annulus": [lo, hi], "radii": radii, "angles": angles})
        self.lo = lo
        self.hi = hi
        self.radii = int(radii)
        self.angles = int(angles)
        self.logmods = np.linspace(lo, hi, radii) if radii > 1 else np.array([(lo + hi) / 2])
        self.dphi = 2 * math.pi / angles
        self.args = _principal(self.dphi * (np.arange(angles) + 0.5))

    def __len__(self) -> int:
        return self.radii * self.angles

    def points(self) -> np.ndarray:
        """log w（半径順、同じ半径の中は角度順）"""
        return (self.logmods[:, np.newaxis] + 1j * self.args[np.newaxis, :]).ravel()

    def nearest(self, F: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """log 座標での最寄りの探針までの距離と番号（arg は 2 pi を法とする）"""
        if self.radii > 1:
            dl = (self.hi - self.lo) / (self.radii - 1)
            i = np.clip(np.rint((F.real - self.lo) / dl), 0, self.radii - 1).astype(int)
        else:
            i = np.zeros(F.shape, dtype=int)
        j = np.mod(np.rint(F.imag / self.dphi - 0.5), self.angles).astype(int)
        d = np.hypot(F.real - self.logmods[i], _principal(F.imag - self.args[j]))
        return d, i * self.angles + j

    def strip_distance(self, F: np.ndarray) -> np.ndarray:
        """閉じた環 {lo <= log|w| <= hi} までの距離"""
        return np.maximum(np.maximum(self.lo - F.real, F.real - self.hi), 0.0)

    def to_list(self) -> List[List[float]]:
        return [[p.real, p.imag] for p in self.points()]


def log_values(fn: FunctionSpec, Z: np.ndarray, precision: int) -> np.ndarray:
    """log f（精度 53 以下は numpy、それ以上は mpmath で 1 点ずつ）"""
    if precision <= config.MIN_PRECISION:
        return fn.log_array(Z)
    out = np.empty(len(Z), dtype=complex)
    for k, z in enumerate(Z):
        try:
            v = fn.eval_log(complex(z), precision)
            out[k] = complex(float(v.logmod), float(v.arg))
        except NearZero:
            out[k] = complex(-np.inf, 0.0)
    return out


class BoundaryImage:
    """BoundaryImage クラス

    境界の各輪を細分した点と log f の値

    Attributes:
        loops (List[np.ndarray]): 閉じた折れ線（最後に始点を繰り返す）
        values (List[np.ndarray]): 各点での log f
        rounds (int): 細分の回数
        complete (bool): 細分の条件を満たしたか
        finite (bool): 境界上で f が 0 にならなかったか
    """

    def __init__(self, loops: List[np.ndarray], values: List[np.ndarray], rounds: int, complete: bool) -> None:
        self.loops = loops
        self.values = values
        self.rounds = rounds
        self.complete = complete
        self.finite = all(bool(np.all(np.isfinite(F))) for F in values)

    def get_samples(self) -> int:
        return sum(len(z) - 1 for z in self.loops)

    def arg_windings(self) -> float:
        """f(境界) が 0 のまわりを回る回数（実数）"""
        total = 0.0
        for F in self.values:
            total += float(np.sum(_principal(np.diff(F.imag))))
        return total / (2 * math.pi)


def sample_boundary_image(
    fn: FunctionSpec,
    polygon: Polygon,
    precision: int = config.MIN_PRECISION,
    probes: Optional[ProbeGrid] = None,
    samples: int = BOUNDARY_SAMPLES,
) -> BoundaryImage:
    """arg の差が pi/2 未満、かつ弦が最寄りの探針までの距離の半分未満になるまで中点を足す"""
    perimeter = polygon.get_perimeter()
    loops: List[np.ndarray] = []
    for ring in polygon.get_rings():
        A, B = ring, np.roll(ring, -1)
        points = []
        for a, b in zip(A, B):
            k = max(1, int(math.ceil(samples * abs(b - a) / perimeter)))
            points.append(a + (b - a) * np.arange(k) / k)
        Z = np.concatenate(points)
        loops.append(np.append(Z, Z[:1]))
    values = [log_values(fn, Z, precision) for Z in loops]
    complete = False
    rounds = 0
    for rounds in range(REFINE_ROUNDS + 1):
        bad_any = False
        total = sum(len(Z) for Z in loops)
        new_loops, new_values = [], []
        for Z, F in zip(loops, values):
            if not np.all(np.isfinite(F)):
                return BoundaryImage(loops, values, rounds, False)
            dF = np.diff(F.real) + 1j * _principal(np.diff(F.imag))
            bad = np.abs(dF.imag) >= math.pi / 2
            if probes is not None:
                dist = probes.nearest(F)[0]
                bad |= np.abs(dF) >= 0.5 * np.minimum(dist[:-1], dist[1:])
            if not np.any(bad):
                new_loops.append(Z)
                new_values.append(F)
                continue
            bad_any = True
            idx = np.flatnonzero(bad)
            mid = (Z[idx] + Z[idx + 1]) / 2
            Fm = log_values(fn, mid, precision)
            new_loops.append(np.insert(Z, idx + 1, mid))
            new_values.append(np.insert(F, idx + 1, Fm))
        if not bad_any:
            complete = True
            break
        loops, values = new_loops, new_values
        if total > MAX_BOUNDARY_SAMPLES:
            break
    return BoundaryImage(loops, values, rounds, complete)


def _probe_windings(image: BoundaryImage, S: np.ndarray) -> np.ndarray:
    """arg(f - w) = arg w + arg(exp(log f - log w) - 1) の一周の増分を探針ごとに足す"""
    total = np.zeros(len(S))
    for F in image.values:
        D = F[:, np.newaxis] - S[np.newaxis, :]
        with np.errstate(all="ignore"):
            small = np.angle(np.expm1(np.where(np.abs(D.real) <= ASYMPTOTIC_LOG, D, 0)))
        A = np.where(D.real > ASYMPTOTIC_LOG, D.imag, np.where(D.real < -ASYMPTOTIC_LOG, math.pi, small))
        total += np.sum(_principal(np.diff(A, axis=0)), axis=0)
    return total / (2 * math.pi)


class CoverCertificate:
    """CoverCertificate クラス

    f(Sigma) が閉じた環（log スケール）を覆うことの偏角原理による証明

    Attributes:
        fn (FunctionSpec): 関数
        region (Region): 領域
        annulus (Tuple[float, float]): (log 内径, log 外径)
        probes (ProbeGrid): 探針
        windings (List[Optional[int]]): 探針ごとの回転数（判定できなければ None）
        boundary_margin (float): 境界の像から探針までの log 距離の最小値（弦の半分を引いた値）
        annulus_margin (float): 境界の像から閉じた環までの log 距離の最小値
        full_cover (bool): 環全体を覆うことが言えるか
        status (str): certified, refuted, inconclusive
        samples (int): 境界の標本数
        rounds (int): 細分の回数
        precision (int): 評価精度
        reasons (List[str]): inconclusive の理由
    """

    def __init__(
        self,
        fn: FunctionSpec,
        region: Region,
        annulus: Tuple[float, float],
        probes: ProbeGrid,
        windings: List[Optional[int]],
        boundary_margin: float,
        annulus_margin: float,
        samples: int,
        rounds: int,
        precision: int,
        reasons: List[str],
    ) -> None:
        self.fn = fn
        self.region = region
        self.annulus = annulus
        self.probes = probes
        self.windings = windings
        self.boundary_margin = boundary_margin
        self.annulus_margin = annulus_margin
        self.samples = samples
        self.rounds = rounds
        self.precision = precision
        self.reasons = reasons
        known = [w for w in windings if w is not None]
        if any(w < 0 for w in known):
            # 正の向きの境界では起こらない
            self.reasons = reasons + ["negative winding number"]
        if any(w == 0 for w in known):
            self.status = "refuted"
        elif len(known) == len(windings) and min(known, default=0) >= 1 and boundary_margin > 0 and not self.reasons:
            self.status = "certified"
        else:
            self.status = "inconclusive"
        self.full_cover = self.status == "certified" and annulus_margin > 0

    def __repr__(self) -> str:
        return "<CoverCertificate {} annulus=({:.4g}, {:.4g}) margin={:.3g}>".format(
            self.status, self.annulus[0], self.annulus[1], self.boundary_margin
        )

    def get_status(self) -> str:
        return self.status

    def get_min_winding(self) -> Optional[int]:
        known = [w for w in self.windings if w is not None]
        return min(known) if known else None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fn": self.fn.to_dict(),
            "region": self.region.to_dict(),
            "annulus": list(self.annulus),
            "probes": {"radii": self.probes.radii, "angles": self.probes.angles, "points": self.probes.to_list()},
            "windings": self.windings,
            "boundary_margin": self.boundary_margin,
            "annulus_margin": self.annulus_margin,
            "full_cover": self.full_cover,
            "status": self.status,
            "samples": self.samples,
            "rounds": self.rounds,
            "precision": self.precision,
            "reasons": self.reasons,
        }


def image_annulus_certificate(
    fn: FunctionSpec,
    region: Region,
    annulus: Sequence[float],
    probes: Tuple[int, int] = (PROBE_RADII, PROBE_ANGLES),
    precision: int = config.MIN_PRECISION,
    samples: int = BOUNDARY_SAMPLES,
) -> CoverCertificate:
    """境界の像の探針まわりの回転数（= Sigma 内の原像の個数）で環の被覆を調べる"""
    annulus_ = (float(annulus[0]), float(annulus[1]))
    grid = ProbeGrid(annulus_, probes[0], probes[1])
    image = sample_boundary_image(fn, region.polygon, precision, grid, samples)
    reasons: List[str] = []
    if not image.finite:
        reasons.append("f vanishes on the boundary")
        return CoverCertificate(
            fn, region, annulus_, grid, [None] * len(grid), -math.inf, -math.inf,
            image.get_samples(), image.rounds, precision, reasons,
        )
    if not image.complete:
        reasons.append("boundary refinement hit its limit")

    # 弦を考えた探針までの距離
    margin = math.inf
    annulus_margin = math.inf
    closest = np.full(len(grid), math.inf)
    for F in image.values:
        dist, which = grid.nearest(F)
        chord = np.abs(np.diff(F.real) + 1j * _principal(np.diff(F.imag)))
        margin = min(margin, float(np.min(np.minimum(dist[:-1], dist[1:]) - chord / 2)))
        annulus_margin = min(annulus_margin, float(np.min(grid.strip_distance(F))))
        np.minimum.at(closest, which, dist)

    S = grid.points()
    size = max(1, min(PROBE_CHUNK, PROBE_CELLS // max(1, image.get_samples())))
    chunks = [np.arange(k, min(k + size, len(S))) for k in range(0, len(S), size)]
    threads = config.get_threads()
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(executor.map(lambda c: _probe_windings(image, S[c]), chunks))
    else:
        parts = [_probe_windings(image, S[c]) for c in chunks]
    raw = np.concatenate(parts)

    windings: List[Optional[int]] = []
    hits = 0
    for k, w in enumerate(raw):
        if closest[k] <= PROBE_HIT_TOL or abs(w - round(w)) > 0.25:
            hits += 1
            windings.append(None)
        else:
            windings.append(int(round(w)))
    if hits:
        logger.warning(
            "%s", BoundaryHitsProbe("{} probes lie on f(boundary) and are inconclusive".format(hits))
        )
    certificate = CoverCertificate(
        fn, region, annulus_, grid, windings, margin, annulus_margin,
        image.get_samples(), image.rounds, precision, reasons,
    )
    logger.info("certificate %s: %s", fn, certificate)
    return certificate


def image_grid_hits(
    fn: FunctionSpec,
    region: Region,
    annulus: Sequence[float],
    probes: Tuple[int, int] = (PROBE_RADII, PROBE_ANGLES),
    nodes: int = 512,
) -> Tuple[np.ndarray, float]:
    """領域の格子点の像から、各探針までの log 距離の最小値と格子の像の最大の刻みを返す"""
    grid = ProbeGrid(annulus, probes[0], probes[1])
    x0, x1, y0, y1 = region.polygon.get_bounds()
    X, Y = np.meshgrid(np.linspace(x0, x1, nodes), np.linspace(y0, y1, nodes))
    Zg = X + 1j * Y
    F = fn.log_array(Zg)
    inside = region.polygon.contains_array(Zg.ravel()).reshape(Zg.shape)
    # 隣の点との log 距離（刻みの目安）
    dx = np.abs(np.diff(F.real, axis=1) + 1j * _principal(np.diff(F.imag, axis=1)))
    dy = np.abs(np.diff(F.real, axis=0) + 1j * _principal(np.diff(F.imag, axis=0)))
    spacing = max(
        float(np.max(dx[inside[:, :-1] & inside[:, 1:]], initial=0.0)),
        float(np.max(dy[inside[:-1, :] & inside[1:, :]], initial=0.0)),
    )
    Fi = F[inside]
    Fi = Fi[np.isfinite(Fi)]
    S = grid.points()
    best = np.full(len(S), math.inf)
    for start in range(0, len(Fi), 4096):
        block = Fi[start:start + 4096]
        D = np.hypot(block.real[:, np.newaxis] - S.real, _principal(block.imag[:, np.newaxis] - S.imag))
        best = np.minimum(best, D.min(axis=0))
    return best, spacing


# ----------------------------------------------------------------------
# 被覆の補題
# ----------------------------------------------------------------------


class CoverPrediction:
    """CoverPrediction クラス

    補題が予言する環と前提の記録

    Attributes:
        lemma (str): bcover, hypcover, mcover
        annulus (Tuple[float, float]): 予言された環（log スケール）
        accepted (bool): 補題の前提がすべて成り立ったか
        checks (Dict[str, Any]): 比べた両辺
        certificate (CoverCertificate): 付随する証明（なければ None）
        harmonic (HarmonicEstimate): mcover の調和測度（なければ None）
    """

    def __init__(
        self,
        lemma: str,
        annulus: Tuple[float, float],
        accepted: bool,
        checks: Dict[str, Any],
        certificate: Optional[CoverCertificate] = None,
        harmonic: Optional[HarmonicEstimate] = None,
    ) -> None:
        self.lemma = lemma
        self.annulus = annulus
        self.accepted = accepted
        self.checks = checks
        self.certificate = certificate
        self.harmonic = harmonic

    def __repr__(self) -> str:
        return "<CoverPrediction {} annulus=({:.6g}, {:.6g}){}>".format(
            self.lemma, self.annulus[0], self.annulus[1], "" if self.accepted else " rejected"
        )

    def contains(self, lo: float, hi: float) -> bool:
        """log スケールの環 [lo, hi] を含むか"""
        return self.annulus[0] <= lo and hi <= self.annulus[1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lemma": self.lemma,
            "annulus": list(self.annulus),
            "accepted": self.accepted,
            "checks": self.checks,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "harmonic": self.harmonic.to_dict() if self.harmonic else None,
        }


def bcover_predict(
    fn: FunctionSpec,
    tract: TractRegion,
    r0: float,
    c: float,
    certify: bool = False,
    probes: Tuple[int, int] = (PROBE_RADII, PROBE_ANGLES),
) -> CoverPrediction:
    """log M_D(r0) > 8 pi^2 c/(c-1) なら f(A(r0, c r0) cap D) は環 (8 pi^2 c/(c-1), log M_D(r0)) を覆う"""
    floor = bcover_floor(c)
    md = max_modulus_on_tract(fn, tract, r0)
    log_md = float(md.value)
    checks = {
        "floor": floor,
        "log_MD": log_md,
        "uncertainty": md.uncertainty,
        "r0": r0,
        "c": c,
        "certified_MD": md.certified,
    }
    if not log_md > floor:
        raise PreconditionFails("log M_D(r0) does not exceed 8 pi^2 c/(c-1)", checks)
    certificate = None
    if certify:
        region = Region.annulus_tract(tract, r0, c * r0)
        certificate = image_annulus_certificate(fn, region, (floor, log_md), probes)
    return CoverPrediction("bcover", (floor, log_md), True, checks, certificate)


def _check_zero_free(fn: FunctionSpec, region: Region, precision: int) -> None:
    if fn.is_zero_free():
        return
    image = sample_boundary_image(fn, region.polygon, precision)
    if not image.finite:
        raise VanishingF("f vanishes on the boundary", {"region": region.kind})
    turns = image.arg_windings()
    if abs(turns) > 0.5 or not image.complete:
        raise VanishingF("f has zeros in the region", {"winding": turns, "complete": image.complete})


def path_density_integral(polygon: Polygon, path: Sequence[complex], samples: int = PATH_SAMPLES) -> float:
    """折れ線に沿った 1/dist(z, 境界) の積分（外に出れば inf）"""
    total = 0.0
    for a, b in zip(path[:-1], path[1:]):
        t = np.linspace(0.0, 1.0, samples)
        Z = a + t * (b - a)
        if not np.all(polygon.contains_array(Z)):
            return math.inf
        dist = polygon.distance_array(Z)[0]
        if np.any(dist <= 0):
            return math.inf
        total += abs(b - a) * float(integrate.trapezoid(1.0 / dist, t))
    return total


def rho_upper_bound(region: Region, z1: complex, z2: complex, seed: int = 0) -> Tuple[float, List[complex]]:
    """双曲距離の上界（直線と PATH_DETOURS 本の寄り道の最小）"""
    polygon = region.polygon
    best = path_density_integral(polygon, [z1, z2])
    best_path = [z1, z2]
    waypoints = polygon.interior_sample(PATH_DETOURS, batch_generator(seed, 1))
    for p in waypoints:
        value = path_density_integral(polygon, [z1, complex(p), z2])
        if value < best:
            best, best_path = value, [z1, complex(p), z2]
    return best, best_path


def hypcover_check(
    fn: FunctionSpec,
    region: Region,
    z1: complex,
    z2: complex,
    precision: int = config.DEFAULT_PRECISION,
    seed: int = 0,
    certify: bool = False,
    probes: Tuple[int, int] = (PROBE_RADII, PROBE_ANGLES),
) -> CoverPrediction:
    """rho(z1, z2) < (1/2) log(1 + log K/10 pi) なら f(Sigma) は閉じた環 (|f(z1)|, |f(z2)|) を覆う"""
    z1, z2 = complex(z1), complex(z2)
    for z in (z1, z2):
        if not region.contains(z) or region.polygon.distance(z) <= 0:
            raise PointNotInterior("point is not interior to the region", {"z": [z.real, z.imag]})
    cut = region.simply_connected()
    _check_zero_free(fn, cut, config.MIN_PRECISION)
    try:
        l1 = float(fn.eval_log(z1, precision).logmod)
        l2 = float(fn.eval_log(z2, precision).logmod)
    except NearZero as e:
        raise VanishingF("f vanishes at an endpoint", e.details)
    log_K = l2 - l1
    if not log_K > 0:
        raise KNotAboveOne("K = |f(z2)|/|f(z1)| must exceed 1", {"log_K": log_K})
    lam = lambda_threshold_log(log_K)
    rho, path = rho_upper_bound(cut, z1, z2, seed)
    checks = {
        "log_f_z1": l1,
        "log_f_z2": l2,
        "log_K": log_K,
        "lambda": lam,
        "rho_upper": rho,
        "path": [[p.real, p.imag] for p in path],
        "seed": seed,
    }
    if not rho < lam:
        raise BudgetExceeded("hyperbolic distance bound is not below the budget", checks)
    certificate = image_annulus_certificate(fn, region, (l1, l2), probes) if certify else None
    return CoverPrediction("hypcover", (l1, l2), True, checks, certificate)


def mcover_check(
    fn: FunctionSpec,
    region: Region,
    z: complex,
    arc: Any,
    eps_geom: float,
    walks: int = 0,
    seed: int = 0,
    precision: int = config.DEFAULT_PRECISION,
    certify: bool = False,
    probes: Tuple[int, int] = (PROBE_RADII, PROBE_ANGLES),
) -> CoverPrediction:
    """|f| = R の弧と log|f(z)| の大きさから、f(Sigma) が環 (C(eps), log|f(z)|) を覆うことを予言する"""
    z = complex(z)
    segments = region.polygon.arc_segments(arc)
    if not segments:
        raise LevelArcMismatch("arc is empty", {"arc": str(arc)})
    ends = np.concatenate([region.polygon.A[segments], region.polygon.B[segments]])
    mismatch = float(np.max(np.abs(fn.log_modulus_array(ends) - math.log(fn.get_level()))))
    if mismatch > 1e-6 * (1 + abs(math.log(fn.get_level()))):
        raise LevelArcMismatch("|f| differs from the boundary level on the arc", {"max_log_error": mismatch})
    if not region.contains(z):
        raise PointNotInterior("z is not interior to the region", {"z": [z.real, z.imag]})
    try:
        log_fz = float(fn.eval_log(z, precision).logmod)
    except NearZero as e:
        raise VanishingF("f vanishes at z", e.details)
    eta, report = choose_eta(log_fz, eps_geom)
    kernel = C_eps(eps_geom) / log_fz
    if kernel < 1:
        bound = 20 * math.pi * eta / ((1 - kernel) * (1 - eta))
    else:
        bound = math.inf
    checks = dict(report)
    checks.update(
        {"kernel_bound": kernel, "cover_threshold": bound, "cover_threshold_holds": bound < log_fz, "arc": segments}
    )
    annulus = (C_eps(eps_geom), log_fz)
    accepted = bool(bound < log_fz and annulus[0] < annulus[1])
    harmonic = None
    if walks > 0:
        harmonic = harmonic_measure_wos(region.polygon, z, segments, walks, seed, epsilon_geom=eps_geom)
    certificate = None
    if certify and annulus[0] < annulus[1]:
        certificate = image_annulus_certificate(fn, region, annulus, probes)
    if not accepted:
        logger.info("mcover rejected at z=%s: bound %.6g vs log|f(z)| %.6g", z, bound, log_fz)
    return CoverPrediction("mcover", annulus, accepted, checks, certificate, harmonic)


def lemma_record(run: Callable[[], CoverPrediction]) -> Dict[str, Any]:
    """補題を試し、受理なら予言を、失敗なら例外を記録にする"""
    try:
        return run().to_dict()
    except TractoriaError as e:
        return {"accepted": False, **e.to_dict()}
