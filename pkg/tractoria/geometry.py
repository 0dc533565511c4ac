#!/usr/bin/env python

from __future__ import annotations

import json
import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import spatial

from tractoria.errors import InvalidParam

SEGMENT_CHUNK = 512


def _as_ring(vertices: Any) -> np.ndarray:
    ring = []
    for v in vertices:
        if isinstance(v, (list, tuple)):
            ring.append(complex(float(v[0]), float(v[1])))
        else:
            ring.append(complex(v))
    ring_ = np.array(ring, dtype=complex)
    if len(ring_) > 1 and ring_[0] == ring_[-1]:
        ring_ = ring_[:-1]
    return ring_


def signed_area(ring: np.ndarray) -> float:
    x, y = ring.real, ring.imag
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


class Polygon:
    """Polygon クラス

    外周（反時計回り）と穴（時計回り）からなる多角形領域
    辺には外周から順に通し番号を付ける

    Attributes:
        outer (np.ndarray): 外周の頂点
        holes (List[np.ndarray]): 穴の頂点
        A, B (np.ndarray): 各辺の始点と終点
        ring_of (np.ndarray): 各辺が属する輪（0 が外周）
        arcs (Dict[str, List[int]]): 名前付きの辺の集合
    """

    def __init__(
        self,
        outer: Any,
        holes: Optional[Sequence[Any]] = None,
        arcs: Optional[Dict[str, Sequence[int]]] = None,
    ) -> None:
        outer_ = _as_ring(outer)
        if len(outer_) < 3:
            raise InvalidParam("polygon needs at least three vertices", {"vertices": len(outer_)})
        if signed_area(outer_) < 0:
            outer_ = outer_[::-1]
        holes_ = []
        for hole in holes or []:
            ring = _as_ring(hole)
            if len(ring) < 3:
                raise InvalidParam("hole needs at least three vertices")
            if signed_area(ring) > 0:
                ring = ring[::-1]
            holes_.append(ring)
        self.outer: np.ndarray = outer_
        self.holes: List[np.ndarray] = holes_
        rings = [outer_] + holes_
        self.A: np.ndarray = np.concatenate(rings)
        self.B: np.ndarray = np.concatenate([np.roll(r, -1) for r in rings])
        self.ring_of: np.ndarray = np.concatenate([np.full(len(r), k) for k, r in enumerate(rings)])
        self.arcs: Dict[str, List[int]] = {k: [int(i) for i in v] for k, v in (arcs or {}).items()}
        for name, ids in self.arcs.items():
            if any(i < 0 or i >= len(self.A) for i in ids):
                raise InvalidParam("arc refers to an unknown segment", {"arc": name, "segments": ids})

    def __repr__(self) -> str:
        return "<Polygon {} segments, {} holes>".format(len(self.A), len(self.holes))

    def __len__(self) -> int:
        return len(self.A)

    @classmethod
    def rectangle(cls, x0: float, x1: float, y0: float, y1: float) -> Polygon:
        """辺の番号は 0: 下, 1: 右, 2: 上, 3: 左"""
        return cls(
            [complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)],
            arcs={"bottom": [0], "right": [1], "top": [2], "left": [3]},
        )

    @classmethod
    def regular(cls, n: int, radius: float = 1.0, center: complex = 0) -> Polygon:
        """円に内接する正 n 角形（頂点 0 は center + radius）"""
        theta = 2 * np.pi * np.arange(n) / n
        return cls(center + radius * np.exp(1j * theta))

    @classmethod
    def annular_sector(
        cls, r0: float, r1: float, t0: float, t1: float, samples: int = 64
    ) -> Polygon:
        """{r0 < |z| < r1, t0 < arg z < t1}（t1 - t0 が 2 pi なら切れ目のある環）"""
        if not 0 < r0 < r1 or not t0 < t1:
            raise InvalidParam("bad annular sector", {"r": [r0, r1], "t": [t0, t1]})
        outer_arc = r1 * np.exp(1j * np.linspace(t0, t1, samples))
        inner_arc = r0 * np.exp(1j * np.linspace(t1, t0, samples))
        ring = np.concatenate([outer_arc, inner_arc])
        n = samples - 1
        return cls(
            ring,
            arcs={
                "outer": list(range(0, n)),
                "ray_end": [n],
                "inner": list(range(n + 1, 2 * n + 1)),
                "ray_start": [2 * n + 1],
            },
        )

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> Polygon:
        try:
            outer = data["outer"]
        except (KeyError, TypeError):
            raise InvalidParam("polygon needs 'outer'", {"data": data})
        return cls(outer, data.get("holes", []), data.get("arcs", {}))

    @classmethod
    def from_json(cls, text: str) -> Polygon:
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "outer": [[z.real, z.imag] for z in self.outer],
            "holes": [[[z.real, z.imag] for z in h] for h in self.holes],
            "arcs": self.arcs,
        }

    def get_rings(self) -> List[np.ndarray]:
        return [self.outer] + self.holes

    def get_area(self) -> float:
        return sum(signed_area(r) for r in self.get_rings())

    def get_perimeter(self) -> float:
        return float(np.sum(np.abs(self.B - self.A)))

    def get_diameter(self) -> float:
        z = self.outer
        return float(np.max(np.abs(z[:, np.newaxis] - z[np.newaxis, :])))

    def get_bounds(self) -> Tuple[float, float, float, float]:
        z = self.outer
        return float(z.real.min()), float(z.real.max()), float(z.imag.min()), float(z.imag.max())

    def arc_segments(self, arc: Any) -> List[int]:
        """名前・番号の列・"a-b" 形式の範囲を辺番号の列にする"""
        if isinstance(arc, str):
            if arc in self.arcs:
                return list(self.arcs[arc])
            ids: List[int] = []
            for part in arc.split(","):
                part = part.strip()
                if not part:
                    continue
                if part in self.arcs:
                    ids.extend(self.arcs[part])
                elif "-" in part[1:]:
                    a, b = part.split("-", 1)
                    ids.extend(range(int(a), int(b) + 1))
                else:
                    ids.append(int(part))
            return sorted(set(ids))
        return sorted(set(int(i) for i in arc))

    def contains_array(self, Z: Any) -> np.ndarray:
        """偶奇規則による内部判定（辺上は不定）"""
        Z = np.atleast_1d(np.asarray(Z, dtype=complex))
        inside = np.zeros(Z.shape, dtype=bool)
        for start in range(0, len(self.A), SEGMENT_CHUNK):
            A = self.A[start:start + SEGMENT_CHUNK][np.newaxis, :]
            B = self.B[start:start + SEGMENT_CHUNK][np.newaxis, :]
            x = Z.real[:, np.newaxis]
            y = Z.imag[:, np.newaxis]
            straddle = (A.imag > y) != (B.imag > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                cross_x = A.real + (y - A.imag) * (B.real - A.real) / (B.imag - A.imag)
            hits = straddle & (x < cross_x)
            inside ^= (np.sum(hits, axis=1) % 2).astype(bool)
        return inside

    def contains(self, z: complex) -> bool:
        return bool(self.contains_array(np.array([complex(z)]))[0])

    def distance_array(self, Z: Any) -> Tuple[np.ndarray, np.ndarray]:
        """境界までの距離と最寄りの辺の番号"""
        Z = np.atleast_1d(np.asarray(Z, dtype=complex))
        best = np.full(Z.shape, np.inf)
        which = np.zeros(Z.shape, dtype=int)
        for start in range(0, len(self.A), SEGMENT_CHUNK):
            A = self.A[start:start + SEGMENT_CHUNK][np.newaxis, :]
            D = (self.B[start:start + SEGMENT_CHUNK] - self.A[start:start + SEGMENT_CHUNK])[np.newaxis, :]
            W = Z[:, np.newaxis] - A
            t = np.clip(np.real(W * np.conj(D)) / np.abs(D) ** 2, 0.0, 1.0)
            dist = np.abs(W - t * D)
            k = np.argmin(dist, axis=1)
            d = dist[np.arange(len(Z)), k]
            better = d < best
            best[better] = d[better]
            which[better] = k[better] + start
        return best, which

    def distance(self, z: complex) -> float:
        return float(self.distance_array(np.array([complex(z)]))[0][0])

    def ray_hits(self, P: np.ndarray, D: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """線分 P -> P + D が最初に境界と交わる位置の割合 s と辺番号（交わらなければ inf）"""
        best = np.full(P.shape, np.inf)
        which = np.full(P.shape, -1, dtype=int)
        for start in range(0, len(self.A), SEGMENT_CHUNK):
            A = self.A[start:start + SEGMENT_CHUNK][np.newaxis, :]
            E = (self.B[start:start + SEGMENT_CHUNK] - self.A[start:start + SEGMENT_CHUNK])[np.newaxis, :]
            d = D[:, np.newaxis]
            W = A - P[:, np.newaxis]
            # P + s d = A + t E を解く
            den = (d.real * E.imag - d.imag * E.real)
            with np.errstate(divide="ignore", invalid="ignore"):
                s = (W.real * E.imag - W.imag * E.real) / den
                t = (W.real * d.imag - W.imag * d.real) / den
            ok = (den != 0) & (s >= 0) & (s <= 1) & (t >= 0) & (t <= 1)
            s = np.where(ok, s, np.inf)
            k = np.argmin(s, axis=1)
            v = s[np.arange(len(P)), k]
            better = v < best
            best[better] = v[better]
            which[better] = k[better] + start
        return best, which

    def boundary_points(self, per_segment: int = 1) -> Tuple[np.ndarray, np.ndarray]:
        """各辺を per_segment 等分した点（始点を含み終点を含まない）と辺番号"""
        t = np.arange(per_segment) / per_segment
        Z = self.A[:, np.newaxis] + t[np.newaxis, :] * (self.B - self.A)[:, np.newaxis]
        ids = np.repeat(np.arange(len(self.A)), per_segment)
        return Z.ravel(), ids

    def ring_loops(self, per_segment: int = 1) -> List[np.ndarray]:
        """各輪を細分した閉じた折れ線（最後に始点を繰り返す）"""
        loops = []
        for ring in self.get_rings():
            A = ring
            B = np.roll(ring, -1)
            t = np.arange(per_segment) / per_segment
            Z = (A[:, np.newaxis] + t[np.newaxis, :] * (B - A)[:, np.newaxis]).ravel()
            loops.append(np.append(Z, Z[:1]))
        return loops

    def interior_sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """棄却法による内部の一様な点"""
        x0, x1, y0, y1 = self.get_bounds()
        points: List[np.ndarray] = []
        total = 0
        for _ in range(1000):
            Z = rng.uniform(x0, x1, 4 * count) + 1j * rng.uniform(y0, y1, 4 * count)
            Z = Z[self.contains_array(Z)]
            points.append(Z)
            total += len(Z)
            if total >= count:
                break
        return np.concatenate(points)[:count]


def convex_hull(points: Sequence[complex]) -> np.ndarray:
    """凸包の頂点（反時計回り）"""
    Z = np.asarray(points, dtype=complex)
    hull = spatial.ConvexHull(np.column_stack([Z.real, Z.imag]))
    return Z[hull.vertices]


def random_convex_polygon(rng: np.random.Generator, count: int = 12) -> Polygon:
    """単位円内のランダムな点の凸包"""
    r = np.sqrt(rng.uniform(0.2, 1.0, count))
    theta = rng.uniform(0, 2 * math.pi, count)
    return Polygon(convex_hull(r * np.exp(1j * theta)))
