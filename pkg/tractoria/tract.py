#!/usr/bin/env python

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import mpmath
import networkx as nx
import numpy as np
from scipy import optimize

from tractoria import config
from tractoria.complexfn import FunctionSpec
from tractoria.errors import (
    CircleMissesTract,
    DegenerateLevel,
    InvalidParam,
    NotExpanding,
    SeedOnBoundary,
    WindowTooSmall,
)

logger = logging.getLogger(__name__)

TOL_LEVEL = config.TOL_LEVEL
NEWTON_LEVEL_STEPS = config.NEWTON_LEVEL_STEPS
DEFAULT_GRID_NODES = config.DEFAULT_GRID_NODES
MAX_GRID_NODES = config.MAX_GRID_NODES
ARC_SAMPLES = config.ARC_SAMPLES
LOG_SCALE_CAP = config.LOG_SCALE_CAP

# セルの頂点 0:(x,y) 1:(x+1,y) 2:(x+1,y+1) 3:(x,y+1) の (行, 列) のずれ
CORNER_OFFSETS = ((0, 0), (0, 1), (1, 1), (1, 0))

# 頂点の正負 (0 が最上位 bit) -> (鞍点か, 辺の対のリスト)
MARCHING_SQUARES_TABLE = [
    (False, []),  # 0000
    (False, [((0, 3), (2, 3))]),  # 0001
    (False, [((1, 2), (2, 3))]),  # 0010
    (False, [((0, 3), (1, 2))]),  # 0011
    (False, [((0, 1), (1, 2))]),  # 0100
    (True, ([((0, 1), (1, 2)), ((0, 3), (2, 3))], [((0, 1), (0, 3)), ((1, 2), (2, 3))])),  # 0101
    (False, [((0, 1), (2, 3))]),  # 0110
    (False, [((0, 1), (0, 3))]),  # 0111
    (False, [((0, 1), (0, 3))]),  # 1000
    (False, [((0, 1), (2, 3))]),  # 1001
    (True, ([((0, 1), (0, 3)), ((1, 2), (2, 3))], [((0, 1), (1, 2)), ((0, 3), (2, 3))])),  # 1010
    (False, [((0, 1), (1, 2))]),  # 1011
    (False, [((0, 3), (1, 2))]),  # 1100
    (False, [((1, 2), (2, 3))]),  # 1101
    (False, [((0, 3), (2, 3))]),  # 1110
    (False, []),  # 1111
]

Node = Tuple[int, int]
EdgeKey = Tuple[Node, Node]


class Window:
    """Window クラス

    追跡する矩形 [x0, x1] x [y0, y1]

    Attributes:
        x0, x1, y0, y1 (float): 矩形の範囲
    """

    def __init__(self, x0: float, x1: float, y0: float, y1: float) -> None:
        values = [float(x0), float(x1), float(y0), float(y1)]
        if not all(math.isfinite(v) for v in values) or x1 <= x0 or y1 <= y0:
            raise InvalidParam("window must be a bounded non-empty rectangle", {"window": values})
        self.x0, self.x1, self.y0, self.y1 = values

    def __str__(self) -> str:
        return "[{}, {}] x [{}, {}]".format(self.x0, self.x1, self.y0, self.y1)

    def __repr__(self) -> str:
        return "<Window {}>".format(self)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Window) and self.to_list() == other.to_list()

    @classmethod
    def square(cls, half: float, center: complex = 0) -> Window:
        c = complex(center)
        return cls(c.real - half, c.real + half, c.imag - half, c.imag + half)

    @classmethod
    def from_list(cls, values: Sequence[float]) -> Window:
        if len(values) != 4:
            raise InvalidParam("window needs x0,x1,y0,y1", {"window": list(values)})
        return cls(*values)

    def to_list(self) -> List[float]:
        return [self.x0, self.x1, self.y0, self.y1]

    def get_width(self) -> float:
        return self.x1 - self.x0

    def get_height(self) -> float:
        return self.y1 - self.y0

    def get_diameter(self) -> float:
        return math.hypot(self.get_width(), self.get_height())

    def contains(self, z: complex) -> bool:
        z = complex(z)
        return self.x0 <= z.real <= self.x1 and self.y0 <= z.imag <= self.y1

    def contains_array(self, Z: np.ndarray) -> np.ndarray:
        return (Z.real >= self.x0) & (Z.real <= self.x1) & (Z.imag >= self.y0) & (Z.imag <= self.y1)

    def contains_disk(self, r: float) -> bool:
        return self.x0 <= -r and r <= self.x1 and self.y0 <= -r and r <= self.y1

    def union(self, other: Window) -> Window:
        return Window(
            min(self.x0, other.x0), max(self.x1, other.x1), min(self.y0, other.y0), max(self.y1, other.y1)
        )

    def nodes(self, step: float) -> Tuple[np.ndarray, np.ndarray]:
        """刻み step 以下の格子点（各方向 MAX_GRID_NODES まで）"""
        if not step > 0:
            raise InvalidParam("resolution must be positive", {"resolution": step})
        nx_ = min(MAX_GRID_NODES, max(3, int(math.ceil(self.get_width() / step)) + 1))
        ny_ = min(MAX_GRID_NODES, max(3, int(math.ceil(self.get_height() / step)) + 1))
        return np.linspace(self.x0, self.x1, nx_), np.linspace(self.y0, self.y1, ny_)

    def default_step(self) -> float:
        return max(self.get_width(), self.get_height()) / (DEFAULT_GRID_NODES - 1)


def evaluate_grid(fn: FunctionSpec, xs: np.ndarray, ys: np.ndarray, log_level: float) -> np.ndarray:
    """u = log|f| - log R を格子上で計算（行ブロックごとに並列）"""
    threads = config.get_threads()
    blocks = np.array_split(np.arange(len(ys)), max(1, min(threads, len(ys))))

    def run(rows: np.ndarray) -> np.ndarray:
        Z = xs[np.newaxis, :] + 1j * ys[rows, np.newaxis]
        return fn.log_modulus_array(Z) - log_level

    if len(blocks) == 1:
        parts = [run(blocks[0])]
    else:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(executor.map(run, blocks))
    U = np.vstack(parts)
    return np.nan_to_num(U, nan=-1e300, posinf=1e300, neginf=-1e300)


def _edge_key(a: Node, b: Node) -> EdgeKey:
    return (a, b) if a <= b else (b, a)


def _lerp(p0: complex, p1: complex, v0: float, v1: float) -> complex:
    t = v0 / (v0 - v1)
    t = min(max(t, 0.0), 1.0)
    return p0 * (1 - t) + t * p1


class ContourPath:
    """等高線の折れ線（格子の辺の列）

    Attributes:
        keys (List[EdgeKey]): 各頂点が乗っている格子の辺
        points (np.ndarray): 頂点（線形補間）
        closed (bool): 閉曲線か
    """

    def __init__(self, keys: List[EdgeKey], points: np.ndarray, closed: bool) -> None:
        self.keys = keys
        self.points = points
        self.closed = closed

    def __len__(self) -> int:
        return len(self.keys)


def contour_paths(
    U: np.ndarray,
    xs: np.ndarray,
    ys: np.ndarray,
    center: Optional[Callable[[np.ndarray], np.ndarray]] = None,
) -> List[ContourPath]:
    """{U > 0} の境界を marching squares で追跡し、線分をグラフで繋げて折れ線にする

    U[i, j] は点 xs[j] + i ys[i] での値
    鞍点セルは center（セル中心での値を返す関数、なければ 4 頂点の平均）で分ける
    """
    P = U > 0
    index = (
        8 * P[:-1, :-1].astype(int)
        + 4 * P[:-1, 1:].astype(int)
        + 2 * P[1:, 1:].astype(int)
        + 1 * P[1:, :-1].astype(int)
    )
    cells = np.argwhere((index != 0) & (index != 15))
    saddles = np.argwhere((index == 5) | (index == 10))
    center_value: Dict[Node, float] = {}
    if len(saddles):
        if center is not None:
            Zc = (xs[saddles[:, 1]] + xs[saddles[:, 1] + 1]) / 2 + 1j * (
                ys[saddles[:, 0]] + ys[saddles[:, 0] + 1]
            ) / 2
            values = center(Zc)
        else:
            values = (
                U[saddles[:, 0], saddles[:, 1]]
                + U[saddles[:, 0], saddles[:, 1] + 1]
                + U[saddles[:, 0] + 1, saddles[:, 1]]
                + U[saddles[:, 0] + 1, saddles[:, 1] + 1]
            ) / 4
        for (i, j), v in zip(saddles, values):
            center_value[(int(i), int(j))] = float(v)

    graph = nx.Graph()
    position: Dict[EdgeKey, complex] = {}
    for i, j in cells:
        i, j = int(i), int(j)
        corners = [(i + di, j + dj) for di, dj in CORNER_OFFSETS]
        saddle, edges = MARCHING_SQUARES_TABLE[index[i, j]]
        if saddle:
            edges = edges[int(center_value[(i, j)] > 0)]
        for a, b in edges:
            key_a = _edge_key(corners[a[0]], corners[a[1]])
            key_b = _edge_key(corners[b[0]], corners[b[1]])
            for key in (key_a, key_b):
                if key not in position:
                    (i0, j0), (i1, j1) = key
                    position[key] = _lerp(
                        complex(xs[j0], ys[i0]), complex(xs[j1], ys[i1]), U[i0, j0], U[i1, j1]
                    )
            graph.add_edge(key_a, key_b)

    paths: List[ContourPath] = []
    for component in nx.connected_components(graph):
        sub = graph.subgraph(component)
        ends = sorted(n for n, d in sub.degree() if d == 1)
        closed = not ends
        source = ends[0] if ends else min(component)
        keys = list(nx.dfs_preorder_nodes(sub, source=source))
        points = np.array([position[k] for k in keys], dtype=complex)
        paths.append(ContourPath(keys, points, closed))
    paths.sort(key=lambda p: p.keys[0])
    return paths


def refine_on_edges(
    fn: FunctionSpec,
    log_level: float,
    keys: Sequence[EdgeKey],
    start: np.ndarray,
    xs: np.ndarray,
    ys: np.ndarray,
    U: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray]:
    """各頂点を格子の辺上で |f| = R に Newton 法で寄せる（はさみうちで保護）

    Returns:
        Tuple[np.ndarray, np.ndarray]: 頂点と、退化（臨界点・未収束）フラグ
    """
    if not len(keys):
        return start.copy(), np.zeros(0, dtype=bool)
    A = np.empty(len(keys), dtype=complex)
    B = np.empty(len(keys), dtype=complex)
    for n, ((i0, j0), (i1, j1)) in enumerate(keys):
        p0 = complex(xs[j0], ys[i0])
        p1 = complex(xs[j1], ys[i1])
        # A 側が正
        if U[i0, j0] > 0:
            A[n], B[n] = p0, p1
        else:
            A[n], B[n] = p1, p0
    D = B - A
    t = np.clip(np.real((start - A) * np.conj(D)) / np.abs(D) ** 2, 0.0, 1.0)
    lo = np.zeros_like(t)
    hi = np.ones_like(t)
    done = np.zeros(len(t), dtype=bool)
    tol = TOL_LEVEL * (1.0 + abs(log_level))
    with np.errstate(all="ignore"):
        for _ in range(NEWTON_LEVEL_STEPS):
            active = ~done
            if not np.any(active):
                break
            Z = A[active] + t[active] * D[active]
            u = fn.log_modulus_array(Z) - log_level
            ok = np.abs(u) <= tol
            idx = np.flatnonzero(active)
            done[idx[ok]] = True
            pos = u > 0
            lo[idx[pos]] = t[idx[pos]]
            hi[idx[~pos]] = t[idx[~pos]]
            du = np.real(fn.log_derivative_array(Z) * D[active])
            t_new = t[active] - u / du
            bad = ~np.isfinite(t_new) | (t_new <= lo[idx]) | (t_new >= hi[idx])
            t_new[bad] = (lo[idx][bad] + hi[idx][bad]) / 2
            t[idx[~ok]] = t_new[~ok]
        Z = A + t * D
        gradient = np.abs(fn.log_derivative_array(Z))
    degenerate = ~done | ~np.isfinite(gradient) | (gradient < 1e-8)
    Z[degenerate] = start[degenerate]
    return Z, degenerate


class LevelCurve:
    """LevelCurve クラス

    |f| = level の連結成分（窓で切られていれば閉じていない）

    Attributes:
        vertices (np.ndarray): 頂点
        closed (bool): 閉曲線か
        level (float): R
        degenerate (List[int]): 精密化しなかった頂点の番号（臨界点の近く）
    """

    def __init__(
        self,
        vertices: np.ndarray,
        closed: bool,
        level: float,
        degenerate: Optional[Sequence[int]] = None,
        keys: Optional[List[EdgeKey]] = None,
    ) -> None:
        self.vertices: np.ndarray = np.asarray(vertices, dtype=complex)
        self.closed: bool = bool(closed)
        self.level: float = float(level)
        self.degenerate: List[int] = list(degenerate or [])
        self.keys: List[EdgeKey] = list(keys or [])

    def __repr__(self) -> str:
        return "<LevelCurve {} vertices closed={} level={}>".format(
            len(self.vertices), self.closed, self.level
        )

    def __len__(self) -> int:
        return len(self.vertices)

    def get_vertices(self) -> np.ndarray:
        return self.vertices

    def is_closed(self) -> bool:
        return self.closed

    def get_level(self) -> float:
        return self.level

    def get_degenerate(self) -> List[int]:
        return self.degenerate

    def get_length(self) -> float:
        z = self.vertices
        if self.closed:
            z = np.append(z, z[:1])
        return float(np.sum(np.abs(np.diff(z))))

    def max_level_error(self, fn: FunctionSpec) -> float:
        """精密化した頂点での max |log|f(v)| - log R|"""
        keep = np.ones(len(self.vertices), dtype=bool)
        keep[self.degenerate] = False
        if not np.any(keep):
            return 0.0
        u = fn.log_modulus_array(self.vertices[keep]) - math.log(self.level)
        return float(np.max(np.abs(u)))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "vertices": [[z.real, z.imag] for z in self.vertices],
            "closed": self.closed,
            "level": self.level,
            "degenerate": self.degenerate,
        }


def _build_curves(
    fn: FunctionSpec,
    level: float,
    paths: List[ContourPath],
    xs: np.ndarray,
    ys: np.ndarray,
    U: np.ndarray,
) -> List[LevelCurve]:
    log_level = math.log(level)
    keys = [k for p in paths for k in p.keys]
    if not keys:
        return []
    start = np.concatenate([p.points for p in paths])
    refined, degenerate = refine_on_edges(fn, log_level, keys, start, xs, ys, U)
    curves = []
    offset = 0
    for p in paths:
        n = len(p)
        flags = [int(k) for k in np.flatnonzero(degenerate[offset:offset + n])]
        curves.append(LevelCurve(refined[offset:offset + n], p.closed, level, flags, p.keys))
        offset += n
    flagged = int(np.sum(degenerate))
    if flagged:
        error = DegenerateLevel(
            "level curve passes near a critical point of |f|", {"vertices": flagged}
        )
        logger.warning("%s (%d vertices not refined)", error, flagged)
    return curves


def trace_level_set(
    fn: FunctionSpec, level: float, window: Window, resolution: Optional[float] = None
) -> List[LevelCurve]:
    """|f| = level の等高線を window 内で追跡する"""
    if not level > 0:
        raise InvalidParam("level must be positive", {"level": level})
    step = resolution or window.default_step()
    xs, ys = window.nodes(step)
    log_level = math.log(level)
    U = evaluate_grid(fn, xs, ys, log_level)
    paths = contour_paths(U, xs, ys, lambda Z: fn.log_modulus_array(Z) - log_level)
    curves = _build_curves(fn, level, paths, xs, ys, U)
    logger.debug("traced %d level curves of %s at level %s in %s", len(curves), fn, level, window)
    return curves


class TraceGrid:
    """TraceGrid クラス

    {|f| > R} の格子と連結性グラフ
    隣り合う 2 点は、両端と辺の中点がすべて |f| > R のときだけ繋ぐ

    Attributes:
        fn (FunctionSpec): 関数
        level (float): R
        window (Window): 窓
        xs, ys (np.ndarray): 格子の座標
        U (np.ndarray): log|f| - log R
        graph (nx.Graph): 正の格子点（番号 i * nx + j）の連結性
    """

    def __init__(self, fn: FunctionSpec, level: float, window: Window, resolution: Optional[float]) -> None:
        if not level > 0:
            raise InvalidParam("level must be positive", {"level": level})
        self.fn = fn
        self.level = float(level)
        self.log_level = math.log(level)
        self.window = window
        self.step = resolution or window.default_step()
        self.xs, self.ys = window.nodes(self.step)
        self.U = evaluate_grid(fn, self.xs, self.ys, self.log_level)
        self.graph = self._connectivity()

    def _connectivity(self) -> nx.Graph:
        xs, ys, U = self.xs, self.ys, self.U
        ny, nx_ = U.shape
        P = U > 0
        xm = (xs[:-1] + xs[1:]) / 2
        ym = (ys[:-1] + ys[1:]) / 2
        H = self.fn.log_modulus_array(xm[np.newaxis, :] + 1j * ys[:, np.newaxis]) - self.log_level
        V = self.fn.log_modulus_array(xs[np.newaxis, :] + 1j * ym[:, np.newaxis]) - self.log_level
        flat = np.arange(ny * nx_).reshape(ny, nx_)
        horizontal = P[:, :-1] & P[:, 1:] & (H > 0)
        vertical = P[:-1, :] & P[1:, :] & (V > 0)
        graph = nx.Graph()
        graph.add_nodes_from(flat[P].tolist())
        graph.add_edges_from(zip(flat[:, :-1][horizontal].tolist(), flat[:, 1:][horizontal].tolist()))
        graph.add_edges_from(zip(flat[:-1, :][vertical].tolist(), flat[1:, :][vertical].tolist()))
        return graph

    def cell_of(self, Z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        hx = self.xs[1] - self.xs[0]
        hy = self.ys[1] - self.ys[0]
        j = np.clip(np.floor((Z.real - self.xs[0]) / hx).astype(int), 0, len(self.xs) - 2)
        i = np.clip(np.floor((Z.imag - self.ys[0]) / hy).astype(int), 0, len(self.ys) - 2)
        return i, j

    def node_for(self, seed: complex) -> int:
        """seed から |f| > R の線分で行ける最寄りの格子点"""
        seed = complex(seed)
        if not self.window.contains(seed):
            raise InvalidParam("seed lies outside the window", {"seed": [seed.real, seed.imag]})
        u_seed = float(self.fn.log_modulus_array(np.array([seed]))[0]) - self.log_level
        if not u_seed > TOL_LEVEL:
            raise SeedOnBoundary(
                "seed is not inside {|f| > R}", {"seed": [seed.real, seed.imag], "u": u_seed}
            )
        i, j = self.cell_of(np.array([seed]))
        nx_ = len(self.xs)
        corners = [(int(i[0]) + di, int(j[0]) + dj) for di, dj in CORNER_OFFSETS]
        corners.sort(key=lambda c: abs(complex(self.xs[c[1]], self.ys[c[0]]) - seed))
        for ci, cj in corners:
            if self.U[ci, cj] <= 0:
                continue
            node = complex(self.xs[cj], self.ys[ci])
            mid = np.array([(node + seed) / 2])
            if self.fn.log_modulus_array(mid)[0] - self.log_level > 0:
                return ci * nx_ + cj
        raise SeedOnBoundary(
            "grid too coarse to connect the seed", {"seed": [seed.real, seed.imag], "step": self.step}
        )

    def component(self, node: int) -> np.ndarray:
        mask = np.zeros(self.U.shape, dtype=bool)
        mask.flat[list(nx.node_connected_component(self.graph, node))] = True
        return mask


class TractRegion:
    """TractRegion クラス

    窓の中で追跡した {|f| > R} の連結成分

    Attributes:
        fn (FunctionSpec): 関数
        level (float): R
        seed (complex): |f(seed)| > R を満たす点
        window (Window): 追跡した窓
        boundary (List[LevelCurve]): 成分に接する等高線
        label (str): 成分の識別子（格子に依存、同一性は same_tract で判定）
        truncated (bool): 成分が窓の縁に触れている（WindowTooSmall）
        step (float): 格子の刻み
    """

    def __init__(
        self,
        fn: FunctionSpec,
        level: float,
        seed: complex,
        window: Window,
        boundary: List[LevelCurve],
        label: str,
        truncated: bool,
        grid: TraceGrid,
        mask: np.ndarray,
    ) -> None:
        self.fn = fn
        self.level = level
        self.seed = complex(seed)
        self.window = window
        self.boundary = boundary
        self.label = label
        self.truncated = truncated
        self.step = grid.step
        self._grid = grid
        self._mask = mask

    def __repr__(self) -> str:
        return "<TractRegion {} of {} R={} window={}{}>".format(
            self.label, self.fn, self.level, self.window, " truncated" if self.truncated else ""
        )

    def get_fn(self) -> FunctionSpec:
        return self.fn

    def get_level(self) -> float:
        return self.level

    def get_seed(self) -> complex:
        return self.seed

    def get_window(self) -> Window:
        return self.window

    def get_boundary(self) -> List[LevelCurve]:
        return self.boundary

    def get_label(self) -> str:
        return self.label

    def is_truncated(self) -> bool:
        return self.truncated

    def get_grid(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """(xs, ys, u, 成分のマスク)"""
        return self._grid.xs, self._grid.ys, self._grid.U, self._mask

    def get_boundary_vertices(self) -> np.ndarray:
        if not self.boundary:
            return np.zeros(0, dtype=complex)
        return np.concatenate([c.vertices for c in self.boundary])

    def max_level_error(self) -> float:
        return max((c.max_level_error(self.fn) for c in self.boundary), default=0.0)

    def contains_array(self, Z: Any) -> np.ndarray:
        """|f| > R で、かつ成分に属する格子点へ |f| > R の線分で繋がる点か

        node_for と同じく、近い角から順に見て最初に繋がった角の所属で決める
        """
        Z = np.atleast_1d(np.asarray(Z, dtype=complex))
        grid = self._grid
        inside = self.window.contains_array(Z)
        inside &= self.fn.log_modulus_array(Z) - grid.log_level > 0
        i, j = grid.cell_of(Z)
        ci = np.stack([i + di for di, _ in CORNER_OFFSETS], axis=1)
        cj = np.stack([j + dj for _, dj in CORNER_OFFSETS], axis=1)
        order = np.argsort(np.abs(grid.xs[cj] + 1j * grid.ys[ci] - Z[:, np.newaxis]), axis=1, kind="stable")
        rows = np.arange(len(Z))
        near = np.zeros(len(Z), dtype=bool)
        decided = ~inside
        for rank in range(len(CORNER_OFFSETS)):
            ki = ci[rows, order[:, rank]]
            kj = cj[rows, order[:, rank]]
            node = grid.xs[kj] + 1j * grid.ys[ki]
            linked = ~decided & (grid.U[ki, kj] > 0)
            if np.any(linked):
                mid = (node[linked] + Z[linked]) / 2
                linked[linked] = self.fn.log_modulus_array(mid) - grid.log_level > 0
            near[linked] = self._mask[ki[linked], kj[linked]]
            decided |= linked
        return inside & near

    def contains(self, z: complex) -> bool:
        return bool(self.contains_array(np.array([complex(z)]))[0])

    def covers_circle(self, r: float) -> bool:
        """円 |z| = r 上で |f| > R の点がすべて窓に入っているか（M_D(r) を窓で確定できるか）"""
        if self.window.contains_disk(r):
            return True
        Z = r * np.exp(2j * np.pi * np.arange(ARC_SAMPLES) / ARC_SAMPLES)
        outside = ~self.window.contains_array(Z)
        u = self.fn.log_modulus_array(Z[outside]) - self._grid.log_level
        return not bool(np.any(u > 0))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fn": self.fn.to_dict(),
            "level": self.level,
            "seed": [self.seed.real, self.seed.imag],
            "window": self.window.to_list(),
            "label": self.label,
            "truncated": self.truncated,
            "step": self.step,
            "boundary": [c.to_dict() for c in self.boundary],
        }


def locate_tract(
    fn: FunctionSpec,
    seed: complex,
    level: Optional[float] = None,
    window: Optional[Window] = None,
    resolution: Optional[float] = None,
) -> TractRegion:
    """seed を含む {|f| > level} の成分を窓の中で求める"""
    level = fn.get_level() if level is None else level
    if window is None:
        window = Window.square(max(8.0, 2 * abs(complex(seed))))
    grid = TraceGrid(fn, level, window, resolution)
    node = grid.node_for(seed)
    mask = grid.component(node)
    truncated = bool(mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any())
    if truncated:
        logger.warning("%s", WindowTooSmall("tract of {} reaches the window edge {}".format(fn, window)))

    paths = contour_paths(grid.U, grid.xs, grid.ys, lambda Z: fn.log_modulus_array(Z) - grid.log_level)
    nx_ = len(grid.xs)
    mine = []
    for path in paths:
        for (a, b) in path.keys:
            positive = a if grid.U[a] > 0 else b
            if mask[positive]:
                mine.append(path)
                break
    boundary = _build_curves(fn, level, mine, grid.xs, grid.ys, grid.U)
    first = int(np.flatnonzero(mask.ravel())[0])
    label = "tract-{:d}-{:d}".format(first // nx_, first % nx_)
    return TractRegion(fn, level, seed, window, boundary, label, truncated, grid, mask)


def label_seeds(
    fn: FunctionSpec,
    seeds: Sequence[complex],
    level: Optional[float] = None,
    window: Optional[Window] = None,
    resolution: Optional[float] = None,
) -> List[int]:
    """各 seed の成分番号（同じ成分の最初の seed の番号、格子の刻みに依らない）"""
    level = fn.get_level() if level is None else level
    if window is None:
        window = Window.square(max(8.0, 2 * max(abs(complex(s)) for s in seeds)))
    grid = TraceGrid(fn, level, window, resolution)
    labels: List[int] = []
    components: List[Tuple[int, set]] = []
    for k, seed in enumerate(seeds):
        node = grid.node_for(seed)
        for first, component in components:
            if node in component:
                labels.append(first)
                break
        else:
            components.append((k, nx.node_connected_component(grid.graph, node)))
            labels.append(k)
    return labels


def same_tract(a: TractRegion, b: TractRegion) -> bool:
    """2 つの seed が合併した窓の中で繋がるか"""
    if a.fn != b.fn or a.level != b.level:
        return False
    window = a.window.union(b.window)
    labels = label_seeds(a.fn, [a.seed, b.seed], a.level, window, min(a.step, b.step))
    return labels[0] == labels[1]


class ModulusValue:
    """ModulusValue クラス

    円 |z| = r 上の最大絶対値 log M(r)（または tract 上の log M_D(r)）

    Attributes:
        r (float): 半径
        value (mpf): log M
        z (complex): 最大を与える点
        uncertainty (float): 標本から精密化で増えた量（解像度に依存）
        certified (bool): 円上の tract の点がすべて窓の中にあるか
        window (Window): 由来の窓（全円なら None）
    """

    def __init__(
        self, r: float, value: Any, z: complex, uncertainty: float, certified: bool, window: Optional[Window]
    ) -> None:
        self.r = r
        self.value = value
        self.z = z
        self.uncertainty = uncertainty
        self.certified = certified
        self.window = window

    def __float__(self) -> float:
        return float(self.value)

    def __repr__(self) -> str:
        return "<ModulusValue log M({}) = {} +- {:.2g}>".format(self.r, mpmath.nstr(self.value, 15), self.uncertainty)

    def get_value(self) -> Any:
        return self.value

    def get_uncertainty(self) -> float:
        return self.uncertainty

    def to_dict(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "log_max": mpmath.nstr(self.value, 20),
            "z": [self.z.real, self.z.imag],
            "uncertainty": self.uncertainty,
            "certified": self.certified,
            "window": self.window.to_list() if self.window else None,
        }


def _arc_maximum(
    fn: FunctionSpec, r: float, inside: Optional[Callable[[np.ndarray], np.ndarray]]
) -> Tuple[complex, float, float]:
    """円上の（inside を満たす点での）log|f| の最大：(点, 値, 標本からの増分)"""
    theta = 2 * np.pi * np.arange(ARC_SAMPLES) / ARC_SAMPLES
    Z = r * np.exp(1j * theta)
    mask = inside(Z) if inside is not None else np.ones(ARC_SAMPLES, dtype=bool)
    if not np.any(mask):
        raise CircleMissesTract("circle does not meet the tract", {"r": r})
    L = np.where(mask, fn.log_modulus_array(Z), -np.inf)
    best = int(np.argmax(L))
    sampled = float(L[best])
    peaks = np.flatnonzero(mask & (L >= np.roll(L, 1)) & (L >= np.roll(L, -1)))
    peaks = peaks[np.argsort(-L[peaks])][:8]
    h = 2 * np.pi / ARC_SAMPLES

    def objective(t: float) -> float:
        z = r * np.exp(1j * np.array([t]))
        if inside is not None and not inside(z)[0]:
            return np.inf
        return -float(fn.log_modulus_array(z)[0])

    z_best, v_best = complex(Z[best]), sampled
    for k in peaks:
        try:
            res = optimize.minimize_scalar(
                objective, bracket=(theta[k] - h, theta[k], theta[k] + h), method="golden", tol=1e-12
            )
        except ValueError:
            continue
        if np.isfinite(res.fun) and -res.fun > v_best:
            z_best, v_best = complex(r * np.exp(1j * res.x)), float(-res.fun)
    return z_best, v_best, max(0.0, v_best - sampled)


def max_modulus(fn: FunctionSpec, r: float, precision: int = config.DEFAULT_PRECISION) -> ModulusValue:
    """log M(r) = log max_{|z|=r} |f(z)|"""
    if not r > 0:
        raise InvalidParam("radius must be positive", {"r": r})
    z, _, gain = _arc_maximum(fn, r, None)
    lv = fn.eval_log(z, precision)
    return ModulusValue(r, lv.logmod, z, gain + lv.err, True, None)


def max_modulus_on_tract(
    fn: FunctionSpec, tract: TractRegion, r: float, precision: int = config.DEFAULT_PRECISION
) -> ModulusValue:
    """log M_D(r) = log max_{|z|=r, z in D} |f(z)|"""
    if not r > 0:
        raise InvalidParam("radius must be positive", {"r": r})
    z, _, gain = _arc_maximum(fn, r, tract.contains_array)
    lv = fn.eval_log(z, precision)
    return ModulusValue(r, lv.logmod, z, gain + lv.err, tract.covers_circle(r), tract.window)


class MDSequence:
    """MDSequence クラス

    log M_D^k(rho), k = 1..n

    Attributes:
        rho (float): 初期半径
        values (List[mpf]): log スケールの値（LOG_SCALE_CAP を超えたら inf）
        extrapolated (List[bool]): 漸近形 log M(r) ~ h(r) で外挿したか
        certified (List[bool]): 窓で確定した値か
    """

    def __init__(self, rho: float, values: List[Any], extrapolated: List[bool], certified: List[bool]) -> None:
        self.rho = rho
        self.values = values
        self.extrapolated = extrapolated
        self.certified = certified

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int) -> Any:
        return self.values[k]

    def get_values(self) -> List[Any]:
        return self.values

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rho": self.rho,
            "values": [mpmath.nstr(v, 20) for v in self.values],
            "extrapolated": self.extrapolated,
            "certified": self.certified,
        }


def iterate_MD(fn: FunctionSpec, tract: TractRegion, rho: float, n: int) -> MDSequence:
    """M_D の反復を log スケールで（窓で確定できなくなったら漸近形で外挿）"""
    if n < 1:
        raise InvalidParam("n must be positive", {"n": n})
    first = max_modulus_on_tract(fn, tract, rho)
    if not first.value > math.log(rho):
        raise NotExpanding(
            "M_D(rho) <= rho", {"rho": rho, "log_M_D": mpmath.nstr(first.value, 15), "log_rho": math.log(rho)}
        )
    values = [first.value]
    extrapolated = [False]
    certified = [first.certified]
    for _ in range(n - 1):
        log_r = values[-1]
        value, extra, cert = mpmath.inf, True, False
        if not mpmath.isinf(log_r):
            if log_r < 700 and tract.covers_circle(math.exp(log_r)):
                try:
                    m = max_modulus_on_tract(fn, tract, math.exp(log_r))
                    value, extra, cert = m.value, False, True
                except CircleMissesTract:
                    value = fn.log_growth(log_r)
            else:
                value = fn.log_growth(log_r)
        if not mpmath.isinf(value) and value > LOG_SCALE_CAP:
            value = mpmath.inf
        values.append(value)
        extrapolated.append(extra)
        certified.append(cert)
    if any(extrapolated):
        logger.debug("iterate_MD extrapolated from k=%d", extrapolated.index(True) + 1)
    return MDSequence(rho, values, extrapolated, certified)


class ConvexityReport:
    """log M_D(r^c) >= c log M_D(r) の判定"""

    def __init__(self, r: float, c: float, low: ModulusValue, high: ModulusValue) -> None:
        self.r = r
        self.c = c
        self.low = low
        self.high = high
        self.margin = float(high.value - c * low.value)
        self.tol = high.uncertainty + c * low.uncertainty + 1e-9
        self.passed = self.margin >= -self.tol

    def to_dict(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "c": self.c,
            "log_M_D_r": mpmath.nstr(self.low.value, 20),
            "log_M_D_rc": mpmath.nstr(self.high.value, 20),
            "margin": self.margin,
            "tol": self.tol,
            "passed": self.passed,
            "certified": self.low.certified and self.high.certified,
        }


def check_MD_convexity(fn: FunctionSpec, tract: TractRegion, r: float, c: float) -> ConvexityReport:
    if not c > 1:
        raise InvalidParam("c must exceed 1", {"c": c})
    low = max_modulus_on_tract(fn, tract, r)
    high = max_modulus_on_tract(fn, tract, r ** c)
    return ConvexityReport(r, c, low, high)


def log_spaced_radii(r0: float, r1: float, count: int = config.MD_GRID_POINTS) -> List[float]:
    return [float(r) for r in np.geomspace(r0, r1, count)]
