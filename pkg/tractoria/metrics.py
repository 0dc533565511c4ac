#!/usr/bin/env python

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate, sparse, stats
from scipy.sparse import linalg as sparse_linalg

from tractoria import config
from tractoria.errors import (
    ArcEmpty,
    AtPuncture,
    EtaOutOfRange,
    InvalidParam,
    KernelAtLeastOne,
    KNotAboveOne,
    LogTooSmall,
    OutsideDisk,
    PointNotInterior,
)
from tractoria.geometry import Polygon

logger = logging.getLogger(__name__)

WOS_WALKS = config.WOS_WALKS
WOS_STOP = config.WOS_STOP
WOS_BATCH = config.WOS_BATCH
WOS_MAX_STEPS = config.WOS_MAX_STEPS
LAPLACE_GRID = config.LAPLACE_GRID

TEN_PI = 10 * math.pi
PUNCTURE_TOL = 1e-12


def hyperbolic_distance_disk(z1: complex, z2: complex) -> float:
    """単位円板の双曲距離（密度 1/(1-|z|^2)、0 から eta までは (1/2) log((1+eta)/(1-eta))）"""
    z1, z2 = complex(z1), complex(z2)
    for z in (z1, z2):
        if not abs(z) < 1:
            raise OutsideDisk("point is not inside the unit disk", {"z": [z.real, z.imag]})
    t = abs(z1 - z2) / abs(1 - z1.conjugate() * z2)
    return math.atanh(min(t, 1.0))


def punctured_plane_density_floor(w: complex) -> float:
    """C minus {0, 1} の双曲密度の下界 1/(2|w|(|log|w|| + 10 pi))"""
    w = complex(w)
    if abs(w) < PUNCTURE_TOL or abs(w - 1) < PUNCTURE_TOL:
        raise AtPuncture("w is a puncture of C minus {0, 1}", {"w": [w.real, w.imag]})
    a = abs(w)
    return 1 / (2 * a * (abs(math.log(a)) + TEN_PI))


def punctured_plane_radial_integral(t1_abs: float, K: float) -> Tuple[float, float]:
    """|t1| から K|t1| までの半径方向の経路での密度下界の積分（数値積分と閉じた式）

    1/K <= |t1| <= 1 なら閉じた式は (1/2) log((1 - log|t1|/10pi)(1 + log(K|t1|)/10pi))
    """
    if not t1_abs > 0:
        raise InvalidParam("|t1| must be positive", {"t1_abs": t1_abs})
    if not K > 1:
        raise KNotAboveOne("K must exceed 1", {"K": K})
    a, b = t1_abs, K * t1_abs

    def density(s: float) -> float:
        return 1 / (2 * s * (abs(math.log(s)) + TEN_PI))

    # log s で積分すると被積分関数は 1/(2(|v| + 10 pi))
    va, vb = math.log(a), math.log(b)
    points = [0.0] if va < 0 < vb else None
    numeric, _ = integrate.quad(
        lambda v: density(math.exp(v)) * math.exp(v), va, vb, points=points, epsabs=1e-13, epsrel=1e-12
    )

    def antiderivative(v: float) -> float:
        return math.copysign(0.5 * math.log1p(abs(v) / TEN_PI), v)

    closed = antiderivative(vb) - antiderivative(va)
    return numeric, closed


def lambda_threshold(K: float) -> float:
    """lambda = (1/2) log(1 + log K / 10 pi)"""
    if not K > 1:
        raise KNotAboveOne("K must exceed 1", {"K": K})
    return lambda_threshold_log(math.log(K))


def lambda_threshold_log(log_K: float) -> float:
    """log K から lambda を計算（K が float に収まらないとき用）"""
    if not log_K > 0:
        raise KNotAboveOne("log K must be positive", {"log_K": log_K})
    return 0.5 * math.log1p(log_K / TEN_PI)


def poisson_kernel(theta: float, eta: float) -> float:
    """P_theta(eta) = (1 - eta^2)/|eta - e^{i theta}|^2"""
    if not 0 <= eta < 1:
        raise EtaOutOfRange("eta must lie in [0, 1)", {"eta": eta})
    return (1 - eta * eta) / (1 - 2 * eta * math.cos(theta) + eta * eta)


def poisson_mean(eta: float) -> float:
    """(1/2pi) int_0^{2pi} P_theta(eta) d theta（1 になるはず）"""
    if not 0 <= eta < 1:
        raise EtaOutOfRange("eta must lie in [0, 1)", {"eta": eta})
    value, _ = integrate.quad(
        lambda t: poisson_kernel(t, eta), -math.pi, math.pi, points=[0.0], limit=400, epsabs=1e-13, epsrel=1e-13
    )
    return value / (2 * math.pi)


def mcover_threshold(theta_prime: float, eta: float) -> float:
    """log|f(phi^{-1}(0))| が超えるべき値 20 pi eta / ((1 - P_theta'(eta))(1 - eta))"""
    if not 0 < theta_prime <= math.pi:
        raise InvalidParam("theta' must lie in (0, pi]", {"theta_prime": theta_prime})
    p = poisson_kernel(theta_prime, eta)
    if p >= 1:
        raise KernelAtLeastOne(
            "P_theta'(eta) >= 1, eta must exceed cos theta'",
            {"theta_prime": theta_prime, "eta": eta, "kernel": p, "cos_theta_prime": math.cos(theta_prime)},
        )
    return 20 * math.pi * eta / ((1 - p) * (1 - eta))


def C_eps(eps: float) -> float:
    """C(eps) = 160 pi / sin^2 eps"""
    if not 0 < eps < math.pi:
        raise InvalidParam("eps must lie in (0, pi)", {"eps": eps})
    return 160 * math.pi / math.sin(eps) ** 2


def log_fz_threshold(eps: float) -> float:
    """choose_eta が使える log|f(z)| の下限 40 pi / (1 - cos eps)"""
    if not 0 < eps < math.pi:
        raise InvalidParam("eps must lie in (0, pi)", {"eps": eps})
    return 40 * math.pi / (1 - math.cos(eps))


def choose_eta(log_fz: float, epsilon_geom: float) -> Tuple[float, Dict[str, Any]]:
    """eta = 1 - 40 pi / log|f(z)| と 40 pi <= (1 - eta) log|f(z)| <= (1/2) C(eps) sin^2 eps の確認"""
    threshold = log_fz_threshold(epsilon_geom)
    if log_fz < threshold:
        raise LogTooSmall(
            "log|f(z)| is below 40 pi / (1 - cos eps)",
            {"log_fz": log_fz, "threshold": threshold, "eps": epsilon_geom},
        )
    eta = 1 - 40 * math.pi / log_fz
    product = (1 - eta) * log_fz
    upper = 0.5 * C_eps(epsilon_geom) * math.sin(epsilon_geom) ** 2
    tol = 1e-9 * max(1.0, product)
    kernel_bound = C_eps(epsilon_geom) / log_fz
    report = {
        "log_fz": log_fz,
        "eps": epsilon_geom,
        "eta": eta,
        "threshold": threshold,
        "lower": 40 * math.pi,
        "product": product,
        "upper": upper,
        "lower_holds": product >= 40 * math.pi - tol,
        "upper_holds": product <= upper + tol,
        "kernel_bound": kernel_bound,
        "C_eps": C_eps(epsilon_geom),
    }
    return eta, report


class CoverThresholds:
    """CoverThresholds クラス

    hypcover と BCover の閾値

    Attributes:
        log_K (float): log K
        lam (float): 双曲距離の予算 (1/2) log(1 + log K/10pi)
        c (float): BCover の環の比
        r0 (float): BCover の内径
        bcover_floor (float): log M_D(r0) が超えるべき値 8 pi^2 c/(c-1)
    """

    def __init__(self, log_K: float, c: float = 2.0, r0: float = 1.0) -> None:
        if not c > 1:
            raise InvalidParam("c must exceed 1", {"c": c})
        if not r0 > 0:
            raise InvalidParam("r0 must be positive", {"r0": r0})
        self.log_K = float(log_K)
        self.lam = lambda_threshold_log(log_K)
        self.c = float(c)
        self.r0 = float(r0)
        self.bcover_floor = bcover_floor(c)

    @classmethod
    def from_K(cls, K: float, c: float = 2.0, r0: float = 1.0) -> CoverThresholds:
        if not K > 1:
            raise KNotAboveOne("K must exceed 1", {"K": K})
        return cls(math.log(K), c, r0)

    def get_lambda(self) -> float:
        return self.lam

    def to_dict(self) -> Dict[str, Any]:
        return {
            "log_K": self.log_K,
            "lambda": self.lam,
            "c": self.c,
            "r0": self.r0,
            "bcover_floor": self.bcover_floor,
        }


def bcover_floor(c: float) -> float:
    """8 pi^2 c / (c - 1)"""
    if not c > 1:
        raise InvalidParam("c must exceed 1", {"c": c})
    return 8 * math.pi ** 2 * c / (c - 1)


class HarmonicEstimate:
    """HarmonicEstimate クラス

    walk-on-spheres による調和測度 omega(z, arc; region) の推定

    Attributes:
        region (Polygon): 領域
        z (complex): 評価点
        arc (List[int]): 辺番号
        omega (float): 推定値
        ci95 (float): 95% Wilson 区間の広い側の半幅（区間は get_interval で [0, 1] に切り詰める）
        walks (int): 歩行の数
        seed (int): 乱数の種
        unfinished (int): 最大歩数で打ち切った歩行の数
        epsilon_geom, theta_prime, eta, C_eps: MCover で使う付随量（なければ None）
    """

    def __init__(
        self,
        region: Polygon,
        z: complex,
        arc: List[int],
        omega: float,
        ci95: float,
        walks: int,
        seed: int,
        eps_stop: float,
        unfinished: int = 0,
        epsilon_geom: Optional[float] = None,
        theta_prime: Optional[float] = None,
        eta: Optional[float] = None,
    ) -> None:
        self.region = region
        self.z = complex(z)
        self.arc = arc
        self.omega = omega
        self.ci95 = ci95
        self.walks = walks
        self.seed = seed
        self.eps_stop = eps_stop
        self.unfinished = unfinished
        self.epsilon_geom = epsilon_geom
        self.theta_prime = theta_prime
        self.eta = eta
        self.C_eps = C_eps(epsilon_geom) if epsilon_geom else None
        if eta is not None and theta_prime is not None and not math.cos(theta_prime) < eta < 1:
            raise EtaOutOfRange("eta must lie in (cos theta', 1)", {"eta": eta, "theta_prime": theta_prime})

    def __repr__(self) -> str:
        return "<HarmonicEstimate omega={:.4f} +- {:.4f} walks={}>".format(self.omega, self.ci95, self.walks)

    def get_omega(self) -> float:
        return self.omega

    def get_ci95(self) -> float:
        return self.ci95

    def get_interval(self) -> Tuple[float, float]:
        return max(0.0, self.omega - self.ci95), min(1.0, self.omega + self.ci95)

    def bounded_below(self, epsilon: float) -> bool:
        """omega - ci95 >= epsilon"""
        return self.omega - self.ci95 >= epsilon

    def to_dict(self) -> Dict[str, Any]:
        return {
            "region": self.region.to_dict(),
            "z": [self.z.real, self.z.imag],
            "arc": self.arc,
            "omega": self.omega,
            "ci95": self.ci95,
            "interval": list(self.get_interval()),
            "walks": self.walks,
            "seed": self.seed,
            "eps_stop": self.eps_stop,
            "unfinished": self.unfinished,
            "epsilon_geom": self.epsilon_geom,
            "theta_prime": self.theta_prime,
            "eta": self.eta,
            "C_eps": self.C_eps,
        }


def batch_generator(seed: int, batch: int) -> np.random.Generator:
    """(seed, batch) から決まるカウンタ型乱数生成器"""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2 ** 64 - 1), batch])))


def _wos_batch(
    region: Polygon, z: complex, count: int, eps_stop: float, seed: int, batch: int
) -> Tuple[np.ndarray, int]:
    """count 本の歩行を進め、行き着いた辺の番号を返す"""
    rng = batch_generator(seed, batch)
    P = np.full(count, complex(z))
    exit_segment = np.full(count, -1, dtype=int)
    active = np.arange(count)
    for _ in range(WOS_MAX_STEPS):
        d, seg = region.distance_array(P[active])
        stop = d < eps_stop
        exit_segment[active[stop]] = seg[stop]
        active = active[~stop]
        if not len(active):
            break
        theta = rng.uniform(0.0, 2 * math.pi, len(active))
        P[active] += d[~stop] * np.exp(1j * theta)
    unfinished = len(active)
    if unfinished:
        _, seg = region.distance_array(P[active])
        exit_segment[active] = seg
    return exit_segment, unfinished


def harmonic_measure_wos(
    region: Polygon,
    z: complex,
    arc: Any,
    walks: int = WOS_WALKS,
    seed: int = 0,
    eps_stop: Optional[float] = None,
    epsilon_geom: Optional[float] = None,
    theta_prime: Optional[float] = None,
    eta: Optional[float] = None,
) -> HarmonicEstimate:
    """walk-on-spheres による調和測度の推定

    最大の円への一様な跳躍を境界から eps_stop 以内に入るまで繰り返し、最寄りの辺で分類する
    """
    z = complex(z)
    segments = region.arc_segments(arc)
    if not segments:
        raise ArcEmpty("arc has no boundary segments", {"arc": str(arc)})
    if walks < 1:
        raise InvalidParam("walks must be positive", {"walks": walks})
    eps_stop = eps_stop or WOS_STOP * region.get_diameter()
    if not region.contains(z) or region.distance(z) <= eps_stop:
        raise PointNotInterior("z is not interior to the region", {"z": [z.real, z.imag]})

    sizes = [min(WOS_BATCH, walks - start) for start in range(0, walks, WOS_BATCH)]
    threads = config.get_threads()

    def run(batch: int) -> Tuple[np.ndarray, int]:
        return _wos_batch(region, z, sizes[batch], eps_stop, seed, batch)

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            results = list(executor.map(run, range(len(sizes))))
    else:
        results = [run(b) for b in range(len(sizes))]

    marked = np.zeros(len(region), dtype=bool)
    marked[segments] = True
    hits = sum(int(np.sum(marked[exits])) for exits, _ in results)
    unfinished = sum(u for _, u in results)
    if unfinished:
        logger.warning("%d walks reached the step limit and were classified in place", unfinished)
    omega = hits / walks
    # Wilson 区間の広い側（omega が 0 や 1 でも幅が残る）
    interval = stats.binomtest(hits, walks).proportion_ci(confidence_level=0.95, method="wilson")
    ci = float(max(omega - interval.low, interval.high - omega))
    return HarmonicEstimate(
        region, z, segments, omega, ci, walks, seed, eps_stop, unfinished, epsilon_geom, theta_prime, eta
    )


def harmonic_measure_grid(region: Polygon, z: complex, arc: Any, nodes: int = LAPLACE_GRID) -> float:
    """5 点差分（境界近くは Shortley-Weller）で解いた調和測度

    格子は z が格子点になるように置く
    """
    z = complex(z)
    segments = region.arc_segments(arc)
    if not segments:
        raise ArcEmpty("arc has no boundary segments", {"arc": str(arc)})
    if not region.contains(z):
        raise PointNotInterior("z is not interior to the region", {"z": [z.real, z.imag]})
    x0, x1, y0, y1 = region.get_bounds()
    h = max(x1 - x0, y1 - y0) / nodes
    jx = np.arange(math.floor((x0 - z.real) / h), math.ceil((x1 - z.real) / h) + 1)
    iy = np.arange(math.floor((y0 - z.imag) / h), math.ceil((y1 - z.imag) / h) + 1)
    ncols = len(jx)
    X, Y = np.meshgrid(z.real + h * jx, z.imag + h * iy)
    Zg = (X + 1j * Y).ravel()
    inside = region.contains_array(Zg)
    inside &= region.distance_array(Zg)[0] > 1e-9 * h
    number = -np.ones(len(Zg), dtype=int)
    n = int(np.sum(inside))
    number[inside] = np.arange(n)
    marked = np.zeros(len(region), dtype=bool)
    marked[segments] = True

    idx = np.flatnonzero(inside)
    me = number[idx]
    row = idx // ncols
    # 方向ごとの (境界までの割合 s, 境界値, 境界を跨ぐか, 隣の番号)
    arms: Dict[str, Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = {}
    for name, offset, step in (("x+", 1, h), ("x-", -1, -h), ("y+", ncols, 1j * h), ("y-", -ncols, -1j * h)):
        neighbor = np.clip(idx + offset, 0, len(Zg) - 1)
        valid = (idx + offset >= 0) & (idx + offset < len(Zg))
        if abs(offset) == 1:
            valid &= neighbor // ncols == row
        neighbor_inside = valid & inside[neighbor]
        s, seg = region.ray_hits(Zg[idx], np.full(len(idx), step))
        crossing = ~neighbor_inside | (s < 1)
        s = np.where(crossing & np.isfinite(s), np.clip(s, 1e-6, 1.0), 1.0)
        value = (seg >= 0) & marked[np.clip(seg, 0, None)]
        arms[name] = (s, value.astype(float), crossing, number[neighbor])

    rows: List[np.ndarray] = [me]
    cols: List[np.ndarray] = [me]
    vals: List[np.ndarray] = []
    rhs = np.zeros(n)
    diag = np.zeros(n)
    for plus, minus in (("x+", "x-"), ("y+", "y-")):
        # h^2 u'' ~ 2/(sp+sm) ((u_p - u)/sp - (u - u_m)/sm)
        total = arms[plus][0] + arms[minus][0]
        for name in (plus, minus):
            s, value, crossing, neighbor = arms[name]
            w = 2 / (total * s)
            diag += w
            rhs += np.where(crossing, w * value, 0.0)
            rows.append(me[~crossing])
            cols.append(neighbor[~crossing])
            vals.append(-w[~crossing])
    vals.insert(0, diag)
    A = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    u = sparse_linalg.spsolve(A, rhs)
    center = int(np.flatnonzero(iy == 0)[0]) * ncols + int(np.flatnonzero(jx == 0)[0])
    if number[center] < 0:
        raise PointNotInterior("z is too close to the boundary for the grid", {"h": h})
    return float(u[number[center]])


def mcover_sweep(eps: float, u_values: Sequence[float]) -> List[Dict[str, Any]]:
    """eta = 1 - 40 pi/u と P <= C(eps)/u のもとで mcover_threshold < u となるか"""
    rows = []
    base = log_fz_threshold(eps)
    for u in u_values:
        if u < base:
            continue
        eta = 1 - 40 * math.pi / u
        kernel = C_eps(eps) / u
        bound = 20 * math.pi * eta / ((1 - kernel) * (1 - eta)) if kernel < 1 else math.inf
        rows.append({"u": u, "eta": eta, "kernel_bound": kernel, "threshold": bound, "holds": bound < u})
    return rows
