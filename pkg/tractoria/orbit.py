#!/usr/bin/env python

from __future__ import annotations

import logging
import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from tractoria import config
from tractoria.complexfn import Example2, FunctionSpec, mp_from_pair, mp_to_pair, principal_arg
from tractoria.covering import (
    CoverCertificate,
    Region,
    boundary_arcs,
    image_annulus_certificate,
    lemma_record,
    mcover_check,
)
from tractoria.errors import (
    ChainBroken,
    CircleMissesTract,
    ConditionNeverMet,
    InvalidParam,
    NearZero,
    NewtonStall,
    PrecisionCap,
    PreconditionFails,
    UnboundedRepeat,
)
from tractoria.metrics import HarmonicEstimate, batch_generator, bcover_floor, harmonic_measure_wos
from tractoria.tract import TractRegion, iterate_MD, log_spaced_radii, max_modulus_on_tract
from tractoria.utils import RateExpr

logger = logging.getLogger(__name__)

PULLBACK_NEWTON_STEPS = config.PULLBACK_NEWTON_STEPS
PULLBACK_STARTS = config.PULLBACK_STARTS
REPEAT_CAP = config.REPEAT_CAP
PRECISION_CAP = config.PRECISION_CAP
# a_n の探索の上限
INDEX_LIMIT = 2 ** 62


def log_MD(fn: FunctionSpec, tract: TractRegion, r: float) -> float:
    """log M_D(r)（窓で確定できなければ漸近形）"""
    if r < 1e300 and tract.covers_circle(r):
        try:
            return float(max_modulus_on_tract(fn, tract, r).value)
        except CircleMissesTract:
            pass
    return float(fn.log_growth(math.log(r)))


class SlowTarget:
    """SlowTarget クラス

    遅く増大する列 a_n（正で非減少）

    Attributes:
        a (Callable): n -> a_n（numpy 配列も受け付けるとよい）
        label (str): 表示用の式
        growth_cap (float): a_{n+1} <= K M_D(a_n) の K（なければ None）
    """

    def __init__(self, a: Callable[[Any], Any], label: str = "", growth_cap: Optional[float] = None) -> None:
        if growth_cap is not None and not growth_cap > 0:
            raise InvalidParam("growth cap must be positive", {"K": growth_cap})
        self.a = a
        self.label = label
        self.growth_cap = growth_cap

    def __repr__(self) -> str:
        return "<SlowTarget a_n = {}>".format(self.label or self.a)

    @classmethod
    def from_expr(cls, expr: str, growth_cap: Optional[float] = None) -> SlowTarget:
        rate = RateExpr(expr)
        return cls(rate.evaluate, expr, growth_cap)

    def __call__(self, n: int) -> float:
        return float(self.a(n))

    def values(self, ns: Any) -> np.ndarray:
        ns = np.asarray(ns)
        try:
            out = np.asarray(self.a(ns), dtype=float)
            if out.shape == ns.shape:
                return out
        except (TypeError, ValueError):
            pass
        return np.array([float(self.a(int(n))) for n in ns.ravel()]).reshape(ns.shape)

    def check(self, n_max: int) -> None:
        """[0, n_max] で有限・非負・非減少・端点で増加していること（正値は読む添字で確かめる）"""
        v = self.values(np.arange(n_max + 1))
        if not np.all(np.isfinite(v)) or not np.all(v >= 0):
            raise InvalidParam("a_n must be nonnegative and finite", {"n_max": n_max})
        if np.any(np.diff(v) < 0):
            k = int(np.flatnonzero(np.diff(v) < 0)[0])
            raise InvalidParam("a_n must be nondecreasing", {"n": k, "a_n": float(v[k]), "a_n+1": float(v[k + 1])})
        if n_max > 0 and not v[-1] > v[0]:
            raise InvalidParam("a_n does not grow on the tested range", {"n_max": n_max})

    def first_index_at_least(self, value: float, start: int = 0) -> int:
        """a_N >= value となる最小の N >= start（非減少を仮定）"""
        if self(start) >= value:
            return start
        hi = max(1, start)
        while self(hi) < value:
            hi *= 2
            if hi > INDEX_LIMIT:
                raise InvalidParam("a_n never reaches the value", {"value": value})
        lo = max(start, hi // 2)
        while lo < hi:
            mid = (lo + hi) // 2
            if self(mid) >= value:
                hi = mid
            else:
                lo = mid + 1
        return lo

    def check_growth_cap(self, fn: FunctionSpec, tract: TractRegion, n_max: int) -> List[Dict[str, Any]]:
        """a_{n+1} <= K M_D(a_n) を log スケールで確認"""
        if self.growth_cap is None:
            raise InvalidParam("growth cap K is required", {"target": self.label})
        rows = []
        log_K = math.log(self.growth_cap)
        for n in range(n_max):
            if not self(n) > 0:
                continue
            lhs = math.log(self(n + 1))
            rhs = log_K + log_MD(fn, tract, self(n))
            rows.append({"n": n, "log_a_next": lhs, "log_K_MD": rhs, "passed": lhs <= rhs})
            if not lhs <= rhs:
                raise PreconditionFails("a_{n+1} <= K M_D(a_n) fails", rows[-1])
        return rows

    def to_dict(self) -> Dict[str, Any]:
        return {"a": self.label, "growth_cap": self.growth_cap}


class BlockSchedule:
    """BlockSchedule クラス

    Sigma_{m_j}, ..., Sigma_{n_j} の巡回を q_j 回繰り返して脱出を遅らせる並び E_k

    Attributes:
        n, m (List[int]): 各ブロックの端（n[0] は最初の区間の終わり）
        p (List[int]): ブロックの長さ n_j - m_j + 1
        q (List[int]): 繰り返し回数（q[0] = 0）
        Q (List[int]): 累積 q_1 p_1 + ... + q_j p_j（Q[0] = 0）
        N (List[int]): a_{N_j} >= max{s_n : n <= n_j} となる最小の N_j
        sigma_maxmod (List[float]): s_n = max{|z| : z in closure Sigma_n}
        threshold (int): n_{j-1} + Q_{j-1} >= N_j がこれ以降のすべての j で成り立つ最小の j
        truncated (Dict): q_j が上限を超えて打ち切ったときの記録
        identity (bool): E_k = Sigma_k（繰り返しなし）
    """

    def __init__(
        self,
        n: List[int],
        m: List[int],
        q: List[int],
        N: List[int],
        sigma_maxmod: Sequence[float],
        truncated: Optional[Dict[str, Any]] = None,
        identity: bool = False,
    ) -> None:
        self.n = list(n)
        self.m = list(m)
        self.p = [nj - mj + 1 for nj, mj in zip(n, m)]
        self.q = list(q)
        self.Q = [0]
        for j in range(1, len(q)):
            self.Q.append(self.Q[-1] + self.q[j] * self.p[j])
        self.N = list(N)
        self.sigma_maxmod = [float(s) for s in sigma_maxmod]
        self.truncated = truncated
        self.identity = identity
        self.threshold = self._threshold()

    def __repr__(self) -> str:
        return "<BlockSchedule {} blocks length {}{}>".format(
            self.blocks(), self.length(), " truncated" if self.truncated else ""
        )

    @classmethod
    def identity_schedule(cls, count: int, sigma_maxmod: Sequence[float]) -> BlockSchedule:
        if count < 1:
            raise InvalidParam("schedule needs at least one set", {"count": count})
        return cls([count - 1], [count - 1], [0], [0], sigma_maxmod, identity=True)

    def _threshold(self) -> int:
        if self.identity:
            return 0
        j = self.blocks()
        while j >= 1 and self.n[j - 1] + self.Q[j - 1] >= self.N[j]:
            j -= 1
        return j + 1

    def blocks(self) -> int:
        return len(self.q) - 1

    def length(self) -> int:
        """E_k が定まる k の個数"""
        if self.identity:
            return self.n[0] + 1
        J = self.blocks()
        return self.n[J] + self.Q[J] if J else self.n[0] + 1

    def guaranteed_start(self) -> int:
        """k >= n_{j-1} + Q_{j-1}（j >= threshold）で |f^k| <= a_k が保証される"""
        if self.identity:
            return 0
        j = self.threshold
        if j > self.blocks():
            return self.length()
        return self.n[j - 1] + self.Q[j - 1]

    def set_index(self, k: int) -> int:
        """E_k = closure Sigma_{set_index(k)}"""
        return int(self.set_indices(np.array([k]))[0])

    def set_indices(self, ks: Any) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        if np.any(ks < 0) or np.any(ks >= self.length()):
            raise InvalidParam("k outside the schedule", {"length": self.length()})
        if self.identity:
            return ks.copy()
        out = np.full(ks.shape, -1, dtype=np.int64)
        first = ks <= self.n[0]
        out[first] = ks[first]
        for j in range(1, self.blocks() + 1):
            lo = self.n[j - 1] + self.Q[j - 1]
            hi = self.n[j] + self.Q[j - 1]
            walk = (ks >= lo) & (ks <= hi)
            out[walk] = ks[walk] - self.Q[j - 1]
            cycle = (ks > hi) & (ks < self.n[j] + self.Q[j])
            out[cycle] = self.m[j] + np.mod(ks[cycle] - (hi + 1), self.p[j])
        return out

    def links(self) -> List[Tuple[int, int]]:
        """E_k -> E_{k+1} に現れる被覆 (Sigma_a, Sigma_b) の一覧"""
        if self.identity:
            return [(i, i + 1) for i in range(self.n[0])]
        pairs = {(i, i + 1) for i in range(self.n[self.blocks()])}
        for j in range(1, self.blocks() + 1):
            pairs.add((self.n[j], self.m[j]))
        return sorted(pairs)

    def holdup_check(self, a: SlowTarget, j: int) -> Dict[str, Any]:
        """n_{j-1} + Q_{j-1} <= k < n_j + Q_j で max|E_k| <= a_k か（集合の上界だけで判定）"""
        if not 1 <= j <= self.blocks():
            raise InvalidParam("block index out of range", {"j": j})
        lo = self.n[j - 1] + self.Q[j - 1]
        hi = min(self.n[j] + self.Q[j], self.length())
        ks = np.arange(lo, hi)
        s = np.asarray(self.sigma_maxmod)[self.set_indices(ks)]
        av = a.values(ks)
        margin = av - s
        return {
            "j": j,
            "k_range": [int(lo), int(hi)],
            "min_margin": float(np.min(margin)) if len(ks) else math.inf,
            "passed": bool(np.all(margin >= 0)),
        }

    def to_dict(self, expand: bool = False) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "n": self.n,
            "m": self.m,
            "p": self.p,
            "q": self.q,
            "Q": self.Q,
            "N": self.N,
            "sigma_maxmod": self.sigma_maxmod,
            "threshold": self.threshold,
            "guaranteed_start": self.guaranteed_start(),
            "length": self.length(),
            "truncated": self.truncated,
            "identity": self.identity,
        }
        if expand:
            data["E"] = self.set_indices(np.arange(self.length())).tolist()
        return data


def build_schedule(
    a: SlowTarget,
    sigma_maxmod: Sequence[float],
    depth: int,
    n_seq: Optional[Sequence[int]] = None,
    m_seq: Optional[Sequence[int]] = None,
    cap: int = REPEAT_CAP,
) -> BlockSchedule:
    """depth 個のブロック（既定は n_j = m_j = j）の繰り返し回数を決める"""
    if depth < 0:
        raise InvalidParam("depth must be nonnegative", {"depth": depth})
    n = list(n_seq) if n_seq is not None else list(range(depth + 1))
    m = list(m_seq) if m_seq is not None else list(range(depth + 1))
    if len(n) < depth + 1 or len(m) < depth + 1:
        raise InvalidParam("n_j and m_j must cover every block", {"depth": depth})
    n, m = n[: depth + 1], m[: depth + 1]
    for j in range(1, depth + 1):
        if not n[j] > n[j - 1] or not m[j] >= m[j - 1] or not 0 <= m[j] <= n[j]:
            raise InvalidParam("need increasing n_j, m_j with 0 <= m_j <= n_j", {"j": j})
    if len(sigma_maxmod) < n[-1] + 1 or not all(math.isfinite(s) for s in sigma_maxmod[: n[-1] + 1]):
        raise InvalidParam("sigma_maxmod must be finite on every used set", {"needed": n[-1] + 1})
    a.check(n[-1])

    running = np.maximum.accumulate(np.asarray(sigma_maxmod[: n[-1] + 1], dtype=float))
    N = [a.first_index_at_least(float(running[nj])) for nj in n]
    for j, Nj in enumerate(N):
        if not a(Nj) > 0:
            raise InvalidParam("a_{N_j} must be positive", {"j": j, "N_j": Nj, "a": a(Nj)})
    q = [0]
    Q = 0
    truncated = None
    for j in range(1, depth + 1):
        p = n[j] - m[j] + 1
        if j < depth:
            need = N[j + 1] - n[j] - Q
            qj = max(1, -(-need // p))
        else:
            qj = 1
        if qj > cap:
            error = UnboundedRepeat("repeat count exceeds the cap", {"j": j, "q": qj, "cap": cap})
            logger.warning("%s %s", error, error.details)
            truncated = error.to_dict()
            q.append(cap)
            n, m, N = n[: j + 1], m[: j + 1], N[: j + 1]
            break
        q.append(qj)
        Q += qj * p
    return BlockSchedule(n, m, q, N, sigma_maxmod, truncated)


# ----------------------------------------------------------------------
# Sigma の鎖
# ----------------------------------------------------------------------


class ChainLink:
    """ChainLink クラス

    鎖の一つの集合 Sigma_n と f(Sigma_n) の被覆の記録

    Attributes:
        index (int): n
        log_radii (Tuple[float, float]): Sigma_n を含む環（log スケール）
        region (Region): 領域（log スケールだけの鎖では None）
        certificate (CoverCertificate): Sigma_n と Sigma_{n+1} を覆う証明
        record (Dict): 補題の前提や予言の記録
        harmonic (HarmonicEstimate): 調和測度（bgrhm のみ）
    """

    def __init__(
        self,
        index: int,
        log_radii: Tuple[float, float],
        region: Optional[Region] = None,
        certificate: Optional[CoverCertificate] = None,
        record: Optional[Dict[str, Any]] = None,
        harmonic: Optional[HarmonicEstimate] = None,
    ) -> None:
        self.index = index
        self.log_radii = log_radii
        self.region = region
        self.certificate = certificate
        self.record = record or {}
        self.harmonic = harmonic

    def __repr__(self) -> str:
        status = self.certificate.status if self.certificate else "lemma"
        return "<ChainLink {} log|z| in ({:.4g}, {:.4g}) {}>".format(self.index, *self.log_radii, status)

    def get_maxmod(self) -> float:
        """max{|z| : z in closure Sigma_n}"""
        if self.region is not None:
            return float(np.max(np.abs(self.region.polygon.A)))
        return math.exp(self.log_radii[1]) if self.log_radii[1] < 700 else math.inf

    def is_certified(self) -> bool:
        if self.certificate is not None:
            return self.certificate.status == "certified"
        return bool(self.record.get("accepted", False))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "log_radii": list(self.log_radii),
            "region": self.region.to_dict() if self.region else None,
            "certificate": self.certificate.to_dict() if self.certificate else None,
            "record": self.record,
            "harmonic": self.harmonic.to_dict() if self.harmonic else None,
        }


class SigmaChain:
    """SigmaChain クラス

    f(closure Sigma_n) が closure Sigma_n と closure Sigma_{n+1} を覆う集合の列

    Attributes:
        fn (FunctionSpec): 関数
        mode (str): theorem1-demo, theorem1-lemma, theorem2-demo, theorem2-lemma, bgrhm
        links (List[ChainLink]): Sigma_0, Sigma_1, ...
        conditions (Dict): 前提の確認結果
        start (int): 鎖の最初の添字（theorem2 の N）
    """

    def __init__(
        self,
        fn: FunctionSpec,
        mode: str,
        links: List[ChainLink],
        conditions: Optional[Dict[str, Any]] = None,
        start: int = 0,
    ) -> None:
        self.fn = fn
        self.mode = mode
        self.links = links
        self.conditions = conditions or {}
        self.start = start

    def __repr__(self) -> str:
        return "<SigmaChain {} {} sets from {}>".format(self.mode, len(self.links), self.start)

    def __len__(self) -> int:
        return len(self.links)

    def get_regions(self) -> List[Region]:
        regions = [link.region for link in self.links]
        if any(r is None for r in regions):
            raise InvalidParam("chain has no regions in lemma mode", {"mode": self.mode})
        return regions  # type: ignore

    def get_sigma_maxmod(self) -> List[float]:
        return [link.get_maxmod() for link in self.links]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fn": self.fn.to_dict(),
            "mode": self.mode,
            "start": self.start,
            "conditions": self.conditions,
            "links": [link.to_dict() for link in self.links],
        }


def _certify_link(
    fn: FunctionSpec, region: Region, annulus: Tuple[float, float], index: int, probes: Tuple[int, int]
) -> CoverCertificate:
    certificate = image_annulus_certificate(fn, region, annulus, probes)
    if certificate.status != "certified":
        raise ChainBroken(
            "image of Sigma_n does not certifiably cover the next sets",
            {"n": index, "status": certificate.status, "annulus": list(annulus), "reasons": certificate.reasons},
        )
    return certificate


def build_chain_theorem1(
    fn: FunctionSpec,
    tract: TractRegion,
    r0: float,
    depth: int,
    mode: str = "demo",
    probes: Tuple[int, int] = (config.PROBE_RADII, config.PROBE_ANGLES),
) -> SigmaChain:
    """Sigma_n = A(r_n, 2 r_n) cap D, r_{n+1} = 2 r_n

    demo: f(Sigma_n) が A(r_n, 4 r_n) を覆うことを像の証明で確かめる
    lemma: r_0 > e^{16 pi^2} と M_D(r) >= 4r を log スケールで確かめ BCover の予言を記録する
    """
    if depth < 1:
        raise InvalidParam("depth must be positive", {"depth": depth})
    if mode not in ("demo", "lemma"):
        raise InvalidParam("mode must be demo or lemma", {"mode": mode})
    log_r0 = math.log(r0)
    checks = []
    for r in log_spaced_radii(r0, r0 * 2 ** (depth + 1), max(2, depth + 2)):
        lhs = log_MD(fn, tract, r) if mode == "demo" else float(fn.log_growth(math.log(r)))
        row = {"r": r, "log_MD": lhs, "log_4r": math.log(4 * r), "passed": lhs >= math.log(4 * r)}
        checks.append(row)
        if not row["passed"]:
            raise PreconditionFails("M_D(r) >= 4r fails", row)
    conditions: Dict[str, Any] = {"M_D_ge_4r": checks, "r0": r0}
    links: List[ChainLink] = []
    floor = bcover_floor(2.0)
    if mode == "lemma":
        conditions["floor"] = floor
        if not log_r0 > floor:
            raise PreconditionFails("r0 must exceed e^{16 pi^2}", {"log_r0": log_r0, "floor": floor})
    for n in range(depth):
        log_r = log_r0 + n * math.log(2)
        if mode == "demo":
            r = math.exp(log_r)
            region = Region.annulus_tract(tract, r, 2 * r)
            certificate = _certify_link(fn, region, (log_r, log_r + math.log(4)), n, probes)
            links.append(ChainLink(n, (log_r, log_r + math.log(2)), region, certificate))
        else:
            log_md = float(fn.log_growth(log_r))
            record = {
                "accepted": bool(log_md >= log_r + math.log(4)),
                "annulus": [floor, log_md],
                "needed": [log_r, log_r + math.log(4)],
                "extrapolated": True,
            }
            if not record["accepted"]:
                raise ChainBroken("BCover annulus misses Sigma_{n+1}", dict(record, n=n))
            links.append(ChainLink(n, (log_r, log_r + math.log(2)), record=record))
    logger.info("theorem1 %s chain of %d sets from r0=%g", mode, depth, r0)
    return SigmaChain(fn, "theorem1-" + mode, links, conditions)


def theorem2_conditions(
    fn: FunctionSpec, tract: TractRegion, a: SlowTarget, C: float, c: float, n: int, lemma: bool
) -> Dict[str, Any]:
    """a_n > e^{8 pi^2 c/(c-1)}, M_D((C/c) a_n) > C a_n, M_D(C a_n/c)/M_D(a_n) > C K"""
    an = a(n)
    if not an > 0:
        return {"n": n, "a_n": an, "holds": False}
    K = a.growth_cap or 1.0
    floor = bcover_floor(c)
    md_low = log_MD(fn, tract, an)
    md_high = log_MD(fn, tract, C / c * an)
    row = {
        "n": n,
        "log_a_n": math.log(an),
        "floor": floor,
        "floor_holds": math.log(an) > floor,
        "log_MD_Ca_c": md_high,
        "log_Ca": math.log(C * an),
        "growth_holds": md_high > math.log(C * an),
        "log_ratio": md_high - md_low,
        "log_CK": math.log(C * K),
        "ratio_holds": md_high - md_low > math.log(C * K),
    }
    row["holds"] = row["growth_holds"] and row["ratio_holds"] and (row["floor_holds"] or not lemma)
    return row


def build_chain_theorem2(
    fn: FunctionSpec,
    tract: TractRegion,
    a: SlowTarget,
    C: float,
    c: float,
    depth: int,
    mode: str = "demo",
    shrinking: bool = False,
    search: int = 64,
    probes: Tuple[int, int] = (config.PROBE_RADII, config.PROBE_ANGLES),
) -> SigmaChain:
    """Sigma_n = A((C/c) a_n, C a_n) cap D（n >= N）

    N は [N, search] のすべての n で条件が成り立つ最小の添字
    shrinking では j 番目の集合に C_j = 1 + (C-1)/(j+1), c_j = 1 + (c-1)/(j+1) を使う
    """
    if not 1 < c < C:
        raise InvalidParam("need 1 < c < C", {"C": C, "c": c})
    if depth < 1:
        raise InvalidParam("depth must be positive", {"depth": depth})
    lemma = mode == "lemma"
    a.check(search + depth)
    cap_rows = a.check_growth_cap(fn, tract, search + depth)
    rows = [theorem2_conditions(fn, tract, a, C, c, n, lemma) for n in range(search + 1)]
    N = None
    for n in range(search, -1, -1):
        if not rows[n]["holds"]:
            break
        N = n
    if N is None:
        raise ConditionNeverMet(
            "the growth conditions never hold on the tested range", {"search": search, "last": rows[-1]}
        )
    conditions = {"N": N, "rows": rows, "growth_cap": cap_rows[-1] if cap_rows else None, "shrinking": shrinking}

    def ratios(j: int) -> Tuple[float, float]:
        if shrinking:
            return 1 + (C - 1) / (j + 1), 1 + (c - 1) / (j + 1)
        return C, c

    links: List[ChainLink] = []
    for j in range(depth):
        n = N + j
        Cj, cj = ratios(j)
        Cn, cn = ratios(j + 1)
        r_in, r_out = Cj / cj * a(n), Cj * a(n)
        needed = (math.log(r_in), math.log(Cn * a(n + 1)))
        if lemma:
            floor = bcover_floor(cj)
            log_md = log_MD(fn, tract, r_in)
            record = {
                "accepted": bool(floor < needed[0] and needed[1] <= log_md),
                "annulus": [floor, log_md],
                "needed": list(needed),
            }
            if not record["accepted"]:
                raise ChainBroken("BCover annulus misses the next set", dict(record, n=n))
            links.append(ChainLink(n, (math.log(r_in), math.log(r_out)), record=record))
        else:
            region = Region.annulus_tract(tract, r_in, r_out)
            certificate = _certify_link(fn, region, needed, n, probes)
            record = {"C": Cj, "c": cj, "a_n": a(n)}
            links.append(ChainLink(n, (math.log(r_in), math.log(r_out)), region, certificate, record))
    logger.info("theorem2 %s chain of %d sets from N=%d", mode, depth, N)
    return SigmaChain(fn, "theorem2-" + mode, links, conditions, N)


def build_chain_bgrhm(
    n_start: int,
    depth: int,
    eps_geom: float = 1.5,
    walks: int = 0,
    seed: int = 0,
    probes: Tuple[int, int] = (config.PROBE_RADII, config.PROBE_ANGLES),
    certify: bool = True,
) -> SigmaChain:
    """e^{z^2} cos z の四辺形 Sigma_n と、MCover の記録・調和測度・像の証明

    予言された環が Sigma_{n+1} を含むかどうかは n ごとに報告する
    """
    fn = FunctionSpec("EXPZ2COS")
    links: List[ChainLink] = []
    contained = []
    for n in range(n_start, n_start + depth):
        region = Region.example2_quadrilateral(n)
        z = Example2.z_point(n)
        arcs = boundary_arcs(region, "level")
        sigma = arcs[0] if arcs else []
        record = lemma_record(lambda: mcover_check(fn, region, z, sigma, eps_geom))
        r_in = (2 * n + 1) * math.pi / 2
        r_next = (2 * n + 5) * math.pi / 2
        if record.get("annulus"):
            lo, hi = record["annulus"]
            record["contains_next"] = bool(lo <= math.log((2 * n + 3) * math.pi / 2) and math.log(r_next) <= hi)
        else:
            record["contains_next"] = False
        contained.append(record["contains_next"])
        harmonic = None
        if walks > 0 and sigma:
            harmonic = harmonic_measure_wos(region.polygon, z, sigma, walks, seed + n)
        certificate = None
        if certify:
            certificate = image_annulus_certificate(fn, region, (math.log(r_in), math.log(r_next)), probes)
        links.append(
            ChainLink(n, (math.log(r_in), math.log(r_in + math.pi)), region, certificate, record, harmonic)
        )
    conditions = {"eps_geom": eps_geom, "contains_next": contained, "walks": walks, "seed": seed}
    return SigmaChain(fn, "bgrhm", links, conditions, n_start)


# ----------------------------------------------------------------------
# 軌道
# ----------------------------------------------------------------------


class ForwardOrbit:
    """ForwardOrbit クラス

    f^k(zeta) の位置（表せる間）と log|f^k(zeta)|

    Attributes:
        positions (List[mpc]): 位置（表せなくなったら None）
        logmods (List[float]): log|f^k|（表せなければ inf）
        precision (int): 精度
    """

    def __init__(self, positions: List[Any], logmods: List[float], precision: int) -> None:
        self.positions = positions
        self.logmods = logmods
        self.precision = precision

    def __len__(self) -> int:
        return len(self.logmods)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "logmods": [v if math.isfinite(v) else None for v in self.logmods],
            "positions": [
                None if z is None else [float(z.real), float(z.imag)] for z in self.positions
            ],
            "precision": self.precision,
        }


def forward_orbit(fn: FunctionSpec, zeta: Any, depth: int, precision: int = config.DEFAULT_PRECISION) -> ForwardOrbit:
    """log スケールの前向き軌道（|f| が EVAL_MAG_LIMIT bit を超えたら位置は捨てる）"""
    limit = config.EVAL_MAG_LIMIT * math.log(2)
    with mpmath.workprec(precision):
        z = mpmath.mpc(zeta)
        positions: List[Any] = [z]
        logmods: List[float] = [float(mpmath.log(abs(z))) if z != 0 else -math.inf]
        for _ in range(depth):
            if z is None:
                positions.append(None)
                logmods.append(math.inf)
                continue
            try:
                lv = fn.eval_log(z, precision)
            except NearZero:
                positions.append(mpmath.mpc(0))
                logmods.append(-math.inf)
                z = mpmath.mpc(0)
                continue
            logmods.append(float(lv.logmod))
            if lv.logmod > limit:
                z = None
            else:
                z = mpmath.exp(lv.to_mpc())
            positions.append(z)
    return ForwardOrbit(positions, logmods, precision)


def _in_closure(region: Region, z: Any) -> bool:
    if z is None:
        return False
    w = complex(z)
    if not (math.isfinite(w.real) and math.isfinite(w.imag)):
        return False
    polygon = region.polygon
    return polygon.contains(w) or polygon.distance(w) <= 1e-9 * (1 + abs(w))


class OrbitWitness:
    """OrbitWitness クラス

    f^k(zeta) in E_k（k <= depth）を満たす zeta と、その前向きの検証

    Attributes:
        fn (FunctionSpec): 関数
        zeta (mpc): 始点
        regions (List[Region]): 使う集合 Sigma_i
        set_ids (List[int]): E_k = Sigma_{set_ids[k]}
        bounds (List[Tuple[float, float]]): log|f^k| の許容範囲（なければ None）
        precision (int): 構成した精度
        guaranteed_start (int): 並びから保証される開始位置
        orbit (ForwardOrbit): 前向き軌道
        memberships (List[bool]): f^k(zeta) in E_k
        bound_checks (List[bool]): log|f^k| が範囲内
        N_start (int): ここから depth まですべての bound_check が通る最小の k
    """

    def __init__(
        self,
        fn: FunctionSpec,
        zeta: Any,
        regions: List[Region],
        set_ids: List[int],
        precision: int,
        bounds: Optional[List[Tuple[float, float]]] = None,
        guaranteed_start: int = 0,
    ) -> None:
        if bounds is not None and len(bounds) != len(set_ids):
            raise InvalidParam("bounds must match the orbit length", {"bounds": len(bounds), "sets": len(set_ids)})
        self.fn = fn
        with mpmath.workprec(precision):
            self.zeta = mpmath.mpc(zeta)
        self.regions = regions
        self.set_ids = list(set_ids)
        self.bounds = bounds
        self.precision = precision
        self.guaranteed_start = guaranteed_start
        self.orbit = forward_orbit(fn, self.zeta, self.get_depth(), precision)
        self.memberships = self._memberships(self.orbit)
        self.bound_checks = self._bound_checks(self.orbit)
        self.N_start = self._n_start()

    def __repr__(self) -> str:
        return "<OrbitWitness depth={} N_start={} precision={}>".format(self.get_depth(), self.N_start, self.precision)

    def get_depth(self) -> int:
        return len(self.set_ids) - 1

    def _memberships(self, orbit: ForwardOrbit) -> List[bool]:
        return [_in_closure(self.regions[i], z) for i, z in zip(self.set_ids, orbit.positions)]

    def _bound_checks(self, orbit: ForwardOrbit) -> List[bool]:
        if self.bounds is None:
            return [True] * len(orbit)
        return [lo <= v <= hi for (lo, hi), v in zip(self.bounds, orbit.logmods)]

    def _n_start(self) -> int:
        k = len(self.bound_checks)
        while k > 0 and self.bound_checks[k - 1]:
            k -= 1
        return k

    def verify(self) -> Dict[str, Any]:
        """保存した精度と 2 倍の精度で前向きに計算し直して判定を比べる"""
        again = forward_orbit(self.fn, self.zeta, self.get_depth(), self.precision)
        double = forward_orbit(self.fn, self.zeta, self.get_depth(), 2 * self.precision)
        m1, m2 = self._memberships(again), self._memberships(double)
        b1, b2 = self._bound_checks(again), self._bound_checks(double)
        return {
            "memberships": all(m1),
            "bound_checks_from_start": all(b1[self.N_start:]),
            "stable": m1 == m2 and b1 == b2,
            "verified": all(m1) and m1 == m2 and b1 == b2,
        }

    def to_dict(self) -> Dict[str, Any]:
        return {
            "fn": self.fn.to_dict(),
            "zeta": {
                "re": mp_to_pair(self.zeta.real),
                "im": mp_to_pair(self.zeta.imag),
                "str": mpmath.nstr(self.zeta, 30),
            },
            "precision": self.precision,
            "depth": self.get_depth(),
            "set_ids": self.set_ids,
            "regions": [r.to_dict() for r in self.regions],
            "bounds": None if self.bounds is None else [[_finite(lo), _finite(hi)] for lo, hi in self.bounds],
            "orbit": self.orbit.to_dict(),
            "memberships": self.memberships,
            "bound_checks": self.bound_checks,
            "N_start": self.N_start,
            "guaranteed_start": self.guaranteed_start,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> OrbitWitness:
        try:
            precision = int(data["precision"])
            with mpmath.workprec(precision):
                zeta = mpmath.mpc(mp_from_pair(data["zeta"]["re"]), mp_from_pair(data["zeta"]["im"]))
            bounds = None
            if data.get("bounds") is not None:
                bounds = [
                    (-math.inf if lo is None else lo, math.inf if hi is None else hi) for lo, hi in data["bounds"]
                ]
            return cls(
                FunctionSpec.from_dict(data["fn"]),
                zeta,
                [Region.from_dict(r) for r in data["regions"]],
                data["set_ids"],
                precision,
                bounds,
                int(data.get("guaranteed_start", 0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidParam("malformed witness", {"reason": str(e)})


def _finite(x: float) -> Optional[float]:
    return x if math.isfinite(x) else None


def target_point(region: Region) -> complex:
    """重心（外なら内部の格子点のうち最も近いもの、同じ距離なら絶対値の小さいもの）"""
    polygon = region.polygon
    area = 0.0
    moment = 0j
    for ring in polygon.get_rings():
        a, b = ring, np.roll(ring, -1)
        cross = a.real * b.imag - b.real * a.imag
        area += 0.5 * float(np.sum(cross))
        moment += complex(np.sum((a + b) * cross)) / 6
    centroid = moment / area if area else complex(np.mean(polygon.outer))
    if polygon.contains(centroid) and polygon.distance(centroid) > 1e-9:
        return centroid
    x0, x1, y0, y1 = polygon.get_bounds()
    X, Y = np.meshgrid(np.linspace(x0, x1, 129)[1:-1], np.linspace(y0, y1, 129)[1:-1])
    Z = (X + 1j * Y).ravel()
    Z = Z[polygon.contains_array(Z)]
    if not len(Z):
        raise InvalidParam("region has no interior grid points", {"kind": region.kind})
    order = np.lexsort((np.abs(Z), np.round(np.abs(Z - centroid), 12)))
    return complex(Z[order[0]])


def _newton_preimage(
    fn: FunctionSpec, target_log: Any, start: complex, region: Region, precision: int
) -> Optional[Any]:
    """log f(w) = target_log（2 pi i を法として）を start から解く（領域の外に出た解は None）"""
    scale = region.polygon.get_diameter() / 4
    with mpmath.workprec(precision + 16):
        w = mpmath.mpc(start)
        tol = mpmath.mpf(2) ** (8 - precision) * (1 + abs(target_log))
        for _ in range(PULLBACK_NEWTON_STEPS):
            try:
                lv = fn.eval_log(w, precision)
                g = fn.log_derivative(w, precision)
            except NearZero:
                return None
            d = mpmath.mpc(lv.logmod - mpmath.re(target_log), principal_arg(lv.arg - mpmath.im(target_log)))
            if abs(d) <= tol:
                return w if _in_closure(region, w) else None
            if g == 0:
                return None
            step = d / g
            if abs(step) > scale:
                step *= scale / abs(step)
            w = w - step
    return None


def _preimage(fn: FunctionSpec, w_next: Any, region: Region, precision: int, k: int) -> Any:
    with mpmath.workprec(precision + 16):
        target_log = mpmath.log(w_next)
    start = target_point(region)
    solution = _newton_preimage(fn, target_log, start, region, precision)
    if solution is not None:
        return solution
    rng = batch_generator(k, 0)
    starts = region.polygon.interior_sample(PULLBACK_STARTS, rng)
    found = []
    for s in starts:
        w = _newton_preimage(fn, target_log, complex(s), region, precision)
        if w is not None:
            found.append(w)
    if not found:
        raise NewtonStall(
            "no preimage inside E_k",
            {"link": k, "target": mpmath.nstr(w_next, 20), "starts": len(starts) + 1, "kind": region.kind},
        )
    return min(found, key=lambda w: float(abs(w)))


def _pullback(fn: FunctionSpec, sets: Sequence[Region], precision: int) -> Any:
    w = mpmath.mpc(target_point(sets[-1]))
    for k in range(len(sets) - 2, -1, -1):
        w = _preimage(fn, w, sets[k], precision, k)
    return w


def pullback_orbit(
    fn: FunctionSpec,
    regions: List[Region],
    set_ids: Sequence[int],
    precision: int = config.DEFAULT_PRECISION,
    bounds: Optional[List[Tuple[float, float]]] = None,
    guaranteed_start: int = 0,
) -> OrbitWitness:
    """E_N の点から Newton 法で E_{N-1}, ..., E_0 に引き戻して zeta を作る

    前向きの検証が通るまで精度を倍にする（PRECISION_CAP まで）
    """
    if not set_ids:
        raise InvalidParam("need at least one set")
    sets = [regions[i] for i in set_ids]
    p = precision
    while p <= PRECISION_CAP:
        zeta = _pullback(fn, sets, p)
        witness = OrbitWitness(fn, zeta, regions, list(set_ids), p, bounds, guaranteed_start)
        if witness.verify()["verified"]:
            logger.info("witness of depth %d at %d bits", witness.get_depth(), p)
            return witness
        logger.info("forward check failed at %d bits, doubling", p)
        p *= 2
    raise PrecisionCap("forward orbit did not reproduce the memberships", {"cap": PRECISION_CAP})


def witness_for_schedule(
    fn: FunctionSpec,
    chain: SigmaChain,
    schedule: BlockSchedule,
    a: SlowTarget,
    depth: int,
    precision: int = config.DEFAULT_PRECISION,
) -> OrbitWitness:
    """並び E_0..E_depth に沿った証拠（上界 |f^k| <= a_k を記録）"""
    if depth >= schedule.length():
        raise InvalidParam("depth exceeds the schedule", {"depth": depth, "length": schedule.length()})
    set_ids = schedule.set_indices(np.arange(depth + 1)).tolist()
    bounds = [(-math.inf, math.log(a(k)) if a(k) > 0 else -math.inf) for k in range(depth + 1)]
    return pullback_orbit(fn, chain.get_regions(), set_ids, precision, bounds, schedule.guaranteed_start())


def two_sided_witness(
    fn: FunctionSpec, chain: SigmaChain, a: SlowTarget, precision: int = config.DEFAULT_PRECISION
) -> OrbitWitness:
    """E_k = Sigma_{N+k}、範囲 a_{N+k} <= |f^k| <= C_k a_{N+k}"""
    bounds = []
    for link in chain.links:
        an = a(link.index)
        C = link.record.get("C", math.exp(link.log_radii[1]) / an)
        bounds.append((math.log(an), math.log(C * an)))
    ids = list(range(len(chain)))
    return pullback_orbit(fn, chain.get_regions(), ids, precision, bounds, 0)


def bounded_witness(
    fn: FunctionSpec,
    chain: SigmaChain,
    block: Sequence[int],
    depth: int,
    precision: int = config.DEFAULT_PRECISION,
) -> OrbitWitness:
    """一つのブロック Sigma_m, ..., Sigma_n を繰り返し続ける（有界な軌道）"""
    if not block:
        raise InvalidParam("block must be nonempty")
    ids = [block[k % len(block)] for k in range(depth + 1)]
    top = max(chain.links[i].get_maxmod() for i in block)
    bounds = [(-math.inf, math.log(top))] * (depth + 1)
    return pullback_orbit(fn, chain.get_regions(), ids, precision, bounds, 0)


class EscapeClassification:
    """EscapeClassification クラス

    |f^{n+L}(zeta)| >= M_D^n(rho)（n <= depth - L）を満たす L があるか

    Attributes:
        label (str): fast-consistent または slow
        rows (List[Dict]): L ごとの最小の余裕（log スケール）
        rho (float): 半径
    """

    def __init__(self, label: str, rows: List[Dict[str, Any]], rho: float) -> None:
        self.label = label
        self.rows = rows
        self.rho = rho

    def __repr__(self) -> str:
        return "<EscapeClassification {}>".format(self.label)

    def to_dict(self) -> Dict[str, Any]:
        return {"label": self.label, "rho": self.rho, "rows": self.rows}


def classify_escape(
    fn: FunctionSpec,
    tract: TractRegion,
    orbit: Any,
    rho: float,
    L_max: Optional[int] = None,
) -> EscapeClassification:
    """log|f^k(zeta)|（k = 0..depth）を反復 M_D^n(rho) と比べる

    orbit は OrbitWitness, ForwardOrbit, log|f^k| の列のいずれか
    """
    if isinstance(orbit, OrbitWitness):
        orbit = orbit.orbit
    logmods = orbit.logmods if isinstance(orbit, ForwardOrbit) else list(orbit)
    depth = len(logmods) - 1
    L_max = depth // 2 if L_max is None else L_max
    if depth < 1:
        return EscapeClassification("fast-consistent", [], rho)
    md = iterate_MD(fn, tract, rho, depth)
    tower = [math.log(rho)] + [float(v) for v in md.get_values()]
    rows = []
    for L in range(L_max + 1):
        margins = []
        for n in range(depth - L + 1):
            v, t = float(logmods[n + L]), tower[n]
            if math.isinf(v) and math.isinf(t) and v > 0 and t > 0:
                continue
            margins.append(v - t)
        worst = min(margins) if margins else math.inf
        rows.append({"L": L, "min_margin": worst, "passed": worst >= 0, "compared": len(margins)})
    label = "fast-consistent" if any(r["passed"] for r in rows) else "slow"
    logger.info("classification %s at rho=%g", label, rho)
    return EscapeClassification(label, rows, rho)
