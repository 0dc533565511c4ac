#!/usr/bin/env python

from __future__ import annotations

import json
import logging
import math
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np

from tractoria import config
from tractoria.errors import InvalidParam, NearZero, RangeOverflow, SampleOutsideTract

if TYPE_CHECKING:
    from tractoria.tract import TractRegion

logger = logging.getLogger(__name__)

DEFAULT_PRECISION = config.DEFAULT_PRECISION
MIN_PRECISION = config.MIN_PRECISION
EVAL_MAG_LIMIT = config.EVAL_MAG_LIMIT
LOG_SCALE_CAP = config.LOG_SCALE_CAP

Number = Union[complex, float, int, str, "mpmath.mpc", "mpmath.mpf"]


def to_mpc(z: Number) -> mpmath.mpc:
    if isinstance(z, str):
        return mpmath.mpc(complex(z.replace(" ", "").replace("i", "j")))
    return mpmath.mpc(z)


def principal_arg(theta: Any) -> Any:
    """角度を (-pi, pi] に正規化（mpf でも float でも可）"""
    if isinstance(theta, float):
        t = theta - 2 * math.pi * math.floor((theta + math.pi) / (2 * math.pi))
        return math.pi if t == -math.pi else t
    t = theta - 2 * mpmath.pi * mpmath.floor((theta + mpmath.pi) / (2 * mpmath.pi))
    return +mpmath.pi if t == -mpmath.pi else t


def mp_to_pair(x: Any) -> List[Any]:
    """mpf を (仮数, 指数) の整数対に（ビット単位で再現可能）"""
    x = mpmath.mpf(x)
    if mpmath.isinf(x) or mpmath.isnan(x):
        return [str(x), None]
    man, exp = x.man_exp
    return [int(man), int(exp)]


def mp_from_pair(pair: Sequence[Any]) -> mpmath.mpf:
    if pair[1] is None:
        return mpmath.mpf(pair[0])
    return mpmath.mpf((int(pair[0]), int(pair[1])))


def series_truncation(az: float, precision: int, gabs: float = 1.0) -> Tuple[int, float]:
    """g(z)=sum (z/2^k)^(2^k) の打ち切り番号 K と尾部評価

    2^K >= 2|z| を満たす最小の K から始め、尾部上界
    2 (|z|/2^(K+1))^(2^(K+1)) が 2^-(precision+4) max(|g|, 1) 以下になるまで延ばす
    """
    K = 1
    while 2 ** K < 2 * az:
        K += 1
    while True:
        ratio = az / 2 ** (K + 1)
        if ratio == 0:
            return K, 0.0
        log2_first = 2 ** (K + 1) * math.log2(ratio)
        tail = 2.0 * 2.0 ** log2_first if log2_first > -1070 else 0.0
        if log2_first + 1 <= -(precision + 4) + math.log2(max(gabs, 1.0)):
            return K, tail
        K += 1


class LogValue:
    """LogValue クラス

    log f(z) = logmod + i arg の評価値

    Attributes:
        logmod (mpf): log|f(z)|
        arg (mpf): 宣言した経路に沿って連続な arg f(z)（単点評価では主値）
        err (float): 両成分に対する誤差上界
    """

    def __init__(self, logmod: Any, arg: Any, err: float) -> None:
        self.logmod = logmod
        self.arg = arg
        self.err: float = float(err)

    def __str__(self) -> str:
        return "LogValue({}, {}, err={:.3g})".format(
            mpmath.nstr(self.logmod, 15), mpmath.nstr(self.arg, 15), self.err
        )

    def __repr__(self) -> str:
        return self.__str__()

    def get_logmod(self) -> Any:
        return self.logmod

    def get_arg(self) -> Any:
        return self.arg

    def get_err(self) -> float:
        return self.err

    def to_mpc(self) -> mpmath.mpc:
        return mpmath.mpc(self.logmod, self.arg)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "logmod": mpmath.nstr(self.logmod, 20),
            "arg": mpmath.nstr(self.arg, 20),
            "err": self.err,
        }


class FunctionSpec:
    """FunctionSpec クラス

    整関数のカタログ項目（または合成）
    値・導関数・対数値を閉じた式で評価する

    カタログ:
        EXP: e^z
        EXPZ2COS: e^(z^2) cos z
        RECIP_EXP_G: exp(-g(z)),  g(z) = sum_{k>=1} (z/2^k)^(2^k)
        G: g(z) そのもの
        POLY: 多項式（params は昇べきの係数、テスト用）
        COMPOSE: parts[0] o parts[1]

    Attributes:
        id (str): カタログのタグ
        params (List[complex]): パラメータ
        boundary_level (float): 境界での |f| の値 R
        parts (List[FunctionSpec]): COMPOSE の外側・内側
    """

    CATALOG = ("EXP", "EXPZ2COS", "RECIP_EXP_G", "G", "POLY", "COMPOSE")
    ZERO_FREE = ("EXP", "RECIP_EXP_G")

    def __init__(
        self,
        id: str,
        params: Sequence[Number] = (),
        boundary_level: float = 1.0,
        parts: Optional[Sequence[FunctionSpec]] = None,
    ) -> None:
        if id not in self.CATALOG:
            raise InvalidParam("unknown catalog id: " + str(id), {"fn": id})
        if not boundary_level > 0:
            raise InvalidParam("boundary level must be positive", {"R": boundary_level})
        self.id: str = id
        self.params: List[complex] = [complex(p) for p in params]
        self.boundary_level: float = float(boundary_level)
        self.parts: List[FunctionSpec] = list(parts or [])
        if id == "POLY":
            while len(self.params) > 1 and self.params[-1] == 0:
                self.params.pop()
            if len(self.params) < 2:
                raise InvalidParam("POLY needs degree >= 1", {"params": self.params})
        elif id == "COMPOSE":
            if len(self.parts) != 2:
                raise InvalidParam("COMPOSE needs [outer, inner]")
        elif self.params:
            raise InvalidParam(id + " takes no parameters", {"params": self.params})

    def __str__(self) -> str:
        if self.id == "COMPOSE":
            return "{}({})".format(self.parts[0], self.parts[1])
        if self.id == "POLY":
            return "POLY{}".format(self.params)
        return self.id

    def __repr__(self) -> str:
        return "<FunctionSpec {} R={}>".format(self, self.boundary_level)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FunctionSpec) and self.to_dict() == other.to_dict()

    def __hash__(self) -> int:
        return hash(json.dumps(self.to_dict(), sort_keys=True))

    def get_id(self) -> str:
        return self.id

    def get_params(self) -> List[complex]:
        return self.params

    def get_level(self) -> float:
        return self.boundary_level

    def is_zero_free(self) -> bool:
        """exp(entire) の形なら零点を持たない"""
        return self.id in self.ZERO_FREE

    def with_level(self, level: float) -> FunctionSpec:
        return FunctionSpec(self.id, self.params, level, self.parts)

    @classmethod
    def poly(cls, coefficients: Sequence[Number], boundary_level: float = 1.0) -> FunctionSpec:
        return cls("POLY", coefficients, boundary_level)

    @classmethod
    def compose(cls, outer: FunctionSpec, inner: FunctionSpec) -> FunctionSpec:
        return cls("COMPOSE", (), outer.boundary_level, [outer, inner])

    @classmethod
    def from_dict(cls, data: Union[str, Dict[str, Any]]) -> FunctionSpec:
        """{"fn": "EXPZ2COS", "R": 1.0} 形式（文字列ならカタログ id）"""
        if isinstance(data, str):
            return cls(data.strip().upper())
        try:
            fn = str(data["fn"]).upper()
        except (KeyError, TypeError):
            raise InvalidParam("function spec needs 'fn'", {"spec": data})
        level = float(data.get("R", 1.0))
        params = [_parse_param(p) for p in data.get("params", [])]
        parts = None
        if fn == "COMPOSE":
            parts = [cls.from_dict(data["outer"]), cls.from_dict(data["inner"])]
        return cls(fn, params, level, parts)

    @classmethod
    def from_json(cls, text: str) -> FunctionSpec:
        text = text.strip()
        if text.startswith("{"):
            return cls.from_dict(json.loads(text))
        return cls.from_dict(text)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {"fn": self.id, "R": self.boundary_level}
        if self.params:
            data["params"] = [[p.real, p.imag] for p in self.params]
        if self.id == "COMPOSE":
            data["outer"] = self.parts[0].to_dict()
            data["inner"] = self.parts[1].to_dict()
        return data

    # ------------------------------------------------------------------
    # 多倍長評価（呼び出し側で mpmath.workprec を設定済みとする）
    # ------------------------------------------------------------------

    def _value(self, z: mpmath.mpc, precision: int) -> mpmath.mpc:
        if self.id == "EXP":
            return mpmath.exp(z)
        elif self.id == "EXPZ2COS":
            return mpmath.exp(z * z) * mpmath.cos(z)
        elif self.id == "RECIP_EXP_G":
            return mpmath.exp(-_g(z, precision)[0])
        elif self.id == "G":
            return _g(z, precision)[0]
        elif self.id == "POLY":
            return mpmath.polyval([mpmath.mpc(c) for c in reversed(self.params)], z)
        else:
            outer, inner = self.parts
            return outer._value(inner._value(z, precision), precision)

    def _derivative(self, z: mpmath.mpc, precision: int) -> mpmath.mpc:
        if self.id == "EXP":
            return mpmath.exp(z)
        elif self.id == "EXPZ2COS":
            return mpmath.exp(z * z) * (2 * z * mpmath.cos(z) - mpmath.sin(z))
        elif self.id == "RECIP_EXP_G":
            g, dg, _ = _g(z, precision)
            return -dg * mpmath.exp(-g)
        elif self.id == "G":
            return _g(z, precision)[1]
        elif self.id == "POLY":
            _, d = mpmath.polyval(
                [mpmath.mpc(c) for c in reversed(self.params)], z, derivative=True
            )
            return d
        else:
            outer, inner = self.parts
            w = inner._value(z, precision)
            return outer._derivative(w, precision) * inner._derivative(z, precision)

    def _log(self, z: mpmath.mpc, precision: int) -> Tuple[mpmath.mpc, float]:
        """log f(z)（分枝は各因子の主値の和）と打ち切り誤差"""
        tiny = mpmath.mpf(2) ** (8 - precision)
        if self.id == "EXP":
            return z, 0.0
        elif self.id == "EXPZ2COS":
            c = mpmath.cos(z)
            scale = mpmath.cosh(mpmath.im(z))
            if abs(c) <= tiny * scale:
                raise NearZero("cos z vanishes at this precision", {"z": str(z)})
            return z * z + mpmath.log(c), 0.0
        elif self.id == "RECIP_EXP_G":
            g, _, tail = _g(z, precision)
            return -g, tail
        elif self.id == "G":
            g, _, tail = _g(z, precision)
            if abs(g) <= tail + tiny * max(abs(g), 1):
                raise NearZero("g vanishes at this precision", {"z": str(z)})
            return mpmath.log(g), tail / float(abs(g))
        elif self.id == "POLY":
            coefficients = [mpmath.mpc(c) for c in reversed(self.params)]
            value = mpmath.polyval(coefficients, z)
            scale = mpmath.polyval([abs(c) for c in coefficients], abs(z))
            if abs(value) <= tiny * scale:
                raise NearZero("polynomial vanishes at this precision", {"z": str(z)})
            return mpmath.log(value), 0.0
        else:
            outer, inner = self.parts
            w = inner._value(z, precision)
            return outer._log(w, precision)

    def _log_derivative(self, z: mpmath.mpc, precision: int) -> mpmath.mpc:
        """f'/f"""
        if self.id == "EXP":
            return mpmath.mpc(1)
        elif self.id == "EXPZ2COS":
            return 2 * z - mpmath.tan(z)
        elif self.id == "RECIP_EXP_G":
            return -_g(z, precision)[1]
        elif self.id == "G":
            g, dg, _ = _g(z, precision)
            return dg / g
        elif self.id == "POLY":
            value, d = mpmath.polyval(
                [mpmath.mpc(c) for c in reversed(self.params)], z, derivative=True
            )
            return d / value
        else:
            outer, inner = self.parts
            w = inner._value(z, precision)
            return outer._log_derivative(w, precision) * inner._derivative(z, precision)

    # ------------------------------------------------------------------
    # 公開演算
    # ------------------------------------------------------------------

    def eval(self, z: Number, precision: int = DEFAULT_PRECISION) -> mpmath.mpc:
        """f(z)（相対誤差 2^(4-precision) 以内）"""
        _check_precision(precision)
        with mpmath.workprec(precision + 16):
            zz = to_mpc(z)
            if self.id != "POLY" and self.id != "G":
                try:
                    log_f, _ = self._log(zz, precision)
                except NearZero:
                    log_f = None
                if log_f is not None and abs(mpmath.re(log_f)) > EVAL_MAG_LIMIT * math.log(2):
                    raise RangeOverflow(
                        "|f(z)| is not representable, use eval_log",
                        {"z": str(zz), "logmod": mpmath.nstr(mpmath.re(log_f), 15)},
                    )
            value = self._value(zz, precision)
        if value != 0 and abs(mpmath.mag(value)) > EVAL_MAG_LIMIT:
            raise RangeOverflow("|f(z)| is not representable, use eval_log", {"z": str(z)})
        return +value

    def eval_log(self, z: Number, precision: int = DEFAULT_PRECISION) -> LogValue:
        """log f(z) を LogValue で返す（arg は主値）"""
        _check_precision(precision)
        with mpmath.workprec(precision + 16):
            zz = to_mpc(z)
            log_f, tail = self._log(zz, precision)
            logmod = mpmath.re(log_f)
            arg = principal_arg(mpmath.im(log_f))
            err = 2.0 ** (8 - precision) * (1.0 + float(abs(log_f)) + float(abs(zz)) ** 2) + tail
        with mpmath.workprec(precision):
            return LogValue(+logmod, +arg, err)

    def derivative(self, z: Number, precision: int = DEFAULT_PRECISION) -> mpmath.mpc:
        """f'(z)（閉じた式）"""
        _check_precision(precision)
        with mpmath.workprec(precision + 16):
            zz = to_mpc(z)
            value = self._derivative(zz, precision)
        if value != 0 and abs(mpmath.mag(value)) > EVAL_MAG_LIMIT:
            raise RangeOverflow("|f'(z)| is not representable", {"z": str(z)})
        return +value

    def log_derivative(self, z: Number, precision: int = DEFAULT_PRECISION) -> mpmath.mpc:
        _check_precision(precision)
        with mpmath.workprec(precision + 16):
            value = self._log_derivative(to_mpc(z), precision)
        return +value

    def eval_log_path(
        self, path: Sequence[Number], precision: int = DEFAULT_PRECISION, max_depth: int = 30
    ) -> Tuple[List[mpmath.mpc], List[LogValue]]:
        """折れ線に沿って arg が連続な log f を返す

        隣り合う arg の差が pi/2 未満になるまで二分して点を追加する
        """
        _check_precision(precision)
        points: List[mpmath.mpc] = []
        values: List[LogValue] = []
        with mpmath.workprec(precision + 16):
            nodes = [to_mpc(z) for z in path]
            first = self.eval_log(nodes[0], precision)
            points.append(nodes[0])
            values.append(first)
            for a, b in zip(nodes[:-1], nodes[1:]):
                self._refine_segment(a, b, precision, points, values, max_depth)
        return points, values

    def _refine_segment(
        self,
        a: mpmath.mpc,
        b: mpmath.mpc,
        precision: int,
        points: List[mpmath.mpc],
        values: List[LogValue],
        depth: int,
    ) -> None:
        stack = [(a, b, depth)]
        while stack:
            a, b, d = stack.pop()
            lv = self.eval_log(b, precision)
            previous = values[-1].arg
            delta = principal_arg(lv.arg - previous)
            if abs(delta) < mpmath.pi / 2 or d == 0:
                if d == 0:
                    logger.debug("arg continuity not reached between %s and %s", a, b)
                points.append(b)
                values.append(LogValue(lv.logmod, previous + delta, lv.err))
            else:
                m = (a + b) / 2
                stack.append((m, b, d - 1))
                stack.append((a, m, d - 1))

    # ------------------------------------------------------------------
    # numpy 版（float64、格子・描画・53 bit 証明用）
    # ------------------------------------------------------------------

    def log_array(self, Z: Any) -> np.ndarray:
        """log f を複素配列で返す（虚部は連続とは限らない）"""
        Z = np.asarray(Z, dtype=complex)
        with np.errstate(all="ignore"):
            if self.id == "EXP":
                return Z.copy()
            elif self.id == "EXPZ2COS":
                return Z * Z + _logcos_array(Z)
            elif self.id == "RECIP_EXP_G":
                return -_g_array(Z)[0]
            elif self.id == "G":
                return np.log(_g_array(Z)[0])
            elif self.id == "POLY":
                return np.log(np.polyval(self.params[::-1], Z))
            else:
                outer, inner = self.parts
                return outer.log_array(inner.value_array(Z))

    def log_modulus_array(self, Z: Any) -> np.ndarray:
        """log|f| を実数配列で返す"""
        Z = np.asarray(Z, dtype=complex)
        with np.errstate(all="ignore"):
            if self.id == "EXP":
                return Z.real.copy()
            elif self.id == "EXPZ2COS":
                return (Z * Z).real + _logcos_array(Z).real
            return self.log_array(Z).real

    def value_array(self, Z: Any) -> np.ndarray:
        Z = np.asarray(Z, dtype=complex)
        with np.errstate(all="ignore"):
            if self.id == "POLY":
                return np.polyval(self.params[::-1], Z)
            elif self.id == "G":
                return _g_array(Z)[0]
            elif self.id == "EXPZ2COS":
                return np.exp(Z * Z) * np.cos(Z)
            return np.exp(self.log_array(Z))

    def log_derivative_array(self, Z: Any) -> np.ndarray:
        """f'/f を複素配列で返す"""
        Z = np.asarray(Z, dtype=complex)
        with np.errstate(all="ignore"):
            if self.id == "EXP":
                return np.ones_like(Z)
            elif self.id == "EXPZ2COS":
                return 2 * Z - np.tan(Z)
            elif self.id == "RECIP_EXP_G":
                return -_g_array(Z)[1]
            elif self.id == "G":
                g, dg = _g_array(Z)
                return dg / g
            elif self.id == "POLY":
                p = np.polynomial.Polynomial(self.params)
                return p.deriv()(Z) / p(Z)
            else:
                outer, inner = self.parts
                w = inner.value_array(Z)
                return outer.log_derivative_array(w) * inner.log_derivative_array(Z) * w

    # ------------------------------------------------------------------
    # 増大度
    # ------------------------------------------------------------------

    def log_growth(self, log_r: Any) -> Any:
        """宣言された漸近形 log M(r) ~ h(r) を log r から log スケールで返す"""
        log_r = mpmath.mpf(log_r)
        if mpmath.isinf(log_r) or log_r > LOG_SCALE_CAP:
            return mpmath.inf
        with mpmath.workprec(DEFAULT_PRECISION):
            if self.id == "EXP":
                value = mpmath.exp(log_r)
            elif self.id == "EXPZ2COS":
                value = mpmath.exp(2 * log_r)
            elif self.id in ("RECIP_EXP_G", "G"):
                if log_r > 60:
                    return mpmath.inf
                # 最大項 (r/2^k)^(2^k) が支配的
                best = mpmath.mpf(2) * (log_r - mpmath.log(2))
                k = 2
                while k * math.log(2) < log_r + 1:
                    best = max(best, mpmath.mpf(2) ** k * (log_r - k * mpmath.log(2)))
                    k += 1
                value = best if self.id == "G" else mpmath.exp(best)
            elif self.id == "POLY":
                degree = len(self.params) - 1
                value = degree * log_r + mpmath.log(abs(self.params[-1]))
            else:
                outer, inner = self.parts
                return outer.log_growth(inner.log_growth(log_r))
            if value > LOG_SCALE_CAP:
                return mpmath.inf
            return +value


def _parse_param(p: Any) -> complex:
    if isinstance(p, (list, tuple)):
        return complex(float(p[0]), float(p[1]))
    if isinstance(p, str):
        return complex(p.replace(" ", "").replace("i", "j"))
    return complex(p)


def _check_precision(precision: int) -> None:
    if precision < MIN_PRECISION:
        raise InvalidParam(
            "precision must be at least {} bits".format(MIN_PRECISION), {"precision": precision}
        )


def _g(z: mpmath.mpc, precision: int) -> Tuple[mpmath.mpc, mpmath.mpc, float]:
    """g(z), g'(z) と尾部上界（打ち切り番号は series_truncation に従う）"""
    az = float(abs(z))
    K, tail = series_truncation(az, precision)
    g = mpmath.mpc(0)
    dg = mpmath.mpc(0)
    for k in range(1, K + 1):
        w = z / 2 ** k
        t = w ** (2 ** k - 1)
        dg += t
        g += t * w
    gabs = float(abs(g))
    if gabs > 1:
        K2, tail = series_truncation(az, precision, gabs)
        for k in range(K + 1, K2 + 1):
            w = z / 2 ** k
            t = w ** (2 ** k - 1)
            dg += t
            g += t * w
    return g, dg, tail


def _g_array(Z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    amax = float(np.max(np.abs(Z))) if Z.size else 0.0
    K, _ = series_truncation(amax, 53)
    g = np.zeros_like(Z)
    dg = np.zeros_like(Z)
    for k in range(1, K + 1):
        w = Z / 2 ** k
        t = w ** (2 ** k - 1)
        dg += t
        g += t * w
    return g, dg


def _logcos_array(Z: np.ndarray) -> np.ndarray:
    """log cos z（|Im z| が大きくてもあふれない）"""
    out = np.empty_like(Z)
    y = Z.imag
    big = y > 20
    small = y < -20
    mid = ~(big | small)
    out[mid] = np.log(np.cos(Z[mid]))
    zb = Z[big]
    out[big] = -1j * zb - np.log(2.0) + np.log1p(np.exp(2j * zb))
    zs = Z[small]
    out[small] = 1j * zs - np.log(2.0) + np.log1p(np.exp(-2j * zs))
    return out


class ExpansionReport:
    """ExpansionReport クラス

    |z f'(z)/f(z)| >= log|f(z)| / (4 pi) の標本ごとの判定

    Attributes:
        fn (FunctionSpec): 関数
        rows (List[Dict]): 標本ごとの z, lhs, rhs, margin, passed
        precision (int): 評価精度
    """

    def __init__(self, fn: FunctionSpec, rows: List[Dict[str, Any]], precision: int) -> None:
        self.fn = fn
        self.rows = rows
        self.precision = precision

    def get_violations(self) -> int:
        return sum(1 for row in self.rows if not row["passed"])

    def get_min_margin(self) -> float:
        return min((row["margin"] for row in self.rows), default=math.inf)

    def passed(self) -> bool:
        return self.get_violations() == 0

    def to_dict(self, with_rows: bool = True) -> Dict[str, Any]:
        data = {
            "fn": self.fn.to_dict(),
            "samples": len(self.rows),
            "violations": self.get_violations(),
            "min_margin": self.get_min_margin(),
            "precision": self.precision,
        }
        if with_rows:
            data["rows"] = self.rows
        return data


def check_expansion_estimate(
    fn: FunctionSpec,
    tract: TractRegion,
    samples: Sequence[Number],
    precision: int = MIN_PRECISION,
) -> ExpansionReport:
    """拡大評価 |z f'/f| >= log|f|/(4 pi) を標本ごとに判定（対数的かは呼び出し側が宣言）"""
    Z = np.array([complex(z) for z in samples], dtype=complex)
    inside = tract.contains_array(Z)
    if not np.all(inside):
        bad = Z[~inside][0]
        raise SampleOutsideTract(
            "sample outside tract", {"z": [bad.real, bad.imag], "count": int(np.sum(~inside))}
        )
    rows: List[Dict[str, Any]] = []
    if precision <= MIN_PRECISION:
        lhs = np.abs(Z * fn.log_derivative_array(Z))
        rhs = fn.log_modulus_array(Z) / (4 * math.pi)
        for z, left, right in zip(Z, lhs, rhs):
            rows.append(_expansion_row(z, float(left), float(right)))
    else:
        for z in Z:
            with mpmath.workprec(precision):
                left = abs(mpmath.mpc(z) * fn.log_derivative(z, precision))
                right = fn.eval_log(z, precision).logmod / (4 * mpmath.pi)
            rows.append(_expansion_row(z, float(left), float(right)))
    report = ExpansionReport(fn, rows, precision)
    if not report.passed():
        logger.info("expansion estimate: %d violations", report.get_violations())
    return report


def _expansion_row(z: complex, lhs: float, rhs: float) -> Dict[str, Any]:
    return {
        "z": [z.real, z.imag],
        "lhs": lhs,
        "rhs": rhs,
        "margin": lhs - rhs,
        "passed": bool(lhs >= rhs),
    }


class Example1:
    """f = exp(-g) の見積もり（A_{j,n} 上で Re g 大、B_{j,n} 上で Re g 小）"""

    EPSILON = 1 / 8

    @staticmethod
    def radii(n: int, eps: float = EPSILON) -> Tuple[float, float]:
        """r_n = (1+eps) 2^(n+1), r'_n = (1-2eps) 2^(n+2)"""
        if not 0 < eps <= 1 / 8:
            raise InvalidParam("eps must lie in (0, 1/8]", {"eps": eps})
        return (1 + eps) * 2 ** (n + 1), (1 - 2 * eps) * 2 ** (n + 2)

    @staticmethod
    def a_point(j: int, n: int, r: float) -> complex:
        return r * complex(math.cos(2 * math.pi * j / 2 ** n), math.sin(2 * math.pi * j / 2 ** n))

    @staticmethod
    def b_point(j: int, n: int, r: float) -> complex:
        theta = math.pi / 2 ** n + 2 * math.pi * j / 2 ** n
        return r * complex(math.cos(theta), math.sin(theta))

    @staticmethod
    def sector_points(j: int, n: int, eps: float = EPSILON) -> Tuple[complex, complex]:
        """Sigma_{j,n} 内の 2 点 z_1（A 寄り）と z_2（B_{j,n} 上）"""
        r_in, r_out = Example1.radii(n, eps)
        r = (r_in + r_out) / 2
        base = 2 * math.pi * j / 2 ** n
        t1 = math.pi / 2 ** (n + 2) + base
        t2 = math.pi / 2 ** n + base
        return (
            r * complex(math.cos(t1), math.sin(t1)),
            r * complex(math.cos(t2), math.sin(t2)),
        )

    @staticmethod
    def check_spines(
        n: int,
        js: Sequence[int],
        samples: int = 16,
        a_extent: float = 8.0,
        eps: float = EPSILON,
        precision: int = 128,
    ) -> Dict[str, Any]:
        """A_{j,n} 上 Re g > 2^(2^n)、B_{j,n} 上 Re g < -2^(2^n) を標本で確認

        A_{j,n} は非有界なので [r_n, a_extent r_n] で調べる
        """
        g = FunctionSpec("G")
        r_in, r_out = Example1.radii(n, eps)
        rows = []
        with mpmath.workprec(precision):
            bound = mpmath.mpf(2) ** (2 ** n)
            for j in js:
                min_a = mpmath.inf
                max_b = -mpmath.inf
                for r in np.geomspace(r_in, a_extent * r_in, samples):
                    value = mpmath.re(g._value(to_mpc(Example1.a_point(j, n, float(r))), precision))
                    min_a = min(min_a, value)
                for r in np.linspace(r_in, r_out, samples):
                    value = mpmath.re(g._value(to_mpc(Example1.b_point(j, n, float(r))), precision))
                    max_b = max(max_b, value)
                rows.append(
                    {
                        "j": j,
                        "min_re_g_on_A": mpmath.nstr(min_a, 12),
                        "max_re_g_on_B": mpmath.nstr(max_b, 12),
                        "a_passed": bool(min_a > bound),
                        "b_passed": bool(max_b < -bound),
                    }
                )
        return {
            "n": n,
            "bound": "2^{}".format(2 ** n),
            "r_range": [r_in, r_out],
            "a_extent": a_extent,
            "rows": rows,
            "passed": all(row["a_passed"] and row["b_passed"] for row in rows),
        }

    @staticmethod
    def check_argument_growth(
        n: int, r: float, samples: int = 4096, precision: int = 128
    ) -> Dict[str, Any]:
        """arg g(r e^{i theta}) が theta について増加し、一周で 2^n 2 pi 増えるか"""
        g = FunctionSpec("G")
        thetas = np.linspace(0.0, 2 * math.pi, samples + 1)
        args = []
        with mpmath.workprec(precision):
            for theta in thetas:
                value = g._value(to_mpc(r * complex(math.cos(theta), math.sin(theta))), precision)
                args.append(float(mpmath.arg(value)))
        unwrapped = np.unwrap(np.array(args))
        steps = np.diff(unwrapped)
        total = float(unwrapped[-1] - unwrapped[0])
        expected = 2 ** n * 2 * math.pi
        return {
            "n": n,
            "r": r,
            "samples": samples,
            "min_step": float(np.min(steps)),
            "monotone": bool(np.all(steps > 0)),
            "total_increase": total,
            "expected_increase": expected,
            "relative_error": abs(total - expected) / expected,
        }


class Example2:
    """f = e^(z^2) cos z の見積もり"""

    @staticmethod
    def zero(n: int) -> float:
        return (2 * n + 1) * math.pi / 2

    @staticmethod
    def interior_point(n: int) -> float:
        return (2 * n + 2) * math.pi / 2

    @staticmethod
    def z_point(n: int) -> complex:
        """z_n = (2n+2)(pi/2) e^{i pi/8}"""
        return (2 * n + 2) * math.pi / 2 * complex(math.cos(math.pi / 8), math.sin(math.pi / 8))

    @staticmethod
    def check_z_points(n_max: int = 20, precision: int = DEFAULT_PRECISION) -> List[Dict[str, Any]]:
        """|f(z_n)| >= (2n+5) pi/2 を log スケールで確認"""
        fn = FunctionSpec("EXPZ2COS")
        rows = []
        for n in range(n_max + 1):
            lv = fn.eval_log(Example2.z_point(n), precision)
            bound = math.log((2 * n + 5) * math.pi / 2)
            rows.append(
                {
                    "n": n,
                    "logmod": float(lv.logmod),
                    "log_bound": bound,
                    "margin": float(lv.logmod) - bound,
                    "passed": bool(lv.logmod >= bound),
                }
            )
        return rows

    @staticmethod
    def critical_point(n: int, precision: int = DEFAULT_PRECISION) -> mpmath.mpf:
        """z = tan(z)/2 の (2n+1) pi/2 直前の解（f' の実零点）"""
        if n < 0:
            raise InvalidParam("n must be non-negative", {"n": n})
        with mpmath.workprec(precision):
            start = (2 * n + 1) * mpmath.pi / 2 - 1 / ((2 * n + 1) * mpmath.pi)
            # 2 z cos z - sin z = 0 は極を持たない
            root = mpmath.findroot(lambda x: 2 * x * mpmath.cos(x) - mpmath.sin(x), start)
            return +mpmath.re(root)

    @staticmethod
    def critical_value(n: int, precision: int = DEFAULT_PRECISION) -> Dict[str, Any]:
        """臨界値 |f(c_n)| と近似 exp((2n+1)^2 pi^2/4)/((2n+1) pi) の比較（log スケール）"""
        fn = FunctionSpec("EXPZ2COS")
        c = Example2.critical_point(n, precision)
        lv = fn.eval_log(c, precision)
        approx = ((2 * n + 1) * math.pi) ** 2 / 4 - math.log((2 * n + 1) * math.pi)
        eps_n = Example2.zero(n) - float(c)
        return {
            "n": n,
            "critical_point": mpmath.nstr(c, 20),
            "eps_n": eps_n,
            "eps_n_approx": 1 / ((2 * n + 1) * math.pi),
            "log_critical_value": float(lv.logmod),
            "log_approximation": approx,
        }
