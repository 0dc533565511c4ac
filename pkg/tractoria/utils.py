#!/usr/bin/env python

from __future__ import annotations

import json
import logging
import math
import os
import re
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import mpmath
import numpy as np
from PIL import Image

from tractoria import config
from tractoria.complexfn import FunctionSpec
from tractoria.errors import IOFailure, InvalidParam
from tractoria.geometry import Polygon
from tractoria.tract import Window, evaluate_grid

logger = logging.getLogger(__name__)

OUT_REPORT = config.OUT_REPORT


class View:
    """View クラス

    |f| > R の部分を白、それ以外を黒で描いた格子画像（PGM / PNG）
    画素は窓の格子点に対応し、左上が (x0, y1)

    Attributes:
        fn (FunctionSpec): 描画する関数
        window (Window): 描画範囲
        resolution (int): 長い辺の区間数（格子点は resolution + 1 個）
        level (float): R
        mask (np.ndarray): |f| > R の真偽（行 0 が上端）
        image (Image): 描画された Image
    """

    WHITE = 255
    BLACK = 0

    def __init__(
        self,
        fn: FunctionSpec,
        window: Window,
        resolution: int = 512,
        level: Optional[float] = None,
        does_display: bool = False,
        shape: Optional[Tuple[int, int]] = None,
    ) -> None:
        if resolution < 2:
            raise InvalidParam("resolution must be at least 2", {"resolution": resolution})
        self.fn = fn
        self.window = window
        self.resolution = resolution
        self.level = fn.get_level() if level is None else level
        if not self.level > 0:
            raise InvalidParam("level must be positive", {"level": self.level})
        self.width, self.height = shape if shape is not None else self._shape()
        self.mask: np.ndarray = self._draw_mask()
        self.image: Image = Image.fromarray(np.where(self.mask, self.WHITE, self.BLACK).astype(np.uint8), "L")

        if does_display:
            self.draw()

    def __repr__(self) -> str:
        return "<View {} on {} {}x{}>".format(self.fn, self.window, self.width, self.height)

    def _shape(self) -> Tuple[int, int]:
        w, h = self.window.get_width(), self.window.get_height()
        if w >= h:
            return self.resolution, max(1, int(round(self.resolution * h / w)))
        return max(1, int(round(self.resolution * w / h))), self.resolution

    def _draw_mask(self) -> np.ndarray:
        xs = np.linspace(self.window.x0, self.window.x1, self.width + 1)
        ys = np.linspace(self.window.y1, self.window.y0, self.height + 1)
        U = evaluate_grid(self.fn, xs, ys, math.log(self.level))
        return U > 0

    def doubled(self) -> View:
        """区間数を縦横とも 2 倍にした View（偶数番目の格子点が元の格子点に重なる）"""
        return View(self.fn, self.window, 2 * self.resolution, self.level, shape=(2 * self.width, 2 * self.height))

    def agreement(self, finer: View) -> float:
        """重なる格子点で finer と一致する画素の割合"""
        if finer.mask.shape != (2 * self.height + 1, 2 * self.width + 1):
            raise InvalidParam("views are not nested", {"coarse": self.mask.shape, "fine": finer.mask.shape})
        return float(np.mean(finer.mask[::2, ::2] == self.mask))

    def get_white_fraction(self) -> float:
        return float(np.mean(self.mask))

    def pixel_of(self, z: complex) -> Tuple[int, int]:
        """z に最も近い格子点の (列, 行)"""
        col = int(round((z.real - self.window.x0) / self.window.get_width() * self.width))
        row = int(round((self.window.y1 - z.imag) / self.window.get_height() * self.height))
        return col, row

    def get_image(self) -> Image:
        return self.image

    def draw(self) -> None:
        self.get_image().show()

    def save(self, path: str) -> None:
        """拡張子 .pgm なら P5、それ以外は拡張子に従う"""
        try:
            if path.lower().endswith(".pgm"):
                self.get_image().save(path, format="PPM")
            else:
                self.get_image().save(path)
        except (OSError, ValueError) as e:
            raise IOFailure("cannot write image", {"path": path, "reason": str(e)})
        logger.info("wrote %s", path)


class Overlay:
    """Overlay クラス

    窓の座標で描く SVG 1.1 の重ね描き（等高線・環・領域・軌道の点）

    Attributes:
        window (Window): 座標の範囲
        width, height (int): 画素数
        items (List[str]): SVG 要素
    """

    STROKE = {"level": "#FF799A", "annulus": "#3C8DBC", "region": "#F0AD4E", "orbit": "#5CB85C"}

    def __init__(self, window: Window, width: int = 512, height: Optional[int] = None) -> None:
        self.window = window
        self.width = width
        self.height = height or max(1, int(round(width * window.get_height() / window.get_width())))
        self.items: List[str] = []

    def __len__(self) -> int:
        return len(self.items)

    def _xy(self, z: complex) -> Tuple[float, float]:
        x = (z.real - self.window.x0) / self.window.get_width() * self.width
        y = (self.window.y1 - z.imag) / self.window.get_height() * self.height
        return round(x, 3), round(y, 3)

    def _path(self, points: Sequence[complex], closed: bool) -> str:
        pts = " ".join("{},{}".format(*self._xy(complex(z))) for z in points)
        tag = "polygon" if closed else "polyline"
        return '<{} points="{}"'.format(tag, pts)

    def add_image(self, href: str) -> None:
        self.items.append(
            '<image x="0" y="0" width="{}" height="{}" xlink:href="{}"/>'.format(self.width, self.height, href)
        )

    def add_polyline(self, points: Sequence[complex], closed: bool = False, kind: str = "level") -> None:
        if len(points) < 2:
            return
        self.items.append(
            '{} fill="none" stroke="{}" stroke-width="1"/>'.format(self._path(points, closed), self.STROKE[kind])
        )

    def add_annulus(self, r0: float, r1: float) -> None:
        cx, cy = self._xy(0j)
        sx = self.width / self.window.get_width()
        for r in (r0, r1):
            self.items.append(
                '<ellipse cx="{}" cy="{}" rx="{}" ry="{}" fill="none" stroke="{}" stroke-dasharray="4 2"/>'.format(
                    cx, cy, round(r * sx, 3), round(r * self.height / self.window.get_height(), 3),
                    self.STROKE["annulus"],
                )
            )

    def add_polygon(self, polygon: Polygon) -> None:
        for ring in polygon.get_rings():
            self.add_polyline(ring, closed=True, kind="region")

    def add_points(self, points: Sequence[complex], radius: float = 2.0) -> None:
        for z in points:
            if z is None:
                continue
            z = complex(z)
            if not self.window.contains(z):
                continue
            x, y = self._xy(z)
            self.items.append(
                '<circle cx="{}" cy="{}" r="{}" fill="{}"/>'.format(x, y, radius, self.STROKE["orbit"])
            )

    def to_svg(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            '<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" '
            'version="1.1" width="{0}" height="{1}" viewBox="0 0 {0} {1}">\n'
        ).format(self.width, self.height)
        back = '<rect x="0" y="0" width="{}" height="{}" fill="none" stroke="#241917"/>\n'.format(
            self.width, self.height
        )
        return head + back + "".join(item + "\n" for item in self.items) + "</svg>\n"

    def save(self, path: str) -> None:
        write_text(self.to_svg(), path)


# ----------------------------------------------------------------------
# JSON
# ----------------------------------------------------------------------


def jsonable(obj: Any) -> Any:
    """numpy / mpmath / 複素数 / 非有限値を JSON にできる形へ"""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (mpmath.mpf, mpmath.mpc)):
        return mpmath.nstr(obj, 20)
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return obj


def dumps(data: Any) -> str:
    return json.dumps(jsonable(data), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_text(text: str, path: str) -> None:
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, mode="w", encoding="utf-8") as f:
            f.write(text)
    except OSError as e:
        raise IOFailure("cannot write file", {"path": path, "reason": str(e)})
    logger.info("wrote %s", path)


def write_json(data: Any, path: str = OUT_REPORT) -> None:
    """sort_keys と indent を固定して同じ入力から同じバイト列を書く"""
    write_text(dumps(data), path)


def read_json(path: str) -> Any:
    try:
        with open(path, encoding="utf-8") as f:
            return json.load(f)
    except OSError as e:
        raise IOFailure("cannot read file", {"path": path, "reason": str(e)})
    except json.JSONDecodeError as e:
        raise InvalidParam("malformed JSON", {"path": path, "reason": str(e)})


# ----------------------------------------------------------------------
# a_n の式
# ----------------------------------------------------------------------


class RateExpr:
    """RateExpr クラス

    n の式で与える列 a_n（numpy 配列にも評価できる）

        expr   = term { ("+" | "-") term }
        term   = factor { ("*" | "/") factor }
        factor = "-" factor | power
        power  = atom [ ("^" | "**") factor ]
        atom   = number | "n" | "e" | "pi" | func "(" expr [ "," expr ] ")" | "(" expr ")"
        func   = "sqrt" | "log" | "exp" | "pow"

    Attributes:
        text (str): 式
        tree (Tuple): 構文木
    """

    TOKEN = re.compile(r"\s*(?:(\d+\.?\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)|(\*\*|[-+*/^(),])|([A-Za-z_]\w*))")
    FUNCS = {"sqrt": 1, "log": 1, "exp": 1, "pow": 2}
    CONSTS = {"e": math.e, "pi": math.pi}

    def __init__(self, text: str) -> None:
        self.text = text
        self.tokens = self._tokenize(text)
        self.pos = 0
        self.tree = self._expr()
        if self.pos != len(self.tokens):
            raise InvalidParam("unexpected token in rate expression", {"expr": text, "token": self.tokens[self.pos]})

    def __repr__(self) -> str:
        return "<RateExpr {}>".format(self.text)

    def _tokenize(self, text: str) -> List[str]:
        tokens = []
        pos = 0
        text = text.strip()
        while pos < len(text):
            m = self.TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                raise InvalidParam("cannot read rate expression", {"expr": text, "at": pos})
            tokens.append(m.group(m.lastindex))
            pos = m.end()
        if not tokens:
            raise InvalidParam("empty rate expression")
        return tokens

    def _peek(self) -> Optional[str]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def _take(self, expected: Optional[str] = None) -> str:
        token = self._peek()
        if token is None or (expected is not None and token != expected):
            raise InvalidParam("rate expression ends early", {"expr": self.text, "expected": expected})
        self.pos += 1
        return token

    def _expr(self) -> Tuple:
        node = self._term()
        while self._peek() in ("+", "-"):
            node = (self._take(), node, self._term())
        return node

    def _term(self) -> Tuple:
        node = self._factor()
        while self._peek() in ("*", "/"):
            node = (self._take(), node, self._factor())
        return node

    def _factor(self) -> Tuple:
        if self._peek() == "-":
            self._take()
            return ("neg", self._factor())
        return self._power()

    def _power(self) -> Tuple:
        node = self._atom()
        if self._peek() in ("^", "**"):
            self._take()
            node = ("pow", node, self._factor())
        return node

    def _atom(self) -> Tuple:
        token = self._take()
        if token == "(":
            node = self._expr()
            self._take(")")
            return node
        if token == "n":
            return ("n",)
        if token in self.CONSTS:
            return ("num", self.CONSTS[token])
        if token in self.FUNCS:
            self._take("(")
            args = [self._expr()]
            while self._peek() == ",":
                self._take()
                args.append(self._expr())
            self._take(")")
            if len(args) != self.FUNCS[token]:
                raise InvalidParam("wrong number of arguments", {"func": token, "given": len(args)})
            return (token, *args)
        try:
            return ("num", float(token))
        except ValueError:
            raise InvalidParam("unknown name in rate expression", {"expr": self.text, "name": token})

    def _eval(self, node: Tuple, n: Any) -> Any:
        op = node[0]
        if op == "n":
            return n
        if op == "num":
            return node[1]
        if op == "neg":
            return -self._eval(node[1], n)
        args = [self._eval(child, n) for child in node[1:]]
        if op == "+":
            return args[0] + args[1]
        if op == "-":
            return args[0] - args[1]
        if op == "*":
            return args[0] * args[1]
        if op == "/":
            return args[0] / args[1]
        if op == "pow":
            return np.power(args[0], args[1])
        if op == "sqrt":
            return np.sqrt(args[0])
        if op == "log":
            return np.log(args[0])
        return np.exp(args[0])

    def evaluate(self, n: Union[int, float, np.ndarray]) -> Any:
        """n（整数または配列）での値"""
        n_ = np.asarray(n, dtype=float)
        with np.errstate(all="ignore"):
            value = np.broadcast_to(np.asarray(self._eval(self.tree, n_), dtype=float), n_.shape)
        if value.ndim == 0:
            return float(value)
        return np.array(value)

    def __call__(self, n: Any) -> Any:
        return self.evaluate(n)

    def to_dict(self) -> Dict[str, Any]:
        return {"expr": self.text}
