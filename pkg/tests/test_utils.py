#!/usr/bin/env python

import filecmp
import json
import math
import os
import shutil
import unittest

import mpmath
import numpy as np
from PIL import Image

from tractoria import FunctionSpec, Overlay, Polygon, RateExpr, View, Window
from tractoria.errors import InvalidParam, IOFailure
from tractoria.utils import dumps, jsonable, read_json, write_json

INPUT_DIR = "./tests/input/"
TEMP_DIR = "./test_temp/"


class TestView(unittest.TestCase):
    def setUp(self) -> None:
        os.makedirs(TEMP_DIR, exist_ok=True)
        self.exp = FunctionSpec("EXP")

    def tearDown(self) -> None:
        shutil.rmtree(TEMP_DIR, ignore_errors=True)

    def test__draw_exp(self) -> None:
        view = View(self.exp, Window(-1.3, 2.1, -2, 2), resolution=64)
        self.assertEqual(view.get_image().mode, "L")
        self.assertEqual(view.mask.shape, (view.height + 1, view.width + 1))
        col, row = view.pixel_of(complex(1.5, 0))
        self.assertTrue(view.mask[row, col])
        col, row = view.pixel_of(complex(-1, 1))
        self.assertFalse(view.mask[row, col])
        self.assertAlmostEqual(view.get_white_fraction(), 2.1 / 3.4, delta=0.05)

    def test__doubled(self) -> None:
        view = View(FunctionSpec("EXPZ2COS"), Window.square(4), resolution=32)
        finer = view.doubled()
        self.assertEqual(finer.mask.shape, (2 * view.height + 1, 2 * view.width + 1))
        self.assertEqual(view.agreement(finer), 1.0)
        with self.assertRaises(InvalidParam):
            view.agreement(view)

    def test__save_pgm(self) -> None:
        view = View(self.exp, Window.square(2), resolution=16)
        path = os.path.join(TEMP_DIR, "exp.pgm")
        view.save(path)
        with open(path, "rb") as f:
            self.assertEqual(f.read(2), b"P5")
        actual = np.array(Image.open(path))
        self.assertTrue(np.array_equal(actual, np.array(view.get_image())))
        again = os.path.join(TEMP_DIR, "again.pgm")
        View(self.exp, Window.square(2), resolution=16).save(again)
        self.assertTrue(filecmp.cmp(path, again, shallow=False))

    def test__invalid(self) -> None:
        with self.assertRaises(InvalidParam):
            View(self.exp, Window.square(2), resolution=1)
        with self.assertRaises(IOFailure):
            View(self.exp, Window.square(2), resolution=4).save(os.path.join(TEMP_DIR, "none", "x.unknown"))


class TestOverlay(unittest.TestCase):
    def setUp(self) -> None:
        os.makedirs(TEMP_DIR, exist_ok=True)

    def tearDown(self) -> None:
        shutil.rmtree(TEMP_DIR, ignore_errors=True)

    def test_svg(self) -> None:
        overlay = Overlay(Window.square(2), width=100)
        self.assertEqual(overlay.height, 100)
        overlay.add_image("tract.png")
        overlay.add_polyline([-1j, 1j])
        overlay.add_polyline([0j])
        overlay.add_annulus(0.5, 1.0)
        overlay.add_polygon(Polygon.rectangle(0, 1, 0, 1))
        overlay.add_points([0.5, None, 10])
        self.assertEqual(len(overlay), 6)
        svg = overlay.to_svg()
        self.assertIn('version="1.1"', svg)
        self.assertIn('<polyline points="50.0,75.0 50.0,25.0"', svg)
        self.assertIn('<circle cx="62.5" cy="50.0"', svg)
        path = os.path.join(TEMP_DIR, "overlay.svg")
        overlay.save(path)
        with open(path, encoding="utf-8") as f:
            self.assertEqual(f.read(), svg)


class TestJson(unittest.TestCase):
    def setUp(self) -> None:
        os.makedirs(TEMP_DIR, exist_ok=True)

    def tearDown(self) -> None:
        shutil.rmtree(TEMP_DIR, ignore_errors=True)

    def test_jsonable(self) -> None:
        data = {
            "inf": math.inf,
            "neg": -math.inf,
            "z": complex(1, -2),
            "array": np.arange(3),
            "flag": np.bool_(True),
            "mp": mpmath.mpf(1) / 4,
        }
        self.assertEqual(
            jsonable(data),
            {"inf": "inf", "neg": "-inf", "z": [1.0, -2.0], "array": [0, 1, 2], "flag": True, "mp": "0.25"},
        )

    def test_deterministic(self) -> None:
        a = os.path.join(TEMP_DIR, "a.json")
        b = os.path.join(TEMP_DIR, "b.json")
        write_json({"b": 1, "a": [0.5, math.inf]}, a)
        write_json({"a": [0.5, math.inf], "b": 1}, b)
        self.assertTrue(filecmp.cmp(a, b, shallow=False))
        self.assertEqual(read_json(a), {"a": [0.5, "inf"], "b": 1})
        self.assertEqual(dumps({"x": 1}), '{\n  "x": 1\n}\n')

    def test_read_errors(self) -> None:
        with self.assertRaises(IOFailure):
            read_json(os.path.join(TEMP_DIR, "missing.json"))
        path = os.path.join(TEMP_DIR, "broken.json")
        with open(path, "w") as f:
            f.write("{")
        with self.assertRaises(InvalidParam):
            read_json(path)
        self.assertEqual(read_json(INPUT_DIR + "unit_square.json")["arcs"]["left"], [3])


class TestRateExpr(unittest.TestCase):
    def test_evaluate(self) -> None:
        self.assertAlmostEqual(RateExpr("sqrt(n)")(16), 4.0)
        self.assertAlmostEqual(RateExpr("2^n + 1")(3), 9.0)
        self.assertAlmostEqual(RateExpr("2**3**2")(0), 512.0)
        self.assertAlmostEqual(RateExpr("-n + pow(n, 2) / 2")(4), 4.0)
        self.assertAlmostEqual(RateExpr("log(e) * pi")(0), math.pi)
        self.assertAlmostEqual(RateExpr("exp(0) + 1.5e1")(0), 16.0)
        values = RateExpr("10*sqrt(n+1)").evaluate(np.array([0, 3, 8]))
        self.assertTrue(np.allclose(values, [10.0, 20.0, 30.0]))
        self.assertEqual(RateExpr("3").evaluate(np.arange(2)).tolist(), [3.0, 3.0])
        self.assertEqual(RateExpr("n").to_dict(), {"expr": "n"})

    def test_invalid(self) -> None:
        for text in ["", "n +", "foo(n)", "sqrt(n, 2)", "(n", "n n", "2 $ n"]:
            with self.assertRaises(InvalidParam):
                RateExpr(text)


if __name__ == "__main__":
    unittest.main()
