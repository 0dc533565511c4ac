#!/usr/bin/env python

import math
import unittest

import mpmath
import numpy as np

from tractoria import Example1, Example2, FunctionSpec, View, Window
from tractoria.complexfn import mp_from_pair, mp_to_pair, principal_arg, series_truncation
from tractoria.errors import InvalidParam, NearZero, RangeOverflow


class TestFunctionSpec(unittest.TestCase):
    def test_eval_exp(self) -> None:
        fn = FunctionSpec("EXP")
        with mpmath.workprec(256):
            self.assertLess(abs(fn.eval(1) - mpmath.e), mpmath.mpf(2) ** -240)

    def test_eval_log_large(self) -> None:
        fn = FunctionSpec("EXP")
        lv = fn.eval_log(complex(1000, 3))
        self.assertAlmostEqual(float(lv.logmod), 1000.0)
        self.assertAlmostEqual(float(lv.arg), 3.0)
        lv = fn.eval_log(complex(10, 7))
        self.assertAlmostEqual(float(lv.arg), 7 - 2 * math.pi)

    def test_eval_overflow(self) -> None:
        with self.assertRaises(RangeOverflow):
            FunctionSpec("EXP").eval(2 ** 22)

    def test_near_zero(self) -> None:
        fn = FunctionSpec.poly([-1, 1])
        with self.assertRaises(NearZero):
            fn.eval_log(1)

    def test_invalid(self) -> None:
        with self.assertRaises(InvalidParam):
            FunctionSpec("SIN")
        with self.assertRaises(InvalidParam):
            FunctionSpec("EXP").eval(1, precision=16)
        with self.assertRaises(InvalidParam):
            FunctionSpec("EXP", boundary_level=0)

    def test_from_json(self) -> None:
        fn = FunctionSpec.from_json('{"fn": "EXPZ2COS", "R": 2.0}')
        self.assertEqual(fn.get_id(), "EXPZ2COS")
        self.assertEqual(fn.get_level(), 2.0)
        self.assertEqual(FunctionSpec.from_dict(fn.to_dict()), fn)
        self.assertEqual(FunctionSpec.from_json("exp"), FunctionSpec("EXP"))

    def test_recip_exp_g(self) -> None:
        f = FunctionSpec("RECIP_EXP_G")
        g = FunctionSpec("G")
        z = complex(3, 1)
        with mpmath.workprec(128):
            expected = -mpmath.re(g.eval(z, 128))
            self.assertLess(abs(f.eval_log(z, 128).logmod - expected), 1e-25)

    def test_log_derivative(self) -> None:
        fn = FunctionSpec("EXPZ2COS")
        value = complex(fn.log_derivative(1.0))
        self.assertAlmostEqual(value.real, 2 - math.tan(1.0))
        self.assertAlmostEqual(value.imag, 0.0)

    def test_log_array(self) -> None:
        fn = FunctionSpec("EXPZ2COS")
        Z = np.array([complex(3, 0.5), complex(-2, 1), complex(0.3, 25)])
        fast = fn.log_modulus_array(Z)
        for z, v in zip(Z, fast):
            self.assertAlmostEqual(float(fn.eval_log(z).logmod), float(v), places=8)

    def test_log_growth(self) -> None:
        self.assertAlmostEqual(float(FunctionSpec("EXP").log_growth(math.log(10))), 10.0)
        self.assertAlmostEqual(float(FunctionSpec("EXPZ2COS").log_growth(math.log(3))), 9.0)
        self.assertEqual(FunctionSpec("EXP").log_growth(1e16), mpmath.inf)

    def test_compose(self) -> None:
        fn = FunctionSpec.compose(FunctionSpec("EXP"), FunctionSpec.poly([0, 0, 1]))
        self.assertAlmostEqual(float(fn.eval_log(complex(2, 0)).logmod), 4.0)


class TestHelpers(unittest.TestCase):
    def test_principal_arg(self) -> None:
        self.assertAlmostEqual(principal_arg(-math.pi), math.pi)
        self.assertAlmostEqual(principal_arg(7.0), 7.0 - 2 * math.pi)

    def test_mp_pair(self) -> None:
        with mpmath.workprec(200):
            x = mpmath.mpf(1) / 3
            self.assertEqual(mp_from_pair(mp_to_pair(x)), x)
        self.assertEqual(mp_from_pair(mp_to_pair(mpmath.inf)), mpmath.inf)

    def test_series_truncation(self) -> None:
        K, tail = series_truncation(10.0, 53)
        self.assertGreaterEqual(2 ** K, 20)
        self.assertLess(tail, 2 * 2.0 ** (-20))


class TestExamples(unittest.TestCase):
    def test_radii(self) -> None:
        r, r_prime = Example1.radii(2)
        self.assertAlmostEqual(r, 9.0)
        self.assertAlmostEqual(r_prime, 12.0)
        with self.assertRaises(InvalidParam):
            Example1.radii(2, eps=0.5)

    def test_spines(self) -> None:
        report = Example1.check_spines(2, [0], samples=8)
        self.assertTrue(report["passed"])
        # j = 1 では r = r_n 付近で A_{j,n} の評価が崩れる
        report = Example1.check_spines(2, [1], samples=8)
        self.assertFalse(report["rows"][0]["a_passed"])
        self.assertTrue(report["rows"][0]["b_passed"])

    def test_argument_growth(self) -> None:
        n = 3
        report = Example1.check_argument_growth(n, sum(Example1.radii(n)) / 2, samples=2048)
        self.assertTrue(report["monotone"])
        self.assertLess(report["relative_error"], 1e-6)

    def test_z_points(self) -> None:
        rows = Example2.check_z_points(8)
        self.assertEqual(len(rows), 9)
        self.assertTrue(all(row["passed"] for row in rows))

    def test_spines_range(self) -> None:
        for n in range(2, 7):
            report = Example1.check_spines(n, [0, 1, 2 ** n - 1], samples=8)
            rows = {row["j"]: row for row in report["rows"]}
            self.assertTrue(rows[0]["a_passed"] and rows[0]["b_passed"], n)
            self.assertTrue(all(row["b_passed"] for row in report["rows"]), n)
            if n >= 4:
                self.assertTrue(report["passed"], n)

    def test_z_points_range(self) -> None:
        rows = Example2.check_z_points(20)
        self.assertEqual(len(rows), 21)
        self.assertTrue(all(row["passed"] for row in rows))

    def test_real_axis(self) -> None:
        fn = FunctionSpec("EXPZ2COS")
        with mpmath.workprec(256):
            for n in range(4):
                zero = (2 * n + 1) * mpmath.pi / 2
                self.assertLess(abs(fn.eval(zero, 256)), 1)
        for n in range(11):
            self.assertGreater(float(fn.eval_log(Example2.interior_point(n)).logmod), 0)
        self.assertAlmostEqual(Example2.zero(2), 5 * math.pi / 2)

        view = View(fn, Window.square(8), resolution=512)
        for x in (math.pi / 2, -math.pi / 2):
            col, row = view.pixel_of(complex(x, 0))
            self.assertFalse(view.mask[row, col])
        for z in (complex(0, math.pi / 2), complex(0, -math.pi / 2)):
            col, row = view.pixel_of(z)
            self.assertFalse(view.mask[row, col])
        for x in (math.pi, 2 * math.pi, -math.pi, -2 * math.pi):
            col, row = view.pixel_of(complex(x, 0))
            self.assertTrue(view.mask[row, col])

    def test_critical_point(self) -> None:
        c = Example2.critical_point(1)
        self.assertLess(float(c), 3 * math.pi / 2)
        self.assertAlmostEqual(2 * float(c) * math.cos(float(c)), math.sin(float(c)), places=10)
        value = Example2.critical_value(3)
        self.assertLess(abs(value["log_critical_value"] - value["log_approximation"]), 1.5)


if __name__ == "__main__":
    unittest.main()
