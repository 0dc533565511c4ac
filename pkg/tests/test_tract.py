#!/usr/bin/env python

import math
import unittest

import mpmath
import numpy as np

from tractoria import FunctionSpec, Window
from tractoria.complexfn import check_expansion_estimate
from tractoria.errors import CircleMissesTract, InvalidParam, SampleOutsideTract, SeedOnBoundary
from tractoria.tract import (
    check_MD_convexity,
    iterate_MD,
    label_seeds,
    locate_tract,
    log_spaced_radii,
    max_modulus,
    max_modulus_on_tract,
    same_tract,
    trace_level_set,
)


class TestWindow(unittest.TestCase):
    def test_window(self) -> None:
        window = Window.from_list([-1, 2, -3, 4])
        self.assertEqual(window.get_width(), 3)
        self.assertTrue(window.contains(complex(0, 4)))
        self.assertFalse(window.contains(complex(3, 0)))
        self.assertTrue(Window.square(5).contains_disk(5))
        self.assertEqual(window.union(Window.square(1)).to_list(), [-1, 2, -3, 4])
        with self.assertRaises(InvalidParam):
            Window(1, 0, 0, 1)
        with self.assertRaises(InvalidParam):
            Window.from_list([0, 1, 2])

    def test_nodes(self) -> None:
        xs, ys = Window(0, 1, 0, 2).nodes(0.25)
        self.assertEqual(len(xs), 5)
        self.assertEqual(len(ys), 9)


class TestLevelSet(unittest.TestCase):
    def test_exp(self) -> None:
        fn = FunctionSpec("EXP")
        curves = trace_level_set(fn, 1.0, Window(-1.3, 2.1, -2, 2))
        self.assertEqual(len(curves), 1)
        self.assertFalse(curves[0].is_closed())
        self.assertAlmostEqual(curves[0].get_length(), 4.0, places=6)
        self.assertLess(np.max(np.abs(curves[0].get_vertices().real)), 1e-9)
        self.assertLess(curves[0].max_level_error(fn), 1e-9)

    def test_expz2cos(self) -> None:
        fn = FunctionSpec("EXPZ2COS")
        curves = trace_level_set(fn, 1.0, Window.square(8))
        self.assertGreater(len(curves), 0)
        self.assertTrue(all(c.max_level_error(fn) < 1e-6 for c in curves))

    def test_invalid_level(self) -> None:
        with self.assertRaises(InvalidParam):
            trace_level_set(FunctionSpec("EXP"), 0.0, Window.square(2))


class TestTractRegion(unittest.TestCase):
    def setUp(self) -> None:
        self.exp = FunctionSpec("EXP")
        self.tract = locate_tract(self.exp, 2, window=Window.square(8))

    def test_contains(self) -> None:
        self.assertTrue(self.tract.contains(complex(3, 1)))
        self.assertFalse(self.tract.contains(-1))
        self.assertTrue(self.tract.is_truncated())
        self.assertTrue(self.tract.covers_circle(5))
        self.assertFalse(self.tract.covers_circle(100))

    def test_contains_nearest_node(self) -> None:
        xs, ys, _, mask = self.tract.get_grid()
        h = xs[1] - xs[0]
        k = int(np.flatnonzero(xs <= 3)[-1])
        cut = mask.copy()
        cut[:, k + 1 :] = False
        self.tract._mask = cut
        y = ys[len(ys) // 2] + 0.5 * (ys[1] - ys[0])
        self.assertTrue(self.tract.contains(complex(xs[k] + 0.3 * h, y)))
        self.assertFalse(self.tract.contains(complex(xs[k] + 0.7 * h, y)))

        self.tract._mask = mask
        rng = np.random.default_rng(5)
        Z = rng.uniform(-7, 7, 200) + 1j * rng.uniform(-7, 7, 200)
        Z = np.append(Z, [complex(-0.01 * h, 1.3), complex(0.01 * h, 1.3)])
        array = self.tract.contains_array(Z)
        self.assertEqual(array.tolist(), [self.tract.contains(z) for z in Z])
        self.assertEqual(array.tolist(), (Z.real > 0).tolist())

    def test_seed_on_boundary(self) -> None:
        with self.assertRaises(SeedOnBoundary):
            locate_tract(FunctionSpec("EXPZ2COS"), 3j)

    def test_labels(self) -> None:
        fn = FunctionSpec("EXPZ2COS")
        self.assertEqual(label_seeds(fn, [3, 6, -3]), [0, 0, 2])
        self.assertTrue(same_tract(locate_tract(fn, 3), locate_tract(fn, 6)))
        self.assertFalse(same_tract(locate_tract(fn, 3), locate_tract(fn, -3)))

    def test_expansion(self) -> None:
        report = check_expansion_estimate(self.exp, self.tract, [complex(1, 1), 3, complex(5, -2)])
        self.assertTrue(report.passed())
        self.assertEqual(report.get_violations(), 0)
        with self.assertRaises(SampleOutsideTract):
            check_expansion_estimate(self.exp, self.tract, [3, -1])


class TestMaxModulus(unittest.TestCase):
    def setUp(self) -> None:
        self.exp = FunctionSpec("EXP")
        self.tract = locate_tract(self.exp, 2, window=Window.square(10))

    def test_max_modulus(self) -> None:
        m = max_modulus(self.exp, 2)
        self.assertAlmostEqual(float(m.value), 2.0, places=9)
        self.assertAlmostEqual(m.z.real, 2.0, places=4)

    def test_on_tract(self) -> None:
        m = max_modulus_on_tract(self.exp, self.tract, 3)
        self.assertAlmostEqual(float(m), 3.0, places=9)
        self.assertTrue(m.certified)

    def test_circle_misses(self) -> None:
        tract = locate_tract(self.exp, 2, window=Window(1, 8, -8, 8))
        with self.assertRaises(CircleMissesTract):
            max_modulus_on_tract(self.exp, tract, 0.5)

    def test_iterate(self) -> None:
        tract = locate_tract(self.exp, 2, window=Window.square(8))
        md = iterate_MD(self.exp, tract, 2, 3)
        self.assertEqual(len(md), 3)
        values = [float(v) for v in md.get_values()]
        self.assertAlmostEqual(values[0], 2.0, places=9)
        self.assertAlmostEqual(values[1], math.exp(2), places=6)
        self.assertAlmostEqual(values[2], math.exp(math.exp(2)), delta=1e-6 * math.exp(math.exp(2)))
        self.assertEqual(md.extrapolated, [False, False, True])

    def test_iterate_cap(self) -> None:
        md = iterate_MD(self.exp, self.tract, 2, 6)
        self.assertEqual(md.get_values()[-1], mpmath.inf)

    def test_convexity(self) -> None:
        report = check_MD_convexity(self.exp, self.tract, 3, 2)
        self.assertTrue(report.passed)
        self.assertAlmostEqual(report.margin, 3.0, places=6)
        with self.assertRaises(InvalidParam):
            check_MD_convexity(self.exp, self.tract, 3, 1)

    def test_radii(self) -> None:
        radii = log_spaced_radii(1, 100, 3)
        self.assertAlmostEqual(radii[1], 10.0)


if __name__ == "__main__":
    unittest.main()
