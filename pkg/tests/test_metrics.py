#!/usr/bin/env python

import math
import unittest

import numpy as np

from tractoria import CoverThresholds, Polygon
from tractoria.geometry import random_convex_polygon
from tractoria.errors import (
    ArcEmpty,
    AtPuncture,
    EtaOutOfRange,
    KernelAtLeastOne,
    KNotAboveOne,
    LogTooSmall,
    OutsideDisk,
    PointNotInterior,
)
from tractoria.metrics import (
    C_eps,
    batch_generator,
    bcover_floor,
    choose_eta,
    harmonic_measure_grid,
    harmonic_measure_wos,
    hyperbolic_distance_disk,
    lambda_threshold,
    mcover_sweep,
    mcover_threshold,
    poisson_kernel,
    poisson_mean,
    punctured_plane_density_floor,
    punctured_plane_radial_integral,
)


class TestHyperbolic(unittest.TestCase):
    def test_disk(self) -> None:
        self.assertAlmostEqual(hyperbolic_distance_disk(0, 0.5), 0.5 * math.log(3))
        self.assertAlmostEqual(hyperbolic_distance_disk(0.5j, 0.5j), 0.0)
        with self.assertRaises(OutsideDisk):
            hyperbolic_distance_disk(0, 1)

    def test_punctured_plane(self) -> None:
        self.assertAlmostEqual(punctured_plane_density_floor(math.e), 1 / (2 * math.e * (1 + 10 * math.pi)))
        with self.assertRaises(AtPuncture):
            punctured_plane_density_floor(1)
        numeric, closed = punctured_plane_radial_integral(0.5, 10)
        self.assertAlmostEqual(numeric, closed, places=10)
        with self.assertRaises(KNotAboveOne):
            punctured_plane_radial_integral(0.5, 1)

    def test_lambda(self) -> None:
        self.assertAlmostEqual(lambda_threshold(math.exp(10 * math.pi)), 0.5 * math.log(2))
        thresholds = CoverThresholds.from_K(math.exp(10 * math.pi))
        self.assertAlmostEqual(thresholds.get_lambda(), 0.5 * math.log(2))
        self.assertAlmostEqual(thresholds.bcover_floor, 16 * math.pi ** 2)
        self.assertAlmostEqual(bcover_floor(2), 16 * math.pi ** 2)
        with self.assertRaises(KNotAboveOne):
            CoverThresholds.from_K(1)


class TestPoisson(unittest.TestCase):
    def test_kernel(self) -> None:
        self.assertAlmostEqual(poisson_kernel(0, 0.5), 3.0)
        self.assertAlmostEqual(poisson_mean(0.9), 1.0, places=9)
        with self.assertRaises(EtaOutOfRange):
            poisson_kernel(0, 1)

    def test_mcover_threshold(self) -> None:
        self.assertAlmostEqual(mcover_threshold(math.pi, 0.5), 20 * math.pi * 0.5 / ((1 - 1 / 3) * 0.5))
        with self.assertRaises(KernelAtLeastOne):
            mcover_threshold(0.1, 0.5)

    def test_choose_eta(self) -> None:
        self.assertAlmostEqual(C_eps(math.pi / 2), 160 * math.pi)
        eta, report = choose_eta(200, math.pi / 2)
        self.assertAlmostEqual(eta, 1 - 40 * math.pi / 200)
        self.assertTrue(report["lower_holds"])
        self.assertTrue(report["upper_holds"])
        with self.assertRaises(LogTooSmall):
            choose_eta(100, math.pi / 2)

    def test_sweep(self) -> None:
        rows = mcover_sweep(1.5, [100, 1000, 1e5])
        self.assertEqual(len(rows), 2)
        self.assertTrue(rows[-1]["holds"])


class TestHarmonicMeasure(unittest.TestCase):
    def setUp(self) -> None:
        self.square = Polygon.rectangle(0, 1, 0, 1)
        self.center = complex(0.5, 0.5)

    def test_generator(self) -> None:
        a = batch_generator(3, 1).uniform(size=4)
        b = batch_generator(3, 1).uniform(size=4)
        c = batch_generator(3, 2).uniform(size=4)
        self.assertTrue(np.array_equal(a, b))
        self.assertFalse(np.array_equal(a, c))

    def test_wos_square(self) -> None:
        estimate = harmonic_measure_wos(self.square, self.center, "bottom", walks=4000, seed=5)
        self.assertLess(abs(estimate.get_omega() - 0.25), 0.05)
        self.assertGreater(estimate.get_ci95(), 0)
        again = harmonic_measure_wos(self.square, self.center, "bottom", walks=4000, seed=5)
        self.assertEqual(estimate.get_omega(), again.get_omega())
        self.assertEqual(estimate.to_dict()["arc"], [0])

    def test_ci_at_extremes(self) -> None:
        everything = harmonic_measure_wos(self.square, self.center, [0, 1, 2, 3], walks=50, seed=1)
        self.assertEqual(everything.get_omega(), 1.0)
        self.assertAlmostEqual(everything.get_ci95(), 1 - 50 / (50 + 1.96 ** 2), places=3)
        self.assertEqual(everything.get_interval()[1], 1.0)
        self.assertAlmostEqual(everything.get_interval()[0], 50 / (50 + 1.96 ** 2), places=3)
        estimate = harmonic_measure_wos(self.square, self.center, "bottom", walks=400, seed=2)
        omega = estimate.get_omega()
        self.assertLess(estimate.get_ci95(), 1.2 * 1.96 * math.sqrt(omega * (1 - omega) / 400))
        self.assertGreater(estimate.get_ci95(), 0.9 * 1.96 * math.sqrt(omega * (1 - omega) / 400))

    def test_grid_square(self) -> None:
        self.assertAlmostEqual(harmonic_measure_grid(self.square, self.center, "bottom", nodes=64), 0.25, places=2)
        whole = harmonic_measure_grid(self.square, complex(0.3, 0.6), [0, 1, 2, 3], nodes=32)
        self.assertAlmostEqual(whole, 1.0, places=6)

    def test_random_convex(self) -> None:
        rng = np.random.default_rng(11)
        for seed in range(3):
            polygon = random_convex_polygon(rng)
            z = complex(np.mean(polygon.outer))
            estimate = harmonic_measure_wos(polygon, z, [0, 1], walks=4000, seed=seed)
            omega = harmonic_measure_grid(polygon, z, [0, 1], nodes=128)
            self.assertLess(abs(estimate.get_omega() - omega), max(2 * estimate.get_ci95(), 0.04))

    def test_invalid(self) -> None:
        with self.assertRaises(PointNotInterior):
            harmonic_measure_wos(self.square, 2, "bottom", walks=10)
        with self.assertRaises(ArcEmpty):
            harmonic_measure_wos(self.square, self.center, [], walks=10)
        with self.assertRaises(ArcEmpty):
            harmonic_measure_grid(self.square, self.center, [])


if __name__ == "__main__":
    unittest.main()
