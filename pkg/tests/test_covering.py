#!/usr/bin/env python

import math
import unittest

import numpy as np

from tractoria import FunctionSpec, Region, Window
from tractoria.covering import (
    CoverCertificate,
    ProbeGrid,
    bcover_predict,
    boundary_arcs,
    hypcover_check,
    image_annulus_certificate,
    image_grid_hits,
    lemma_record,
    mcover_check,
)
from tractoria.errors import (
    BudgetExceeded,
    InvalidParam,
    KNotAboveOne,
    LevelArcMismatch,
    LogTooSmall,
    PreconditionFails,
)
from tractoria.tract import locate_tract

PROBES = (8, 16)


class TestCertificate(unittest.TestCase):
    def test_square_map(self) -> None:
        fn = FunctionSpec.poly([0, 0, 1])
        certificate = image_annulus_certificate(fn, Region.disk(1.0), (math.log(0.1), math.log(0.9)), PROBES)
        self.assertEqual(certificate.get_status(), "certified")
        self.assertEqual(set(certificate.windings), {2})
        self.assertGreater(certificate.boundary_margin, 0)
        self.assertTrue(certificate.full_cover)

    def test_winding_sign(self) -> None:
        fn = FunctionSpec.poly([0, 1])
        annulus = (math.log(0.2), math.log(0.5))
        grid = ProbeGrid(annulus, 2, 2)

        def certificate(windings: list) -> CoverCertificate:
            return CoverCertificate(fn, Region.disk(1.0), annulus, grid, windings, 0.1, 0.1, 64, 0, 53, [])

        self.assertEqual(certificate([1, 1, 2, 1]).get_status(), "certified")
        negative = certificate([1, -1, 1, 1])
        self.assertEqual(negative.get_status(), "inconclusive")
        self.assertFalse(negative.full_cover)
        self.assertIn("negative winding number", negative.reasons)
        self.assertEqual(certificate([-1, -1, -1, -1]).get_status(), "inconclusive")
        self.assertEqual(certificate([1, 0, -1, 1]).get_status(), "refuted")
        self.assertEqual(certificate([1, None, 1, 1]).get_status(), "inconclusive")

    def test_polynomial_roots(self) -> None:
        # w の原像は z^2 - 1 - w の根で、半径 2 の円板に 2 つある
        fn = FunctionSpec.poly([-1, 0, 1])
        certificate = image_annulus_certificate(fn, Region.disk(2.0), (math.log(0.5), math.log(2)), PROBES)
        self.assertEqual(certificate.get_status(), "certified")
        self.assertEqual(certificate.get_min_winding(), 2)

    def test_exp_rectangle(self) -> None:
        fn = FunctionSpec("EXP")
        region = Region.rectangle(1, 2, -3, 3)
        certificate = image_annulus_certificate(fn, region, (1.2, 1.8), PROBES)
        self.assertEqual(certificate.get_status(), "certified")
        self.assertEqual(set(certificate.windings), {1})
        self.assertFalse(certificate.full_cover)
        certificate = image_annulus_certificate(fn, region, (2.5, 3.0), PROBES)
        self.assertEqual(certificate.get_status(), "refuted")
        self.assertEqual(certificate.to_dict()["status"], "refuted")

    def test_grid_hits(self) -> None:
        fn = FunctionSpec("EXP")
        region = Region.rectangle(1, 2, -3, 3)
        best, spacing = image_grid_hits(fn, region, (1.2, 1.8), PROBES, nodes=64)
        self.assertEqual(len(best), 8 * 16)
        self.assertTrue(all(best <= spacing))
        best, spacing = image_grid_hits(fn, region, (2.5, 3.0), PROBES, nodes=64)
        self.assertTrue(all(best > spacing))

    def _random_triples(self, nodes: int) -> None:
        fn = FunctionSpec("EXP")
        rng = np.random.default_rng(17)
        for k in range(20):
            x0 = rng.uniform(0.5, 1.5)
            x1 = x0 + rng.uniform(0.5, 1.5)
            h = rng.uniform(3.5, 5.0)
            region = Region.rectangle(x0, x1, -h, h)
            if k % 2 == 0:
                mid = (x0 + x1) / 2
                annulus = (rng.uniform(x0 + 0.1, mid), rng.uniform(mid, x1 - 0.1))
            else:
                lo = x1 + rng.uniform(0.3, 1.0)
                annulus = (lo, lo + rng.uniform(0.1, 1.0))
            status = image_annulus_certificate(fn, region, annulus, PROBES).get_status()
            best, spacing = image_grid_hits(fn, region, annulus, PROBES, nodes=nodes)
            if status == "certified":
                self.assertTrue(all(best <= spacing), (k, annulus))
            elif status == "refuted":
                self.assertTrue(any(best > spacing), (k, annulus))
            self.assertNotEqual(status, "refuted" if k % 2 == 0 else "certified")

    def test_random_triples(self) -> None:
        self._random_triples(128)

    @unittest.skip("needs long time")
    def test_random_triples_fine(self) -> None:
        self._random_triples(512)

    def test_probe_grid(self) -> None:
        grid = ProbeGrid((0.0, 1.0), 3, 4)
        self.assertEqual(len(grid), 12)
        self.assertAlmostEqual(grid.points()[0].imag, math.pi / 4)
        with self.assertRaises(InvalidParam):
            ProbeGrid((1.0, 0.0))


class TestRegion(unittest.TestCase):
    def test_annulus_tract(self) -> None:
        fn = FunctionSpec("EXP")
        tract = locate_tract(fn, 2, window=Window.square(10))
        region = Region.annulus_tract(tract, 2, 4)
        self.assertTrue(region.contains(3))
        self.assertFalse(region.contains(-3))
        self.assertAlmostEqual(region.get_polygon().get_area(), 6 * math.pi, delta=0.3)
        arcs = boundary_arcs(region, "level")
        self.assertGreater(len(arcs), 0)
        for arc in arcs:
            ends = region.polygon.A[arc]
            self.assertLess(max(abs(z.real) for z in ends), 1e-9)
        self.assertEqual(Region.from_dict(region.to_dict()).kind, "annulus-tract")

    def test_bad_annulus(self) -> None:
        tract = locate_tract(FunctionSpec("EXP"), 2, window=Window.square(10))
        with self.assertRaises(InvalidParam):
            Region.annulus_tract(tract, 4, 2)


class TestLemmas(unittest.TestCase):
    def setUp(self) -> None:
        self.exp = FunctionSpec("EXP")

    def test_bcover(self) -> None:
        tract = locate_tract(self.exp, 2, window=Window.square(10))
        with self.assertRaises(PreconditionFails):
            bcover_predict(self.exp, tract, 3, 2)
        record = lemma_record(lambda: bcover_predict(self.exp, tract, 3, 2))
        self.assertFalse(record["accepted"])
        self.assertEqual(record["error"], "PreconditionFails")

    def test_hypcover(self) -> None:
        region = Region.rectangle(0, 1000, -500, 500)
        prediction = hypcover_check(self.exp, region, 400, 600)
        self.assertTrue(prediction.accepted)
        self.assertAlmostEqual(prediction.annulus[0], 400.0)
        self.assertAlmostEqual(prediction.annulus[1], 600.0)
        self.assertLess(prediction.checks["rho_upper"], prediction.checks["lambda"])
        self.assertTrue(prediction.contains(450, 550))

    def test_hypcover_budget(self) -> None:
        region = Region.rectangle(0, 1, 0, 1)
        with self.assertRaises(BudgetExceeded):
            hypcover_check(self.exp, region, complex(0.1, 0.5), complex(0.9, 0.5))
        with self.assertRaises(KNotAboveOne):
            hypcover_check(self.exp, region, complex(0.5, 0.5), complex(0.5, 0.5))

    def test_mcover(self) -> None:
        region = Region.rectangle(0, 2000, -1, 1)
        prediction = mcover_check(self.exp, region, 1000, "left", 1.5)
        self.assertTrue(prediction.accepted)
        self.assertTrue(prediction.checks["cover_threshold_holds"])
        self.assertAlmostEqual(prediction.annulus[0], 160 * math.pi / math.sin(1.5) ** 2)
        self.assertAlmostEqual(prediction.annulus[1], 1000.0)
        prediction = mcover_check(self.exp, region, 200, "left", 1.5)
        self.assertFalse(prediction.accepted)
        with self.assertRaises(LogTooSmall):
            mcover_check(self.exp, region, 100, "left", 1.5)

    def test_mcover_arc(self) -> None:
        region = Region.rectangle(0, 2000, -1, 1)
        with self.assertRaises(LevelArcMismatch):
            mcover_check(self.exp, region, 1000, [], 1.5)
        with self.assertRaises(LevelArcMismatch):
            mcover_check(self.exp, region, 1000, "right", 1.5)

    def test_mcover_harmonic(self) -> None:
        region = Region.rectangle(0, 2000, -1, 1)
        prediction = mcover_check(self.exp, region, 1000, "left", 1.5, walks=200, seed=3)
        self.assertIsNotNone(prediction.harmonic)
        self.assertEqual(prediction.harmonic.walks, 200)
        self.assertEqual(prediction.to_dict()["harmonic"]["seed"], 3)


if __name__ == "__main__":
    unittest.main()
