#!/usr/bin/env python

import math
import unittest

import numpy as np

from tractoria import Polygon
from tractoria.errors import InvalidParam
from tractoria.geometry import convex_hull, random_convex_polygon

INPUT_DIR = "./tests/input/"


class TestPolygon(unittest.TestCase):
    def test_rectangle(self) -> None:
        rect = Polygon.rectangle(0, 2, 0, 1)
        self.assertEqual(len(rect), 4)
        self.assertAlmostEqual(rect.get_area(), 2.0)
        self.assertAlmostEqual(rect.get_perimeter(), 6.0)
        self.assertTrue(rect.contains(complex(1, 0.5)))
        self.assertFalse(rect.contains(3))
        self.assertAlmostEqual(rect.distance(complex(1, 0.5)), 0.5)

    def test_orientation(self) -> None:
        clockwise = Polygon([0, 1j, complex(1, 1), 1])
        self.assertAlmostEqual(clockwise.get_area(), 1.0)

    def test_hole(self) -> None:
        square = Polygon(
            [0, 4, complex(4, 4), 4j],
            holes=[[complex(1, 1), complex(2, 1), complex(2, 2), complex(1, 2)]],
        )
        self.assertAlmostEqual(square.get_area(), 15.0)
        self.assertFalse(square.contains(complex(1.5, 1.5)))
        self.assertTrue(square.contains(complex(3, 3)))
        self.assertEqual(list(square.ring_of), [0, 0, 0, 0, 1, 1, 1, 1])

    def test_ray_hits(self) -> None:
        rect = Polygon.rectangle(0, 2, 0, 1)
        s, seg = rect.ray_hits(np.array([complex(1, 0.5)]), np.array([2 + 0j]))
        self.assertAlmostEqual(s[0], 0.5)
        self.assertEqual(seg[0], 1)
        s, seg = rect.ray_hits(np.array([complex(1, 0.5)]), np.array([0.1 + 0j]))
        self.assertEqual(s[0], np.inf)
        self.assertEqual(seg[0], -1)

    def test_annular_sector(self) -> None:
        sector = Polygon.annular_sector(1, 2, 0, math.pi / 2, samples=16)
        self.assertEqual(len(sector), 32)
        self.assertEqual(sector.arc_segments("ray_end"), [15])
        self.assertEqual(sector.arc_segments("inner"), list(range(16, 31)))
        self.assertTrue(sector.contains(1.5 * np.exp(1j * math.pi / 4)))
        self.assertFalse(sector.contains(-1.5))
        with self.assertRaises(InvalidParam):
            Polygon.annular_sector(2, 1, 0, 1)

    def test_arc_segments(self) -> None:
        rect = Polygon.rectangle(0, 1, 0, 1)
        self.assertEqual(rect.arc_segments("0-2,3"), [0, 1, 2, 3])
        self.assertEqual(rect.arc_segments("top,left"), [2, 3])
        self.assertEqual(rect.arc_segments([3, 1, 1]), [1, 3])

    def test_from_json(self) -> None:
        with open(INPUT_DIR + "unit_square.json") as f:
            square = Polygon.from_json(f.read())
        self.assertAlmostEqual(square.get_area(), 1.0)
        self.assertEqual(square.arc_segments("bottom"), [0])
        self.assertEqual(Polygon.from_dict(square.to_dict()).to_dict(), square.to_dict())

    def test_invalid(self) -> None:
        with self.assertRaises(InvalidParam):
            Polygon([0, 1])
        with self.assertRaises(InvalidParam):
            Polygon([0, 1, 1j], arcs={"a": [5]})
        with self.assertRaises(InvalidParam):
            Polygon.from_dict({"holes": []})

    def test_interior_sample(self) -> None:
        rect = Polygon.rectangle(0, 2, 0, 1)
        points = rect.interior_sample(100, np.random.default_rng(1))
        self.assertEqual(len(points), 100)
        self.assertTrue(np.all(rect.contains_array(points)))


class TestHull(unittest.TestCase):
    def test_convex_hull(self) -> None:
        hull = convex_hull([0, 1, complex(1, 1), 1j, complex(0.5, 0.5)])
        self.assertEqual(len(hull), 4)
        self.assertNotIn(complex(0.5, 0.5), list(hull))

    def test_random_convex(self) -> None:
        polygon = random_convex_polygon(np.random.default_rng(7))
        self.assertGreater(polygon.get_area(), 0)
        self.assertLessEqual(polygon.get_diameter(), 2.0)


if __name__ == "__main__":
    unittest.main()
