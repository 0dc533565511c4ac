#!/usr/bin/env python

import io
import os
import shutil
import unittest
from contextlib import redirect_stderr, redirect_stdout

from tractoria import config
from tractoria.cli import main
from tractoria.utils import read_json

INPUT_DIR = "./tests/input/"
TEMP_DIR = "./test_temp/"


class TestMain(unittest.TestCase):
    def setUp(self) -> None:
        os.makedirs(TEMP_DIR, exist_ok=True)
        self.out = TEMP_DIR + "report.json"

    def tearDown(self) -> None:
        shutil.rmtree(TEMP_DIR, ignore_errors=True)

    def _run(self, *argv: str) -> int:
        with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
            return main(list(argv) + ["--out", self.out, "-q"])

    def test_help(self) -> None:
        with redirect_stdout(io.StringIO()), redirect_stderr(io.StringIO()):
            self.assertEqual(main(["--help"]), config.EXIT_OK)
            self.assertEqual(main(["no-such-command"]), config.EXIT_USAGE)
            self.assertEqual(main(["trace", "--res", "many"]), config.EXIT_USAGE)

    def test_trace(self) -> None:
        code = self._run("trace", "--window=-8,8,-8,8")
        self.assertEqual(code, config.EXIT_OK)
        report = read_json(self.out)
        self.assertEqual(report["exit_code"], 0)
        self.assertEqual(report["config"]["command"], "trace")
        self.assertLess(report["result"]["max_level_error"], 1e-6)

    def test_plot_tract(self) -> None:
        self.out = TEMP_DIR + "tract.json"
        code = self._run("plot-tract", "--window=-1.3,2.1,-2,2", "--res", "64", "--annulus", "1,2")
        self.assertEqual(code, config.EXIT_OK)
        result = read_json(self.out)["result"]
        self.assertTrue(os.path.isfile(TEMP_DIR + "tract.pgm"))
        self.assertTrue(os.path.isfile(TEMP_DIR + "tract.svg"))
        self.assertEqual(result["curves"], 1)
        self.assertAlmostEqual(result["white_fraction"], 2.1 / 3.4, delta=0.05)

    def test_cover(self) -> None:
        code = self._run("cover", "--rect", "1,2,-3,3", "--annulus", "3.5,6", "--probes", "8,16")
        self.assertEqual(code, config.EXIT_OK)
        self.assertEqual(read_json(self.out)["result"]["status"], "certified")
        code = self._run("cover", "--rect", "1,2,-3,3", "--annulus", "3.5,6", "--probes", "8,16", "--grid", "64")
        self.assertEqual(code, config.EXIT_OK)
        self.assertTrue(read_json(self.out)["result"]["grid_hits"])
        code = self._run("cover", "--rect", "1,2,-3,3", "--annulus", "15,20", "--probes", "8,16")
        self.assertEqual(code, config.EXIT_REFUTED)
        self.assertEqual(read_json(self.out)["result"]["status"], "refuted")

    def test_slow_orbit_quadrilateral(self) -> None:
        code = self._run(
            "slow-orbit", "--mode", "bgrhm", "--blocks", "1", "--walks", "1000", "--seed", "3", "--probes", "8,16"
        )
        report = read_json(self.out)
        self.assertEqual(report["exit_code"], code)
        result = report["result"]
        self.assertEqual(result["chain"]["mode"], "bgrhm")
        self.assertEqual(result["chain"]["fn"]["fn"], "EXPZ2COS")
        links = result["chain"]["links"]
        self.assertEqual([link["index"] for link in links], [1])
        self.assertEqual(len(result["statuses"]), 1)
        expected = {
            "certified": config.EXIT_OK,
            "refuted": config.EXIT_REFUTED,
            "inconclusive": config.EXIT_INCONCLUSIVE,
        }[result["statuses"][0]]
        self.assertEqual(code, expected)
        self.assertEqual(links[0]["certificate"]["status"], result["statuses"][0])
        self.assertGreaterEqual(links[0]["harmonic"]["omega"], 0.05)

    def test_errors(self) -> None:
        code = self._run("cover", "--region", TEMP_DIR + "missing.json", "--annulus", "1,2")
        self.assertEqual(code, config.EXIT_IO)
        report = read_json(self.out)
        self.assertIn("error", report)
        self.assertEqual(report["exit_code"], config.EXIT_IO)
        self.assertEqual(self._run("trace", "--window", "0,1,2"), config.EXIT_USAGE)
        self.assertEqual(self._run("cover", "--annulus", "1,2"), config.EXIT_USAGE)

    def test_harmonic(self) -> None:
        argv = (
            "harmonic",
            "--region",
            INPUT_DIR + "unit_square.json",
            "--z",
            "0.5,0.5",
            "--arc",
            "bottom",
            "--walks",
            "2000",
            "--seed",
            "7",
            "--grid",
            "32",
        )
        self.assertEqual(self._run(*argv), config.EXIT_OK)
        result = read_json(self.out)["result"]
        self.assertAlmostEqual(result["omega"], 0.25, delta=0.06)
        self.assertAlmostEqual(result["grid_omega"], 0.25, places=2)

    def test_deterministic_report(self) -> None:
        argv = ("harmonic", "--region", INPUT_DIR + "unit_square.json", "--z", "0.3,0.6", "--arc", "0", "--walks", "500")
        self._run(*argv)
        with open(self.out, "rb") as f:
            first = f.read()
        self._run(*argv)
        with open(self.out, "rb") as f:
            self.assertEqual(f.read(), first)


if __name__ == "__main__":
    unittest.main()
