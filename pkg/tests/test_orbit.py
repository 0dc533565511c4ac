#!/usr/bin/env python

import json
import math
import unittest

import numpy as np

from tractoria import BlockSchedule, Example2, FunctionSpec, OrbitWitness, SlowTarget, Window
from tractoria.errors import ConditionNeverMet, InvalidParam, PreconditionFails
from tractoria.orbit import (
    build_chain_bgrhm,
    build_chain_theorem1,
    build_chain_theorem2,
    build_schedule,
    bounded_witness,
    classify_escape,
    forward_orbit,
    pullback_orbit,
    two_sided_witness,
    witness_for_schedule,
)
from tractoria.tract import locate_tract
from tractoria.utils import dumps

PROBES = (8, 16)


class TestSlowTarget(unittest.TestCase):
    def test_expr(self) -> None:
        a = SlowTarget.from_expr("10*sqrt(n+1)")
        self.assertAlmostEqual(a(3), 20.0)
        self.assertEqual(a.first_index_at_least(30), 8)
        self.assertEqual(a.first_index_at_least(5, start=4), 4)
        self.assertEqual(a.values(np.arange(3)).shape, (3,))
        a.check(10)
        self.assertEqual(a.to_dict(), {"a": "10*sqrt(n+1)", "growth_cap": None})

    def test_check(self) -> None:
        SlowTarget.from_expr("sqrt(n)").check(5)
        with self.assertRaises(InvalidParam):
            SlowTarget.from_expr("n - 1").check(5)
        with self.assertRaises(InvalidParam):
            SlowTarget.from_expr("10 - n").check(5)
        with self.assertRaises(InvalidParam):
            SlowTarget.from_expr("3").check(5)
        with self.assertRaises(InvalidParam):
            SlowTarget(lambda n: n + 1, growth_cap=0)


class TestSchedule(unittest.TestCase):
    def setUp(self) -> None:
        self.a = SlowTarget.from_expr("n+1")
        self.sigma = [2.0, 4.0, 8.0, 16.0, 32.0]

    def test_build(self) -> None:
        schedule = build_schedule(self.a, self.sigma, 2)
        self.assertEqual(schedule.N, [1, 3, 7])
        self.assertEqual(schedule.q, [0, 6, 1])
        self.assertEqual(schedule.Q, [0, 6, 7])
        self.assertEqual(schedule.length(), 9)
        self.assertEqual(schedule.set_indices(np.arange(9)).tolist(), [0, 1, 1, 1, 1, 1, 1, 1, 2])
        self.assertEqual(schedule.set_index(8), 2)
        self.assertEqual(schedule.threshold, 2)
        self.assertEqual(schedule.guaranteed_start(), 7)
        self.assertEqual(schedule.links(), [(0, 1), (1, 1), (1, 2), (2, 2)])
        with self.assertRaises(InvalidParam):
            schedule.set_index(9)

    def test_holdup(self) -> None:
        schedule = build_schedule(self.a, self.sigma, 2)
        self.assertTrue(schedule.holdup_check(self.a, 2)["passed"])
        self.assertFalse(schedule.holdup_check(self.a, 1)["passed"])
        with self.assertRaises(InvalidParam):
            schedule.holdup_check(self.a, 3)

    def test_truncated(self) -> None:
        schedule = build_schedule(self.a, self.sigma, 2, cap=3)
        self.assertEqual(schedule.q, [0, 3])
        self.assertEqual(schedule.length(), 4)
        self.assertEqual(schedule.truncated["error"], "UnboundedRepeat")
        self.assertEqual(schedule.to_dict(expand=True)["E"], [0, 1, 1, 1])

    def test_sqrt_schedule(self) -> None:
        a = SlowTarget.from_expr("sqrt(n)")
        sigma = [2.0 ** (n + 2) for n in range(9)]
        schedule = build_schedule(a, sigma, 8)
        self.assertIsNone(schedule.truncated)
        N = [2 ** (2 * j + 4) for j in range(9)]
        self.assertEqual(schedule.N, N)
        q, Q = [0], [0]
        for j in range(1, 9):
            q.append(max(1, N[j + 1] - j - Q[-1]) if j < 8 else 1)
            Q.append(Q[-1] + q[-1])
        self.assertEqual(schedule.q, q)
        self.assertEqual(schedule.Q, Q)
        self.assertTrue(all(p == 1 for p in schedule.p))
        self.assertTrue(all(Q[j] > Q[j - 1] for j in range(1, 9)))
        self.assertTrue(all(max(sigma[: j + 1]) <= a(N[j]) for j in range(9)))
        self.assertEqual(schedule.threshold, 2)
        self.assertTrue(all(schedule.n[j - 1] + Q[j - 1] >= N[j] for j in range(2, 9)))
        self.assertLess(schedule.n[0] + Q[0], N[1])
        for j in range(2, 9):
            self.assertTrue(schedule.holdup_check(a, j)["passed"])

    def test_identity(self) -> None:
        schedule = BlockSchedule.identity_schedule(4, self.sigma)
        self.assertEqual(schedule.length(), 4)
        self.assertEqual(schedule.set_indices([0, 3]).tolist(), [0, 3])
        self.assertEqual(schedule.links(), [(0, 1), (1, 2), (2, 3)])
        self.assertEqual(schedule.guaranteed_start(), 0)

    def test_invalid(self) -> None:
        with self.assertRaises(InvalidParam):
            build_schedule(self.a, self.sigma, 2, n_seq=[0, 2, 1])
        with self.assertRaises(InvalidParam):
            build_schedule(self.a, [2.0, math.inf, 8.0], 2)


class TestForwardOrbit(unittest.TestCase):
    def setUp(self) -> None:
        self.exp = FunctionSpec("EXP")
        self.tract = locate_tract(self.exp, 2, window=Window.square(8))

    def test_forward(self) -> None:
        orbit = forward_orbit(self.exp, 3, 3)
        self.assertEqual(len(orbit), 4)
        self.assertAlmostEqual(orbit.logmods[1], 3.0)
        self.assertAlmostEqual(orbit.logmods[2], math.exp(3), places=9)
        self.assertAlmostEqual(orbit.logmods[3] / math.exp(math.exp(3)), 1.0, places=9)

    def test_fast(self) -> None:
        orbit = forward_orbit(self.exp, 3, 3)
        result = classify_escape(self.exp, self.tract, orbit, 2)
        self.assertEqual(result.label, "fast-consistent")
        self.assertTrue(result.rows[0]["passed"])

    def test_slow(self) -> None:
        result = classify_escape(self.exp, self.tract, [0.5, 0.6, 0.7, 0.8], 2)
        self.assertEqual(result.label, "slow")
        self.assertEqual(len(result.rows), 2)


class TestChains(unittest.TestCase):
    @classmethod
    def setUpClass(cls) -> None:
        cls.exp = FunctionSpec("EXP")
        cls.tract = locate_tract(cls.exp, 2, window=Window.square(168))
        cls.chain = build_chain_theorem1(cls.exp, cls.tract, 5, 3, probes=PROBES)

    def test_theorem1_demo(self) -> None:
        self.assertEqual(len(self.chain), 3)
        self.assertEqual(self.chain.mode, "theorem1-demo")
        self.assertTrue(all(link.is_certified() for link in self.chain.links))
        maxmod = self.chain.get_sigma_maxmod()
        for k, s in enumerate(maxmod):
            self.assertAlmostEqual(s, 10 * 2 ** k, delta=0.1 * 2 ** k)

    def test_theorem1_lemma(self) -> None:
        with self.assertRaises(PreconditionFails):
            build_chain_theorem1(self.exp, self.tract, 5, 2, mode="lemma")
        chain = build_chain_theorem1(self.exp, self.tract, math.exp(160), 2, mode="lemma")
        self.assertTrue(all(link.is_certified() for link in chain.links))
        with self.assertRaises(InvalidParam):
            chain.get_regions()

    def test_schedule_witness(self) -> None:
        a = SlowTarget.from_expr("6*(n+1)")
        schedule = build_schedule(a, self.chain.get_sigma_maxmod(), 2)
        self.assertEqual(schedule.set_indices(np.arange(8)).tolist(), [0, 1, 1, 1, 1, 1, 1, 2])
        witness = witness_for_schedule(self.exp, self.chain, schedule, a, 7, precision=128)
        report = witness.verify()
        self.assertTrue(report["verified"])
        self.assertTrue(all(witness.memberships))
        self.assertLessEqual(witness.N_start, schedule.guaranteed_start())
        self.assertEqual(classify_escape(self.exp, self.tract, witness, 2).label, "slow")

    def test_log_target_witness(self) -> None:
        a = SlowTarget.from_expr("10 + 2*log(1+n)")
        schedule = build_schedule(a, self.chain.get_sigma_maxmod(), 2, cap=10 ** 7)
        self.assertIsNone(schedule.truncated)
        self.assertEqual(schedule.threshold, 2)
        self.assertEqual(schedule.guaranteed_start(), schedule.N[2])
        self.assertEqual(schedule.set_indices(np.arange(13)).tolist(), [0] + [1] * 12)
        witness = witness_for_schedule(self.exp, self.chain, schedule, a, 12, precision=128)
        self.assertTrue(witness.verify()["verified"])
        self.assertTrue(all(witness.memberships))
        self.assertTrue(all(witness.bound_checks[witness.N_start:]))
        self.assertLessEqual(witness.N_start, schedule.guaranteed_start())
        for z in witness.orbit.positions:
            self.assertTrue(self.tract.contains(complex(z)))

        replay = OrbitWitness.from_dict(json.loads(dumps(witness.to_dict())))
        self.assertEqual(replay.zeta, witness.zeta)
        self.assertEqual(replay.bound_checks, witness.bound_checks)

        classification = classify_escape(self.exp, self.tract, witness, 2)
        self.assertEqual(classification.label, "slow")
        self.assertEqual(len(classification.rows), 7)
        self.assertTrue(all(row["min_margin"] < 0 for row in classification.rows))

    def test_bounded_witness(self) -> None:
        witness = bounded_witness(self.exp, self.chain, [1], 3, precision=128)
        self.assertEqual(witness.set_ids, [1, 1, 1, 1])
        self.assertTrue(all(witness.bound_checks))
        self.assertEqual(witness.N_start, 0)

    def test_replay(self) -> None:
        regions = self.chain.get_regions()
        witness = pullback_orbit(self.exp, regions, [0, 1, 2], precision=128)
        data = json.loads(dumps(witness.to_dict()))
        replay = OrbitWitness.from_dict(data)
        self.assertEqual(replay.zeta, witness.zeta)
        self.assertEqual(replay.memberships, witness.memberships)
        self.assertTrue(replay.verify()["verified"])
        with self.assertRaises(InvalidParam):
            OrbitWitness.from_dict({"precision": 128})

    def test_theorem2_demo(self) -> None:
        a = SlowTarget.from_expr("10*sqrt(n+1)", growth_cap=1.0)
        chain = build_chain_theorem2(self.exp, self.tract, a, 4, 2, 2, search=8, probes=PROBES)
        self.assertEqual(chain.start, 0)
        self.assertEqual(len(chain), 2)
        witness = two_sided_witness(self.exp, chain, a, precision=128)
        self.assertTrue(witness.verify()["verified"])
        self.assertTrue(all(witness.bound_checks))

    def test_theorem2_never(self) -> None:
        a = SlowTarget.from_expr("10*sqrt(n+1)", growth_cap=1e300)
        with self.assertRaises(ConditionNeverMet):
            build_chain_theorem2(self.exp, self.tract, a, 4, 2, 2, search=8, probes=PROBES)
        with self.assertRaises(InvalidParam):
            build_chain_theorem2(self.exp, self.tract, a, 2, 4, 2)


class TestQuadrilateralChain(unittest.TestCase):
    def test_first_quadrilateral(self) -> None:
        chain = build_chain_bgrhm(1, 1, walks=2000, seed=4, certify=False)
        self.assertEqual(chain.mode, "bgrhm")
        self.assertEqual(chain.fn, FunctionSpec("EXPZ2COS"))
        link = chain.links[0]
        self.assertEqual(link.index, 1)
        self.assertTrue(link.region.contains(Example2.z_point(1)))
        self.assertIsNotNone(link.harmonic)
        self.assertGreaterEqual(link.harmonic.get_omega(), 0.05)
        self.assertEqual(len(chain.conditions["contains_next"]), 1)

    @unittest.skip("needs long time")
    def test_harmonic_lower_bound(self) -> None:
        chain = build_chain_bgrhm(1, 8, walks=20000, seed=4, certify=False)
        self.assertEqual([link.index for link in chain.links], list(range(1, 9)))
        for link in chain.links:
            self.assertGreaterEqual(link.harmonic.get_omega(), 0.05)


if __name__ == "__main__":
    unittest.main()
