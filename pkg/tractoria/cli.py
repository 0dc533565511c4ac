#!/usr/bin/env python

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np

from tractoria import config
from tractoria.complexfn import Example1, Example2, FunctionSpec, check_expansion_estimate
from tractoria.covering import Region, image_annulus_certificate, image_grid_hits
from tractoria.errors import (
    BudgetExceeded,
    ChainBroken,
    ConditionNeverMet,
    InvalidParam,
    IOFailure,
    KNotAboveOne,
    NotExpanding,
    PreconditionFails,
    TractoriaError,
)
from tractoria.metrics import batch_generator, harmonic_measure_grid, harmonic_measure_wos, mcover_sweep
from tractoria.orbit import (
    OrbitWitness,
    SlowTarget,
    bounded_witness,
    build_chain_bgrhm,
    build_chain_theorem1,
    build_chain_theorem2,
    build_schedule,
    classify_escape,
    forward_orbit,
    two_sided_witness,
    witness_for_schedule,
)
from tractoria.tract import Window, check_MD_convexity, locate_tract, log_spaced_radii, trace_level_set
from tractoria.utils import Overlay, View, read_json, write_json

logger = logging.getLogger("tractoria")

# 前提や不等式の不成立は「反証」として扱う
REFUTING_ERRORS = (PreconditionFails, ChainBroken, ConditionNeverMet, BudgetExceeded, NotExpanding, KNotAboveOne)


@dataclass
class RunConfig:
    """一回の実行の設定（レポートにそのまま書き出す）"""

    command: str
    fn: Dict[str, Any]
    window: Optional[List[float]] = None
    resolution: int = 512
    precision: int = config.DEFAULT_PRECISION
    seed: int = 0
    out: str = config.OUT_REPORT
    threads: int = 0
    options: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _floats(text: str, count: Optional[int] = None) -> List[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise InvalidParam("expected comma separated numbers", {"value": text})
    if count is not None and len(values) != count:
        raise InvalidParam("expected {} numbers".format(count), {"value": text})
    return values


def _point(text: str) -> complex:
    x, y = _floats(text, 2)
    return complex(x, y)


def load_fn(text: str) -> FunctionSpec:
    """カタログ id、JSON 文字列、JSON ファイルのいずれか"""
    if os.path.isfile(text):
        return FunctionSpec.from_dict(read_json(text))
    return FunctionSpec.from_json(text)


def load_region(args: argparse.Namespace) -> Region:
    if args.region:
        return Region.from_dict(read_json(args.region))
    if args.rect:
        return Region.rectangle(*_floats(args.rect, 4))
    if args.disk:
        return Region.disk(args.disk)
    raise InvalidParam("one of --region, --rect, --disk is required")


def _window(args: argparse.Namespace) -> Optional[Window]:
    return Window.from_list(_floats(args.window, 4)) if args.window else None


def _tract(fn: FunctionSpec, args: argparse.Namespace, window: Optional[Window] = None) -> Any:
    return locate_tract(fn, _point(args.point), window=window or _window(args))


# ----------------------------------------------------------------------
# サブコマンド（戻り値は (結果, 終了コード)）
# ----------------------------------------------------------------------


def run_plot_tract(fn: FunctionSpec, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
    window = _window(args) or Window.square(8.0)
    base = os.path.splitext(args.out)[0]
    view = View(fn, window, args.res, args.level)
    view.save(base + ".pgm")
    if args.png:
        view.save(base + ".png")
    overlay = Overlay(window, view.width, view.height)
    overlay.add_image(os.path.basename(base + (".png" if args.png else ".pgm")))
    curves = trace_level_set(fn, view.level, window)
    for curve in curves:
        overlay.add_polyline(curve.get_vertices(), curve.is_closed())
    for text in args.annulus or []:
        overlay.add_annulus(*_floats(text, 2))
    if args.witness:
        witness = OrbitWitness.from_dict(read_json(args.witness))
        for region in witness.regions:
            overlay.add_polygon(region.polygon)
        overlay.add_points(witness.orbit.positions)
    overlay.save(base + ".svg")
    result: Dict[str, Any] = {
        "pgm": base + ".pgm",
        "svg": base + ".svg",
        "width": view.width,
        "height": view.height,
        "white_fraction": view.get_white_fraction(),
        "curves": len(curves),
    }
    if args.check_doubled:
        result["doubled_agreement"] = view.agreement(view.doubled())
    return result, config.EXIT_OK


def run_trace(fn: FunctionSpec, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
    tract = _tract(fn, args)
    result = tract.to_dict()
    result["max_level_error"] = tract.max_level_error()
    return result, config.EXIT_OK


def run_verify_expansion(fn: FunctionSpec, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
    tract = _tract(fn, args)
    window = tract.get_window()
    rng = batch_generator(args.seed, 0)
    samples: List[np.ndarray] = []
    total = 0
    for _ in range(1000):
        Z = rng.uniform(window.x0, window.x1, args.samples) + 1j * rng.uniform(window.y0, window.y1, args.samples)
        Z = Z[tract.contains_array(Z)]
        samples.append(Z)
        total += len(Z)
        if total >= args.samples:
            break
    Z = np.concatenate(samples)[: args.samples]
    report = check_expansion_estimate(fn, tract, Z, min(args.precision, config.MIN_PRECISION))
    result = report.to_dict(with_rows=args.rows)
    return result, config.EXIT_OK if report.passed() else config.EXIT_REFUTED


def run_verify_convexity(fn: FunctionSpec, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
    r0, r1, count = _floats(args.radii, 3)
    window = _window(args) or Window.square(1.05 * r1 ** args.c)
    tract = _tract(fn, args, window)
    rows = [check_MD_convexity(fn, tract, r, args.c).to_dict() for r in log_spaced_radii(r0, r1, int(count))]
    passed = all(row["passed"] for row in rows)
    return {"c": args.c, "rows": rows, "passed": passed}, config.EXIT_OK if passed else config.EXIT_REFUTED


def run_cover(fn: FunctionSpec, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
    region = load_region(args)
    r0, r1 = _floats(args.annulus[0] if args.annulus else "", 2)
    radii, angles = (int(v) for v in _floats(args.probes, 2))
    certificate = image_annulus_certificate(
        fn, region, (math.log(r0), math.log(r1)), (radii, angles), max(config.MIN_PRECISION, args.precision)
    )
    code = {
        "certified": config.EXIT_OK,
        "refuted": config.EXIT_REFUTED,
        "inconclusive": config.EXIT_INCONCLUSIVE,
    }[certificate.status]
    result = certificate.to_dict()
    if args.grid:
        best, spacing = image_grid_hits(fn, region, (math.log(r0), math.log(r1)), (radii, angles), args.grid)
        result["grid_spacing"] = spacing
        result["grid_hits"] = bool(np.all(best <= spacing))
    return result, code


def run_harmonic(fn: FunctionSpec, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
    region = load_region(args)
    z = _point(args.z)
    estimate = harmonic_measure_wos(region.polygon, z, args.arc, args.walks, args.seed)
    result = estimate.to_dict()
    if args.grid:
        omega = harmonic_measure_grid(region.polygon, z, args.arc, args.grid)
        result["grid_omega"] = omega
        result["agrees"] = bool(abs(omega - estimate.omega) <= estimate.ci95 + 2.0 / args.grid)
    return result, config.EXIT_OK


def run_slow_orbit(fn: FunctionSpec, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
    probes = tuple(int(v) for v in _floats(args.probes, 2))
    a = SlowTarget.from_expr(args.target, args.K)
    blocks = args.blocks
    if args.mode == "bgrhm":
        # e^{z^2} cos z の四辺形の鎖（--fn は使わない）
        chain = build_chain_bgrhm(args.n_start, blocks, args.eps, args.walks, args.seed, probes)
        statuses = [link.certificate.status for link in chain.links if link.certificate is not None]
        if all(s == "certified" for s in statuses):
            code = config.EXIT_OK
        elif "refuted" in statuses:
            code = config.EXIT_REFUTED
        else:
            code = config.EXIT_INCONCLUSIVE
        return {"target": a.to_dict(), "chain": chain.to_dict(), "statuses": statuses}, code
    if args.mode.startswith("theorem2"):
        reach = max(a(args.search + blocks + 1), 1.0) * args.C * 1.1
    else:
        reach = args.r0 * 2 ** (blocks + 2) * 1.05
    tract = _tract(fn, args, _window(args) or Window.square(reach))
    result: Dict[str, Any] = {"target": a.to_dict(), "tract": tract.get_label()}
    if args.mode in ("theorem1-demo", "theorem1-lemma", "bounded"):
        lemma = args.mode == "theorem1-lemma"
        chain = build_chain_theorem1(fn, tract, args.r0, blocks + 1, "lemma" if lemma else "demo", probes)
        result["chain"] = chain.to_dict()
        if lemma:
            return result, config.EXIT_OK
        if args.mode == "bounded":
            m, n = (int(v) for v in _floats(args.block, 2))
            witness = bounded_witness(fn, chain, list(range(m, n + 1)), args.depth, args.precision)
        else:
            schedule = build_schedule(a, chain.get_sigma_maxmod(), blocks)
            result["schedule"] = schedule.to_dict()
            result["holdup"] = [schedule.holdup_check(a, j) for j in range(schedule.threshold, schedule.blocks() + 1)]
            depth = min(args.depth, schedule.length() - 1)
            witness = witness_for_schedule(fn, chain, schedule, a, depth, args.precision)
    else:
        lemma = args.mode == "theorem2-lemma"
        chain = build_chain_theorem2(
            fn, tract, a, args.C, args.c, blocks + 1, "lemma" if lemma else "demo", args.shrinking, args.search, probes
        )
        result["chain"] = chain.to_dict()
        if lemma:
            return result, config.EXIT_OK
        witness = two_sided_witness(fn, chain, a, args.precision)
    verification = witness.verify()
    result["witness"] = witness.to_dict()
    result["verification"] = verification
    if args.witness_out:
        write_json(witness.to_dict(), args.witness_out)
    return result, config.EXIT_OK if verification["verified"] else config.EXIT_REFUTED


def run_classify(fn: FunctionSpec, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
    if args.witness:
        witness = OrbitWitness.from_dict(read_json(args.witness))
        fn = witness.fn
        orbit: Any = witness
        depth = witness.get_depth()
    else:
        orbit = forward_orbit(fn, _point(args.zeta), args.depth, args.precision)
        depth = args.depth
    window = _window(args) or Window.square(max(8.0, 4 * args.rho))
    tract = _tract(fn, args, window)
    classification = classify_escape(fn, tract, orbit, args.rho, args.L_max)
    result = classification.to_dict()
    result["depth"] = depth
    return result, config.EXIT_OK


def run_examples(fn: FunctionSpec, args: argparse.Namespace) -> Tuple[Dict[str, Any], int]:
    result: Dict[str, Any] = {}
    passed = True
    if args.which in ("1", "all"):
        ns = range(2, max(3, args.n_max) + 1)
        # 小さい n では A_{j,n} (j != 0) の評価が成り立たない行がある（記録のみ）
        spines = [Example1.check_spines(n, sorted({0, 1, 2 ** n - 1})) for n in ns]
        growth = [Example1.check_argument_growth(n, sum(Example1.radii(n)) / 2) for n in ns if n >= 3]
        result["example1"] = {"spines": spines, "argument_growth": growth}
        passed &= all(row["monotone"] and row["relative_error"] < 1e-6 for row in growth)
    if args.which in ("2", "all"):
        z_rows = Example2.check_z_points(args.n_max, args.precision)
        critical = [Example2.critical_value(n, args.precision) for n in range(1, args.n_max + 1)]
        chain = build_chain_bgrhm(
            1, args.depth, args.eps, args.walks, args.seed, tuple(int(v) for v in _floats(args.probes, 2))
        )
        result["example2"] = {
            "z_points": z_rows,
            "critical_values": critical,
            "chain": chain.to_dict(),
            "sweep": mcover_sweep(args.eps, [float(u) for u in np.geomspace(100, 1e6, 13)]),
        }
        passed &= all(row["passed"] for row in z_rows)
    return result, config.EXIT_OK if passed else config.EXIT_REFUTED


RUNNERS: Dict[str, Callable[[FunctionSpec, argparse.Namespace], Tuple[Dict[str, Any], int]]] = {
    "plot-tract": run_plot_tract,
    "trace": run_trace,
    "verify-expansion": run_verify_expansion,
    "verify-convexity": run_verify_convexity,
    "cover": run_cover,
    "harmonic": run_harmonic,
    "slow-orbit": run_slow_orbit,
    "classify": run_classify,
    "examples": run_examples,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    common.add_argument("--fn", default="EXP", help="catalog id, JSON object or JSON file")
    common.add_argument("--window", help="x0,x1,y0,y1")
    common.add_argument("--res", type=int, default=512, help="pixels along the longer side")
    common.add_argument("--precision", type=int, default=config.DEFAULT_PRECISION, help="bits")
    common.add_argument("--seed", type=int, default=0, help="random seed")
    common.add_argument("--out", default=config.OUT_REPORT, help="JSON report path")
    common.add_argument("--threads", type=int, default=0, help="worker threads (0: {} or CPU count)".format(
        config.THREADS_ENV))
    common.add_argument("--point", default="2,0", help="a point of the tract: x,y")
    common.add_argument("--depth", type=int, default=12, help="orbit depth")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(
        prog="tractoria",
        description="Tracts, covering certificates and slow escaping orbits of entire functions.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    p = sub.add_parser("plot-tract", parents=[common], formatter_class=fmt, help="PGM/SVG picture of |f| > R")
    p.add_argument("--level", type=float, help="R (default: the function's boundary level)")
    p.add_argument("--annulus", action="append", help="r0,r1 overlay (repeatable)")
    p.add_argument("--witness", help="witness JSON to overlay")
    p.add_argument("--png", action="store_true", help="also write a PNG preview")
    p.add_argument("--check-doubled", action="store_true", help="compare with the doubled resolution")

    sub.add_parser("trace", parents=[common], formatter_class=fmt, help="trace the tract containing --point")

    p = sub.add_parser("verify-expansion", parents=[common], formatter_class=fmt, help="expansion estimate sweep")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--rows", action="store_true", help="write every sample")

    p = sub.add_parser("verify-convexity", parents=[common], formatter_class=fmt, help="log M_D(r^c) >= c log M_D(r)")
    p.add_argument("--radii", default="2,8,8", help="r0,r1,count")
    p.add_argument("--c", type=float, default=2.0)

    for name, text in (("cover", "covering certificate"), ("harmonic", "harmonic measure")):
        p = sub.add_parser(name, parents=[common], formatter_class=fmt, help=text)
        p.add_argument("--region", help="region JSON")
        p.add_argument("--rect", help="x0,x1,y0,y1")
        p.add_argument("--disk", type=float, help="radius")
        if name == "cover":
            p.add_argument("--annulus", action="append", help="r0,r1")
            p.add_argument("--probes", default="{},{}".format(config.PROBE_RADII, config.PROBE_ANGLES))
            p.add_argument("--grid", type=int, default=0, help="image of a grid of this many nodes as a cross-check")
        else:
            p.add_argument("--z", required=True, help="x,y")
            p.add_argument("--arc", required=True, help="arc name or segment ids (a-b,c)")
            p.add_argument("--walks", type=int, default=config.WOS_WALKS)
            p.add_argument("--grid", type=int, default=0, help="grid Laplace check with this many nodes")

    p = sub.add_parser("slow-orbit", parents=[common], formatter_class=fmt, help="slow escaping orbit witness")
    p.add_argument(
        "--mode",
        default="theorem1-demo",
        choices=["theorem1-demo", "theorem1-lemma", "theorem2-demo", "theorem2-lemma", "bounded", "bgrhm"],
    )
    p.add_argument("--target", default="10*sqrt(n+1)", help="a_n as an expression in n")
    p.add_argument("--K", type=float, default=1.0, help="growth cap a_{n+1} <= K M_D(a_n)")
    p.add_argument("--r0", type=float, default=5.0)
    p.add_argument("--blocks", type=int, default=4)
    p.add_argument("--block", default="1,1", help="m,n for bounded mode")
    p.add_argument("--C", type=float, default=4.0)
    p.add_argument("--c", type=float, default=2.0)
    p.add_argument("--shrinking", action="store_true")
    p.add_argument("--search", type=int, default=64)
    p.add_argument("--n-start", dest="n_start", type=int, default=1, help="first quadrilateral for bgrhm mode")
    p.add_argument("--eps", type=float, default=1.5, help="eps_geom for bgrhm mode")
    p.add_argument("--walks", type=int, default=0, help="walk-on-spheres walks per quadrilateral in bgrhm mode")
    p.add_argument("--probes", default="16,32")
    p.add_argument("--witness-out", help="also write the witness alone")

    p = sub.add_parser("classify", parents=[common], formatter_class=fmt, help="fast or slow escape")
    p.add_argument("--witness", help="witness JSON")
    p.add_argument("--zeta", default="3,0", help="x,y when no witness is given")
    p.add_argument("--rho", type=float, default=2.0)
    p.add_argument("--L-max", dest="L_max", type=int)

    p = sub.add_parser("examples", parents=[common], formatter_class=fmt, help="checks of the two examples")
    p.add_argument("--which", default="all", choices=["1", "2", "all"])
    p.add_argument("--n-max", dest="n_max", type=int, default=4)
    p.add_argument("--eps", type=float, default=1.5)
    p.add_argument("--walks", type=int, default=0)
    p.add_argument("--probes", default="8,16")
    return parser


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(asctime)s [%(levelname)s] %(name)s: %(message)s", stream=sys.stderr)


def _options(args: argparse.Namespace) -> Dict[str, Any]:
    common = {"command", "fn", "window", "res", "precision", "seed", "out", "threads", "verbose", "quiet"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in common}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return config.EXIT_OK if e.code == 0 else config.EXIT_USAGE
    _configure_logging(args)
    if args.threads > 0:
        os.environ[config.THREADS_ENV] = str(args.threads)

    report: Dict[str, Any] = {}
    try:
        fn = load_fn(args.fn)
        run = RunConfig(
            args.command,
            fn.to_dict(),
            _floats(args.window, 4) if args.window else None,
            args.res,
            args.precision,
            args.seed,
            args.out,
            args.threads,
            _options(args),
        )
        report["config"] = run.to_dict()
        result, code = RUNNERS[args.command](fn, args)
        report["result"] = result
    except IOFailure as e:
        logger.error("%s %s", e, e.details)
        report["error"] = e.to_dict()
        code = config.EXIT_IO
    except InvalidParam as e:
        logger.error("%s %s", e, e.details)
        report["error"] = e.to_dict()
        code = config.EXIT_USAGE
    except REFUTING_ERRORS as e:
        logger.error("%s %s", e, e.details)
        report["error"] = e.to_dict()
        code = config.EXIT_REFUTED
    except TractoriaError as e:
        logger.error("%s %s", e, e.details)
        report["error"] = e.to_dict()
        code = config.EXIT_ERROR
    report["exit_code"] = code
    try:
        write_json(report, args.out)
    except IOFailure as e:
        logger.error("%s %s", e, e.details)
        return config.EXIT_IO
    return code


if __name__ == "__main__":
    sys.exit(main())
