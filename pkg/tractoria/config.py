#!/usr/bin/env python

import os

# 多倍長精度 (bit)
DEFAULT_PRECISION = 256
MIN_PRECISION = 53
PRECISION_CAP = 4096
EVAL_MAG_LIMIT = 2 ** 20  # |f| がこれ以上の bit 数なら eval_log を使う
LOG_SCALE_CAP = 1e15  # これを超える log スケール値は +inf 扱い

# 等高線
TOL_LEVEL = 1e-10
NEWTON_LEVEL_STEPS = 50
DEFAULT_GRID_NODES = 256
MAX_GRID_NODES = 4097

# 最大絶対値
ARC_SAMPLES = 4096

# 調和測度 (walk-on-spheres)
WOS_WALKS = 100000
WOS_STOP = 1e-6
WOS_BATCH = 4096
WOS_MAX_STEPS = 10000
LAPLACE_GRID = 200

# 被覆証明
PROBE_RADII = 32
PROBE_ANGLES = 64
LOG_STEP = 0.25
BOUNDARY_SAMPLES = 512
MAX_BOUNDARY_SAMPLES = 2 ** 18
REFINE_ROUNDS = 24
PATH_DETOURS = 8
PATH_SAMPLES = 512

# 軌道
PULLBACK_NEWTON_STEPS = 200
PULLBACK_STARTS = 8
REPEAT_CAP = 10 ** 6
MD_GRID_POINTS = 16

# 出力
OUT_REPORT = "report.json"
EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_REFUTED = 3
EXIT_INCONCLUSIVE = 4
EXIT_IO = 5

THREADS_ENV = "TRACTORIA_THREADS"


def get_threads() -> int:
    """環境変数 TRACTORIA_THREADS で並列数を制限（未設定なら CPU 数）"""
    value = os.environ.get(THREADS_ENV)
    if value:
        try:
            return max(1, int(value))
        except ValueError:
            pass
    return os.cpu_count() or 1
