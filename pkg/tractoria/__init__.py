#!/usr/bin/env python

from tractoria import config as config  # noqa: F401

from tractoria.complexfn import Example1 as Example1  # noqa: F401
from tractoria.complexfn import Example2 as Example2  # noqa: F401
from tractoria.complexfn import FunctionSpec as FunctionSpec  # noqa: F401
from tractoria.complexfn import LogValue as LogValue  # noqa: F401

from tractoria.tract import LevelCurve as LevelCurve  # noqa: F401
from tractoria.tract import TractRegion as TractRegion  # noqa: F401
from tractoria.tract import Window as Window  # noqa: F401

from tractoria.geometry import Polygon as Polygon  # noqa: F401

from tractoria.metrics import CoverThresholds as CoverThresholds  # noqa: F401
from tractoria.metrics import HarmonicEstimate as HarmonicEstimate  # noqa: F401

from tractoria.covering import CoverCertificate as CoverCertificate  # noqa: F401
from tractoria.covering import CoverPrediction as CoverPrediction  # noqa: F401
from tractoria.covering import Region as Region  # noqa: F401

from tractoria.orbit import BlockSchedule as BlockSchedule  # noqa: F401
from tractoria.orbit import OrbitWitness as OrbitWitness  # noqa: F401
from tractoria.orbit import SigmaChain as SigmaChain  # noqa: F401
from tractoria.orbit import SlowTarget as SlowTarget  # noqa: F401

from tractoria.utils import Overlay as Overlay  # noqa: F401
from tractoria.utils import RateExpr as RateExpr  # noqa: F401
from tractoria.utils import View as View  # noqa: F401
