#!/usr/bin/env python

from __future__ import annotations

from typing import Any, Dict, Optional


class TractoriaError(Exception):
    """TractoriaError クラス

    ライブラリの全例外の基底クラス
    失敗した不等式の両辺などを details に持たせてレポートに残す

    Attributes:
        details (Dict[str, Any]): 例外の原因となった数値
    """

    def __init__(self, message: str = "", details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details: Dict[str, Any] = dict(details or {})

    def to_dict(self) -> Dict[str, Any]:
        return {"error": type(self).__name__, "message": str(self), "details": self.details}


# complexfn
class InvalidParam(TractoriaError):
    pass


class RangeOverflow(TractoriaError):
    pass


class NearZero(TractoriaError):
    pass


class SampleOutsideTract(TractoriaError):
    pass


# tract
class DegenerateLevel(TractoriaError):
    pass


class SeedOnBoundary(TractoriaError):
    pass


class WindowTooSmall(TractoriaError):
    pass


class CircleMissesTract(TractoriaError):
    pass


class NotExpanding(TractoriaError):
    pass


# metrics
class OutsideDisk(TractoriaError):
    pass


class AtPuncture(TractoriaError):
    pass


class KNotAboveOne(TractoriaError):
    pass


class EtaOutOfRange(TractoriaError):
    pass


class KernelAtLeastOne(TractoriaError):
    pass


class LogTooSmall(TractoriaError):
    pass


class PointNotInterior(TractoriaError):
    pass


class ArcEmpty(TractoriaError):
    pass


# covering
class BoundaryHitsProbe(TractoriaError):
    pass


class PreconditionFails(TractoriaError):
    pass


class VanishingF(TractoriaError):
    pass


class BudgetExceeded(TractoriaError):
    pass


class LevelArcMismatch(TractoriaError):
    pass


# orbit
class ChainBroken(TractoriaError):
    pass


class ConditionNeverMet(TractoriaError):
    pass


class AnnulusMissesTract(TractoriaError):
    pass


class UnboundedRepeat(TractoriaError):
    pass


class NewtonStall(TractoriaError):
    pass


class PrecisionCap(TractoriaError):
    pass


# cli
class IOFailure(TractoriaError):
    pass
