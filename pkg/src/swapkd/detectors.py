"""Threshold (click / no-click) detectors with dark counts, and the dark-count
vs efficiency trade-off constraint used for constraint-mode scans."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConstraintViolationError

CONSTRAINT_A = 6.1e-7
CONSTRAINT_B = 17.0


@dataclass(frozen=True)
class ThresholdDetector:
    """Unit-or-nothing detector: efficiency eta, dark-count probability p_dc per gate.

    no_click(n) = (1 - p_dc) * (1 - eta)^n for n incident photons; click is the
    complement, so click(0) = p_dc exactly.
    """

    eta: float
    p_dc: float

    def __post_init__(self):
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError(f"eta must be in [0, 1], got {self.eta!r}")
        if not (0.0 <= self.p_dc < 1.0):
            raise ValueError(f"p_dc must be in [0, 1), got {self.p_dc!r}")

    def no_click_weight(self, n) -> np.ndarray | float:
        n = np.asarray(n)
        w = (1.0 - self.p_dc) * (1.0 - self.eta) ** n
        return w if w.shape else float(w)

    def click_weight(self, n) -> np.ndarray | float:
        n = np.asarray(n)
        w = 1.0 - (1.0 - self.p_dc) * (1.0 - self.eta) ** n
        return w if w.shape else float(w)

    def weight_vector(self, click: bool, max_n: int) -> np.ndarray:
        """Outcome weights over occupations 0..max_n."""
        n = np.arange(max_n + 1)
        return self.click_weight(n) if click else self.no_click_weight(n)

    def with_extra_loss(self, transmission: float) -> "ThresholdDetector":
        return ThresholdDetector(self.eta * transmission, self.p_dc)


@dataclass(frozen=True)
class DetectorConstraint:
    """Empirical dark-count floor p_dc = a * exp(b * eta0) tying noise to efficiency."""

    a: float = CONSTRAINT_A
    b: float = CONSTRAINT_B

    def p_dc(self, eta0: float) -> float:
        if not (0.0 <= eta0 <= 1.0):
            raise ValueError(f"eta0 must be in [0, 1], got {eta0!r}")
        value = self.a * math.exp(self.b * eta0)
        if value >= 1.0:
            raise ConstraintViolationError(
                f"constraint p_dc = {value:.3e} >= 1 at eta0 = {eta0!r}"
            )
        return value


DEFAULT_CONSTRAINT = DetectorConstraint()


def constraint_pdc(eta0: float, constraint: DetectorConstraint = DEFAULT_CONSTRAINT) -> float:
    """Dark-count probability implied by the detector constraint at intrinsic efficiency eta0."""
    return constraint.p_dc(eta0)


def pattern_weight(
    detectors: Sequence[ThresholdDetector],
    clicks: Sequence[bool],
    occupation: Sequence[int],
) -> float:
    """Joint weight for one click/no-click pattern across independent detectors."""
    if not (len(detectors) == len(clicks) == len(occupation)):
        raise ValueError("detectors, clicks and occupation must have equal length")
    w = 1.0
    for det, q, n in zip(detectors, clicks, occupation):
        w *= det.click_weight(n) if q else det.no_click_weight(n)
    return float(w)


def pattern_weight_table(
    detectors: Sequence[ThresholdDetector],
    clicks: Sequence[bool],
    max_n: int,
) -> np.ndarray:
    """pattern_weight evaluated on the full occupation grid (one axis per detector)."""
    if len(detectors) != len(clicks):
        raise ValueError("detectors and clicks must have equal length")
    table = np.ones((), dtype=float)
    for det, q in zip(detectors, clicks):
        table = np.multiply.outer(table, det.weight_vector(q, max_n))
    return table
