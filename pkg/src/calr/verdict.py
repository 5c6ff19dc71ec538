"""Classification outcome shared by the annulus test and the general heuristic."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum


class Verdict(str, Enum):
    CALR = "CALR"
    WEAK_CALR = "WeakCALR"
    NO_CALR = "NoCALR"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class CalrVerdict:
    """Verdict plus the evidence it rests on.

    ``witnesses`` are the mode indices (annulus) or eigen-indices (general
    geometry) supporting the verdict.  ``evidence`` holds fitted rates, the
    blow-up exponent and the kernel component when available.
    """

    verdict: Verdict
    witnesses: list = field(default_factory=list)
    evidence: dict = field(default_factory=dict)

    def __post_init__(self):
        self.verdict = Verdict(self.verdict)
        if self.verdict is Verdict.CALR and len(self.witnesses) < 3:
            raise ValueError("a CALR verdict needs at least 3 witnesses")
        if self.verdict is Verdict.NO_CALR and not self.evidence.get("q_rate", 1.0) < 1.0:
            raise ValueError("a NoCALR verdict needs a fitted decay ratio below 1")

    @property
    def label(self):
        return self.verdict.value

    def to_dict(self):
        return {"verdict": self.verdict.value, "witnesses": list(self.witnesses), "evidence": dict(self.evidence)}
