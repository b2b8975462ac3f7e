"""Pydantic models shared by the analysis, the worker tasks and the CLI."""
from __future__ import annotations

import math
from ._compat import StrEnum
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .codebook import CodebookSpec, make_2c, make_cc, make_range, make_weight_set


class TargetDistribution(BaseModel):
    """Binary target law given by ``p1 = P(1)``."""

    model_config = ConfigDict(frozen=True)

    p1: float = Field(..., ge=0.0, le=1.0)

    @property
    def p0(self) -> float:
        return 1.0 - self.p1

    @property
    def entropy(self) -> float:
        return -sum(p * math.log2(p) for p in (self.p1, self.p0) if p > 0.0)

    @property
    def mirrored(self) -> bool:
        return self.p1 > 0.5

    def flipped(self) -> "TargetDistribution":
        return TargetDistribution(p1=self.p0)


class DmKind(StrEnum):
    CC = "cc"
    TWO_C = "2c"
    OPT = "opt"
    RANGE = "range"
    SET = "set"


OPTIMIZABLE_KINDS = (DmKind.CC, DmKind.TWO_C, DmKind.OPT)


class Objective(StrEnum):
    """What ``optimize_m`` minimises.

    ``actual`` scores a candidate by the uniform law on its ``2**k`` selected words,
    taking their mean weight from the base codebook; ``base`` scores the whole base
    codebook.
    """

    ACTUAL = "actual"
    BASE = "base"


class KindSpec(BaseModel):
    """A matcher family plus whatever parameters pin down one codebook."""

    model_config = ConfigDict(frozen=True)

    kind: DmKind
    m: Optional[int] = None
    m_low: Optional[int] = None
    m_high: Optional[int] = None
    weights: Optional[tuple[int, ...]] = None

    @model_validator(mode="after")
    def _required_parameters(self) -> "KindSpec":
        if self.kind is DmKind.RANGE and (self.m_low is None or self.m_high is None):
            raise ValueError("range codebooks need m_low and m_high")
        if self.kind is DmKind.SET and not self.weights:
            raise ValueError("set codebooks need a non-empty weight list")
        return self

    def build(self, n: int) -> CodebookSpec:
        if self.kind is DmKind.RANGE:
            return make_range(n, self.m_low, self.m_high)  # type: ignore[arg-type]
        if self.kind is DmKind.SET:
            return make_weight_set(n, self.weights or ())
        if self.m is None:
            raise ValueError(f"{self.kind.value} codebooks need m (or use optimize)")
        if self.kind is DmKind.CC:
            return make_cc(n, self.m)
        if self.kind is DmKind.TWO_C:
            return make_2c(n, self.m)
        return make_range(n, 0, self.m)


class McConfig(BaseModel):
    samples: int = Field(100_000, ge=1)
    seed: int = Field(7, ge=0)
    workers: int = Field(1, ge=1)
    budget: int = Field(24, ge=0)
    rel_error: Optional[float] = Field(default=None, gt=0.0, lt=1.0)
    confidence: float = Field(0.9, gt=0.0, lt=1.0)


Method = Literal["exact", "monte-carlo"]


CSV_HEADER = ("n", "kind", "m_star", "k", "rate", "div_base", "div_actual", "pc1", "method", "samples", "seed", "workers")


def _fmt(value: float) -> str:
    if math.isinf(value):
        return "inf"
    return f"{value:.12g}"


class AnalysisRow(BaseModel):
    n: int = Field(..., ge=1)
    kind: DmKind
    m_star: int
    k: int = Field(..., ge=0)
    div_base: float
    div_actual: float
    pc1: float = Field(..., ge=0.0, le=1.0)
    method: Method
    samples: Optional[int] = None
    seed: Optional[int] = None
    workers: Optional[int] = None
    div_stderr: Optional[float] = None

    @field_validator("div_base", "div_actual")
    @classmethod
    def _non_negative(cls, value: float) -> float:
        # clamp rounding noise around zero, reject real negatives
        if value < -1e-12:
            raise ValueError(f"divergence must be non-negative, got {value}")
        return max(value, 0.0)

    @property
    def rate(self) -> float:
        return self.k / self.n

    def csv_record(self) -> dict[str, str]:
        return {
            "n": str(self.n),
            "kind": self.kind.value,
            "m_star": str(self.m_star),
            "k": str(self.k),
            "rate": f"{self.rate:.12g}",
            "div_base": _fmt(self.div_base),
            "div_actual": _fmt(self.div_actual),
            "pc1": _fmt(self.pc1),
            "method": self.method,
            "samples": "" if self.samples is None else str(self.samples),
            "seed": "" if self.seed is None else str(self.seed),
            "workers": "" if self.workers is None else str(self.workers),
        }


class CodebookReport(BaseModel):
    n: int
    kind: DmKind
    label: str
    weights: list[int]
    size: str
    k: int
    rate: float
    div_base: float
    p1: float
    m_star: Optional[int] = None
    mirrored: bool = False


class TargetReport(BaseModel):
    kind: DmKind
    target_div: float
    n: Optional[int] = None
    m_star: Optional[int] = None
    k: Optional[int] = None
    rate: Optional[float] = None
    div_base: Optional[float] = None
