"""Rate, divergence and codebook-optimisation computations.

All logarithms are base 2 and divergences are normalised per output symbol.
"""
from __future__ import annotations

import logging
import math
from bisect import bisect_left
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional

import numpy as np
from scipy.stats import norm

from .codebook import CodebookSpec, make_2c, make_cc, make_range, mirror
from .coder import follow_point
from .combinatorics import BigCount, binomial, zero_count
from .config import get_settings
from .schemas import AnalysisRow, DmKind, McConfig, Objective, OPTIMIZABLE_KINDS, TargetDistribution


logger = logging.getLogger(__name__)

# candidates closer than this are treated as ties and resolved toward smaller m
TIE_TOLERANCE = 1e-12


class EnumerationBudgetExceeded(RuntimeError):
    """Raised when exact enumeration would need more than ``2**budget`` inputs."""


def _target(t: TargetDistribution | float) -> TargetDistribution:
    return t if isinstance(t, TargetDistribution) else TargetDistribution(p1=t)


def entropy(t: TargetDistribution | float) -> float:
    return _target(t).entropy


def binary_divergence(q: float, p: float) -> float:
    """``D(Bern(q) || Bern(p))`` in bits, with ``0 log 0 = 0``."""

    total = 0.0
    for a, b in ((q, p), (1.0 - q, 1.0 - p)):
        if a <= 0.0:
            continue
        if b <= 0.0:
            return math.inf
        total += a * math.log2(a / b)
    return total


def _divergence_from_totals(n: int, size: BigCount, ones: BigCount, t: TargetDistribution) -> float:
    """Divergence of the uniform law on ``size`` words holding ``ones`` ones in total.

    ``(1/n) [-log2 M - (A/M) log2 p1 - ((nM - A)/M) log2 (1 - p1)]``; the ratios are
    formed from exact integers before they become floats.
    """

    zeros = n * size - ones
    cross = 0.0
    for count, p in ((ones, t.p1), (zeros, t.p0)):
        if count == 0:
            continue
        if p <= 0.0:
            return math.inf
        cross -= (count / size) * math.log2(p)
    return (cross - math.log2(size)) / n


def _ones_total(spec: CodebookSpec) -> BigCount:
    return sum(w * binomial(spec.n, w) for w in spec.weights)


def divergence_base(spec: CodebookSpec, t: TargetDistribution | float) -> float:
    """``(1/n) D(U_base || P_A^n)`` in closed form; ``math.inf`` when unbounded."""

    return _divergence_from_totals(spec.n, spec.size, _ones_total(spec), _target(t))


@dataclass(frozen=True, slots=True)
class DivergenceEstimate:
    div: float
    pc1: float
    stderr: float = 0.0
    method: str = "exact"
    samples: Optional[int] = None
    seed: Optional[int] = None
    workers: Optional[int] = None


def _check_budget(spec: CodebookSpec, budget: Optional[int]) -> None:
    limit = get_settings().enumeration_budget if budget is None else budget
    if spec.k > limit:
        raise EnumerationBudgetExceeded(
            f"k={spec.k} exceeds the enumeration budget {limit}; use the Monte-Carlo estimator instead"
        )


def actual_weight_histogram(spec: CodebookSpec, budget: Optional[int] = None) -> Counter[int]:
    """Weight distribution of the ``2**k`` codewords the encoder emits.

    Walks the prefix tree and counts dyadic inputs ``j / 2**k`` per subtree as
    ``ceil((x + y) 2**k / M) - ceil(x 2**k / M)``. A subtree whose every codeword is
    selected is closed in one step, so this matches encoding every input one by one.
    """

    _check_budget(spec, budget)
    k, size, n = spec.k, spec.size, spec.n

    def inputs_below(x_num: BigCount) -> BigCount:
        return -((-x_num << k) // size)

    histogram: Counter[int] = Counter()
    stack: list[tuple[BigCount, BigCount, int, int]] = [(0, size, 0, 0)]
    while stack:
        x_num, y_num, length, ones = stack.pop()
        selected = inputs_below(x_num + y_num) - inputs_below(x_num)
        if selected == 0:
            continue
        if selected == y_num:
            remaining = n - length
            for weight in spec.weights:
                count = binomial(remaining, weight - ones)
                if count:
                    histogram[weight] += count
            continue
        zeros = zero_count(spec, length, ones, y_num)
        if y_num - zeros:
            stack.append((x_num + zeros, y_num - zeros, length + 1, ones + 1))
        if zeros:
            stack.append((x_num, zeros, length + 1, ones))
    return histogram


def _estimate_from_histogram(spec: CodebookSpec, histogram: Mapping[int, int], t: TargetDistribution) -> DivergenceEstimate:
    used = sum(histogram.values())
    ones = sum(weight * count for weight, count in histogram.items())
    div = _divergence_from_totals(spec.n, used, ones, t)
    return DivergenceEstimate(div=div, pc1=ones / (spec.n * used))


def divergence_actual_exact(
    spec: CodebookSpec, t: TargetDistribution | float, budget: Optional[int] = None
) -> DivergenceEstimate:
    """Exact ``(1/n) D(U_actual || P_A^n)`` and ``P_C(1)`` over all ``2**k`` inputs."""

    histogram = actual_weight_histogram(spec, budget)
    return _estimate_from_histogram(spec, histogram, _target(t))


def _shares(samples: int, workers: int) -> list[int]:
    base, extra = divmod(samples, workers)
    return [base + (1 if index < extra else 0) for index in range(workers)]


def _draw_values(spec: CodebookSpec, samples: int, seed: int, workers: int) -> list[int]:
    k = spec.k
    width = (k + 7) // 8
    shift = 8 * width - k
    values: list[int] = []
    # one independent stream per worker share, derived deterministically from the seed
    for child, share in zip(np.random.SeedSequence(seed).spawn(workers), _shares(samples, workers)):
        rng = np.random.default_rng(child)
        if width == 0:
            values.extend([0] * share)
            continue
        block = rng.bytes(width * share)
        values.extend(int.from_bytes(block[start : start + width], "big") >> shift for start in range(0, len(block), width))
    return values


def _sample_weights(spec: CodebookSpec, samples: int, seed: int, workers: int) -> np.ndarray:
    """Codeword weights of the sampled inputs, in ascending input order.

    The sorted inputs descend the prefix tree together; each node splits its slice at
    the first input that leaves the zero branch, and a slice of one input finishes
    with a plain single-path descent.
    """

    values = sorted(_draw_values(spec, samples, seed, workers))
    k, size, n = spec.k, spec.size, spec.n
    weights = np.empty(len(values), dtype=np.int64)
    filled = 0
    stack: list[tuple[BigCount, BigCount, int, int, int, int]] = [(0, size, 0, 0, 0, len(values))]
    while stack:
        x_num, y_num, length, ones, low, high = stack.pop()
        if length == n:
            weights[filled : filled + high - low] = ones
            filled += high - low
            continue
        if high - low == 1:
            _, weights[filled] = follow_point(spec, values[low] * size, x_num, y_num, length, ones)
            filled += 1
            continue
        zeros = zero_count(spec, length, ones, y_num)
        # smallest input value whose point lies in the one branch
        boundary = -((-(x_num + zeros) << k) // size)
        split = bisect_left(values, boundary, low, high)
        if split < high:
            stack.append((x_num + zeros, y_num - zeros, length + 1, ones + 1, split, high))
        if low < split:
            stack.append((x_num, zeros, length + 1, ones, low, split))
    return weights


def _symbol_costs(weights: np.ndarray, n: int, t: TargetDistribution) -> np.ndarray:
    """Per-codeword ``-(1/n) log2 P_A^n(c)`` from the codeword weights."""

    costs = np.zeros(weights.shape, dtype=np.float64)
    for counts, p in ((weights, t.p1), (n - weights, t.p0)):
        if p > 0.0:
            costs -= counts * math.log2(p)
        else:
            costs = np.where(counts > 0, np.inf, costs)
    return costs / n


def divergence_actual_mc(
    spec: CodebookSpec,
    t: TargetDistribution | float,
    samples: int,
    seed: int,
    workers: int = 1,
) -> DivergenceEstimate:
    """Monte-Carlo estimate over uniformly drawn inputs, reproducible per ``(seed, workers)``."""

    if samples < 1:
        raise ValueError("samples must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    target = _target(t)
    weights = _sample_weights(spec, samples, seed, workers)
    costs = _symbol_costs(weights, spec.n, target)
    div = float(costs.mean()) - spec.k / spec.n
    if samples > 1 and np.isfinite(costs).all():
        stderr = float(costs.std(ddof=1)) / math.sqrt(samples)
    else:
        stderr = 0.0
    pc1 = float(weights.mean()) / spec.n
    logger.debug("MC estimate for %s: div=%.6g stderr=%.3g (%d samples)", spec.label(), div, stderr, samples)
    return DivergenceEstimate(
        div=div,
        pc1=pc1,
        stderr=stderr,
        method="monte-carlo",
        samples=samples,
        seed=seed,
        workers=workers,
    )


def required_samples(estimate: DivergenceEstimate, rel_error: float = 0.03, confidence: float = 0.9) -> Optional[int]:
    """Samples needed for ``|error| <= rel_error * div`` with the given confidence.

    Uses the normal approximation with the per-sample spread observed in ``estimate``.
    Returns ``None`` when the target is unreachable (zero mean with non-zero spread).
    """

    if estimate.samples is None or estimate.stderr == 0.0:
        return estimate.samples or 1
    if estimate.div == 0.0:
        return None
    spread = estimate.stderr * math.sqrt(estimate.samples)
    z = float(norm.ppf(0.5 + confidence / 2.0))
    return max(1, math.ceil((z * spread / (rel_error * abs(estimate.div))) ** 2))


@dataclass(frozen=True, slots=True)
class OptimizationResult:
    kind: DmKind
    m_star: int
    spec: CodebookSpec
    div_base: float
    mirrored: bool = False
    objective: Objective = Objective.ACTUAL


def _candidates(kind: DmKind, n: int) -> Iterator[tuple[int, BigCount, BigCount]]:
    """Yield ``(m, |C(m)|, total ones in C(m))`` for every legal ``m``."""

    row = [binomial(n, i) for i in range(n + 1)]
    if kind is DmKind.CC:
        for m in range(n + 1):
            yield m, row[m], m * row[m]
    elif kind is DmKind.TWO_C:
        for m in range(1, n + 1):
            yield m, row[m - 1] + row[m], (m - 1) * row[m - 1] + m * row[m]
    elif kind is DmKind.OPT:
        size = ones = 0
        for m in range(n + 1):
            size += row[m]
            ones += m * row[m]
            yield m, size, ones
    else:
        raise ValueError(f"cannot optimise {kind.value} codebooks, choose one of cc, 2c, opt")


def _spec_for(kind: DmKind, n: int, m: int) -> CodebookSpec:
    if kind is DmKind.CC:
        return make_cc(n, m)
    if kind is DmKind.TWO_C:
        return make_2c(n, m)
    return make_range(n, 0, m)


def _score(n: int, size: BigCount, ones: BigCount, t: TargetDistribution, objective: Objective) -> float:
    if objective is Objective.BASE:
        return _divergence_from_totals(n, size, ones, t)
    used = 1 << (size.bit_length() - 1)
    return _divergence_from_totals(n, used, Fraction(ones * used, size), t)


def optimize_m(
    kind: DmKind | str,
    n: int,
    t: TargetDistribution | float,
    objective: Objective | str = Objective.ACTUAL,
) -> OptimizationResult:
    """Parameter ``m`` minimising the normalised divergence under ``objective``.

    The default scores the ``2**k`` words the encoder actually emits, which keeps the
    full cube optimal for short ``[0, m]`` codebooks; ``base`` scores the base codebook
    and may trade a whole input bit for a slightly smaller divergence.

    Targets with ``p1 > 1/2`` are solved for the flipped law and the codebook is
    mirrored afterwards, so ``m_star`` always counts the less likely symbol.
    """

    kind = DmKind(kind)
    objective = Objective(objective)
    target = _target(t)
    if not 0.0 < target.p1 < 1.0:
        raise ValueError(f"optimisation needs 0 < p1 < 1, got {target.p1}")
    if n < 1:
        raise ValueError(f"codeword length must be >= 1, got {n}")
    frame = target.flipped() if target.mirrored else target
    best: tuple[int, float, float] | None = None
    for m, size, ones in _candidates(kind, n):
        score = _score(n, size, ones, frame, objective)
        div = _divergence_from_totals(n, size, ones, frame)
        if best is None or score < best[1] - TIE_TOLERANCE:
            best = (m, score, div)
        elif abs(score - best[1]) <= TIE_TOLERANCE and div < best[2] - TIE_TOLERANCE:
            # equal scores: lower base divergence wins, then the smaller m
            best = (m, score, div)
    assert best is not None
    m_star, _, div = best
    spec = _spec_for(kind, n, m_star)
    if target.mirrored:
        spec = mirror(spec)
    return OptimizationResult(
        kind=kind, m_star=m_star, spec=spec, div_base=div, mirrored=target.mirrored, objective=objective
    )


@dataclass(frozen=True, slots=True)
class DecompositionCheck:
    """Both sides of ``D/n = H(P_C) - log2|C|/n + D(P_C || P_A)``."""

    lhs: float
    entropy: float
    rate: float
    divergence: float
    residual: float

    @property
    def rhs(self) -> float:
        return self.entropy - self.rate + self.divergence

    @property
    def codebook_term(self) -> float:
        """``H(P_C) - log2|C|/n``: the per-symbol divergence from ``P_C^n``, never negative."""

        return self.entropy - self.rate


def divergence_decomposition_check(
    spec: CodebookSpec,
    t: TargetDistribution | float,
    budget: Optional[int] = None,
    tolerance: float = 1e-9,
) -> DecompositionCheck:
    target = _target(t)
    estimate = divergence_actual_exact(spec, target, budget)
    pc1 = estimate.pc1
    check_entropy = entropy(pc1)
    rate = spec.k / spec.n
    divergence = binary_divergence(pc1, target.p1)
    residual = estimate.div - (check_entropy - rate + divergence)
    result = DecompositionCheck(
        lhs=estimate.div,
        entropy=check_entropy,
        rate=rate,
        divergence=divergence,
        residual=residual,
    )
    if abs(residual) > tolerance:
        raise AssertionError(f"divergence decomposition off by {residual:.3g} for {spec.label()}")
    if result.codebook_term < -tolerance:
        raise AssertionError(f"H(P_C) - k/n = {result.codebook_term:.3g} is negative for {spec.label()}")
    return result


def _mc_config(mc: McConfig | None) -> McConfig:
    if mc is not None:
        return mc
    settings = get_settings()
    return McConfig(
        samples=settings.mc_samples,
        seed=settings.mc_seed,
        workers=settings.workers,
        budget=settings.enumeration_budget,
    )


def analyze_row(n: int, kind: DmKind | str, t: TargetDistribution | float, mc: McConfig | None = None) -> AnalysisRow:
    """Optimise one matcher family at length ``n`` and measure it."""

    config = _mc_config(mc)
    target = _target(t)
    result = optimize_m(kind, n, target)
    spec = result.spec
    if spec.k <= config.budget:
        estimate = divergence_actual_exact(spec, target, config.budget)
    else:
        logger.warning(
            "n=%d %s: k=%d exceeds the enumeration budget %d, estimating by Monte-Carlo",
            n,
            result.kind.value,
            spec.k,
            config.budget,
        )
        estimate = divergence_actual_mc(spec, target, config.samples, config.seed, config.workers)
        if config.rel_error is not None:
            needed = required_samples(estimate, config.rel_error, config.confidence)
            if needed is not None and needed > config.samples:
                top_up = min(needed, 10 * config.samples)
                logger.info("Raising samples for n=%d %s from %d to %d", n, result.kind.value, config.samples, top_up)
                estimate = divergence_actual_mc(spec, target, top_up, config.seed, config.workers)
    row = AnalysisRow(
        n=n,
        kind=result.kind,
        m_star=result.m_star,
        k=spec.k,
        div_base=result.div_base,
        div_actual=estimate.div,
        pc1=estimate.pc1,
        method="exact" if estimate.method == "exact" else "monte-carlo",
        samples=estimate.samples,
        seed=estimate.seed,
        workers=estimate.workers,
        div_stderr=estimate.stderr if estimate.method != "exact" else None,
    )
    logger.info(
        "n=%d %s m*=%d k=%d div_base=%.6g div_actual=%.6g (%s)",
        n,
        result.kind.value,
        row.m_star,
        row.k,
        row.div_base,
        row.div_actual,
        row.method,
    )
    return row


def sweep(
    kinds: Iterable[DmKind | str],
    n_values: Iterable[int],
    t: TargetDistribution | float,
    mc: McConfig | None = None,
) -> list[AnalysisRow]:
    """One row per ``(n, kind)`` in ``n``-major order."""

    chosen = [DmKind(kind) for kind in kinds]
    for kind in chosen:
        if kind not in OPTIMIZABLE_KINDS:
            raise ValueError(f"cannot sweep {kind.value} codebooks, choose among cc, 2c, opt")
    config = _mc_config(mc)
    return [analyze_row(n, kind, t, config) for n in n_values for kind in chosen]


def shortest_length(
    kind: DmKind | str,
    t: TargetDistribution | float,
    target_div: float,
    n_max: int,
    objective: Objective | str = Objective.ACTUAL,
) -> Optional[OptimizationResult]:
    """Smallest ``n <= n_max`` whose optimised base codebook reaches ``target_div``."""

    for n in range(1, n_max + 1):
        result = optimize_m(kind, n, t, objective)
        if result.div_base <= target_div:
            return result
    return None
