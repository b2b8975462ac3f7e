"""Exact counting primitives for binary multi-composition codebooks.

All counts are Python integers, so nothing here ever rounds or overflows.
"""
from __future__ import annotations

import math
from threading import Lock
from typing import TYPE_CHECKING, Callable, Iterable

if TYPE_CHECKING:  # pragma: no cover
    from .codebook import CodebookSpec


BigCount = int


def binomial(n: int, r: int) -> BigCount:
    """Return ``C(n, r)``, or 0 when ``r`` falls outside ``[0, n]``."""

    if n < 0:
        raise ValueError(f"binomial requires n >= 0, got {n}")
    if r < 0 or r > n:
        return 0
    return math.comb(n, r)


def weight_runs(weights: Iterable[int]) -> tuple[tuple[int, int], ...]:
    """Split sorted weights into maximal runs of consecutive values."""

    runs: list[tuple[int, int]] = []
    for weight in sorted(set(weights)):
        if runs and runs[-1][1] + 1 == weight:
            runs[-1] = (runs[-1][0], weight)
        else:
            runs.append((weight, weight))
    return tuple(runs)


class PrefixCountTable:
    """Lazily filled look-up table of prefix counts keyed by (length, ones)."""

    def __init__(self) -> None:
        self._values: dict[tuple[int, int], BigCount] = {}
        self._lock = Lock()

    def __len__(self) -> int:
        return len(self._values)

    def lookup(self, prefix_len: int, prefix_ones: int) -> BigCount | None:
        # dict reads are atomic, only inserts take the lock
        return self._values.get((prefix_len, prefix_ones))

    def store(self, prefix_len: int, prefix_ones: int, value: BigCount) -> BigCount:
        with self._lock:
            return self._values.setdefault((prefix_len, prefix_ones), value)

    def get(self, prefix_len: int, prefix_ones: int, compute: Callable[[], BigCount]) -> BigCount:
        cached = self._values.get((prefix_len, prefix_ones))
        if cached is not None:
            return cached
        return self.store(prefix_len, prefix_ones, compute())


def _check_prefix(spec: "CodebookSpec", prefix_len: int, prefix_ones: int) -> None:
    if not 0 <= prefix_ones <= prefix_len <= spec.n:
        raise ValueError(
            f"prefix (len={prefix_len}, ones={prefix_ones}) outside 0 <= ones <= len <= {spec.n}"
        )


def _sum_prefix_count(spec: "CodebookSpec", prefix_len: int, prefix_ones: int) -> BigCount:
    remaining = spec.n - prefix_len
    return sum(binomial(remaining, weight - prefix_ones) for weight in spec.weights)


def prefix_count(spec: "CodebookSpec", prefix_len: int, prefix_ones: int) -> BigCount:
    """Number of base codewords whose first ``prefix_len`` bits hold ``prefix_ones`` ones.

    Only the pair ``(prefix_len, prefix_ones)`` matters, so values are memoised on the
    spec's own look-up table.
    """

    _check_prefix(spec, prefix_len, prefix_ones)
    return spec.prefix_table.get(prefix_len, prefix_ones, lambda: _sum_prefix_count(spec, prefix_len, prefix_ones))


def child_zero_count(spec: "CodebookSpec", prefix_len: int, prefix_ones: int, parent_count: BigCount) -> BigCount:
    """Return ``N(s0)`` given ``N(s) == parent_count``.

    Each run ``[lo, hi]`` contributes ``sum_j C(L, j)`` for ``j`` in ``[lo-o, hi-o]``;
    Pascal's rule halves that window sum down to length ``L-1`` with only the two
    boundary binomials, so a step costs O(#runs) binomials regardless of how many
    weights the set holds.
    """

    if prefix_len >= spec.n:
        raise ValueError(f"cannot extend a prefix of full length {spec.n}")
    below = spec.n - prefix_len - 1
    correction = 0
    for low, high in spec.runs:
        correction += binomial(below, high - prefix_ones) - binomial(below, low - 1 - prefix_ones)
    doubled = parent_count + correction
    # the identity is exact, an odd value means parent_count was not N(s)
    if doubled & 1:
        raise ValueError(f"parent count {parent_count} is not N(s) for prefix ({prefix_len}, {prefix_ones})")
    return doubled >> 1


def zero_count(spec: "CodebookSpec", prefix_len: int, prefix_ones: int, parent_count: BigCount) -> BigCount:
    """Memoised ``N(s0)``, the same value as ``prefix_count(spec, prefix_len + 1, prefix_ones)``.

    A miss is filled from ``parent_count`` with :func:`child_zero_count`, so it must be
    the true ``N(s)``.
    """

    table = spec.prefix_table
    cached = table.lookup(prefix_len + 1, prefix_ones)
    if cached is not None:
        return cached
    return table.store(prefix_len + 1, prefix_ones, child_zero_count(spec, prefix_len, prefix_ones, parent_count))
