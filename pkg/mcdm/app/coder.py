"""Exact arithmetic-coding encoder and decoder over a base codebook.

The interval ``[x, x + y)`` is kept as integer numerators over ``spec.size``. With the
equal-probability branching model ``P(b|s) = N(sb) / N(s)`` the width numerator of a
prefix is exactly its prefix count, so no rational arithmetic is ever needed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .codebook import BitVector, CodebookSpec, CodewordError, concat, rank, unrank
from .combinatorics import BigCount, binomial, prefix_count, zero_count


logger = logging.getLogger(__name__)


class CodingError(ValueError):
    """Raised for malformed encoder or decoder input."""


class UnusedCodewordError(CodingError):
    """The codeword is in the base codebook but the encoder never emits it."""


@dataclass(frozen=True, slots=True)
class IntervalState:
    x_num: BigCount
    y_num: BigCount
    denom: BigCount
    prefix_len: int = 0
    prefix_ones: int = 0


def initial_state(spec: CodebookSpec) -> IntervalState:
    return IntervalState(x_num=0, y_num=spec.size, denom=spec.size)


def step(state: IntervalState, spec: CodebookSpec, bit: int) -> IntervalState:
    """Refine ``state`` by one codeword bit."""

    length, ones = state.prefix_len, state.prefix_ones
    if length >= spec.n:
        raise CodingError(f"cannot step past codeword length {spec.n}")
    if bit not in (0, 1):
        raise CodingError(f"bit must be 0 or 1, got {bit!r}")
    zeros = zero_count(spec, length, ones, state.y_num)
    if bit == 0:
        return IntervalState(state.x_num, zeros, state.denom, length + 1, ones)
    return IntervalState(state.x_num + zeros, state.y_num - zeros, state.denom, length + 1, ones + 1)


def interval(spec: CodebookSpec, codeword: BitVector | Sequence[int] | str) -> IntervalState:
    """Final interval of ``codeword``; ``x_num`` equals its lexicographic rank."""

    word = BitVector.coerce(codeword)
    if not spec.contains(word):
        raise CodewordError(f"{word} is not a codeword of the {spec.label()} codebook")
    state = initial_state(spec)
    for bit in word:
        state = step(state, spec, bit)
    return state


def encode(spec: CodebookSpec, u: BitVector | Sequence[int] | str) -> BitVector:
    """Map ``k`` input bits to the codeword whose interval contains ``NBC(u) / 2**k``."""

    data = BitVector.coerce(u)
    if len(data) != spec.k:
        raise CodingError(f"input has {len(data)} bits, the {spec.label()} matcher takes {spec.k}")
    return BitVector(encode_value(spec, data.nbc))


def follow_point(
    spec: CodebookSpec,
    point: BigCount,
    x_num: BigCount,
    y_num: BigCount,
    prefix_len: int,
    prefix_ones: int,
    bits: list[int] | None = None,
) -> tuple[BigCount, int]:
    """Descend from the node ``(x_num, y_num, prefix_len, prefix_ones)`` to full length.

    ``point`` is ``NBC(u) * M``; the path taken is the one whose interval contains
    ``NBC(u) / 2**k``. Appends the bits to ``bits`` when given and returns the final
    width numerator together with the codeword weight.
    """

    k = spec.k
    table = spec.prefix_table
    ones = prefix_ones
    for length in range(prefix_len, spec.n):
        zeros = table.lookup(length + 1, ones)
        if zeros is None:
            zeros = zero_count(spec, length, ones, y_num)
        # d(u) < x + N(s0) / M  <=>  NBC(u) * M < (x_num + N(s0)) * 2**k
        if point < (x_num + zeros) << k:
            y_num = zeros
            bit = 0
        else:
            x_num += zeros
            y_num -= zeros
            ones += 1
            bit = 1
        if bits is not None:
            bits.append(bit)
    return y_num, ones


def encode_value(spec: CodebookSpec, value: int) -> tuple[int, ...]:
    """Encode the input whose NBC is ``value``; returns the raw codeword bits."""

    k = spec.k
    if not 0 <= value < 1 << k:
        raise CodingError(f"input value {value} outside [0, 2**{k})")
    bits: list[int] = []
    width, _ = follow_point(spec, value * spec.size, 0, spec.size, 0, 0, bits)
    if width != 1:
        raise AssertionError(f"final interval width {width}/{spec.size} is not 1/{spec.size}")
    return tuple(bits)


def decode(spec: CodebookSpec, c: BitVector | Sequence[int] | str, *, strict: bool = False) -> BitVector:
    """Recover the input bits from codeword ``c``.

    Returns ``NBC^-1(ceil(x * 2**k))``. With ``strict`` the result is re-encoded and
    codewords the encoder never emits are rejected.
    """

    word = BitVector.coerce(c)
    if len(word) != spec.n:
        raise CodingError(f"codeword has {len(word)} bits, expected n={spec.n}")
    if word.weight not in spec.weights:
        raise CodingError(f"codeword weight {word.weight} not in {list(spec.weights)}")
    # the final interval starts at the lexicographic rank of the word
    k = spec.k
    value = -((-rank(spec, word) << k) // spec.size)
    if value >> k:
        raise UnusedCodewordError(f"codeword {word} not in actual codebook")
    u = BitVector.from_int(value, k)
    if strict and encode(spec, u) != word:
        raise UnusedCodewordError(f"codeword {word} not in actual codebook")
    return u


def encode_blocks(spec: CodebookSpec, data: BitVector) -> BitVector:
    """Encode a stream of ``k``-bit blocks; errors name the offending block."""

    k = spec.k
    if k == 0:
        if len(data):
            raise CodingError(f"the {spec.label()} matcher takes no input bits, got {len(data)}")
        return BitVector()
    if len(data) % k:
        raise CodingError(f"block {len(data) // k}: input length {len(data)} is not a multiple of k={k}")
    encoded = []
    for index, block in enumerate(data.chunks(k)):
        try:
            encoded.append(encode(spec, block))
        except CodingError as exc:
            raise CodingError(f"block {index}: {exc}") from exc
    logger.debug("Encoded %d blocks with %s", len(encoded), spec.label())
    return concat(encoded)


def decode_blocks(spec: CodebookSpec, data: BitVector, *, strict: bool = True) -> BitVector:
    if len(data) % spec.n:
        raise CodingError(f"block {len(data) // spec.n}: codeword stream length {len(data)} is not a multiple of n={spec.n}")
    decoded = []
    for index, block in enumerate(data.chunks(spec.n)):
        try:
            decoded.append(decode(spec, block, strict=strict))
        except UnusedCodewordError as exc:
            raise UnusedCodewordError(f"block {index}: codeword not in actual codebook") from exc
        except (CodingError, CodewordError) as exc:
            raise CodingError(f"block {index}: {exc}") from exc
    logger.debug("Decoded %d blocks with %s", len(decoded), spec.label())
    return concat(decoded)


def actual_codebook(spec: CodebookSpec) -> Iterator[BitVector]:
    """Codewords the encoder selects, in input order (small ``k`` only)."""

    k = spec.k
    for value in range(1 << k):
        yield unrank(spec, (value * spec.size) >> k)


def branch_probability(spec: CodebookSpec, prefix_len: int, prefix_ones: int) -> Fraction:
    """Generic ``P(1|s) = N(s1) / N(s)`` of the equal-probability model."""

    total = prefix_count(spec, prefix_len, prefix_ones)
    if total == 0:
        raise CodingError(f"prefix (len={prefix_len}, ones={prefix_ones}) is unreachable")
    return Fraction(prefix_count(spec, prefix_len + 1, prefix_ones + 1), total)


def cc_branch_probability(n: int, m: int, prefix_len: int, prefix_ones: int) -> Fraction:
    """``m``-out-of-``n`` closed form ``(m - n1) / (n - l)``."""

    return Fraction(m - prefix_ones, n - prefix_len)


def two_c_branch_probability(n: int, m: int, prefix_len: int, prefix_ones: int) -> Fraction:
    """``[m-1, m]``-out-of-``n`` closed form ``(m - n1) / (n - l + 1)``.

    Only the denominator differs from the constant-composition model.
    """

    return Fraction(m - prefix_ones, n - prefix_len + 1)


def opt_branch_probability(n: int, m: int, prefix_len: int, prefix_ones: int) -> Fraction:
    """``[0, m]``-out-of-``n`` form; depends only on ``(l, n1)`` so it tabulates."""

    numerator = sum(binomial(n - 1 - prefix_len, i - 1 - prefix_ones) for i in range(m + 1))
    denominator = sum(binomial(n - prefix_len, i - prefix_ones) for i in range(m + 1))
    return Fraction(numerator, denominator)


def reachable_states(spec: CodebookSpec) -> Iterator[tuple[int, int]]:
    """Every proper prefix ``(l, n1)`` that at least one base codeword extends."""

    for length in range(spec.n):
        for ones in range(length + 1):
            if prefix_count(spec, length, ones):
                yield length, ones
