"""Binary multi-composition base codebooks and their lexicographic ranking."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Sequence

from pydantic import BaseModel, ConfigDict, PrivateAttr, field_validator, model_validator

from .combinatorics import BigCount, PrefixCountTable, binomial, weight_runs, zero_count


class CodebookSpecError(ValueError):
    """Raised when a codebook cannot be built from the given parameters."""


class CodewordError(ValueError):
    """Raised when a codeword or rank does not belong to the base codebook."""


@dataclass(frozen=True, slots=True)
class BitVector:
    """Ordered bits; index 0 is the most significant bit for NBC purposes."""

    bits: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if any(bit not in (0, 1) for bit in self.bits):
            raise ValueError("BitVector accepts only 0/1 entries")

    @classmethod
    def from_str(cls, text: str) -> "BitVector":
        cleaned = "".join(text.split())
        if any(ch not in "01" for ch in cleaned):
            raise ValueError(f"not a bit string: {text!r}")
        return cls(tuple(int(ch) for ch in cleaned))

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitVector":
        """Inverse NBC: the ``length``-bit big-endian representation of ``value``."""

        if value < 0 or value >> length:
            raise ValueError(f"{value} does not fit in {length} bits")
        return cls(tuple((value >> shift) & 1 for shift in range(length - 1, -1, -1)))

    @classmethod
    def coerce(cls, value: "BitVector | Sequence[int] | str") -> "BitVector":
        if isinstance(value, BitVector):
            return value
        if isinstance(value, str):
            return cls.from_str(value)
        return cls(tuple(int(bit) for bit in value))

    @property
    def nbc(self) -> int:
        value = 0
        for bit in self.bits:
            value = (value << 1) | bit
        return value

    @property
    def weight(self) -> int:
        return sum(self.bits)

    def chunks(self, size: int) -> Iterator["BitVector"]:
        if size <= 0:
            raise ValueError("chunk size must be positive")
        for start in range(0, len(self.bits), size):
            yield BitVector(self.bits[start : start + size])

    def __add__(self, other: "BitVector") -> "BitVector":
        return BitVector(self.bits + other.bits)

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self) -> Iterator[int]:
        return iter(self.bits)

    def __getitem__(self, index: int) -> int:
        return self.bits[index]

    def __str__(self) -> str:
        return "".join(str(bit) for bit in self.bits)


def concat(vectors: Iterable[BitVector]) -> BitVector:
    return BitVector(tuple(bit for vector in vectors for bit in vector.bits))


class CodebookSpec(BaseModel):
    """All length-``n`` binary words whose Hamming weight lies in ``weights``."""

    model_config = ConfigDict(frozen=True)

    n: int
    weights: tuple[int, ...]

    _size: BigCount = PrivateAttr(default=0)
    _k: int = PrivateAttr(default=0)
    _runs: tuple[tuple[int, int], ...] = PrivateAttr(default=())
    _table: PrefixCountTable = PrivateAttr(default_factory=PrefixCountTable)

    @field_validator("weights", mode="before")
    @classmethod
    def _sorted_weights(cls, value: Any) -> Any:
        if isinstance(value, (set, frozenset, list, tuple)):
            items = [int(v) for v in value]
            if len(set(items)) != len(items):
                raise ValueError("weights must be distinct")
            return tuple(sorted(items))
        return value

    @model_validator(mode="after")
    def _check_ranges(self) -> "CodebookSpec":
        if self.n < 1:
            raise ValueError(f"codeword length must be >= 1, got {self.n}")
        if not self.weights:
            raise ValueError("weight set must not be empty")
        out_of_range = [w for w in self.weights if not 0 <= w <= self.n]
        if out_of_range:
            raise ValueError(f"weights {out_of_range} outside [0, {self.n}]")
        return self

    def model_post_init(self, __context: Any) -> None:
        size = sum(binomial(self.n, w) for w in self.weights)
        self._size = size
        self._k = size.bit_length() - 1
        self._runs = weight_runs(self.weights)

    @property
    def size(self) -> BigCount:
        return self._size

    @property
    def k(self) -> int:
        return self._k

    @property
    def runs(self) -> tuple[tuple[int, int], ...]:
        return self._runs

    @property
    def prefix_table(self) -> PrefixCountTable:
        return self._table

    # private caches must not take part in equality
    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CodebookSpec):
            return NotImplemented
        return (self.n, self.weights) == (other.n, other.weights)

    def __hash__(self) -> int:
        return hash((self.n, self.weights))

    def contains(self, codeword: BitVector) -> bool:
        return len(codeword) == self.n and codeword.weight in self.weights

    def label(self) -> str:
        runs = ",".join(f"{lo}" if lo == hi else f"{lo}-{hi}" for lo, hi in self.runs)
        return f"[{runs}]-out-of-{self.n}"


def _build(n: int, weights: Iterable[int]) -> CodebookSpec:
    try:
        return CodebookSpec(n=n, weights=tuple(weights))
    except ValueError as exc:
        raise CodebookSpecError(str(exc)) from exc


def make_cc(n: int, m: int) -> CodebookSpec:
    """``m``-out-of-``n`` constant-composition codebook."""

    if not 0 <= m <= n:
        raise CodebookSpecError(f"constant-composition weight {m} outside [0, {n}]")
    return _build(n, (m,))


def make_2c(n: int, m: int) -> CodebookSpec:
    """``[m-1, m]``-out-of-``n`` codebook of two adjacent compositions."""

    if not 1 <= m <= n:
        raise CodebookSpecError(f"two-composition parameter {m} outside [1, {n}]")
    return _build(n, (m - 1, m))


def make_range(n: int, m_low: int, m_high: int) -> CodebookSpec:
    """All words of weight ``m_low..m_high``; ``make_range(n, 0, m)`` is the Opt-MCDM codebook."""

    if not 0 <= m_low <= m_high <= n:
        raise CodebookSpecError(f"weight range [{m_low}, {m_high}] invalid for n={n}")
    return _build(n, range(m_low, m_high + 1))


def make_weight_set(n: int, weights: Iterable[int]) -> CodebookSpec:
    chosen = list(weights)
    if not chosen:
        raise CodebookSpecError("weight set must not be empty")
    return _build(n, chosen)


def mirror(spec: CodebookSpec) -> CodebookSpec:
    """Swap the roles of 0 and 1: weight ``w`` becomes ``n - w``."""

    return _build(spec.n, (spec.n - w for w in spec.weights))


def codebook_size(spec: CodebookSpec) -> BigCount:
    return spec.size


def input_length(spec: CodebookSpec) -> int:
    """``k = floor(log2 |C|)``, computed exactly from the bit length."""

    return spec.k


def composition(codeword: BitVector) -> tuple[int, int]:
    """Occurrences of 0 and 1 in ``codeword``."""

    ones = codeword.weight
    return len(codeword) - ones, ones


def unrank(spec: CodebookSpec, index: BigCount) -> BitVector:
    """Codeword at position ``index`` in lexicographic (NBC ascending) order."""

    if not 0 <= index < spec.size:
        raise CodewordError(f"index {index} outside [0, {spec.size})")
    bits: list[int] = []
    remaining = index
    count = spec.size
    ones = 0
    for length in range(spec.n):
        zeros = zero_count(spec, length, ones, count)
        if remaining < zeros:
            bits.append(0)
            count = zeros
        else:
            bits.append(1)
            remaining -= zeros
            count -= zeros
            ones += 1
    return BitVector(tuple(bits))


def rank(spec: CodebookSpec, codeword: BitVector | Sequence[int] | str) -> BigCount:
    """Lexicographic position of ``codeword``; the inverse of :func:`unrank`."""

    word = BitVector.coerce(codeword)
    if len(word) != spec.n:
        raise CodewordError(f"codeword length {len(word)} != n={spec.n}")
    if word.weight not in spec.weights:
        raise CodewordError(f"codeword weight {word.weight} not in {list(spec.weights)}")
    position = 0
    count = spec.size
    ones = 0
    for length, bit in enumerate(word):
        zeros = zero_count(spec, length, ones, count)
        if bit:
            position += zeros
            count -= zeros
            ones += 1
        else:
            count = zeros
    return position


def codewords(spec: CodebookSpec) -> Iterator[BitVector]:
    """Every base codeword in lexicographic order (small ``n`` only)."""

    for index in range(spec.size):
        yield unrank(spec, index)


__all__ = [
    "BitVector",
    "CodebookSpec",
    "CodebookSpecError",
    "CodewordError",
    "codebook_size",
    "codewords",
    "composition",
    "concat",
    "input_length",
    "make_2c",
    "make_cc",
    "make_range",
    "make_weight_set",
    "mirror",
    "rank",
    "unrank",
]
