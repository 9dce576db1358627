"""Bit-accurate fixed-point model of the pipelined inner-product datapath.

Values are two's-complement scaled integers: a format (word_bits, frac_bits)
stores v = int_value * 2^-frac_bits. All arithmetic below is exact integer
arithmetic plus the format's rounding and overflow policies, so results are
reproducible bit for bit across platforms.

The complex multiplier is the four-multiplier form: the four real partial
products are each rounded back to the format first, then combined with two
format-checked additions (re = p_rr - p_ii, im = p_ri + p_ir, in that
order). Vector reductions use a balanced fan-in tree with deterministic
left-to-right operand order, padding the input with exact zeros up to a full
tree. Additions of equally scaled integers are exact unless they overflow.

The pipeline model is structural: a reduction of depth ceil(log_fanin(n))
adder levels behind `stages` pipeline registers has cycle latency
stages + depth, and its initiation interval is 1 when fully pipelined
(stages >= depth) and the tree depth otherwise. More stages therefore never
reduce throughput and never reduce latency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

ROUND_TRUNCATE = "truncate"
ROUND_HALF_EVEN = "round-half-even"
OVERFLOW_SATURATE = "saturate"
OVERFLOW_WRAP = "wrap"


@dataclass(frozen=True)
class FixedPointFormat:
    """Two's-complement fixed-point format.

    word_bits counts all bits including the sign bit (when signed);
    frac_bits of them sit to the right of the binary point.
    """

    word_bits: int = 18
    frac_bits: int = 12
    signed: bool = True
    rounding: str = ROUND_HALF_EVEN
    overflow: str = OVERFLOW_SATURATE

    def __post_init__(self) -> None:
        if self.word_bits < 1:
            raise ValueError("word_bits must be >= 1")
        if not (0 <= self.frac_bits <= self.word_bits):
            raise ValueError("frac_bits must lie in [0, word_bits]")
        if self.rounding not in (ROUND_TRUNCATE, ROUND_HALF_EVEN):
            raise ValueError(f"unknown rounding mode {self.rounding!r}")
        if self.overflow not in (OVERFLOW_SATURATE, OVERFLOW_WRAP):
            raise ValueError(f"unknown overflow mode {self.overflow!r}")

    @property
    def min_int(self) -> int:
        return -(1 << (self.word_bits - 1)) if self.signed else 0

    @property
    def max_int(self) -> int:
        return (1 << (self.word_bits - 1)) - 1 if self.signed else (1 << self.word_bits) - 1

    @property
    def resolution(self) -> float:
        return 2.0 ** (-self.frac_bits)

    def describe(self) -> str:
        return f"{self.word_bits}.{self.frac_bits}"


class OverflowCounter:
    """Mutable tally of overflow events along a datapath."""

    def __init__(self) -> None:
        self.events = 0

    def bump(self) -> None:
        self.events += 1


def _handle_overflow(value: int, fmt: FixedPointFormat, counter: OverflowCounter | None) -> int:
    if fmt.min_int <= value <= fmt.max_int:
        return value
    if counter is not None:
        counter.bump()
    if fmt.overflow == OVERFLOW_SATURATE:
        return fmt.min_int if value < fmt.min_int else fmt.max_int
    span = 1 << fmt.word_bits
    return ((value - fmt.min_int) % span) + fmt.min_int


def _round_shift(value: int, shift: int, fmt: FixedPointFormat) -> int:
    """Drop `shift` low bits of an integer under the format's rounding mode."""
    if shift == 0:
        return value
    if fmt.rounding == ROUND_TRUNCATE:
        return value >> shift  # arithmetic shift: floor toward -inf
    q, r = divmod(value, 1 << shift)
    half = 1 << (shift - 1)
    if r > half or (r == half and (q & 1)):
        return q + 1
    return q


def quantize(value: float, fmt: FixedPointFormat, counter: OverflowCounter | None = None) -> int:
    """Convert a real number to the format's integer representation.

    Rounding follows the format's mode on the exact binary value of the
    float (no double rounding); out-of-range results follow the overflow
    policy.
    """
    if not math.isfinite(value):
        raise ValueError("cannot quantize a non-finite value")
    exact = Fraction(value) * (1 << fmt.frac_bits)
    q, r = divmod(exact.numerator, exact.denominator)
    if r != 0:
        if fmt.rounding == ROUND_TRUNCATE:
            pass  # divmod already floored
        else:
            twice = 2 * r
            if twice > exact.denominator or (twice == exact.denominator and (q & 1)):
                q += 1
    return _handle_overflow(q, fmt, counter)


def to_float(int_value: int, fmt: FixedPointFormat) -> float:
    return int_value * fmt.resolution


@dataclass(frozen=True)
class FxComplex:
    """Complex value as a pair of format integers."""

    re: int
    im: int

    def conj(self, fmt: FixedPointFormat, counter: OverflowCounter | None = None) -> "FxComplex":
        # Sign flip is exact except for the most negative integer, which
        # follows the overflow policy.
        return FxComplex(self.re, _handle_overflow(-self.im, fmt, counter))


def quantize_complex(
    value: complex, fmt: FixedPointFormat, counter: OverflowCounter | None = None
) -> FxComplex:
    return FxComplex(quantize(value.real, fmt, counter), quantize(value.imag, fmt, counter))


def quantize_vector(
    values: Sequence[complex], fmt: FixedPointFormat, counter: OverflowCounter | None = None
) -> list[FxComplex]:
    return [quantize_complex(complex(v), fmt, counter) for v in values]


def fx_to_complex(value: FxComplex, fmt: FixedPointFormat) -> complex:
    return complex(to_float(value.re, fmt), to_float(value.im, fmt))


def fx_add(
    a: FxComplex, b: FxComplex, fmt: FixedPointFormat, counter: OverflowCounter | None = None
) -> FxComplex:
    """Exact integer addition followed by the overflow policy (no rounding)."""
    return FxComplex(
        _handle_overflow(a.re + b.re, fmt, counter),
        _handle_overflow(a.im + b.im, fmt, counter),
    )


def fx_complex_mul(
    a: FxComplex, b: FxComplex, fmt: FixedPointFormat, counter: OverflowCounter | None = None
) -> FxComplex:
    """Four-multiplier complex product in a fixed documented order.

    Each of the four partial products (a.re*b.re, a.im*b.im, a.re*b.im,
    a.im*b.re) is rounded from 2*frac_bits back to frac_bits and
    overflow-checked; then re = p_rr - p_ii and im = p_ri + p_ir are formed
    with overflow-checked additions.
    """
    shift = fmt.frac_bits
    p_rr = _handle_overflow(_round_shift(a.re * b.re, shift, fmt), fmt, counter)
    p_ii = _handle_overflow(_round_shift(a.im * b.im, shift, fmt), fmt, counter)
    p_ri = _handle_overflow(_round_shift(a.re * b.im, shift, fmt), fmt, counter)
    p_ir = _handle_overflow(_round_shift(a.im * b.re, shift, fmt), fmt, counter)
    return FxComplex(
        _handle_overflow(p_rr - p_ii, fmt, counter),
        _handle_overflow(p_ri + p_ir, fmt, counter),
    )


def fx_hadamard(
    u: Sequence[FxComplex],
    v: Sequence[FxComplex],
    fmt: FixedPointFormat,
    counter: OverflowCounter | None = None,
) -> list[FxComplex]:
    """Elementwise complex products (equal-length inputs)."""
    if len(u) != len(v):
        raise ValueError("hadamard operands must have equal length")
    return [fx_complex_mul(a, b, fmt, counter) for a, b in zip(u, v)]


@dataclass(frozen=True)
class PipelineConfig:
    """Structural pipeline parameters of the reduction tree."""

    stages: int = 0
    fanin: int = 2

    def __post_init__(self) -> None:
        if self.stages < 0:
            raise ValueError("stages must be >= 0")
        if self.fanin < 2:
            raise ValueError("fanin must be >= 2")


@dataclass(frozen=True)
class DatapathReport:
    """Result and structural/accuracy metrics of one reduction."""

    result: FxComplex
    cycles_latency: int
    initiation_interval: int
    throughput: float
    max_abs_error: float
    overflow_events: int


def tree_depth(length: int, fanin: int) -> int:
    """Adder levels of a balanced fan-in tree over `length` operands."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return 0 if length == 1 else math.ceil(math.log(length, fanin))


def fx_tree_sum(
    values: Sequence[FxComplex],
    fmt: FixedPointFormat,
    config: PipelineConfig = PipelineConfig(),
    reference: Sequence[complex] | None = None,
) -> DatapathReport:
    """Reduce a vector with a balanced fan-in adder tree.

    The input is padded with exact zeros to a full tree; each level groups
    `fanin` consecutive operands left to right and adds them sequentially.
    `reference` optionally supplies the exact complex values the inputs
    represent, for the error metric; it defaults to the dequantized inputs.

    Raises
    ------
    ValueError
        When the input is empty or stages exceeds the structural bound
        tree_depth + 2.
    """
    if len(values) == 0:
        raise ValueError("cannot reduce an empty vector")
    depth = tree_depth(len(values), config.fanin)
    if config.stages > depth + 2:
        raise ValueError(
            f"stages={config.stages} exceeds structural bound {depth + 2} "
            f"for length {len(values)} at fanin {config.fanin}"
        )
    counter = OverflowCounter()
    zero = FxComplex(0, 0)
    level = list(values)
    target = config.fanin**depth
    level = level + [zero] * (target - len(level))
    while len(level) > 1:
        nxt = []
        for i in range(0, len(level), config.fanin):
            acc = level[i]
            for j in range(i + 1, i + config.fanin):
                acc = fx_add(acc, level[j], fmt, counter)
            nxt.append(acc)
        level = nxt
    result = level[0]

    if reference is None:
        reference = [fx_to_complex(v, fmt) for v in values]
    exact = complex(sum(complex(r).real for r in reference), sum(complex(r).imag for r in reference))
    got = fx_to_complex(result, fmt)
    err = max(abs(got.real - exact.real), abs(got.imag - exact.imag))

    ii = 1 if config.stages >= depth else max(depth, 1)
    return DatapathReport(
        result=result,
        cycles_latency=config.stages + depth,
        initiation_interval=ii,
        throughput=1.0 / ii,
        max_abs_error=err,
        overflow_events=counter.events,
    )


def fx_inner_product(
    u: Sequence[FxComplex],
    v: Sequence[FxComplex],
    fmt: FixedPointFormat,
    config: PipelineConfig = PipelineConfig(),
    reference: Sequence[complex] | None = None,
) -> DatapathReport:
    """Pipelined inner product sum_k u_k * conj(v_k).

    Conjugation is an exact sign flip, products go through the
    four-multiplier complex multiplier, and the sum uses the fan-in tree.
    Overflow events from every stage are aggregated in the report.
    """
    counter = OverflowCounter()
    vc = [x.conj(fmt, counter) for x in v]
    prods = fx_hadamard(u, vc, fmt, counter)
    if reference is None:
        reference = [
            fx_to_complex(a, fmt) * fx_to_complex(b, fmt).conjugate() for a, b in zip(u, v)
        ]
    report = fx_tree_sum(prods, fmt, config, reference=reference)
    return DatapathReport(
        result=report.result,
        cycles_latency=report.cycles_latency,
        initiation_interval=report.initiation_interval,
        throughput=report.throughput,
        max_abs_error=report.max_abs_error,
        overflow_events=report.overflow_events + counter.events,
    )


def quantization_error_bound(length: int, fmt: FixedPointFormat) -> float:
    """Reduction error bound (ceil(log2 n) + 2) * 2^-frac_bits."""
    return (math.ceil(math.log2(max(2, length))) + 2) * fmt.resolution


def parse_format(text: str) -> FixedPointFormat:
    """Parse "W.F" (e.g. "18.12") into a FixedPointFormat."""
    parts = text.split(".")
    if len(parts) != 2:
        raise ValueError(f"format must look like '18.12', got {text!r}")
    try:
        word, frac = int(parts[0]), int(parts[1])
    except ValueError:
        raise ValueError(f"format must be two integers, got {text!r}") from None
    return FixedPointFormat(word_bits=word, frac_bits=frac)
