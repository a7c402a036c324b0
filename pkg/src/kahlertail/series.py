"""Truncated bigraded series in S, conj(S) and V = -log||S||^2.

A series is a finite sum of terms

    S^i * conj(S)^j * theta_{ij} * V^l,       V := -log||S||^2,

with section-valued coefficients ``theta_{ij}`` from a finite spectral
model of the divisor.  The modulus grading is by i + j (|S^i conj(S)^j| ~
||S||^{i+j}); truncation drops keys with i + j above the truncation order.
Negative i or j is permitted (barrier constructions use j = -1); i + j >= 0
is required for any series claimed to be bounded.  Log exponents are
integers; negative log exponents occur in intermediate expansion work (the
geometric expansion of 1/V-weighted denominators) and are rejected by the
bounded-expansion validator.

Coefficient arithmetic is exact (Gaussian rationals); two series are equal
iff their term maps are identical.
"""

from __future__ import annotations

from typing import Dict, Iterable, Optional, Tuple

from .divisor import ContextMismatchError, SectionCoeff, SpectralDivisor
from .rationals import gq

Key = Tuple[int, int, int]


class SeriesError(ValueError):
    pass


class LogDepthOverflowError(SeriesError):
    """A bounded expansion exceeded its admissible log depth."""


def _min_trunc(a: Optional[int], b: Optional[int]) -> Optional[int]:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class FormalSeries:
    """Finite map (i, j, l) -> SectionCoeff with exact arithmetic.

    ``truncation_order`` is the largest modulus degree i + j whose terms
    are meaningful; ``None`` marks an exact (untruncated) series such as a
    monomial.  Multiplication propagates truncation conservatively: a
    factor known through degree N and another of leading degree d yields a
    product known through N + d.
    """

    __slots__ = ("divisor", "terms", "truncation_order")

    def __init__(
        self,
        divisor: SpectralDivisor,
        terms: Optional[Dict[Key, SectionCoeff]] = None,
        truncation_order: Optional[int] = None,
    ):
        self.divisor = divisor
        self.truncation_order = truncation_order
        clean: Dict[Key, SectionCoeff] = {}
        if terms:
            for key, coef in terms.items():
                i, j, l = key
                if coef.divisor != divisor:
                    raise ContextMismatchError(
                        "coefficient belongs to a different spectral model"
                    )
                if truncation_order is not None and i + j > truncation_order:
                    continue
                if not coef.is_zero():
                    clean[key] = coef
        self.terms = clean

    # -- constructors ----------------------------------------------------

    @staticmethod
    def zero(divisor: SpectralDivisor, truncation_order: Optional[int] = None):
        return FormalSeries(divisor, {}, truncation_order)

    @staticmethod
    def unit(divisor: SpectralDivisor, truncation_order: Optional[int] = None):
        return FormalSeries.monomial(divisor, 0, 0, 0, 1, truncation_order)

    @staticmethod
    def monomial(
        divisor: SpectralDivisor,
        i: int,
        j: int,
        l: int,
        value=1,
        truncation_order: Optional[int] = None,
    ):
        """The term S^i conj(S)^j V^l times a constant-mode scalar."""
        coef = SectionCoeff.from_scalar(divisor, value, (i, j))
        return FormalSeries(divisor, {(i, j, l): coef}, truncation_order)

    @staticmethod
    def from_section(
        divisor: SpectralDivisor,
        i: int,
        j: int,
        l: int,
        section: SectionCoeff,
        truncation_order: Optional[int] = None,
    ):
        if section.bidegree != (i, j):
            section = SectionCoeff(divisor, (i, j), section.coeffs)
        return FormalSeries(divisor, {(i, j, l): section}, truncation_order)

    # -- basic queries -----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def coeff(self, i: int, j: int, l: int) -> SectionCoeff:
        return self.terms.get((i, j, l)) or SectionCoeff.zero(self.divisor, (i, j))

    def keys(self) -> Iterable[Key]:
        return self.terms.keys()

    def order_of_vanishing(self) -> Optional[int]:
        """Smallest i + j over nonzero terms; None for the zero series."""
        if not self.terms:
            return None
        return min(i + j for (i, j, _) in self.terms)

    def max_log_power(self) -> int:
        return max((l for (_, _, l) in self.terms), default=0)

    def log_depth_table(self) -> Dict[int, int]:
        """Map from modulus degree k to the largest log power at that degree."""
        table: Dict[int, int] = {}
        for (i, j, l) in self.terms:
            k = i + j
            table[k] = max(table.get(k, 0), l)
        return table

    def conj(self) -> "FormalSeries":
        out = {}
        for (i, j, l), coef in self.terms.items():
            out[(j, i, l)] = coef.conj()
        return FormalSeries(self.divisor, out, self.truncation_order)

    def is_real(self) -> bool:
        return self.terms == self.conj().terms

    # -- arithmetic --------------------------------------------------------

    def _require_same_context(self, other: "FormalSeries"):
        if self.divisor != other.divisor:
            raise ContextMismatchError("series live over different spectral models")

    def add(self, other: "FormalSeries") -> "FormalSeries":
        self._require_same_context(other)
        trunc = _min_trunc(self.truncation_order, other.truncation_order)
        out = dict(self.terms)
        for key, coef in other.terms.items():
            if key in out:
                out[key] = out[key].add(coef)
            else:
                out[key] = coef
        return FormalSeries(self.divisor, out, trunc)

    def sub(self, other: "FormalSeries") -> "FormalSeries":
        return self.add(other.neg())

    def neg(self) -> "FormalSeries":
        return self.scale(-1)

    def scale(self, s) -> "FormalSeries":
        s = gq(s)
        if s.is_zero():
            return FormalSeries.zero(self.divisor, self.truncation_order)
        out = {key: coef.scale(s) for key, coef in self.terms.items()}
        return FormalSeries(self.divisor, out, self.truncation_order)

    def shift(self, di: int, dj: int, dl: int) -> "FormalSeries":
        """Multiply by the exact monomial S^di conj(S)^dj V^dl."""
        out = {}
        for (i, j, l), coef in self.terms.items():
            out[(i + di, j + dj, l + dl)] = SectionCoeff(
                self.divisor, (i + di, j + dj), coef.coeffs
            )
        trunc = self.truncation_order
        if trunc is not None:
            trunc += di + dj
        return FormalSeries(self.divisor, out, trunc)

    def mul(self, other: "FormalSeries") -> "FormalSeries":
        self._require_same_context(other)
        ord_a = self.order_of_vanishing()
        ord_b = other.order_of_vanishing()
        if ord_a is None or ord_b is None:
            return FormalSeries.zero(
                self.divisor, _min_trunc(self.truncation_order, other.truncation_order)
            )
        trunc_candidates = []
        if self.truncation_order is not None:
            trunc_candidates.append(self.truncation_order + ord_b)
        if other.truncation_order is not None:
            trunc_candidates.append(other.truncation_order + ord_a)
        trunc = min(trunc_candidates) if trunc_candidates else None
        out: Dict[Key, SectionCoeff] = {}
        for (ia, ja, la), ca in self.terms.items():
            for (ib, jb, lb), cb in other.terms.items():
                i, j, l = ia + ib, ja + jb, la + lb
                if trunc is not None and i + j > trunc:
                    continue
                prod = ca.mul(cb)
                key = (i, j, l)
                if key in out:
                    out[key] = out[key].add(prod)
                else:
                    out[key] = prod
        return FormalSeries(self.divisor, out, trunc)

    def power(self, p: int) -> "FormalSeries":
        if p < 0:
            raise SeriesError("negative powers are not defined; expand geometrically")
        result = FormalSeries.unit(self.divisor, self.truncation_order)
        base = self
        while p:
            if p & 1:
                result = result.mul(base)
            base = base.mul(base) if p > 1 else base
            p >>= 1
        return result

    def truncate(self, order: int) -> "FormalSeries":
        out = {k: c for k, c in self.terms.items() if k[0] + k[1] <= order}
        trunc = order if self.truncation_order is None else min(order, self.truncation_order)
        return FormalSeries(self.divisor, out, trunc)

    def drop_log_below(self, lmin: int) -> "FormalSeries":
        out = {k: c for k, c in self.terms.items() if k[2] >= lmin}
        return FormalSeries(self.divisor, out, self.truncation_order)

    # -- functional expansions ----------------------------------------------

    def log1p_expand(self) -> "FormalSeries":
        """log(1 + x) = x - x^2/2 + x^3/3 - ... truncated at the series order.

        Requires order of vanishing >= 1 (no terms at modulus degree <= 0,
        in particular no constant term).
        """
        if self.is_zero():
            return self
        ordx = self.order_of_vanishing()
        if ordx is None or ordx < 1:
            raise SeriesError("log1p_expand requires a series vanishing on the divisor")
        n = self.truncation_order
        if n is None:
            raise SeriesError("log1p_expand needs a finite truncation order")
        pmax = n // ordx
        out = FormalSeries.zero(self.divisor, n)
        xp = FormalSeries.unit(self.divisor)
        for p in range(1, pmax + 1):
            xp = xp.mul(self)
            from fractions import Fraction as _F

            coef = gq(_F((-1) ** (p + 1), p))
            out = out.add(xp.scale(coef))
        return out.truncate(n)

    def geometric_inverse(self) -> "FormalSeries":
        """1 / (1 + x) = 1 - x + x^2 - ..., for x with order of vanishing >= 1."""
        ordx = self.order_of_vanishing()
        if ordx is not None and ordx < 1:
            raise SeriesError("geometric_inverse requires a series vanishing on the divisor")
        n = self.truncation_order
        if n is None:
            raise SeriesError("geometric_inverse needs a finite truncation order")
        out = FormalSeries.unit(self.divisor, n)
        if self.is_zero():
            return out
        xp = FormalSeries.unit(self.divisor)
        pmax = n // ordx
        for p in range(1, pmax + 1):
            xp = xp.mul(self)
            out = out.add(xp.scale((-1) ** p))
        return out.truncate(n)

    # -- validation ---------------------------------------------------------

    def validate_scalar(self):
        """Check that every coefficient bidegree matches its monomial key.

        A series represents a scalar function exactly when the section at
        key (i, j, l) pairs tautologically with S^i conj(S)^j, i.e. carries
        bidegree (i, j).  Intermediate expansion objects (letter
        multipliers) legitimately violate this; public residuals, rescaling
        potentials and quotients must satisfy it.
        """
        for (i, j, _), coef in self.terms.items():
            if coef.bidegree != (i, j):
                raise SeriesError(
                    f"coefficient bidegree {coef.bidegree} does not match key {(i, j)}"
                )
        return True

    def validate_bounded_expansion(self, min_order: int = 0, log_cap_slack: int = 1):
        """Check the invariants of a bounded residual expansion.

        Every key must satisfy i + j >= min_order, have a nonnegative log
        exponent, carry no pure log terms at modulus degree zero, and stay
        within the log-depth bound l <= i + j + log_cap_slack.
        """
        for (i, j, l) in self.terms:
            if i + j < min_order:
                raise SeriesError(
                    f"term at ({i},{j}) violates the minimum order {min_order}"
                )
            if l < 0:
                raise SeriesError(f"negative log exponent at key {(i, j, l)}")
            if i + j == 0 and l != 0:
                raise SeriesError("pure log term at modulus degree zero")
            if l > i + j + log_cap_slack:
                raise LogDepthOverflowError(
                    f"log depth {l} exceeds the cap {i + j + log_cap_slack} at degree {i + j}"
                )
        return True

    # -- misc ---------------------------------------------------------------

    def __eq__(self, other):
        return (
            isinstance(other, FormalSeries)
            and self.divisor == other.divisor
            and self.terms == other.terms
        )

    def __repr__(self):
        if not self.terms:
            return "FormalSeries(0)"
        bits = []
        for key in sorted(self.terms):
            bits.append(f"{key}:{self.terms[key]}")
        return "FormalSeries(" + ", ".join(bits) + f"; N={self.truncation_order})"


def real_pair(
    divisor: SpectralDivisor,
    i: int,
    j: int,
    l: int,
    theta: SectionCoeff,
    truncation_order: Optional[int] = None,
) -> FormalSeries:
    """S^i conj(S)^j theta V^l plus its conjugate (a real series)."""
    if theta.bidegree != (i, j):
        theta = SectionCoeff(divisor, (i, j), theta.coeffs)
    a = FormalSeries.from_section(divisor, i, j, l, theta, truncation_order)
    return a.add(a.conj())
