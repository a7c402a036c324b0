"""Finite spectral model of sections over the divisor at infinity.

Sections of the twisted bundles over the divisor are represented by their
coordinates in a fixed finite eigenbasis of the divisor Laplacian.  The
model declares

* a nondecreasing list of rational eigenvalues (index 0 is the constant
  mode and must carry the multiplicative unit),
* a commutative, associative product table for the basis elements.

Two modes are provided.  ``constants_only`` is the default: a single
constant mode with eigenvalue 0 and scalar multiplication, which models
rotationally symmetric geometries.  ``finite_spectral`` permits several
modes; products of non-constant modes default to zero (a nilpotent
truncation of the function algebra), which keeps the table associative.

Eigenvalues of either sign are accepted.  The geometric operator is
nonnegative, which makes the shifted solves of the inductive construction
invertible at every order; allowing signed spectra keeps the kernel /
obstruction machinery exercisable at desk scale.  The nonneg-spectrum case
is the faithful one and is what the shipped scenarios use unless a kernel
is deliberately staged.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence, Tuple

from .rationals import GQ_ONE, GQ_ZERO, GaussianRational, gq


class DivisorModelError(ValueError):
    """Raised for inconsistent spectral-model data."""


class ContextMismatchError(ValueError):
    """Raised when combining objects built over different spectral models."""


class SpectralDivisor:
    """Finite eigenbasis model of the divisor Laplacian and its section algebra.

    Parameters
    ----------
    eigenvalues : sequence of Fraction
        Nondecreasing.  Index 0 must be the constant mode; its product
        behaviour is that of the unit.
    product_table : nested sequence, optional
        ``product_table[a][b][c]`` is the coefficient of basis mode ``c``
        in the product of modes ``a`` and ``b``.  Defaults to the nilpotent
        truncation: ``e_0`` acts as unit, ``e_a * e_b = 0`` for a, b >= 1.
    """

    def __init__(self, eigenvalues: Sequence, product_table=None, unit_index: int = None):
        eigs = tuple(Fraction(e) for e in eigenvalues)
        if not eigs:
            raise DivisorModelError("at least one eigenmode is required")
        if any(eigs[i] > eigs[i + 1] for i in range(len(eigs) - 1)):
            raise DivisorModelError("eigenvalues must be nondecreasing")
        self.eigenvalues: Tuple[Fraction, ...] = eigs
        self.dim = len(eigs)
        if unit_index is None:
            # the constant mode carries the unit; default to the first zero
            # eigenvalue, falling back to index 0
            zero_modes = [k for k, e in enumerate(eigs) if e == 0]
            unit_index = zero_modes[0] if zero_modes else 0
        if not 0 <= unit_index < self.dim:
            raise DivisorModelError("unit index out of range")
        self.unit_index = unit_index
        if product_table is None:
            product_table = self._default_table(self.dim, unit_index)
        self.table = tuple(
            tuple(tuple(gq(c) for c in row) for row in block)
            for block in product_table
        )
        self._check_table()

    @property
    def mode(self) -> str:
        return "ConstantsOnly" if self.dim == 1 else "FiniteSpectral"

    @staticmethod
    def _default_table(dim, unit):
        table = []
        for a in range(dim):
            block = []
            for b in range(dim):
                row = [0] * dim
                if a == unit:
                    row[b] = 1
                elif b == unit:
                    row[a] = 1
                block.append(row)
            table.append(block)
        return table

    def _check_table(self):
        d = self.dim
        t = self.table
        if len(t) != d or any(len(b) != d for b in t) or any(
            len(r) != d for b in t for r in b
        ):
            raise DivisorModelError("product table has wrong shape")
        if self.dim == 1 and self.eigenvalues[0] != 0:
            raise DivisorModelError("constants-only model must have eigenvalue 0")
        u = self.unit_index
        for a in range(d):
            for c in range(d):
                want = GQ_ONE if a == c else GQ_ZERO
                if t[u][a][c] != want or t[a][u][c] != want:
                    raise DivisorModelError("the unit mode must act as the identity")
        # commutativity
        for a in range(d):
            for b in range(a + 1, d):
                if t[a][b] != t[b][a]:
                    raise DivisorModelError("product table is not commutative")
        # associativity, checked exhaustively on the basis
        for a in range(d):
            for b in range(d):
                for c in range(d):
                    left = [GQ_ZERO] * d
                    for e in range(d):
                        coef = t[a][b][e]
                        if coef.is_zero():
                            continue
                        for f in range(d):
                            left[f] = left[f] + coef * t[e][c][f]
                    right = [GQ_ZERO] * d
                    for e in range(d):
                        coef = t[b][c][e]
                        if coef.is_zero():
                            continue
                        for f in range(d):
                            right[f] = right[f] + t[a][e][f] * coef
                    if left != right:
                        raise DivisorModelError("product table is not associative")

    def __eq__(self, other):
        return (
            isinstance(other, SpectralDivisor)
            and self.eigenvalues == other.eigenvalues
            and self.unit_index == other.unit_index
            and self.table == other.table
        )

    def __hash__(self):
        return hash(self.eigenvalues)

    def __repr__(self):
        return f"SpectralDivisor(mode={self.mode}, eigenvalues={self.eigenvalues})"


def constants_only() -> SpectralDivisor:
    """The default one-mode model: basis {1}, Laplacian 0."""
    return SpectralDivisor([Fraction(0)])


@dataclass(frozen=True)
class SectionCoeff:
    """Element of the section space at a fixed bidegree.

    ``bidegree = (i, j)`` records which twisted bundle the section lives
    in; products add bidegrees and conjugation swaps them.  ``coeffs`` is
    the coordinate vector in the model eigenbasis.
    """

    divisor: SpectralDivisor
    bidegree: Tuple[int, int]
    coeffs: Tuple[GaussianRational, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.divisor.dim:
            raise DivisorModelError(
                "coefficient vector length does not match the basis size"
            )

    # -- constructors ----------------------------------------------------

    @staticmethod
    def from_scalar(divisor: SpectralDivisor, value, bidegree=(0, 0)) -> "SectionCoeff":
        vec = [GQ_ZERO] * divisor.dim
        vec[divisor.unit_index] = gq(value)
        return SectionCoeff(divisor, tuple(bidegree), tuple(vec))

    @staticmethod
    def from_vector(divisor: SpectralDivisor, values, bidegree=(0, 0)) -> "SectionCoeff":
        vec = tuple(gq(v) for v in values)
        return SectionCoeff(divisor, tuple(bidegree), vec)

    @staticmethod
    def zero(divisor: SpectralDivisor, bidegree=(0, 0)) -> "SectionCoeff":
        return SectionCoeff(divisor, tuple(bidegree), (GQ_ZERO,) * divisor.dim)

    # -- algebra ---------------------------------------------------------

    def _require_same_context(self, other: "SectionCoeff"):
        if self.divisor != other.divisor:
            raise ContextMismatchError("sections live over different spectral models")

    def add(self, other: "SectionCoeff") -> "SectionCoeff":
        self._require_same_context(other)
        if self.bidegree != other.bidegree:
            raise DivisorModelError("cannot add sections of different bidegrees")
        return SectionCoeff(
            self.divisor,
            self.bidegree,
            tuple(a + b for a, b in zip(self.coeffs, other.coeffs)),
        )

    def scale(self, s) -> "SectionCoeff":
        s = gq(s)
        return SectionCoeff(self.divisor, self.bidegree, tuple(s * c for c in self.coeffs))

    def mul(self, other: "SectionCoeff") -> "SectionCoeff":
        self._require_same_context(other)
        d = self.divisor.dim
        t = self.divisor.table
        out = [GQ_ZERO] * d
        for a, ca in enumerate(self.coeffs):
            if ca.is_zero():
                continue
            for b, cb in enumerate(other.coeffs):
                if cb.is_zero():
                    continue
                cab = ca * cb
                for c in range(d):
                    tc = t[a][b][c]
                    if not tc.is_zero():
                        out[c] = out[c] + cab * tc
        bid = (self.bidegree[0] + other.bidegree[0], self.bidegree[1] + other.bidegree[1])
        return SectionCoeff(self.divisor, bid, tuple(out))

    def conj(self) -> "SectionCoeff":
        return SectionCoeff(
            self.divisor,
            (self.bidegree[1], self.bidegree[0]),
            tuple(c.conjugate() for c in self.coeffs),
        )

    def laplacian(self) -> "SectionCoeff":
        """Diagonal action of the model operator: mode k scales by its eigenvalue."""
        return SectionCoeff(
            self.divisor,
            self.bidegree,
            tuple(gq(lam) * c for lam, c in zip(self.divisor.eigenvalues, self.coeffs)),
        )

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def __repr__(self):
        return f"SectionCoeff({self.bidegree}, {list(self.coeffs)})"


def laplacian_apply(v: SectionCoeff) -> SectionCoeff:
    return v.laplacian()


def shifted_solve(divisor: SpectralDivisor, c, v: SectionCoeff):
    """Solve (Laplacian + c) theta = v on the complement of the kernel.

    Returns ``(theta, v_kernel)``.  ``theta`` solves the equation exactly on
    the modes with eigenvalue + c != 0 (exact rational comparison), and is
    zero on the kernel modes; ``v_kernel`` is the kernel component of ``v``.
    Kernel obstructions are returned, never raised: the caller decides how
    to handle them.
    """
    if v.divisor != divisor:
        raise ContextMismatchError("section does not belong to this spectral model")
    c = Fraction(c)
    theta = []
    kernel = []
    for lam, coef in zip(divisor.eigenvalues, v.coeffs):
        shift = lam + c
        if shift == 0:
            theta.append(GQ_ZERO)
            kernel.append(coef)
        else:
            theta.append(coef / gq(Fraction(shift)))
            kernel.append(GQ_ZERO)
    return (
        SectionCoeff(divisor, v.bidegree, tuple(theta)),
        SectionCoeff(divisor, v.bidegree, tuple(kernel)),
    )
