"""Concrete model geometries near the divisor at infinity.

A model geometry packages the complex dimension, the spectral model of the
divisor, the fiber-curvature weight kappa at the adapted gauge point, the
background potential Psi (series part plus an additive constant), and the
reference volume ratio.  The metric ansatz is

    omega = (n t)^{1/n} * omega_ref + (n t)^{-(n-1)/n} * W dlog||S||^2 ^ conj,

with t = -log||S||^2, so the top power satisfies the two-block identity
omega^n / omega_ref^n = n t + q with vertical weight q = e^t / kappa.

Constants of the form  rational + log(positive rational)  are kept exact as
pairs, so background normalization never leaves the exact layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Optional, Tuple

import numpy as np

from .divisor import SectionCoeff, SpectralDivisor, constants_only
from .forms import CHI_MODEL, Form11, ddbar_form, volume_quotient
from .series import FormalSeries, SeriesError


class GeometryError(ValueError):
    pass


class NormalizationError(GeometryError):
    pass


class PositivityError(GeometryError):
    pass


@dataclass(frozen=True)
class LogConstant:
    """An exact constant  q + log(a)  with rational q and positive rational a."""

    q: Fraction = Fraction(0)
    a: Fraction = Fraction(1)

    def __post_init__(self):
        if self.a <= 0:
            raise GeometryError("log argument must be positive")

    def is_zero(self) -> bool:
        return self.q == 0 and self.a == 1

    def value(self) -> float:
        return float(self.q) + math.log(float(self.a))

    def __repr__(self):
        return f"{self.q}+log({self.a})"


@dataclass(frozen=True)
class ModelGeometry:
    """Background data for the metric construction near the divisor.

    ``ref_volume`` is the ratio of the reference Kahler volume to the
    curvature-form volume, as a series 1 + corrections whose constant
    coefficient must be strictly positive.  ``psi_series`` holds the
    non-constant part of the background potential; ``psi_const`` its
    additive constant.  ``f0_declared`` optionally overrides the derived
    initial residual (scenario seeds).  ``jet_bounds`` are the declared
    adapted-frame magnitudes of the base-metric jets used by the curvature
    estimates (order 2 = base curvature scale, then one per extra
    derivative).
    """

    n: int
    divisor: SpectralDivisor
    kappa: Fraction = Fraction(1)
    psi_series: Optional[FormalSeries] = None
    psi_const: LogConstant = LogConstant()
    ref_volume: Optional[FormalSeries] = None
    delta: float = 0.1
    f0_declared: Optional[FormalSeries] = None
    jet_bounds: Tuple[float, ...] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.n < 1:
            raise GeometryError("complex dimension must be at least 1")
        if not (0 < self.delta < 1):
            raise GeometryError("the neighborhood radius must lie in (0, 1)")
        if self.kappa <= 0:
            raise GeometryError("the fiber curvature weight must be positive")

    # -- derived pieces ----------------------------------------------------

    def _psi(self) -> FormalSeries:
        if self.psi_series is None:
            return FormalSeries.zero(self.divisor)
        return self.psi_series

    def _ref(self) -> FormalSeries:
        if self.ref_volume is None:
            return FormalSeries.unit(self.divisor)
        return self.ref_volume

    def ref_constant(self) -> Fraction:
        """Constant-mode value of the reference volume ratio on the divisor."""
        ref = self._ref()
        c0 = ref.coeff(0, 0, 0)
        u = self.divisor.unit_index
        for k, comp in enumerate(c0.coeffs):
            if k != u and not comp.is_zero():
                raise NormalizationError(
                    f"reference volume has a nonconstant boundary mode (index {k}); "
                    "the initial residual does not limit to a constant"
                )
        val = c0.coeffs[u]
        if not val.is_real():
            raise NormalizationError("reference volume constant must be real")
        if val.re <= 0:
            raise GeometryError("reference volume constant must be positive")
        return val.re

    def f0_constant(self) -> LogConstant:
        """Exact constant part of the initial residual."""
        r0 = self.ref_constant()
        return LogConstant(-self.psi_const.q, self.kappa * r0 / self.psi_const.a)

    def f0_series(self, trunc: int) -> FormalSeries:
        """The initial residual as a series through modulus degree ``trunc``.

        Raises unless the geometry is normalized (zero constant part); the
        constant is an exact rational-log pair and cannot be folded into a
        rational series coefficient.
        """
        if self.f0_declared is not None:
            out = self.f0_declared.truncate(trunc)
            out.validate_scalar()
            out.validate_bounded_expansion(min_order=1)
            return out
        if not self.f0_constant().is_zero():
            raise NormalizationError(
                "geometry is not normalized: the initial residual has constant "
                f"part {self.f0_constant()}; call normalize_background first"
            )
        div = self.divisor
        ref = self._ref().truncate(trunc)
        r0 = self.ref_constant()
        corr = ref.sub(FormalSeries.monomial(div, 0, 0, 0, r0)).scale(
            Fraction(1, 1) / r0
        )
        corr = FormalSeries(div, corr.terms, trunc)
        out = corr.log1p_expand()
        # -log(1 + (n t) * kappa * S conj(S)): the vertical weight correction
        vert = FormalSeries.monomial(div, 1, 1, 1, self.n * self.kappa, trunc)
        out = out.sub(vert.log1p_expand())
        out = out.sub(self._psi().truncate(trunc))
        out.validate_scalar()
        return out


def normalize_background(geometry: ModelGeometry) -> ModelGeometry:
    """Adjust the additive constant of Psi so the initial residual limits to zero.

    Requires the reference data to limit to a constant on the divisor
    (compatibility of the prescribed curvature form with the divisor
    metric); a nonconstant boundary mode raises ``NormalizationError``
    naming the offending eigenmode.
    """
    r0 = geometry.ref_constant()
    return replace(geometry, psi_const=LogConstant(Fraction(0), geometry.kappa * r0))


def radial_blocks(geometry: ModelGeometry, t: np.ndarray, phi=None):
    """Base and fiber coefficients of the metric form on a radial grid.

    ``phi``, when given, is a callable returning (phi, phi', phi'') at t.
    Returns ``(p, q)`` with p the base-direction coefficient and q the
    fiber-direction coefficient relative to the reference frame; both must
    be positive for the form to be a metric.
    """
    n = geometry.n
    kappa = float(geometry.kappa)
    t = np.asarray(t, dtype=float)
    if phi is None:
        ph = dph = ddph = np.zeros_like(t)
    else:
        ph, dph, ddph = phi(t)
    tphi = t + ph
    if np.any(tphi <= 0):
        raise PositivityError("the shifted radial coordinate left the cone t > 0")
    gp = (n * tphi) ** (1.0 / n)
    gpp = (n * tphi) ** ((1.0 - n) / n)
    # W ddbar F(t) = F'(t) * omega_ref + F''(t) * W dt ^ conj(dt); the raw
    # fiber component of W dt ^ conj(dt) is e^t at the gauge point
    vert = np.exp(t)
    p = gp * (1.0 + dph)
    q = kappa * gp * (1.0 + dph) + (gp * ddph + gpp * (1.0 + dph) ** 2) * vert
    return p, q


def omega_phi_decompose(geometry: ModelGeometry, phi: FormalSeries, grid=None):
    """Decompose the rescaled metric form into its two scalar profiles.

    Returns ``(A, B, correction)`` where A(t) = (n t_phi)^{1/n} multiplies
    the rescaled curvature form, B(t) = (n t_phi)^{-(n-1)/n} the vertical
    direction, and ``correction`` is the series-level (1,1)-form induced by
    the rescaling potential.  The positivity radius is scanned on a
    log-spaced grid; on failure the error reports the largest admissible
    radius.
    """
    if not phi.is_zero():
        if not phi.is_real():
            raise SeriesError("the rescaling potential must be real")
        if (phi.order_of_vanishing() or 1) < 1:
            raise SeriesError("the rescaling potential must vanish on the divisor")
    n = geometry.n
    if grid is None:
        grid = np.linspace(2.0, 80.0, 512)
    t = np.asarray(grid, dtype=float)
    phi_fn = _radial_callable(phi)
    p, q = radial_blocks(geometry, t, phi_fn)
    ok = (p > 0) & (q > 0)
    if not np.all(ok):
        t_bad = t[~ok].min()
        good = t[t > t_bad]
        delta_max = math.exp(-good.min() / 2.0) * 0.9 if good.size else 0.0
        raise PositivityError(
            f"metric form loses positivity at t = {t_bad:g}; largest "
            f"admissible radius ~ {delta_max:.3g}"
        )
    def A(s):
        s = np.asarray(s, dtype=float)
        return (n * (s + phi_fn(s)[0])) ** (1.0 / n)

    def B(s):
        s = np.asarray(s, dtype=float)
        return (n * (s + phi_fn(s)[0])) ** (-(n - 1.0) / n)

    correction = ddbar_form(phi) if not phi.is_zero() else Form11.zero(geometry.divisor)
    return A, B, correction


def _radial_callable(phi: FormalSeries):
    """Radial evaluation of a series: S^i conj(S)^j -> e^{-(i+j)t/2}, modes -> 1.

    Returns a callable giving (value, d/dt, d2/dt2) on an array of t.
    """
    items = []
    for (i, j, l), coef in phi.terms.items():
        val = complex(sum((complex(c) for c in coef.coeffs), 0j))
        items.append((i + j, l, val))

    def fn(t):
        t = np.asarray(t, dtype=float)
        v = np.zeros_like(t)
        dv = np.zeros_like(t)
        ddv = np.zeros_like(t)
        for k, l, val in items:
            base = np.exp(-0.5 * k * t) * np.real(val)
            tl = t**l
            dtl = l * t ** (l - 1) if l else np.zeros_like(t)
            ddtl = l * (l - 1) * t ** (l - 2) if l >= 2 else np.zeros_like(t)
            v += base * tl
            dv += base * (dtl - 0.5 * k * tl)
            ddv += base * (ddtl - k * dtl + 0.25 * k * k * tl)
        return v, dv, ddv

    return fn


def f_phi_compute(geometry: ModelGeometry, phi: FormalSeries, f_current: FormalSeries,
                  trunc: int, mode: str = CHI_MODEL) -> FormalSeries:
    """Residual after rescaling the hermitian metric by exp(-phi/2).

    Computes  f_phi = f - log(omega_phi^n / omega^n)  through degree
    ``trunc`` by direct expansion of the volume quotient followed by the
    log expansion; no closed-form shortcut is taken.
    """
    quotient = volume_quotient(geometry.n, geometry.kappa, phi, trunc, mode=mode)
    x = quotient.sub(FormalSeries.unit(geometry.divisor, trunc))
    return f_current.truncate(trunc).sub(x.log1p_expand())


def default_geometry(n: int, m_target: int = 0, divisor: Optional[SpectralDivisor] = None,
                     kappa=Fraction(1)) -> ModelGeometry:
    """A normalized geometry with trivial reference data."""
    div = divisor if divisor is not None else constants_only()
    g = ModelGeometry(n=n, divisor=div, kappa=Fraction(kappa))
    return normalize_background(g)
