"""
Closed-form synchronization region of delay-coupled semipassive networks.

The region is {(gamma, tau): lambda2*gamma > gamma', tau < phi(gamma)}.
phi vanishes at gamma'/lambda2, peaks at gamma* with value tau*, and decays
to zero as gamma grows. tau* depends on the graph only through the quotient
q = lambda_k/lambda2.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize_scalar

# Relative tolerance for treating two quotients or two lambda2 values as equal
EQUAL_REL_TOL = 1e-9


@dataclass(frozen=True)
class SemipassiveConstants:
    """Constants (alpha, c0, c1, c2) of the semipassivity and convergence bounds."""

    alpha: float
    c0: float
    c1: float
    c2: float

    def __post_init__(self):
        for name in ('alpha', 'c0', 'c1', 'c2'):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class DerivedConstants:
    gamma_prime: float
    cbar1: float
    cbar2: float

    def to_dict(self) -> dict:
        return {'gamma_prime': self.gamma_prime, 'cbar1': self.cbar1, 'cbar2': self.cbar2}


@dataclass(frozen=True)
class SpectralPair:
    """Smallest nonzero and largest Laplacian eigenvalues."""

    lambda2: float
    lambda_k: float

    def __post_init__(self):
        if not (self.lambda2 > 0 and math.isfinite(self.lambda2)):
            raise ValueError(f"lambda2 must be strictly positive, got {self.lambda2}")
        if not math.isfinite(self.lambda_k) or self.lambda_k < self.lambda2 * (1.0 - EQUAL_REL_TOL):
            raise ValueError(f"lambda_k ({self.lambda_k}) must be >= lambda2 ({self.lambda2})")

    @property
    def quotient(self) -> float:
        return self.lambda_k / self.lambda2

    @classmethod
    def from_spectrum(cls, spectrum) -> 'SpectralPair':
        return cls(spectrum.lambda2, spectrum.lambda_k)


class PhiValue(NamedTuple):
    value: float
    below_domain: bool


class QuotientPrediction(NamedTuple):
    tau_order: str
    gamma_order: str
    case: str
    at_tau_max: bool


def derived_constants(c: SemipassiveConstants) -> DerivedConstants:
    """gamma' = (c0+c2)^2/(4 alpha) + c1, cbar1 = (2 alpha c1 + c0 c2 + c2^2)/c2^2, cbar2 = 2 alpha/c2^2."""
    c2_sq = c.c2 * c.c2
    return DerivedConstants(
        gamma_prime=(c.c0 + c.c2) ** 2 / (4.0 * c.alpha) + c.c1,
        cbar1=(2.0 * c.alpha * c.c1 + c.c0 * c.c2 + c2_sq) / c2_sq,
        cbar2=2.0 * c.alpha / c2_sq,
    )


def _phi_array(gamma, d: DerivedConstants, sp: SpectralPair) -> np.ndarray:
    gamma = np.asarray(gamma, dtype=float)
    a = d.cbar2 + d.cbar1 / (gamma * sp.lambda_k)
    b = 2.0 * d.cbar2 * (sp.lambda2 * gamma - d.gamma_prime) / (sp.lambda_k ** 2 * gamma * gamma)
    radicand = a * a + b
    with np.errstate(invalid='ignore'):
        # -a + sqrt(a^2 + b) without cancellation
        return np.where(radicand >= 0, b / (a + np.sqrt(np.abs(radicand))), np.nan)


def phi(gamma: float, d: DerivedConstants, sp: SpectralPair) -> PhiValue:
    """
    Delay bound phi(gamma) of the region.

    Values for lambda2*gamma < gamma' are negative and returned as-is with
    below_domain set.

    Raises:
        ValueError: If gamma <= 0
    """
    if not gamma > 0:
        raise ValueError(f"phi is defined for gamma > 0, got {gamma}")
    value = float(_phi_array(gamma, d, sp))
    return PhiValue(value, sp.lambda2 * gamma < d.gamma_prime)


def phi_curve(gammas, d: DerivedConstants, sp: SpectralPair) -> pd.DataFrame:
    """Tabulate phi over positive gammas as columns gamma, phi, below_domain."""
    gammas = np.asarray(gammas, dtype=float)
    if np.any(gammas <= 0):
        raise ValueError("phi_curve needs strictly positive gamma values")
    return pd.DataFrame({
        'gamma': gammas,
        'phi': _phi_array(gammas, d, sp),
        'below_domain': sp.lambda2 * gammas < d.gamma_prime,
    })


def _spectral_terms(d: DerivedConstants, sp: SpectralPair):
    l2, lk = sp.lambda2, sp.lambda_k
    inner = l2 * l2 + 2.0 * l2 * lk * d.cbar1 + 2.0 * lk * lk * d.cbar2 * d.gamma_prime
    return l2, lk, inner


def gamma_star(d: DerivedConstants, sp: SpectralPair) -> float:
    """Coupling strength that maximizes phi."""
    l2, lk, inner = _spectral_terms(d, sp)
    base = l2 + 2.0 * lk * d.cbar1
    root = math.sqrt(2.0 * d.cbar1 ** 2 * d.cbar2 * d.gamma_prime * inner)
    return (1.0 + l2 / base) * d.gamma_prime / l2 + root / (d.cbar2 * l2 * base)


def gamma_star_factored(d: DerivedConstants, sp: SpectralPair) -> float:
    """gamma* written as (gamma'/lambda2) * g(q); equal to gamma_star."""
    q = sp.quotient
    r = 1.0 / (1.0 + 2.0 * d.cbar1 * q)
    cg = d.cbar2 * d.gamma_prime
    return d.gamma_prime / sp.lambda2 * (
        1.0 + r + math.sqrt(1.0 + r * r + 2.0 * (d.cbar1 ** 2 - cg) * r / cg)
    )


def gamma_tilde(d: DerivedConstants, c: SemipassiveConstants, sp: SpectralPair) -> float:
    """
    The second critical point of phi, always negative.

    The numerator 2*cbar2*gamma' - cbar1^2 is evaluated in its sign-explicit
    form -4 alpha c1 (c0 c2 + alpha c1) / c2^4.
    """
    l2, lk, inner = _spectral_terms(d, sp)
    numerator = -4.0 * c.alpha * c.c1 * (c.c0 * c.c2 + c.alpha * c.c1) / c.c2 ** 4
    denominator = d.cbar2 * (l2 + d.cbar1 * lk) + d.cbar1 * math.sqrt(
        d.cbar2 * inner / (2.0 * d.gamma_prime)
    )
    return numerator / denominator


def gamma_tilde_direct(d: DerivedConstants, sp: SpectralPair) -> float:
    """gamma_tilde from the unrationalized root expression."""
    l2, lk, inner = _spectral_terms(d, sp)
    base = l2 + 2.0 * lk * d.cbar1
    root = math.sqrt(2.0 * d.cbar1 ** 2 * d.cbar2 * d.gamma_prime * inner)
    return (1.0 + l2 / base) * d.gamma_prime / l2 - root / (d.cbar2 * l2 * base)


def tau_star_from_quotient(d: DerivedConstants, q: float) -> float:
    """Maximum tolerable delay phi(gamma*) as a function of the quotient alone."""
    if not q >= 1.0 - EQUAL_REL_TOL:
        raise ValueError(f"The spectral quotient must be >= 1, got {q}")
    cg = d.cbar2 * d.gamma_prime
    root = math.sqrt(2.0 * cg + 4.0 * cg * d.cbar1 * q + (2.0 * cg * q) ** 2)
    return d.cbar2 / (q * (d.cbar1 + 2.0 * cg * q + root))


def tau_star(d: DerivedConstants, sp: SpectralPair) -> float:
    return tau_star_from_quotient(d, sp.quotient)


def tau_star_max(d: DerivedConstants) -> float:
    """Best-case delay tolerance, attained by graphs with q = 1."""
    return tau_star_from_quotient(d, 1.0)


def gamma_star_numeric(d: DerivedConstants, sp: SpectralPair) -> float:
    """Maximize phi numerically on its domain with scipy's bounded scalar search."""
    lower = d.gamma_prime / sp.lambda2
    upper = lower * (4.0 + 2.0 * d.cbar1 / math.sqrt(d.cbar2 * d.gamma_prime))
    result = minimize_scalar(
        lambda g: -float(_phi_array(g, d, sp)),
        bounds=(lower, upper),
        method='bounded',
        options={'xatol': 1e-12 * upper, 'maxiter': 1000},
    )
    if not result.success:
        raise RuntimeError(f"phi maximization failed: {result.message}")
    return float(result.x)


def in_region(
    gamma: float,
    tau: float,
    d: DerivedConstants,
    sp: SpectralPair,
    delta_bar: float | None = None,
    literal_threshold: bool = False,
) -> bool:
    """
    Membership of (gamma, tau) in the predicted synchronization region.

    The coupling threshold is lambda2*gamma > gamma'; literal_threshold=True
    uses gamma > gamma' instead. A supplied delta_bar adds gamma < delta_bar/2.
    """
    if gamma < 0 or tau < 0:
        raise ValueError(f"gamma and tau must be nonnegative, got ({gamma}, {tau})")

    threshold = gamma if literal_threshold else sp.lambda2 * gamma
    if not threshold > d.gamma_prime:
        return False
    if delta_bar is not None and not gamma < delta_bar / 2.0:
        return False
    return tau < phi(gamma, d, sp).value


def _equal(a: float, b: float) -> bool:
    return math.isclose(a, b, rel_tol=EQUAL_REL_TOL)


def quotient_compare(sp1: SpectralPair, sp2: SpectralPair) -> QuotientPrediction:
    """
    Predicted ordering of tau* and gamma* between two graphs.

    tau_order compares tau1* with tau2*: the larger quotient gives the smaller
    delay. gamma_order compares gamma1* with gamma2* and is only stated when
    the quotients or the lambda2 values coincide; otherwise 'incomparable'.
    """
    q1, q2 = sp1.quotient, sp2.quotient

    if _equal(q1, q2):
        tau_order = '='
    elif q1 > q2:
        tau_order = '<'
    else:
        tau_order = '>'

    if _equal(q1, q2):
        if _equal(sp1.lambda2, sp2.lambda2):
            gamma_order = '='
        elif sp1.lambda2 > sp2.lambda2:
            gamma_order = '<='
        else:
            gamma_order = '>='
    elif _equal(sp1.lambda2, sp2.lambda2):
        gamma_order = '<=' if q1 > q2 else '>='
    else:
        gamma_order = 'incomparable'

    at_tau_max = _equal(q1, 1.0) and _equal(q2, 1.0)
    if at_tau_max:
        case = 'best-case'
    elif tau_order == '=':
        case = 'equal-quotient'
    else:
        case = 'ordered'

    return QuotientPrediction(tau_order, gamma_order, case, at_tau_max)
