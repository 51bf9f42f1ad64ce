"""Closed-form scaling windows and coupling constants.

Everything here is a pure function of its arguments.  The admissible
confinement strengths for a given particle number are

    C1 * N**v1(beta)  <=  omega  <=  C2 * N**v2(beta)

for the dynamics, and the wider ``vE`` upper exponent when only the energy
estimate is needed.  One of the four terms of ``v2`` is an exclusive bound;
which term binds is reported rather than hidden inside an epsilon.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import DomainError, PreconditionError

BETA_MAX = 3.0 / 7.0

#: Explicit sentinel for the ``beta < 1/5`` branch of the second term.
INFINITY = math.inf

V2_TERM_NAMES = ("(1-b)/b", "(3/5-b)/(b-1/5)", "2b/(1-2b)-", "(7/8-b)/b")


def _check_beta(beta: float) -> float:
    beta = float(beta)
    if not (0.0 < beta < BETA_MAX):
        raise DomainError(f"beta must lie in (0, 3/7), got {beta!r}")
    return beta


def v1(beta: float) -> float:
    """Lower window exponent ``beta / (1 - beta)``."""
    beta = _check_beta(beta)
    return beta / (1.0 - beta)


def v2_terms(beta: float) -> tuple[float, float, float, float]:
    """The four candidates whose minimum is ``v2``.

    The second term is :data:`INFINITY` for ``beta <= 1/5``; the third term
    is the exclusive one.
    """
    beta = _check_beta(beta)
    t1 = (1.0 - beta) / beta
    t2 = (0.6 - beta) / (beta - 0.2) if beta > 0.2 else INFINITY
    t3 = 2.0 * beta / (1.0 - 2.0 * beta)
    t4 = (0.875 - beta) / beta
    return t1, t2, t3, t4


@dataclass(frozen=True)
class Exponent:
    value: float
    strict: bool
    binding: str


def v2(beta: float) -> Exponent:
    """Upper window exponent for the dynamics.

    Returns the minimum together with a flag that is ``True`` when the
    exclusive term ``2b/(1-2b)`` attains the minimum, in which case the
    window's upper end is open.
    """
    terms = v2_terms(beta)
    value = min(terms)
    idx = int(np.argmin(terms))
    strict = terms[2] == value
    if strict:
        idx = 2
    return Exponent(value, strict, V2_TERM_NAMES[idx])


def vE(beta: float) -> float:
    """Upper exponent sufficient for the energy estimate alone."""
    t1, t2, _, t4 = v2_terms(beta)
    return min(t1, t2, t4)


@dataclass(frozen=True)
class ScalingExponents:
    beta: float
    v1: float
    v2_value: float
    v2_strict: bool
    vE_value: float


def scaling_exponents(beta: float) -> ScalingExponents:
    e2 = v2(beta)
    return ScalingExponents(beta, v1(beta), e2.value, e2.strict, vE(beta))


@dataclass(frozen=True)
class OmegaWindow:
    """Interval of admissible omega for one particle number.

    ``upper_open`` marks an exclusive upper end.
    """

    lower: float
    upper: float
    upper_open: bool
    mode: str
    v1: float
    v_upper: float

    @property
    def empty(self) -> bool:
        if self.lower > self.upper:
            return True
        return self.lower == self.upper and self.upper_open

    def __contains__(self, omega: float) -> bool:
        # closed ends absorb rounding in N ** v (e.g. 2 ** 1 computed as 1.999...)
        slack = 1e-12 * max(1.0, abs(omega))
        if omega < self.lower - slack:
            return False
        if self.upper_open:
            return omega < self.upper - slack
        return omega <= self.upper + slack

    def geometric_middle(self) -> float:
        return math.sqrt(self.lower * self.upper)


def omega_window(
    beta: float,
    N: int,
    C1: float = 1.0,
    C2: float = 1.0,
    mode: Literal["dynamics", "energy-only"] = "dynamics",
) -> OmegaWindow:
    """Window ``[C1 N^v1, C2 N^vu]`` with ``vu = v2`` or ``vE`` by ``mode``."""
    if N < 2:
        raise PreconditionError(f"N must be >= 2, got {N}")
    if C1 <= 0 or C2 <= 0:
        raise PreconditionError("C1 and C2 must be positive")
    lo_exp = v1(beta)
    if mode == "dynamics":
        e2 = v2(beta)
        up_exp, strict = e2.value, e2.strict
    elif mode == "energy-only":
        up_exp, strict = vE(beta), False
    else:
        raise PreconditionError(f"unknown window mode {mode!r}")
    return OmegaWindow(
        lower=C1 * float(N) ** lo_exp,
        upper=C2 * float(N) ** up_exp,
        upper_open=strict,
        mode=mode,
        v1=lo_exp,
        v_upper=up_exp,
    )


def default_omega(beta: float, N: int) -> float:
    """Omega at the geometric middle of the exponent window.

    ``N ** ((v1 + min(v2, vE)) / 2)`` rounded to an integer when the rounded
    value stays inside the dynamics window; small ``N`` can have windows
    without integers (``N = 2``, ``beta = 1/4`` gives ``[1.26, 2)``), and the
    exact middle is returned then.
    """
    exponent = 0.5 * (v1(beta) + min(v2(beta).value, vE(beta)))
    mid = float(N) ** exponent
    rounded = float(max(1, int(round(mid))))
    if N >= 2 and rounded in omega_window(beta, N):
        return rounded
    return max(1.0, mid)


def h_quartic_integral(n_nodes: int = 40) -> float:
    """``\\int |h|^4 d^2x`` for the 2D Hermite ground state, by quadrature."""
    x, w = np.polynomial.hermite.hermgauss(n_nodes)
    # Gauss-Hermite carries the weight exp(-x^2); undo it per axis.
    wt = w * np.exp(x**2)
    X1, X2 = np.meshgrid(x, x, indexing="ij")
    h = np.exp(-(X1**2 + X2**2) / 2.0) / math.sqrt(math.pi)
    return float(np.einsum("i,j,ij->", wt, wt, h**4))


@dataclass(frozen=True)
class CouplingReport:
    b0: float
    h_quartic: float
    c_eff: float
    g: float
    scat: float


def coupling_report(V, a: float = 1.0, omega0x: float = 1.0) -> CouplingReport:
    """Effective 1D coupling inherited from the 3D pair potential ``V``.

    ``c_eff = |int V| * int |h|^4`` is the cubic coefficient of the limiting
    1D equation.  ``g`` and ``scat`` are the Step-A trap quantities for the
    given length scale ``a`` and transverse frequency ``omega0x``; ``scat``
    uses the small-``beta`` branch ``(a / 8 pi) int V``.
    """
    integral = V.integral
    if integral > 0.0:
        raise PreconditionError(
            f"pair potential must have nonpositive integral, got {integral:g}"
        )
    b0 = abs(integral)
    hq = h_quartic_integral()
    return CouplingReport(
        b0=b0,
        h_quartic=hq,
        c_eff=b0 * hq,
        g=8.0 * math.pi * a * omega0x * hq,
        scat=a / (8.0 * math.pi) * integral,
    )
