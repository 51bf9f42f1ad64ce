"""Gaussian-mixture pair potentials and their rescaled forms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .errors import PreconditionError

_GAUSS_NORM = (2.0 * math.pi) ** 1.5


@dataclass(frozen=True)
class GaussianTerm:
    """One component ``sign * depth * exp(-|r|^2 / (2 width^2))``."""

    depth: float
    width: float
    sign: int = -1

    def __post_init__(self):
        if self.depth < 0 or self.width <= 0:
            raise PreconditionError("depth must be >= 0 and width > 0")
        if self.sign not in (-1, 1):
            raise PreconditionError("sign must be +1 or -1")

    @property
    def amplitude(self) -> float:
        return self.sign * self.depth


@dataclass(frozen=True)
class PotentialSpec:
    """Even pair potential ``V(r)`` on R^3 given as a sum of centered Gaussians.

    The mixture may change sign but its integral must be nonpositive unless
    ``attractive=False`` (used for repulsive ground-state preparation).
    """

    terms: tuple[GaussianTerm, ...]
    beta: float = 0.25
    attractive: bool = True
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.attractive and self.integral > 1e-14 * max(1.0, self.l1_norm):
            raise PreconditionError(
                f"pair potential must satisfy int V <= 0, got {self.integral:g}"
            )

    @classmethod
    def zero(cls, beta: float = 0.25) -> "PotentialSpec":
        return cls((), beta)

    @classmethod
    def attractive_gaussian(cls, depth: float, width: float, beta: float = 0.25):
        return cls((GaussianTerm(depth, width, -1),), beta)

    @classmethod
    def repulsive_gaussian(cls, depth: float, width: float, beta: float = 0.25):
        """Nonnegative potential for ground-state preparation only."""
        return cls((GaussianTerm(depth, width, 1),), beta, attractive=False)

    @property
    def is_zero(self) -> bool:
        return all(t.depth == 0.0 for t in self.terms)

    def scaled(self, factor: float) -> "PotentialSpec":
        return PotentialSpec(
            tuple(GaussianTerm(t.depth * factor, t.width, t.sign) for t in self.terms),
            self.beta,
            self.attractive,
        )

    def __call__(self, r2) -> np.ndarray:
        """Evaluate at squared radius ``r2 = |r|^2``."""
        r2 = np.asarray(r2, dtype=float)
        out = np.zeros_like(r2)
        for t in self.terms:
            out += t.amplitude * np.exp(-r2 / (2.0 * t.width**2))
        return out

    def radial(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self(r * r)

    @property
    def integral(self) -> float:
        return float(sum(t.amplitude * _GAUSS_NORM * t.width**3 for t in self.terms))

    @property
    def l1_norm(self) -> float:
        if "l1" not in self._cache:
            if len({t.sign for t in self.terms}) <= 1:
                val = abs(self.integral)
            else:
                rmax = 12.0 * max(t.width for t in self.terms)
                val, _ = integrate.quad(
                    lambda r: 4.0 * math.pi * r * r * abs(self.radial(r)),
                    0.0,
                    rmax,
                    limit=400,
                    points=self._sign_changes(rmax),
                )
            self._cache["l1"] = float(val)
        return self._cache["l1"]

    @property
    def linf_norm(self) -> float:
        if "linf" not in self._cache:
            if not self.terms:
                self._cache["linf"] = 0.0
            else:
                rmax = 12.0 * max(t.width for t in self.terms)
                r = np.linspace(0.0, rmax, 4001)
                vals = np.abs(self.radial(r))
                i = int(np.argmax(vals))
                lo, hi = r[max(i - 1, 0)], r[min(i + 1, len(r) - 1)]
                res = optimize.minimize_scalar(
                    lambda s: -abs(float(self.radial(s))),
                    bounds=(lo, hi),
                    method="bounded",
                    options={"xatol": 1e-12},
                )
                self._cache["linf"] = float(max(vals[i], -res.fun))
        return self._cache["linf"]

    def _sign_changes(self, rmax):
        r = np.linspace(0.0, rmax, 2001)
        v = self.radial(r)
        idx = np.nonzero(np.sign(v[1:]) != np.sign(v[:-1]))[0]
        pts = []
        for i in idx:
            pts.append(optimize.brentq(self.radial, r[i], r[i + 1]))
        return pts or None

    def widths(self, N: int, omega: float) -> list[tuple[float, float, float]]:
        """``(amplitude, x_width, z_width)`` per term of the rescaled potential.

        The rescaled-frame potential is
        ``N^(3b) w^(3b-1) V((N w)^b x / sqrt(w), (N w)^b z)``.
        """
        s = (N * omega) ** self.beta
        amp = N ** (3 * self.beta) * omega ** (3 * self.beta - 1.0)
        return [
            (amp * t.amplitude, t.width * math.sqrt(omega) / s, t.width / s)
            for t in self.terms
        ]


def scaled_potential(V: PotentialSpec, N: int, omega: float, x, z) -> np.ndarray:
    """Rescaled-frame pair potential at relative coordinate ``(x, z)``.

    ``x`` has a trailing axis of length 2.
    """
    if N < 1 or omega < 1:
        raise PreconditionError("need N >= 1 and omega >= 1")
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    x2 = np.sum(x * x, axis=-1)
    out = np.zeros(np.broadcast_shapes(x2.shape, z.shape))
    for amp, sx, sz in V.widths(N, omega):
        out = out + amp * np.exp(-x2 / (2 * sx * sx) - z * z / (2 * sz * sz))
    return out
