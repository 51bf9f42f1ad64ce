"""Rescaled N-body Hamiltonian and the operators built around it.

All operators act on coefficient tensors of shape ``(d,) * n + batch`` over a
:class:`~focusnls.basis.SingleParticleBasis`.  The one-body part is diagonal
in the spectral basis.  The pair potential is applied on the z collocation
grid and, in x, through exact Galerkin matrices of the Gaussian components
(the transverse factors are products of 1D Hermite integrals).
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import fft as sfft
from scipy import linalg, optimize
from scipy.sparse import linalg as spla

from . import kernels
from .basis import SingleParticleBasis, hermite_polys
from .errors import (
    ConvergenceError,
    DegenerateCutoffError,
    PreconditionError,
    ShapeError,
    WindowError,
)
from .potential import PotentialSpec
from .scaling import omega_window
from .state import ManyBodyState, SymmetricSpace

# --------------------------------------------------------------------------
# pair operator


def axis_pair_tensor(n_max: int, width: float) -> np.ndarray:
    """1D Hermite four-index integrals of a Gaussian pair kernel.

    ``K[a, b, c, d] = int int psi_a(x) psi_c(x) psi_b(y) psi_d(y)
    exp(-(x - y)^2 / (2 width^2)) dx dy``.  In the rotated variables
    ``u = (x+y)/sqrt2, v = (x-y)/sqrt2`` the integrand is a polynomial times a
    Gaussian in each variable, so Gauss-Hermite quadrature is exact.
    """
    lam = math.sqrt(1.0 + 1.0 / width**2)
    n = 2 * n_max + 2
    t, w = np.polynomial.hermite.hermgauss(n)
    u = t[:, None]
    v = t[None, :] / lam
    x = (u + v) / math.sqrt(2.0)
    y = (u - v) / math.sqrt(2.0)
    px = hermite_polys(n_max, x)
    py = hermite_polys(n_max, y)
    wt = np.outer(w, w) / lam
    # p_a p_c exp(-x^2) p_b p_d exp(-y^2): the Gaussians are the GH weights
    return np.einsum("agh,cgh,bgh,dgh,gh->abcd", px, px, py, py, wt, optimize=True)


def transverse_pair_matrix(basis: SingleParticleBasis, width: float) -> np.ndarray:
    """Galerkin matrix ``(Mx*Mx, Mx*Mx)`` of ``exp(-|x_i - x_j|^2/(2 width^2))``."""
    xb = basis.x_basis
    K1 = axis_pair_tensor(xb.max_level - 1, width)
    n1, n2 = xb.n1, xb.n2
    ix = np.ix_(n1, n1, n1, n1)
    iy = np.ix_(n2, n2, n2, n2)
    Mx = xb.size
    return (K1[ix] * K1[iy]).reshape(Mx * Mx, Mx * Mx)


def longitudinal_pair_matrix(basis: SingleParticleBasis, width: float) -> np.ndarray:
    """Collocation values ``exp(-d(z_p, z_q)^2/(2 width^2))`` with periodic distance."""
    zg = basis.z_grid
    diff = zg.nodes[:, None] - zg.nodes[None, :]
    diff = (diff + 0.5 * zg.box_length) % zg.box_length - 0.5 * zg.box_length
    return np.exp(-(diff**2) / (2.0 * width**2))


def pair_operator(basis: SingleParticleBasis, V: PotentialSpec, N: int, omega: float):
    """Block form ``W[p, q, A, B]`` of ``V_{N,omega}(r_i - r_j)``.

    ``p, q`` are z grid nodes of the two particles and ``A, B`` joint x-mode
    indices ``a_i * Mx + a_j``.
    """
    Mx, Mz = basis.Mx, basis.Mz
    W = np.zeros((Mz, Mz, Mx * Mx, Mx * Mx))
    for amp, sx, sz in V.widths(N, omega):
        Kx = transverse_pair_matrix(basis, sx)
        Kz = longitudinal_pair_matrix(basis, sz)
        W += amp * Kz[:, :, None, None] * Kx[None, None]
    return W


# --------------------------------------------------------------------------
# Hamiltonian


class HamiltonianSpec:
    """Rescaled-frame Hamiltonian on a truncated basis.

    Parameters
    ----------
    N : int
        Particle number (``N = 1`` drops the interaction).
    omega : float
        Transverse confinement strength, ``>= 1``.
    V : PotentialSpec
        Unscaled pair potential; ``V.beta`` sets the scaling.
    basis : SingleParticleBasis
    C3 : float
        Constant in the energy shift ``alpha = C3 ||V||_1^2 + 1``.
    z_trap : float
        Coefficient of an optional longitudinal trap ``z_trap * z^2`` per
        particle, used only for ground-state preparation.
    """

    def __init__(
        self,
        N: int,
        omega: float,
        V: PotentialSpec,
        basis: SingleParticleBasis,
        C3: float = 1.0,
        z_trap: float = 0.0,
    ):
        if N < 1:
            raise PreconditionError("N must be >= 1")
        if omega < 1:
            raise PreconditionError("omega must be >= 1")
        self.N = int(N)
        self.omega = float(omega)
        self.V = V
        self.basis = basis
        self.C3 = float(C3)
        self.z_trap = float(z_trap)

    def with_C3(self, C3: float) -> "HamiltonianSpec":
        return HamiltonianSpec(self.N, self.omega, self.V, self.basis, C3, self.z_trap)

    @property
    def alpha(self) -> float:
        return self.C3 * self.V.l1_norm**2 + 1.0

    @property
    def interacting(self) -> bool:
        return self.N >= 2 and not self.V.is_zero

    @cached_property
    def one_body(self) -> np.ndarray:
        return self.basis.one_body_energies(self.omega)

    @cached_property
    def pair_blocks(self) -> np.ndarray:
        return pair_operator(self.basis, self.V, self.N, self.omega)

    @cached_property
    def _z2(self) -> np.ndarray:
        return self.basis.z_grid.nodes ** 2

    @cached_property
    def _diag_cache(self) -> dict:
        return {}

    def one_body_diagonal(self, n: int) -> np.ndarray:
        """Sum of one-body energies over ``n`` particles, shape ``(d,)*n``."""
        if n in self._diag_cache:
            return self._diag_cache[n]
        e = self.one_body.ravel()
        out = np.zeros((self.basis.dim,) * n)
        for ax in range(n):
            sl = [None] * n
            sl[ax] = slice(None)
            out = out + e[tuple(sl)]
        self._diag_cache[n] = out
        return out

    def _check(self, T: np.ndarray, n: int) -> np.ndarray:
        T = np.asarray(T, dtype=complex)
        d = self.basis.dim
        if T.ndim < n or T.shape[:n] != (d,) * n:
            raise ShapeError(f"expected leading shape {(d,) * n}, got {T.shape}")
        return T

    def _to_z_grid(self, T, n):
        Mx, Mz = self.basis.shape
        batch = T.shape[n:]
        R = int(np.prod(batch, dtype=int))
        X = T.reshape((Mx, Mz) * n + (R,))
        axes = tuple(2 * i + 1 for i in range(n))
        return np.ascontiguousarray(sfft.ifftn(X, axes=axes, norm="ortho")), axes, batch

    def _pair_accumulate(self, G, out, i, j, n):
        Mx, Mz = self.basis.shape
        d = self.basis.dim
        A = d**i
        B = d ** (j - i - 1)
        C = d ** (n - j - 1) * G.shape[-1]
        shape7 = (A, Mx, Mz, B, Mx, Mz, C)
        kernels.apply_pair(G.reshape(shape7), self.pair_blocks, out.reshape(shape7))

    def apply_pair_potential(self, T, i: int, j: int, n: int | None = None):
        """``V_{N,omega}(r_i - r_j) T`` for 0-based particles ``i != j``."""
        n = self.N if n is None else n
        T = self._check(T, n)
        if i == j or not (0 <= i < n and 0 <= j < n):
            raise ShapeError("need distinct particle indices in range")
        i, j = min(i, j), max(i, j)
        if self.V.is_zero:
            return np.zeros_like(T)
        G, axes, batch = self._to_z_grid(T, n)
        out = np.zeros_like(G)
        self._pair_accumulate(G, out, i, j, n)
        res = sfft.fftn(out, axes=axes, norm="ortho")
        return res.reshape(T.shape)

    def apply_tensor(self, T, n: int | None = None) -> np.ndarray:
        """Apply the Hamiltonian of ``n`` particles (default ``N``).

        The pair prefactor stays ``1/N`` for ``n < N``; trailing axes of ``T``
        beyond the first ``n`` are treated as a batch.
        """
        n = self.N if n is None else n
        T = self._check(T, n)
        diag = self.one_body_diagonal(n)
        out = diag.reshape(diag.shape + (1,) * (T.ndim - n)) * T
        if (n >= 2 and not self.V.is_zero) or self.z_trap:
            G, axes, batch = self._to_z_grid(T, n)
            acc = np.zeros_like(G)
            if n >= 2 and not self.V.is_zero:
                for i in range(n):
                    for j in range(i + 1, n):
                        self._pair_accumulate(G, acc, i, j, n)
                acc /= self.N
            if self.z_trap:
                for ax in axes:
                    sl = [None] * G.ndim
                    sl[ax] = slice(None)
                    acc += self.z_trap * self._z2[tuple(sl)] * G
            out = out + sfft.fftn(acc, axes=axes, norm="ortho").reshape(T.shape)
        return out

    def apply(self, psi: ManyBodyState) -> ManyBodyState:
        return apply_hamiltonian(self, psi)

    def shifted(self, T) -> np.ndarray:
        """``(alpha + H/N - 2 omega) T``."""
        return (self.alpha - 2.0 * self.omega) * T + self.apply_tensor(T) / self.N


def _check_state(spec: HamiltonianSpec, psi: ManyBodyState):
    if psi.basis is not spec.basis and psi.basis.descriptor() != spec.basis.descriptor():
        raise ShapeError("state and Hamiltonian use different bases")
    if psi.N != spec.N:
        raise ShapeError(f"state has N={psi.N}, Hamiltonian N={spec.N}")


def apply_hamiltonian(spec: HamiltonianSpec, psi: ManyBodyState) -> ManyBodyState:
    """``H psi`` with ``H = sum_j [-d_z^2 + w(-Lap_x + |x|^2)] + (1/N) sum V_{N,w}``."""
    _check_state(spec, psi)
    return ManyBodyState(psi.basis, spec.apply_tensor(psi.coeffs))


# --------------------------------------------------------------------------
# S-tilde and sector projections


def _axis_broadcast(vec, axis, ndim):
    sl = [None] * ndim
    sl[axis] = slice(None)
    return vec[tuple(sl)]


def stilde_diagonal(basis: SingleParticleBasis, omega: float) -> np.ndarray:
    """Flattened diagonal of ``S~^2``: ``1 + k^2 + 2 omega l``."""
    return basis.stilde_squared(omega).ravel()


def apply_stilde(spec: HamiltonianSpec, psi, j: int, power: int = 2):
    """Apply ``S~_j^power`` (``j`` is 1-based) to a state or a tensor."""
    if power not in (1, 2, 3, 4):
        raise PreconditionError("power must be 1, 2, 3 or 4")
    is_state = isinstance(psi, ManyBodyState)
    T = psi.coeffs if is_state else np.asarray(psi)
    n = psi.N if is_state else spec.N
    if not 1 <= j <= n:
        raise PreconditionError(f"particle index must lie in 1..{n}")
    s2 = stilde_diagonal(spec.basis, spec.omega)
    fac = s2 ** (power / 2.0)
    out = _axis_broadcast(fac, j - 1, T.ndim) * T
    return ManyBodyState(psi.basis, out) if is_state else out


def sector_mask(basis: SingleParticleBasis, flag: int) -> np.ndarray:
    """Flattened indicator of level 0 (``flag = 0``) or levels >= 1 (``flag = 1``)."""
    if flag not in (0, 1):
        raise PreconditionError("sector flags must be 0 or 1")
    lv = basis.levels
    m = (lv == 0) if flag == 0 else (lv >= 1)
    return np.repeat(m.astype(float), basis.Mz)


def sector_project(obj, alpha: Sequence[int], beta: Sequence[int] | None = None):
    """``P_alpha psi`` for states, ``P_alpha gamma P_beta`` for density matrices."""
    alpha = tuple(int(a) for a in alpha)
    if isinstance(obj, ManyBodyState):
        if beta is not None:
            raise PreconditionError("beta only applies to density matrices")
        if len(alpha) != obj.N:
            raise ShapeError(f"sector index length {len(alpha)} != N={obj.N}")
        T = obj.coeffs
        for ax, a in enumerate(alpha):
            T = T * _axis_broadcast(sector_mask(obj.basis, a), ax, obj.N)
        return ManyBodyState(obj.basis, T)
    if not hasattr(obj, "project"):
        raise ShapeError("expected a ManyBodyState or DensityMatrix")
    return obj.project(alpha, beta)


# --------------------------------------------------------------------------
# energy moments


def energy_moment(spec: HamiltonianSpec, psi: ManyBodyState, k: int = 1) -> float:
    """``<(alpha + H/N - 2 omega)^k psi, psi>`` by repeated application."""
    _check_state(spec, psi)
    if k < 0:
        raise PreconditionError("k must be >= 0")
    v = psi.coeffs
    half = k // 2
    for _ in range(half):
        v = spec.shifted(v)
    if k % 2 == 0:
        return float(np.vdot(v.ravel(), v.ravel()).real)
    return float(np.vdot(v.ravel(), spec.shifted(v).ravel()).real)


def excess_energy_moment(spec: HamiltonianSpec, psi: ManyBodyState, k: int = 1) -> float:
    """``<psi, (H - 2 N omega)^k psi>``."""
    _check_state(spec, psi)
    shift = 2.0 * spec.N * spec.omega

    def op(T):
        return spec.apply_tensor(T) - shift * T

    v = psi.coeffs
    for _ in range(k // 2):
        v = op(v)
    if k % 2 == 0:
        return float(np.vdot(v.ravel(), v.ravel()).real)
    return float(np.vdot(v.ravel(), op(v).ravel()).real)


def _stilde_weight(spec: HamiltonianSpec, k: int) -> np.ndarray:
    """Diagonal of ``2^-k (prod_{j<=k} S~_j^2 + N^-1 S~_1^2 (S~^{(k-1)})^2)``."""
    n = spec.N
    s2 = stilde_diagonal(spec.basis, spec.omega)
    prod = np.ones((spec.basis.dim,) * n)
    for j in range(k):
        prod = prod * _axis_broadcast(s2, j, n)
    extra = _axis_broadcast(s2, 0, n) * np.ones_like(prod)
    for j in range(k - 1):
        extra = extra * _axis_broadcast(s2, j, n)
    return (prod + extra / n) / 2.0**k


def energy_margin(spec: HamiltonianSpec, psi: ManyBodyState, k: int) -> float:
    """Left minus right side of the energy estimate for one normalized state."""
    w = _stilde_weight(spec, k)
    c = psi.coeffs
    rhs = float(np.sum(w * np.abs(c) ** 2))
    return energy_moment(spec, psi, k) - rhs


@dataclass
class EnergyEstimateReport:
    k: int
    N: int
    omega: float
    beta: float
    C3: float
    worst_margin: float
    worst_random: float
    worst_eigen: float
    calibrated_C3: float
    in_window: bool
    method: str

    def record(self) -> dict:
        return {
            "name": f"energy-estimate-k{self.k}",
            "parameters": {"N": self.N, "omega": self.omega, "beta": self.beta, "C3": self.C3},
            "margin": self.worst_margin,
            "empirical_constant": self.calibrated_C3,
            "in_window": self.in_window,
            "method": self.method,
        }


class _SymmetricForms:
    """Compressions of the energy-estimate operators to the bosonic subspace."""

    def __init__(self, spec: HamiltonianSpec, k: int):
        self.spec = spec
        self.k = k
        self.space = SymmetricSpace(spec.basis.dim, spec.N)
        self.weight = _stilde_weight(spec, k)

    def h_over_n(self, c):
        """``(H/N - 2 omega)`` in symmetric coordinates (batched on axis 1)."""
        spec = self.spec
        T = self.space.embed(c)
        HT = spec.apply_tensor(T) / spec.N - 2.0 * spec.omega * T
        return self.space.restrict(HT)

    def weight_op(self, c):
        T = self.space.embed(c)
        w = self.weight.reshape(self.weight.shape + (1,) * (T.ndim - self.spec.N))
        return self.space.restrict(w * T)

    def dense(self):
        s = self.space.size
        eye = np.eye(s)
        B = np.empty((s, s))
        D = np.empty((s, s))
        step = max(1, 2_000_000 // (self.spec.basis.dim ** self.spec.N))
        for lo in range(0, s, step):
            hi = min(s, lo + step)
            blk = eye[:, lo:hi]
            hb = self.h_over_n(blk)
            B[:, lo:hi] = hb.real
            D[:, lo:hi] = self.weight_op(blk).real
        B = 0.5 * (B + B.T)
        D = 0.5 * (D + D.T)
        return B, D


def _min_margin_dense(B, D, a, k):
    A = B + a * np.eye(len(B))
    M = np.linalg.matrix_power(A, k) - D
    w, v = linalg.eigh(M, subset_by_index=[0, 0])
    return float(w[0]), v[:, 0]


def verify_energy_estimate(
    spec: HamiltonianSpec,
    k: int = 1,
    trials: int = 20,
    rng=None,
    window: str = "error",
    C1: float = 1.0,
    C2: float = 1.0,
    dense_limit: int = 3000,
    n_eigen: int = 6,
) -> EnergyEstimateReport:
    """Worst margin of the energy estimate over random and low-lying states.

    The margin is ``<(alpha + H/N - 2w)^k psi, psi> - 2^-k(||S~^(k) psi||^2 +
    N^-1 ||S~_1 S~^(k-1) psi||^2)``.  When the symmetric subspace has at most
    ``dense_limit`` dimensions the exact minimum over all bosonic states is
    computed; otherwise a Lanczos solve of the margin operator is used.  The
    minimal ``C3`` making the margin nonnegative is returned as
    ``calibrated_C3``.

    ``window`` is ``"error"`` (raise :class:`WindowError` outside the
    energy-only window), ``"warn"`` or ``"off"``.
    """
    if k not in (1, 2):
        raise PreconditionError("k must be 1 or 2")
    N, omega, beta = spec.N, spec.omega, spec.V.beta
    in_window = True
    if N >= 2:
        win = omega_window(beta, N, C1, C2, mode="energy-only")
        in_window = omega in win
    if not in_window:
        msg = f"(N={N}, omega={omega}) outside the energy window for beta={beta}"
        if window == "error":
            raise WindowError(msg)
        if window == "warn":
            warnings.warn(msg, RuntimeWarning, stacklevel=2)
    rng = np.random.default_rng(rng)
    forms = _SymmetricForms(spec, k)
    v1sq = spec.V.l1_norm ** 2
    base = 1.0
    if forms.space.size <= dense_limit:
        method = "dense"
        B, D = forms.dense()

        def margin_at(C3):
            return _min_margin_dense(B, D, base + C3 * v1sq, k)[0]

        worst_eig, _ = _min_margin_dense(B, D, spec.alpha, k)
    else:
        method = "lanczos"
        s = forms.space.size

        def margin_at(C3):
            a = base + C3 * v1sq

            def mv(c):
                c = c.reshape(s, -1)
                x = forms.h_over_n(c) + a * c
                if k == 2:
                    x = forms.h_over_n(x) + a * x
                return (x - forms.weight_op(c)).ravel()

            op = spla.LinearOperator((s, s), matvec=mv, dtype=complex)
            w = spla.eigsh(op, k=1, which="SA", tol=1e-10, maxiter=20 * s,
                           v0=rng.normal(size=s) + 0j, return_eigenvectors=False)
            return float(w[0])

        worst_eig = margin_at(spec.C3)
    # calibration: k = 1 is affine in C3, k = 2 monotone once alpha dominates
    if v1sq == 0.0:
        calibrated = 0.0
    elif k == 1:
        m0 = margin_at(0.0)
        calibrated = max(0.0, -m0 / v1sq)
    else:
        lo, hi = 0.0, max(1.0, spec.C3)
        if margin_at(lo) >= 0.0:
            calibrated = 0.0
        else:
            while margin_at(hi) < 0.0:
                lo, hi = hi, 2.0 * hi
                if hi > 1e8:
                    raise ConvergenceError("no C3 below 1e8 restores the estimate")
            # margin(C3) crosses zero once inside the bracket
            calibrated = optimize.brentq(margin_at, lo, hi, xtol=1e-10, rtol=1e-10)
    worst_rand = math.inf
    for _ in range(trials):
        c = rng.normal(size=forms.space.size) + 1j * rng.normal(size=forms.space.size)
        decay = np.exp(-0.5 * rng.uniform(0, 4) * np.arange(forms.space.size) / forms.space.size)
        c = c * decay
        psi = ManyBodyState(spec.basis, forms.space.embed(c / np.linalg.norm(c)))
        worst_rand = min(worst_rand, energy_margin(spec, psi, k))
    worst = min(worst_eig, worst_rand)
    return EnergyEstimateReport(
        k=k, N=N, omega=omega, beta=beta, C3=spec.C3,
        worst_margin=float(worst), worst_random=float(worst_rand),
        worst_eigen=float(worst_eig), calibrated_C3=float(calibrated),
        in_window=in_window, method=method,
    )


# --------------------------------------------------------------------------
# spectral cutoff


def smoothstep_cutoff(s) -> np.ndarray:
    """``chi(s)``: 1 for ``s <= 1``, 0 for ``s >= 2``, quintic smoothstep between."""
    s = np.asarray(s, dtype=float)
    u = np.clip(2.0 - s, 0.0, 1.0)
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


@dataclass
class SymmetricSpectrum:
    """Eigen-decomposition of ``H`` restricted to the bosonic subspace."""

    space: SymmetricSpace
    energies: np.ndarray
    vectors: np.ndarray

    def coefficients(self, psi: ManyBodyState) -> np.ndarray:
        return self.vectors.T @ self.space.restrict(psi.coeffs)

    def synthesize(self, coeffs) -> np.ndarray:
        return self.space.embed(self.vectors @ coeffs)


def symmetric_spectrum(spec: HamiltonianSpec, limit: int = 4000) -> SymmetricSpectrum:
    space = SymmetricSpace(spec.basis.dim, spec.N)
    s = space.size
    if s > limit:
        raise PreconditionError(f"bosonic subspace of size {s} exceeds the dense limit {limit}")
    eye = np.eye(s)
    Hm = np.empty((s, s))
    step = max(1, 2_000_000 // (spec.basis.dim ** spec.N))
    for lo in range(0, s, step):
        hi = min(s, lo + step)
        Hm[:, lo:hi] = space.restrict(spec.apply_tensor(space.embed(eye[:, lo:hi]))).real
    Hm = 0.5 * (Hm + Hm.T)
    e, v = linalg.eigh(Hm)
    return SymmetricSpectrum(space, e, v)


def spectral_cutoff(
    spec: HamiltonianSpec,
    psi0: ManyBodyState,
    kappa: float,
    spectrum: SymmetricSpectrum | None = None,
) -> ManyBodyState:
    """``chi(kappa (H - 2 N w)/N) psi0``, renormalized."""
    if kappa <= 0:
        raise PreconditionError("kappa must be positive")
    _check_state(spec, psi0)
    spectrum = symmetric_spectrum(spec) if spectrum is None else spectrum
    c = spectrum.coefficients(psi0)
    s = kappa * (spectrum.energies - 2.0 * spec.N * spec.omega) / spec.N
    filtered = smoothstep_cutoff(s) * c
    nrm = np.linalg.norm(filtered)
    if nrm < 1e-14:
        raise DegenerateCutoffError(f"cutoff at kappa={kappa} annihilates the state")
    return ManyBodyState(psi0.basis, spectrum.synthesize(filtered / nrm))


# --------------------------------------------------------------------------
# inequality audits


@dataclass
class InequalityReport:
    name: str
    parameters: dict
    margin: float
    empirical_constant: float

    def record(self) -> dict:
        return {
            "name": self.name,
            "parameters": self.parameters,
            "margin": self.margin,
            "empirical_constant": self.empirical_constant,
        }


def _sobolev_blocks(basis: SingleParticleBasis) -> np.ndarray:
    """``1 - Lap_r`` per z wavenumber: shape ``(Mz, Mx, Mx)``."""
    lap = basis.x_basis.laplacian_matrix()
    k2 = basis.z_grid.k2
    return (1.0 + k2)[:, None, None] * np.eye(basis.Mx) + lap[None]


def check_inequality(name: str, spec: HamiltonianSpec, constant: float | None = None):
    """Audit one of the coercivity bounds or the pair-potential Sobolev bound.

    ``coercivity-1``: ``S~^2 - c (1 - Lap_r) >= 0`` (default ``c = 1/3``).
    ``coercivity-2``: ``S~^2 P - c P(1 - d_z^2 + w(-Lap_x + |x|^2))P >= 0``
    on the excited sector (default ``c = 1/2``).
    ``coercivity-3``: ``S~^2 P - c w P >= 0`` (default ``c = 1``).
    ``esy-sobolev``: operator norm of ``L1^-1 L2^-1 V(r1 - r2) L1^-1 L2^-1``
    divided by ``||V||_1`` on the two-particle space.

    The margin is the smallest eigenvalue of the difference (or, for
    ``esy-sobolev``, the operator norm itself); ``empirical_constant`` is the
    sharpest constant on the truncated space.
    """
    basis, omega = spec.basis, spec.omega
    s2 = basis.stilde_squared(omega)  # (Mx, Mz)
    params = {"omega": omega, "L": basis.x_basis.max_level, "M_z": basis.Mz}
    if name == "coercivity-1":
        c = 1.0 / 3.0 if constant is None else constant
        blocks = _sobolev_blocks(basis)
        margin = math.inf
        sharp = math.inf
        for m in range(basis.Mz):
            S = np.diag(s2[:, m])
            R = blocks[m]
            margin = min(margin, float(linalg.eigvalsh(S - c * R)[0]))
            # sharpest c: smallest generalized eigenvalue of S v = c R v
            sharp = min(sharp, float(linalg.eigvalsh(S, R)[0]))
        return InequalityReport(name, {**params, "c": c}, margin, sharp)
    exc = basis.levels >= 1
    if not exc.any():
        raise PreconditionError("basis has no excited transverse modes")
    if name == "coercivity-2":
        c = 0.5 if constant is None else constant
        rhs = 1.0 + basis.z_grid.k2[None, :] + omega * basis.x_basis.eigenvalues[:, None]
        lhs, rhs = s2[exc], rhs[exc]
        return InequalityReport(
            name, {**params, "c": c}, float(np.min(lhs - c * rhs)), float(np.min(lhs / rhs))
        )
    if name == "coercivity-3":
        c = 1.0 if constant is None else constant
        lhs = s2[exc]
        return InequalityReport(
            name, {**params, "c": c}, float(np.min(lhs) - c * omega), float(np.min(lhs) / omega)
        )
    if name == "esy-sobolev":
        return _esy_sobolev(spec, params)
    raise PreconditionError(f"unknown inequality {name!r}")


def _esy_sobolev(spec: HamiltonianSpec, params: dict) -> InequalityReport:
    basis = spec.basis
    d = basis.dim
    if d * d > 6000:
        raise PreconditionError("two-particle space too large for a dense audit")
    blocks = _sobolev_blocks(basis)
    # L^{-1} as a (d, d) matrix in the (mode, kz) ordering
    Linv = np.zeros((basis.Mx, basis.Mz, basis.Mx, basis.Mz))
    for m in range(basis.Mz):
        w, U = linalg.eigh(blocks[m])
        Linv[:, m, :, m] = (U / np.sqrt(w)) @ U.T
    Linv = Linv.reshape(d, d)
    eye = np.eye(d * d).reshape(d, d, d * d)
    Vm = spec.apply_pair_potential(eye, 0, 1, n=2).reshape(d * d, d * d)
    L2 = np.kron(Linv, Linv)
    Wm = L2 @ Vm @ L2
    Wm = 0.5 * (Wm + Wm.conj().T)
    norm = float(np.max(np.abs(linalg.eigvalsh(Wm))))
    l1 = spec.V.l1_norm
    const = norm / l1 if l1 > 0 else 0.0
    return InequalityReport("esy-sobolev", {**params, "N": spec.N}, norm, const)


def audit_records(reports) -> str:
    """JSON-lines text, one record per report."""
    return "".join(json.dumps(r.record(), sort_keys=True) + "\n" for r in reports)


__all__ = [
    "HamiltonianSpec",
    "apply_hamiltonian",
    "apply_stilde",
    "sector_project",
    "energy_moment",
    "excess_energy_moment",
    "energy_margin",
    "verify_energy_estimate",
    "spectral_cutoff",
    "symmetric_spectrum",
    "smoothstep_cutoff",
    "check_inequality",
    "pair_operator",
    "axis_pair_tensor",
    "audit_records",
]
