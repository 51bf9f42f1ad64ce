"""Reduced density matrices, partial traces and distances between them.

A :class:`DensityMatrix` of order ``k`` is stored either as a kernel tensor
of shape ``(d,)*k + (d,)*k`` (row particles first) or, for reductions of a
pure state, as a factor ``F`` of shape ``(d^k, r)`` with ``gamma = F F^*``.
Factored marginals are never materialized unless asked for; traces,
partial traces and distances have exact low-rank routes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .basis import FourierGrid1D, SingleParticleBasis
from .errors import PreconditionError, ShapeError
from .state import ManyBodyState

#: kernels with more than this many rows are kept factored
DENSE_LIMIT = 4096


class DensityMatrix:
    """``k``-particle density matrix over a single-particle basis.

    Parameters
    ----------
    basis : SingleParticleBasis
    kernel : ndarray, optional
        Shape ``(d,)*2k`` or ``(d^k, d^k)``.
    factor : ndarray, optional
        Shape ``(d^k, r)``; the matrix is ``factor @ factor.conj().T``.
    k : int, optional
        Required with ``factor``.
    """

    def __init__(self, basis: SingleParticleBasis, kernel=None, factor=None, k=None):
        self.basis = basis
        d = basis.dim
        if (kernel is None) == (factor is None):
            raise ShapeError("give exactly one of kernel or factor")
        if kernel is not None:
            kernel = np.asarray(kernel, dtype=complex)
            if kernel.ndim == 2:
                n = kernel.shape[0]
                kk = int(round(math.log(n, d))) if n > 1 else 0
                if d**kk != n or kernel.shape != (n, n):
                    raise ShapeError("matrix size is not a power of d")
                kernel = kernel.reshape((d,) * (2 * kk))
            if kernel.ndim % 2 or any(s != d for s in kernel.shape):
                raise ShapeError("kernel must have shape (d,)*2k")
            self.k = kernel.ndim // 2
            self._kernel = kernel
            self._factor = None
        else:
            factor = np.asarray(factor, dtype=complex)
            if k is None:
                raise ShapeError("k is required with a factor")
            if factor.ndim != 2 or factor.shape[0] != d**k:
                raise ShapeError(f"factor must have {d**k} rows")
            self.k = int(k)
            self._kernel = None
            self._factor = factor

    # -- representations ---------------------------------------------------

    @property
    def size(self) -> int:
        return self.basis.dim**self.k

    @property
    def is_factored(self) -> bool:
        return self._factor is not None

    @property
    def factor(self):
        return self._factor

    def matrix(self) -> np.ndarray:
        if self._kernel is not None:
            return self._kernel.reshape(self.size, self.size)
        if self.size > DENSE_LIMIT:
            raise ShapeError(f"refusing to materialize a {self.size}^2 kernel")
        F = self._factor
        return F @ F.conj().T

    @property
    def kernel(self) -> np.ndarray:
        return self.matrix().reshape((self.basis.dim,) * (2 * self.k))

    def apply(self, X) -> np.ndarray:
        """``gamma @ X`` for ``X`` of shape ``(d^k, m)``."""
        X = np.asarray(X)
        if self._factor is not None:
            F = self._factor
            return F @ (F.conj().T @ X)
        return self.matrix() @ X

    # -- scalar invariants -------------------------------------------------

    def trace(self) -> complex:
        if self._factor is not None:
            return complex(np.vdot(self._factor.ravel(), self._factor.ravel()))
        return complex(np.trace(self.matrix()))

    def hermiticity_defect(self) -> float:
        if self._factor is not None:
            return 0.0
        M = self.matrix()
        return float(np.max(np.abs(M - M.conj().T))) if M.size else 0.0

    def eigenvalues(self) -> np.ndarray:
        if self._factor is not None:
            s = linalg.svd(self._factor, compute_uv=False)
            return np.sort(s**2)
        M = self.matrix()
        return linalg.eigvalsh(0.5 * (M + M.conj().T))

    def permutation_defect(self) -> float:
        """Deviation from symmetry under simultaneous relabeling of both index groups."""
        k = self.k
        if k < 2:
            return 0.0
        K = self.kernel
        worst = 0.0
        for p in itertools.permutations(range(k)):
            perm = p + tuple(i + k for i in p)
            worst = max(worst, float(np.max(np.abs(np.transpose(K, perm) - K))))
        return worst

    def project(self, alpha: Sequence[int], beta: Sequence[int] | None = None):
        """``P_alpha gamma P_beta`` (see :func:`focusnls.operators.sector_project`)."""
        from .operators import sector_mask

        beta = alpha if beta is None else beta
        if len(alpha) != self.k or len(beta) != self.k:
            raise ShapeError(f"sector index lengths must equal k={self.k}")
        ma = _kron_masks([sector_mask(self.basis, a) for a in alpha])
        if self._factor is not None and tuple(alpha) == tuple(beta):
            return DensityMatrix(self.basis, factor=ma[:, None] * self._factor, k=self.k)
        mb = _kron_masks([sector_mask(self.basis, b) for b in beta])
        return DensityMatrix(self.basis, kernel=ma[:, None] * self.matrix() * mb[None, :])


def _kron_masks(masks):
    out = np.ones(1)
    for m in masks:
        out = np.kron(out, m)
    return out


@dataclass
class ReducedZDensity:
    """``Tr_x`` of a density matrix: a kernel on the k-fold z basis (Fourier coefficients)."""

    grid: FourierGrid1D
    kernel: np.ndarray

    def __post_init__(self):
        self.kernel = np.asarray(self.kernel, dtype=complex)
        M = self.grid.points
        if self.kernel.ndim % 2 or any(s != M for s in self.kernel.shape):
            raise ShapeError("kernel must have shape (M_z,)*2k")

    @property
    def k(self) -> int:
        return self.kernel.ndim // 2

    @property
    def size(self) -> int:
        return self.grid.points**self.k

    def matrix(self) -> np.ndarray:
        return self.kernel.reshape(self.size, self.size)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix()))

    def hermiticity_defect(self) -> float:
        M = self.matrix()
        return float(np.max(np.abs(M - M.conj().T)))

    def eigenvalues(self) -> np.ndarray:
        M = self.matrix()
        return linalg.eigvalsh(0.5 * (M + M.conj().T))

    @classmethod
    def product(cls, grid: FourierGrid1D, coeffs, k: int = 1) -> "ReducedZDensity":
        """``|phi><phi|^{(x) k}`` from unitary Fourier coefficients."""
        c = np.asarray(coeffs, dtype=complex)
        one = np.multiply.outer(c, c.conj())
        K = one
        for _ in range(k - 1):
            K = np.multiply.outer(K, one)
        # reorder (z1, z1', z2, z2', ...) -> (z1, z2, ..., z1', z2', ...)
        perm = tuple(range(0, 2 * k, 2)) + tuple(range(1, 2 * k, 2))
        return cls(grid, np.transpose(K, perm))


# --------------------------------------------------------------------------
# reductions


def reduce_marginal(psi: ManyBodyState, k: int, factored: bool | None = None) -> DensityMatrix:
    """``gamma^(k) = Tr_{k+1..N} |psi><psi|`` by contraction of the state tensor.

    Returns a factored matrix when ``d^k`` exceeds :data:`DENSE_LIMIT` (or
    when ``factored`` is ``True``).
    """
    N = psi.N
    if not 1 <= k <= N:
        raise PreconditionError(f"k must lie in 1..{N}")
    d = psi.dim
    F = psi.coeffs.reshape(d**k, d ** (N - k))
    if factored is None:
        factored = d**k > DENSE_LIMIT
    if factored:
        return DensityMatrix(psi.basis, factor=F.copy(), k=k)
    return DensityMatrix(psi.basis, kernel=F @ F.conj().T)


def partial_trace(gamma: DensityMatrix, mode: str = "last-particle"):
    """Trace out the last particle, or the transverse coordinates of every particle.

    ``mode="last-particle"`` returns a :class:`DensityMatrix` of order
    ``k - 1``; ``mode="x-component"`` returns a :class:`ReducedZDensity` of
    the same order.
    """
    basis = gamma.basis
    d, k = basis.dim, gamma.k
    if mode == "last-particle":
        if k < 1:
            raise ShapeError("nothing to trace out")
        if gamma.is_factored:
            F = gamma.factor.reshape(d ** (k - 1), d * gamma.factor.shape[1])
            if d ** (k - 1) <= DENSE_LIMIT:
                return DensityMatrix(basis, kernel=F @ F.conj().T)
            return DensityMatrix(basis, factor=F, k=k - 1)
        M = gamma.matrix().reshape(d ** (k - 1), d, d ** (k - 1), d)
        return DensityMatrix(basis, kernel=np.einsum("iaja->ij", M))
    if mode == "x-component":
        Mx, Mz = basis.shape
        if gamma.is_factored:
            F = gamma.factor.reshape((Mx, Mz) * k + (-1,))
            # contract the x indices of F with those of conj(F)
            x_axes = tuple(2 * i for i in range(k)) + (2 * k,)
            K = np.tensordot(F, F.conj(), axes=(x_axes, x_axes))
            return ReducedZDensity(basis.z_grid, K)
        K = gamma.kernel.reshape((Mx, Mz) * (2 * k))
        # pair the x axis of each particle with its primed partner
        letters = "abcdefghijklmnopqrstuvwxyz"
        xs = letters[:k]
        zs = letters[k : 2 * k]
        zp = letters[2 * k : 3 * k]
        lhs = "".join(x + z for x, z in zip(xs, zs)) + "".join(x + z for x, z in zip(xs, zp))
        K = np.einsum(lhs + "->" + zs + zp, K)
        return ReducedZDensity(basis.z_grid, K)
    raise PreconditionError(f"unknown partial-trace mode {mode!r}")


# --------------------------------------------------------------------------
# distances


def _as_dense(g) -> np.ndarray:
    if isinstance(g, (DensityMatrix, ReducedZDensity)):
        return g.matrix()
    return np.asarray(g, dtype=complex)


def _lowrank_difference(g1: DensityMatrix, g2: DensityMatrix) -> np.ndarray:
    """Small Hermitian matrix with the same nonzero spectrum as ``g1 - g2``."""
    F1, F2 = g1.factor, g2.factor
    Q, R = linalg.qr(np.hstack([F1, F2]), mode="economic")
    r1 = F1.shape[1]
    A, B = R[:, :r1], R[:, r1:]
    return A @ A.conj().T - B @ B.conj().T


def _pair(g1, g2):
    if isinstance(g1, DensityMatrix) and isinstance(g2, DensityMatrix):
        if g1.k != g2.k or g1.basis.dim != g2.basis.dim:
            raise ShapeError("density matrices of different shapes")
        if g1.is_factored or g2.is_factored:
            f1 = g1.factor if g1.is_factored else _psd_factor(g1.matrix())
            f2 = g2.factor if g2.is_factored else _psd_factor(g2.matrix())
            if f1.shape[1] + f2.shape[1] < g1.size:
                return _lowrank_difference(
                    DensityMatrix(g1.basis, factor=f1, k=g1.k),
                    DensityMatrix(g2.basis, factor=f2, k=g2.k),
                )
    a, b = _as_dense(g1), _as_dense(g2)
    if a.shape != b.shape:
        raise ShapeError("density matrices of different shapes")
    return a - b


def _psd_factor(M):
    w, U = linalg.eigh(0.5 * (M + M.conj().T))
    keep = w > 1e-15 * max(1.0, w.max(initial=0.0))
    return U[:, keep] * np.sqrt(w[keep])


def trace_distance(g1, g2) -> float:
    """Schatten-1 norm ``Tr |g1 - g2|``."""
    D = _pair(g1, g2)
    D = 0.5 * (D + D.conj().T)
    return float(np.sum(np.abs(linalg.eigvalsh(D))))


def hs_distance(g1, g2) -> float:
    """Hilbert-Schmidt (Frobenius) norm of ``g1 - g2``."""
    D = _pair(g1, g2)
    return float(np.linalg.norm(D))


def probe_distance(g1: DensityMatrix, g2: DensityMatrix, probes: int = 8, rng=0) -> float:
    """Max over random unit vectors of ``||(g1 - g2) v||`` (no materialization)."""
    rng = np.random.default_rng(rng)
    n = g1.size
    X = rng.normal(size=(n, probes)) + 1j * rng.normal(size=(n, probes))
    X /= np.linalg.norm(X, axis=0)
    Y = g1.apply(X) - g2.apply(X)
    return float(np.max(np.linalg.norm(Y, axis=0)))


# --------------------------------------------------------------------------
# d_k metric


@dataclass
class MetricConfig:
    """Finite family of one-particle test operators ``j_i`` with ``||j_i|| <= 1``.

    The k-particle test operator is ``j_i^{(x) k}``; ``d_k`` weights member
    ``i`` (1-based) by ``2^-i``.
    """

    operators: list
    names: list = field(default_factory=list)

    def __post_init__(self):
        if not self.operators:
            raise PreconditionError("the test family must be nonempty")
        for j in self.operators:
            if np.linalg.norm(j, 2) > 1.0 + 1e-12:
                raise PreconditionError("test operators must have operator norm <= 1")
        if not self.names:
            self.names = [f"J{i + 1}" for i in range(len(self.operators))]

    @property
    def weights(self) -> np.ndarray:
        return 0.5 ** np.arange(1, len(self.operators) + 1)

    @classmethod
    def default(cls, basis: SingleParticleBasis, scales=(2, 4, 8)) -> "MetricConfig":
        """Band-limit and level-cap projections with a shift and a momentum weight.

        For each dyadic ``M``: the projection ``Pi_M`` onto ``|k| <= M`` and
        levels ``< M``; ``Pi_M`` times a translation by ``L_z/8``; and
        ``Pi_M (k/M) Pi_M``.
        """
        kz = basis.z_grid.wavenumbers
        lv = basis.levels
        ops, names = [], []
        shift = np.exp(-1j * kz * basis.z_grid.box_length / 8.0)
        for M in scales:
            band = ((np.abs(kz) <= M)[None, :] & (lv < M)[:, None]).ravel().astype(float)
            ops.append(np.diag(band))
            names.append(f"proj{M}")
            ops.append(np.diag(band * np.tile(shift, basis.Mx)))
            names.append(f"shift{M}")
            ops.append(np.diag(band * np.tile(np.clip(kz / M, -1, 1), basis.Mx)))
            names.append(f"mom{M}")
        return cls(ops, names)


def _test_expectation(j: np.ndarray, g: DensityMatrix) -> complex:
    """``Tr (j^{(x)k} gamma)``."""
    d, k = g.basis.dim, g.k
    if g.is_factored:
        F = g.factor.reshape((d,) * k + (-1,))
        JF = F
        for ax in range(k):
            JF = np.moveaxis(np.tensordot(j, JF, axes=(1, ax)), 0, ax)
        return complex(np.vdot(F.ravel(), JF.ravel()))
    K = g.kernel
    for ax in range(k):
        K = np.moveaxis(np.tensordot(j, K, axes=(1, ax)), 0, ax)
    return complex(np.trace(K.reshape(g.size, g.size)))


def dk_metric(g1: DensityMatrix, g2: DensityMatrix, cfg: MetricConfig) -> float:
    """``sum_i 2^-i |Tr J_i (g1 - g2)|``."""
    total = 0.0
    for w, j in zip(cfg.weights, cfg.operators):
        total += w * abs(_test_expectation(j, g1) - _test_expectation(j, g2))
    return float(total)


# --------------------------------------------------------------------------
# factorization and sector diagnostics


def field_coefficients(field, z_grid: FourierGrid1D) -> np.ndarray:
    """Unitary Fourier coefficients of an NLS field on ``z_grid``.

    Both grids must share the box length; modes missing from the coarser
    grid are dropped (spectral truncation).
    """
    g = field.grid
    if abs(g.box_length - z_grid.box_length) > 1e-12:
        raise ShapeError("field and basis use different box lengths")
    # both grids start at -L/2, so coefficients of e^{ikz}/sqrt(L) agree
    src = g.from_samples(field.values)
    out = np.zeros(z_grid.points, dtype=complex)
    kt = np.round(z_grid.wavenumbers * z_grid.box_length / (2 * math.pi)).astype(int)
    ks = np.round(g.wavenumbers * g.box_length / (2 * math.pi)).astype(int)
    lookup = {int(m): i for i, m in enumerate(ks)}
    for i, m in enumerate(kt):
        j = lookup.get(int(m))
        if j is not None:
            out[i] = src[j]
    return out


def product_reference(basis: SingleParticleBasis, z_coeffs, k: int = 1) -> DensityMatrix:
    """``|h (x) phi><h (x) phi|^{(x) k}`` as a factored density matrix."""
    v = basis.ground_product(np.asarray(z_coeffs)).ravel()
    F = v
    for _ in range(k - 1):
        F = np.kron(F, v)
    return DensityMatrix(basis, factor=F[:, None], k=k)


def factorization_gap(gamma1: DensityMatrix, phi) -> float:
    """``Tr |gamma^(1) - |h (x) phi><h (x) phi||`` with ``phi`` normalized."""
    c = field_coefficients(phi, gamma1.basis.z_grid)
    nrm = np.linalg.norm(c)
    if nrm == 0:
        raise PreconditionError("reference field vanishes on the basis grid")
    ref = product_reference(gamma1.basis, c / nrm, gamma1.k)
    return trace_distance(gamma1, ref)


def limiting_structure_gap(gamma1: DensityMatrix) -> float:
    """``Tr |gamma^(1) - |h><h| (x) Tr_x gamma^(1)|``."""
    basis = gamma1.basis
    gz = partial_trace(gamma1, "x-component").matrix()
    Mx, Mz = basis.shape
    ref = np.zeros((Mx, Mz, Mx, Mz), dtype=complex)
    ref[0, :, 0, :] = gz
    return trace_distance(gamma1, DensityMatrix(basis, kernel=ref.reshape(basis.dim, basis.dim)))


def sector_weights(obj, max_order: int = 2) -> list[dict]:
    """Sector norms ``||P_alpha psi||`` or ``|Tr P_alpha gamma P_beta|``.

    For states every ``alpha`` with ``|alpha| <= max_order`` is listed.
    For density matrices every pair ``(alpha, beta)`` with both orders at
    most ``max_order`` is listed together with the Hilbert-Schmidt norm of
    the block.
    """
    from .operators import sector_project

    rows = []
    if isinstance(obj, ManyBodyState):
        for alpha in itertools.product((0, 1), repeat=obj.N):
            if sum(alpha) > max_order:
                continue
            rows.append(
                {"alpha": alpha, "order": sum(alpha), "value": sector_project(obj, alpha).norm()}
            )
        return rows
    k = obj.k
    sectors = [a for a in itertools.product((0, 1), repeat=k) if sum(a) <= max_order]
    for alpha in sectors:
        for beta in sectors:
            blk = obj.project(alpha, beta)
            if blk.is_factored:
                tr = blk.trace()
                hs = float(np.linalg.norm(blk.factor.conj().T @ blk.factor))
            else:
                tr = blk.trace()
                hs = float(np.linalg.norm(blk.matrix()))
            rows.append(
                {
                    "alpha": alpha,
                    "beta": beta,
                    "order": sum(alpha) + sum(beta),
                    "value": abs(tr),
                    "hs": hs,
                }
            )
    return rows


def sector_norm(psi: ManyBodyState, order: int) -> float:
    """``||P_alpha psi||`` for ``alpha = (1,..,1,0,..,0)`` with ``order`` ones."""
    from .operators import sector_project

    alpha = (1,) * order + (0,) * (psi.N - order)
    return sector_project(psi, alpha).norm()
