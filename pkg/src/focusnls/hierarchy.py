"""Residual meters for the BBGKY and Gross-Pitaevskii hierarchies.

Also contains the collision operator on the periodic z grid, a meter for the
weighted space-time norm of the collision term, and a closed-form Gaussian
engine used to measure how fast smooth pair interactions approach a delta
interaction.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .dynamics import NLSTrajectory, Trajectory
from .errors import ConfigError, PreconditionError, SamplingError, ShapeError
from .marginals import ReducedZDensity
from .operators import HamiltonianSpec
from .potential import PotentialSpec

_LETTERS = string.ascii_letters


# --------------------------------------------------------------------------
# reports


@dataclass
class HierarchyResidual:
    """Residual norms of a hierarchy identity at sampled times."""

    k: int
    times: np.ndarray
    residuals: np.ndarray
    dt: float
    kind: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.residuals = np.asarray(self.residuals, dtype=float)
        if np.any(self.residuals < 0):
            raise ShapeError("residuals must be nonnegative")

    @property
    def max(self) -> float:
        return float(self.residuals.max()) if self.residuals.size else 0.0

    def record(self) -> dict:
        return {
            "kind": self.kind,
            "k": self.k,
            "dt": self.dt,
            "times": self.times.tolist(),
            "residuals": self.residuals.tolist(),
            "max": self.max,
            **self.meta,
        }


# --------------------------------------------------------------------------
# collision operator


def _kernel_to_grid(K: np.ndarray, k: int) -> np.ndarray:
    K = np.fft.ifftn(K, axes=tuple(range(k)), norm="ortho")
    return np.fft.fftn(K, axes=tuple(range(k, 2 * k)), norm="ortho")


def _kernel_from_grid(G: np.ndarray, k: int) -> np.ndarray:
    G = np.fft.fftn(G, axes=tuple(range(k)), norm="ortho")
    return np.fft.ifftn(G, axes=tuple(range(k, 2 * k)), norm="ortho")


def collision_op(gamma_z: ReducedZDensity, j: int) -> ReducedZDensity:
    """``B_{j,k+1} gamma = Tr_{k+1} [delta(z_j - z_{k+1}), gamma]``.

    ``gamma_z`` has order ``k+1`` and ``j`` is 1-based.  The delta function is
    the Dirichlet kernel of the truncated Fourier space; on the grid it is
    ``delta_{nm} / dz``, so the contraction is exact collocation.
    """
    k = gamma_z.k - 1
    if k < 1:
        raise ShapeError("collision needs an input of order >= 2")
    if not 1 <= j <= k:
        raise ShapeError(f"need 1 <= j <= {k}, got {j}")
    grid = gamma_z.grid
    G = _kernel_to_grid(gamma_z.kernel, k + 1)
    row = list(_LETTERS[:k])
    col = list(_LETTERS[k : 2 * k])
    out = "".join(row + col)
    # z_{k+1} = z'_{k+1} = z_j  and  z_{k+1} = z'_{k+1} = z'_j
    s1 = "".join(row + [row[j - 1]] + col + [row[j - 1]])
    s2 = "".join(row + [col[j - 1]] + col + [col[j - 1]])
    B = (np.einsum(f"{s1}->{out}", G) - np.einsum(f"{s2}->{out}", G)) / grid.dz
    return ReducedZDensity(grid, _kernel_from_grid(B, k))


def z_partial_trace(gamma_z: ReducedZDensity) -> ReducedZDensity:
    """Trace out the last z variable."""
    k = gamma_z.k
    if k < 2:
        raise ShapeError("need order >= 2")
    K = gamma_z.kernel
    letters = _LETTERS[: 2 * k]
    s = letters[: k - 1] + "z" + letters[k : 2 * k - 1] + "z"
    return ReducedZDensity(gamma_z.grid, np.einsum(f"{s}->{s.replace('z', '')}", K))


def free_propagate(gamma_z: ReducedZDensity, t: float) -> ReducedZDensity:
    """``U^{(k)}(t) gamma``: ``exp(i t d^2)`` on every ket and bra variable."""
    k = gamma_z.k
    ph = np.exp(-1j * t * gamma_z.grid.k2)
    K = gamma_z.kernel.copy()
    for ax in range(2 * k):
        shape = [1] * (2 * k)
        shape[ax] = -1
        K = K * (ph if ax < k else ph.conj()).reshape(shape)
    return ReducedZDensity(gamma_z.grid, K)


def free_commutator(gamma_z: ReducedZDensity) -> ReducedZDensity:
    """``sum_j [-d^2_{z_j}, gamma]``."""
    k = gamma_z.k
    k2 = gamma_z.grid.k2
    E = np.zeros((gamma_z.grid.points,) * (2 * k))
    for ax in range(2 * k):
        shape = [1] * (2 * k)
        shape[ax] = -1
        E = E + (1.0 if ax < k else -1.0) * k2.reshape(shape)
    return ReducedZDensity(gamma_z.grid, E * gamma_z.kernel)


# --------------------------------------------------------------------------
# BBGKY


def fd_sample_times(centers: Sequence[float], dt_fd: float) -> np.ndarray:
    """Sample times ``t - dt_fd, t, t + dt_fd`` for central differences."""
    pts = set()
    for c in centers:
        pts.update((c - dt_fd, c, c + dt_fd))
    return np.asarray(sorted(p for p in pts if p >= 0.0))


def _triples(times: np.ndarray, dt_fd: float | None, tol: float = 1e-9):
    out = []
    for i in range(1, times.size - 1):
        hl = times[i] - times[i - 1]
        hr = times[i + 1] - times[i]
        if abs(hl - hr) > tol * max(1.0, hl):
            continue
        if dt_fd is not None and abs(hl - dt_fd) > tol * max(1.0, dt_fd):
            continue
        out.append((i, 0.5 * (hl + hr)))
    return out


def _factor(psi: np.ndarray, k: int) -> np.ndarray:
    d = psi.shape[0]
    return psi.reshape(d**k, -1)


def bbgky_rhs(spec: HamiltonianSpec, psi: np.ndarray, k: int) -> np.ndarray:
    """Right-hand side of the k-th BBGKY equation for a pure state, ``(d^k, d^k)``.

    ``sum_j [h_j, g] + (1/N) sum_{i<j<=k} [V_ij, g]
    + ((N-k)/N) sum_j Tr_{k+1} [V_{j,k+1}, g^{(k+1)}]``, with ``h`` the
    one-body operator of the rescaled frame.
    """
    N = spec.N
    F = _factor(psi, k)
    rest = F.shape[1]
    HF = spec.apply_tensor(F.reshape(psi.shape[:k] + (rest,)), n=k).reshape(F.shape)
    X = HF @ F.conj().T
    if k < N and spec.interacting:
        acc = np.zeros_like(psi)
        for j in range(k):
            acc += spec.apply_pair_potential(psi, j, k)
        X += ((N - k) / N) * (_factor(acc, k) @ F.conj().T)
    return X - X.conj().T


def bbgky_residual(
    traj: Trajectory,
    spec: HamiltonianSpec,
    k: int = 1,
    dt_fd: float | None = None,
) -> HierarchyResidual:
    """HS norm of ``i d_t g^{(k)} - RHS`` at interior samples.

    The time derivative is a central difference over neighbouring samples
    spaced by ``dt_fd``; raises :class:`SamplingError` if no such triple exists.
    """
    N = spec.N
    if not 1 <= k <= N:
        raise ShapeError(f"need 1 <= k <= N={N}")
    trip = _triples(traj.times, dt_fd)
    if not trip:
        raise SamplingError(
            "trajectory has no equally spaced sample triples"
            + (f" at dt_fd={dt_fd:g}" if dt_fd is not None else "")
            + "; use fd_sample_times()"
        )
    times, res = [], []
    for i, h in trip:
        Fm = _factor(traj.states[i - 1].coeffs, k)
        Fp = _factor(traj.states[i + 1].coeffs, k)
        dg = (Fp @ Fp.conj().T - Fm @ Fm.conj().T) / (2.0 * h)
        R = 1j * dg - bbgky_rhs(spec, traj.states[i].coeffs, k)
        times.append(traj.times[i])
        res.append(float(np.linalg.norm(R)))
    h = trip[0][1]
    return HierarchyResidual(
        k, times, res, h, "bbgky",
        {"N": N, "omega": spec.omega, "d": spec.basis.dim},
    )


# --------------------------------------------------------------------------
# GP hierarchy on factorized trajectories


def effective_coupling(b0: float, x_quartic: float = 1.0 / (2.0 * math.pi)) -> float:
    """``b0 * int |g|^4`` for the transverse profile ``g`` (default ``h_1``)."""
    return float(b0 * x_quartic)


def _resolve_coupling(traj, variant, coupling, b0, x_quartic, rtol=1e-8):
    c_traj = float(traj.fields[0].c)
    if variant == "one-dimensional":
        if b0 is not None:
            raise ConfigError("b0 applies to the coupled variant only")
        c = c_traj if coupling is None else float(coupling)
    elif variant == "coupled":
        if b0 is None:
            raise ConfigError("the coupled variant needs b0")
        c = effective_coupling(b0, x_quartic)
        if coupling is not None and abs(coupling - c) > rtol * max(1.0, abs(c)):
            raise ConfigError(f"coupling {coupling:g} differs from b0*int|g|^4 = {c:g}")
    else:
        raise ConfigError(f"unknown variant {variant!r}")
    if abs(c - c_traj) > rtol * max(1.0, abs(c)):
        raise ConfigError(
            f"trajectory was run with c={c_traj:g} but the {variant} hierarchy "
            f"has coupling {c:g}"
        )
    return c


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    if times.size > 1:
        dt = np.diff(times)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
    return w


def _product_terms_hs(vecs: np.ndarray, terms) -> float:
    """HS norm of ``sum_r c_r (x)_m |a_rm><b_rm|``.

    ``vecs`` holds the distinct vectors (rows); each term is
    ``(c, ket_indices, bra_indices)``.  Uses Gram matrices only.
    """
    G = vecs.conj() @ vecs.T  # G[a, b] = <a|b>
    c = np.array([t[0] for t in terms], dtype=complex)
    A = np.array([t[1] for t in terms], dtype=int)
    B = np.array([t[2] for t in terms], dtype=int)
    R, k = A.shape
    total = 0.0 + 0.0j
    chunk = max(1, 2_000_000 // max(R, 1))
    for s in range(0, R, chunk):
        sl = slice(s, s + chunk)
        P = np.ones((min(chunk, R - s), R), dtype=complex)
        for m in range(k):
            # <|a_r><b_r|, |a_r'><b_r'|> = <a_r|a_r'> <b_r'|b_r>
            P *= G[A[sl, m][:, None], A[None, :, m]] * G[B[None, :, m], B[sl, m][:, None]]
        total += np.conj(c[sl]) @ P @ c
    return math.sqrt(max(total.real, 0.0))


def _product_terms_dense(vecs: np.ndarray, terms, M: int) -> float:
    k = len(terms[0][1])
    D = np.zeros((M**k, M**k), dtype=complex)
    for cr, ka, kb in terms:
        a = vecs[ka[0]]
        b = vecs[kb[0]]
        for m in range(1, k):
            a = np.kron(a, vecs[ka[m]])
            b = np.kron(b, vecs[kb[m]])
        D += cr * np.outer(a, b.conj())
    return float(np.linalg.norm(D))


def gp_defect_terms(grid, phis, times, i: int, k: int, c: float):
    """Vectors and product terms of the integral-form defect at ``times[i]``.

    ``phis`` are unitary Fourier coefficients of the trajectory.  The
    difference ``|u><u|^k - |v><v|^k`` is telescoped through ``e = u - v`` so
    an exact solution never relies on cancellation of O(1) terms.
    """
    k2 = grid.k2
    t = times[i]
    vecs = []

    def add(v):
        vecs.append(v)
        return len(vecs) - 1

    u = phis[i]
    v = np.exp(-1j * t * k2) * phis[0]
    iu, iv, ie = add(u), add(v), add(u - v)
    terms = []
    # |u><u|^k - |v><v|^k = sum_m V^{m-1} (|e><u| + |v><e|) U^{k-m}
    for m in range(k):
        for ket, bra in ((ie, iu), (iv, ie)):
            kets = [iv] * m + [ket] + [iu] * (k - m - 1)
            bras = [iv] * m + [bra] + [iu] * (k - m - 1)
            terms.append((1.0, kets, bras))
    w = _trapezoid_weights(np.asarray(times[: i + 1]))
    for l in range(i + 1):
        if w[l] == 0.0 or c == 0.0:
            continue
        ph = np.exp(-1j * (t - times[l]) * k2)
        vals = grid.to_grid(phis[l])
        rho_phi = grid.from_grid(np.abs(vals) ** 2 * vals) / grid.dz
        ip, iq = add(ph * phis[l]), add(ph * rho_phi)
        coef = -1j * c * w[l]
        for j in range(k):
            base = [ip] * k
            kq = base.copy()
            kq[j] = iq
            # B_j g^{(k+1)} = |rho phi><phi| - |phi><rho phi| in slot j
            terms.append((coef, kq, base))
            terms.append((-coef, base, kq))
    return np.array(vecs), terms


def gp_residual(
    traj: NLSTrajectory,
    k: int = 1,
    variant: str = "one-dimensional",
    coupling: float | None = None,
    b0: float | None = None,
    x_quartic: float = 1.0 / (2.0 * math.pi),
    eval_times: Sequence[float] | None = None,
    dense: bool | None = None,
) -> HierarchyResidual:
    """Integral-form GP defect of ``|phi><phi|^{(x)k}`` along an NLS trajectory.

    Evaluates ``g(t) - U(t) g(0) - i c sum_j int_0^t U(t-s) B_{j,k+1} g^{(k+1)}(s) ds``
    in HS norm with the trapezoid rule over the trajectory samples.  For the
    ``coupled`` variant the coupling is ``b0 * x_quartic``; any mismatch with
    the coupling the trajectory was run with raises :class:`ConfigError`.
    """
    if k < 1:
        raise ShapeError("k must be >= 1")
    c = _resolve_coupling(traj, variant, coupling, b0, x_quartic)
    grid = traj.fields[0].grid
    times = np.asarray(traj.times, dtype=float)
    if times[0] != 0.0 or np.any(np.diff(times) <= 0):
        raise SamplingError("trajectory must start at t=0 with increasing times")
    phis = [f.coeffs for f in traj.fields]
    idx = (
        range(1, times.size)
        if eval_times is None
        else [int(np.argmin(np.abs(times - t))) for t in eval_times]
    )
    M = grid.points
    if dense is None:
        dense = M**k <= 1024
    res, ts = [], []
    for i in idx:
        vecs, terms = gp_defect_terms(grid, phis, times, i, k, c)
        r = _product_terms_dense(vecs, terms, M) if dense else _product_terms_hs(vecs, terms)
        res.append(r)
        ts.append(times[i])
    ds = float(np.max(np.diff(times)))
    return HierarchyResidual(
        k, ts, res, ds, "gp-" + variant,
        {"c": c, "nls_dt": traj.dt, "scheme": traj.scheme, "M_z": M, "dense": bool(dense)},
    )


def gp_dense_residual(
    times: Sequence[float], gammas: Sequence[ReducedZDensity], c: float
) -> HierarchyResidual:
    """Integral-form defect for general ``g^{(k+1)}`` kernels (small grids).

    ``gammas`` has order ``k+1``; ``g^{(k)}`` is its partial trace.
    """
    times = np.asarray(times, dtype=float)
    if len(gammas) != times.size or times.size < 2:
        raise SamplingError("need one density per time and at least two times")
    k = gammas[0].k - 1
    low = [z_partial_trace(g) for g in gammas]
    coll = []
    for g in gammas:
        K = sum(collision_op(g, j).kernel for j in range(1, k + 1))
        coll.append(K)
    res = []
    for i in range(1, times.size):
        t = times[i]
        w = _trapezoid_weights(times[: i + 1])
        D = low[i].kernel - free_propagate(low[0], t).kernel
        for l in range(i + 1):
            D = D - 1j * c * w[l] * free_propagate(ReducedZDensity(low[0].grid, coll[l]), t - times[l]).kernel
        res.append(float(np.linalg.norm(D.ravel())))
    return HierarchyResidual(k, times[1:], res, float(np.max(np.diff(times))), "gp-dense", {"c": c})


def gp_differential_residual(traj: NLSTrajectory, k: int = 1, c: float | None = None) -> HierarchyResidual:
    """Central-difference residual of the differential form, factorized input.

    ``|| i d_t g - sum_j [-d^2, g] + c sum_j B_{j,k+1} g^{(k+1)} ||_HS`` at interior
    samples with equal spacing on both sides.
    """
    c = traj.fields[0].c if c is None else float(c)
    grid = traj.fields[0].grid
    trip = _triples(np.asarray(traj.times), None)
    if not trip:
        raise SamplingError("trajectory has no equally spaced sample triples")
    M = grid.points
    times, res = [], []
    for i, h in trip:
        gm = ReducedZDensity.product(grid, traj.fields[i - 1].coeffs, k + 1)
        gp = ReducedZDensity.product(grid, traj.fields[i + 1].coeffs, k + 1)
        g0 = ReducedZDensity.product(grid, traj.fields[i].coeffs, k + 1)
        dg = (z_partial_trace(gp).kernel - z_partial_trace(gm).kernel) / (2 * h)
        low = z_partial_trace(g0)
        R = 1j * dg - free_commutator(low).kernel
        for j in range(1, k + 1):
            R = R + c * collision_op(g0, j).kernel
        times.append(traj.times[i])
        res.append(float(np.linalg.norm(R.ravel())))
    return HierarchyResidual(k, times, res, trip[0][1], "gp-differential", {"c": c, "M_z": M})


# --------------------------------------------------------------------------
# space-time bound meter


@dataclass
class SpaceTimeReport:
    k: int
    epsilon: float
    times: np.ndarray
    integrand: np.ndarray
    value: float

    def record(self) -> dict:
        return {
            "kind": "space-time",
            "k": self.k,
            "epsilon": self.epsilon,
            "value": self.value,
            "times": np.asarray(self.times).tolist(),
            "integrand": np.asarray(self.integrand).tolist(),
        }


def weighted_collision_norm(gamma_z: ReducedZDensity, j: int, epsilon: float = 0.25) -> float:
    """``|| prod <d_{z_m}>^eps <d_{z'_m}>^eps B_{j,k+1} g ||_{L^2}``."""
    B = collision_op(gamma_z, j)
    wt = (1.0 + B.grid.k2) ** (0.5 * epsilon)
    K = B.kernel
    for ax in range(2 * B.k):
        shape = [1] * (2 * B.k)
        shape[ax] = -1
        K = K * wt.reshape(shape)
    return float(np.linalg.norm(K.ravel()))


def space_time_bound(traj: NLSTrajectory, k: int = 1, epsilon: float = 0.25) -> SpaceTimeReport:
    """Time integral of the weighted collision norm for ``|phi><phi|^{(x)(k+1)}``.

    The bound is the same for every ``j`` by symmetry.  For a factorized
    kernel the norm is ``||Y||_HS * ||p_w||^{2(k-1)}`` with
    ``Y = |rho phi><phi| - |phi><rho phi|`` after weighting.
    """
    grid = traj.fields[0].grid
    wt = (1.0 + grid.k2) ** (0.5 * epsilon)
    vals = []
    for f in traj.fields:
        p = f.coeffs
        q = grid.from_samples(np.abs(f.values) ** 2 * f.values)
        a, b = wt * q, wt * p
        na, nb = np.vdot(a, a).real, np.vdot(b, b).real
        # ||A - A^*||^2 = 2 ||A||^2 - 2 Re Tr(A A) for A = |a><b|
        hs2 = 2.0 * (na * nb - (np.vdot(b, a) ** 2).real)
        vals.append(math.sqrt(max(hs2, 0.0)) * nb ** (k - 1))
    t = np.asarray(traj.times)
    vals = np.asarray(vals)
    return SpaceTimeReport(k, epsilon, t, vals, float(np.trapezoid(vals, t)))


# --------------------------------------------------------------------------
# Gaussian engine for delta comparisons


@dataclass(frozen=True)
class Gauss1D:
    """``A exp(-p x^2 + q x)`` with ``Re p > 0``."""

    A: complex = 1.0
    p: complex = 0.5
    q: complex = 0.0

    def __call__(self, x):
        return self.A * np.exp(-self.p * np.asarray(x) ** 2 + self.q * np.asarray(x))

    def __mul__(self, other: "Gauss1D") -> "Gauss1D":
        return Gauss1D(self.A * other.A, self.p + other.p, self.q + other.q)

    def conj(self) -> "Gauss1D":
        return Gauss1D(np.conj(self.A), np.conj(self.p), np.conj(self.q))

    def integral(self) -> complex:
        return complex(self.A * np.sqrt(math.pi / self.p) * np.exp(self.q**2 / (4 * self.p)))


def gaussian_orbital(center=(0.0, 0.0, 0.0), width=(1.0, 1.0, 1.0), momentum=(0.0, 0.0, 0.0)):
    """Normalized separable orbital ``prod exp(-(x-c)^2/(4 s^2) + i k x)``.

    ``width`` is the standard deviation of ``|u|^2`` per axis.
    """
    axes = []
    for c0, s, k0 in zip(center, width, momentum):
        p = 1.0 / (4.0 * s * s)
        q = 2.0 * p * c0 + 1j * k0
        A = (2.0 * math.pi * s * s) ** -0.25 * math.exp(-p * c0 * c0)
        axes.append(Gauss1D(A, p, q))
    return tuple(axes)


@dataclass(frozen=True)
class Mollifier:
    """``f(r) = sum_i w_i G_{s_i}(r)`` with normalized anisotropic Gaussians.

    ``terms`` holds ``(w_i, (sx, sy, sz))``.
    """

    terms: tuple

    @property
    def integral(self) -> float:
        return float(sum(w for w, _ in self.terms))

    def scaled(self, alpha: float) -> "Mollifier":
        """``alpha^{-3} f(r / alpha)``."""
        return Mollifier(tuple((w, tuple(alpha * s for s in sig)) for w, sig in self.terms))

    @classmethod
    def gaussian(cls, sigma: float = 1.0) -> "Mollifier":
        return cls(((1.0, (sigma,) * 3),))

    @classmethod
    def sign_changing(cls, s1: float = 1.0, s2: float = 2.0, w1: float = 2.0) -> "Mollifier":
        """``w1 G_{s1} - (w1 - 1) G_{s2}``, unit integral, takes both signs."""
        return cls(((w1, (s1,) * 3), (1.0 - w1, (s2,) * 3)))

    @classmethod
    def from_potential(cls, V: PotentialSpec, N: int, omega: float) -> "Mollifier":
        """The rescaled pair potential as a Gaussian mixture (weights sum to ``int V``)."""
        terms = []
        for amp, sx, sz in V.widths(N, omega):
            terms.append((amp * (2 * math.pi) ** 1.5 * sx * sx * sz, (sx, sx, sz)))
        return cls(tuple(terms))


_GH_CACHE: dict = {}


def _gh(n):
    if n not in _GH_CACHE:
        _GH_CACHE[n] = np.polynomial.hermite.hermgauss(n)
    return _GH_CACHE[n]


def _smeared_1d(a: Gauss1D, b: Gauss1D, sigma: float, n: int = 40) -> complex:
    """``int int a(x) b(y) G_sigma(x - y) dx dy`` by 2D Gauss-Hermite quadrature.

    The real part of the joint quadratic exponent is diagonalised by a
    Cholesky factor, so the nodes follow the actual Gaussian envelope in
    ``(x, y)`` whatever the ratio of ``sigma`` to the orbital widths.
    """
    t, wt = _gh(n)
    # exponent -(v^T P v) + Re(q)^T v, v = (x, y)
    g = 1.0 / (2.0 * sigma**2)
    P = np.array([[np.real(a.p) + g, -g], [-g, np.real(b.p) + g]])
    q = np.array([np.real(a.q), np.real(b.q)])
    L = np.linalg.cholesky(P)
    center = 0.5 * np.linalg.solve(P, q)
    Linv_T = np.linalg.inv(L).T
    T1, T2 = np.meshgrid(t, t, indexing="ij")
    X = center[0] + Linv_T[0, 0] * T1 + Linv_T[0, 1] * T2
    Y = center[1] + Linv_T[1, 0] * T1 + Linv_T[1, 1] * T2
    kern = np.exp(-g * (X - Y) ** 2) / math.sqrt(2.0 * math.pi * sigma**2)
    vals = a(X) * b(Y) * kern * np.exp(T1**2 + T2**2)
    jac = 1.0 / (L[0, 0] * L[1, 1])
    return complex(jac * (wt @ vals @ wt))


def _contact_1d(a: Gauss1D, b: Gauss1D) -> complex:
    t, wt = _gh(40)
    ab = a * b
    pr = float(np.real(ab.p))
    s = 1.0 / math.sqrt(pr)
    xc = float(np.real(ab.q)) / (2 * pr)
    X = xc + s * t
    return complex(s * np.sum(wt * ab(X) * np.exp(t**2)))


def smeared_pair_trace(a, b, f: Mollifier) -> complex:
    """``int int a(r) b(r') f(r - r') dr dr'`` for separable ``a, b``."""
    total = 0.0 + 0.0j
    for w, sig in f.terms:
        val = complex(w)
        for ax in range(3):
            val *= _smeared_1d(a[ax], b[ax], sig[ax])
        total += val
    return total


def contact_pair_trace(a, b) -> complex:
    """``int a(r) b(r) dr`` for separable ``a, b``."""
    val = 1.0 + 0.0j
    for ax in range(3):
        val *= _contact_1d(a[ax], b[ax])
    return val


def _mul3(u, v):
    return tuple(x * y for x, y in zip(u, v))


def _conj3(u):
    return tuple(x.conj() for x in u)


@dataclass(frozen=True)
class GaussianTestSetup:
    """Rank-one test operator ``J = |g><g'|`` acting on particle ``j`` and a
    factorized ``g^{(k+1)} = |psi><psi|``, ``psi = u_1 (x) ... (x) u_{k+1}``.

    Other particles ``m <= k`` carry ``J_m = |g_m><g'_m|`` too.
    """

    orbitals: tuple  # k+1 separable orbitals
    kets: tuple  # k separable g
    bras: tuple  # k separable g'
    j: int = 1

    @property
    def k(self) -> int:
        return len(self.kets)

    def _pieces(self):
        j = self.j - 1
        k = self.k
        pre = 1.0 + 0.0j
        for m in range(k):
            if m == j:
                continue
            # <psi_m| J_m |psi_m> = <u_m|g_m><g'_m|u_m>
            o1 = np.prod([(self.orbitals[m][ax].conj() * self.kets[m][ax]).integral() for ax in range(3)])
            o2 = np.prod([(self.bras[m][ax].conj() * self.orbitals[m][ax]).integral() for ax in range(3)])
            pre *= o1 * o2
        # slot j: <u_j|g_j> * int conj(g'_j)(r) u_j(r) |u_{k+1}(r')|^2 f(r - r')
        pre *= np.prod([(self.orbitals[j][ax].conj() * self.kets[j][ax]).integral() for ax in range(3)])
        a = _mul3(_conj3(self.bras[j]), self.orbitals[j])
        b = _mul3(_conj3(self.orbitals[k]), self.orbitals[k])
        return pre, a, b

    def smeared(self, f: Mollifier) -> complex:
        """``Tr J f(r_j - r_{k+1}) g^{(k+1)}``."""
        pre, a, b = self._pieces()
        return complex(pre * smeared_pair_trace(a, b, f))

    def contact(self) -> complex:
        """``Tr J delta(r_j - r_{k+1}) g^{(k+1)}``."""
        pre, a, b = self._pieces()
        return complex(pre * contact_pair_trace(a, b))


def default_test_setup(k: int = 1, seed: int = 0) -> GaussianTestSetup:
    """Off-centre, moving orbitals and unit-norm Gaussian test vectors."""
    rng = np.random.default_rng(seed)
    orbs = tuple(
        gaussian_orbital(rng.uniform(-0.5, 0.5, 3), rng.uniform(0.6, 1.2, 3), rng.uniform(-1, 1, 3))
        for _ in range(k + 1)
    )
    kets = tuple(gaussian_orbital(rng.uniform(-0.5, 0.5, 3), rng.uniform(0.5, 1.5, 3)) for _ in range(k))
    bras = tuple(gaussian_orbital(rng.uniform(-0.5, 0.5, 3), rng.uniform(0.5, 1.5, 3)) for _ in range(k))
    return GaussianTestSetup(orbs, kets, bras)


@dataclass
class DeltaRateReport:
    kappa: float
    alphas: np.ndarray
    errors: np.ndarray
    slope: float
    slope_stderr: float

    @property
    def passed(self) -> bool:
        dec = bool(np.all(np.diff(self.errors[np.argsort(self.alphas)]) >= 0))
        return dec and self.slope >= self.kappa

    def record(self) -> dict:
        return {
            "kind": "delta-rate",
            "kappa": self.kappa,
            "alphas": self.alphas.tolist(),
            "errors": self.errors.tolist(),
            "slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "passed": self.passed,
        }


def delta_rate_study(
    f: Mollifier,
    setup: GaussianTestSetup | None = None,
    kappa: float = 0.4,
    alphas: Sequence[float] = (0.2, 0.1, 0.05, 0.025, 0.0125),
) -> DeltaRateReport:
    """Measure ``|Tr J (f_a(r_j - r_{k+1}) - delta) g|`` against ``alpha``.

    The fitted log-log slope is compared with ``kappa``.
    """
    if not 0.0 < kappa < 0.5:
        raise PreconditionError("kappa must lie in (0, 1/2)")
    if abs(f.integral - 1.0) > 1e-12:
        raise PreconditionError(f"mollifier must integrate to 1, got {f.integral:.15g}")
    setup = default_test_setup() if setup is None else setup
    alphas = np.asarray(alphas, dtype=float)
    if alphas.size < 2 or np.any(alphas <= 0):
        raise PreconditionError("need at least two positive alphas")
    ref = setup.contact()
    errs = np.array([abs(setup.smeared(f.scaled(a)) - ref) for a in alphas])
    fit = stats.linregress(np.log(alphas), np.log(errs))
    return DeltaRateReport(kappa, alphas, errs, float(fit.slope), float(fit.stderr))


@dataclass
class InteractionSweep:
    points: list  # (N, omega)
    gaps: np.ndarray
    monotone: bool

    def record(self) -> dict:
        return {
            "kind": "interaction-convergence",
            "points": [list(p) for p in self.points],
            "gaps": self.gaps.tolist(),
            "monotone": self.monotone,
        }


def rescaled_setup(z_width: float = 1.0, k: int = 1, seed: int = 0) -> GaussianTestSetup:
    """Rescaled-frame product orbitals ``h_1(x) phi(z)`` with random rank-one ``J``."""
    rng = np.random.default_rng(seed)
    s_x = math.sqrt(0.5)  # |h_1|^2 has variance 1/2 per axis
    orbs = tuple(
        gaussian_orbital((0.0, 0.0, 0.3), (s_x, s_x, z_width), (0.0, 0.0, 0.7)) for _ in range(k + 1)
    )
    kets = tuple(gaussian_orbital(rng.uniform(-0.3, 0.3, 3), rng.uniform(0.5, 1.0, 3)) for _ in range(k))
    bras = tuple(gaussian_orbital(rng.uniform(-0.3, 0.3, 3), rng.uniform(0.5, 1.0, 3)) for _ in range(k))
    return GaussianTestSetup(orbs, kets, bras)


def interaction_convergence(
    V: PotentialSpec,
    points: Sequence[tuple[int, float]],
    setup: GaussianTestSetup | None = None,
) -> InteractionSweep:
    """``|Tr J V_{N,w}(r_j - r_{k+1}) g + b0 Tr J delta g|`` along ``points``.

    ``b0 = |int V|``.  ``monotone`` reports whether the gap decreases along the
    given order of points.
    """
    setup = rescaled_setup() if setup is None else setup
    b0 = abs(V.integral)
    ref = setup.contact()
    gaps = []
    for N, om in points:
        gaps.append(abs(setup.smeared(Mollifier.from_potential(V, N, om)) + b0 * ref))
    gaps = np.asarray(gaps)
    return InteractionSweep([tuple(p) for p in points], gaps, bool(np.all(np.diff(gaps) < 0)))
