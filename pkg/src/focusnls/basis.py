"""Single-particle spectral bases.

The transverse plane uses the eigenfunctions of ``-Delta_x + |x|^2`` grouped
by level ``l = n1 + n2`` (eigenvalue ``2(l + 1)``, degeneracy ``l + 1``); the
longitudinal line is a periodic Fourier grid on ``[-L_z/2, L_z/2)``.  A
single-particle coefficient array has shape ``(M_x, M_z)`` with the x mode
index first ("x-major"); the z index enumerates Fourier modes in FFT order.

Grid representations are *weighted*: values carry the square root of the
quadrature weight so that every transform is an isometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import BasisError, ShapeError

ORDERING_VERSION = 1


def hermite_polys(n_max: int, x) -> np.ndarray:
    """Hermite functions with the Gaussian factor stripped.

    Returns ``p`` of shape ``(n_max + 1,) + x.shape`` such that
    ``psi_n(x) = p[n] * exp(-x^2 / 2)`` is orthonormal on the real line.
    """
    x = np.asarray(x, dtype=float)
    p = np.empty((n_max + 1,) + x.shape)
    p[0] = math.pi**-0.25
    if n_max >= 1:
        p[1] = math.sqrt(2.0) * x * p[0]
    for n in range(1, n_max):
        p[n + 1] = math.sqrt(2.0 / (n + 1)) * x * p[n] - math.sqrt(n / (n + 1)) * p[n - 1]
    return p


def hermite_functions(n_max: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return hermite_polys(n_max, x) * np.exp(-0.5 * x * x)


def hermite_derivatives(n_max: int, x, order: int = 1) -> np.ndarray:
    """Derivatives of ``psi_0..psi_n_max`` from the ladder relation.

    ``psi_n' = sqrt(n/2) psi_{n-1} - sqrt((n+1)/2) psi_{n+1}``, applied
    ``order`` times; no eigenvalue relation is used.
    """
    x = np.asarray(x, dtype=float)
    top = n_max + order
    coeffs = np.eye(top + 1)[: n_max + 1]  # rows: psi_n in the psi basis
    D = np.zeros((top + 1, top + 1))
    for n in range(top + 1):
        if n >= 1:
            D[n, n - 1] = math.sqrt(n / 2.0)
        if n + 1 <= top:
            D[n, n + 1] = -math.sqrt((n + 1) / 2.0)
    for _ in range(order):
        coeffs = coeffs @ D
    return np.tensordot(coeffs, hermite_functions(top, x), axes=(1, 0))


def _momentum_sq_1d(n: int) -> np.ndarray:
    """Matrix of ``-d^2/dx^2`` on the first ``n`` Hermite functions."""
    P = np.diag((2.0 * np.arange(n) + 1.0) / 2.0)
    for i in range(n - 2):
        P[i, i + 2] = P[i + 2, i] = -math.sqrt((i + 1) * (i + 2)) / 2.0
    return P


class Hermite2DBasis:
    """Truncated eigenbasis of the 2D Hermite operator.

    Parameters
    ----------
    max_level : int
        Number of retained levels ``L``; levels ``0 .. L-1``.
    n_quad : int, optional
        Gauss-Hermite nodes per axis, default ``L + 3``.
    """

    def __init__(self, max_level: int, n_quad: int | None = None):
        if max_level < 1:
            raise ShapeError("max_level must be >= 1")
        n_quad = max_level + 3 if n_quad is None else n_quad
        if n_quad < max_level + 1:
            raise ShapeError("need n_quad >= max_level + 1")
        self.max_level = int(max_level)
        self.n_quad = int(n_quad)
        modes = [(l, m) for l in range(max_level) for m in range(l + 1)]
        self.modes = tuple(modes)
        self.n1 = np.array([l - m for l, m in modes])
        self.n2 = np.array([m for l, m in modes])
        self.levels = np.array([l for l, _ in modes])
        self.eigenvalues = 2.0 * (self.levels + 1)

        x, w = special.roots_hermite(self.n_quad)
        if not np.all(np.isfinite(x)) or not np.all(w > 0):
            raise BasisError("Gauss-Hermite node computation failed")
        self.nodes = x
        self.weights = w
        # sqrt(w e^{x^2}) psi_n(x) = sqrt(w) p_n(x)
        self.colloc = (np.sqrt(w) * hermite_polys(self.max_level - 1, x)).T  # (G, L)
        gram = self.gram()
        if not np.allclose(gram, np.eye(self.size), atol=1e-10):
            raise BasisError("quadrature Gram matrix is not the identity")

    @property
    def size(self) -> int:
        return len(self.modes)

    def mode_index(self, level: int, m: int) -> int:
        return self.modes.index((level, m))

    def eval_mode(self, index: int, x) -> np.ndarray:
        """Value of mode ``index`` at points ``x`` (trailing axis of length 2)."""
        x = np.asarray(x, dtype=float)
        n1, n2 = self.n1[index], self.n2[index]
        top = max(n1, n2)
        f1 = hermite_functions(top, x[..., 0])[n1]
        f2 = hermite_functions(top, x[..., 1])[n2]
        return f1 * f2

    def eval_all(self, x1, x2) -> np.ndarray:
        """All modes on the tensor grid ``x1 x x2``; shape ``(M_x, len(x1), len(x2))``."""
        f1 = hermite_functions(self.max_level - 1, x1)
        f2 = hermite_functions(self.max_level - 1, x2)
        return f1[self.n1][:, :, None] * f2[self.n2][:, None, :]

    def to_grid(self, coeffs) -> np.ndarray:
        """Map ``(M_x, ...)`` coefficients to weighted values ``(G, G, ...)``."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[0] != self.size:
            raise ShapeError(f"expected leading axis {self.size}, got {coeffs.shape[0]}")
        B = self.colloc
        T = B[:, self.n1][:, None, :] * B[:, self.n2][None, :, :]  # (G, G, M_x)
        return np.tensordot(T, coeffs, axes=(2, 0))

    def from_grid(self, values) -> np.ndarray:
        values = np.asarray(values)
        G = self.n_quad
        if values.shape[:2] != (G, G):
            raise ShapeError(f"expected leading axes {(G, G)}, got {values.shape[:2]}")
        B = self.colloc
        T = B[:, self.n1][:, None, :] * B[:, self.n2][None, :, :]
        return np.tensordot(T, values, axes=((0, 1), (0, 1)))

    def gram(self) -> np.ndarray:
        T = self.to_grid(np.eye(self.size))
        return np.tensordot(T, T, axes=((0, 1), (0, 1)))

    def hamiltonian_matrix(self) -> np.ndarray:
        """``-Delta_x + |x|^2`` in the mode basis (diagonal)."""
        return np.diag(self.eigenvalues)

    def laplacian_matrix(self) -> np.ndarray:
        """Galerkin matrix of ``-Delta_x`` on the retained modes."""
        P = _momentum_sq_1d(self.max_level + 2)
        n1, n2 = self.n1, self.n2
        same2 = n2[:, None] == n2[None, :]
        same1 = n1[:, None] == n1[None, :]
        return P[n1[:, None], n1[None, :]] * same2 + P[n2[:, None], n2[None, :]] * same1


class FourierGrid1D:
    """Periodic grid on ``[-L/2, L/2)`` with unitary (ortho) DFT transforms."""

    def __init__(self, box_length: float, points: int):
        if box_length <= 0:
            raise ShapeError("box_length must be positive")
        if points < 4 or points & (points - 1):
            raise ShapeError("points must be a power of two >= 4")
        self.box_length = float(box_length)
        self.points = int(points)
        self.dz = self.box_length / self.points
        self.nodes = -0.5 * self.box_length + self.dz * np.arange(self.points)
        self.wavenumbers = 2.0 * math.pi * np.fft.fftfreq(self.points, d=self.dz)

    @property
    def k2(self) -> np.ndarray:
        return self.wavenumbers**2

    def to_grid(self, coeffs, axis: int = -1) -> np.ndarray:
        return np.fft.ifft(coeffs, axis=axis, norm="ortho")

    def from_grid(self, values, axis: int = -1) -> np.ndarray:
        return np.fft.fft(values, axis=axis, norm="ortho")

    def sample(self, coeffs, axis: int = -1) -> np.ndarray:
        """Function values ``phi(z_n)``."""
        return self.to_grid(coeffs, axis) / math.sqrt(self.dz)

    def from_samples(self, values, axis: int = -1) -> np.ndarray:
        return self.from_grid(np.asarray(values) * math.sqrt(self.dz), axis)

    def evaluate(self, coeffs, z) -> np.ndarray:
        """Trigonometric interpolant at arbitrary points ``z``."""
        z = np.asarray(z, dtype=float)
        phase = np.exp(1j * np.multiply.outer(z - self.nodes[0], self.wavenumbers))
        return phase @ np.asarray(coeffs) / math.sqrt(self.box_length)

    def tail_mass(self, coeffs, fraction: float = 0.1) -> float:
        """L^2 mass within ``fraction * L`` of the box edges."""
        v = np.abs(self.to_grid(coeffs)) ** 2
        edge = np.abs(self.nodes) >= (0.5 - fraction) * self.box_length
        return float(np.sum(v[edge]))


@dataclass(frozen=True)
class SingleParticleBasis:
    x_basis: Hermite2DBasis
    z_grid: FourierGrid1D
    _cache: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def Mx(self) -> int:
        return self.x_basis.size

    @property
    def Mz(self) -> int:
        return self.z_grid.points

    @property
    def dim(self) -> int:
        return self.Mx * self.Mz

    @property
    def shape(self) -> tuple[int, int]:
        return (self.Mx, self.Mz)

    @property
    def levels(self) -> np.ndarray:
        return self.x_basis.levels

    def one_body_energies(self, omega: float) -> np.ndarray:
        """Diagonal of ``-d_z^2 + omega(-Delta_x + |x|^2)``, shape ``(M_x, M_z)``."""
        return self.z_grid.k2[None, :] + omega * self.x_basis.eigenvalues[:, None]

    def stilde_squared(self, omega: float) -> np.ndarray:
        """Diagonal of ``1 - d_z^2 + omega(-Delta_x + |x|^2 - 2)``."""
        return 1.0 + self.z_grid.k2[None, :] + 2.0 * omega * self.levels[:, None]

    def to_grid(self, coeffs) -> np.ndarray:
        """``(M_x, M_z)`` coefficients -> weighted values ``(G, G, M_z)``."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[:2] != self.shape:
            raise ShapeError(f"expected {self.shape}, got {coeffs.shape[:2]}")
        return self.x_basis.to_grid(self.z_grid.to_grid(coeffs, axis=1))

    def from_grid(self, values) -> np.ndarray:
        values = np.asarray(values)
        G = self.x_basis.n_quad
        if values.shape[:3] != (G, G, self.Mz):
            raise ShapeError(f"expected {(G, G, self.Mz)}, got {values.shape[:3]}")
        return self.z_grid.from_grid(self.x_basis.from_grid(values), axis=1)

    def sample(self, coeffs) -> np.ndarray:
        """Unweighted function values on the (node, node, z) grid."""
        xb = self.x_basis
        vals = self.to_grid(coeffs)
        wx = np.sqrt(xb.weights * np.exp(xb.nodes**2))
        return vals / (wx[:, None, None] * wx[None, :, None] * math.sqrt(self.z_grid.dz))

    def ground_product(self, z_coeffs) -> np.ndarray:
        """Coefficients of ``h(x) phi(z)``."""
        c = np.zeros(self.shape, dtype=complex)
        c[0] = z_coeffs
        return c

    def descriptor(self) -> dict:
        return {
            "L": self.x_basis.max_level,
            "G_x": self.x_basis.n_quad,
            "M_z": self.Mz,
            "L_z": self.z_grid.box_length,
            "ordering": ORDERING_VERSION,
        }

    @classmethod
    def from_descriptor(cls, desc: dict) -> "SingleParticleBasis":
        if desc.get("ordering") != ORDERING_VERSION:
            raise ShapeError(f"unsupported basis ordering {desc.get('ordering')!r}")
        return build_basis(desc["L"], desc["G_x"], desc["M_z"], desc["L_z"])


def build_basis(L: int, G_x: int | None = None, M_z: int = 32, L_z: float = 16.0):
    """Tensor basis of ``L`` Hermite levels in x and ``M_z`` Fourier modes in z."""
    return SingleParticleBasis(Hermite2DBasis(L, G_x), FourierGrid1D(L_z, M_z))


def ground_state_h(x) -> np.ndarray:
    """``h(x) = pi^{-1/2} exp(-|x|^2/2)``; ``x`` has a trailing axis of length 2."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * np.sum(x * x, axis=-1)) / math.sqrt(math.pi)


def hermite_residual_at_nodes(basis: Hermite2DBasis, omega: float = 1.0) -> float:
    """Max of ``|(-2w - Delta + w^2|x|^2) h_w|`` over the quadrature nodes.

    ``h_w(x) = w^{1/2} h(w^{1/2} x)``; the Laplacian comes from the ladder
    relation, not from the eigenvalue equation.
    """
    s = math.sqrt(omega)
    X1, X2 = np.meshgrid(basis.nodes, basis.nodes, indexing="ij")
    f1 = hermite_functions(0, s * X1)[0]
    f2 = hermite_functions(0, s * X2)[0]
    d1 = hermite_derivatives(0, s * X1, order=2)[0]
    d2 = hermite_derivatives(0, s * X2, order=2)[0]
    h = s * f1 * f2
    lap = s * omega * (d1 * f2 + f1 * d2)
    res = -2.0 * omega * h - lap + omega**2 * (X1**2 + X2**2) * h
    return float(np.max(np.abs(res)))


@dataclass(frozen=True)
class LinfRatio:
    level: int
    omega: float
    sampled: float
    kernel_sup: float


def hermite_linf_ratio(
    level: int,
    omega: float = 1.0,
    samples: int = 64,
    rng: np.random.Generator | int | None = 0,
    grid_points: int = 401,
) -> LinfRatio:
    """Empirical constant in ``||P_lw f||_inf <= C w^{1/2} ||f||_2``.

    ``sampled`` is the largest ratio over random unit functions in the level
    ``l`` eigenspace of ``-Delta + w^2 |x|^2``; ``kernel_sup`` is the exact
    supremum ``sqrt(max_x P_l(x, x))`` over that eigenspace on the same grid.
    """
    if omega < 1:
        raise ShapeError("omega must be >= 1")
    rng = np.random.default_rng(rng)
    radius = math.sqrt(2.0 * level + 2.0) + 5.0
    y = np.linspace(-radius, radius, grid_points)  # odd count keeps the origin
    s = math.sqrt(omega)
    x = y / s
    f1 = hermite_functions(level, s * x)
    modes = np.stack([f1[level - m][:, None] * f1[m][None, :] for m in range(level + 1)])
    modes = s * modes  # unit L^2 norm in the unscaled variable
    kernel = np.sum(modes**2, axis=0)
    kernel_sup = math.sqrt(float(kernel.max())) / s
    best = 0.0
    for _ in range(samples):
        c = rng.normal(size=level + 1) + 1j * rng.normal(size=level + 1)
        c /= np.linalg.norm(c)
        f = np.tensordot(c, modes, axes=(0, 0))
        best = max(best, float(np.abs(f).max()) / s)
    return LinfRatio(level, omega, best, kernel_sup)
