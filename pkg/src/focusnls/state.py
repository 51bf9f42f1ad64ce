"""Bosonic N-body states in the rescaled frame."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .basis import SingleParticleBasis
from .errors import ShapeError


def symmetrize(tensor: np.ndarray, N: int) -> np.ndarray:
    """Average over all permutations of the first ``N`` axes."""
    perms = list(itertools.permutations(range(N)))
    extra = tuple(range(N, tensor.ndim))
    out = np.zeros_like(tensor)
    for p in perms:
        out += np.transpose(tensor, p + extra)
    return out / len(perms)


@dataclass
class ManyBodyState:
    """Coefficient tensor of shape ``(d,) * N`` over a single-particle basis.

    Each axis indexes ``mode * M_z + kz`` (x-major).  Instances are treated as
    values: operations return new states.
    """

    basis: SingleParticleBasis
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        d = self.basis.dim
        if self.coeffs.ndim < 1 or any(s != d for s in self.coeffs.shape):
            raise ShapeError(f"coefficients must have shape (d,)*N with d={d}")

    @property
    def N(self) -> int:
        return self.coeffs.ndim

    @property
    def dim(self) -> int:
        return self.basis.dim

    def mixed(self) -> np.ndarray:
        """View with shape ``(M_x, M_z) * N``."""
        return self.coeffs.reshape(self.basis.shape * self.N)

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs.ravel()))

    def normalized(self) -> "ManyBodyState":
        n = self.norm()
        if n == 0.0:
            raise ShapeError("cannot normalize the zero state")
        return ManyBodyState(self.basis, self.coeffs / n)

    def symmetrized(self) -> "ManyBodyState":
        return ManyBodyState(self.basis, symmetrize(self.coeffs, self.N))

    def symmetry_defect(self) -> float:
        return float(np.linalg.norm((self.coeffs - symmetrize(self.coeffs, self.N)).ravel()))

    def transposed(self, i: int, j: int) -> "ManyBodyState":
        return ManyBodyState(self.basis, np.swapaxes(self.coeffs, i, j).copy())

    def inner(self, other: "ManyBodyState") -> complex:
        return complex(np.vdot(self.coeffs.ravel(), other.coeffs.ravel()))

    def copy(self) -> "ManyBodyState":
        return ManyBodyState(self.basis, self.coeffs.copy())


def product_state(basis: SingleParticleBasis, N: int, single) -> ManyBodyState:
    """``single^{(x) N}`` for a single-particle coefficient array ``(M_x, M_z)``."""
    single = np.asarray(single, dtype=complex).reshape(basis.dim)
    t = single
    for _ in range(N - 1):
        t = np.multiply.outer(t, single)
    return ManyBodyState(basis, t)


def random_symmetric_state(basis, N: int, rng=None, decay: float | None = None):
    """Random normalized symmetric state.

    With ``decay`` set, single-particle amplitudes are damped by
    ``exp(-decay * e)`` where ``e`` is the one-body energy at ``omega=1``, so the
    state has modest energy.
    """
    rng = np.random.default_rng(rng)
    shape = (basis.dim,) * N
    c = rng.normal(size=shape) + 1j * rng.normal(size=shape)
    if decay is not None:
        e = basis.one_body_energies(1.0).ravel()
        damp = np.exp(-decay * e)
        for ax in range(N):
            sl = [None] * N
            sl[ax] = slice(None)
            c = c * damp[tuple(sl)]
    c = symmetrize(c, N)
    return ManyBodyState(basis, c).normalized()


class SymmetricSpace:
    """Isometric embedding of the bosonic subspace of ``(C^d)^{(x) N}``.

    Coordinates are indexed by multisets of single-particle indices; the
    basis vector for a multiset is the normalized sum over its orbit.
    """

    def __init__(self, d: int, N: int):
        self.d, self.N = d, N
        idx = np.indices((d,) * N).reshape(N, -1)
        canon = np.sort(idx, axis=0)
        keys = np.ravel_multi_index(canon, (d,) * N)
        uniq, rep, counts = np.unique(keys, return_inverse=True, return_counts=True)
        self.rep = rep.ravel()
        self.orbit = counts.astype(float)
        self.size = len(uniq)
        self._sqrt_orbit = np.sqrt(self.orbit)

    def embed(self, c: np.ndarray) -> np.ndarray:
        """Coordinates ``(size, ...)`` -> tensor ``(d,)*N + ...``."""
        c = np.asarray(c)
        flat = c[self.rep] / self._sqrt_orbit[self.rep].reshape((-1,) + (1,) * (c.ndim - 1))
        return flat.reshape((self.d,) * self.N + c.shape[1:])

    def restrict(self, t: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`embed`."""
        t = np.asarray(t)
        flat = t.reshape((self.d**self.N, -1))
        out = np.zeros((self.size, flat.shape[1]), dtype=np.result_type(flat, float))
        np.add.at(out, self.rep, flat)
        out /= self._sqrt_orbit[:, None]
        return out.reshape((self.size,) + t.shape[self.N:])


def norm_factor(N: int) -> float:
    return 1.0 / math.factorial(N)
