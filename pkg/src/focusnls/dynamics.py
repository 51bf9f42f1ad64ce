"""Real- and imaginary-time propagation.

The N-body flow ``psi(t) = exp(-i t H) psi0`` uses adaptive Lanczos
exponential steps.  The 1D focusing cubic NLS ``i d_t phi = -phi'' -
c |phi|^2 phi`` uses Fourier split-step schemes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import linalg

from .basis import FourierGrid1D
from .errors import (
    CollapseError,
    ConvergenceError,
    KrylovBreakdown,
    PreconditionError,
    ShapeError,
)
from .operators import HamiltonianSpec, energy_moment
from .state import ManyBodyState, product_state, symmetrize

__all__ = [
    "ManyBodyState",
    "product_state",
    "symmetrize",
    "krylov_step",
    "Trajectory",
    "evolve_nbody",
    "default_dt",
    "NLSField",
    "NLSTrajectory",
    "nls_evolve",
    "soliton",
    "gaussian_profile",
    "GroundState",
    "imaginary_time_ground",
    "imaginary_time_ground_nls",
    "lsy_energy",
]

# --------------------------------------------------------------------------
# Lanczos exponential


def _lanczos(apply: Callable, v: np.ndarray, m: int):
    """Orthonormal Krylov basis and tridiagonal projection (full reorthogonalization)."""
    beta0 = np.linalg.norm(v)
    Q = np.zeros((m + 1, v.size), dtype=complex)
    a = np.zeros(m)
    b = np.zeros(m)
    Q[0] = v / beta0
    for j in range(m):
        w = apply(Q[j])
        a[j] = np.vdot(Q[j], w).real
        w = w - a[j] * Q[j] - (b[j - 1] * Q[j - 1] if j > 0 else 0.0)
        # one Gram-Schmidt pass; conj(Q w*) avoids copying conj(Q)
        w -= np.conj(Q[: j + 1] @ np.conj(w)) @ Q[: j + 1]
        b[j] = np.linalg.norm(w)
        if b[j] < 1e-13 * max(1.0, abs(a[j])):
            return Q[: j + 1], a[: j + 1], b[:j], 0.0, beta0
        Q[j + 1] = w / b[j]
    return Q[:m], a, b[: m - 1], b[m - 1], beta0


def krylov_step(apply: Callable, v: np.ndarray, tau: complex, m: int = 20):
    """``exp(tau A) v`` for Hermitian ``A`` and its a-posteriori error estimate.

    ``tau`` is ``-i dt`` for real time and ``-dt`` for imaginary time.  The
    estimate is ``beta * h_{m+1,m} * |e_m^T exp(tau T_m) e_1|``.
    """
    shape = v.shape
    Q, a, b, h_next, beta0 = _lanczos(lambda x: apply(x.reshape(shape)).ravel(), v.ravel(), m)
    T = np.diag(a) + np.diag(b, 1) + np.diag(b, -1)
    E = linalg.expm(tau * T)[:, 0]
    err = beta0 * h_next * abs(E[-1])
    out = beta0 * (E @ Q)
    return out.reshape(shape), float(err)


# --------------------------------------------------------------------------
# N-body trajectories


@dataclass
class Trajectory:
    """Samples of an N-body evolution.

    ``states`` holds one :class:`ManyBodyState` per sample time.  ``norm_drift``
    is the deviation of the norm before renormalization, accumulated per
    interval, and ``energy`` logs ``energy_moment(1)``.
    """

    times: np.ndarray
    states: list
    norm_drift: np.ndarray
    energy: np.ndarray
    steps: int
    dt_history: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise PreconditionError("sample times must be strictly increasing")
        if len(self.states) != t.size:
            raise ShapeError("one state per sample time is required")
        self.times = t

    def __len__(self):
        return self.times.size

    def state_at(self, t: float, atol: float = 1e-12) -> ManyBodyState:
        idx = np.nonzero(np.abs(self.times - t) <= atol)[0]
        if idx.size == 0:
            raise KeyError(f"no sample at t={t}")
        return self.states[int(idx[0])]


def default_dt(spec: HamiltonianSpec) -> float:
    """Initial step from the spectral spread of ``H`` (adapted during the run)."""
    basis = spec.basis
    spread = spec.N * (basis.z_grid.k2.max() + 2.0 * spec.omega * (basis.x_basis.max_level - 1))
    if spec.interacting:
        spread += spec.N * np.abs(spec.pair_blocks).max()
    return float(min(0.1, 12.0 / max(spread, 1e-12)))


def evolve_nbody(
    spec: HamiltonianSpec,
    psi0: ManyBodyState,
    T: float = 1.0,
    dt: float | None = None,
    sample_times: Sequence[float] | None = None,
    krylov_dim: int = 20,
    tol: float = 1e-10,
    max_halvings: int = 30,
    log_energy: bool = True,
    sampler: Callable | None = None,
) -> Trajectory:
    """Propagate ``psi0`` by ``exp(-i t H)`` and record samples.

    Steps are adaptive: a step whose Lanczos error estimate exceeds
    ``tol * h`` is halved, and accepted steps with a small estimate grow by
    1.5x.  Steps always land on the requested sample times.  The state is
    renormalized after each step and the pre-renormalization drift logged.
    ``sampler(t, state)`` is called at every sample if given.
    """
    if psi0.N != spec.N:
        raise ShapeError("state particle number does not match the Hamiltonian")
    if abs(psi0.norm() - 1.0) > 1e-10:
        raise PreconditionError("initial state must be normalized")
    if sample_times is None:
        sample_times = np.linspace(0.0, T, 11)
    samples = np.asarray(sorted(set(float(t) for t in sample_times)))
    if samples[0] < 0 or samples[-1] > T + 1e-14:
        raise PreconditionError("sample times must lie in [0, T]")
    dt = default_dt(spec) if dt is None else float(dt)
    apply = spec.apply_tensor

    psi = psi0.coeffs.copy()
    t = 0.0
    states, drift, energy = [], [], []
    steps = 0
    dts = []
    acc_drift = 0.0

    def record(tt, c):
        st = ManyBodyState(psi0.basis, c.copy())
        states.append(st)
        drift.append(acc_drift)
        energy.append(energy_moment(spec, st, 1) if log_energy else math.nan)
        if sampler is not None:
            sampler(tt, st)

    for target in samples:
        while target - t > 1e-14:
            h = min(dt, target - t)
            halved = False
            for _ in range(max_halvings):
                new, err = krylov_step(apply, psi, -1j * h, krylov_dim)
                if err <= tol * h:
                    break
                h *= 0.5
                halved = True
            else:
                raise KrylovBreakdown(
                    f"Lanczos error {err:.3e} above tolerance at t={t:.6f} "
                    f"after {max_halvings} halvings (step {h:.3e})"
                )
            nrm = np.linalg.norm(new.ravel())
            acc_drift = max(acc_drift, abs(nrm - 1.0))
            psi = new / nrm
            t += h
            steps += 1
            dts.append(h)
            if halved:
                dt = h
            elif h >= dt * (1 - 1e-12) and err < 0.1 * tol * h:
                dt = h * 1.5
        record(t, psi)
    return Trajectory(
        times=samples,
        states=states,
        norm_drift=np.asarray(drift),
        energy=np.asarray(energy),
        steps=steps,
        dt_history=dts,
        meta={"krylov_dim": krylov_dim, "tol": tol, "N": spec.N, "omega": spec.omega},
    )


# --------------------------------------------------------------------------
# imaginary time


@dataclass
class GroundState:
    state: object
    energy: float
    energies: list
    iterations: int


def imaginary_time_ground(
    spec: HamiltonianSpec,
    psi0: ManyBodyState | None = None,
    tol: float = 1e-10,
    dtau: float | None = None,
    max_iter: int = 2000,
    krylov_dim: int = 20,
) -> GroundState:
    """Normalized gradient flow ``psi <- exp(-dtau H) psi / ||.||`` for the N-body problem.

    The step is halved whenever the energy would rise, so the recorded
    energy sequence is nonincreasing.  Stops when the energy change falls
    below ``tol`` (relative to ``max(1, |E|)``).
    """
    basis = spec.basis
    if psi0 is None:
        single = np.zeros(basis.shape, dtype=complex)
        z = basis.z_grid.nodes
        single[0] = basis.z_grid.from_samples(np.exp(-0.5 * z * z))
        psi0 = product_state(basis, spec.N, single).normalized()
    dtau = (1.0 / (spec.N * (2.0 * spec.omega + 1.0))) if dtau is None else dtau
    apply = spec.apply_tensor
    psi = psi0.coeffs / psi0.norm()

    def energy(c):
        return float(np.vdot(c.ravel(), apply(c).ravel()).real)

    E = energy(psi)
    trace = [E]
    for it in range(1, max_iter + 1):
        while True:
            new, _ = krylov_step(apply, psi, -dtau, krylov_dim)
            new = symmetrize(new, spec.N)
            new /= np.linalg.norm(new.ravel())
            E_new = energy(new)
            if E_new <= E + 1e-14 * max(1.0, abs(E)):
                break
            dtau *= 0.5
            if dtau < 1e-14:
                raise ConvergenceError("imaginary-time step underflow", trace)
        psi = new
        dE = E - E_new
        E = E_new
        trace.append(E)
        if dE < tol * max(1.0, abs(E)):
            return GroundState(ManyBodyState(basis, psi), E, trace, it)
        dtau = min(dtau * 1.2, 10.0)
    raise ConvergenceError(f"no convergence in {max_iter} imaginary-time steps", trace)


# --------------------------------------------------------------------------
# 1D NLS


@dataclass
class NLSField:
    """Complex field ``phi(z)`` sampled on a periodic grid.

    ``c`` is the focusing coupling of ``i d_t phi = -phi'' - c|phi|^2 phi``.
    """

    grid: FourierGrid1D
    values: np.ndarray
    c: float = 0.0
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.points,):
            raise ShapeError("field values must match the grid")

    @classmethod
    def from_coeffs(cls, grid, coeffs, c=0.0, t=0.0):
        return cls(grid, grid.sample(coeffs), c, t)

    @property
    def coeffs(self) -> np.ndarray:
        """Unitary Fourier coefficients (the z part of the N-body basis)."""
        return self.grid.from_samples(self.values)

    def mass(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dz)

    def kinetic(self) -> float:
        return float(np.sum(self.grid.k2 * np.abs(self.coeffs) ** 2))

    def energy(self) -> float:
        """``int |phi'|^2 - (c/2)|phi|^4``."""
        quartic = float(np.sum(np.abs(self.values) ** 4) * self.grid.dz)
        return self.kinetic() - 0.5 * self.c * quartic

    def momentum(self) -> float:
        """``Im int conj(phi) phi'``."""
        k = self.grid.wavenumbers.copy()
        k[self.grid.points // 2] = 0.0  # Nyquist mode has no sign
        return float(np.sum(k * np.abs(self.coeffs) ** 2))

    def sup(self) -> float:
        return float(np.max(np.abs(self.values)))

    def normalized(self) -> "NLSField":
        return NLSField(self.grid, self.values / math.sqrt(self.mass()), self.c, self.t)


def soliton(grid: FourierGrid1D, eta: float, c: float, t: float = 0.0, z0: float = 0.0):
    """``eta sqrt(2/c) sech(eta (z - z0)) exp(i eta^2 t)``; mass ``4 eta / c``."""
    if c <= 0:
        raise PreconditionError("the bright soliton needs c > 0")
    z = grid.nodes - z0
    vals = eta * math.sqrt(2.0 / c) / np.cosh(eta * z) * np.exp(1j * eta**2 * t)
    return NLSField(grid, vals, c, t)


def gaussian_profile(grid: FourierGrid1D, width: float = 1.0, c: float = 0.0, k0: float = 0.0):
    """Unit-mass Gaussian ``exp(-z^2/(2 width^2) + i k0 z)``."""
    z = grid.nodes
    vals = np.exp(-0.5 * (z / width) ** 2 + 1j * k0 * z)
    return NLSField(grid, vals, c).normalized()


@dataclass
class NLSTrajectory:
    times: np.ndarray
    fields: list
    mass: np.ndarray
    energy: np.ndarray
    momentum: np.ndarray
    dt: float
    scheme: str

    def field_at(self, t: float, atol: float = 1e-12) -> NLSField:
        idx = np.nonzero(np.abs(self.times - t) <= atol)[0]
        if idx.size == 0:
            raise KeyError(f"no sample at t={t}")
        return self.fields[int(idx[0])]


_YOSHIDA = (
    1.0 / (2.0 - 2.0 ** (1.0 / 3.0)),
    -(2.0 ** (1.0 / 3.0)) / (2.0 - 2.0 ** (1.0 / 3.0)),
    1.0 / (2.0 - 2.0 ** (1.0 / 3.0)),
)


def nls_evolve(
    phi0: NLSField,
    c: float | None = None,
    T: float = 1.0,
    dt: float = 1e-4,
    sample_times: Sequence[float] | None = None,
    scheme: str = "strang",
    ceiling_factor: float = 1e3,
) -> NLSTrajectory:
    """Split-step propagation of ``i d_t phi = -phi'' - c|phi|^2 phi``.

    ``T`` may be negative (backward evolution).  ``scheme`` is ``"strang"``
    (second order) or ``"yoshida4"`` (fourth-order composition of Strang
    steps).  Raises :class:`CollapseError` if the sup norm exceeds
    ``ceiling_factor`` times its initial value.
    """
    grid = phi0.grid
    c = phi0.c if c is None else float(c)
    if dt <= 0:
        raise PreconditionError("dt must be positive")
    if scheme == "strang":
        weights = (1.0,)
    elif scheme == "yoshida4":
        weights = _YOSHIDA
    else:
        raise PreconditionError(f"unknown scheme {scheme!r}")
    direction = 1.0 if T >= 0 else -1.0
    span = abs(T)
    if sample_times is None:
        sample_times = np.linspace(0.0, T, 11)
    samples = sorted({abs(float(s)) for s in sample_times})
    if samples and samples[-1] > span + 1e-14:
        raise PreconditionError("sample times must lie within [0, |T|]")
    ceiling = ceiling_factor * phi0.sup()
    k2 = grid.k2
    u = phi0.values.copy()

    def strang(u, h):
        u = u * np.exp(0.5j * c * h * np.abs(u) ** 2)
        u = np.fft.ifft(np.exp(-1j * k2 * h) * np.fft.fft(u))
        return u * np.exp(0.5j * c * h * np.abs(u) ** 2)

    t = 0.0
    times, fields, mass, energy, mom = [], [], [], [], []
    for target in samples:
        n = int(round((target - t) / dt))
        if n > 0:
            h = (target - t) / n
            for _ in range(n):
                for w in weights:
                    u = strang(u, direction * w * h)
                if not np.all(np.isfinite(u)) or np.max(np.abs(u)) > ceiling:
                    raise CollapseError(
                        f"sup norm exceeded {ceiling:.3e} near t={direction * t:.4f}; "
                        "refine the grid or the time step"
                    )
                t += h
        t = target
        f = NLSField(grid, u.copy(), c, direction * t)
        times.append(direction * t)
        fields.append(f)
        mass.append(f.mass())
        energy.append(f.energy())
        mom.append(f.momentum())
    return NLSTrajectory(
        np.asarray(times), fields, np.asarray(mass), np.asarray(energy),
        np.asarray(mom), dt, scheme,
    )


# --------------------------------------------------------------------------
# 1D ground states


def lsy_energy(field: NLSField, quartic: float, trap: float = 1.0) -> float:
    """``int |phi'|^2 + trap z^2 |phi|^2 + quartic |phi|^4`` (``quartic = 4 pi N g``)."""
    g = field.grid
    rho = np.abs(field.values) ** 2
    return float(
        field.kinetic()
        + trap * np.sum(g.nodes**2 * rho) * g.dz
        + quartic * np.sum(rho**2) * g.dz
    )


def imaginary_time_ground_nls(
    grid: FourierGrid1D,
    quartic: float = 0.0,
    trap: float = 1.0,
    tol: float = 1e-13,
    dtau: float = 1e-3,
    max_iter: int = 200_000,
    phi0: NLSField | None = None,
) -> GroundState:
    """Minimize :func:`lsy_energy` at unit mass by normalized gradient flow.

    Strang splitting of ``exp(-dtau(-d^2 + trap z^2 + 2 quartic |phi|^2))``
    followed by renormalization.  Steps that raise the energy are retried
    with half the step, so the energy trace is nonincreasing.
    """
    z = grid.nodes
    field = gaussian_profile(grid) if phi0 is None else phi0.normalized()
    u = field.values.copy()
    k2 = grid.k2

    def energy_of(v):
        return lsy_energy(NLSField(grid, v), quartic, trap)

    E = energy_of(u)
    trace = [E]
    for it in range(1, max_iter + 1):
        while True:
            v = u * np.exp(-0.5 * dtau * (trap * z * z + 2.0 * quartic * np.abs(u) ** 2))
            v = np.fft.ifft(np.exp(-dtau * k2) * np.fft.fft(v))
            v = v * np.exp(-0.5 * dtau * (trap * z * z + 2.0 * quartic * np.abs(v) ** 2))
            v /= math.sqrt(np.sum(np.abs(v) ** 2) * grid.dz)
            E_new = energy_of(v)
            if E_new <= E + 1e-15 * max(1.0, abs(E)):
                break
            dtau *= 0.5
            if dtau < 1e-14:
                raise ConvergenceError("imaginary-time step underflow", trace)
        u = v
        dE = E - E_new
        E = E_new
        trace.append(E)
        if dE < tol * max(1.0, abs(E)) and it > 10:
            return GroundState(NLSField(grid, u), E, trace, it)
    raise ConvergenceError(f"no convergence in {max_iter} steps", trace)
