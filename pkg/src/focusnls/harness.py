"""Experiment configuration, initial data and convergence sweeps."""

from __future__ import annotations

import dataclasses
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .basis import SingleParticleBasis, build_basis
from .dynamics import NLSField, evolve_nbody, imaginary_time_ground, nls_evolve, soliton
from .errors import ConfigError, FocusNLSError
from .io import provenance_hash, save_state, write_gaps_csv, write_jsonl
from .marginals import (
    MetricConfig,
    dk_metric,
    hs_distance,
    limiting_structure_gap,
    partial_trace,
    product_reference,
    reduce_marginal,
    sector_norm,
    trace_distance,
)
from .operators import (
    HamiltonianSpec,
    energy_moment,
    excess_energy_moment,
    spectral_cutoff,
    symmetric_spectrum,
)
from .potential import PotentialSpec
from .scaling import coupling_report, default_omega, omega_window
from .state import ManyBodyState, product_state

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

log = logging.getLogger(__name__)

MAX_N = 3
MAX_DIM = 512


# --------------------------------------------------------------------------
# configuration


def _section(cls, data: dict, name: str):
    if not isinstance(data, dict):
        raise ConfigError(f"[{name}] must be a table")
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"[{name}]: {exc}") from None


@dataclass(frozen=True)
class ExperimentSection:
    name: str = "experiment"
    beta: float = 0.25
    N: tuple = (2, 3)
    omega: Any = "middle"
    C1: float = 1.0
    C2: float = 1.0
    T: float = 1.0
    samples: int = 11
    seed: int = 0
    allow_out_of_window: bool = False
    allow_large: bool = False

    def __post_init__(self):
        object.__setattr__(self, "N", tuple(int(n) for n in np.atleast_1d(self.N)))
        if not 0.0 < self.beta < 3.0 / 7.0:
            raise ConfigError(f"beta must lie in (0, 3/7), got {self.beta}")
        if any(n < 2 for n in self.N):
            raise ConfigError("every N must be >= 2")
        if self.T <= 0 or self.samples < 2:
            raise ConfigError("need T > 0 and at least two samples")
        if isinstance(self.omega, str):
            if self.omega not in ("middle", "lower", "upper"):
                raise ConfigError(f"omega rule {self.omega!r} is not middle/lower/upper")
        else:
            om = tuple(float(w) for w in np.atleast_1d(self.omega))
            if len(om) != len(self.N):
                raise ConfigError("explicit omega list must match the N list")
            if any(w < 1 for w in om):
                raise ConfigError("omega must be >= 1")
            object.__setattr__(self, "omega", om)


@dataclass(frozen=True)
class PotentialSection:
    kind: str = "gaussian"
    depth: float = 0.8
    width: float = 1.0

    def __post_init__(self):
        if self.kind not in ("gaussian", "zero"):
            raise ConfigError(f"potential kind {self.kind!r} is not gaussian/zero")
        if self.depth < 0 or self.width <= 0:
            raise ConfigError("need depth >= 0 and width > 0")


@dataclass(frozen=True)
class BasisSection:
    L: int = 2
    M_z: int = 32
    L_z: float = 16.0
    G_x: int | None = None

    def __post_init__(self):
        if self.L < 1 or self.M_z < 4 or self.M_z & (self.M_z - 1) or self.L_z <= 0:
            raise ConfigError("need L >= 1, M_z a power of two >= 4, L_z > 0")


@dataclass(frozen=True)
class InitialSection:
    mode: str = "product"
    profile: str = "gaussian"
    width: float = 1.0
    kappa: float = 0.2
    omega0x: float | None = None
    omega0z: float = 1.0
    V0_depth: float = 0.5
    V0_width: float = 1.0
    tol: float = 1e-10

    def __post_init__(self):
        if self.mode not in ("product", "product+cutoff", "interacting-ground"):
            raise ConfigError(f"initial mode {self.mode!r} is not supported")
        if self.profile not in ("gaussian", "soliton", "heavy-tail"):
            raise ConfigError(f"profile {self.profile!r} is not gaussian/soliton/heavy-tail")
        if self.width <= 0 or self.kappa <= 0:
            raise ConfigError("width and kappa must be positive")


@dataclass(frozen=True)
class NLSSection:
    dt: float = 1e-4
    scheme: str = "yoshida4"

    def __post_init__(self):
        if self.dt <= 0 or self.scheme not in ("strang", "yoshida4"):
            raise ConfigError("nls needs dt > 0 and scheme strang/yoshida4")


@dataclass(frozen=True)
class DynamicsSection:
    dt: float | None = None
    krylov_dim: int = 20
    tol: float = 1e-10


@dataclass(frozen=True)
class OutputSection:
    dir: str = "out"
    snapshots: bool = False


_SECTIONS = {
    "experiment": ExperimentSection,
    "potential": PotentialSection,
    "basis": BasisSection,
    "initial": InitialSection,
    "nls": NLSSection,
    "dynamics": DynamicsSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep configuration; see ``configs/sweep.toml`` for the schema."""

    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    potential: PotentialSection = field(default_factory=PotentialSection)
    basis: BasisSection = field(default_factory=BasisSection)
    initial: InitialSection = field(default_factory=InitialSection)
    nls: NLSSection = field(default_factory=NLSSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    output: OutputSection = field(default_factory=OutputSection)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        unknown = sorted(set(data) - set(_SECTIONS))
        if unknown:
            raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
        kw = {name: _section(sec, data.get(name, {}), name) for name, sec in _SECTIONS.items()}
        cfg = cls(**kw)
        cfg._check_ceilings()
        return cfg

    @classmethod
    def from_toml(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = {}
        for name in _SECTIONS:
            sec = dataclasses.asdict(getattr(self, name))
            out[name] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in sec.items()}
        return out

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with some fields replaced, e.g. ``replace(potential={"kind": "zero"})``."""
        data = self.to_dict()
        for name, upd in sections.items():
            if name not in _SECTIONS:
                raise ConfigError(f"unknown section {name!r}")
            data[name].update(upd)
        return ExperimentConfig.from_dict(data)

    @property
    def hash(self) -> str:
        # output location does not affect results
        data = self.to_dict()
        data.pop("output")
        return provenance_hash(data)

    def _check_ceilings(self):
        if self.experiment.allow_large:
            return
        d = self.build_basis_dim()
        if max(self.experiment.N) > MAX_N or d > MAX_DIM:
            raise ConfigError(
                f"desk-scale ceiling exceeded (N <= {MAX_N}, d <= {MAX_DIM}); "
                "set allow_large = true to override"
            )

    def build_basis_dim(self) -> int:
        L = self.basis.L
        return L * (L + 1) // 2 * self.basis.M_z

    def make_basis(self) -> SingleParticleBasis:
        b = self.basis
        return build_basis(b.L, b.G_x, b.M_z, b.L_z)

    def make_potential(self) -> PotentialSpec:
        p = self.potential
        if p.kind == "zero" or p.depth == 0.0:
            return PotentialSpec.zero(self.experiment.beta)
        return PotentialSpec.attractive_gaussian(p.depth, p.width, self.experiment.beta)

    def cells(self) -> list["Cell"]:
        """The ``(N, omega)`` sequence with window membership."""
        ex = self.experiment
        out = []
        for i, N in enumerate(ex.N):
            win = omega_window(ex.beta, N, ex.C1, ex.C2)
            if isinstance(ex.omega, tuple):
                om = ex.omega[i]
            elif ex.omega == "middle":
                om = float(default_omega(ex.beta, N))
            elif ex.omega == "lower":
                om = float(max(1, math.ceil(win.lower - 1e-12)))
            else:
                om = float(max(1, math.floor(win.upper + 1e-12)))
                if win.upper_open and om >= win.upper - 1e-12:
                    om -= 1.0
            inside = om in win
            if not inside and not ex.allow_out_of_window:
                raise ConfigError(
                    f"(N={N}, omega={om:g}) is outside [{win.lower:.4g}, {win.upper:.4g}] "
                    f"for beta={ex.beta}; set allow_out_of_window = true for control runs"
                )
            out.append(Cell(i, N, om, inside, win.v1, win.v_upper, win.lower, win.upper))
        return out


@dataclass(frozen=True)
class Cell:
    index: int
    N: int
    omega: float
    in_window: bool
    v1: float
    v_upper: float
    lower: float
    upper: float

    def record(self) -> dict:
        return dataclasses.asdict(self)


# --------------------------------------------------------------------------
# initial data


def z_profile(cfg: ExperimentConfig, basis: SingleParticleBasis) -> np.ndarray:
    """Unit-norm Fourier coefficients of the configured z profile."""
    ini = cfg.initial
    z = basis.z_grid
    if ini.profile == "gaussian":
        vals = np.exp(-0.5 * (z.nodes / ini.width) ** 2)
        c = z.from_samples(vals)
    elif ini.profile == "soliton":
        c_eff = coupling_report(cfg.make_potential()).c_eff
        if c_eff <= 0:
            raise ConfigError("a soliton profile needs an attractive potential")
        # unit mass: 4 eta / c = 1
        c = soliton(z, c_eff / 4.0, c_eff).coeffs
    else:
        rng = np.random.default_rng(cfg.experiment.seed)
        c = (1.0 + z.k2) ** -0.75 * np.exp(2j * math.pi * rng.uniform(size=z.points))
    return c / np.linalg.norm(c)


def step_a_spec(cfg: ExperimentConfig, N: int, omega: float, basis) -> HamiltonianSpec:
    """Trapped Hamiltonian with a repulsive ``V0`` for ground-state preparation."""
    ini = cfg.initial
    V0 = PotentialSpec.repulsive_gaussian(ini.V0_depth, ini.V0_width, cfg.experiment.beta)
    om = omega if ini.omega0x is None else float(ini.omega0x)
    return HamiltonianSpec(N, om, V0, basis, z_trap=ini.omega0z**2)


def condensate_orbital(psi: ManyBodyState) -> np.ndarray:
    """Leading eigenvector of ``Tr_x gamma^(1)`` (z coefficients, unit norm)."""
    gz = partial_trace(reduce_marginal(psi, 1), "x-component").matrix()
    w, v = np.linalg.eigh(0.5 * (gz + gz.conj().T))
    c = v[:, -1]
    k = int(np.argmax(np.abs(c)))
    return c * (abs(c[k]) / c[k])


def build_initial_data(
    cfg: ExperimentConfig, N: int, omega: float, basis: SingleParticleBasis | None = None
) -> tuple[ManyBodyState, dict]:
    """Initial state for one sweep cell plus a record of how it was made.

    Returns ``(psi0, info)``; ``info["phi0"]`` holds the z coefficients used
    for the NLS benchmark.
    """
    basis = cfg.make_basis() if basis is None else basis
    ini = cfg.initial
    info: dict = {"mode": ini.mode}
    if ini.mode == "interacting-ground":
        spec = step_a_spec(cfg, N, omega, basis)
        gs = imaginary_time_ground(spec, tol=ini.tol)
        psi = gs.state
        phi0 = condensate_orbital(psi)
        info.update(
            ground_energy=gs.energy,
            iterations=gs.iterations,
            omega0x=spec.omega,
            omega0z=ini.omega0z,
        )
    else:
        phi0 = z_profile(cfg, basis)
        psi = product_state(basis, N, basis.ground_product(phi0))
        if ini.mode == "product+cutoff":
            spec = HamiltonianSpec(N, omega, cfg.make_potential(), basis)
            psi = spectral_cutoff(spec, psi, ini.kappa, symmetric_spectrum(spec))
            info["kappa"] = ini.kappa
            info["energy_bounds"] = [
                {
                    "k": k,
                    "moment": excess_energy_moment(spec, psi, k),
                    "bound": (2.0 * N / ini.kappa) ** k,
                }
                for k in (1, 2)
            ]
    info["phi0"] = phi0
    return psi, info


# --------------------------------------------------------------------------
# sweeps


@dataclass
class SweepResult:
    """Per-sample records, trend rows and provenance of one sweep."""

    records: list
    gaps: list
    cells: list
    provenance: dict

    def sup_gaps(self, quantity: str = "trace_gap") -> list[tuple]:
        out = []
        for c in self.cells:
            if c.get("status") != "ok":
                continue
            vals = [
                r["value"] for r in self.gaps if r["quantity"] == quantity and r["N"] == c["N"]
                and r["omega"] == c["omega"]
            ]
            out.append((c["N"], c["omega"], max(vals), c["in_window"]))
        return out

    def trend_holds(self, quantity: str = "trace_gap") -> bool:
        """Sup gap strictly decreasing along the in-window cells."""
        sup = [s for s in self.sup_gaps(quantity) if s[3]]
        return len(sup) >= 2 and all(b[2] < a[2] for a, b in zip(sup, sup[1:]))

    def write(self, out_dir) -> dict:
        out = Path(out_dir)
        n1 = write_jsonl(out / "results.jsonl", self.records)
        n2 = write_gaps_csv(out / "gaps.csv", self.gaps)
        return {"results.jsonl": n1, "gaps.csv": n2}


def run_cell(cfg: ExperimentConfig, cell: Cell, snapshot_dir: Path | None = None) -> dict:
    """Evolve one ``(N, omega)`` cell and compare with the NLS benchmark."""
    ex = cfg.experiment
    basis = cfg.make_basis()
    V = cfg.make_potential()
    spec = HamiltonianSpec(cell.N, cell.omega, V, basis)
    c_eff = coupling_report(V).c_eff
    psi0, info = build_initial_data(cfg, cell.N, cell.omega, basis)
    phi0 = info.pop("phi0")
    times = np.linspace(0.0, ex.T, ex.samples)
    field0 = NLSField.from_coeffs(basis.z_grid, phi0, c_eff)
    nls = nls_evolve(field0, T=ex.T, dt=cfg.nls.dt, sample_times=times, scheme=cfg.nls.scheme)
    metric = MetricConfig.default(basis)
    prov = {"config_hash": cfg.hash, "code_version": __version__}
    cell_rec = cell.record()
    records, gaps = [], []

    def sampler(t, st):
        g1 = reduce_marginal(st, 1)
        phi_t = nls.field_at(t).coeffs
        ref = product_reference(basis, phi_t)
        rec = {
            **cell_rec,
            "beta": ex.beta,
            "t": float(t),
            "trace_gap": trace_distance(g1, ref),
            "hs_gap": hs_distance(g1, ref),
            "dk_gap": dk_metric(g1, ref, metric),
            "limiting_structure_gap": limiting_structure_gap(g1),
            "sector_weights": [{"order": o, "norm": sector_norm(st, o)} for o in (1, 2)],
            "energy_moment_1": energy_moment(spec, st, 1),
            "c_eff": c_eff,
            "initial": info,
            **prov,
        }
        records.append(rec)
        for q in ("trace_gap", "hs_gap", "dk_gap"):
            gaps.append(
                {"t": float(t), "N": cell.N, "omega": cell.omega, "beta": ex.beta,
                 "quantity": q, "value": rec[q]}
            )

    dyn = cfg.dynamics
    traj = evolve_nbody(
        spec, psi0, T=ex.T, dt=dyn.dt, sample_times=times,
        krylov_dim=dyn.krylov_dim, tol=dyn.tol, log_energy=False, sampler=sampler,
    )
    for r, drift in zip(records, traj.norm_drift):
        r["norm_drift"] = float(drift)
    if snapshot_dir is not None:
        save_state(traj.states[-1], Path(snapshot_dir) / f"cell{cell.index}_N{cell.N}.bin",
                   {"t": float(traj.times[-1]), **cell_rec, **prov})
    return {"records": records, "gaps": gaps, "steps": traj.steps}


def _run_cell_safe(args):
    cfg, cell, snap = args
    try:
        out = run_cell(cfg, cell, snap)
        out["status"] = "ok"
    except FocusNLSError as exc:
        out = {"status": "failed", "error": f"{type(exc).__name__}: {exc}", "records": [], "gaps": []}
    return cell.index, out


def run_convergence_sweep(cfg: ExperimentConfig, workers: int = 1, snapshots: bool | None = None) -> SweepResult:
    """Run every cell; failures abort only their own cell.

    With ``workers > 1`` cells run in a process pool.  Results are merged by
    cell index, so the output does not depend on completion order.
    """
    cells = cfg.cells()
    snap = None
    if snapshots if snapshots is not None else cfg.output.snapshots:
        snap = Path(cfg.output.dir) / "snapshots"
    for c in cells:
        log.info(
            "cell %d: N=%d omega=%g in_window=%s (v1=%.4f, v_upper=%.4f, window=[%.4g, %.4g])",
            c.index, c.N, c.omega, c.in_window, c.v1, c.v_upper, c.lower, c.upper,
        )
    jobs = [(cfg, c, snap) for c in cells]
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = dict(pool.map(_run_cell_safe, jobs))
    else:
        results = dict(map(_run_cell_safe, jobs))
    records, gaps, summary = [], [], []
    for c in cells:
        out = results[c.index]
        records.extend(out["records"])
        gaps.extend(out["gaps"])
        row = {**c.record(), "status": out["status"]}
        if out["status"] != "ok":
            row["error"] = out["error"]
            log.warning("cell %d failed: %s", c.index, out["error"])
            records.append({**row, "config_hash": cfg.hash, "code_version": __version__})
        summary.append(row)
    return SweepResult(records, gaps, summary, {"config_hash": cfg.hash, "code_version": __version__})
