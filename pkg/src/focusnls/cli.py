"""Command-line entry point: ``focusnls <subcommand>``.

Exit codes: 0 success, 2 a checked assertion failed, 3 configuration error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, FocusNLSError

EXIT_OK = 0
EXIT_ASSERT = 2
EXIT_CONFIG = 3

log = logging.getLogger("focusnls")


def _load_config(args):
    from .harness import ExperimentConfig

    cfg = ExperimentConfig() if args.config is None else ExperimentConfig.from_toml(args.config)
    if args.seed is not None:
        cfg = cfg.replace(experiment={"seed": args.seed})
    if args.out is not None:
        cfg = cfg.replace(output={"dir": args.out})
    return cfg


def _out_dir(args, cfg) -> Path:
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_evolve(args) -> int:
    from .dynamics import evolve_nbody
    from .harness import build_initial_data
    from .io import save_state, write_jsonl
    from .operators import HamiltonianSpec

    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    cell = cfg.cells()[0]
    basis = cfg.make_basis()
    spec = HamiltonianSpec(cell.N, cell.omega, cfg.make_potential(), basis)
    psi0, info = build_initial_data(cfg, cell.N, cell.omega, basis)
    info.pop("phi0")
    times = np.linspace(0.0, cfg.experiment.T, cfg.experiment.samples)
    traj = evolve_nbody(spec, psi0, T=cfg.experiment.T, dt=cfg.dynamics.dt, sample_times=times,
                        krylov_dim=cfg.dynamics.krylov_dim, tol=cfg.dynamics.tol)
    recs = [
        {"kind": "evolve", "N": cell.N, "omega": cell.omega, "t": float(t),
         "norm_drift": float(d), "energy_moment_1": float(e), "config_hash": cfg.hash}
        for t, d, e in zip(traj.times, traj.norm_drift, traj.energy)
    ]
    write_jsonl(out / "results.jsonl", recs)
    save_state(traj.states[-1], out / "snapshots" / "final.bin", {"t": float(traj.times[-1]), "initial": info})
    log.info("evolved %d steps; max norm drift %.3e", traj.steps, float(traj.norm_drift.max()))
    return EXIT_OK


def cmd_nls(args) -> int:
    from .dynamics import NLSField, nls_evolve
    from .harness import z_profile
    from .io import save_field, write_jsonl
    from .scaling import coupling_report

    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    basis = cfg.make_basis()
    c_eff = coupling_report(cfg.make_potential()).c_eff
    phi0 = NLSField.from_coeffs(basis.z_grid, z_profile(cfg, basis), c_eff)
    times = np.linspace(0.0, cfg.experiment.T, cfg.experiment.samples)
    tr = nls_evolve(phi0, T=cfg.experiment.T, dt=cfg.nls.dt, sample_times=times, scheme=cfg.nls.scheme)
    recs = [
        {"kind": "nls", "t": float(t), "mass": float(m), "energy": float(e), "momentum": float(p), "c": c_eff}
        for t, m, e, p in zip(tr.times, tr.mass, tr.energy, tr.momentum)
    ]
    write_jsonl(out / "results.jsonl", recs)
    save_field(tr.fields[-1], out / "snapshots" / "nls_final.bin", {"config_hash": cfg.hash})
    return EXIT_OK


def cmd_groundstate(args) -> int:
    from .harness import build_initial_data
    from .io import save_state, write_jsonl

    cfg = _load_config(args)
    if cfg.initial.mode != "interacting-ground":
        cfg = cfg.replace(initial={"mode": "interacting-ground"})
    out = _out_dir(args, cfg)
    cell = cfg.cells()[0]
    psi, info = build_initial_data(cfg, cell.N, cell.omega)
    info.pop("phi0")
    write_jsonl(out / "results.jsonl", [{"kind": "groundstate", "N": cell.N, **info, "config_hash": cfg.hash}])
    save_state(psi, out / "snapshots" / "ground.bin", info)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .harness import run_convergence_sweep

    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    res = run_convergence_sweep(cfg, workers=args.threads)
    counts = res.write(out)
    for N, om, g, inside in res.sup_gaps():
        log.info("N=%d omega=%.4g in_window=%s sup trace gap %.6e", N, om, inside, g)
    log.info("wrote %s", counts)
    if any(c["status"] != "ok" for c in res.cells):
        return EXIT_ASSERT
    if args.assert_trend and not res.trend_holds():
        log.error("sup factorization gap is not decreasing along the in-window cells")
        return EXIT_ASSERT
    return EXIT_OK


def cmd_verify(args) -> int:
    from .io import write_jsonl
    from .operators import HamiltonianSpec, check_inequality, verify_energy_estimate

    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    basis = cfg.make_basis()
    recs, failed = [], False
    for cell in cfg.cells():
        spec = HamiltonianSpec(cell.N, cell.omega, cfg.make_potential(), basis)
        reports = [check_inequality(n, spec) for n in ("coercivity-1", "coercivity-2", "coercivity-3")]
        if basis.dim**2 <= 6000:
            reports.append(check_inequality("esy-sobolev", spec))
        for k in (1, 2):
            reports.append(verify_energy_estimate(spec, k, rng=cfg.experiment.seed, window="warn"))
        for r in reports:
            rec = r.record()
            ok = rec["name"] == "esy-sobolev" or rec["margin"] >= -args.tol
            failed |= not ok
            recs.append({**rec, "N": cell.N, "omega": cell.omega, "passed": ok, "config_hash": cfg.hash})
    write_jsonl(out / "results.jsonl", recs)
    return EXIT_ASSERT if failed else EXIT_OK


def cmd_rates(args) -> int:
    from .hierarchy import Mollifier, delta_rate_study
    from .io import write_jsonl

    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    alphas = (0.4, 0.2, 0.1, 0.05)
    recs, failed = [], False
    for name, f in (("gaussian", Mollifier.gaussian()), ("sign-changing", Mollifier.sign_changing())):
        rep = delta_rate_study(f, kappa=args.kappa, alphas=alphas)
        failed |= not rep.passed
        recs.append({**rep.record(), "mollifier": name})
    write_jsonl(out / "results.jsonl", recs)
    return EXIT_ASSERT if failed else EXIT_OK


COMMANDS = {
    "evolve": (cmd_evolve, "evolve the first configured cell and snapshot the final state"),
    "nls": (cmd_nls, "run the 1D focusing NLS benchmark"),
    "groundstate": (cmd_groundstate, "prepare the trapped interacting ground state"),
    "sweep": (cmd_sweep, "run the (N, omega) convergence sweep"),
    "verify": (cmd_verify, "audit coercivity, Sobolev and energy-estimate inequalities"),
    "rates": (cmd_rates, "delta-approximation rate study"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="focusnls", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="TOML experiment configuration")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--seed", type=int, help="override [experiment] seed")
    p.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_)
        if name == "sweep":
            sp.add_argument("--assert-trend", action="store_true",
                            help="exit 2 unless the sup gap decreases along the cells")
        if name == "verify":
            sp.add_argument("--tol", type=float, default=1e-8, help="allowed negative margin")
        if name == "rates":
            sp.add_argument("--kappa", type=float, default=0.4)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    func = COMMANDS[args.command][0]
    try:
        return func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FocusNLSError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ASSERT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
