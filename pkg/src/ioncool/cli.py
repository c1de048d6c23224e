"""Command-line driver: ``ioncool <subcommand> --config CFG [flags]``.

Exit codes: 0 success, 2 configuration error, 3 numerical-validity error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np
from scipy import constants

from . import __version__, config as cfgmod
from . import diagnostics, qmc, rate, spectrum
from .errors import (ConfigError, InputError, IntegrationError, ReducibleGeneratorError, StepError,
                     TrajectoryError, TruncationError)

log = logging.getLogger("ioncool")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class NumericalValidityError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return "%.17g" % x


def _header(run: cfgmod.RunConfig) -> list[str]:
    return [f"# ioncool {__version__}", f"# config {run.to_json()}"]


def write_csv(path: Path, run: cfgmod.RunConfig, columns, rows, extra=()) -> Path:
    lines = _header(run) + [f"# {e}" for e in extra] + [",".join(columns)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    log.info("wrote %s", path)
    return path


def write_json(path: Path, run: cfgmod.RunConfig, doc: dict) -> Path:
    # JSON has no comments, so the header lives under a "meta" key
    out = {"meta": {"version": __version__, "config": run.data}}
    out.update(doc)
    path.write_text(json.dumps(out, indent=2, sort_keys=True, default=_json_default) + "\n")
    log.info("wrote %s", path)
    return path


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return str(o)
    raise TypeError(type(o))


def _finite(x: float):
    return x if math.isfinite(x) else str(x)


def _out_dir(args, run) -> Path:
    d = Path(args.out or run.section("outputs")["dir"])
    d.mkdir(parents=True, exist_ok=True)
    return d


def cmd_dos(args, run):
    sec = run.section("dos")
    e_max = args.emax if args.emax is not None else sec["e_max"]
    width = args.grid if args.grid is not None else sec["bin_width"]
    hist = spectrum.density_of_states(run.modes, e_max, width)
    write_csv(_out_dir(args, run) / "dos.csv", run, ["bin_center", "value"],
              zip(hist.centers, hist.values), extra=[f"states {int(hist.values.sum())}"])


def cmd_spectrum(args, run):
    sec = run.section("spectrum")
    dist = run.distribution(sec["initial"]) if "initial" in sec else run.initial
    hist = spectrum.resonance_spectrum(run.modes, run.lds, dist, (sec["delta_min"], sec["delta_max"]),
                                       sec["bin_width"])
    write_csv(_out_dir(args, run) / "spectrum.csv", run, ["bin_center", "value"], zip(hist.centers, hist.values))


def _snapshots(args, run) -> list[float]:
    if args.snapshot:
        return [float(s) for s in args.snapshot.split(",") if s.strip()]
    return [float(s) for s in run.section("outputs")["snapshot_times"]]


def _rate_grid(t_final: float, n_out: int, snaps) -> np.ndarray:
    return np.unique(np.concatenate([np.linspace(0.0, t_final, n_out), np.asarray(snaps, dtype=float)]))


def cmd_rate(args, run):
    sec = run.section("rate")
    out = _out_dir(args, run)
    snaps = _snapshots(args, run)
    r = rate.build_rate_matrix(run.modes, run.lds, run.laser, buffer=sec.get("buffer"))
    traj = rate.evolve_populations(r, run.initial, _rate_grid(sec["t_final"], sec["n_out"], snaps), snaps)
    write_csv(out / "rate_trajectory.csv", run, ["time_tF", "mean_n_com", "mean_n_rel", "leakage"],
              zip(traj.times, traj.mean_n_com, traj.mean_n_rel, traj.leakage))
    for t, pv in traj.snapshots.items():
        n0, nr = run.modes.indices()
        write_csv(out / f"rate_snapshot_t{_fmt(t)}.csv", run, ["n_com", "n_rel", "population"],
                  zip(n0, nr, pv.p), extra=[f"time_tF {_fmt(t)}"])
    if sec.get("single_ion_control"):
        single = rate.single_ion_rate_model(run.lds.eta_com, run.laser, run.modes.n_com_max)
        st = rate.evolve_populations(single, run.initial.com_marginal(), traj.times)
        write_csv(out / "rate_single_ion.csv", run, ["time_tF", "mean_n", "leakage"],
                  zip(st.times, st.mean_n_com, st.leakage))
    if traj.final_leakage > rate.LEAKAGE_LIMIT:
        raise NumericalValidityError(f"truncation leakage {traj.final_leakage:.3g} exceeds {rate.LEAKAGE_LIMIT}; "
                                     "enlarge the basis")
    return traj


def _qmc_config(run, sec) -> qmc.QMCConfig:
    return qmc.QMCConfig(run.modes, run.lds, run.laser, run.initial, sec["t_final"], sec["n_out"], sec.get("dt"))


def _write_ensemble(out: Path, run, ens: qmc.EnsembleResult, prefix: str, jump_log: bool):
    write_csv(out / f"{prefix}_ensemble.csv", run,
              ["time_tF", "mean_n_com", "se_n_com", "mean_n_rel", "se_n_rel"],
              zip(ens.times, ens.mean_n_com, ens.se_n_com, ens.mean_n_rel, ens.se_n_rel),
              extra=[f"n_traj {ens.n_traj}", f"master_seed {ens.master_seed}"])
    n0, nr = run.modes.indices()
    write_csv(out / f"{prefix}_population.csv", run, ["n_com", "n_rel", "P"], zip(n0, nr, ens.population.ravel()))
    if jump_log:
        log_rows = ens.jump_log()
        write_csv(out / f"{prefix}_jumps.csv", run, ["trajectory", "time", "ion", "u"],
                  ((int(a), b, int(c), d) for a, b, c, d in log_rows), extra=["time in units of 1/nu"])


def cmd_qmc(args, run):
    sec = run.section("qmc")
    out = _out_dir(args, run)
    ens = qmc.ensemble_run(_qmc_config(run, sec), sec["n_traj"], sec["master_seed"], threads=args.threads)
    _write_ensemble(out, run, ens, "qmc", args.jump_log or run.section("outputs")["jump_log"])
    if ens.boundary_weight > rate.BOUNDARY_LIMIT:
        raise NumericalValidityError(f"terminal population on the truncation boundary is {ens.boundary_weight:.3g} "
                                     f"(limit {rate.BOUNDARY_LIMIT}); enlarge the basis")
    return ens


def cmd_compare(args, run):
    sec = run.section("qmc")
    out = _out_dir(args, run)
    res = qmc.compare_with_rate(_qmc_config(run, sec), sec["n_traj"], sec["master_seed"], threads=args.threads)
    _write_ensemble(out, run, res.qmc, "compare_qmc", args.jump_log)
    write_csv(out / "compare_rate.csv", run, ["time_tF", "mean_n_com", "mean_n_rel", "leakage"],
              zip(res.rate.times, res.rate.mean_n_com, res.rate.mean_n_rel, res.rate.leakage))
    write_csv(out / "compare_stats.csv", run, ["time_tF", "z_n_com"], zip(res.qmc.times, res.z_scores),
              extra=[f"max_abs_z {_fmt(res.max_abs_z)}", f"terminal_z {_fmt(res.terminal_z)}",
                     f"verdict {res.verdict}"])
    print(f"{res.verdict} terminal_z={res.terminal_z:.3f} max_abs_z={res.max_abs_z:.3f}")
    if res.rate.final_leakage > rate.LEAKAGE_LIMIT:
        raise NumericalValidityError(f"truncation leakage {res.rate.final_leakage:.3g} exceeds {rate.LEAKAGE_LIMIT}")
    return res


def cmd_diagnose(args, run):
    sec = run.section("diagnose")
    out = _out_dir(args, run)
    rep = diagnostics.find_trapping_states(run.modes, run.lds, run.laser, sec["threshold"])
    doc = {"trapping": json.loads(rep.to_json())}
    if "trap" in sec:
        t = sec["trap"]
        ah = diagnostics.anharmonicity_check(t["mass_amu"] * constants.atomic_mass,
                                             2 * math.pi * t["trap_freq_hz"], t["charge_e"] * constants.e,
                                             t.get("j", 100))
        doc["anharmonicity"] = {k: _finite(v) for k, v in asdict(ah).items()} | {"valid": ah.valid}
    if sec["gammas"]:
        rsec = run.section("rate")
        grid = np.linspace(0.0, rsec["t_final"], rsec["n_out"])
        runs = []
        for g in sec["gammas"]:
            las = run.laser.replace(gamma=g, omega_1=sec["omega_over_gamma"] * g)
            r = rate.build_rate_matrix(run.modes, run.lds, las)
            runs.append((las, rate.evolve_populations(r, run.initial, grid)))
        table = diagnostics.cooling_time_summary(runs, sec["target"])
        write_csv(out / "cooling_times.csv", run, ["gamma", "crossing_tF", "reached", "final_n_com"],
                  ((c.gamma, c.crossing, int(c.reached), c.final_value) for c in table),
                  extra=[f"target {_fmt(sec['target'])}"])
        doc["cooling_times"] = [{k: _finite(v) if isinstance(v, float) else v for k, v in asdict(c).items()}
                                for c in table]
    write_json(out / "diagnose.json", run, doc)
    return doc


COMMANDS = {"dos": cmd_dos, "spectrum": cmd_spectrum, "rate": cmd_rate, "qmc": cmd_qmc,
            "compare": cmd_compare, "diagnose": cmd_diagnose}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ioncool", description="Sideband cooling of two trapped ions")
    ap.add_argument("--version", action="version", version=f"ioncool {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None,
                       help="JSON config file or shipped name (fig1..fig10); defaults apply when omitted")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None, help="QMC master seed (unsigned 64-bit)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--snapshot", default=None, help="comma-separated snapshot times in t_F")
        p.add_argument("--jump-log", action="store_true", help="also write the QMC jump log")
        if name == "dos":
            p.add_argument("--grid", type=float, default=None, help="bin width in units of nu")
            p.add_argument("--emax", type=float, default=None, help="highest energy in units of nu")
    return ap


def _setup_logging():
    level = os.environ.get("IONCOOL_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1", path="--threads")
        run = cfgmod.load(args.config) if args.config else cfgmod.loads('{"nu_units": true}', "<defaults>")
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer", path="--seed")
            run = run.with_seed(args.seed)
        COMMANDS[args.command](args, run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalValidityError, IntegrationError, ReducibleGeneratorError, StepError,
            TrajectoryError, TruncationError) as exc:
        print(f"numerical validity error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InputError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
