"""Command-line front end: ``python -m lvcgp <command> --config FILE``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from importlib import resources

import numpy as np

from .closed import NumericalError, propagate_closed
from .config import (ConfigError, RunConfig, expand_sweep, load_config, meta_header, parse_config,
                     read_lvc_table, subsystem_text)
from .effective_modes import lvc_to_system_bath
from .model import SystemBathModel
from .observables import ObservableSet
from .open_dynamics import propagate_tcl2
from .representation import build_hamiltonian, prepare_initial_state
from . import tdpt

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


def preset_names() -> list[str]:
    files = resources.files("lvcgp") / "presets"
    return sorted(f.name[:-4] for f in files.iterdir() if f.name.endswith(".cfg"))


def preset_text(name: str) -> str:
    path = resources.files("lvcgp") / "presets" / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return path.read_text(encoding="utf-8")


def _load(args) -> RunConfig:
    if bool(args.config) == bool(args.preset):
        raise ConfigError("give exactly one of --config or --preset")
    overrides = list(args.override or [])
    if args.out:
        overrides.append(f"output.directory={args.out}")
    if args.preset:
        return parse_config(preset_text(args.preset), overrides)
    if not os.path.exists(args.config):
        raise ConfigError(f"config file {args.config!r} does not exist")
    return load_config(args.config, overrides)


def _outdir(cfg: RunConfig) -> str:
    out = cfg.output_directory
    os.makedirs(out, exist_ok=True)
    return out


def execute_run(cfg: RunConfig) -> dict:
    """Run one closed or open propagation and write its artifacts."""
    out = _outdir(cfg)
    p = cfg.subsystem
    rep = cfg.representation
    refine = cfg.values["run"]["refine"]
    H = build_hamiltonian(p, cfg.scheme, rep)
    s0 = prepare_initial_state(p, cfg.scheme, rep, refine=refine)
    obs = ObservableSet.build(p, s0.scheme, rep, refine=refine)
    info = {}
    if cfg.mode == "closed":
        res = propagate_closed(H, s0, cfg.plan, obs)
    else:
        r = cfg.values["run"]
        res = propagate_tcl2(SystemBathModel(p, cfg.bath), H, s0, cfg.plan, dt=r["tcl_dt"],
                             energy_window=r["energy_window"], n_states=r["n_states"], observables=obs)
        info = {"n_states": res.diagnostics.n_states, "captured": res.diagnostics.captured_weight}
    res.series.write_csv(os.path.join(out, "series.csv"))
    for g in res.snapshots:
        g.write(os.path.join(out, f"snapshot_{g.time:g}.grid"))
    with open(os.path.join(out, "run.meta"), "w") as fh:
        fh.write(meta_header())
        fh.write(cfg.resolved_text())
    return info


def execute_tdpt(cfg: RunConfig) -> None:
    p = cfg.subsystem
    tv = cfg.values["tdpt"]
    t_final = tv["t_final"] if tv["t_final"] is not None else 2.0 * math.pi / p.Omega_X
    times = np.arange(int(math.floor(t_final / tv["dt"] + 1e-9)) + 1) * tv["dt"]
    cols = [tdpt.channel_1a(p), tdpt.channel_1b(p, n_max=tv["n_max"]), tdpt.channel_1c(p, n_max=tv["n_max"])]
    data = [times] + [c(times) for c in cols]
    if cfg.bath is not None and not cfg.bath.is_empty:
        data.append(tdpt.channel_bath_2nd(p, cfg.bath)(times))
    else:
        data.append(np.zeros_like(times))
    with open(os.path.join(_outdir(cfg), "tdpt.csv"), "w") as fh:
        fh.write("t,channel_1a,channel_1b,channel_1c,bath_2nd\n")
        for row in np.column_stack(data):
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")


def execute_bath(cfg: RunConfig) -> None:
    if cfg.bath is None:
        raise ConfigError("the bath command needs a [bath] section")
    b = cfg.bath
    with open(os.path.join(_outdir(cfg), "bath.csv"), "w") as fh:
        fh.write("j,Omega,lambda_X,lambda_Y\n")
        for j, row in enumerate(zip(b.Omega, b.lambda_X, b.lambda_Y), start=1):
            fh.write(f"{j}," + ",".join(f"{v:.12g}" for v in row) + "\n")


def execute_transform(lvc_path: str, out: str) -> str:
    lvc = read_lvc_table(lvc_path)
    res = lvc_to_system_bath(lvc)
    os.makedirs(out, exist_ok=True)
    path = os.path.join(out, "system_bath.cfg")
    with open(path, "w") as fh:
        fh.write(meta_header())
        fh.write(f"# energy offset dropped by the transformation: {res.constant!r}\n")
        fh.write("# origin shift: " + " ".join(repr(float(v)) for v in res.shifts) + "\n")
        fh.write(subsystem_text(res.model.subsystem, res.model.bath))
    return path


def _sweep_worker(job):
    text, base_dir, overrides = job
    try:
        cfg = parse_config(text, overrides, base_dir=base_dir)
        execute_run(cfg)
        return EXIT_OK, ""
    except ConfigError as exc:
        return EXIT_CONFIG, str(exc)
    except NumericalError as exc:
        return EXIT_NUMERICAL, str(exc)


def execute_sweep(args) -> int:
    cfg = _load(args)
    if args.preset:
        text, base_dir = preset_text(args.preset), "."
    else:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
        base_dir = os.path.dirname(os.path.abspath(args.config))
    base = list(args.override or [])
    jobs = []
    for label, ov in expand_sweep(cfg):
        out = os.path.join(cfg.output_directory, label)
        jobs.append((text, base_dir, base + ov + [f"output.directory={out}"]))
    # validate every point before starting any work
    for job in jobs:
        parse_config(job[0], job[2], base_dir=job[1])
    workers = args.workers or min(len(jobs), os.cpu_count() or 1)
    if workers == 1:
        results = [_sweep_worker(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    status = EXIT_OK
    for (_, _, ov), (code, msg) in zip(jobs, results):
        if code:
            print(f"error in {ov[-1]}: {msg}", file=sys.stderr)
            status = max(status, code)
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lvcgp", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="configuration file")
        sp.add_argument("--preset", help="name of a shipped preset (see 'lvcgp presets')")
        sp.add_argument("--out", help="output directory (overrides [output] directory)")
        sp.add_argument("--override", action="append", metavar="KEY=VALUE",
                        help="override a setting; KEY is section.key or an unambiguous key")

    common(sub.add_parser("run", help="propagate one configuration"))
    common(sub.add_parser("tdpt", help="perturbative channel populations"))
    common(sub.add_parser("bath", help="write the discretized bath"))
    sp = sub.add_parser("sweep", help="run every point of the [sweep] product")
    common(sp)
    sp.add_argument("--workers", type=int, default=None)
    tp = sub.add_parser("transform", help="LVC mode table to subsystem-bath parameters")
    tp.add_argument("--config", help="configuration whose [model] names an lvc_file")
    tp.add_argument("--lvc", help="LVC mode table")
    tp.add_argument("--out", default=".", help="output directory")
    sub.add_parser("presets", help="list shipped presets")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "presets":
            print("\n".join(preset_names()))
            return EXIT_OK
        if args.command == "transform":
            lvc_path = args.lvc
            if lvc_path is None:
                if args.config is None:
                    raise ConfigError("transform needs --lvc or --config")
                cfg = load_config(args.config)
                if cfg.values["model"]["lvc_file"] is None:
                    raise ConfigError("[model] has no lvc_file")
                lvc_path = os.path.join(os.path.dirname(os.path.abspath(args.config)),
                                        cfg.values["model"]["lvc_file"])
            if not os.path.exists(lvc_path):
                raise ConfigError(f"LVC table {lvc_path!r} does not exist")
            print(execute_transform(lvc_path, args.out))
            return EXIT_OK
        if args.command == "sweep":
            return execute_sweep(args)
        cfg = _load(args)
        if args.command == "run":
            execute_run(cfg)
        elif args.command == "tdpt":
            execute_tdpt(cfg)
        elif args.command == "bath":
            execute_bath(cfg)
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # domain checks raised while building (grid clipping, unsupported setups)
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
