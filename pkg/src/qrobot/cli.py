"""Batch front end: ``qrobot {build,run,stats,paths,sweep}``.

Exit codes: 0 success, 1 validation error, 2 audit failure, 3 numerical drift.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import __version__
from .assembly import build_step_operator, load_operator, save_operator, spec_hash
from .config_space import encode, initial_configuration
from .errors import AuditError, FormatError, NormDriftError, QRobotError, ValidationError
from .evolution import evolve, evolve_with_records, load_state, save_state
from .phase_paths import enumerate_phase_paths, verify_path_sum, write_paths_json
from .runconfig import RunConfig, load_config
from .stats import Scenario, accuracy_sweep, correlation_fidelity, distance_distribution
from .stats import write_distribution_csv, write_sweep_csv
from .task_machine import audit_injectivity, compile_task

EXIT_OK, EXIT_VALIDATION, EXIT_AUDIT, EXIT_DRIFT = 0, 1, 2, 3


def _out_dir(args, cfg: RunConfig | None) -> Path:
    out = Path(args.out or (cfg.output if cfg else "out"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _header(cfg: RunConfig) -> str:
    return f"# config_hash={cfg.config_hash} version={__version__}\n"


def _operator(args, cfg: RunConfig):
    if args.operator:
        T = load_operator(args.operator)
        if T.build_hash != _build_hash(cfg):
            raise ValidationError(f"operator {args.operator} was built from a different configuration")
        return T
    return build_step_operator(cfg.params, cfg.kernel, cfg.environment)


def _build_hash(cfg: RunConfig) -> str:
    return spec_hash(cfg.params, cfg.kernel, cfg.environment)


def cmd_build(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    report = audit_injectivity(compile_task(cfg.params))
    lines = [
        _header(cfg).rstrip("\n"),
        f"L = {cfg.params.L}",
        f"N = {cfg.params.N}",
        f"dimension = {cfg.params.dimension}",
        f"injectivity_pairs = {report.pairs_checked}",
        f"injectivity_collisions = {len(report.collisions)}",
        f"slot_conflicts = {len(report.slot_conflicts)}",
    ]
    status = EXIT_OK
    try:
        T = build_step_operator(cfg.params, cfg.kernel, cfg.environment)
    except AuditError as exc:
        lines += [f"unitarity_deviation = {exc.deviation!r}", f"FAILED: {exc}"]
        status = EXIT_AUDIT
    else:
        lines += [
            f"nonzeros = {T.nnz}",
            f"unitarity_deviation = {T.deviation!r}",
            f"audit_method = {T.audit['method']}",
            "status = ok",
        ]
        save_operator(T, out / "operator.qrop", cfg.config_hash)
    (out / "audit.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines[1:]))
    return status


def _label(v) -> str:
    return v.name if hasattr(v, "name") else str(v)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    T = _operator(args, cfg)
    psi0 = cfg.initial.build(cfg.params)
    chop = 1e-14 if cfg.chop else 0.0
    if cfg.record:
        rec = evolve_with_records(T, psi0, cfg.steps, cfg.record, chop=chop)
        final = rec.final
        for sel in cfg.record:
            name = "records_" + "_".join(sel) + ".csv"
            with open(out / name, "w", newline="") as f:
                f.write(_header(cfg))
                w = csv.writer(f, lineterminator="\n")
                w.writerow(["step", *sel, "probability"])
                for step, table in enumerate(rec.series(sel)):
                    for key, prob in table.items():
                        key = key if isinstance(key, tuple) else (key,)
                        w.writerow([step, *map(_label, key), repr(float(prob))])
    else:
        final = evolve(T, psi0, cfg.steps, chop=chop)
    save_state(final, out / "state.qrsv", cfg.config_hash)
    print(f"step {final.step}: norm {final.norm():.15f}")
    return EXIT_OK


def cmd_stats(args) -> int:
    cfg = load_config(args.config) if args.config else None
    out = _out_dir(args, cfg)
    variants = ("literal", "valid")
    if cfg is not None:
        variants = tuple(cfg.analyses.get("stats", {}).get("variants", variants))
    states = []
    if args.state:
        state, stored = load_state(args.state)
        if cfg is not None and stored and stored != cfg.config_hash:
            raise ValidationError("state file was produced from a different configuration")
        chash = stored if cfg is None else cfg.config_hash
        states.append(state)
    else:
        if cfg is None:
            raise ValidationError("stats needs --state or --config")
        chash = cfg.config_hash
        T = _operator(args, cfg)
        ks = sorted(set(cfg.analyses.get("stats", {}).get("ks", [cfg.steps])))
        state = cfg.initial.build(cfg.params)
        for k in ks:
            state = evolve(T, state, k - state.step)
            states.append(state)
    dists = [distance_distribution(s, v) for s in states for v in variants]
    write_distribution_csv(dists, out / "distributions.csv", chash)
    if cfg is not None and cfg.analyses.get("fidelity"):
        x = cfg.single_site("robot")
        with open(out / "fidelity.csv", "w", newline="") as f:
            f.write(_header(cfg))
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["k", "fidelity", "completed_mass", "offdiagonal"])
            for s in states:
                r = correlation_fidelity(s, x)
                w.writerow([s.step, repr(r.fidelity), repr(r.completed_mass), repr(r.offdiagonal)])
    for d in dists:
        print(f"k={d.k} {d.variant}: " + " ".join(f"{n}:{p:.6g}" for n, p in d.as_dict(1e-12).items()))
    return EXIT_OK


def cmd_paths(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    T = _operator(args, cfg)
    spec = cfg.analyses.get("paths", {})
    n = args.n if args.n is not None else spec.get("n", cfg.steps)
    eps = args.epsilon if args.epsilon is not None else float(spec.get("epsilon", 0.0))
    start = encode(initial_configuration(cfg.single_site("particle"), cfg.single_site("robot")), cfg.params)
    paths = enumerate_phase_paths(T, start, n, eps)
    write_paths_json(paths, T, out / "paths.json", cfg.config_hash)
    residual = verify_path_sum(paths, T)
    print(f"{len(paths)} paths, discarded mass {paths.discarded_mass:.3e}, residual {residual:.3e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = _out_dir(args, cfg)
    spec = cfg.analyses.get("sweep", {})
    alphas = spec.get("alphas", [1, 2, 4, 8])
    ks = spec.get("ks", [cfg.steps])
    if "distance" in spec:
        distance = int(spec["distance"])
    else:
        distance = (cfg.single_site("particle") - cfg.single_site("robot")) % cfg.params.L
    k = cfg.kernel
    a0, a1 = (k.a0, k.a1) if k.kind == "gaussian" else (2**-0.5, 2**-0.5)
    scenario = Scenario(cfg.params, cfg.initial, distance, a0, a1, cfg.environment)
    rows = accuracy_sweep(alphas, ks, scenario)
    write_sweep_csv(rows, out / "sweep.csv", cfg.config_hash)
    for r in rows:
        print(f"alpha={r.alpha} k={r.k} argmax={r.argmax} peak={r.peak_mass:.6g} spread={r.rms_spread:.3g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrobot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help, config_required=True):
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", required=config_required, help="run configuration (JSON)")
        p.add_argument("--out", help="output directory (default: output.directory)")
        p.set_defaults(func=func)
        return p

    add("build", cmd_build, "assemble and audit the step operator")
    p = add("run", cmd_run, "evolve the configured initial state")
    p.add_argument("--operator", help="prebuilt QROP operator file")
    p = add("stats", cmd_stats, "distance distributions", config_required=False)
    p.add_argument("--operator")
    p.add_argument("--state", help="QRSV state file")
    p = add("paths", cmd_paths, "enumerate phase paths")
    p.add_argument("--operator")
    p.add_argument("--n", type=int)
    p.add_argument("--epsilon", type=float)
    add("sweep", cmd_sweep, "accuracy sweep over alpha and k")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except AuditError as exc:
        print(f"audit failure: {exc}", file=sys.stderr)
        return EXIT_AUDIT
    except NormDriftError as exc:
        print(f"numerical drift: {exc}", file=sys.stderr)
        return EXIT_DRIFT
    except QRobotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
