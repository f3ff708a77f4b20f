"""Command-line interface.

Subcommands:

* ``compile``  -- compile a signed-Kraus map file into a CPTP map (+tree)
* ``invert``   -- build the HPTP inverse of a named noise channel
* ``simulate`` -- shot-level estimation for a compiled map
* ``fig2``     -- noise-level sweep (variance of the mitigated estimator)
* ``fig3``     -- photon-loss dimension sweep (variance + rank scaling)
* ``verify``   -- run the cross-module property suites

Worker count for the sweeps is capped by the ``HPTPC_THREADS`` env var.
"""

import argparse
import os
import sys

from . import __version__
from . import channels as ch
from . import harness, noise, plotting, sampler, serialize
from .compiler import build_tree_plan, compile_map
from .errors import HptpcError


def _load_config(args, experiment):
    if getattr(args, "config", None):
        cfg = harness.ExperimentConfig.from_dict(serialize.load_json(args.config))
    elif getattr(args, "full", False):
        cfg = harness.ExperimentConfig.full_scale()
    elif getattr(args, "quick", False):
        cfg = harness.ExperimentConfig.quick()
    else:
        cfg = harness.ExperimentConfig()
    cfg.experiment = experiment
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None):
        cfg.out_dir = args.out
    if getattr(args, "paired", False):
        cfg.paired = True
    if getattr(args, "poison", False):
        cfg.poison = True
    return cfg


def _write_outputs(cfg, table, plot_fn, plot_name, no_plot):
    out = cfg.out_dir
    os.makedirs(out, exist_ok=True)
    table.write_csv(os.path.join(out, "results.csv"))
    rows = [dict((k, v) for k, v in r.__dict__.items()) for r in table.rows]
    serialize.save_json(os.path.join(out, "results.json"),
                        {"schema_version": harness.SCHEMA_VERSION, "rows": rows})
    serialize.save_json(os.path.join(out, "run_manifest.json"),
                        {"config": cfg.to_dict(), "package_version": __version__,
                         "workers": harness.worker_count()})
    if not no_plot:
        plot_fn(table, os.path.join(out, plot_name))
    print(f"wrote {out}/results.csv ({len(table.rows)} rows)")


def cmd_compile(args):
    m = serialize.map_from_dict(serialize.load_json(args.infile))
    m = ch.as_signed_kraus(m)
    c = compile_map(m)
    plan = build_tree_plan(c) if args.tree else None
    serialize.save_json(args.out, serialize.compiled_to_dict(c, plan))
    print(f"compiled: rank {m.rank} -> {c.branch_count} branches, gamma {c.gamma:.6g}")
    return 0


def cmd_invert(args):
    spec = noise.NoiseSpec(kind=args.kind, delta=args.delta, dim=args.dim,
                           qubits=args.qubits)
    inv = noise.invert_channel(spec)
    serialize.save_json(args.out, serialize.map_to_dict(inv))
    print(f"inverse of {args.kind}(delta={args.delta}, dim={spec.dim}): rank {inv.rank}")
    return 0


def cmd_simulate(args):
    compiled, _ = serialize.compiled_from_dict(serialize.load_json(args.compiled))
    rho = serialize.state_from_dict(serialize.load_json(args.state))
    obs = serialize.observable_from_dict(serialize.load_json(args.obs))
    res = sampler.estimate([compiled], rho, obs, shots=args.shots, seed=args.seed)
    payload = {"mean": res.mean,
               "empirical_variance_of_mean": res.empirical_variance_of_mean,
               "shots": res.shots, "seed": res.seed}
    serialize.save_json(args.out, payload)
    print(f"mean {res.mean:.6g} +- {res.empirical_variance_of_mean ** 0.5:.3g} "
          f"({res.shots} shots)")
    return 0


def cmd_fig2(args):
    cfg = _load_config(args, "fig2")
    table = harness.run_fig2(cfg)
    _write_outputs(cfg, table, plotting.plot_variance_vs_delta, "fig2.png", args.no_plot)
    return 0


def cmd_fig3(args):
    cfg = _load_config(args, "fig3")
    if not getattr(args, "config", None):
        cfg.deltas = (0.2,)
    table = harness.run_fig3(cfg)
    _write_outputs(cfg, table, plotting.plot_photon_loss_scaling, "fig3.png", args.no_plot)
    return 0


def cmd_verify(args):
    cfg = _load_config(args, "verify")
    report = harness.run_verify(cfg)
    for c in report.checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    return 0 if report.passed else 1


def _add_experiment_flags(p):
    p.add_argument("--config", help="JSON config mirroring ExperimentConfig")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--quick", action="store_true", help="reduced repetition counts")
    p.add_argument("--full", action="store_true", help="overnight-scale repetition counts")
    p.add_argument("--no-plot", action="store_true", help="skip figure rendering")


def build_parser():
    parser = argparse.ArgumentParser(prog="hptpc",
                                     description="Compile, simulate and benchmark HPTP maps.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a map file to a CPTP map")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tree", action="store_true", help="include the binary-tree plan")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("invert", help="build the HPTP inverse of a noise channel")
    p.add_argument("--kind", required=True, choices=noise.KINDS)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--qubits", type=int, default=1)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_invert)

    p = sub.add_parser("simulate", help="shot-level estimation for a compiled map")
    p.add_argument("--compiled", required=True)
    p.add_argument("--state", required=True)
    p.add_argument("--obs", required=True)
    p.add_argument("--shots", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fig2", help="noise-level sweep")
    _add_experiment_flags(p)
    p.add_argument("--paired", action="store_true",
                   help="pair state i with observable i instead of crossing")
    p.set_defaults(func=cmd_fig2)

    p = sub.add_parser("fig3", help="photon-loss dimension sweep")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_fig3)

    p = sub.add_parser("verify", help="run the cross-module property suites")
    _add_experiment_flags(p)
    p.add_argument("--poison", action="store_true",
                   help="inject a sign-flip fault; the run must fail")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except HptpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
