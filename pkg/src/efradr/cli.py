"""Command line entry point: ``efradr {run,study,export}``."""

import argparse
import os
import sys

from .harness import (ConfigError, SweepReport, execute_with_result, export_vtk,
                      format_config, indicator_exporter, load_config, run_study, write_csv)


def _parser():
    p = argparse.ArgumentParser(prog="efradr", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run one configuration and write a one-row CSV"),
                        ("study", "run a parameter study and write its CSV"),
                        ("export", "run one configuration and export the final field to VTK")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", help="configuration file (key = value lines)")
        s.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a configuration key (repeatable)")
        s.add_argument("--out", help="output directory (overrides output.dir)")
        if name == "study":
            s.add_argument("--study", choices=("compare_methods", "sweep_N", "sweep_delta",
                                               "single"),
                           help="study to run (overrides the 'study' key)")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    overrides = list(args.set)
    if args.out:
        overrides.append(f"output.dir = {args.out}")
    if getattr(args, "study", None):
        overrides.append(f"study = {args.study}")
    try:
        cfg = load_config(args.config, overrides)
    except (ConfigError, OSError) as exc:
        print(f"efradr: {exc}", file=sys.stderr)
        return 2

    os.makedirs(cfg.out_dir, exist_ok=True)
    with open(os.path.join(cfg.out_dir, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_config(cfg))

    if args.command == "study":
        report = run_study(cfg.study, cfg)
        path = os.path.join(cfg.out_dir, f"{cfg.study}.csv")
    else:
        callback = None
        if cfg.export_indicator and cfg.method == "efr":
            callback = indicator_exporter(cfg, os.path.join(cfg.out_dir, "indicator"))
        row, result = execute_with_result(cfg, callback)
        if result is not None and (args.command == "export" or cfg.export_final):
            export_vtk(result.u, os.path.join(cfg.out_dir, "final.vtk"))
        report = SweepReport("single", [row])
        path = os.path.join(cfg.out_dir, "run.csv")
    write_csv(report, path)
    for row in report.rows:
        if row["error"]:
            print(f"efradr: n={row['n']} {row['method']}: {row['error']}", file=sys.stderr)
    print(path)
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
