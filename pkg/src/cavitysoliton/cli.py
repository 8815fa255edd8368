"""``sim`` command line: run one experiment and write CSV tables plus a JSON summary."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .config import ConfigError
from .dynamics import NumericalAlarm
from .experiments import COMMANDS, Report
from .oracle import OracleOverflow

log = logging.getLogger("cavitysoliton")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ALARM = 3
EXIT_ORACLE = 4


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return None
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def write_report(report: Report, command: str, cfg: dict, out: Path) -> list[Path]:
    out.mkdir(parents=True, exist_ok=True)
    digest = cfgmod.config_hash(cfg)
    stem = command.replace("-", "_")
    written = []
    for name, table in report.tables.items():
        path = out / f"{stem}_{name}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(f"# command: {command}\n")
            fh.write(f"# table: {name}\n")
            fh.write(f"# config_hash: {digest}\n")
            fh.write("# units: " + ", ".join(f"{c}[{u}]" for c, u in zip(table.columns, table.units)) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(table.columns)
            for row in table.rows:
                w.writerow([_fmt(v) for v in row])
        written.append(path)
    path = out / f"{stem}_summary.json"
    doc = {"command": command, "config_hash": digest, "config": cfg, "summary": report.summary}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(doc), fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sim", description=__doc__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", type=Path, help="TOML file with [model], [integrator], [experiment]")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one key, e.g. --set model.N=40 (repeatable)")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = cfgmod.load(args.command, args.config, args.overrides)
        report = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except OracleOverflow as exc:
        log.error("oracle overflow: %s", exc)
        return EXIT_ORACLE
    except NumericalAlarm as exc:
        log.error("numerical alarm: %s", exc)
        return EXIT_ALARM
    for path in write_report(report, args.command, cfg, args.out):
        log.info("wrote %s", path)
    print(json.dumps(_jsonable(report.summary), sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
