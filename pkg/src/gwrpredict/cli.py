"""Command-line harness for the experiment protocols.

Each verb reads a JSON config, runs one protocol, and writes CSV tables
plus a run manifest into --out-dir. Runs are byte-identical given the same
config file and seed; manifests record the config hash and library
versions but no timestamps.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import experiments
from .temporal import save_hierarchy

_MANIFEST_NAME = "run_manifest.json"


def _package_version() -> str:
    try:
        return metadata.version("gwrpredict")
    except metadata.PackageNotFoundError:
        return "unknown"


def _write_manifest(out_dir: Path, verb: str, config_path: Path, seed: int,
                    outputs: list[str]) -> None:
    manifest = {
        "format": "run-manifest",
        "version": 1,
        "verb": verb,
        "config_sha256": hashlib.sha256(config_path.read_bytes()).hexdigest(),
        "seed": seed,
        "package_version": _package_version(),
        "numpy_version": np.__version__,
        "outputs": outputs,
    }
    with open(out_dir / _MANIFEST_NAME, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("config", type=Path, help="JSON experiment config")
    sub.add_argument("--seed", type=int, default=0,
                     help="run seed (default 0)")
    sub.add_argument("--out-dir", type=Path, default=Path("."),
                     help="directory for outputs (default current directory)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gwrpredict",
        description="Incremental motion-prediction experiments: train the"
                    " three-level network hierarchy, sweep its parameters,"
                    " and simulate delayed command sending.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("train",
                       help="incremental protocol with per-epoch error tables")
    _add_common(p)
    p.add_argument("--snapshot", type=Path, default=None,
                   help="path for the trained hierarchy snapshot"
                        " (default <out-dir>/hierarchy.gwrh)")

    _add_common(sub.add_parser("sweep-at",
                               help="retrain the predictive level per"
                                    " activation threshold"))
    _add_common(sub.add_parser("sweep-horizon",
                               help="error growth over prediction horizons"))
    _add_common(sub.add_parser("sweep-loss",
                               help="training robustness to dropped chunks"))
    _add_common(sub.add_parser("delay-demo",
                               help="delayed-command simulation on held-out"
                                    " repetitions"))
    _add_common(sub.add_parser("gen-data",
                               help="write the configured dataset as CSV files"))
    return parser


def _cmd_train(cfg, args) -> list[str]:
    result = experiments.run_incremental(cfg, args.seed)
    outputs = experiments.write_incremental(result, args.out_dir)
    snapshot = args.snapshot or (args.out_dir / "hierarchy.gwrh")
    save_hierarchy(result.hierarchy, snapshot)
    outputs.append(snapshot.name if snapshot.parent == args.out_dir
                   else str(snapshot))
    last = result.mean_rows[-1]
    print(f"final mean error vs truth {last[1]!r}, vs reconstruction {last[2]!r}")
    return outputs


def _cmd_sweep_at(cfg, args) -> list[str]:
    rows = experiments.sweep_activation_threshold(cfg, args.seed)
    for row in rows:
        print(f"threshold {row.activation_threshold!r}:"
              f" {row.neuron_count} neurons, mse {row.mse!r}")
    return experiments.write_sweep_at(rows, args.out_dir)


def _cmd_sweep_horizon(cfg, args) -> list[str]:
    rows = experiments.sweep_horizon(cfg, args.seed)
    print(f"mae {rows[0].mae!r} at horizon {rows[0].horizon}"
          f" to {rows[-1].mae!r} at horizon {rows[-1].horizon}")
    return experiments.write_sweep_horizon(rows, args.out_dir)


def _cmd_sweep_loss(cfg, args) -> list[str]:
    rows = experiments.sweep_data_loss(cfg, args.seed)
    for row in rows:
        print(f"loss {row.target_fraction!r}: mse {row.mse!r}")
    return experiments.write_sweep_loss(rows, args.out_dir)


def _cmd_delay_demo(cfg, args) -> list[str]:
    rows = experiments.run_delay_demo(cfg, args.seed)
    by_mode: dict[str, list[float]] = {}
    for row in rows:
        by_mode.setdefault(row.mode, []).append(row.report.mae)
    for mode in sorted(by_mode):
        print(f"{mode}: mean mae {float(np.mean(by_mode[mode]))!r}")
    return experiments.write_delay_demo(rows, args.out_dir)


def _cmd_gen_data(cfg, args) -> list[str]:
    patterns = experiments.build_dataset(cfg, args.seed)
    count = sum(len(p.demos) + len(p.holdout) for p in patterns)
    print(f"wrote {count} sequences across {len(patterns)} patterns")
    return experiments.write_dataset_dir(patterns, args.out_dir)


_HANDLERS = {
    "train": _cmd_train,
    "sweep-at": _cmd_sweep_at,
    "sweep-horizon": _cmd_sweep_horizon,
    "sweep-loss": _cmd_sweep_loss,
    "delay-demo": _cmd_delay_demo,
    "gen-data": _cmd_gen_data,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = experiments.load_config(args.config)
        args.out_dir.mkdir(parents=True, exist_ok=True)
        outputs = _HANDLERS[args.verb](cfg, args)
        _write_manifest(args.out_dir, args.verb, args.config, args.seed, outputs)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {len(outputs) + 1} files to {args.out_dir}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
