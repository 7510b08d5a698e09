"""SRAM PUF key generation with convolutional codes: simulation, enrollment and reconstruction."""

from __future__ import annotations

import argparse
import csv
import io
import sys

import numpy as np

from .codec import UnknownCodeError, parse_code, registry
from .fano import FanoConfig
from .files import (
    load_helper,
    read_reliabilities,
    read_snapshots,
    save_helper,
    write_reliabilities,
    write_snapshots,
    bits_to_hex,
)
from .helper_data import ShortageError, enroll, reconstruct
from .simulator import (
    ExperimentConfig,
    axis_configs,
    ignored_fraction_report,
    results_to_csv,
    results_to_json,
    run_experiment,
)
from .sram_model import ModelParams, estimate_cells, mean_p_e, readouts, sample_cells

EXIT_CONFIG = 2
EXIT_SHORTAGE = 3


def _pt(text: str):
    if text.lower() in ("none", "all", "-"):
        return None
    return float(text)


def _grid(text: str) -> list[float]:
    if ":" in text:
        lo, hi, step = (float(v) for v in text.split(":"))
        n = int(round((hi - lo) / step))
        return [round(lo + i * step, 12) for i in range(n + 1)]
    return [float(v) for v in text.split(",") if v]


def _experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--code", default="2,1,6", help="n,k,mu[:g(n-1),...,g0] octal, default 2,1,6")
    p.add_argument("--pt", type=_pt, default=None, help="reliability threshold; 'all' uses every cell")
    p.add_argument("--decoder", choices=("viterbi", "fano"), default="viterbi")
    p.add_argument("--input", choices=("soft", "hard"), default="soft")
    p.add_argument("--list", type=int, default=1, dest="list_size")
    p.add_argument("--readouts", type=int, default=1)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--info-length", type=int, default=256)
    p.add_argument("--fano-delta", type=float, default=2.0)
    p.add_argument("--fano-max-visits", type=int, default=None)
    p.add_argument("--fixed-device", action="store_true", help="reuse one device across trials")
    p.add_argument("--enroll-readouts", type=int, default=0,
                   help="estimate reliabilities from this many readouts (0: model values)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default=None)
    p.add_argument("--no-timing", action="store_true", help="write wall_s as 0 for reproducible output")


def _config(args) -> ExperimentConfig:
    fano = None
    if args.decoder == "fano":
        fano = FanoConfig(delta=args.fano_delta, max_visits=args.fano_max_visits)
    return ExperimentConfig(
        code=parse_code(args.code), p_t=args.pt, decoder=args.decoder, input_mode=args.input,
        list_size=args.list_size, readouts=args.readouts, extractions=args.trials, seed=args.seed,
        fano=fano, info_length=args.info_length, fixed_device=args.fixed_device,
        enrollment_readouts=args.enroll_readouts,
    )


def _emit(text: str, out: str | None) -> None:
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _render(results, args) -> str:
    if args.format == "json":
        return results_to_json(results, timing=not args.no_timing)
    return results_to_csv(results, timing=not args.no_timing)


def cmd_simulate(args) -> int:
    res = run_experiment(_config(args), workers=args.workers)
    _emit(_render([res], args), args.out)
    return 0


def _parse_axis(text: str):
    name, _, vals = text.partition("=")
    if not vals:
        raise ValueError(f"axis must look like name=v1,v2,..., got {text!r}")
    if name == "code":
        return name, [v for v in vals.split(";") if v]
    if name == "pt":
        return name, [_pt(v) for v in vals.split(",") if v]
    return name, [int(v) for v in vals.split(",") if v]


def cmd_sweep(args) -> int:
    axis, values = _parse_axis(args.axis)
    cfgs = axis_configs(_config(args), axis, values)
    results = [run_experiment(c, workers=args.workers) for c in cfgs]
    _emit(_render(results, args), args.out)
    return 0


def cmd_codes(args) -> int:
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["code", "n", "k", "mu", "generators"])
    for spec in registry():
        w.writerow([spec.name, spec.n, spec.k, spec.mu, spec.text])
    return 0


def cmd_model(args) -> int:
    params = ModelParams(args.lambda1, args.lambda2)
    if args.mean_pe:
        sys.stdout.write(f"mean_p_e,{mean_p_e(params):.6f}\n")
    if args.ignored_fraction:
        rows = ignored_fraction_report(_grid(args.pt_grid), params, mc_cells=args.mc_cells, seed=args.seed)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        _emit(buf.getvalue(), args.out)
    if not (args.mean_pe or args.ignored_fraction):
        raise ValueError("nothing to report; pass --ignored-fraction and/or --mean-pe")
    return 0


def cmd_snapshot(args) -> int:
    rng = np.random.default_rng(args.seed)
    cells = sample_cells(rng, args.cells)
    if args.readout_seed is not None:
        rng = np.random.default_rng(args.readout_seed)
    write_snapshots(args.out, readouts(cells, rng, args.readouts))
    return 0


def _sidecar_path(helper_path: str) -> str:
    stem = helper_path[:-5] if helper_path.endswith(".json") else helper_path
    return stem + ".reliability.csv"


def cmd_enroll(args) -> int:
    snaps = read_snapshots(args.snapshots)
    cells = estimate_cells(snaps)
    spec = parse_code(args.code)
    rng = np.random.default_rng(args.seed)
    key, helper = enroll(
        cells, spec, args.pt, rng, info_length=args.info_length, readouts=args.readouts,
        decoder=args.decoder, list_size=args.list_size,
    )
    save_helper(args.helper, helper)
    sidecar = args.reliability or _sidecar_path(args.helper)
    write_reliabilities(sidecar, helper.mask, cells.p_e[helper.mask])
    if args.key_out:
        with open(args.key_out, "w") as fh:
            fh.write(bits_to_hex(key) + "\n")
    sys.stdout.write(bits_to_hex(key) + "\n")
    return 0


def cmd_reconstruct(args) -> int:
    helper = load_helper(args.helper)
    snaps = read_snapshots(args.snapshots)
    m = args.readouts or helper.readouts
    if snaps.shape[0] < m:
        raise ValueError(f"snapshot file has {snaps.shape[0]} readouts, need {m}")
    rel = read_reliabilities(args.reliability or _sidecar_path(args.helper), snaps.shape[1])
    rec = reconstruct(snaps[:m], helper, rel, input_mode=args.input, list_size=args.list_size)
    if not rec.ok:
        sys.stderr.write("reconstruction failed: no candidate matched the key digest\n")
        return 1
    sys.stdout.write(bits_to_hex(rec.key) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="convpuf", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="estimate the key-error rate of one configuration")
    _experiment_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="run one experiment per axis value")
    _experiment_flags(p)
    p.add_argument("--axis", required=True,
                   help="pt=0.1,0.2 | readouts=1,2,3 | list=1,3 | mu=6,7,10 | code=2,1,6;3,1,6")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("codes", help="print the code registry")
    p.set_defaults(func=cmd_codes)

    p = sub.add_parser("model", help="cell-model reports")
    p.add_argument("--ignored-fraction", action="store_true")
    p.add_argument("--mean-pe", action="store_true")
    p.add_argument("--pt-grid", default="0.01:0.5:0.01", help="lo:hi:step or comma list")
    p.add_argument("--mc-cells", type=int, default=0, help="add a sampled estimate from this many cells")
    p.add_argument("--lambda1", type=float, default=0.51)
    p.add_argument("--lambda2", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("snapshot", help="write a synthetic snapshot file from the cell model")
    p.add_argument("--cells", type=int, required=True)
    p.add_argument("--readouts", type=int, default=1)
    p.add_argument("--seed", type=int, default=None, help="device seed")
    p.add_argument("--readout-seed", type=int, default=None,
                   help="separate seed for readout noise, to take fresh readouts of the same device")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_snapshot)

    p = sub.add_parser("enroll", help="derive a key and helper data from snapshot readouts")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--code", default="2,1,6")
    p.add_argument("--pt", type=_pt, default=None)
    p.add_argument("--decoder", choices=("viterbi", "fano"), default="viterbi")
    p.add_argument("--list", type=int, default=1, dest="list_size")
    p.add_argument("--readouts", type=int, default=1, help="readouts used at reconstruction")
    p.add_argument("--info-length", type=int, default=256)
    p.add_argument("--helper", required=True)
    p.add_argument("--reliability", default=None, help="sidecar path (default next to the helper)")
    p.add_argument("--key-out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("reconstruct", help="regenerate the key from fresh readouts")
    p.add_argument("--snapshots", required=True)
    p.add_argument("--helper", required=True)
    p.add_argument("--reliability", default=None)
    p.add_argument("--input", choices=("soft", "hard"), default="soft")
    p.add_argument("--list", type=int, default=None, dest="list_size")
    p.add_argument("--readouts", type=int, default=None)
    p.set_defaults(func=cmd_reconstruct)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ShortageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_SHORTAGE
    except (ValueError, UnknownCodeError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
