"""Single executable exposing the pipeline as subcommands.

Configuration precedence, highest first: command-line flags, then the JSON
file given by --config, then built-in defaults. Every metrics JSON embeds
the resolved configuration snapshot so a run can be reproduced from its
report. CLOUDCAST_THREADS caps internal parallelism (grid search).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import nowcast, pipeline, verify
from .grids import (ChannelStack, GeoContext, LabelSequence, Taxonomy,
                    _parse_timestamp, load_sequence, render_frame,
                    save_sequence)
from .nowcast import TvL1Params
from .segmentation import (UNIX_EPOCH, NwpFields, OpacityConfig,
                           reduce_sequence, segment_frame)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.format_usage()}error: {message}")


def _load_config(args) -> dict:
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as f:
            return json.load(f)
    return {}


def _outdir(args) -> Path:
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _save_array(path, arr) -> None:
    with open(path, "wb") as f:
        np.save(f, arr)


def _load_seq(args, taxonomy=Taxonomy.FULL11) -> LabelSequence:
    if not args.input or not args.timestamps:
        raise ValueError("--input and --timestamps are required")
    return load_sequence(args.input[0], args.timestamps, taxonomy)


def _write_seq(seq, outdir, stem="labels"):
    save_sequence(seq, outdir / f"{stem}.npy", outdir / f"{stem}_timestamps.json")


def _parse_size(text):
    parts = text.lower().split("x")
    if len(parts) == 1:
        return int(parts[0]), int(parts[0])
    if len(parts) == 2:
        return int(parts[0]), int(parts[1])
    raise ValueError(f"bad --size {text!r}; use N or HxW")


def _parse_flow(text):
    kind, _, rest = text.partition(":")
    values = [float(x) for x in rest.split(",")] if rest else []
    if kind == "translation" and len(values) == 2:
        return verify.Translation(vx=values[0], vy=values[1])
    if kind == "rotation" and len(values) == 3:
        return verify.Rotation(center=(values[0], values[1]), omega=values[2])
    raise ValueError(
        f"bad --flow {text!r}; use translation:VX,VY or rotation:CY,CX,OMEGA"
    )


# ---------------------------------------------------------------------------
# subcommands


def _cmd_synth(args):
    cfg = _load_config(args).get("synthetic", {})
    h, w = _parse_size(args.size) if args.size else tuple(cfg.get("grid_size", (128, 128)))
    spec = verify.SyntheticSpec(
        field_type=verify.FieldType(cfg.get("field_type", "bandlimited_noise")),
        flow=_parse_flow(args.flow) if args.flow else verify.Translation(0.0, 0.0),
        grid_size=(h, w),
        frame_count=args.frames if args.frames else cfg.get("frame_count", 2),
        seed=args.seed,
    )
    seq, truth_flow = verify.generate_synthetic(spec)
    out = _outdir(args)
    _write_seq(seq, out)
    _save_array(out / "flow.npy", np.stack([truth_flow.u, truth_flow.v]))


def _cmd_repair(args):
    seq = _load_seq(args)
    repaired, report = pipeline.repair_gaps(seq)
    out = _outdir(args)
    _write_seq(repaired, out)
    runs = [
        {
            "start": run.start.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "end": run.end.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "count": run.count,
            "repaired": run.repaired,
        }
        for run in report.runs
    ]
    with open(out / "gap_report.json", "w", encoding="utf-8") as f:
        json.dump({"runs": runs}, f, indent=2)
        f.write("\n")


def _cmd_split(args):
    cfg = _load_config(args).get("split", {})
    fraction = args.fraction if args.fraction is not None else cfg.get("train_fraction", 0.75)
    boundary = cfg.get("boundary")
    spec = pipeline.SplitSpec(
        train_fraction=fraction,
        boundary=_parse_timestamp(boundary) if boundary else None,
    )
    train, test = pipeline.split(_load_seq(args), spec)
    out = _outdir(args)
    _write_seq(train, out, "train")
    _write_seq(test, out, "test")


def _cmd_reduce(args):
    seq = _load_seq(args)
    _write_seq(reduce_sequence(seq), _outdir(args))


def _cmd_downsample(args):
    if not args.factor:
        raise ValueError("--factor is required")
    seq = pipeline.downsample_majority(_load_seq(args), args.factor)
    _write_seq(seq, _outdir(args))


def _cmd_crop(args):
    if not args.size:
        raise ValueError("--size is required")
    h, w = _parse_size(args.size)
    seq = pipeline.crop_center(_load_seq(args), h, w)
    _write_seq(seq, _outdir(args))


def _cmd_render(args):
    seq = _load_seq(args)
    out = _outdir(args)
    for i, frame in enumerate(seq.frames):
        render_frame(frame, out / f"frame_{i:05d}.png")


def _cmd_segment(args):
    if not args.input:
        raise ValueError("--input must point to a directory of plane arrays")
    indir = Path(args.input[0])

    def plane(name, required=False):
        path = indir / f"{name}.npy"
        if not path.exists():
            if required:
                raise ValueError(f"missing required plane {path.name}")
            return None
        with open(path, "rb") as f:
            return np.load(f)

    stack = ChannelStack(
        bt073=plane("bt073"), bt087=plane("bt087"), bt108=plane("bt108"),
        bt120=plane("bt120"), refl006=plane("refl006"),
    )
    nwp = NwpFields(
        t_sfc=plane("t_sfc", required=True), t_950=plane("t_950", required=True),
        t_850=plane("t_850", required=True), t_700=plane("t_700", required=True),
        t_500=plane("t_500", required=True), t_tropo=plane("t_tropo", required=True),
        tcwv=plane("tcwv"),
    )
    geo = GeoContext(
        solar_zenith=plane("solar_zenith", required=True),
        satellite_zenith=plane("satellite_zenith", required=True),
        land_sea=plane("land_sea"),
    )
    cloud_mask = plane("cloud_mask", required=True)
    opacity = OpacityConfig.from_dict(_load_config(args).get("opacity", {}))
    timestamp = UNIX_EPOCH
    if args.timestamps:
        with open(args.timestamps, "r", encoding="utf-8") as f:
            stamps = json.load(f)["timestamps"]
        timestamp = _parse_timestamp(stamps[0])
    grid = segment_frame(stack, nwp, geo, opacity, cloud_mask, timestamp)
    _write_seq(LabelSequence((grid,)), _outdir(args))


def _forecast_params(args) -> TvL1Params:
    return TvL1Params.from_dict(_load_config(args).get("tvl1", {}))


def _cmd_forecast(args):
    seq = _load_seq(args, taxonomy=Taxonomy.REDUCED4)
    method = args.method or "tvl1"
    if method == "persistence":
        forecast = nowcast.persistence_forecast(seq.frames[-1], steps=args.steps)
    elif method == "tvl1":
        if len(seq) < 2:
            raise ValueError("tvl1 forecasting needs at least two frames")
        forecast = nowcast.invert_and_extrapolate(
            seq.frames[-1], seq.frames[-2], _forecast_params(args), steps=args.steps
        )
    else:
        raise ValueError(f"unknown method {method!r}")
    out = _outdir(args)
    _save_array(out / "forecast.npy", forecast.to_array())
    stamps = [f.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ") for f in forecast.frames]
    with open(out / "forecast_timestamps.json", "w", encoding="utf-8") as f:
        json.dump({"timestamps": stamps}, f, indent=2)
        f.write("\n")


def _cmd_tune(args):
    seq = _load_seq(args, taxonomy=Taxonomy.REDUCED4)
    cfg = _load_config(args)
    base = TvL1Params.from_dict(cfg.get("tvl1", {}))
    lattice = nowcast.default_lattice(base)
    best, report = nowcast.tune_tvl1(seq, lattice, seed=args.seed, steps=args.steps)
    out = _outdir(args)
    with open(out / "best_params.json", "w", encoding="utf-8") as f:
        json.dump(best.to_dict(), f, indent=2)
        f.write("\n")
    with open(out / "tuning_report.json", "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
        f.write("\n")


def _cmd_eval(args):
    if not args.input or len(args.input) < 2:
        raise ValueError("eval needs --input PREDICTIONS TRUTH [REFERENCE]")
    arrays = []
    for path in args.input[:3]:
        with open(path, "rb") as f:
            arrays.append(np.load(f))
    pred, truth = arrays[0], arrays[1]
    reference = arrays[2] if len(arrays) > 2 else None
    report = verify.evaluate_forecast(pred, truth, reference)
    out = _outdir(args)
    snapshot = {
        "inputs": [str(p) for p in args.input],
        "seed": args.seed,
        "config_file": str(args.config) if args.config else None,
        "config": _load_config(args),
    }
    report.write_json(out / "metrics.json", config=snapshot)
    report.write_per_step_csv(out / "per_step_accuracy.csv")


# ---------------------------------------------------------------------------


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="cloudcast",
        description="Cloud-type nowcasting and verification toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--input", nargs="+", default=None,
                       help="input array path(s); eval takes PRED TRUTH [REFERENCE]")
        p.add_argument("--timestamps", default=None, help="JSON timestamp sidecar")
        p.add_argument("--output", required=True, help="output directory")
        p.add_argument("--config", default=None, help="JSON configuration file")
        p.add_argument("--method", default=None, choices=("tvl1", "persistence"))
        p.add_argument("--steps", type=int, default=16, help="forecast horizon")
        p.add_argument("--factor", type=int, default=None, help="downsample factor")
        p.add_argument("--size", default=None, help="size as N or HxW")
        p.add_argument("--fraction", type=float, default=None, help="train fraction")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--flow", default=None,
                       help="translation:VX,VY or rotation:CY,CX,OMEGA")
        p.add_argument("--frames", type=int, default=None, help="synthetic frame count")
        p.set_defaults(func=func)
        return p

    add("segment", _cmd_segment, "annotate one scene from channel and NWP planes")
    add("repair", _cmd_repair, "fill sub-6-hour gaps in a sequence")
    add("split", _cmd_split, "temporal train/test split")
    add("reduce", _cmd_reduce, "collapse 11 classes to the 4 height groups")
    add("downsample", _cmd_downsample, "majority-vote spatial downsampling")
    add("crop", _cmd_crop, "center crop")
    add("forecast", _cmd_forecast, "16-step forecast from a sequence's end")
    add("tune", _cmd_tune, "grid-search TV-L1 parameters on a training sequence")
    add("eval", _cmd_eval, "verification metrics for prediction vs truth arrays")
    add("synth", _cmd_synth, "generate a synthetic labeled sequence with known flow")
    add("render", _cmd_render, "render class maps to palette PNGs")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_USAGE
    try:
        args.func(args)
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
