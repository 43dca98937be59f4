"""Command-line front end: encode, decode, sweep, bd.

Exit codes: 0 success, 2 usage errors (bad flags, missing input), 3 data or
decode errors.  A ``--config`` file of ``key=value`` lines overrides built-in
defaults; explicit flags override both.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import media_io
from .decoder import decode_sequence
from .encoder import EncoderConfig, MODE_INTRA, encode_sequence, write_stats_csv
from .errors import CodecError
from .frames import FrameSequence
from .metrics import RDPoint, bd_metrics, ms_ssim, pareto_hull, psnr, read_rd_csv, ssim, write_rd_csv

_CONFIG_KEYS = {
    "qp0": int,
    "tau": float,
    "buffer": int,
    "kp": int,
    "fps": str,
    "sigma_heat": float,
    "sigma_w": float,
    "beta": float,
    "metric": str,
    "jobs": int,
}

_METRICS = {"psnr": psnr, "ssim": ssim, "ms_ssim": ms_ssim}


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"no such config file: {p}")
    values = {}
    for lineno, line in enumerate(p.read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{p}:{lineno}: expected key=value")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _CONFIG_KEYS:
            raise ValueError(f"{p}:{lineno}: unknown config key {key!r}")
        values[key] = _CONFIG_KEYS[key](raw.strip())
    return values


def _parse_fps(text: str) -> Fraction:
    text = str(text).replace("/", ":")
    if ":" in text:
        num, den = text.split(":")
        return Fraction(int(num), int(den))
    return Fraction(text)


def build_parser(defaults: dict | None = None) -> argparse.ArgumentParser:
    d = defaults or {}
    parser = argparse.ArgumentParser(
        prog="animcodec",
        description="Keypoint-animation video codec with adaptive intra refresh.",
    )
    parser.add_argument("--config", help="key=value file overriding defaults", default=None)
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    enc = sub.add_parser("encode", help="encode a video into a .dac stream", formatter_class=fmt)
    enc.add_argument("input", help="input .y4m file or image directory")
    enc.add_argument("output", help="output .dac path")
    enc.add_argument("--qp0", type=int, default=d.get("qp0", 32), help="initial intra QP")
    enc.add_argument("--tau", type=float, default=d.get("tau", 30.0), help="PSNR refresh threshold, dB")
    enc.add_argument("--buffer", type=int, default=d.get("buffer", 5), help="source buffer capacity")
    enc.add_argument("--kp", type=int, default=d.get("kp", 9), help="number of keypoints")
    enc.add_argument("--fps", default=d.get("fps"), help="frame rate for image-dir input, e.g. 30 or 30000:1001")
    enc.add_argument("--sigma-heat", type=float, default=d.get("sigma_heat", 2.0), help="saliency blur, px")
    enc.add_argument("--sigma-w", type=float, default=d.get("sigma_w", 0.1), help="flow kernel width")
    enc.add_argument("--beta", type=float, default=d.get("beta", 1.0), help="background motion weight")
    enc.add_argument("--preprocess", action="store_true", help="center-crop and resize input to 256x256")
    enc.add_argument("--stats", default=None, help="per-frame stats CSV path (default: OUTPUT.stats.csv)")

    dec = sub.add_parser("decode", help="decode a .dac stream", formatter_class=fmt)
    dec.add_argument("input", help="input .dac path")
    dec.add_argument("output", help="output .y4m file or image directory")

    sw = sub.add_parser("sweep", help="encode a (qp0, tau) grid and report RD points", formatter_class=fmt)
    sw.add_argument("input", help="input .y4m file or image directory")
    sw.add_argument("report", help="output CSV of RD points")
    sw.add_argument("--qp0-list", default="26,32,38", help="comma-separated qp0 values")
    sw.add_argument("--tau-list", default="25,30,35", help="comma-separated tau values, dB")
    sw.add_argument("--metric", choices=sorted(_METRICS), default=d.get("metric", "psnr"))
    sw.add_argument("--fps", default=d.get("fps"), help="frame rate for image-dir input")
    sw.add_argument("--kp", type=int, default=d.get("kp", 9), help="number of keypoints")
    sw.add_argument("--buffer", type=int, default=d.get("buffer", 5), help="source buffer capacity")
    sw.add_argument("--jobs", type=int, default=d.get("jobs", 1), help="parallel encoder processes")
    sw.add_argument("--preprocess", action="store_true", help="center-crop and resize input to 256x256")

    bd = sub.add_parser("bd", help="Bjontegaard deltas between two RD point CSVs", formatter_class=fmt)
    bd.add_argument("anchor", help="anchor curve CSV (rate_kbps + metric columns)")
    bd.add_argument("test", help="test curve CSV")
    bd.add_argument("--metric", default="all", help="metric column to compare, or 'all'")
    bd.add_argument("--out", default=None, help="also write the table to this CSV")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    try:
        defaults = _load_config(known.config)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser = build_parser(defaults)
    args = parser.parse_args(argv)

    try:
        if args.command == "encode":
            return _cmd_encode(parser, args)
        if args.command == "decode":
            return _cmd_decode(parser, args)
        if args.command == "sweep":
            return _cmd_sweep(parser, args)
        if args.command == "bd":
            return _cmd_bd(parser, args)
        parser.error(f"unknown command {args.command}")
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CodecError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


def _load_input(args) -> FrameSequence:
    fps = _parse_fps(args.fps) if getattr(args, "fps", None) else None
    seq = media_io.load_sequence(args.input, fps=fps)
    if getattr(args, "preprocess", False):
        frames = np.stack([media_io.preprocess(f) for f in seq])
        seq = FrameSequence(frames, seq.fps)
    return seq


def _encoder_config(parser, args, tau=None, qp0=None) -> EncoderConfig:
    tau = args.tau if tau is None else tau
    qp0 = args.qp0 if qp0 is None else qp0
    if tau <= 0:
        parser.error("tau > 0 required")
    try:
        return EncoderConfig(
            qp0=qp0,
            psnr_threshold=tau,
            buffer_capacity=args.buffer,
            num_keypoints=args.kp,
            sigma_heat=getattr(args, "sigma_heat", 2.0),
            sigma_w=getattr(args, "sigma_w", 0.1),
            beta=getattr(args, "beta", 1.0),
        )
    except ValueError as exc:
        parser.error(str(exc))


def _cmd_encode(parser, args) -> int:
    seq = _load_input(args)
    cfg = _encoder_config(parser, args)
    result = encode_sequence(seq, cfg)
    Path(args.output).write_bytes(result.stream)
    stats_path = args.stats or f"{args.output}.stats.csv"
    write_stats_csv(stats_path, result.stats)
    n_intra = sum(1 for s in result.stats if s.mode == MODE_INTRA)
    print(f"frames={len(seq)} intra={n_intra} rate_kbps={result.rate_kbps:.3f}")
    print(f"stats={stats_path}")
    return 0


def _cmd_decode(parser, args) -> int:
    data = Path(args.input).read_bytes()
    seq = decode_sequence(data)
    out = Path(args.output)
    if out.suffix.lower() == ".y4m" and len(seq) == 0:
        print("decoded 0 frames; nothing written")
        return 0
    media_io.save_sequence(seq, out)
    print(f"decoded {len(seq)} frames -> {out}")
    return 0


_SWEEP_STATE: dict = {}


def _init_sweep_worker(frames, fps, base_kwargs):
    _SWEEP_STATE["seq"] = FrameSequence(frames, fps)
    _SWEEP_STATE["base"] = base_kwargs


def _sweep_point(job):
    qp0, tau, metric_name = job
    seq = _SWEEP_STATE["seq"]
    cfg = EncoderConfig(qp0=qp0, psnr_threshold=tau, **_SWEEP_STATE["base"])
    result = encode_sequence(seq, cfg)
    metric_fn = _METRICS[metric_name]
    scores = [metric_fn(seq[t], result.reconstructions[t]) for t in range(len(seq))]
    n_intra = sum(1 for s in result.stats if s.mode == MODE_INTRA)
    return {
        "qp0": qp0,
        "tau": tau,
        "rate_kbps": result.rate_kbps,
        metric_name: float(np.mean(scores)),
        "n_intra": n_intra,
    }


def _cmd_sweep(parser, args) -> int:
    seq = _load_input(args)
    qp0s = [int(v) for v in args.qp0_list.split(",") if v.strip()]
    taus = [float(v) for v in args.tau_list.split(",") if v.strip()]
    if not qp0s or not taus:
        parser.error("qp0-list and tau-list must be non-empty")
    if any(t <= 0 for t in taus):
        parser.error("tau > 0 required")
    base = dict(buffer_capacity=args.buffer, num_keypoints=args.kp)
    jobs = [(qp0, tau, args.metric) for qp0 in qp0s for tau in taus]
    _init_sweep_worker(seq.frames, seq.fps, base)
    if args.jobs > 1:
        with ProcessPoolExecutor(
            max_workers=args.jobs,
            initializer=_init_sweep_worker,
            initargs=(seq.frames, seq.fps, base),
        ) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(job) for job in jobs]

    hull = pareto_hull([RDPoint(r["rate_kbps"], r[args.metric]) for r in rows])
    hull_set = {(p.rate_kbps, p.quality) for p in hull}
    for r in rows:
        r["on_hull"] = int((r["rate_kbps"], r[args.metric]) in hull_set)
    fields = ["qp0", "tau", "rate_kbps", args.metric, "n_intra", "on_hull"]
    write_rd_csv(args.report, rows, fields)
    print(f"swept {len(rows)} points; hull has {len(hull)} -> {args.report}")
    for p in hull:
        print(f"hull rate_kbps={p.rate_kbps:.3f} {args.metric}={p.quality:.4f}")
    return 0


def _cmd_bd(parser, args) -> int:
    anchor = read_rd_csv(args.anchor)
    test = read_rd_csv(args.test)
    if args.metric == "all":
        names = [m for m in anchor if m in test and m != "on_hull"]
    else:
        names = [args.metric]
    rows = []
    for name in names:
        if name not in anchor or name not in test:
            raise ValueError(f"metric {name!r} missing from input CSVs")
        bd_quality, bd_rate = bd_metrics(anchor[name], test[name])
        rows.append({"metric": name, "bd_quality": f"{bd_quality:.4f}", "bd_rate_percent": f"{bd_rate:.4f}"})
    if not rows:
        raise ValueError("no shared metric columns between the two CSVs")
    width = max(len(r["metric"]) for r in rows)
    print(f"{'metric':<{width}}  bd_quality  bd_rate_percent")
    for r in rows:
        print(f"{r['metric']:<{width}}  {r['bd_quality']:>10}  {r['bd_rate_percent']:>15}")
    if args.out:
        write_rd_csv(args.out, rows, ["metric", "bd_quality", "bd_rate_percent"])
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
