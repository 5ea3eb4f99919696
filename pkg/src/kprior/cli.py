"""Command-line front end: synth, run, bench and oracle subcommands.

Configuration comes from an optional plain-text key=value file plus flag
overrides. The emitted CSV columns are fixed so reports stay diffable:
``bench`` writes instance, family, image_psnr, ssim, kernel_psnr,
runtime_seconds; ``run`` writes the same row without the runtime column so
identical seeds give bit-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import imgio, kernels, metrics, pipeline
from .estimator import EstimatorConfig
from .pipeline import RunConfig
from .restorer import RestorerConfig
from .sampling import SamplerConfig

RUN_COLUMNS = ["instance", "family", "image_psnr", "ssim", "kernel_psnr"]
BENCH_COLUMNS = RUN_COLUMNS + ["runtime_seconds"]

_INT_KEYS = {"scale", "iterations", "side", "seed", "samples", "inner_steps", "restore_steps",
             "net_input", "grid_resolution"}
_FLOAT_KEYS = {"noise_sigma", "delta_floor", "walk_scale", "anneal", "step_data", "step_prior",
               "adam_lr", "step_image", "tv_weight"}
_STR_KEYS = {"family", "proposal", "optimizer", "init"}


def load_config_file(path) -> dict:
    """Parse ``key = value`` lines; '#' starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


def _coerce(key: str, value):
    if isinstance(value, str):
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key == "net_hidden":
            return tuple(int(v) for v in value.split(","))
        if key not in _STR_KEYS:
            raise ValueError(f"unknown config key {key!r}")
    return value


def config_from_mapping(mapping: dict) -> RunConfig:
    """Build a RunConfig from flat config keys (see README for the key list)."""
    m = {k: _coerce(k, v) for k, v in mapping.items() if v is not None}

    sampler_keys = {"samples": "num_samples", "family": "family", "delta_floor": "delta_floor",
                    "proposal": "proposal", "walk_scale": "walk_scale", "anneal": "anneal"}
    est_keys = {"step_data": "step_data", "step_prior": "step_prior",
                "inner_steps": "inner_steps", "optimizer": "optimizer", "adam_lr": "adam_lr"}
    rest_keys = {"step_image": "step_image", "restore_steps": "steps_per_iter",
                 "tv_weight": "tv_weight", "init": "init"}

    sampler = {dst: m[src] for src, dst in sampler_keys.items() if src in m}
    est = {dst: m[src] for src, dst in est_keys.items() if src in m}
    rest = {dst: m[src] for src, dst in rest_keys.items() if src in m}

    net_dims = None
    if "net_input" in m or "net_hidden" in m:
        scale = m.get("scale", 2)
        side = m.get("side", kernels.standard_side(scale))
        net_dims = (m.get("net_input", pipeline.DEFAULT_NET_INPUT),
                    *m.get("net_hidden", pipeline.DEFAULT_NET_HIDDEN),
                    side * side)

    return RunConfig(
        scale=m.get("scale", 2),
        iterations=m.get("iterations", 300),
        side=m.get("side"),
        seed=m.get("seed", 0),
        net_dims=net_dims,
        sampler=SamplerConfig(**sampler) if sampler else None,
        estimator=EstimatorConfig(**est) if est else None,
        restorer=RestorerConfig(**rest) if rest else None,
    )


def _gather_config(args) -> dict:
    mapping = load_config_file(args.config) if args.config else {}
    for key in list(_INT_KEYS | _FLOAT_KEYS | _STR_KEYS) + ["net_hidden"]:
        value = getattr(args, key, None)
        if value is not None:
            mapping[key] = value
    return mapping


def _load_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".raw":
        return imgio.load_image_raw(path)
    return imgio.load_image_png(path)


def _fmt(value) -> str:
    if value is None:
        return ""
    return f"{value:.6f}"


def _write_csv(path, columns, rows) -> None:
    with open(path, "w") as f:
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(str(row[c]) if c in ("instance", "family") else _fmt(row.get(c))
                             for c in columns) + "\n")


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="plain-text key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--scale", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--side", type=int)
    p.add_argument("--samples", type=int, help="candidate kernels per round (0 disables sampling)")
    p.add_argument("--family", choices=["gaussian", "motion"])
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.add_argument("--proposal", choices=["independent", "random_walk"])
    p.add_argument("--walk-scale", dest="walk_scale", type=float)
    p.add_argument("--anneal", type=float)
    p.add_argument("--delta-floor", dest="delta_floor", type=float)
    p.add_argument("--step-data", dest="step_data", type=float)
    p.add_argument("--step-prior", dest="step_prior", type=float)
    p.add_argument("--inner-steps", dest="inner_steps", type=int)
    p.add_argument("--optimizer", choices=["adam", "plain"])
    p.add_argument("--adam-lr", dest="adam_lr", type=float)
    p.add_argument("--step-image", dest="step_image", type=float)
    p.add_argument("--restore-steps", dest="restore_steps", type=int)
    p.add_argument("--tv-weight", dest="tv_weight", type=float)
    p.add_argument("--init", choices=["bilinear", "nearest"])
    p.add_argument("--net-input", dest="net_input", type=int)
    p.add_argument("--net-hidden", dest="net_hidden")


def cmd_synth(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mapping = _gather_config(args)
    family = mapping.get("family", "gaussian")
    scale = int(mapping.get("scale", 2))
    noise = float(mapping.get("noise_sigma", 0.0))
    seed = int(mapping.get("seed", 0))

    paths = sorted(Path(args.hr_dir).glob("*.png"))
    if not paths:
        print(f"no PNG images in {args.hr_dir}", file=sys.stderr)
        return 1
    for i, path in enumerate(paths):
        hr = _load_image(path)
        h, w = hr.shape[:2]
        hr = hr[: h - h % scale, : w - w % scale]
        y, k_true, latent = pipeline.synth_instance(hr, family, scale, noise, seed + i)
        stem = out_dir / path.stem
        imgio.save_image_raw(f"{stem}_hr.raw", hr)
        imgio.save_image_raw(f"{stem}_y.raw", y)
        imgio.save_image_png(f"{stem}_y.png", np.clip(y, 0.0, 1.0))
        imgio.save_kernel_txt(f"{stem}_k.txt", k_true)
        imgio.save_kernel_png(f"{stem}_k.png", k_true)
        with open(f"{stem}_latent.json", "w") as f:
            json.dump({"family": family, "scale": scale, "seed": seed + i, **asdict(latent)}, f)
        print(f"{path.stem}: y {y.shape[:2]}, kernel side {k_true.shape[0]}")
    return 0


def _run_one(y, cfg: RunConfig, hr, k_true, out_dir: Path, stem: str, trace: bool):
    trace_path = out_dir / f"{stem}_trace.jsonl" if trace else None
    ground_truth = (hr, k_true) if (hr is not None or k_true is not None) else None
    x, k, report, _ = pipeline.run(y, cfg, ground_truth=ground_truth, trace_path=trace_path)
    imgio.save_image_png(out_dir / f"{stem}_x.png", x)
    imgio.save_image_raw(out_dir / f"{stem}_x.raw", x)
    imgio.save_kernel_txt(out_dir / f"{stem}_kernel.txt", k)
    imgio.save_kernel_png(out_dir / f"{stem}_kernel.png", k)
    return report


def cmd_run(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mapping = _gather_config(args)
    cfg = config_from_mapping(mapping)
    if args.trace:
        cfg = replace(cfg, trace=True)

    y = _load_image(args.y)
    hr = _load_image(args.hr) if args.hr else None
    k_true = imgio.load_kernel_txt(args.kernel) if args.kernel else None
    stem = Path(args.y).stem
    report = _run_one(y, cfg, hr, k_true, out_dir, stem, args.trace)

    row = {"instance": stem, "family": mapping.get("family", "gaussian"),
           "image_psnr": None if np.isnan(report.image_psnr) else report.image_psnr,
           "ssim": None if np.isnan(report.ssim) else report.ssim,
           "kernel_psnr": report.kernel_psnr}
    _write_csv(out_dir / "result.csv", RUN_COLUMNS, [row])
    print(f"{stem}: image_psnr={_fmt(row['image_psnr'])} ssim={_fmt(row['ssim'])} "
          f"kernel_psnr={_fmt(row['kernel_psnr'])} ({report.runtime_seconds:.1f}s)")
    return 0


def cmd_bench(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mapping = _gather_config(args)
    cfg = config_from_mapping(mapping)
    if args.trace:
        cfg = replace(cfg, trace=True)
    family = mapping.get("family", "gaussian")
    noise = float(mapping.get("noise_sigma", 0.0))
    base_seed = int(mapping.get("seed", 0))

    paths = sorted(Path(args.hr_dir).glob("*.png"))
    if not paths:
        print(f"no PNG images in {args.hr_dir}", file=sys.stderr)
        return 1
    rows = []
    for i, path in enumerate(paths):
        hr = _load_image(path)
        h, w = hr.shape[:2]
        hr = hr[: h - h % cfg.scale, : w - w % cfg.scale]
        y, k_true, _ = pipeline.synth_instance(hr, family, cfg.scale, noise, base_seed + i)
        inst_cfg = replace(cfg, seed=base_seed + i)
        report = _run_one(y, inst_cfg, hr, k_true, out_dir, path.stem, args.trace)
        rows.append({"instance": path.stem, "family": family,
                     "image_psnr": report.image_psnr, "ssim": report.ssim,
                     "kernel_psnr": report.kernel_psnr,
                     "runtime_seconds": report.runtime_seconds})
        print(f"{path.stem}: image_psnr={report.image_psnr:.2f} ssim={report.ssim:.4f} "
              f"kernel_psnr={_fmt(report.kernel_psnr)} ({report.runtime_seconds:.1f}s)")
    _write_csv(out_dir / "bench.csv", BENCH_COLUMNS, rows)
    return 0


def cmd_oracle(args) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mapping = _gather_config(args)
    scale = int(mapping.get("scale", 2))
    resolution = int(mapping.get("grid_resolution", args.grid_resolution or 13))
    y = _load_image(args.y)
    x_ref = _load_image(args.x_ref)
    kernel, loss = pipeline.grid_search_oracle(y, x_ref, scale, resolution,
                                               side=mapping.get("side"))
    imgio.save_kernel_txt(out_dir / "oracle_kernel.txt", kernel)
    imgio.save_kernel_png(out_dir / "oracle_kernel.png", kernel)
    k_true = imgio.load_kernel_txt(args.kernel) if args.kernel else None
    if k_true is not None:
        print(f"oracle loss={loss:.6g} kernel_psnr={metrics.kernel_psnr(kernel, k_true):.2f}")
    else:
        print(f"oracle loss={loss:.6g}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="kprior",
                                     description="blind-SR kernel estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="degrade HR images into test fixtures")
    p.add_argument("--hr-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trace", action="store_true")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("run", help="estimate kernel and image for one observation")
    p.add_argument("--y", required=True, help="LR observation (.png or .raw)")
    p.add_argument("--hr", help="ground-truth HR image for metrics")
    p.add_argument("--kernel", help="ground-truth kernel (.txt) for metrics")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trace", action="store_true")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("bench", help="synthesize and run a directory of HR images")
    p.add_argument("--hr-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--trace", action="store_true")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("oracle", help="grid-search kernel baseline (gaussian family)")
    p.add_argument("--y", required=True)
    p.add_argument("--x-ref", required=True, help="reference HR image")
    p.add_argument("--kernel", help="ground-truth kernel for scoring")
    p.add_argument("--grid-resolution", type=int, default=13)
    p.add_argument("--out-dir", required=True)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_oracle)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
