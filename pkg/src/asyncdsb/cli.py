"""Command-line front end.

Subcommands wire the library end to end: schedule/taumap export, full
inpainting runs, mismatch diagnostics, and (tau_min, tau_max) sweeps. Every
command resolves its parameters into a RunManifest JSON stored next to its
outputs; `rerun` replays a manifest into a fresh directory and reproduces
the outputs byte for byte.

Exit codes: 0 success, 2 validation/configuration, 3 I/O, 4 internal.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, bridge, diagnostics, imaging, priorgrad, svgplot
from . import schedule as sched
from .errors import AsyncDSBError, ConfigurationError, ValidationError

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_INTERNAL = 4

RATIO_BUCKETS = ((0.01, 0.10), (0.11, 0.20), (0.21, 0.30), (0.31, 0.40))


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def _write_manifest(out_dir: Path, command: str, config: dict, inputs: dict,
                    outputs: list[str]) -> None:
    # out_dir itself is deliberately not recorded so a rerun into a different
    # directory produces a byte-identical manifest.
    _write_json(out_dir / "manifest.json", {
        "command": command,
        "version": __version__,
        "config": config,
        "inputs": {k: str(Path(v).resolve()) for k, v in inputs.items()},
        "outputs": sorted(outputs),
    })


def _schedule_config(args_cfg: dict) -> sched.ScheduleConfig:
    base = {}
    if args_cfg.get("config_file"):
        file_cfg = sched.load_config(args_cfg["config_file"])
        base = {"steps": file_cfg.steps, "beta_min": file_cfg.beta_min,
                "total_mass": file_cfg.total_mass, "base_apex": file_cfg.base_apex}
    for key in ("steps", "beta_min", "total_mass", "base_apex"):
        if args_cfg.get(key) is not None:
            base[key] = args_cfg[key]
    base.setdefault("steps", sched.DEFAULT_STEPS)
    return sched.ScheduleConfig(**base)


def _resolved_schedule_keys(cfg: sched.ScheduleConfig) -> dict:
    return {"steps": cfg.steps, "beta_min": cfg.beta_min,
            "total_mass": cfg.total_mass, "base_apex": cfg.base_apex}


# ---------------------------------------------------------------------------
# schedule

def run_schedule(config: dict, out_dir: Path) -> list[str]:
    cfg = _schedule_config(config)
    tau = config.get("tau")
    schedule = sched.build_symmetric(cfg) if tau is None else sched.build_shifted(cfg, tau)
    outputs = ["schedule.csv", "schedule.svg"]
    sched.export_csv(schedule, out_dir / "schedule.csv")
    svgplot.line_plot(out_dir / "schedule.svg",
                      [("beta", schedule.midpoints, schedule.betas)],
                      title="noise schedule", xlabel="t", ylabel="beta",
                      invert_x=False)
    if config.get("tau_map"):
        field = sched.build_field(cfg, imaging.load_raw(config["tau_map"]))
        h, w = field.shape
        pixels = [(0, 0), (h // 2, w // 2), (h - 1, w - 1)]
        sched.export_csv(field, out_dir / "schedule_pixels.csv", pixels=pixels)
        outputs.append("schedule_pixels.csv")
    return outputs


# ---------------------------------------------------------------------------
# mask / corpus / taumap

def run_mask(config: dict, out_dir: Path) -> list[str]:
    mask = imaging.make_mask(config["kind"], config["height"], config["width"],
                             seed=config["seed"])
    imaging.save_mask_png(mask, out_dir / "mask.png")
    _write_json(out_dir / "mask_stats.json",
                {"kind": config["kind"], "ratio": imaging.mask_ratio(mask)})
    return ["mask.png", "mask_stats.json"]


def run_corpus(config: dict, out_dir: Path) -> list[str]:
    images = imaging.synth_corpus(config["seed"], config["count"],
                                  config["height"], config["width"])
    outputs = []
    for i, img in enumerate(images):
        name = f"corpus_{i:03d}.png"
        imaging.save_png(img, out_dir / name)
        outputs.append(name)
    return outputs


def _tau_pipeline(x_g: np.ndarray, mask: np.ndarray, acfg: priorgrad.AsyncConfig):
    x_c = imaging.apply_mask(x_g, mask)
    x_cg = priorgrad.sobel_magnitude(x_c)
    g_hat = priorgrad.complete_gradient(
        x_c, mask, x_cg, completer=acfg.completer,
        x_g=x_g if acfg.completer == "oracle" else None)
    tau = priorgrad.tau_from_gradient(g_hat, acfg, region=mask)
    return x_c, g_hat, tau


def run_taumap(config: dict, out_dir: Path, inputs: dict) -> list[str]:
    x_g = imaging.load_png(inputs["image"])
    mask = imaging.load_mask_png(inputs["mask"])
    imaging.ensure_mask(mask, x_g)
    acfg = priorgrad.AsyncConfig(tau_min=config["tau_min"], tau_max=config["tau_max"],
                                 gauss_sigma=config["gauss_sigma"],
                                 completer=config["completer"])
    _, g_hat, tau = _tau_pipeline(x_g, mask, acfg)
    imaging.save_map_png16(g_hat, out_dir / "gradient.png")
    imaging.save_raw(g_hat, out_dir / "gradient.f32")
    imaging.save_map_png16(tau, out_dir / "tau.png")
    imaging.save_raw(tau, out_dir / "tau.f32")
    return ["gradient.png", "gradient.png.json", "gradient.f32", "gradient.f32.json",
            "tau.png", "tau.png.json", "tau.f32", "tau.f32.json"]


# ---------------------------------------------------------------------------
# inpaint

def _inpaint_arrays(x_g: np.ndarray, mask: np.ndarray, config: dict):
    """Shared run core: returns (trajectory, tau, g_hat, schedule, cfg)."""
    cfg = _schedule_config(config)
    if config.get("sync"):
        tau = None
        g_hat = None
        run_schedule_obj = sched.build_symmetric(cfg)
    else:
        acfg = priorgrad.AsyncConfig(
            tau_min=config["tau_min"], tau_max=config["tau_max"],
            gauss_sigma=config["gauss_sigma"], completer=config["completer"])
        _, g_hat, tau = _tau_pipeline(x_g, mask, acfg)
        run_schedule_obj = sched.build_field(cfg, tau)
    vt = sched.accumulate(run_schedule_obj)
    x_c = imaging.apply_mask(x_g, mask)
    model = bridge.AnalyticOracle(x_g, vt)
    sampler = bridge.SamplerConfig(steps=cfg.steps, seed=config["seed"],
                                   clamp_visible=True,
                                   record_every=config["record_every"])
    traj = bridge.run_reverse(x_c, model, run_schedule_obj, sampler,
                              visible=(mask, x_c), vt=vt)
    return traj, tau, g_hat, run_schedule_obj, cfg


def run_inpaint(config: dict, out_dir: Path, inputs: dict) -> list[str]:
    x_g = imaging.load_png(inputs["image"])
    mask = imaging.load_mask_png(inputs["mask"])
    imaging.ensure_mask(mask, x_g)
    if config["score_model"] != "oracle":
        raise ConfigurationError("only the analytic oracle score model is built in")
    traj, tau, g_hat, _, _ = _inpaint_arrays(x_g, mask, config)
    restored = np.clip(traj.states[-1], 0.0, 1.0)
    imaging.save_png(restored, out_dir / "restored.png")
    bridge.export_trajectory_csv(traj, out_dir / "trajectory.csv", x_g, region=mask)
    outputs = ["restored.png", "trajectory.csv"]
    if tau is not None:
        imaging.save_map_png16(tau, out_dir / "tau.png")
        imaging.save_raw(tau, out_dir / "tau.f32")
        imaging.save_map_png16(g_hat, out_dir / "gradient.png")
        imaging.save_raw(g_hat, out_dir / "gradient.f32")
        outputs += ["tau.png", "tau.png.json", "tau.f32", "tau.f32.json",
                    "gradient.png", "gradient.png.json", "gradient.f32",
                    "gradient.f32.json"]
    if config.get("dump_states"):
        written = bridge.dump_states(traj, out_dir / "states", fmt=config["dump_states"])
        outputs += [f"states/{p.name}" for p in written]
        if config["dump_states"] == "raw":
            outputs += [f"states/{p.name}.json" for p in written]
    return outputs


# ---------------------------------------------------------------------------
# diagnose

def _diagnose_pair(x_g, mask, config):
    base = sched.build_symmetric(_schedule_config(config))
    theory = diagnostics.theoretical_curve(base)
    results = {}
    for label, sync in (("sync", True), ("async", False)):
        cfg = dict(config)
        cfg["sync"] = sync
        traj, tau, _, _, _ = _inpaint_arrays(x_g, mask, cfg)
        curve = diagnostics.restoration_curve(traj, x_g, mask)
        emp = diagnostics.normalized_derivative(curve)
        report = diagnostics.mismatch_report(theory, emp)
        bands = diagnostics.band_split(priorgrad.sobel_magnitude(x_g), mask)
        band_curves = {
            name: diagnostics.normalized_derivative(
                diagnostics.restoration_curve(traj, x_g, bm))
            for name, bm in (("high", bands.high), ("mid", bands.mid),
                             ("low", bands.low))}
        results[label] = (emp, report, band_curves)
    return theory, results


def run_diagnose(config: dict, out_dir: Path, inputs: dict) -> list[str]:
    x_g = imaging.load_png(inputs["image"])
    mask = imaging.load_mask_png(inputs["mask"])
    imaging.ensure_mask(mask, x_g)
    theory, results = _diagnose_pair(x_g, mask, config)
    outputs = ["theory.csv", "mismatch.json", "overlay.svg"]
    diagnostics.write_curve_csv(theory, out_dir / "theory.csv")
    payload = {}
    series = [("theory", theory.ts, theory.values)]
    for label, (emp, report, band_curves) in results.items():
        diagnostics.write_curve_csv(emp, out_dir / f"empirical_{label}.csv")
        outputs.append(f"empirical_{label}.csv")
        for name, curve in band_curves.items():
            diagnostics.write_curve_csv(curve, out_dir / f"empirical_{label}_{name}.csv")
            outputs.append(f"empirical_{label}_{name}.csv")
        payload[label] = {"peak_lag": report.peak_lag, "l1_gap": report.l1_gap}
        series.append((label, emp.ts, emp.values))
    _write_json(out_dir / "mismatch.json", payload)
    svgplot.line_plot(out_dir / "overlay.svg", series,
                      title="schedule vs restoration",
                      xlabel="t (reverse time)", ylabel="normalized rate")
    return outputs


# ---------------------------------------------------------------------------
# sweep

def _sweep_cell(task):
    """One (tau_min, tau_max) cell over the corpus; returns mean metrics."""
    (tau_lo, tau_hi, images, masks, config) = task
    base = sched.build_symmetric(_schedule_config(config))
    theory = diagnostics.theoretical_curve(base)
    mses, ssims, lags, gaps = [], [], [], []
    for idx, (x_g, mask) in enumerate(zip(images, masks)):
        cfg = dict(config)
        cfg.update(tau_min=tau_lo, tau_max=tau_hi, sync=False,
                   seed=config["seed"] + idx)
        traj, _, _, _, _ = _inpaint_arrays(x_g, mask, cfg)
        final = traj.states[-1]
        mses.append(float(np.mean((final - x_g) ** 2)))
        ssims.append(diagnostics.ssim(np.clip(final, 0, 1), x_g))
        emp = diagnostics.normalized_derivative(
            diagnostics.restoration_curve(traj, x_g, mask))
        report = diagnostics.mismatch_report(theory, emp)
        lags.append(abs(report.peak_lag))
        gaps.append(report.l1_gap)
    return {"tau_min": tau_lo, "tau_max": tau_hi,
            "mse": float(np.mean(mses)), "ssim": float(np.mean(ssims)),
            "abs_peak_lag": float(np.mean(lags)), "l1_gap": float(np.mean(gaps))}


def run_sweep(config: dict, out_dir: Path) -> list[str]:
    grid = config["grid"]
    if any(not 0.0 <= g <= 1.0 for g in grid):
        raise ValidationError("grid values must lie in [0, 1]")
    images = imaging.synth_corpus(config["seed"], config["corpus_n"],
                                  config["size"], config["size"])
    masks = [imaging.make_mask(config["mask"], config["size"], config["size"],
                               seed=config["seed"] + i)
             for i in range(len(images))]
    tasks = [(lo, hi, images, masks, config)
             for lo in grid for hi in grid if lo <= hi]
    if config.get("jobs", 1) > 1:
        with ProcessPoolExecutor(max_workers=config["jobs"]) as pool:
            cell_results = list(pool.map(_sweep_cell, tasks))
    else:
        cell_results = [_sweep_cell(t) for t in tasks]
    by_pair = {(c["tau_min"], c["tau_max"]): c for c in cell_results}

    outputs = ["sweep.csv"]
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau_min", "tau_max", "valid", "mse", "ssim",
                         "abs_peak_lag", "l1_gap"])
        for lo in grid:
            for hi in grid:
                cell = by_pair.get((lo, hi))
                if cell is None:
                    writer.writerow([f"{lo:.17g}", f"{hi:.17g}", "invalid",
                                     "", "", "", ""])
                else:
                    writer.writerow([f"{lo:.17g}", f"{hi:.17g}", "valid",
                                     f"{cell['mse']:.17g}", f"{cell['ssim']:.17g}",
                                     f"{cell['abs_peak_lag']:.17g}",
                                     f"{cell['l1_gap']:.17g}"])
    labels = [f"{g:g}" for g in grid]
    for metric in ("mse", "l1_gap"):
        matrix = np.full((len(grid), len(grid)), np.nan)
        for (lo, hi), cell in by_pair.items():
            matrix[grid.index(lo), grid.index(hi)] = cell[metric]
        name = f"sweep_{metric}.svg"
        svgplot.heatmap(out_dir / name, matrix, labels, labels,
                        title=f"mean {metric} over corpus",
                        row_title="tau_min", col_title="tau_max")
        outputs.append(name)
    return outputs


def _bucket_mask(ratio_target: float, size: int, seed: int) -> np.ndarray:
    side = max(2, int(round(np.sqrt(ratio_target * size * size))))
    side = min(side, size)
    rng = np.random.default_rng(seed)
    i0 = int(rng.integers(0, size - side + 1))
    j0 = int(rng.integers(0, size - side + 1))
    mask = np.zeros((size, size), dtype=bool)
    mask[i0:i0 + side, j0:j0 + side] = True
    return mask


def run_ratio_sweep(config: dict, out_dir: Path) -> list[str]:
    """Mask-ratio buckets: recommend the best (tau_min, tau_max) per bucket."""
    grid = config["grid"]
    images = imaging.synth_corpus(config["seed"], config["corpus_n"],
                                  config["size"], config["size"])
    rows = []
    for b_lo, b_hi in RATIO_BUCKETS:
        masks = [_bucket_mask(b_lo + (b_hi - b_lo) * (i + 0.5) / len(images),
                              config["size"], config["seed"] + i)
                 for i in range(len(images))]
        best = None
        for lo in grid:
            for hi in grid:
                if lo > hi:
                    continue
                cell = _sweep_cell((lo, hi, images, masks, config))
                if best is None or cell["l1_gap"] < best["l1_gap"]:
                    best = cell
        rows.append({"bucket_lo": b_lo, "bucket_hi": b_hi,
                     "tau_min": best["tau_min"], "tau_max": best["tau_max"],
                     "l1_gap": best["l1_gap"], "mse": best["mse"]})
    with open(out_dir / "ratio_recommendations.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bucket_lo", "bucket_hi", "tau_min", "tau_max",
                         "l1_gap", "mse"])
        for r in rows:
            writer.writerow([f"{r['bucket_lo']:.17g}", f"{r['bucket_hi']:.17g}",
                             f"{r['tau_min']:.17g}", f"{r['tau_max']:.17g}",
                             f"{r['l1_gap']:.17g}", f"{r['mse']:.17g}"])
    return ["ratio_recommendations.csv"]


# ---------------------------------------------------------------------------
# dispatch plumbing

def _dispatch(command: str, config: dict, inputs: dict, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    if command == "schedule":
        outputs = run_schedule(config, out_dir)
    elif command == "mask":
        outputs = run_mask(config, out_dir)
    elif command == "corpus":
        outputs = run_corpus(config, out_dir)
    elif command == "taumap":
        outputs = run_taumap(config, out_dir, inputs)
    elif command == "inpaint":
        outputs = run_inpaint(config, out_dir, inputs)
    elif command == "diagnose":
        outputs = run_diagnose(config, out_dir, inputs)
    elif command == "sweep":
        outputs = (run_ratio_sweep(config, out_dir) if config.get("ratio_buckets")
                   else run_sweep(config, out_dir))
    else:
        raise ValidationError(f"unknown command {command!r}")
    _write_manifest(out_dir, command, config, inputs, outputs)


def _add_schedule_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--beta-min", type=float, default=None, dest="beta_min")
    p.add_argument("--total-mass", type=float, default=None, dest="total_mass")
    p.add_argument("--base-apex", type=float, default=None, dest="base_apex")
    p.add_argument("--config", default=None, dest="config_file",
                   help="flat key=value file with steps/beta_min/total_mass/base_apex")


def _add_async_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau-min", type=float, default=0.2)
    p.add_argument("--tau-max", type=float, default=0.9)
    p.add_argument("--gauss-sigma", type=float, default=2.0)
    p.add_argument("--completer", choices=priorgrad.COMPLETERS, default="oracle")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asyncdsb",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", help="export a noise schedule (CSV + SVG)")
    _add_schedule_opts(p)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--tau-map", default=None, help="raw .f32 tau map for pixel slices")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("mask", help="generate a mask PNG")
    p.add_argument("--kind", choices=("center", "half", "wide", "narrow"),
                   required=True)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("corpus", help="generate the synthetic corpus")
    p.add_argument("--count", type=int, default=8)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("taumap", help="gradient completion and tau assignment")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    _add_async_opts(p)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("inpaint", help="full inpainting run")
    p.add_argument("--image", required=True, help="ground-truth image PNG")
    p.add_argument("--mask", required=True)
    _add_schedule_opts(p)
    _add_async_opts(p)
    p.add_argument("--sync", action="store_true",
                   help="use the global symmetric schedule (no tau field)")
    p.add_argument("--score-model", choices=("oracle",), default="oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--dump-states", choices=("png", "raw"), default=None)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("diagnose", help="sync vs async mismatch diagnostics")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    _add_schedule_opts(p)
    _add_async_opts(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("sweep", help="(tau_min, tau_max) grid over the corpus")
    _add_schedule_opts(p)
    p.add_argument("--grid", default="0.1,0.3,0.5,0.7,0.9",
                   help="comma-separated tau values")
    p.add_argument("--mask", choices=("center", "half", "wide", "narrow"),
                   default="center")
    p.add_argument("--corpus-n", type=int, default=2)
    p.add_argument("--size", type=int, default=48)
    p.add_argument("--gauss-sigma", type=float, default=2.0)
    p.add_argument("--completer", choices=priorgrad.COMPLETERS, default="oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--record-every", type=int, default=10)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--ratio-buckets", action="store_true",
                   help="recommend (tau_min, tau_max) per mask-ratio bucket")
    p.add_argument("--out-dir", required=True)

    p = sub.add_parser("rerun", help="replay a run manifest into a new directory")
    p.add_argument("manifest")
    p.add_argument("--out-dir", required=True)
    return parser


_INPUT_KEYS = ("image", "mask")
_SKIP_KEYS = ("command", "out_dir", "manifest")


def _split_namespace(args: argparse.Namespace) -> tuple[dict, dict]:
    config, inputs = {}, {}
    for key, value in vars(args).items():
        if key in _SKIP_KEYS:
            continue
        if key in _INPUT_KEYS and args.command != "sweep" and args.command != "mask":
            inputs[key] = value
        else:
            config[key] = value
    return config, inputs


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "rerun":
            manifest = json.loads(Path(args.manifest).read_text())
            _dispatch(manifest["command"], manifest["config"], manifest["inputs"],
                      Path(args.out_dir))
        else:
            config, inputs = _split_namespace(args)
            if args.command == "sweep":
                config["grid"] = [float(x) for x in str(config["grid"]).split(",")]
            _dispatch(args.command, config, inputs, Path(args.out_dir))
        return EXIT_OK
    except (ValidationError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except AsyncDSBError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
