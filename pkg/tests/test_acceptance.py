"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the verdict lines.
Criteria 7 and 8 share one expensive fixture (20 seed-matched sync/async
pairs at T=1000 on 64x64 center-masked corpus images).
"""

import csv
import json
import time
from dataclasses import dataclass

import numpy as np
import pytest

from asyncdsb import bridge, cli, diagnostics, imaging, priorgrad
from asyncdsb import schedule as sched

CORPUS_SEED = 123
EXPERIMENT_MASS = 0.3  # noise mass used for the diagnostic experiments


def verdict(num, name, ok, detail, elapsed, limit=None):
    status = "PASS" if ok else "FAIL"
    budget = f", limit {limit:.0f}s" if limit else ""
    print(f"\nACCEPTANCE {num} {name}: {status} ({detail}; {elapsed:.2f}s{budget})")


def test_criterion_1_schedule_conservation():
    start = time.time()
    rng = np.random.default_rng(42)
    worst_mass = worst_partition = 0.0
    for _ in range(100):
        steps = int(rng.integers(2, 1500))
        total = float(rng.uniform(0.1, 10.0))
        cfg = sched.ScheduleConfig(
            steps=steps,
            beta_min=float(rng.uniform(0.0, 0.49) * total),
            total_mass=total,
            base_apex=float(rng.uniform(0.05, 0.95)))
        tau = float(rng.uniform(cfg.dt, 1.0 - cfg.dt))
        s = sched.build_shifted(cfg, tau)
        worst_mass = max(worst_mass, abs(s.betas.sum() * s.dt - total) / total)
        vt = sched.accumulate(s)
        partition = np.abs(vt.sigma2 + vt.sigma2_bar - total) / total
        worst_partition = max(worst_partition, float(partition.max()))
    elapsed = time.time() - start
    ok = worst_mass <= 1e-9 and worst_partition <= 1e-9 and elapsed < 1.0
    verdict(1, "schedule conservation", ok,
            f"worst mass err {worst_mass:.2e}, worst partition err {worst_partition:.2e}",
            elapsed, limit=1)
    assert worst_mass <= 1e-9
    assert worst_partition <= 1e-9
    assert elapsed < 1.0


def _oracle_run(schedule_obj, img, mask, seed, record_every, vt=None):
    if vt is None:
        vt = sched.accumulate(schedule_obj)
    x_c = imaging.apply_mask(img, mask)
    sampler = bridge.SamplerConfig(steps=schedule_obj.steps, seed=seed,
                                   record_every=record_every)
    return bridge.run_reverse(x_c, bridge.AnalyticOracle(img, vt), schedule_obj,
                              sampler, visible=(mask, x_c), vt=vt)


def test_criterion_2_synchronous_reduction():
    start = time.time()
    cfg = sched.ScheduleConfig(steps=1000)
    img = imaging.synth_one(CORPUS_SEED, 0, 64, 64)
    mask = imaging.make_mask("center", 64, 64)
    base = sched.build_symmetric(cfg)
    field = sched.build_field(cfg, np.full((64, 64), cfg.base_apex))
    vt_g, vt_f = sched.accumulate(base), sched.accumulate(field)
    identical = True
    for seed in range(10):
        tr_g = _oracle_run(base, img, mask, seed, record_every=1, vt=vt_g)
        tr_f = _oracle_run(field, img, mask, seed, record_every=1, vt=vt_f)
        identical &= all(a.tobytes() == b.tobytes()
                         for a, b in zip(tr_g.states, tr_f.states))
        identical &= tr_g.ts == tr_f.ts
    elapsed = time.time() - start
    ok = identical and elapsed < 30.0
    verdict(2, "synchronous reduction", ok,
            f"10 seeded T=1000 64x64 run pairs bit-identical={identical}",
            elapsed, limit=30)
    assert identical
    assert elapsed < 30.0


def test_criterion_3_posterior_marginals():
    start = time.time()
    cfg = sched.ScheduleConfig(steps=1000)
    vt = sched.accumulate(sched.build_symmetric(cfg))
    ep = bridge.BridgeEndpoints(x0=np.full((100, 100), 0.15),
                                x1=np.full((100, 100), 0.85))
    rng = bridge.CounterRng(2024, stream="marginals")
    details = []
    ok = True
    for t in (0.25, 0.5, 0.75):
        draws = np.stack([bridge.sample_xt(ep, t, vt, rng, step=k)
                          for k in range(10)])
        n = draws.size  # 1e5 samples
        params = bridge.posterior_params(ep, t, vt)
        mu, var = float(params.mean[0, 0]), float(params.var)
        se_mean = np.sqrt(var / n)
        se_var = var * np.sqrt(2.0 / (n - 1))
        mean_err = abs(draws.mean() - mu)
        var_err = abs(draws.var() - var)
        ok &= mean_err <= 3 * se_mean and var_err <= 3 * se_var
        details.append(f"t={t}: |dmu|={mean_err / se_mean:.2f}se "
                       f"|dvar|={var_err / se_var:.2f}se")
        if t == 0.5:
            mid_dev = abs(mu - 0.5 * (0.15 + 0.85))
            ok &= mid_dev <= 1e-12
            details.append(f"sym-midpoint dev {mid_dev:.1e}")
    elapsed = time.time() - start
    ok = ok and elapsed < 60.0
    verdict(3, "posterior marginals", ok, "; ".join(details), elapsed, limit=60)
    assert ok


def test_criterion_4_speed_finite_difference():
    start = time.time()
    cfg = sched.ScheduleConfig(steps=1000)
    s = sched.build_symmetric(cfg)
    vt = sched.accumulate(s)
    img = imaging.synth_one(CORPUS_SEED, 1, 16, 16)
    mask = imaging.make_mask("center", 16, 16)
    ep = bridge.BridgeEndpoints(x0=img, x1=imaging.apply_mask(img, mask))
    delta = 1e-4
    worst = 0.0
    for k in np.linspace(48, 952, 20).astype(int):
        t = k / cfg.steps
        fd = (bridge.posterior_params(ep, t + delta, vt).mean
              - bridge.posterior_params(ep, t - delta, vt).mean) / (2 * delta)
        speed = bridge.theoretical_speed(ep, t, s)
        sel = np.abs(speed) > 1e-12
        worst = max(worst, float(np.max(np.abs(fd[sel] - speed[sel])
                                        / np.abs(speed[sel]))))
    elapsed = time.time() - start
    ok = worst <= 1e-2 and elapsed < 1.0
    verdict(4, "restoration-speed finite difference", ok,
            f"worst relative error {worst:.2e} at 20 interior grid times",
            elapsed, limit=1)
    assert worst <= 1e-2
    assert elapsed < 1.0


def test_criterion_5_oracle_convergence():
    start = time.time()
    cfg = sched.ScheduleConfig(steps=1000)
    base = sched.build_symmetric(cfg)
    vt = sched.accumulate(base)
    bound = 5.0 * float(vt.sigma2[1])
    mask = imaging.make_mask("center", 64, 64)
    worst = 0.0
    for i, img in enumerate(imaging.synth_corpus(CORPUS_SEED, 10, 64, 64)):
        traj = _oracle_run(base, img, mask, seed=100 + i, record_every=1000, vt=vt)
        worst = max(worst, float(np.mean((traj.states[-1] - img) ** 2)))
    elapsed = time.time() - start
    ok = worst <= bound and elapsed < 60.0
    verdict(5, "oracle convergence", ok,
            f"worst final MSE {worst:.2e} <= bound {bound:.2e}", elapsed, limit=60)
    assert worst <= bound
    assert elapsed < 60.0


def test_criterion_6_tau_assignment():
    start = time.time()
    cfg = priorgrad.AsyncConfig(tau_min=0.2, tau_max=0.9)
    rng = np.random.default_rng(0)
    exact = True
    worst_affine = 0.0
    for _ in range(20):
        g = rng.random((48, 48))
        region = imaging.make_mask("center", 48, 48)
        tau = priorgrad.tau_from_gradient(g, cfg, region=region)
        filtered = priorgrad.gaussian_filter(g, cfg.gauss_sigma)
        inside = np.where(region, filtered, np.nan)
        exact &= tau[np.unravel_index(np.nanargmax(inside), inside.shape)] == cfg.tau_max
        exact &= tau[np.unravel_index(np.nanargmin(inside), inside.shape)] == cfg.tau_min
        a, b = float(rng.uniform(0.5, 3.0)), float(rng.uniform(-0.2, 0.8))
        tau_affine = priorgrad.tau_from_gradient(a * g + b, cfg, region=region)
        worst_affine = max(worst_affine, float(np.abs(tau - tau_affine).max()))
    const = priorgrad.tau_from_gradient(np.full((32, 32), 0.7), cfg)
    midpoint_ok = bool(np.all(const == 0.5 * (cfg.tau_min + cfg.tau_max)))
    elapsed = time.time() - start
    ok = exact and midpoint_ok and worst_affine <= 1e-12
    verdict(6, "tau endpoints/degeneracy/affine", ok,
            f"endpoints exact={exact}, midpoint={midpoint_ok}, "
            f"affine dev {worst_affine:.1e}", elapsed)
    assert exact
    assert midpoint_ok
    assert worst_affine <= 1e-12


@dataclass
class MismatchStats:
    lag_sync: list
    lag_async: list
    gap_sync: list
    gap_async: list
    band_peaks: dict
    elapsed: float


@pytest.fixture(scope="module")
def corpus_pairs():
    """Criteria 7/8 fixture: 20 seed-matched sync/async pairs at T=1000."""
    start = time.time()
    cfg = sched.ScheduleConfig(steps=1000, total_mass=EXPERIMENT_MASS)
    base = sched.build_symmetric(cfg)
    vt_sync = sched.accumulate(base)
    theory = diagnostics.theoretical_curve(base)
    acfg = priorgrad.AsyncConfig(tau_min=0.2, tau_max=0.9, gauss_sigma=2.0,
                                 completer="oracle")
    mask = imaging.make_mask("center", 64, 64)
    stats = MismatchStats([], [], [], [], {"high": [], "mid": [], "low": []}, 0.0)
    for i, img in enumerate(imaging.synth_corpus(CORPUS_SEED, 20, 64, 64)):
        x_c = imaging.apply_mask(img, mask)
        g_hat = priorgrad.complete_gradient(
            x_c, mask, priorgrad.sobel_magnitude(x_c), "oracle", x_g=img)
        tau = priorgrad.tau_from_gradient(g_hat, acfg, region=mask)
        field = sched.build_field(cfg, tau)
        vt_async = sched.accumulate(field)
        seed = 1000 + i
        tr_sync = _oracle_run(base, img, mask, seed, record_every=10, vt=vt_sync)
        tr_async = _oracle_run(field, img, mask, seed, record_every=10, vt=vt_async)
        for traj, lags, gaps in ((tr_sync, stats.lag_sync, stats.gap_sync),
                                 (tr_async, stats.lag_async, stats.gap_async)):
            emp = diagnostics.normalized_derivative(
                diagnostics.restoration_curve(traj, img, mask))
            report = diagnostics.mismatch_report(theory, emp)
            lags.append(abs(report.peak_lag))
            gaps.append(report.l1_gap)
        bands = diagnostics.band_split(priorgrad.sobel_magnitude(img), mask)
        for name, band in (("high", bands.high), ("mid", bands.mid),
                           ("low", bands.low)):
            curve = diagnostics.normalized_derivative(
                diagnostics.restoration_curve(tr_async, img, band))
            stats.band_peaks[name].append(diagnostics.peak_time(curve))
    stats.elapsed = time.time() - start
    return stats


def test_criterion_7_mismatch_alleviation(corpus_pairs):
    s = corpus_pairs
    lag_s, lag_a = np.array(s.lag_sync), np.array(s.lag_async)
    gap_s, gap_a = np.array(s.gap_sync), np.array(s.gap_async)
    joint = np.mean((lag_a <= lag_s) & (gap_a <= gap_s))
    lag_mean_better = lag_a.mean() < lag_s.mean()
    gap_mean_better = gap_a.mean() < gap_s.mean()
    ok = joint >= 0.8 and lag_mean_better and gap_mean_better \
        and s.elapsed < 300.0
    verdict(7, "mismatch alleviation", ok,
            f"joint wins {joint:.0%} (need >=80%), mean |peak_lag| "
            f"sync {lag_s.mean():.3f} vs async {lag_a.mean():.3f}, mean l1_gap "
            f"sync {gap_s.mean():.3f} vs async {gap_a.mean():.3f}",
            s.elapsed, limit=300)
    assert s.elapsed < 300.0
    assert joint >= 0.8
    assert lag_mean_better
    assert gap_mean_better


def test_criterion_8_band_ordering(corpus_pairs):
    s = corpus_pairs
    high = float(np.mean(s.band_peaks["high"]))
    mid = float(np.mean(s.band_peaks["mid"]))
    low = float(np.mean(s.band_peaks["low"]))
    ok = high >= mid >= low
    verdict(8, "band ordering", ok,
            f"mean peak time high {high:.3f} >= mid {mid:.3f} >= low {low:.3f}",
            s.elapsed, limit=300)
    assert high >= mid
    assert mid >= low


def test_criterion_9_sweep_validity(tmp_path):
    start = time.time()
    out = tmp_path / "sweep"
    code = cli.main(["sweep", "--grid", "0.1,0.3,0.5,0.7,0.9", "--corpus-n", "1",
                     "--size", "48", "--steps", "150", "--total-mass",
                     str(EXPERIMENT_MASS), "--seed", "0",
                     "--out-dir", str(out)])
    with open(out / "sweep.csv") as fh:
        rows = list(csv.DictReader(fh))
    n_valid = sum(r["valid"] == "valid" for r in rows)
    n_invalid = sum(r["valid"] == "invalid" for r in rows)
    invalid_ok = all(float(r["tau_min"]) > float(r["tau_max"])
                     for r in rows if r["valid"] == "invalid")

    # diagonal cells are pixel-synchronous: bit-identical to the global
    # shifted schedule under the same seed (criterion-2 reduction)
    cfg = sched.ScheduleConfig(steps=300, total_mass=EXPERIMENT_MASS)
    img = imaging.synth_one(CORPUS_SEED, 0, 48, 48)
    mask = imaging.make_mask("center", 48, 48)
    diagonal_ok = True
    for v in (0.3, 0.7):
        field = sched.build_field(cfg, np.full((48, 48), v))
        global_shifted = sched.build_shifted(cfg, v)
        tr_f = _oracle_run(field, img, mask, seed=5, record_every=50)
        tr_g = _oracle_run(global_shifted, img, mask, seed=5, record_every=50)
        diagonal_ok &= all(a.tobytes() == b.tobytes()
                           for a, b in zip(tr_f.states, tr_g.states))
    elapsed = time.time() - start
    ok = code == 0 and n_valid == 15 and n_invalid == 10 and invalid_ok \
        and diagonal_ok
    verdict(9, "sweep validity", ok,
            f"{n_valid} valid / {n_invalid} invalid cells of 5x5, "
            f"diagonal synchronous reduction={diagonal_ok}", elapsed)
    assert code == 0
    assert n_valid == 15 and n_invalid == 10
    assert invalid_ok
    assert diagonal_ok


def _compare_run_dirs(first, second):
    mismatches = []
    for path in sorted(p for p in first.rglob("*") if p.is_file()):
        other = second / path.relative_to(first)
        if path.suffix == ".png":
            from PIL import Image
            same = np.array_equal(np.asarray(Image.open(path)),
                                  np.asarray(Image.open(other)))
        else:
            same = path.read_bytes() == other.read_bytes()
        if not same:
            mismatches.append(str(path.relative_to(first)))
    return mismatches


def test_criterion_10_cli_determinism(tmp_path):
    start = time.time()
    img_png = tmp_path / "image.png"
    mask_png = tmp_path / "mask.png"
    imaging.save_png(imaging.synth_one(CORPUS_SEED, 0, 48, 48), img_png)
    imaging.save_mask_png(imaging.make_mask("center", 48, 48), mask_png)
    commands = {
        "schedule": ["schedule", "--steps", "200", "--tau", "0.7"],
        "mask": ["mask", "--kind", "narrow", "--seed", "3"],
        "corpus": ["corpus", "--count", "2", "--seed", "4"],
        "taumap": ["taumap", "--image", str(img_png), "--mask", str(mask_png)],
        "inpaint": ["inpaint", "--image", str(img_png), "--mask", str(mask_png),
                    "--steps", "120", "--total-mass", str(EXPERIMENT_MASS),
                    "--seed", "6", "--dump-states", "raw"],
        "diagnose": ["diagnose", "--image", str(img_png), "--mask", str(mask_png),
                     "--steps", "120", "--total-mass", str(EXPERIMENT_MASS)],
        "sweep": ["sweep", "--grid", "0.3,0.7", "--corpus-n", "1", "--size", "48",
                  "--steps", "60", "--total-mass", str(EXPERIMENT_MASS)],
    }
    all_ok = True
    details = []
    for name, args in commands.items():
        first = tmp_path / f"{name}_run"
        second = tmp_path / f"{name}_rerun"
        assert cli.main(args + ["--out-dir", str(first)]) == 0
        assert cli.main(["rerun", str(first / "manifest.json"),
                         "--out-dir", str(second)]) == 0
        mismatches = _compare_run_dirs(first, second)
        all_ok &= not mismatches
        if mismatches:
            details.append(f"{name}: {mismatches}")
    elapsed = time.time() - start
    verdict(10, "CLI determinism", all_ok,
            f"{len(commands)} commands re-run from manifests"
            + (f"; mismatches {details}" if details else ", all byte/pixel identical"),
            elapsed)
    assert all_ok, details
