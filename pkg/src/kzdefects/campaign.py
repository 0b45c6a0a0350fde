"""Campaign runners behind the command-line subcommands.

Each ``cmd_*`` writes its result files into the output directory and
returns an exit code: 0 ok, 1 some points failed, 2 configuration error.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .analysis import (even_poisson_reference, compare_distribution, default_power_law_window,
                       fit_power_law, hold_spectrum)
from .exceptions import CapacityError, ConfigError, DegenerateFitError
from .mitigation import ZNEGrid, confusion_inverse_mean, mitigate
from .observables import sample_bitstrings
from .sweep import correlation_length, run_hold, run_kz_sweep

log = logging.getLogger(__name__)

EXIT_OK, EXIT_PARTIAL, EXIT_CONFIG = 0, 1, 2

SWEEP_COLUMNS = ("gamma_over_2pi_MHz_per_us", "t_delta_us", "mean_D", "var_D", "ratio", "xi",
                 "xi_err", "in_mu_window", "odd_mass", "tv_even_poisson", "norm_drift")


def _outdir(cfg):
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def power_law_summary(points, window=None):
    good = [p for p in points if p.ok and np.isfinite(p.xi) and p.xi > 0]
    if len(good) < 3:
        return None, window
    gammas = np.array([p.gamma for p in good])
    xis = np.array([p.xi for p in good])
    window = tuple(window) if window else default_power_law_window(gammas)
    try:
        return fit_power_law(gammas, xis, window=window), window
    except DegenerateFitError as exc:
        log.warning("power-law fit skipped: %s", exc)
        return None, window


def sweep_rows(points, window, size_ratio=None):
    rows = []
    for p in points:
        inside = window is not None and window[0] <= p.gamma <= window[1]
        tv = float("nan")
        if p.ok and p.mean_D > 0:
            tv = compare_distribution(p.pmf, even_poisson_reference(_dist(p)))
        row = [p.gamma, p.t_delta, p.mean_D, p.var_D, p.ratio, p.xi, p.xi_err, inside,
               p.odd_mass, tv, p.norm_drift]
        if size_ratio:
            row += [p.mean_D * size_ratio, p.var_D * size_ratio]
        rows.append(row)
    return rows


def _dist(point):
    from .observables import DefectDistribution

    return DefectDistribution(point.pmf)


def write_sweep_outputs(out, cfg, points, prefix=""):
    digest = cfg.digest()
    fit, window = power_law_summary(points, cfg.analysis.power_window)
    cols = list(SWEEP_COLUMNS)
    ratio = cfg.analysis.size_ratio
    if ratio:
        cols += ["mean_D_scaled", "var_D_scaled"]
    io.write_csv(out / f"{prefix}sweep.csv", cols, sweep_rows(points, window, ratio), digest)
    io.write_json(out / f"{prefix}distributions.json", {"ramps": [
        {"t_delta_us": p.t_delta, "gamma_over_2pi_MHz_per_us": p.gamma,
         "pmf": p.pmf.tolist() if p.pmf is not None else None} for p in points]}, digest)
    rows = []
    for p in points:
        if not p.ok:
            continue
        for l in range(1, p.density_corr.size):
            defect = p.defect_corr[l] if l < p.defect_corr.size else float("nan")
            rows.append([p.t_delta, p.gamma, l, p.density_corr[l], defect])
    io.write_csv(out / f"{prefix}correlators.csv",
                 ["t_delta_us", "gamma_over_2pi_MHz_per_us", "l", "density", "defect"],
                 rows, digest)
    io.write_json(out / f"{prefix}fit.json", {
        "power_law": fit.to_dict() if fit else None,
        "window": list(window) if window else None}, digest)
    failures = [{"t_delta_us": p.t_delta, "error": p.error, "diagnostics": p.diagnostics}
                for p in points if not p.ok]
    io.write_json(out / f"{prefix}manifest.json", {
        "n_points": len(points), "failures": failures}, digest)
    return failures


def cmd_sweep(cfg, save_states=False):
    if cfg.sweep is None:
        raise ConfigError("config has no 'sweep' block", field="sweep")
    t_deltas = cfg.sweep.t_deltas(cfg.system.params())
    if not t_deltas:
        raise ConfigError("sweep list is empty", field="sweep")
    points = run_kz_sweep(cfg.system, t_deltas, cfg.integrator, cfg.workers,
                          cfg.analysis.corr_window, keep_states=save_states)
    out = _outdir(cfg)
    failures = write_sweep_outputs(out, cfg, points)
    if save_states:
        for k, p in enumerate(points):
            if p.state is not None:
                io.save_state(out / f"state_{k:03d}.bin", p.state,
                              {"t_delta_us": p.t_delta}, cfg.digest())
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_hold(cfg):
    if cfg.hold is None:
        raise ConfigError("config has no 'hold' block", field="hold")
    res = run_hold(cfg.system, cfg.hold, cfg.integrator, cfg.analysis.corr_window)
    out = _outdir(cfg)
    digest = cfg.digest()
    rows = zip(res.hold_offsets, res.mean_D, res.var_D, res.xi, res.xi_err, res.energy,
               res.norm_drift)
    io.write_csv(out / "hold.csv",
                 ["t_hold_us", "mean_D", "var_D", "xi", "xi_err", "energy", "norm_drift"],
                 rows, digest)
    spectra = {}
    for key in ("mean_D", "var_D", "xi"):
        series = getattr(res, key)
        if np.all(np.isfinite(series)) and series.size >= 16:
            spectra[key] = hold_spectrum(res.hold_offsets, series,
                                         gap_frequency=res.gap.nu).to_dict()
    w = cfg.hold.running_window_us
    finite = [k for k in ("mean_D", "var_D", "xi") if np.all(np.isfinite(getattr(res, k)))]
    drifts = {k: res.drift(k, w) for k in finite}
    ripples = {k: res.ripple(k, w) for k in finite}
    io.write_json(out / "spectrum.json", {
        "t_delta_us": res.t_delta, "gap": res.gap.to_dict(), "spectra": spectra,
        "running_window_us": w, "drift": drifts, "ripple": ripples,
        "diagnostics": res.diagnostics}, digest)
    return EXIT_OK


def cmd_compare_space(cfg, full_limit=16):
    if cfg.sweep is None:
        raise ConfigError("config has no 'sweep' block", field="sweep")
    if cfg.system.L > full_limit:
        raise CapacityError(f"full space 2^{cfg.system.L} too large; compare-space allows "
                            f"L <= {full_limit}")
    t_deltas = cfg.sweep.t_deltas(cfg.system.params())
    if not t_deltas:
        raise ConfigError("sweep list is empty", field="sweep")
    constrained = run_kz_sweep(replace(cfg.system, constrained=True), t_deltas, cfg.integrator,
                               cfg.workers, cfg.analysis.corr_window)
    full = run_kz_sweep(replace(cfg.system, constrained=False), t_deltas, cfg.integrator,
                        cfg.workers, cfg.analysis.corr_window)
    out = _outdir(cfg)
    rows = [[c.gamma, c.t_delta, c.mean_D, c.var_D, f.mean_D, f.var_D]
            for c, f in zip(constrained, full)]
    io.write_csv(out / "compare_space.csv",
                 ["gamma_over_2pi_MHz_per_us", "t_delta_us", "mean_D_constrained",
                  "var_D_constrained", "mean_D_full", "var_D_full"], rows, cfg.digest())
    failed = [p for p in constrained + full if not p.ok]
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_mitigate(shot_path, calibration_path, out_path, grid=None, baseline=False,
                 corners=False):
    sample = io.read_shots(shot_path)
    model = io.read_calibration(calibration_path)
    grid = grid or ZNEGrid()
    digest = io.digest_inputs([shot_path, calibration_path],
                              {"grid": [grid.alphas, grid.betas, grid.repeats, grid.seed],
                               "baseline": baseline, "corners": corners})
    results = {
        "wall_mean": mitigate(sample, model, grid, "wall_mean", "linear", corners).to_dict(),
        "wall_var": mitigate(sample, model, grid, "wall_var", "quadratic", corners).to_dict(),
    }
    payload = {"calibration": model.to_dict(), "n_shots": sample.total_shots,
               "grid": {"alphas": grid.alphas, "betas": grid.betas, "repeats": grid.repeats,
                        "seed": grid.seed}, "results": results}
    if baseline:
        value, err = confusion_inverse_mean(sample, model)
        payload["confusion_inverse_mean"] = {"value": value, "stat_err": err}
    io.write_json(out_path, payload, digest)
    return EXIT_OK


def cmd_fit(out_dir, corr_window=(1, 6), power_window=None):
    """Recompute correlation lengths and the power law from existing CSVs."""
    out_dir = Path(out_dir)
    digest = io.digest_inputs([out_dir / "correlators.csv"],
                              {"corr_window": corr_window, "power_window": power_window})
    corr = io.read_csv(out_dir / "correlators.csv")
    if not corr:
        raise ConfigError(f"{out_dir / 'correlators.csv'}: no rows")
    by_ramp = {}
    for row in corr:
        by_ramp.setdefault((row["t_delta_us"], row["gamma_over_2pi_MHz_per_us"]), []).append(row)
    ramps = []
    for (t_delta, gamma), rows in sorted(by_ramp.items()):
        rows.sort(key=lambda r: r["l"])
        dens = np.concatenate([[1.0], [r["density"] for r in rows]])
        xi, xi_err = correlation_length(dens, corr_window)
        ramps.append({"t_delta_us": t_delta, "gamma_over_2pi_MHz_per_us": gamma, "xi": xi,
                      "xi_err": xi_err})
    good = [r for r in ramps if np.isfinite(r["xi"]) and r["xi"] > 0]
    gammas = np.array([r["gamma_over_2pi_MHz_per_us"] for r in good])
    fit = None
    if len(good) >= 3:
        window = tuple(power_window) if power_window else default_power_law_window(gammas)
        try:
            fit = fit_power_law(gammas, [r["xi"] for r in good], window=window)
        except DegenerateFitError as exc:
            log.warning("power-law fit skipped: %s", exc)
    io.write_json(out_dir / "refit.json", {"ramps": ramps,
                                           "power_law": fit.to_dict() if fit else None},
                  digest)
    return EXIT_OK


def cmd_sample(state_path, n_shots, seed, out_path):
    state = io.load_state(state_path)
    sample = sample_bitstrings(state, n_shots, seed)
    digest = io.digest_inputs([state_path], {"n_shots": n_shots, "seed": seed})
    io.write_shots(out_path, sample, {"state": Path(state_path).name, "seed": seed,
                                      "n_shots": n_shots}, config_hash=digest)
    return EXIT_OK

