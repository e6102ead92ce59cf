"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 numerical or solver error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import coupling, holography, reproduce, trapfield
from .config import ConfigError, RunConfig, load_config
from .core import AU_C3, AtomSpec
from .fibermode import FiberSpec, ModeSolverError, MultimodeError, SINGLE_MODE_CUTOFF, solve_he11
from .inference import decay, g2, mixture
from .plot import svg_lines
from .simkit import od as odsim
from .simkit.scan import simulate_experiment
from .simkit.ttag import TagFormatError, TimeTagStream, read_csv, read_ttag, to_ttag_bytes, write_csv

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

log = logging.getLogger("nanofiber_tweezers")


class InputError(ValueError):
    pass


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    return obj


def write_json(path: Path, data: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_jsonable(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv_table(path: Path, header: list[str], rows, config_hash: str) -> None:
    with open(path, "w") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(f"{v:.10g}" for v in row) + "\n")


class Context:
    def __init__(self, cfg: RunConfig, out: Path, fmt: str | None, quiet: bool):
        self.cfg = cfg
        self.out = out
        self.fmt = fmt
        self.quiet = quiet
        self.hash = cfg.config_hash()
        out.mkdir(parents=True, exist_ok=True)

    def say(self, msg: str) -> None:
        if not self.quiet:
            print(msg)

    def meta(self, **extra) -> dict:
        return {"config_hash": self.hash, "seed": self.cfg.seed, **extra}

    def plot(self, name, *args, **kw) -> None:
        try:
            svg_lines(self.out / name, *args, **kw)
        except Exception as exc:  # plotting never fails a run
            log.warning("plot %s skipped: %s", name, exc)


def _mode(cfg: RunConfig):
    f = cfg.fiber
    spec = FiberSpec.from_diameter(f.diameter, f.wavelength, index_core=f.index_core)
    return solve_he11(spec, allow_multimode=f.allow_multimode, profile_max=f.profile_max,
                      profile_points=f.profile_points)


def cmd_mode(ctx: Context) -> int:
    mode = _mode(ctx.cfg)
    summary = ctx.meta(n_eff=mode.n_eff, V_number=mode.V_number, single_mode=mode.V_number < SINGLE_MODE_CUTOFF,
                       q_decay=mode.q_decay, decay_length=1 / mode.q_decay, residual=mode.residual,
                       diameter=ctx.cfg.fiber.diameter, wavelength=ctx.cfg.fiber.wavelength,
                       index_core=mode.spec.index_core)
    write_json(ctx.out / "mode.json", summary)
    write_csv_table(ctx.out / "mode_profile.csv", ["d_nm", "intensity"],
                    zip(mode.profile_d * 1e9, mode.profile), ctx.hash)
    ctx.plot("mode_profile.svg", mode.profile_d * 1e9, mode.profile, title="Evanescent intensity",
             xlabel="distance from surface (nm)", ylabel="I(d) / I(0)")
    ctx.say(f"n_eff = {mode.n_eff:.6f}  V = {mode.V_number:.4f}  1/q = {1e9 / mode.q_decay:.1f} nm")
    return EXIT_OK


def _trap_inputs(cfg: RunConfig):
    t = cfg.trap
    beam = trapfield.TweezerBeamSpec(wavelength=t.wavelength, waist=t.waist, power=t.power,
                                     **({} if t.focus_offset is None else {"focus_offset": t.focus_offset}))
    refl = trapfield.SurfaceReflection(
        trapfield.CALIBRATED_REFLECTION_AMPLITUDE if t.reflection_amplitude is None else t.reflection_amplitude,
        trapfield.CALIBRATED_REFLECTION_PHASE if t.reflection_phase is None else t.reflection_phase)
    c3 = t.c3_au * AU_C3
    if t.calibrate:
        refl, beam = trapfield.calibrate_reflection(beam, c3)
    grid = trapfield.default_grid(t.grid_min, t.grid_max, t.grid_step)
    return beam, refl, c3, grid


def cmd_potential(ctx: Context) -> int:
    beam, refl, c3, grid = _trap_inputs(ctx.cfg)
    prof = trapfield.potential_profile(beam, refl, c3, grid)
    sites = trapfield.find_trap_sites(prof)
    write_csv_table(ctx.out / "potential.csv", ["d_nm", "u_optical_uK", "u_vdw_uK", "u_total_uK"],
                    prof.rows_uK(), ctx.hash)
    write_json(ctx.out / "sites.json", ctx.meta(
        power=beam.power, reflection_amplitude=refl.amplitude, reflection_phase=refl.phase,
        focus_offset=beam.focus_offset, polarizability_au=beam.polarizability / trapfield.AU_POLARIZABILITY,
        sites=[{"label": s.label, "position_nm": s.position * 1e9, "depth_uK": s.depth_uK,
                "barrier_inner_uK": s.barrier_inner / trapfield.KB * 1e6,
                "barrier_outer_uK": s.barrier_outer / trapfield.KB * 1e6} for s in sites]))
    rows = prof.rows_uK()
    ctx.plot("potential.svg", rows[:, 0], [np.clip(rows[:, 3], rows[:, 1].min() * 1.5, None)],
             ["U_total"], title="Potential along the tweezer axis", xlabel="d (nm)", ylabel="U (uK)")
    for s in sites:
        ctx.say(f"site {s.label}: {s.position * 1e9:7.1f} nm  depth {s.depth_uK:7.1f} uK")
    if not sites:
        ctx.say("no stable trap site")
    return EXIT_OK


def cmd_coupling(ctx: Context) -> int:
    c = ctx.cfg.coupling
    mode = _mode(ctx.cfg)
    model = coupling.calibrate(coupling.CouplingModel(mode=mode, gamma0=AtomSpec.cesium_d2().Gamma_natural),
                               c.anchor_distance, c.anchor_beta)
    d, beta = coupling.beta_curve(model, c.d_max, c.points)
    write_csv_table(ctx.out / "beta_curve.csv", ["d_nm", "beta"], zip(d * 1e9, beta), ctx.hash)
    probes = {f"{int(round(x * 1e9))}nm": coupling.beta_at(model, x) for x in (190e-9, 671e-9, 1150e-9)}
    write_json(ctx.out / "coupling.json", ctx.meta(calibration=model.calibration, q_decay=mode.q_decay,
                                                   beta=probes, anchor=[c.anchor_distance, c.anchor_beta]))
    ctx.plot("beta_curve.svg", d * 1e9, beta, title="Coupling efficiency", xlabel="d (nm)", ylabel="beta")
    ctx.say("  ".join(f"beta({k}) = {v:.4g}" for k, v in probes.items()))
    return EXIT_OK


def cmd_hologram(ctx: Context) -> int:
    h = ctx.cfg.hologram
    problem = holography.linear_array_problem(
        h.n_spots, h.pitch, wavelength=h.wavelength, focal_length=h.focal_length, slm_pitch=h.slm_pitch,
        shape=tuple(h.shape), iterations=h.iterations, tolerance=h.tolerance, seed=ctx.cfg.seed % 2 ** 32,
        zero_nontarget=h.zero_nontarget, fix_phase_below=h.fix_phase_below)
    sol = holography.wgs_solve(problem)
    _, q = holography.quantize_phase(sol.phase)
    vq, _ = holography.spot_fields(q, problem.targets)
    holography.write_pgm(ctx.out / "phase.pgm", sol.phase)
    if ctx.fmt == "csv":
        holography.write_phase_csv(ctx.out / "phase.csv", sol.phase)
    meta = ctx.meta(**sol.metadata(), uniformity_error_8bit=holography.uniformity(vq), shape=list(h.shape),
                    files=["phase.pgm"] + (["phase.csv"] if ctx.fmt == "csv" else []))
    write_json(ctx.out / "hologram.json", meta)
    ctx.plot("hologram_convergence.svg", np.arange(len(sol.uniformity_history)), sol.uniformity_history,
             title="WGS uniformity error", xlabel="iteration", ylabel="(max-min)/(max+min)")
    ctx.say(f"uniformity {sol.uniformity_error:.3g} after {sol.iterations_run} iterations "
            f"(8-bit {meta['uniformity_error_8bit']:.3g}), efficiency {sol.efficiency:.3f}")
    return EXIT_OK


def _write_stream(ctx: Context, stream: TimeTagStream, stem: str) -> Path:
    fmt = ctx.fmt or "ttag"
    if fmt == "ttag":
        path = ctx.out / f"{stem}.ttag"
        path.write_bytes(to_ttag_bytes(stream))
    elif fmt == "csv":
        path = ctx.out / f"{stem}.csv"
        write_csv(path, stream)
    else:
        path = ctx.out / f"{stem}.json"
        write_json(path, {"resolution": stream.resolution, "channels": stream.channels,
                          "timestamps": stream.timestamps})
    return path


def _decay_params(cfg: RunConfig) -> odsim.DecayParams:
    o = cfg.od
    return odsim.DecayParams(n1=o.n1, tau1=o.tau1, n2=o.n2, tau2=o.tau2, beta1=o.beta1, beta2=o.beta2)


def cmd_simulate(ctx: Context) -> int:
    exp = ctx.cfg.experiment_config()
    run = simulate_experiment(exp)
    cfg = run.config
    path = _write_stream(ctx, run.stream, "tags")
    write_json(path.with_name(path.name + ".json"), ctx.meta(
        file=path.name, n_tags=len(run.stream), resolution=cfg.time_resolution, n_scans=cfg.n_scans,
        n_sites=cfg.n_sites, site_period=cfg.site_period, scan_period=cfg.scan_period,
        detection_efficiency=cfg.detection_efficiency, correlated_background=cfg.correlated_background,
        interaction_loss_constant=cfg.interaction_loss_constant, background_rate=cfg.background_rate,
        true_mean_occupancy=float(run.occupancy.sum(axis=1).mean())))
    write_csv_table(ctx.out / "occupancy.csv", [f"site{i}" for i in range(cfg.n_sites)],
                    run.occupancy.astype(int), ctx.hash)

    o = ctx.cfg.od
    times = np.arange(1, int(round(o.t_max / o.dt)) + 1) * o.dt
    noise = odsim.ProbeNoise(repetitions=o.repetitions) if o.noise else None
    rng = np.random.default_rng(np.random.SeedSequence(ctx.cfg.seed).spawn(cfg.n_scans + 1)[-1])
    trace = odsim.simulate_od_decay(_decay_params(ctx.cfg), times, noise, rng)
    write_csv_table(ctx.out / "od_trace.csv", ["t_s", "od"], zip(trace.times, trace.od_values), ctx.hash)
    ctx.plot("od_trace.svg", trace.times, trace.od_values, title="OD decay", xlabel="t (s)", ylabel="OD")
    ctx.say(f"{len(run.stream)} tags over {cfg.n_scans} scans -> {path}")
    return EXIT_OK


def _read_sidecar(path: Path) -> dict:
    side = path.with_name(path.name + ".json")
    if side.exists():
        with open(side) as fh:
            return json.load(fh)
    return {}


def _load_stream(path: Path, resolution: float) -> TimeTagStream:
    if not path.exists():
        raise InputError(f"input not found: {path}")
    if path.suffix == ".csv":
        return read_csv(path, resolution)
    if path.suffix == ".json":
        with open(path) as fh:
            d = json.load(fh)
        return TimeTagStream(d["channels"], d["timestamps"], d["resolution"])
    return read_ttag(path)


def _read_od_trace(path: Path) -> odsim.OdTrace:
    data = np.loadtxt(path, delimiter=",", comments="#", skiprows=2, ndmin=2)
    return odsim.OdTrace(data[:, 0], data[:, 1])


def cmd_analyze(ctx: Context, input_path: str | None) -> int:
    cfg = ctx.cfg
    exp = cfg.experiment_config().resolved()
    if input_path is None:
        candidates = [ctx.out / f"tags.{ext}" for ext in ("ttag", "csv", "json")]
        found = [p for p in candidates if p.exists()]
        if not found:
            raise InputError(f"no tags.ttag/.csv/.json in {ctx.out}; pass --input")
        path = found[0]
    else:
        path = Path(input_path)
    side = _read_sidecar(path)
    stream = _load_stream(path, side.get("resolution", exp.time_resolution))
    n_scans = int(side.get("n_scans", exp.n_scans))
    report = ctx.meta(input=path.name, input_config_hash=side.get("config_hash"), n_tags=len(stream))

    counts = mixture.site_counts(stream, exp.n_sites, exp.site_period, n_scans)
    mu_b = cfg.analysis.mu_b if cfg.analysis.mu_b is not None else 2 * exp.background_rate * exp.site_period
    hist = mixture.count_histogram(counts)
    if hist.size < 2:
        hist = np.append(hist, 0)
    fit = mixture.fit_poisson_mixture(hist, mu_b, exp.n_sites, starts=cfg.analysis.mixture_starts)
    report["mixture"] = {**fit.report(), "observed_zero_fraction": float(np.mean(counts == 0)),
                         "lower_bound": mixture.lower_bound_atoms(float(np.mean(counts == 0)),
                                                                  math.exp(-mu_b), exp.n_sites)}
    write_csv_table(ctx.out / "count_histogram.csv", ["k", "n"], enumerate(hist), ctx.hash)

    a = cfg.analysis
    try:
        if set(np.unique(stream.channels).tolist()) != {0, 1}:
            raise g2.InsufficientDataError("stream lacks tags on both channels")
        h = g2.coincidence_histogram(stream, a.bin_width, a.g2_window)
        res = g2.normalize_g2(h.tau, h.counts, tuple(a.ref_window))
        res_csv = ctx.out / "g2.csv"
        write_csv_table(res_csv, ["tau_s", "raw", "g2"], zip(res.tau_bins, res.raw_counts, res.g2_normalized),
                        ctx.hash)
        sel = (np.abs(res.tau_bins) > a.ref_window[0]) & (np.abs(res.tau_bins) < a.ref_window[1])
        report["g2"] = {"g2_zero": res.g2_zero(), "ref_mean": res.ref_mean,
                        "ref_window_mean": float(res.g2_normalized[sel].mean()),
                        "mean_abs_tau_gt_100ns": float(res.g2_normalized[np.abs(res.tau_bins) > 100e-9].mean())}
        ctx.plot("g2.svg", res.tau_bins * 1e9, res.g2_normalized, title="g2", xlabel="tau (ns)", ylabel="g2")
    except g2.InsufficientDataError as exc:
        report["g2"] = {"status": "insufficient data", "detail": str(exc)}

    od_path = ctx.out / "od_trace.csv"
    if od_path.exists():
        trace = _read_od_trace(od_path)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", decay.SingleExponentialWarning)
            if a.decay_model_order == "auto":
                dfit = decay.fit_od_decay_auto(trace.times, trace.od_values, cfg.od.beta1, cfg.od.beta2)
            else:
                dfit = decay.fit_od_decay(trace.times, trace.od_values, cfg.od.beta1, cfg.od.beta2,
                                          int(a.decay_model_order))
        report["od_decay"] = dfit.report()
        od0 = 2 * dfit.beta1 * dfit.n1 + 2 * dfit.beta2 * dfit.n2
        if fit.n_est > 0:
            report["beta"] = decay.beta_report(float(od0), fit.n_est).report()

    write_json(ctx.out / "report.json", report)
    ctx.say(f"n_est = {fit.n_est} (w = {fit.w:.4f}, mu_a = {fit.mu_a:.4f}, mu_b = {mu_b:.4g})")
    if "g2_zero" in report["g2"]:
        ctx.say(f"g2(0) = {report['g2']['g2_zero']:.3f}")
    if "od_decay" in report:
        ctx.say(f"OD decay tau2 = {report['od_decay']['tau2']:.4g} s")
    return EXIT_OK


def cmd_reproduce(ctx: Context, target: str) -> int:
    names = list(reproduce.TARGETS) if target == "all" else [target]
    results = []
    for name in names:
        r = reproduce.run_target(name, ctx.cfg.seed)
        results.append(r)
        ctx.say(f"{name:14s} reference={r['reference']!s:>12.12}  computed={r['computed']!s:>14.14}  "
                f"tol={r['tolerance']}  {'PASS' if r['pass'] else 'FAIL'}")
    write_json(ctx.out / ("reproduce.json" if target == "all" else f"reproduce_{target}.json"),
               ctx.meta(results=[{k: v for k, v in r.items() if k != "runtime_s"} for r in results]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--format", choices=["csv", "ttag", "json"], help="data file format where applicable")
    common.add_argument("--quiet", action="store_true", help="suppress the console summary")

    p = argparse.ArgumentParser(prog="nanofiber-tweezers",
                                description="Nanofiber tweezer-array simulation and analysis.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("mode", parents=[common], help="solve the HE11 fiber mode")
    sub.add_parser("potential", parents=[common], help="trap potential and sites along the tweezer axis")
    sub.add_parser("coupling", parents=[common], help="coupling efficiency beta(d)")
    sub.add_parser("hologram", parents=[common], help="WGS phase mask for the tweezer array")
    sub.add_parser("simulate", parents=[common], help="synthetic time tags and OD trace")
    an = sub.add_parser("analyze", parents=[common], help="fit time tags and OD trace")
    an.add_argument("--input", help="time-tag file (.ttag, .csv or .json)")
    rp = sub.add_parser("reproduce", parents=[common], help="recompute a headline number")
    rp.add_argument("target", help=f"one of: {', '.join(reproduce.TARGETS)}, all")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg = replace(cfg, seed=args.seed)
        if args.command == "reproduce" and args.target not in reproduce.TARGETS and args.target != "all":
            raise InputError(f"unknown target {args.target!r}; choose from {', '.join(reproduce.TARGETS)}, all")
        ctx = Context(cfg, Path(args.out or cfg.output_dir), args.format, args.quiet)
        if args.command == "analyze":
            return cmd_analyze(ctx, args.input)
        if args.command == "reproduce":
            return cmd_reproduce(ctx, args.target)
        return {"mode": cmd_mode, "potential": cmd_potential, "coupling": cmd_coupling,
                "hologram": cmd_hologram, "simulate": cmd_simulate}[args.command](ctx)
    except (MultimodeError, ModeSolverError, decay.FitError, g2.UnsupportedRegimeError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, InputError, TagFormatError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
