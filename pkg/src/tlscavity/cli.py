"""Command-line entry points.

Every command is deterministic given its config and seed: summation orders
are fixed, nothing depends on the wall clock, and reruns produce
byte-identical CSV output. The seed feeds synthetic-noise generation only.

Exit codes: 0 success, 2 config error, 3 data error, 4 fit non-convergence.
"""

import argparse
import hashlib
import json
import math
import os
import sys

import numpy as np
import scipy
import yaml

from . import __version__, datafiles, dynamics, mattis_bardeen, reflection
from .config import load_config
from .core import TlsClass, t2_star
from .distribution import (DistributionParams, density,
                           dipole_in_e_angstrom, loss_tangent, per_ghz_um3,
                           sample_classes, tls_volume_density,
                           write_distribution_csv)
from .errors import ConfigError, DataError, FitError
from .fitting import joint_tls_fit, temperature_fit
from .reflection import ReflectionParams, circle_fit, fit_ringup, s11_model


def _fmt(value):
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as handle:
        handle.write(header + "\n")
        for row in rows:
            handle.write(",".join(_fmt(v) for v in row) + "\n")


def _sha256(path):
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(out_dir, command, args, cfg, inputs, outputs):
    manifest = {
        "command": command,
        "seed": args.seed,
        "config_file": args.config,
        "config": cfg.as_dict(),
        "inputs": {p: _sha256(p) for p in inputs},
        "outputs": {name: _sha256(os.path.join(out_dir, name))
                    for name in sorted(outputs)},
        "versions": {"tlscavity": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "pyyaml": yaml.__version__},
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_gnuplot(out_dir, name, lines):
    path = os.path.join(out_dir, name)
    with open(path, "w") as handle:
        handle.write("set datafile separator \",\"\n")
        for line in lines:
            handle.write(line + "\n")
    return os.path.basename(path)


def _prepare_out(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def _trace_ntots(cfg, n_traces):
    if cfg.ringdown.n_tot_per_trace:
        if len(cfg.ringdown.n_tot_per_trace) != n_traces:
            raise ConfigError("ringdown.n_tot_per_trace: expected %d values"
                              % n_traces)
        return list(cfg.ringdown.n_tot_per_trace)
    return [cfg.ringdown.n_tot] * n_traces


def cmd_simulate_ringdown(args):
    cfg = load_config(args.config)
    out = _prepare_out(args)
    rng = np.random.default_rng(args.seed) if args.seed is not None else None
    powers = cfg.ringdown.initial_photons
    ntots = _trace_ntots(cfg, len(powers))
    outputs = []
    for idx, (n0, n_tot) in enumerate(zip(powers, ntots), start=1):
        classes = cfg.trace_classes(n_tot=n_tot)
        traj = dynamics.evolve_ringdown(
            n0, classes, cfg.cavity, cfg.ringdown.t_final,
            cfg.ringdown.m_steps, mode=cfg.ringdown.mode)
        name = "ringdown_%02d.csv" % idx
        dynamics.write_trajectory_csv(traj, os.path.join(out, name))
        outputs.append(name)
        n_vals = np.array(traj.n, dtype=float)
        if rng is not None and cfg.noise_level > 0:
            noise = 1.0 + cfg.noise_level * rng.standard_normal(
                len(n_vals) - 1)
            n_vals[1:] *= np.maximum(noise, 1e-6)
        name = "trace_%02d.csv" % idx
        _write_rows(os.path.join(out, name), "time_s,n",
                    zip(traj.times, n_vals))
        outputs.append(name)
    if args.gnuplot:
        lines = ["set logscale y", "plot \\"]
        for idx in range(1, len(powers) + 1):
            tail = ", \\" if idx < len(powers) else ""
            lines.append("  \"ringdown_%02d.csv\" using 1:3 with lines "
                         "title \"trace %d\"%s" % (idx, idx, tail))
        outputs.append(_write_gnuplot(out, "ringdown.gp", lines))
    inputs = [args.config] if args.config else []
    _write_manifest(out, "simulate ringdown", args, cfg, inputs, outputs)
    return 0


def cmd_simulate_ringup(args):
    cfg = load_config(args.config)
    out = _prepare_out(args)
    rng = np.random.default_rng(args.seed) if args.seed is not None else None
    params = ReflectionParams(
        q_int=cfg.ringup.q_int, q_c=cfg.ringup.q_c, f0=cfg.cavity.f0,
        delta=cfg.ringup.delta, p_f=cfg.ringup.p_f)
    times = np.linspace(0.0, cfg.ringup.t_final, cfg.ringup.n_points)
    power = reflection.ringup_power(times, params)
    if rng is not None and cfg.noise_level > 0:
        noise = 1.0 + cfg.noise_level * rng.standard_normal(len(power))
        power = power * np.maximum(noise, 1e-6)
    _write_rows(os.path.join(out, "ringup.csv"), "time_s,power_w",
                zip(times, power))
    outputs = ["ringup.csv"]
    if args.gnuplot:
        outputs.append(_write_gnuplot(out, "ringup.gp", [
            "set logscale y",
            "plot \"ringup.csv\" using 1:2 with lines title \"P_r(t)\""]))
    inputs = [args.config] if args.config else []
    _write_manifest(out, "simulate ringup", args, cfg, inputs, outputs)
    return 0


def cmd_simulate_temperature(args):
    cfg = load_config(args.config)
    out = _prepare_out(args)
    rng = np.random.default_rng(args.seed) if args.seed is not None else None
    temps = np.linspace(cfg.sweep.t_min, cfg.sweep.t_max,
                        cfg.sweep.n_points)
    classes = cfg.sweep_classes()
    table = mattis_bardeen.temperature_sweep(temps, cfg.superconductor,
                                             classes, cfg.cavity)
    mattis_bardeen.write_sweep_csv(table, os.path.join(out, "sweep.csv"))
    outputs = ["sweep.csv"]

    def noisy(values):
        values = np.array(values, dtype=float)
        if rng is None or cfg.noise_level == 0:
            return values
        floor = 1e-6 * float(np.max(np.abs(values[np.isfinite(values)])))
        noise = rng.standard_normal(len(values))
        return values + cfg.noise_level * np.abs(values) * noise \
            + floor * rng.standard_normal(len(values))

    _write_rows(os.path.join(out, "freq_trace.csv"),
                "temperature_K,freq_shift",
                zip(temps, noisy(table["freq_shift"])))
    outputs.append("freq_trace.csv")
    _write_rows(os.path.join(out, "q_trace.csv"), "temperature_K,q_int",
                zip(temps, noisy(table["q_int"])))
    outputs.append("q_trace.csv")
    if args.gnuplot:
        outputs.append(_write_gnuplot(out, "sweep.gp", [
            "set logscale y",
            "plot \"sweep.csv\" using 1:8 with lines title \"Q_int(T)\""]))
    inputs = [args.config] if args.config else []
    _write_manifest(out, "simulate temperature-sweep", args, cfg, inputs,
                    outputs)
    return 0


def cmd_distribution(args):
    cfg = load_config(args.config)
    out = _prepare_out(args)
    classes = cfg.trace_classes()
    write_distribution_csv(classes, os.path.join(out, "classes.csv"))
    outputs = ["classes.csv"]

    from scipy.integrate import quad
    integral, _ = quad(lambda g: density(g, cfg.distribution),
                       cfg.distribution.g_min, cfg.distribution.g_max,
                       limit=200)
    total = math.fsum(c.count for c in classes)
    populated = [c for c in classes if c.count > 1.0]
    g_top = max((c.g for c in populated), default=float("nan"))
    report = {
        "n_tot": cfg.distribution.n_tot,
        "sum_counts": total,
        "window_integral": integral,
        "conservation_rel_error": abs(total - integral) / integral,
        "classes_with_count_above_one": len(populated),
        "max_g_with_count_above_one_1_per_s": g_top,
        "max_g_with_count_above_one_hz": g_top / (2.0 * math.pi),
        "dipole_bound_e_angstrom": dipole_in_e_angstrom(g_top,
                                                        cfg.oxide.e_max)
        if populated else float("nan"),
        "loss_tangent": loss_tangent(classes, cfg.oxide.e_max,
                                     cfg.oxide.v_ox, cfg.cavity.kappa0,
                                     cfg.oxide.eps_r),
        "volume_density_per_ghz_um3": per_ghz_um3(tls_volume_density(
            classes, cfg.oxide.g_threshold, cfg.oxide.bandwidth,
            cfg.oxide.v_ox_field)),
    }
    with open(os.path.join(out, "report.json"), "w") as handle:
        json.dump(report, handle, indent=2, sort_keys=True)
        handle.write("\n")
    outputs.append("report.json")
    if args.gnuplot:
        outputs.append(_write_gnuplot(out, "distribution.gp", [
            "set logscale xy",
            "plot \"classes.csv\" using 1:2 with points title \"N_i(g)\""]))
    inputs = [args.config] if args.config else []
    _write_manifest(out, "distribution", args, cfg, inputs, outputs)
    return 0


def _trace_model_kappa(cfg, result, trace, n_tot_value):
    """Recompute the fitted model kappa at the data times of one trace."""
    values = result.values_dict
    times, n = trace
    dist = DistributionParams(
        n_tot=n_tot_value, beta=values["beta"],
        epsilon_s=values["epsilon_s"], g_min=cfg.distribution.g_min,
        g_max=cfg.distribution.g_max, n_classes=cfg.distribution.n_classes)
    classes = sample_classes(dist, omega_tls=cfg.cavity.omega0,
                             t2_star=values["t2_star"])
    traj = dynamics.evolve_ringdown(float(n[0]), classes, cfg.cavity,
                                    float(times[-1]), cfg.fit.m_steps,
                                    verify=False,
                                    window_margin=cfg.fit.window_margin)
    ln_n = np.log(traj.n)
    t_k = np.asarray(times, dtype=float)[1:]
    return t_k, -(np.interp(t_k, traj.times, ln_n) - ln_n[0]) / t_k


def cmd_fit_ringdown(args):
    cfg = load_config(args.config)
    out = _prepare_out(args)
    traces = [datafiles.read_ringdown_csv(p) for p in args.data]
    if cfg.tls_t2_star is not None:
        t2_init = cfg.tls_t2_star
    else:
        t2_init = t2_star(cfg.tls_t1, cfg.tls_t_phi, cfg.cavity.omega0,
                          cfg.cavity.temperature)
    shared = {"t2_star": t2_init, "beta": cfg.distribution.beta,
              "epsilon_s": cfg.distribution.epsilon_s}
    per_trace = _trace_ntots(cfg, len(traces))
    sigmas = None
    if cfg.noise_level > 0:
        sigmas = [cfg.noise_level / np.asarray(t, dtype=float)[1:]
                  for t, _ in traces]
    result = joint_tls_fit(
        traces, shared, per_trace, cfg.cavity, sigmas=sigmas,
        g_min=cfg.distribution.g_min, g_max=cfg.distribution.g_max,
        n_classes=cfg.distribution.n_classes, m_steps=cfg.fit.m_steps,
        window_margin=cfg.fit.window_margin)
    with open(os.path.join(out, "fit_ringdown.json"), "w") as handle:
        handle.write(result.to_json())
        handle.write("\n")
    outputs = ["fit_ringdown.json"]
    for idx, trace in enumerate(traces, start=1):
        n_tot_fit = result.values_dict["n_tot_%d" % (idx - 1)]
        t_k, model = _trace_model_kappa(cfg, result, trace, n_tot_fit)
        times, n = trace
        _, kappa_data = dynamics.kappa_of_time(times, n, 0)
        name = "residuals_%02d.csv" % idx
        _write_rows(os.path.join(out, name),
                    "time_s,kappa_data_1_per_s,kappa_model_1_per_s,residual",
                    zip(t_k, kappa_data, model, kappa_data - model))
        outputs.append(name)
    _write_manifest(out, "fit ringdown", args, cfg,
                    list(args.data) + ([args.config] if args.config else []),
                    outputs)
    if not result.converged:
        print("fit did not converge within the iteration cap; best point "
              "written", file=sys.stderr)
        return 4
    return 0


def cmd_fit_ringup(args):
    cfg = load_config(args.config)
    out = _prepare_out(args)
    times, power = datafiles.read_trace_csv(args.data[0], dbm=args.dbm)
    level = cfg.noise_level if cfg.noise_level > 0 else 0.01
    sigma = level * (np.abs(power) + 1e-3 * float(np.max(power)))
    result = fit_ringup(times, power, cfg.cavity.f0, sigma=sigma)
    with open(os.path.join(out, "fit_ringup.json"), "w") as handle:
        handle.write(result.to_json())
        handle.write("\n")
    values = result.values_dict
    model = reflection.ringup_power(times, ReflectionParams(
        q_int=values["q_int"], q_c=values["q_c"], f0=cfg.cavity.f0,
        delta=values["delta"], p_f=values["p_f"]))
    _write_rows(os.path.join(out, "residuals_ringup.csv"),
                "time_s,power_data_w,power_model_w,residual",
                zip(times, power, model, power - model))
    _write_manifest(out, "fit ringup", args, cfg,
                    list(args.data) + ([args.config] if args.config else []),
                    ["fit_ringup.json", "residuals_ringup.csv"])
    return 0 if result.converged else 4


def cmd_fit_temperature(args):
    cfg = load_config(args.config)
    out = _prepare_out(args)
    freq = datafiles.read_csv_columns(args.data[0],
                                      ("temperature_K", "freq_shift"))
    qdat = datafiles.read_csv_columns(args.data[1],
                                      ("temperature_K", "q_int"))
    level = cfg.noise_level if cfg.noise_level > 0 else 0.01

    def sigma_of(values):
        values = np.abs(np.asarray(values, dtype=float))
        return level * values + 1e-6 * level * float(np.max(values))

    classes = cfg.sweep_classes()
    fixed = {
        "cavity": cfg.cavity,
        "class_table": [(c.g, c.count) for c in classes],
        "g_factor": cfg.superconductor.g_factor,
        "alpha": cfg.superconductor.alpha,
        "delta0": cfg.superconductor.delta0,
        "sigma_n": cfg.superconductor.sigma_n,
        "t1": cfg.sweep.tls_t1,
        "t_phi": cfg.sweep.tls_t_phi,
    }
    result = temperature_fit(
        (freq["temperature_K"], freq["freq_shift"],
         sigma_of(freq["freq_shift"])),
        (qdat["temperature_K"], qdat["q_int"], sigma_of(qdat["q_int"])),
        fixed)
    with open(os.path.join(out, "fit_temperature.json"), "w") as handle:
        handle.write(result.to_json())
        handle.write("\n")
    values = result.values_dict
    sc = mattis_bardeen.SuperconductorParams(
        delta0=values["delta0"], sigma_n=values["sigma_n"],
        alpha=values["alpha"], g_factor=cfg.superconductor.g_factor)
    fit_classes = [TlsClass(g=g, count=n, omega_tls=cfg.cavity.omega0,
                            T1=values["t1"], T_phi=values["t_phi"])
                   for g, n in fixed["class_table"]]
    shift_model = np.array([mattis_bardeen.freq_shift(t, sc,
                                                      cfg.cavity.omega0)
                            for t in freq["temperature_K"]])
    q_model = np.array([mattis_bardeen.q_int_temperature(t, sc, fit_classes,
                                                         cfg.cavity)
                        for t in qdat["temperature_K"]])
    _write_rows(os.path.join(out, "residuals_freq.csv"),
                "temperature_K,freq_shift_data,freq_shift_model,residual",
                zip(freq["temperature_K"], freq["freq_shift"], shift_model,
                    freq["freq_shift"] - shift_model))
    _write_rows(os.path.join(out, "residuals_q.csv"),
                "temperature_K,q_int_data,q_int_model,residual",
                zip(qdat["temperature_K"], qdat["q_int"], q_model,
                    qdat["q_int"] - q_model))
    _write_manifest(out, "fit temperature", args, cfg,
                    list(args.data) + ([args.config] if args.config else []),
                    ["fit_temperature.json", "residuals_freq.csv",
                     "residuals_q.csv"])
    return 0 if result.converged else 4


def cmd_fit_circle(args):
    cfg = load_config(args.config)
    out = _prepare_out(args)
    freqs, s11 = datafiles.read_sweep_csv(args.data[0])
    res = circle_fit(freqs, s11)
    payload = {
        "f0": res.f0, "q_int": res.q_int, "q_c": res.q_c,
        "q_loaded": res.q_loaded,
        "impedance_mismatch_rad": res.impedance_mismatch,
        "sigma": {"f0": res.sigma_f0, "q_int": res.sigma_q_int,
                  "q_c": res.sigma_q_c,
                  "impedance_mismatch_rad": res.sigma_mismatch},
        "delay_s": res.delay,
        "circle": {"center_re": res.center.real, "center_im":
                   res.center.imag, "radius": res.radius,
                   "theta0": res.theta0, "rms_residual": res.rms_residual},
    }
    with open(os.path.join(out, "fit_circle.json"), "w") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
    z_inf = res.center - res.radius * complex(math.cos(res.theta0),
                                              math.sin(res.theta0))
    model = s11_model(freqs, res.f0, res.q_int, res.q_c,
                      mismatch=res.impedance_mismatch,
                      amplitude=abs(z_inf),
                      phase=math.atan2(z_inf.imag, z_inf.real),
                      delay=res.delay)
    _write_rows(os.path.join(out, "residuals_circle.csv"),
                "frequency_hz,re_data,im_data,re_model,im_model",
                zip(freqs, s11.real, s11.imag, model.real, model.imag))
    _write_manifest(out, "fit circle", args, cfg,
                    list(args.data) + ([args.config] if args.config else []),
                    ["fit_circle.json", "residuals_circle.csv"])
    return 0


_DATA_COUNTS = {"ringdown": (1, None), "ringup": (1, 1),
                "temperature": (2, 2), "circle": (1, 1)}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tlscavity",
        description="Simulate and fit resonator decay, reflection, and "
                    "temperature data.")
    parser.add_argument("--version", action="version",
                        version="tlscavity " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None,
                       help="YAML config path (defaults are used if "
                            "omitted)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="seed for synthetic-noise generation only")
        p.add_argument("--gnuplot", action="store_true",
                       help="also write a gnuplot script for the outputs")

    sim = sub.add_parser("simulate", help="generate model data")
    sim_sub = sim.add_subparsers(dest="subcommand", required=True)
    for name, fn in (("ringdown", cmd_simulate_ringdown),
                     ("ringup", cmd_simulate_ringup),
                     ("temperature-sweep", cmd_simulate_temperature)):
        p = sim_sub.add_parser(name)
        common(p)
        p.set_defaults(func=fn)

    fit = sub.add_parser("fit", help="fit measured or synthetic data")
    fit_sub = fit.add_subparsers(dest="subcommand", required=True)
    for name, fn in (("ringdown", cmd_fit_ringdown),
                     ("ringup", cmd_fit_ringup),
                     ("temperature", cmd_fit_temperature),
                     ("circle", cmd_fit_circle)):
        p = fit_sub.add_parser(name)
        common(p)
        p.add_argument("data", nargs="+", help="input CSV path(s)")
        if name == "ringup":
            p.add_argument("--dbm", action="store_true",
                           help="input powers are in dBm instead of W")
        p.set_defaults(func=fn, subcommand=name)

    dist = sub.add_parser("distribution",
                          help="sample the coupling distribution and "
                               "report derived quantities")
    common(dist)
    dist.set_defaults(func=cmd_distribution)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "data", None) is not None:
        lo, hi = _DATA_COUNTS[args.subcommand]
        if len(args.data) < lo or (hi is not None and len(args.data) > hi):
            print("tlscavity: fit %s expects %s data file(s)"
                  % (args.subcommand, lo if hi == lo else "%d+" % lo),
                  file=sys.stderr)
            return 2
    try:
        return args.func(args)
    except ConfigError as exc:
        print("tlscavity: config error: %s" % exc, file=sys.stderr)
        return 2
    except DataError as exc:
        print("tlscavity: data error: %s" % exc, file=sys.stderr)
        return 3
    except FitError as exc:
        print("tlscavity: fit error: %s" % exc, file=sys.stderr)
        if getattr(exc, "convergence_log", None):
            print("convergence log: %s" % json.dumps(exc.convergence_log),
                  file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
