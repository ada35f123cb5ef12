"""Command-line front end.

    subplanck wigner --config state.cfg --out DIR [--format both] [--png]
    subplanck sensitivity-sweep --config sweep.cfg --out DIR
    subplanck figure NAME --out DIR [--config overrides.cfg]
    subplanck pipeline --config herald.cfg --out DIR --seed 7
    subplanck validate [--out DIR]

Exit codes: 0 success, 1 usage or config error, 2 compute error,
3 validation failure.
"""

import argparse
import json
import math
import os
import sys
import time

import numpy as np

from subplanck import __version__, _accel, config as cfgmod, core, expmodel, gridio, metrics
from subplanck import fockoracle, hypercube

EXIT_OK, EXIT_USAGE, EXIT_COMPUTE, EXIT_VALIDATION = 0, 1, 2, 3

FIGURES = ("fig2", "fig3-top", "fig3-mid", "fig3-bottom", "fig5", "figS1", "figS2", "figS4", "figS5")

GRID_KEYS = ("grid_n", "half_width", "refine", "max_points", "method")
SWEEP_KEYS = ("n", "nbar", "mu", "phi", "directions", "baselines", "sigma_step", "refine",
              "max_points", "squeeze_db")
PIPELINE_KEYS = ("n", "mu", "nbar_drive", "sample_count", "seed", "delta_t_ns", "phi_drift_deg",
                 "total_counts", "f_m_hz", "delays_us", "grid_n")


class UsageError(Exception):
    pass


class ValidationFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _common(p):
    p.add_argument("--config", help="flat key = value config file (or a figure manifest.json)")
    p.add_argument("--out", default=".", help="existing output directory")
    p.add_argument("--seed", type=int, help="random seed (overrides config)")
    p.add_argument("--threads", type=int, help="worker threads (default: SUBPLANCK_THREADS)")
    p.add_argument("--format", choices=("csv", "bin", "both"), default="both", help="grid file format")
    p.add_argument("--png", action="store_true", help="also render heatmaps (needs matplotlib)")


def build_parser():
    p = _Parser(prog="subplanck", description="Hypercube-state Wigner functions, metrics and figure data.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _common(sub.add_parser("wigner", help="evaluate one state on a grid"))
    _common(sub.add_parser("sensitivity-sweep", help="l1-sensitivity over (n, nbar, mu, direction)"))
    f = sub.add_parser("figure", help="regenerate a figure's data set")
    f.add_argument("name", help="one of: " + ", ".join(FIGURES))
    _common(f)
    _common(sub.add_parser("pipeline", help="hot-regime heralding model"))
    _common(sub.add_parser("validate", help="oracle and invariant checks"))
    return p


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------

def _formats(args):
    return ("csv", "bin") if args.format == "both" else (args.format,)


def _load_config(path):
    if path is None:
        return {}
    if not os.path.isfile(path):
        raise UsageError(f"config file not found: {path}")
    if path.endswith(".json"):
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
        raw = data.get("config", data)
        return {k: cfgmod.format_value(v) for k, v in raw.items()}
    return cfgmod.read(path)


def _outdir(path):
    if not os.path.isdir(path):
        raise UsageError(f"output directory does not exist: {path}")
    return path


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def _grid_for(state, cfg):
    if "half_width" in cfg or "grid_n" in cfg:
        base = core.default_grid(state)
        hw = cfgmod.as_float(cfg.get("half_width", base.x_max))
        n = cfgmod.as_int(cfg.get("grid_n", min(base.nx, 512)))
        return core.GridSpec.square(hw, n)
    maxp = cfgmod.as_int(cfg["max_points"]) if "max_points" in cfg else None
    return core.default_grid(state, refine=cfgmod.as_float(cfg.get("refine", 1.0)), max_points=maxp)


def render_png(grid, path, title=None):
    """Heatmap with a diverging colormap centred at zero (negative = blue)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    v = grid.values
    lim = float(np.abs(v).max()) or 1.0
    s = grid.spec
    fig, ax = plt.subplots(figsize=(5, 4.4))
    im = ax.imshow(v.T, origin="lower", extent=(s.x_min, s.x_max, s.p_min, s.p_max),
                   cmap="RdBu_r", vmin=-lim, vmax=lim, interpolation="nearest")
    ax.set_xlabel("x")
    ax.set_ylabel("p")
    if title:
        ax.set_title(title)
    fig.colorbar(im, ax=ax)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def _emit_grid(grid, outdir, stem, args, title=None):
    files = gridio.write_grid(grid, os.path.join(outdir, stem), _formats(args))
    if args.png:
        files.append(render_png(grid, os.path.join(outdir, stem + ".png"), title))
    return [os.path.basename(f) for f in files]


# --------------------------------------------------------------------------
# wigner
# --------------------------------------------------------------------------

def cmd_wigner(args):
    cfg = _load_config(args.config)
    cfgmod.check_keys(cfg, hypercube.KRAUS_KEYS + GRID_KEYS)
    out = _outdir(args.out)
    spec = hypercube.KrausSpec.from_config({k: v for k, v in cfg.items() if k in hypercube.KRAUS_KEYS})
    state = hypercube.build_state(spec)
    grid = core.evaluate_grid(state, _grid_for(state, cfg), method=cfg.get("method", "auto"))
    files = _emit_grid(grid, out, "wigner", args, f"n={spec.n}, mu={spec.mu:g}, nbar={spec.nbar:g}")
    _write_json(os.path.join(out, "manifest.json"), {
        "command": "wigner", "version": __version__, "config": cfg, "files": files,
        "grid": grid.spec.__dict__, "quadrature": grid.quadrature_sum(),
    })
    return EXIT_OK


# --------------------------------------------------------------------------
# sensitivity sweep
# --------------------------------------------------------------------------

def _sensitivity_row(n, nbar, mu, direction, phi, step, refine, maxp):
    state = hypercube.build_state(hypercube.KrausSpec(n, mu, phi=phi, nbar=nbar))
    spec = metrics.metric_grid(state, refine=refine, max_points=maxp)
    res = metrics.l1_sensitivity(state, direction, step, spec=spec)
    summ = metrics.wigner_summary(state, spec)
    return state, res, summ


def run_sweep(cfg):
    """Rows ``SWEEP_COLUMNS + (status,)`` and baseline rows for a sweep config."""
    cfgmod.check_keys(cfg, SWEEP_KEYS)
    ns = cfgmod.as_int_list(cfg.get("n", "2"))
    nbars = cfgmod.as_float_list(cfg.get("nbar", "0"))
    mus = cfgmod.as_float_list(cfg.get("mu", ""))
    dirs = [d.strip() for d in str(cfg.get("directions", "position")).split(",") if d.strip()]
    if not (ns and nbars and mus and dirs):
        raise cfgmod.ConfigError("sweep ranges n, nbar, mu and directions must be non-empty")
    for d in dirs:
        metrics.direction_angle(d)
    phi = cfgmod.as_float(cfg.get("phi", math.pi))
    step = cfgmod.as_float(cfg["sigma_step"]) if "sigma_step" in cfg else None
    refine = cfgmod.as_float(cfg.get("refine", 4.0))
    maxp = cfgmod.as_int(cfg.get("max_points", metrics.MAX_METRIC_POINTS))
    want_base = cfgmod.as_bool(cfg.get("baselines", "false"))
    sq_db = cfgmod.as_float(cfg.get("squeeze_db", 3.0))
    rows, base = [], []
    for n in ns:
        for nbar in nbars:
            for mu in mus:
                for d in dirs:
                    try:
                        _, res, summ = _sensitivity_row(n, nbar, mu, d, phi, step, refine, maxp)
                    except (core.ZeroNormState, metrics.NumericalInstability, MemoryError) as exc:
                        rows.append((n, nbar, mu, d, math.nan, math.nan, math.nan, f"failed: {type(exc).__name__}"))
                        continue
                    rows.append((n, nbar, mu, d, res.value, summ["negativity_volume"], summ["min_wigner"], "ok"))
                    if want_base:
                        coh = metrics.l1_sensitivity(core.coherent_state(0j), d).value
                        th = metrics.l1_sensitivity(core.coherent_state(0j, nbar), d).value
                        sq = metrics.l1_sensitivity(
                            metrics.squeezed_reference(summ["mean_phonons"], sq_db, d), d).value
                        base.append((n, nbar, mu, d, summ["mean_phonons"], coh, th, sq))
    return rows, base


SWEEP_HEADER = metrics.SWEEP_COLUMNS + ("status",)
BASELINE_HEADER = ("n", "nbar", "mu", "direction", "mean_phonons", "coherent", "thermal", "squeezed_thermal")


def cmd_sweep(args):
    cfg = _load_config(args.config)
    out = _outdir(args.out)
    rows, base = run_sweep(cfg)
    files = [os.path.basename(gridio.write_table(os.path.join(out, "sweep.csv"), SWEEP_HEADER, rows))]
    if base:
        files.append(os.path.basename(gridio.write_table(os.path.join(out, "baselines.csv"), BASELINE_HEADER, base)))
    _write_json(os.path.join(out, "manifest.json"), {
        "command": "sensitivity-sweep", "version": __version__, "config": cfg, "files": files,
    })
    failed = sum(1 for r in rows if r[-1] != "ok")
    if failed:
        print(f"{failed} of {len(rows)} rows failed (flagged in sweep.csv)", file=sys.stderr)
    return EXIT_OK


# --------------------------------------------------------------------------
# pipeline
# --------------------------------------------------------------------------

def _herald_from_config(cfg, seed_override=None):
    cfgmod.check_keys(cfg, PIPELINE_KEYS)
    n = cfgmod.as_int(cfg.get("n", 2))
    f_m = cfgmod.as_float(cfg.get("f_m_hz", expmodel.F_M_HZ))
    delays = None
    if "delays_us" in cfg:
        delays = [d * 1e-6 * f_m for d in cfgmod.as_float_list(cfg["delays_us"])]
    elif n in expmodel.MEASURED_DELAYS_S:
        delays = expmodel.measured_delays(n, f_m)
    seed = seed_override if seed_override is not None else cfgmod.as_int(cfg.get("seed", 0))
    herald = expmodel.HeraldConfig(
        n=n,
        mu=cfgmod.as_float(cfg.get("mu", 8e-9)),
        nbar_drive=cfgmod.as_float(cfg.get("nbar_drive", 1e15)),
        sample_count=cfgmod.as_int(cfg.get("sample_count", 2000000)),
        rng_seed=seed,
        detection_times=delays,
        f_m_hz=f_m,
    )
    counts = cfg.get("total_counts", "20000")
    imp = expmodel.Imperfections(
        phi_drift_deg=cfgmod.as_float(cfg.get("phi_drift_deg", expmodel.PHI_CUT_DEG)),
        delta_t=cfgmod.as_float(cfg.get("delta_t_ns", expmodel.TIMING_JITTER_S * 1e9)) * 1e-9,
        total_counts=None if str(counts).lower() in ("none", "inf", "") else cfgmod.as_int(counts),
    )
    spec = expmodel.hot_grid(herald.nbar_drive, cfgmod.as_int(cfg.get("grid_n", 81)))
    return herald, imp, spec


def run_pipeline(herald, imp, spec):
    ideal = expmodel.ideal_density(herald, spec)
    model = expmodel.model_pipeline(herald, expmodel.Imperfections(imp.phi_drift_deg, imp.delta_t, None), spec)
    emp = expmodel.model_pipeline(herald, imp, spec)
    return ideal, model, emp


def _lobe_summary(grid):
    ang, h = expmodel.angular_marginal(grid)
    k, idx = expmodel.count_lobes(h)
    return k, ang, h, ang[idx]


def cmd_pipeline(args):
    cfg = _load_config(args.config)
    out = _outdir(args.out)
    herald, imp, spec = _herald_from_config(cfg, args.seed)
    ideal, model, emp = run_pipeline(herald, imp, spec)
    files = []
    for name, g in (("ideal", ideal), ("model", model.grid), ("empirical", emp.grid)):
        files += _emit_grid(g, out, f"density_{name}", args, name)
    k, ang, h, peaks = _lobe_summary(emp.grid)
    files.append(os.path.basename(gridio.write_table(os.path.join(out, "angular_marginal.csv"),
                                                    ("angle", "mass"), zip(ang, h))))
    summary = {
        "command": "pipeline", "version": __version__, "config": cfg, "seed": herald.rng_seed,
        "lobes": k, "lobe_angles": list(peaks), "events": emp.total,
        "bc_model_ideal": metrics.bhattacharyya(model.grid, ideal),
        "bc_empirical_ideal": metrics.bhattacharyya(emp.grid, ideal) if not emp.empty else math.nan,
        "files": files,
    }
    _write_json(os.path.join(out, "manifest.json"), summary)
    return EXIT_OK


# --------------------------------------------------------------------------
# figures
# --------------------------------------------------------------------------

FIGURE_DEFAULTS = {
    "fig2": {"orders": "1, 2, 3, 4", "mus": "6.0, 6.0, 8.0, 12.0", "nbar": "0.0", "grid_n": "512"},
    "fig3-top": {"n": "2", "nbar": "0.0", "mus": "8e-09, 0.01, 0.1, 0.2, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0",
                 "panel_mus": "6.0, 2.0, 8e-09", "grid_n": "401"},
    "fig3-mid": {"n": "2", "mu": "8e-09", "nbars": "0.0, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0, 1e15",
                 "panel_nbars": "0.0, 1.0, 1e15", "squeeze_db": "3.0", "grid_n": "401"},
    "fig3-bottom": {"orders": "2, 3, 4", "mu": "12.0", "nbars": "0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0",
                    "panel_n": "2", "panel_mu": "6.0", "panel_nbars": "0.0, 2.0, 6.0", "grid_n": "401"},
    "fig5": {"orders": "2, 3, 4", "mu": "8e-09", "nbar_drive": "1e15", "sample_count": "2000000",
             "phi_drift_deg": "10.0", "delta_t_ns": "15.0", "total_counts": "20000", "grid_n": "81", "seed": "0"},
    "figS1": {"orders": "5, 6", "mus": "16.0, 20.0", "nbar": "0.0", "grid_n": "512"},
    "figS2": {"orders": "2, 3, 4", "mu": "8e-09", "nbar": "0.0", "grid_n": "401"},
    "figS4": {"orders": "2, 3, 4", "mus": "8e-09, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0", "small_mu": "8e-09",
              "small_nbars": "0.0, 0.25, 0.5, 1.0, 1.5, 2.0", "large_mu": "6.0",
              "large_nbars": "0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0"},
    "figS5": {"orders": "2, 3, 4", "mus": "6.0, 8.0, 12.0", "direction": "momentum",
              "sigmas": "0.0, 0.025, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5"},
}


def _fig_grid(state, n_points, hw=None):
    base = core.default_grid(state)
    return core.evaluate_grid(state, core.GridSpec.square(hw or base.x_max, n_points))


def _state(n, mu, nbar=0.0):
    return hypercube.build_state(hypercube.KrausSpec(n, mu, nbar=nbar))


def _fig_wigner_set(c, out, args, pairs, nbar, tag="n{n}_mu{mu:g}"):
    files, rows = [], []
    for n, mu in pairs:
        st = _state(n, mu, nbar)
        g = _fig_grid(st, cfgmod.as_int(c["grid_n"]))
        stem = tag.format(n=n, mu=mu, nbar=nbar)
        files += _emit_grid(g, out, stem, args, f"n={n}, mu={mu:g}, nbar={nbar:g}")
        rows.append((n, mu, nbar, float(g.values.min()), metrics.negativity_volume(g)))
    return files, rows


def figure_fig2(c, out, args):
    pairs = list(zip(cfgmod.as_int_list(c["orders"]), cfgmod.as_float_list(c["mus"])))
    files, _ = _fig_wigner_set(c, out, args, pairs, cfgmod.as_float(c["nbar"]))
    return files


def figure_figS1(c, out, args):
    return figure_fig2(c, out, args)


def figure_figS2(c, out, args):
    mu = cfgmod.as_float(c["mu"])
    pairs = [(n, mu) for n in cfgmod.as_int_list(c["orders"])]
    files, rows = _fig_wigner_set(c, out, args, pairs, cfgmod.as_float(c["nbar"]), "n{n}")
    files.append(os.path.basename(gridio.write_table(
        os.path.join(out, "min_wigner.csv"), ("n", "mu", "nbar", "min_wigner", "negativity_volume"), rows)))
    return files


def figure_fig3_top(c, out, args):
    n = cfgmod.as_int(c["n"])
    nbar = cfgmod.as_float(c["nbar"])
    rows = []
    for mu in cfgmod.as_float_list(c["mus"]):
        st = _state(n, mu, nbar)
        for d in ("position", "momentum"):
            rows.append((n, nbar, mu, d, metrics.l1_sensitivity(st, d).value))
    coh = metrics.l1_sensitivity(core.coherent_state(0j)).value
    files = [os.path.basename(gridio.write_table(os.path.join(out, "sensitivity_vs_mu.csv"),
                                                ("n", "nbar", "mu", "direction", "dl1_dsigma"), rows))]
    files.append(os.path.basename(gridio.write_table(os.path.join(out, "baseline.csv"),
                                                    ("kind", "dl1_dsigma"), [("coherent", coh)])))
    f, _ = _fig_wigner_set(c, out, args, [(n, mu) for mu in cfgmod.as_float_list(c["panel_mus"])], nbar)
    return files + f


def figure_fig3_mid(c, out, args):
    n = cfgmod.as_int(c["n"])
    mu = cfgmod.as_float(c["mu"])
    db = cfgmod.as_float(c["squeeze_db"])
    rows = []
    for nbar in cfgmod.as_float_list(c["nbars"]):
        st = _state(n, mu, nbar)
        mean_n = metrics.wigner_summary(st)["mean_phonons"]
        for d in ("position", "momentum"):
            v = metrics.l1_sensitivity(st, d).value
            th = metrics.l1_sensitivity(core.coherent_state(0j, nbar), d).value
            sq = metrics.l1_sensitivity(metrics.squeezed_reference(mean_n, db, d), d).value
            rows.append((n, nbar, mu, d, v, mean_n, th, sq))
    files = [os.path.basename(gridio.write_table(
        os.path.join(out, "sensitivity_vs_nbar.csv"),
        ("n", "nbar", "mu", "direction", "dl1_dsigma", "mean_phonons", "thermal", "squeezed_thermal"), rows))]
    for nbar in cfgmod.as_float_list(c["panel_nbars"]):
        st = _state(n, mu, nbar)
        g = _fig_grid(st, cfgmod.as_int(c["grid_n"]))
        files += _emit_grid(g, out, f"n{n}_nbar{nbar:g}", args, f"nbar={nbar:g}")
    return files


def figure_fig3_bottom(c, out, args):
    mu = cfgmod.as_float(c["mu"])
    rows = []
    for n in cfgmod.as_int_list(c["orders"]):
        for nbar in cfgmod.as_float_list(c["nbars"]):
            st = _state(n, mu, nbar)
            for d in ("position", "momentum"):
                rows.append((n, nbar, mu, d, metrics.l1_sensitivity(st, d).value))
    files = [os.path.basename(gridio.write_table(os.path.join(out, "sensitivity_vs_nbar.csv"),
                                                ("n", "nbar", "mu", "direction", "dl1_dsigma"), rows))]
    pn, pmu = cfgmod.as_int(c["panel_n"]), cfgmod.as_float(c["panel_mu"])
    for nbar in cfgmod.as_float_list(c["panel_nbars"]):
        g = _fig_grid(_state(pn, pmu, nbar), cfgmod.as_int(c["grid_n"]))
        files += _emit_grid(g, out, f"n{pn}_mu{pmu:g}_nbar{nbar:g}", args, f"nbar={nbar:g}")
    return files


def figure_fig5(c, out, args):
    files, rows = [], []
    seed = args.seed if args.seed is not None else cfgmod.as_int(c["seed"])
    for n in cfgmod.as_int_list(c["orders"]):
        pcfg = {k: c[k] for k in ("mu", "nbar_drive", "sample_count", "phi_drift_deg", "delta_t_ns",
                                  "total_counts", "grid_n")}
        pcfg["n"] = str(n)
        herald, imp, spec = _herald_from_config(pcfg, seed)
        ideal, model, emp = run_pipeline(herald, imp, spec)
        for name, g in (("ideal", ideal), ("model", model.grid), ("empirical", emp.grid)):
            files += _emit_grid(g, out, f"n{n}_{name}", args, f"n={n} {name}")
        rows.append((n, _lobe_summary(emp.grid)[0], metrics.bhattacharyya(model.grid, ideal),
                     metrics.bhattacharyya(emp.grid, ideal), metrics.bhattacharyya(emp.grid, model.grid)))
    files.append(os.path.basename(gridio.write_table(
        os.path.join(out, "bhattacharyya.csv"),
        ("n", "lobes", "bc_model_ideal", "bc_empirical_ideal", "bc_empirical_model"), rows)))
    return files


def figure_figS4(c, out, args):
    orders = cfgmod.as_int_list(c["orders"])
    header = ("n", "mu", "nbar", "negativity_volume", "min_wigner")

    def rows_for(pairs):
        rows = []
        for n, mu, nbar in pairs:
            s = metrics.wigner_summary(_state(n, mu, nbar))
            rows.append((n, mu, nbar, s["negativity_volume"], s["min_wigner"]))
        return rows

    top = rows_for([(n, mu, 0.0) for n in orders for mu in cfgmod.as_float_list(c["mus"])])
    mid = rows_for([(n, cfgmod.as_float(c["small_mu"]), nb) for n in orders
                    for nb in cfgmod.as_float_list(c["small_nbars"])])
    bot = rows_for([(n, cfgmod.as_float(c["large_mu"]), nb) for n in orders
                    for nb in cfgmod.as_float_list(c["large_nbars"])])
    return [os.path.basename(gridio.write_table(os.path.join(out, f), header, r))
            for f, r in (("negativity_vs_mu.csv", top), ("negativity_vs_nbar_small_mu.csv", mid),
                         ("negativity_vs_nbar_large_mu.csv", bot))]


def figure_figS5(c, out, args):
    rows = []
    sig = cfgmod.as_float_list(c["sigmas"])
    for n, mu in zip(cfgmod.as_int_list(c["orders"]), cfgmod.as_float_list(c["mus"])):
        st = _state(n, mu)
        l1 = metrics.l1_curve(st, sig, c["direction"])
        rows += [(n, mu, s, v) for s, v in zip(sig, l1)]
    return [os.path.basename(gridio.write_table(os.path.join(out, "l1_vs_sigma.csv"),
                                               ("n", "mu", "sigma", "l1"), rows))]


FIGURE_FUNCS = {
    "fig2": figure_fig2, "fig3-top": figure_fig3_top, "fig3-mid": figure_fig3_mid,
    "fig3-bottom": figure_fig3_bottom, "fig5": figure_fig5, "figS1": figure_figS1,
    "figS2": figure_figS2, "figS4": figure_figS4, "figS5": figure_figS5,
}


def cmd_figure(args):
    if args.name not in FIGURES:
        raise UsageError(f"unknown figure {args.name!r}; valid names: {', '.join(FIGURES)}")
    over = _load_config(args.config)
    c = dict(FIGURE_DEFAULTS[args.name])
    cfgmod.check_keys(over, c)
    c.update(over)
    if args.seed is not None and "seed" in c:
        c["seed"] = str(args.seed)
    base = _outdir(args.out)
    out = os.path.join(base, args.name)
    os.makedirs(out, exist_ok=True)
    files = FIGURE_FUNCS[args.name](c, out, args)
    _write_json(os.path.join(out, "manifest.json"), {
        "command": "figure", "name": args.name, "version": __version__, "config": c,
        "format": args.format, "png": args.png, "files": sorted(files),
    })
    return EXIT_OK


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------

ORACLE_CASES = ((1, 1.0, 0.0), (2, 2.0, 0.0), (2, 1.0, 0.5), (3, 0.5, 0.0), (2, 6.0, 0.0))


def _check_oracle():
    worst = 0.0
    for n, mu, nbar in ORACLE_CASES:
        spec = hypercube.KrausSpec(n, mu, nbar=nbar)
        st = hypercube.build_state(spec)
        base = core.default_grid(st)
        gs = core.GridSpec(base.x_min, base.x_max, base.p_min, base.p_max, 64, 64)
        a = core.evaluate_grid(st, gs)
        b = fockoracle.fock_wigner(fockoracle.fock_build(spec), gs)
        worst = max(worst, float(np.abs(a.values - b.values).max()))
    return worst <= 1e-6, {"max_abs_diff": worst, "tolerance": 1e-6}


def _check_vacuum():
    gs = core.GridSpec.square(5.0, 41)
    a = core.evaluate_grid(core.coherent_state(0j), gs)
    b = fockoracle.fock_wigner(fockoracle.number_density(0, 10), gs)
    d = float(np.abs(a.values - b.values).max())
    return d <= 1e-10, {"max_abs_diff": d}


def _check_term_counts():
    counts = {n: len(_state(n, 1.0).terms) for n in (2, 3, 4)}
    return counts == {2: 16, 3: 64, 4: 256}, {"counts": counts}


def _check_pruning():
    st = _state(3, 2.0, 0.5)
    gs = core.default_grid(st, max_points=96)
    a = core.evaluate_grid(st, gs, method="terms", prune=True).values
    b = core.evaluate_grid(st, gs, method="terms", prune=False).values
    d = float(np.abs(a - b).max())
    return d <= 1e-12, {"max_abs_diff": d}


def _check_normalisation():
    worst = 0.0
    for n, mu, nbar in ((1, 6.0, 0.0), (2, 2.0, 1.0), (3, 1e-3, 0.0), (4, 1.0, 0.5)):
        st = _state(n, mu, nbar)
        worst = max(worst, abs(core.evaluate_grid(st).quadrature_sum() - 1.0))
    return worst <= 1e-6, {"max_deviation": worst}


def _check_coherent_sensitivity():
    v = metrics.l1_sensitivity(core.coherent_state(0j)).value
    ref = 2.0 / math.sqrt(math.pi)
    return abs(v / ref - 1) < 0.01, {"value": v, "expected": ref}


CHECKS = (
    ("oracle_equivalence", _check_oracle),
    ("vacuum_convention", _check_vacuum),
    ("term_counts", _check_term_counts),
    ("conjugate_pair_pruning", _check_pruning),
    ("normalisation", _check_normalisation),
    ("coherent_sensitivity", _check_coherent_sensitivity),
)


def run_validation():
    report = {"version": __version__, "backend": _accel.backend(), "checks": []}
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed report
            ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
        report["checks"].append({"name": name, "passed": bool(ok), "seconds": time.perf_counter() - t0,
                                 "detail": detail})
    report["passed"] = all(c["passed"] for c in report["checks"])
    return report


def cmd_validate(args):
    out = _outdir(args.out)
    report = run_validation()
    _write_json(os.path.join(out, "validate.json"), report)
    print(json.dumps(_jsonable(report), indent=2, sort_keys=True))
    if not report["passed"]:
        raise ValidationFailed("validation failed")
    return EXIT_OK


COMMANDS = {
    "wigner": cmd_wigner,
    "sensitivity-sweep": cmd_sweep,
    "figure": cmd_figure,
    "pipeline": cmd_pipeline,
    "validate": cmd_validate,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
        _accel.set_threads(args.threads)
        return COMMANDS[args.command](args)
    except (UsageError, cfgmod.ConfigError) as exc:
        print(f"subplanck: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationFailed as exc:
        print(f"subplanck: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ValueError, ArithmeticError, RuntimeError, MemoryError) as exc:
        print(f"subplanck: compute error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
