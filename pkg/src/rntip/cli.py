"""
Command-line experiment runner.

Each subcommand reads an optional JSON config (flat mapping of the keys in
``DEFAULTS[command]``), applies ``--seed`` on top, writes everything into
``--out`` together with ``config.json`` (the resolved config, usable as
``--config`` to rerun) and ``manifest.json`` (list of artifacts).

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .core import R_CRITICAL, Y_START, SystemParams, classify_deterministic, find_critical_rate, integrate_deterministic
from .errors import ConfigError, NotConvergedError, NoEscapesError, NumericalError, SupercriticalError
from .manifolds import heteroclinic
from .sde import TIPPED, TRACKED, SimConfig, run_ensemble, threshold_curve
from .stats import converge_tip_distribution, estimate_tip_time, mode_path, power_law_fit

DEFAULTS = {
    "deterministic": {
        "seed": 0,
        "r_grid": [0.5, 1.0, R_CRITICAL, 1.5, 2.0],
        "start": [-1.0, Y_START],
        "t_span": [0.0, 60.0],
        # r = 4/3 sits exactly on the connecting orbit; loose tolerances let
        # round-off decide the outcome there
        "rtol": 1e-12,
        "atol": 1e-14,
        "bisection": {"interval": [1.0, 2.0], "tol": 1e-3},
    },
    "heteroclinic": {
        "seed": 0,
        "pairs": [[1.0, 0.25], [0.5, 0.25]],
        "radius": 1e-3,
        "count": 64,
        "max_gap": 0.01,
        "stable_method": "symmetry",
    },
    "montecarlo": {
        "seed": 0,
        "r": 1.0,
        "sigma1": 0.15,
        "n_realizations": 3000,
        "t_span": [0.0, 30.0],
        "dt": 1e-3,
        "stride": 10,
        "mode_every": 2,
        "dump_paths": 0,
        "plot_paths": 150,
    },
    "tiptime": {
        "seed": 0,
        "grid": [[1.0, 0.25]],
        "n_start": 3000,
        "max_rounds": 6,
        "err_tol": 0.1,
        "significance": 0.05,
        "t_span": [0.0, 30.0],
        "dt": 1e-3,
    },
    "scaling": {
        "seed": 0,
        "fits": [
            {"r": 1.0, "sigma1": [0.25, 0.2, 0.15, 0.1, 0.08]},
            {"r": 0.75, "sigma1": [0.3, 0.25, 0.2, 0.15]},
        ],
        "min_escapes": 200,
        "chunk": 3000,
        "t_span": [0.0, 30.0],
        "dt": 1e-3,
    },
}


def _tag(r, s=None):
    return f"r{r:g}" if s is None else f"r{r:g}_s{s:g}"


class Run:
    """Output directory bookkeeping for one subcommand."""

    def __init__(self, command, cfg, out: Path, plots: bool, threads: int):
        self.command = command
        self.cfg = cfg
        self.out = out
        self.plots = plots
        self.threads = threads
        self.artifacts = []
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name) -> Path:
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.artifacts.append(str(p.relative_to(self.out)))
        return p

    def json(self, name, obj):
        self.path(name).write_text(json.dumps(obj, indent=2) + "\n")

    def figure(self, name, fig):
        if self.plots:
            fig.save(self.path(name))

    def finish(self, status="ok"):
        self.artifacts.append("manifest.json")
        manifest = {"command": self.command, "version": __version__, "seed": self.cfg["seed"],
                    "status": status, "artifacts": self.artifacts}
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")


def _figure(**kw):
    from .plots import Figure
    return Figure(**kw)


def cmd_deterministic(run: Run) -> int:
    cfg = run.cfg
    if not cfg["r_grid"]:
        raise ConfigError("r_grid is empty")
    fig = _figure(title="compactified system", xlabel="y", ylabel="x", ylim=(-4.5, 2.0))
    outcomes = {}
    for r in cfg["r_grid"]:
        traj = integrate_deterministic(cfg["start"], SystemParams(float(r)), t_span=tuple(cfg["t_span"]),
                                       rtol=cfg["rtol"], atol=cfg["atol"])
        traj.to_csv(run.path(f"trajectory_{_tag(r)}.csv"))
        outcomes[f"{r:g}"] = classify_deterministic(traj)
        fig.line(traj.y, traj.x, label=f"r={r:.4g} ({outcomes[f'{r:g}']})")
    run.json("outcomes.json", outcomes)
    b = cfg.get("bisection")
    if b:
        res = find_critical_rate(tuple(b["interval"]), b["tol"], tuple(cfg["start"]), tuple(cfg["t_span"]))
        run.path("critical_rate.json").write_text(res.to_json() + "\n")
        print(f"critical rate in [{res.r_lo:.6f}, {res.r_hi:.6f}]")
    for r, o in outcomes.items():
        print(f"r={r}: {o}")
    run.figure("deterministic.svg", fig)
    return 0


def cmd_heteroclinic(run: Run) -> int:
    cfg = run.cfg
    pairs = [(float(r), float(s)) for r, s in cfg["pairs"]]
    for r, _ in pairs:
        if r > R_CRITICAL * (1 + 1e-12):
            raise SupercriticalError(f"r = {r} exceeds the critical rate 4/3")
    rows = []
    for r, s in pairs:
        params = SystemParams(r, s)
        het = heteroclinic(params, cfg["radius"], cfg["count"], cfg["max_gap"], cfg["stable_method"])
        tag = _tag(r, s)
        cu, cs = het.curves
        cu.to_csv(run.path(f"{tag}/section_unstable.csv"))
        cs.to_csv(run.path(f"{tag}/section_stable.csv"))
        het.to_csv(run.path(f"{tag}/orbit.csv"))
        run.json(f"{tag}/summary.json", het.summary())
        run.path(f"{tag}/action.json").write_text(het.action.to_json() + "\n")
        rows.append(het.summary())
        print(f"r={r:g} sigma1={s:g}: y*={het.intersection_point[2]:.10f} "
              f"p*={het.intersection_point[1]:.6g} action={het.action.value:.6f}")
        if run.plots:
            iu, is_ = cu.primary_branch(), cs.primary_branch()
            fig = _figure(title=f"section y = -x, r={r:g}, sigma1={s:g}", xlabel="y", ylabel="p")
            fig.line(cu.y[iu], cu.p[iu], label="W^u(S1)")
            fig.line(cs.y[is_], cs.p[is_], label="W^s(S2)")
            fig.points([het.intersection_point[2]], [het.intersection_point[1]], color="#000000",
                       label="intersection")
            run.figure(f"{tag}/section.svg", fig)
            y, x = het.xy_projection()
            fig = _figure(title="connecting orbit", xlabel="y", ylabel="x")
            fig.line(y, x, label="heteroclinic")
            thr = threshold_curve(SystemParams(r))
            fig.line(thr.y, thr.x, label="threshold", dash="4 3")
            run.figure(f"{tag}/orbit.svg", fig)
    run.json("actions.json", rows)
    return 0


def _sim_config(cfg, r, s, n, first_stream=0, **kw):
    return SimConfig(SystemParams(float(r), float(s)), t_span=tuple(cfg["t_span"]), dt=cfg["dt"],
                     seed=int(cfg["seed"]), n_realizations=int(n), first_stream=first_stream, **kw)


def cmd_montecarlo(run: Run) -> int:
    cfg = run.cfg
    sc = _sim_config(cfg, cfg["r"], cfg["sigma1"], cfg["n_realizations"], stride=cfg["stride"],
                     store_paths=True)
    ens = run_ensemble(sc, workers=run.threads)
    run.json("summary.json", ens.summary())
    ens.first_passage_csv(run.path("first_passage.csv"))
    print(f"N={ens.N} M={ens.M} indeterminate={ens.n_indeterminate} p_tip={ens.p_tip:.4f}")
    for i in range(min(int(cfg["dump_paths"]), ens.N)):
        ens.realization(i).to_csv(run.path(f"paths/stream_{int(ens.stream_ids[i])}.csv"))
    modes = {}
    for outcome in (TIPPED, TRACKED):
        try:
            mp = mode_path(ens, outcome, every=int(cfg["mode_every"]))
        except NumericalError as exc:
            print(f"no {outcome} mode path: {exc}")
            continue
        mp.to_csv(run.path(f"mode_{outcome}.csv"))
        modes[outcome] = mp
    pull = integrate_deterministic((sc.x0, sc.y0), SystemParams(sc.params.r), t_span=sc.t_span,
                                   n_eval=sc.n_steps // sc.stride + 1)
    pull.to_csv(run.path("pullback.csv"))
    het = None
    if 0 < sc.params.sigma1 and sc.params.r <= R_CRITICAL:
        try:
            het = heteroclinic(sc.params)
            het.to_csv(run.path("heteroclinic.csv"))
        except NumericalError as exc:
            print(f"heteroclinic unavailable: {exc}")
    if run.plots:
        k = int(cfg["plot_paths"])
        for outcome, title in ((TIPPED, "tipped"), (TRACKED, "not tipped")):
            fig = _figure(title=f"{title} realizations", xlabel="t", ylabel="x", ylim=(-5.0, 3.0))
            sel = np.nonzero(ens.mask(outcome))[0][:k]
            for i in sel:
                fig.line(ens.path_t, ens.paths[i], color="#d62728" if outcome == TIPPED else "#1f77b4",
                         width=0.5, opacity=0.3)
            if outcome in modes:
                fig.line(modes[outcome].t, modes[outcome].x_mode, color="#000000", dash="6 4",
                         label="KDE mode")
            if outcome == TIPPED and het is not None:
                fig.line(np.interp(het.trajectory.y, ens.path_y, ens.path_t), het.trajectory.x,
                         color="#000000", label="heteroclinic")
            if outcome == TRACKED:
                fig.line(pull.t, pull.x, color="#000000", label="pullback attractor")
            run.figure(f"{outcome}.svg", fig)
    return 0


def cmd_tiptime(run: Run) -> int:
    cfg = run.cfg
    rows, status = [], 0
    for r, s in cfg["grid"]:
        sc = _sim_config(cfg, r, s, cfg["n_start"])
        row = {"r": float(r), "sigma1": float(s)}
        try:
            dist = converge_tip_distribution(sc, int(cfg["max_rounds"]), cfg["err_tol"],
                                             cfg["significance"], workers=run.threads)
            row.update(status="converged", **dist.summary())
        except NotConvergedError as exc:
            row.update(status="not-converged", message=str(exc), **exc.result.summary())
            status = 3
        except NoEscapesError as exc:
            row.update(status="no-escapes", message=str(exc))
            status = 3
        run.json(f"distribution_{_tag(r, s)}.json", row)
        rows.append(row)
        mean = row.get("mean_tau")
        print(f"r={r:g} sigma1={s:g}: {row['status']}"
              + (f" mean={mean:.4f} N={row['N_total']} err={row['err']:.4f} ks_p={row['ks_p']:.3f}"
                 if mean is not None else ""))
    with open(run.path("tip_times.csv"), "w") as fh:
        fh.write("r,sigma1,status,mean_tau,N_total,M_total,err,ks_p\n")
        for row in rows:
            fh.write(",".join(str(row.get(k, "")) for k in
                              ("r", "sigma1", "status", "mean_tau", "N_total", "M_total", "err", "ks_p")) + "\n")
    return status


def cmd_scaling(run: Run) -> int:
    cfg = run.cfg
    fig = _figure(title="time to tip", xlabel="log(1/sigma1^2)", ylabel="log tau")
    for spec in cfg["fits"]:
        r = float(spec["r"])
        if "points" in spec:
            pts = np.asarray(spec["points"], dtype=float)
            sig, tau = pts[:, 0], pts[:, 1]
        else:
            sig = np.asarray(spec["sigma1"], dtype=float)
            tau = np.array([
                estimate_tip_time(_sim_config(cfg, r, s, cfg["chunk"]), int(cfg["min_escapes"]),
                                  workers=run.threads).mean
                for s in sig
            ])
        fit = power_law_fit(sig, tau)
        run.json(f"scaling_{_tag(r)}.json", fit.summary(r))
        print(f"r={r:g}: tau = {fit.a:.4g} (1/sigma1^2)^{fit.b:.4g}  (r_value {fit.r_value:.3f})")
        lx = np.log(1.0 / sig ** 2)
        fig.points(lx, np.log(tau), label=f"r={r:g}")
        g = np.linspace(lx.min(), lx.max(), 50)
        fig.line(g, np.log(fit.a) + fit.b * g, dash="4 3")
    run.figure("scaling.svg", fig)
    return 0


COMMANDS = {
    "deterministic": cmd_deterministic,
    "heteroclinic": cmd_heteroclinic,
    "montecarlo": cmd_montecarlo,
    "tiptime": cmd_tiptime,
    "scaling": cmd_scaling,
}


def load_config(command: str, path: str | None, seed: int | None) -> dict:
    cfg = json.loads(json.dumps(DEFAULTS[command]))
    if path:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
        user.pop("command", None)
        unknown = set(user) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown keys for {command}: {sorted(unknown)}")
        cfg.update(user)
    if seed is not None:
        cfg["seed"] = seed
    if not isinstance(cfg["seed"], int) or not 0 <= cfg["seed"] < 2 ** 64:
        raise ConfigError("seed must be an integer in [0, 2^64)")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file (keys as in config.json echoes)")
    common.add_argument("--seed", type=int, help="master seed (overrides the config)")
    common.add_argument("--out", help="output directory (default: runs/<command>)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for Monte Carlo")
    common.add_argument("--no-plots", action="store_true", help="skip SVG output")
    parser = argparse.ArgumentParser(prog="rntip", description="ramped saddle tipping experiments")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "deterministic": "trajectories over an r-grid and the critical rate",
        "heteroclinic": "section curves, connecting orbit and action per (r, sigma1)",
        "montecarlo": "Euler-Maruyama ensemble, tipping fraction and mode paths",
        "tiptime": "converged time-to-tip distributions",
        "scaling": "power-law fits of the time to tip against 1/sigma1^2",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        cfg = load_config(args.command, args.config, args.seed)
        out = Path(args.out or f"runs/{args.command}")
        run = Run(args.command, cfg, out, not args.no_plots, args.threads)
        run.json("config.json", {"command": args.command, **cfg})
        code = COMMANDS[args.command](run)
        run.finish("ok" if code == 0 else "numerical-failure")
        return code
    except (ConfigError, SupercriticalError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: bad configuration value: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
