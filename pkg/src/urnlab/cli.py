"""Command-line front end.

Subcommands: simulate | embed | analyze | scaling {ode,fclt,qvar,beta} |
experiment {<name>|all}.  Every run is deterministic given --seed, writes
CSV/JSON under --out (default ./out), and renders a matplotlib figure
next to the delimited output.  A flat key-value config file can supply
any long flag; explicit flags win.

Exit codes: 0 success, 1 runtime failure, 2 configuration error,
3 experiment verdict Fail.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import __version__
from . import feedback as fb
from .errors import UrnlabError

__all__ = ["main", "build_parser"]


class ConfigError(Exception):
    """Invalid flags, config file, or expression; exits with code 2."""


# ---------------------------------------------------------------------------
# argument plumbing
# ---------------------------------------------------------------------------

_SCALAR_KEYS = {
    "steps": int, "seed": int, "N": int, "replicas": int, "jobs": int,
    "T": float, "h": float, "t_max": float, "beta": float, "tol": float,
    "out": str, "init": str, "shares": str, "name": str,
}


def _add_common(p: argparse.ArgumentParser, *names: str) -> None:
    if "feedback" in names:
        p.add_argument("--feedback", action="append", nargs="+",
                       metavar="EXPR [xN]",
                       help="feedback expression, e.g. \"k^2\"; an xN token "
                            "repeats it, e.g. --feedback \"sqrt(k)\" x3")
    if "init" in names:
        p.add_argument("--init", help="initial counts, e.g. 1,1")
        p.add_argument("--shares", help="initial shares, e.g. 0.8,0.1,0.1 "
                                        "or 6/14,4/14,4/14")
        p.add_argument("--N", type=int, help="initial market size")
    if "shares" in names and "init" not in names:
        p.add_argument("--shares", help="initial shares")
        p.add_argument("--N", type=int, help="initial market size")
    if "seed" in names:
        p.add_argument("--seed", type=int, help="master RNG seed")
    p.add_argument("--out", help="output directory (default ./out)")
    p.add_argument("--config", help="flat key=value config file")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="urnlab",
        description="simulate and analyze reinforcement urns with general "
                    "feedback")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="run the discrete chain")
    _add_common(ps, "feedback", "init", "seed")
    ps.add_argument("--steps", type=int, help="number of draws")

    pe = sub.add_parser("embed", help="run the continuous-time embedding")
    _add_common(pe, "feedback", "init", "seed")
    pe.add_argument("--t-max", dest="t_max", type=float,
                    help="time horizon of the embedding")

    pa = sub.add_parser("analyze", help="regimes, domains, bounds, limits")
    _add_common(pa, "feedback", "shares", "seed")

    psc = sub.add_parser("scaling", help="scaling-limit computations")
    scsub = psc.add_subparsers(dest="subcommand", required=True)
    for name, knobs in (("ode", ("T", "h")),
                        ("fclt", ("T", "h")),
                        ("qvar", ("T",)),
                        ("beta", ("T", "beta"))):
        q = scsub.add_parser(name, help=f"scaling {name} run")
        _add_common(q, "feedback", "shares", "seed")
        if "T" in knobs:
            q.add_argument("-T", "--T", dest="T", type=float,
                           help="time horizon")
        if "h" in knobs:
            q.add_argument("--h", dest="h", type=float, help="step size")
        if "beta" in knobs:
            q.add_argument("--beta", type=float,
                           help="time-scale exponent in (0,1)")

    px = sub.add_parser("experiment", help="run registered experiments")
    px.add_argument("name", nargs="?", help="experiment name, or 'all'")
    px.add_argument("--replicas", type=int, help="override replica count")
    px.add_argument("--jobs", type=int,
                    help="replica-level thread parallelism")
    px.add_argument("--seed", type=int, help="override the experiment seed")
    px.add_argument("--out", help="output directory (default ./out)")
    px.add_argument("--config", help="flat key=value config file")
    px.add_argument("--list", action="store_true",
                    help="list registered experiments and exit")
    return p


def _read_config(path: str) -> dict:
    """Flat `key = value` lines; '#' starts a comment; repeated `feedback`
    keys accumulate."""
    values: dict = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file: {e}")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        key, val = key.strip().replace("-", "_"), val.strip()
        if key == "feedback":
            values.setdefault("feedback", []).append(val.split())
        elif key in _SCALAR_KEYS:
            try:
                values[key] = _SCALAR_KEYS[key](val)
            except ValueError:
                raise ConfigError(
                    f"{path}:{lineno}: cannot parse {key} = {val!r}")
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return values


def _merge_config(args: argparse.Namespace) -> None:
    if not getattr(args, "config", None):
        return
    cfg = _read_config(args.config)
    for key, val in cfg.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)


# ---------------------------------------------------------------------------
# validated run configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    """Validated inputs for one command invocation."""

    command: str
    subcommand: Optional[str] = None
    specs: List[fb.Feedback] = field(default_factory=list)
    init: Optional[np.ndarray] = None
    chi0: Optional[np.ndarray] = None
    N: Optional[int] = None
    steps: Optional[int] = None
    t_max: Optional[float] = None
    T: Optional[float] = None
    h: Optional[float] = None
    beta: Optional[float] = None
    seed: Optional[int] = None
    replicas: Optional[int] = None
    jobs: int = 1
    out: Path = Path("out")
    name: Optional[str] = None


def _parse_feedbacks(groups) -> List[fb.Feedback]:
    if not groups:
        raise ConfigError("at least two --feedback expressions are required")
    specs: List[fb.Feedback] = []
    for group in groups:
        pending: Optional[fb.Feedback] = None
        for token in group:
            if token.lower().startswith("x") and token[1:].isdigit():
                if pending is None:
                    raise ConfigError(f"repeat token {token!r} needs a "
                                      "preceding expression")
                specs.extend([pending] * (int(token[1:]) - 1))
                continue
            try:
                pending = fb.parse_feedback(token)
            except SyntaxError as e:
                raise ConfigError(f"SyntaxError: {e}")
            specs.append(pending)
    if len(specs) < 2:
        raise ConfigError("need at least two agents (use xN to repeat)")
    return specs


def _parse_numbers(text: str, what: str) -> np.ndarray:
    out = []
    for token in text.split(","):
        token = token.strip()
        try:
            out.append(float(Fraction(token)) if "/" in token
                       else float(token))
        except (ValueError, ZeroDivisionError):
            raise ConfigError(f"cannot parse {what} entry {token!r}")
    return np.asarray(out)


def _resolve_state(args, specs, need_counts: bool):
    """(init counts or None, chi0 or None, N or None) from flags."""
    from .urn import shares_from_initial

    init = getattr(args, "init", None)
    shares = getattr(args, "shares", None)
    N = getattr(args, "N", None)
    if init is not None and shares is not None:
        raise ConfigError("give either --init or --shares, not both")
    if init is not None:
        counts = _parse_numbers(init, "--init")
        if np.any(counts != np.rint(counts)) or np.any(counts < 1):
            raise ConfigError("--init entries must be integers >= 1")
        counts = counts.astype(np.int64)
        if len(counts) != len(specs):
            raise ConfigError(f"--init has {len(counts)} entries for "
                              f"{len(specs)} agents")
        return counts, counts / counts.sum(), int(counts.sum())
    if shares is not None:
        chi0 = _parse_numbers(shares, "--shares")
        if len(chi0) != len(specs):
            raise ConfigError(f"--shares has {len(chi0)} entries for "
                              f"{len(specs)} agents")
        if np.any(chi0 <= 0) or abs(chi0.sum() - 1.0) > 1e-6:
            raise ConfigError("--shares must be positive and sum to 1")
        chi0 = chi0 / chi0.sum()
        counts = None
        if need_counts:
            if N is None:
                raise ConfigError("--shares needs --N to build counts")
            try:
                counts = shares_from_initial(chi0, int(N))
            except UrnlabError as e:
                raise ConfigError(str(e))
        return counts, chi0, N
    if need_counts:
        raise ConfigError("an initial state is required: --init or "
                          "--shares with --N")
    return None, None, N


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(command=args.command,
                    subcommand=getattr(args, "subcommand", None))
    cfg.out = Path(getattr(args, "out", None) or "out")
    cfg.seed = getattr(args, "seed", None)
    cfg.jobs = int(getattr(args, "jobs", None) or 1)
    cfg.replicas = getattr(args, "replicas", None)
    cfg.name = getattr(args, "name", None)

    if args.command == "experiment":
        if cfg.name is None:
            raise ConfigError("experiment requires a name or 'all' "
                              "(use --list to see the registry)")
        if cfg.name != "all":
            from .experiments import REGISTRY
            if cfg.name not in REGISTRY:
                known = ", ".join(REGISTRY)
                raise ConfigError(f"unknown experiment {cfg.name!r}; "
                                  f"known: {known}")
        return cfg

    cfg.specs = _parse_feedbacks(getattr(args, "feedback", None))
    need_counts = args.command in ("simulate", "embed")
    cfg.init, cfg.chi0, cfg.N = _resolve_state(args, cfg.specs, need_counts)

    if args.command == "simulate":
        if getattr(args, "steps", None) is None:
            raise ConfigError("simulate requires --steps")
        cfg.steps = int(args.steps)
        if cfg.steps < 0:
            raise ConfigError("--steps must be >= 0")
    elif args.command == "embed":
        if getattr(args, "t_max", None) is None:
            raise ConfigError("embed requires --t-max")
        cfg.t_max = float(args.t_max)
        if cfg.t_max <= 0:
            raise ConfigError("--t-max must be > 0")
    elif args.command == "scaling":
        if cfg.chi0 is None:
            raise ConfigError("scaling requires --shares (or --init)")
        defaults = {"ode": 10.0, "fclt": 10.0, "qvar": 1e4, "beta": 1.0}
        cfg.T = float(getattr(args, "T", None) or defaults[cfg.subcommand])
        if cfg.T <= 0:
            raise ConfigError("-T must be > 0")
        cfg.h = float(getattr(args, "h", None) or 0.01)
        if cfg.h <= 0:
            raise ConfigError("--h must be > 0")
        if cfg.subcommand == "beta":
            if getattr(args, "beta", None) is None:
                raise ConfigError("scaling beta requires --beta")
            cfg.beta = float(args.beta)
            if not 0.0 < cfg.beta < 1.0:
                raise ConfigError("--beta must lie in (0, 1)")
            if cfg.N is None:
                raise ConfigError("scaling beta requires --N")
    return cfg


# ---------------------------------------------------------------------------
# command implementations
# ---------------------------------------------------------------------------

def _dump_json(obj, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, default=float)


def _cmd_simulate(cfg: RunConfig) -> int:
    from . import plots, urn

    tr = urn.simulate(cfg.specs, cfg.init, cfg.steps, seed=cfg.seed)
    dest = cfg.out / "simulate"
    dest.mkdir(parents=True, exist_ok=True)
    tr.to_csv(dest / "trajectory.csv")
    final = tr.counts[-1]
    summary = {
        "command": "simulate",
        "feedbacks": [str(s) for s in cfg.specs],
        "initial": [int(v) for v in cfg.init],
        "steps": cfg.steps,
        "seed": cfg.seed,
        "final_counts": [int(v) for v in final],
        "final_shares": [float(v) for v in final / final.sum()],
    }
    _dump_json(summary, dest / "summary.json")
    plots.plot_shares(np.arange(len(tr.counts)), tr.shares(),
                      dest / "shares.png")
    print(f"simulate: {cfg.steps} steps, final shares "
          f"{np.round(final / final.sum(), 4).tolist()} -> {dest}")
    return 0


def _cmd_embed(cfg: RunConfig) -> int:
    from . import plots, urn

    emb = urn.simulate_embedding(cfg.specs, cfg.init, cfg.t_max,
                                 seed=cfg.seed)
    dest = cfg.out / "embed"
    dest.mkdir(parents=True, exist_ok=True)
    emb.to_csv(dest / "embedding.csv")
    summary = {
        "command": "embed",
        "feedbacks": [str(s) for s in cfg.specs],
        "initial": [int(v) for v in cfg.init],
        "t_max": cfg.t_max,
        "seed": cfg.seed,
        "n_jumps": int(emb.n_steps),
        "truncated_at": [float(v) for v in emb.truncated_at],
        "exploded": None if emb.exploded is None else
            {"agent": emb.exploded.agent, "time": emb.exploded.time},
    }
    _dump_json(summary, dest / "summary.json")
    tr = emb.jump_chain()
    x = np.concatenate([[0.0], emb.times]) if emb.n_steps else np.zeros(1)
    plots.plot_shares(x, tr.shares(), dest / "shares.png", xlabel="t")
    note = "" if emb.exploded is None else \
        f", exploded at t={emb.exploded.time:.4g} (agent {emb.exploded.agent + 1})"
    print(f"embed: {emb.n_steps} jumps by t={cfg.t_max:g}{note} -> {dest}")
    return 0


def _cmd_analyze(cfg: RunConfig) -> int:
    from . import asymptotics as asy
    from . import plots

    chi0 = None if cfg.chi0 is None else cfg.chi0.tolist()
    report = asy.regime_report(cfg.specs, chi0=chi0, N=cfg.N)
    dest = cfg.out / "analyze"
    _dump_json(report, dest / "report.json")
    ls = report.get("limit_shares")
    if ls and ls.get("shares"):
        rows = [(i + 1, s) for i, s in enumerate(ls["shares"])]
        plots.plot_rows(("agent", "limit share"), rows, dest / "report.png",
                        title=f"joint verdict: {report['joint_verdict']}")
    print(json.dumps(report, indent=2, default=float))
    return 0


def _cmd_scaling(cfg: RunConfig) -> int:
    from . import plots, scaling

    dest = cfg.out / f"scaling_{cfg.subcommand}"
    dest.mkdir(parents=True, exist_ok=True)
    if cfg.subcommand == "ode":
        sp = scaling.integrate_mean_ode(cfg.specs, cfg.chi0, cfg.T, cfg.h)
        sp.to_csv(dest / "path.csv")
        plots.plot_scaling_path(sp, dest / "path.png")
        print(f"scaling ode: Z({cfg.T:g}) = "
              f"{np.round(sp.Z[-1], 6).tolist()} -> {dest}")
    elif cfg.subcommand == "fclt":
        sp = scaling.simulate_fclt(cfg.specs, cfg.chi0, cfg.T, cfg.h,
                                   rng=cfg.seed)
        sp.to_csv(dest / "path.csv")
        plots.plot_scaling_path(sp, dest / "path.png")
        print(f"scaling fclt: Ztilde({cfg.T:g}) = "
              f"{np.round(sp.Ztilde[-1], 6).tolist()} -> {dest}")
    elif cfg.subcommand == "qvar":
        qv = scaling.quadratic_variation(cfg.specs, cfg.chi0, cfg.T)
        with open(dest / "qvar.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["agent", "qvar", "abs_error", "tail_bound"])
            for i, v in enumerate(qv.values):
                w.writerow([i + 1, repr(float(v)), qv.abs_error,
                            qv.tail_bound])
        plots.plot_qvar(qv, dest / "qvar.png")
        for i, v in enumerate(qv.values):
            print(f"qvar agent {i + 1}: {v:.6f} "
                  f"(+tail <= {qv.tail_bound:.2e})")
        print(f"-> {dest}")
    else:
        rep = scaling.beta_scaling(cfg.specs, cfg.chi0, cfg.beta, cfg.N,
                                   cfg.T, seed=cfg.seed)
        lln = rep.lln_line(rep.times)
        A = len(cfg.specs)
        with open(dest / "beta.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"empirical_{i+1}" for i in range(A)]
                       + [f"lln_{i+1}" for i in range(A)])
            for n in range(len(rep.times)):
                w.writerow([repr(float(rep.times[n]))]
                           + [repr(float(v)) for v in rep.empirical[n]]
                           + [repr(float(v)) for v in lln[n]])
        plots.plot_beta_report(rep, dest / "beta.png")
        print(f"scaling beta: regime {rep.regime}, slope "
              f"{np.round(rep.lln_slope, 6).tolist()} -> {dest}")
    return 0


def _render_experiment_figure(dest: Path) -> None:
    from . import plots

    data = dest / "data.csv"
    if not data.exists():
        return
    with open(data, newline="") as fh:
        rows = list(csv.reader(fh))
    if len(rows) > 2:
        plots.plot_rows(rows[0], rows[1:], dest / "data.png",
                        title=dest.name)


def _cmd_experiment(cfg: RunConfig) -> int:
    from . import harness

    overrides = {}
    if cfg.seed is not None:
        overrides["seed"] = cfg.seed
    if cfg.replicas is not None:
        overrides["replicas"] = cfg.replicas
    if cfg.jobs != 1:
        overrides["jobs"] = cfg.jobs
    names = harness.experiment_names() if cfg.name == "all" else [cfg.name]
    worst = 0
    for name in names:
        res = harness.run_experiment(name, overrides or None,
                                     out_dir=cfg.out)
        _render_experiment_figure(Path(cfg.out) / name)
        target = res.target if not isinstance(res.target, tuple) else \
            f"[{res.target[0]:.6g}, {res.target[1]:.6g}]"
        print(f"{name}: {res.verdict}  estimate={res.estimate:.6g}  "
              f"target={target}  ({res.runtime_s:.1f}s)")
        if res.verdict == "Fail":
            worst = 3
    return worst


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == "experiment" and getattr(args, "list", False):
        from . import harness
        for name in harness.experiment_names():
            from .experiments import REGISTRY
            print(f"{name}: {REGISTRY[name].description}")
        return 0

    try:
        _merge_config(args)
        cfg = build_config(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    dispatch = {"simulate": _cmd_simulate, "embed": _cmd_embed,
                "analyze": _cmd_analyze, "scaling": _cmd_scaling,
                "experiment": _cmd_experiment}
    try:
        return dispatch[cfg.command](cfg)
    except UrnlabError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
