"""Monte Carlo estimation, statistical tests, and named experiments.

Estimates come with Wilson 95% intervals and deterministic seeding; the
experiment registry binds analytic targets to parameterized simulation
runs and persists machine-readable results.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy import special as _sspec

from .errors import AssumptionViolated, UnknownExperiment

__all__ = [
    "MonteCarloEstimate", "ExperimentResult",
    "wilson_interval", "monte_carlo", "ks_test",
    "coupling_subsequence", "run_experiment", "experiment_names",
]

_Z95 = 1.959963984540054       # two-sided 95% normal quantile


def wilson_interval(successes: int, trials: int, z: float = _Z95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= successes <= trials:
        raise ValueError("successes must lie in [0, trials]")
    p = successes / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class MonteCarloEstimate:
    """Frequency estimate(s) with Wilson 95% intervals.

    estimate / ci_low / ci_high are scalars for a single event and arrays
    for categorical outcomes (one entry per category).  n_discarded counts
    replicas dropped by tie-breaking rules; replicas is the valid count.
    """

    estimate: Union[float, np.ndarray]
    ci_low: Union[float, np.ndarray]
    ci_high: Union[float, np.ndarray]
    replicas: int
    n_discarded: int = 0
    seed: Optional[int] = None

    def __post_init__(self):
        lo, hi, est = np.asarray(self.ci_low), np.asarray(self.ci_high), np.asarray(self.estimate)
        assert np.all(lo >= 0.0) and np.all(hi <= 1.0)
        assert np.all(lo <= est + 1e-15) and np.all(est <= hi + 1e-15)

    @classmethod
    def from_counts(cls, wins, n_valid: int, n_discarded: int = 0,
                    seed: Optional[int] = None) -> "MonteCarloEstimate":
        wins = np.atleast_1d(np.asarray(wins, dtype=np.int64))
        if n_valid <= 0:
            raise ValueError("no valid replicas")
        bounds = [wilson_interval(int(w), n_valid) for w in wins]
        lo = np.asarray([b[0] for b in bounds])
        hi = np.asarray([b[1] for b in bounds])
        est = wins / n_valid
        if len(wins) == 1:
            return cls(float(est[0]), float(lo[0]), float(hi[0]),
                       n_valid, n_discarded, seed)
        return cls(est, lo, hi, n_valid, n_discarded, seed)

    def contains(self, target: float, index: Optional[int] = None) -> bool:
        lo = self.ci_low if index is None else self.ci_low[index]
        hi = self.ci_high if index is None else self.ci_high[index]
        return bool(lo <= target <= hi)


def monte_carlo(event_fn: Callable, config, replicas: int,
                seed: Optional[int] = None,
                chunk_size: int = 10_000,
                jobs: int = 1) -> MonteCarloEstimate:
    """Estimate P(event) by simulation on independent generator streams.

    event_fn(rng, config) must return a bool for one replica drawn from
    rng.  Functions carrying `batch = True` are instead called as
    event_fn(rng, config, n) and must return n booleans; this keeps
    vectorized kernels fast while preserving stream independence across
    chunks.  jobs > 1 runs chunks on a thread pool; hit counts merge by
    summation, so the result is deterministic for a fixed
    (seed, replicas, chunk_size) regardless of scheduling.
    """
    if replicas < 100:
        raise ValueError("replicas must be >= 100")
    n_chunks = (replicas + chunk_size - 1) // chunk_size
    streams = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(chunk_size, replicas - c * chunk_size) for c in range(n_chunks)]
    batched = bool(getattr(event_fn, "batch", False))

    def run_chunk(c: int) -> int:
        n = sizes[c]
        rng = np.random.default_rng(streams[c])
        if batched:
            res = np.asarray(event_fn(rng, config, n), dtype=bool)
            if res.shape != (n,):
                raise ValueError("batch event_fn must return one bool per replica")
            return int(res.sum())
        return sum(bool(event_fn(rng, config)) for _ in range(n))

    if jobs > 1 and n_chunks > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=int(jobs)) as pool:
            hits = sum(pool.map(run_chunk, range(n_chunks)))
    else:
        hits = sum(run_chunk(c) for c in range(n_chunks))
    return MonteCarloEstimate.from_counts([hits], replicas, seed=seed)


def ks_test(samples, cdf: Callable[[float], float]):
    """One-sample Kolmogorov-Smirnov test against a monotone cdf.

    Returns (statistic, asymptotic p-value).  The p-value uses the
    Kolmogorov distribution of sqrt(n) * D_n.
    """
    x = np.sort(np.asarray(samples, dtype=float))
    n = len(x)
    if n < 50:
        raise ValueError("need at least 50 samples")
    F = np.asarray([cdf(v) for v in x], dtype=float)
    if np.any(F < -1e-12) or np.any(F > 1 + 1e-12) or np.any(np.diff(F) < -1e-12):
        raise ValueError("cdf values must be monotone in [0, 1]")
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - F)
    d_minus = np.max(F - (i - 1) / n)
    stat = float(max(d_plus, d_minus))
    p = float(_sspec.kolmogorov(math.sqrt(n) * stat))
    return stat, p


def coupling_subsequence(embedding, subset: Sequence[int]):
    """Restrict an EmbeddingTrajectory to the agents in `subset`.

    The jumps of those agents, taken in time order, form the jump chain
    of a fresh partial urn on the subset (the embedding streams are
    independent), provided no agent of the original urn explodes: raises
    AssumptionViolated when any agent has summable reciprocal weights or
    the path was truncated by an explosion.
    """
    from . import feedback as fb
    from .urn import Trajectory, _counts_from_winners

    subset = sorted(set(int(i) for i in subset))
    A = embedding.n_agents
    if not subset or any(i < 0 or i >= A for i in subset):
        raise ValueError("subset must be nonempty agent indices")
    if embedding.exploded is not None:
        raise AssumptionViolated("embedding was truncated by an explosion")
    for i, spec in enumerate(embedding.specs or ()):
        if fb.classify(spec).monopoly_condition == fb.HOLDS:
            raise AssumptionViolated(
                f"agent {i} has summable reciprocal weights; the coupling "
                "identity requires a conservative (non-explosive) urn")

    mask = np.isin(embedding.winners, subset)
    times = embedding.times[mask]
    relabel = {orig: new for new, orig in enumerate(subset)}
    winners = np.asarray([relabel[int(w)] for w in embedding.winners[mask]],
                         dtype=np.int64)
    initial = embedding.counts[0][subset]
    counts = _counts_from_winners(initial, winners, len(subset))
    return Trajectory(counts=counts, winners=winners, times=times)


@dataclass(frozen=True)
class ExperimentResult:
    """Outcome of one named experiment run.

    target is the analytic value or (low, high) interval being tested,
    with its provenance note; verdict is Pass exactly when the empirical
    interval intersects the target within the declared tolerance.
    """

    name: str
    parameters: dict
    target: Union[float, tuple]
    target_note: str
    tolerance: float
    estimate: float
    ci: tuple
    verdict: str
    runtime_s: float
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "parameters": self.parameters,
            "target": list(self.target) if isinstance(self.target, tuple) else self.target,
            "target_note": self.target_note,
            "tolerance": self.tolerance,
            "estimate": self.estimate,
            "ci": list(self.ci),
            "verdict": self.verdict,
            "runtime_s": self.runtime_s,
            "details": self.details,
        }


def _verdict(target, tolerance: float, ci_lo: float, ci_hi: float) -> str:
    if isinstance(target, tuple):
        t_lo, t_hi = target
    else:
        t_lo = t_hi = float(target)
    return "Pass" if (ci_lo - tolerance <= t_hi and ci_hi + tolerance >= t_lo) else "Fail"


def experiment_names():
    """Registered experiment names, in registry order."""
    from . import experiments
    return list(experiments.REGISTRY)


def run_experiment(name: str, overrides: Optional[dict] = None,
                   out_dir="out") -> ExperimentResult:
    """Execute a registered experiment and persist its artifacts.

    Results land under out_dir/<name>/{result.json, data.csv}.  overrides
    update the experiment's default parameters (seed, replicas, ...).
    Raises UnknownExperiment for unregistered names.
    """
    from . import experiments

    if name not in experiments.REGISTRY:
        raise UnknownExperiment(
            f"{name!r} is not registered; known: {', '.join(experiments.REGISTRY)}")
    spec = experiments.REGISTRY[name]
    params = dict(spec.defaults)
    params.update(overrides or {})

    start = time.perf_counter()
    outcome = spec.fn(params)
    runtime = time.perf_counter() - start

    verdict = outcome.get("verdict") or _verdict(
        outcome["target"], outcome.get("tolerance", 0.0),
        outcome["ci"][0], outcome["ci"][1])
    result = ExperimentResult(
        name=name,
        parameters=params,
        target=outcome["target"],
        target_note=outcome.get("target_note", ""),
        tolerance=outcome.get("tolerance", 0.0),
        estimate=outcome["estimate"],
        ci=tuple(outcome["ci"]),
        verdict=verdict,
        runtime_s=runtime,
        details=outcome.get("details", {}),
    )

    dest = Path(out_dir) / name
    dest.mkdir(parents=True, exist_ok=True)
    with open(dest / "result.json", "w") as fh:
        json.dump(result.to_dict(), fh, indent=2)
    rows = outcome.get("data")
    with open(dest / "data.csv", "w") as fh:
        if rows:
            fh.write(",".join(rows[0]) + "\n")
            for row in rows[1:]:
                fh.write(",".join(str(v) for v in row) + "\n")
        else:
            fh.write("key,value\n")
            fh.write(f"estimate,{result.estimate}\n")
    return result
