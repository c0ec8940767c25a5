"""Reinforcement urn dynamics.

An urn holds A agents with integer counts X = (X_1, ..., X_A).  At every
step one agent is drawn with probability proportional to F_i(X_i) and its
count increases by one.  This module provides the transition kernel, a
vectorized discrete-time simulator, the continuous-time embedding in which
agent i jumps at the partial sums of independent Exponential(F_i(count))
gaps, explosion-time sampling for that embedding, and the Monte Carlo
monopoly estimator built on explosion-time comparison.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from . import feedback as fb
from .errors import InfeasibleN, NotExplosive

__all__ = [
    "Exploded", "Trajectory", "EmbeddingTrajectory", "ExplosionSample",
    "transition_probabilities", "simulate", "simulate_many",
    "simulate_embedding", "sample_explosion_time", "sample_explosion_times",
    "smon_estimate", "shares_from_initial",
]

_EVENT_BUDGET = 2 ** 20     # per-agent cap on sampled jumps in the embedding


@dataclass(frozen=True)
class Exploded:
    """Truncation marker: agent's jump times accumulate at `time`."""

    agent: int
    time: float


@dataclass(frozen=True)
class Trajectory:
    """A simulated discrete path.

    counts[n] is the state after n draws (counts[0] the initial state) and
    winners[n] the agent drawn at step n.  times, if present, carries the
    continuous jump times the path was extracted from.
    """

    counts: np.ndarray
    winners: np.ndarray
    times: Optional[np.ndarray] = None
    exploded: Optional[Exploded] = None

    @property
    def n_agents(self) -> int:
        return self.counts.shape[1]

    @property
    def n_steps(self) -> int:
        return len(self.winners)

    def counts_at(self, n: int) -> np.ndarray:
        return self.counts[n]

    def shares_at(self, n: int) -> np.ndarray:
        row = self.counts[n]
        return row / row.sum()

    def shares(self) -> np.ndarray:
        """chi[n] = counts[n] / (N + n), recomputed from integer counts."""
        totals = self.counts.sum(axis=1, keepdims=True)
        return self.counts / totals

    def to_csv(self, path) -> None:
        """Rows `n,winner,x_1..x_A,chi_1..chi_A`, with a t_n column when
        the path has jump times.  Row n = 0 has no winner."""
        A = self.n_agents
        chi = self.shares()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["n", "winner"]
            if self.times is not None:
                header.append("t_n")
            header += [f"x_{i+1}" for i in range(A)]
            header += [f"chi_{i+1}" for i in range(A)]
            w.writerow(header)
            for n in range(len(self.counts)):
                row = [n, "" if n == 0 else int(self.winners[n - 1])]
                if self.times is not None:
                    row.append("" if n == 0 else repr(float(self.times[n - 1])))
                row += [int(c) for c in self.counts[n]]
                row += [repr(float(c)) for c in chi[n]]
                w.writerow(row)

    # binary round-trip: little-endian framing
    #   magic b"URNT", version u8, A u16, n_steps u64, flags u8
    #   (bit0 = has times, bit1 = exploded), initial counts i64[A],
    #   winners u16[n_steps], [times f64[n_steps]],
    #   [exploded agent u16 + time f64]
    def to_bytes(self) -> bytes:
        A, n = self.n_agents, self.n_steps
        flags = (1 if self.times is not None else 0) | (2 if self.exploded else 0)
        out = [b"URNT", struct.pack("<BHQB", 1, A, n, flags)]
        out.append(self.counts[0].astype("<i8").tobytes())
        out.append(self.winners.astype("<u2").tobytes())
        if self.times is not None:
            out.append(self.times.astype("<f8").tobytes())
        if self.exploded:
            out.append(struct.pack("<Hd", self.exploded.agent, self.exploded.time))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, blob: bytes) -> "Trajectory":
        if blob[:4] != b"URNT":
            raise ValueError("not a trajectory blob")
        ver, A, n, flags = struct.unpack_from("<BHQB", blob, 4)
        if ver != 1:
            raise ValueError(f"unsupported version {ver}")
        off = 4 + struct.calcsize("<BHQB")
        initial = np.frombuffer(blob, "<i8", A, off).astype(np.int64)
        off += 8 * A
        winners = np.frombuffer(blob, "<u2", n, off).astype(np.int64)
        off += 2 * n
        times = None
        if flags & 1:
            times = np.frombuffer(blob, "<f8", n, off).copy()
            off += 8 * n
        exploded = None
        if flags & 2:
            agent, time = struct.unpack_from("<Hd", blob, off)
            exploded = Exploded(agent=agent, time=time)
        counts = _counts_from_winners(initial, winners, A)
        return cls(counts=counts, winners=winners, times=times, exploded=exploded)


def _counts_from_winners(initial: np.ndarray, winners: np.ndarray, A: int) -> np.ndarray:
    n = len(winners)
    counts = np.empty((n + 1, A), dtype=np.int64)
    counts[0] = initial
    if n:
        onehot = np.zeros((n, A), dtype=np.int64)
        onehot[np.arange(n), winners] = 1
        counts[1:] = initial[None, :] + np.cumsum(onehot, axis=0)
    return counts


@dataclass(frozen=True)
class EmbeddingTrajectory:
    """Continuous-time path: per-agent event times plus the merged chain.

    agent_times[i] holds agent i's sampled jump times (strictly increasing);
    times/winners/counts describe the merged jump chain, distributed as the
    discrete urn.  truncated_at[i] is the largest time up to which agent
    i's stream is exhaustive (t_max, or earlier on budget/explosion).
    """

    agent_times: List[np.ndarray]
    times: np.ndarray
    winners: np.ndarray
    counts: np.ndarray
    truncated_at: np.ndarray
    t_max: float
    exploded: Optional[Exploded] = None
    specs: Optional[tuple] = None

    @property
    def n_agents(self) -> int:
        return self.counts.shape[1]

    @property
    def n_steps(self) -> int:
        return len(self.winners)

    def jump_chain(self) -> Trajectory:
        """The discrete path carried by the merged jump times."""
        return Trajectory(counts=self.counts, winners=self.winners,
                          times=self.times, exploded=self.exploded)

    def to_csv(self, path) -> None:
        self.jump_chain().to_csv(path)


def _check_state(specs: Sequence[fb.Feedback], counts) -> np.ndarray:
    counts = np.asarray(counts)
    if counts.ndim != 1 or len(counts) != len(specs):
        raise ValueError("counts must have one entry per agent")
    if len(specs) < 2:
        raise ValueError("need at least two agents")
    if np.any(counts < 1):
        raise ValueError("all counts must be >= 1")
    return counts.astype(np.int64)


def _log_weights(specs: Sequence[fb.Feedback], counts: np.ndarray) -> np.ndarray:
    """log F_i(X_i) column-wise for a (R, A) state block."""
    out = np.empty(counts.shape, dtype=float)
    for i, spec in enumerate(specs):
        out[:, i] = fb.log_values(spec, counts[:, i].astype(float))
    return out


def transition_probabilities(specs: Sequence[fb.Feedback], counts) -> np.ndarray:
    """P(next draw = i | X) = F_i(X_i) / sum_j F_j(X_j).

    Evaluated in the log domain (log-sum-exp), so weights beyond the float
    range cannot overflow; the result sums to 1 within 1e-12.
    """
    counts = _check_state(specs, counts)
    lw = _log_weights(specs, counts[None, :])[0]
    p = np.exp(lw - np.max(lw))
    p /= p.sum()
    return p


def simulate(specs: Sequence[fb.Feedback], initial, steps: int,
             seed: Optional[int] = None) -> Trajectory:
    """Run the discrete chain for `steps` draws and return the full path.

    Sampling is inverse-CDF on the normalized weights, one uniform per
    step, so a fixed seed reproduces the path exactly.
    """
    initial = _check_state(specs, initial)
    if steps < 0:
        raise ValueError("steps must be >= 0")
    A = len(specs)
    rng = np.random.default_rng(seed)
    winners = np.empty(steps, dtype=np.int64)
    state = initial.astype(float)[None, :]
    for n in range(steps):
        lw = _log_weights(specs, state)
        lw -= lw.max(axis=1, keepdims=True)
        p = np.exp(lw)
        cum = np.cumsum(p, axis=1)
        u = rng.random(1)[0] * cum[0, -1]
        w = int(min(int(np.searchsorted(cum[0], u, side="right")), A - 1))
        winners[n] = w
        state[0, w] += 1.0
    return Trajectory(counts=_counts_from_winners(initial, winners, A),
                      winners=winners)


def simulate_many(specs: Sequence[fb.Feedback], initial, steps: int,
                  replicas: int, seed: Optional[int] = None,
                  record_every: Optional[int] = None):
    """Vectorized replica simulation; returns final counts (replicas, A).

    With record_every=m also returns share snapshots every m steps as a
    (n_snapshots, replicas, A) array (snapshot 0 is the initial state).
    All replicas advance in lock-step off one generator, so results are
    reproducible for a fixed (seed, replicas) pair.
    """
    initial = _check_state(specs, initial)
    if steps < 0 or replicas < 1:
        raise ValueError("steps must be >= 0 and replicas >= 1")
    A = len(specs)
    rng = np.random.default_rng(seed)
    counts = np.tile(initial.astype(float), (replicas, 1))
    snaps = []
    if record_every:
        snaps.append(counts / counts.sum(axis=1, keepdims=True))
    rows = np.arange(replicas)
    for n in range(steps):
        lw = _log_weights(specs, counts)
        lw -= lw.max(axis=1, keepdims=True)
        p = np.exp(lw)
        cum = np.cumsum(p, axis=1)
        u = rng.random(replicas) * cum[:, -1]
        w = np.minimum((cum < u[:, None]).sum(axis=1), A - 1)
        counts[rows, w] += 1.0
        if record_every and (n + 1) % record_every == 0:
            snaps.append(counts / counts.sum(axis=1, keepdims=True))
    final = counts.astype(np.int64)
    if record_every:
        return final, np.asarray(snaps)
    return final


def _sample_agent_times(spec: fb.Feedback, x0: int, t_max: float,
                        rng: np.random.Generator, budget: int):
    """Jump times of one birth process up to t_max (or budget).

    Returns (times, truncated_at, explosion_time_or_None).  Gaps are
    sampled as Exp(1) * exp(-log F), so type-E rates beyond the float
    range simply produce zero gaps, which the resolution check converts
    into an explosion flag.
    """
    chunks = []
    t_now = 0.0
    k_next = x0
    while True:
        m = min(4096, budget - (k_next - x0))
        if m <= 0:
            break
        ks = k_next + np.arange(m, dtype=float)
        with np.errstate(all="ignore"):
            inv_rate = np.exp(-fb.log_values(spec, ks))
        gaps = rng.standard_exponential(m) * inv_rate
        times = t_now + np.cumsum(gaps)
        chunks.append(times)
        t_now = float(times[-1])
        k_next += m
        if t_now > t_max:
            break
    times = np.concatenate(chunks) if chunks else np.empty(0)

    # resolution check: strictly increasing times; a stall means the
    # remaining gaps are below float resolution at this magnitude
    if len(times) > 1:
        stall = np.nonzero(np.diff(times) <= 0.0)[0]
        if len(stall):
            j = int(stall[0]) + 1
            return times[:j], float(times[j - 1]), float(times[j - 1])

    cut = np.searchsorted(times, t_max, side="right")
    if cut < len(times):
        return times[:cut], t_max, None

    # budget exhausted below t_max: explosive agents finish in finite time
    ts = _reciprocal_tail(spec, x0 + len(times))
    if ts.is_finite and t_now + ts.value < t_max:
        return times, t_now, t_now + ts.value
    return times, t_now, None


def _reciprocal_tail(spec: fb.Feedback, start: int) -> fb.TailSum:
    if isinstance(spec, (fb.Constant, fb.Log)):
        return fb._DIVERGENT
    try:
        return fb.tail_sum(spec, start, 1, tol=1e-6)
    except fb.ToleranceUnreachable:
        return fb._INDETERMINATE


def simulate_embedding(specs: Sequence[fb.Feedback], initial, t_max: float,
                       seed: Optional[int] = None,
                       max_events_per_agent: int = _EVENT_BUDGET) -> EmbeddingTrajectory:
    """Sample the continuous-time construction up to time t_max.

    Each agent's birth process runs on its own generator stream spawned
    from the master seed, so enlarging the population does not perturb
    existing streams.  The merged jump chain restricted to its first n
    jumps is distributed as n steps of the discrete urn.  When an agent's
    event times accumulate before t_max (summable reciprocal weights),
    the trajectory is truncated at the explosion time and flagged rather
    than raising.
    """
    initial = _check_state(specs, initial)
    if not t_max > 0:
        raise ValueError("t_max must be > 0")
    A = len(specs)
    ss = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    streams = [np.random.default_rng(s) for s in ss.spawn(A)]

    agent_times: List[np.ndarray] = []
    truncated_at = np.empty(A)
    explosion_time = math.inf
    explosion_agent = -1
    for i, spec in enumerate(specs):
        times_i, trunc_i, t_exp = _sample_agent_times(
            spec, int(initial[i]), t_max, streams[i], max_events_per_agent)
        agent_times.append(times_i)
        truncated_at[i] = trunc_i
        if t_exp is not None and t_exp < explosion_time:
            explosion_time = t_exp
            explosion_agent = i

    horizon = min(float(np.min(truncated_at)), t_max, explosion_time)
    kept = [t[t <= horizon] for t in agent_times]
    agent_of = np.concatenate([np.full(len(t), i) for i, t in enumerate(kept)]) \
        if any(len(t) for t in kept) else np.empty(0, dtype=np.int64)
    all_times = np.concatenate(kept) if kept else np.empty(0)
    order = np.argsort(all_times, kind="stable")
    times = all_times[order]
    winners = agent_of[order].astype(np.int64)

    exploded = None
    if explosion_agent >= 0 and explosion_time <= t_max:
        exploded = Exploded(agent=explosion_agent, time=explosion_time)

    counts = _counts_from_winners(initial, winners, A)
    return EmbeddingTrajectory(agent_times=agent_times, times=times,
                               winners=winners, counts=counts,
                               truncated_at=truncated_at, t_max=float(t_max),
                               exploded=exploded, specs=tuple(specs))


@dataclass(frozen=True)
class ExplosionSample:
    """One sampled explosion time with its deterministic truncation bound.

    value = sum of the first truncation_k exponential gaps plus the exact
    mean of the omitted tail; guaranteed_error is that omitted tail mean,
    bounding the bias; agent is set by callers that track indices.
    """

    value: float
    guaranteed_error: float
    truncation_k: int
    agent: Optional[int] = None


def sample_explosion_times(spec: fb.Feedback, x0: int, n: int,
                           seed_or_rng=None, tol: float = 1e-9):
    """Vectorized explosion-time sampling.

    Returns (values array of shape (n,), guaranteed_error, truncation_k).
    T = sum_{k>=x0} Exp(1)/F(k) is truncated after enough terms that the
    omitted tail mean is <= tol; that mean is added back deterministically.
    Raises NotExplosive when the mean series diverges or cannot be
    certified finite.
    """
    if x0 < 1:
        raise ValueError("x0 must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    total = _reciprocal_tail(spec, x0)
    if not total.is_finite:
        raise NotExplosive(
            f"{spec!r} has non-summable reciprocal weights from {x0}")
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) \
        else np.random.default_rng(seed_or_rng)

    K = 64
    while True:
        tail = fb.tail_sum(spec, x0 + K, 1, tol=min(tol, 1e-9) * 0.125)
        if tail.value <= tol:
            break
        K *= 2
        if K > 2 ** 26:
            raise NotExplosive(
                f"tail mean of {spec!r} does not reach tol={tol} within budget")
    ks = x0 + np.arange(K, dtype=float)
    with np.errstate(all="ignore"):
        inv_rate = np.exp(-fb.log_values(spec, ks))
    vals = np.full(n, tail.value)
    block = max(1, 2 ** 24 // n)           # bound the draw matrix to ~128 MB
    for j0 in range(0, K, block):
        m = min(block, K - j0)
        vals += rng.standard_exponential((n, m)) @ inv_rate[j0:j0 + m]
    return vals, float(tail.value), K


def sample_explosion_time(spec: fb.Feedback, x0: int, seed_or_rng=None,
                          tol: float = 1e-9, agent: Optional[int] = None) -> ExplosionSample:
    """One explosion-time draw; see sample_explosion_times."""
    vals, err, K = sample_explosion_times(spec, x0, 1, seed_or_rng, tol)
    return ExplosionSample(value=float(vals[0]), guaranteed_error=err,
                           truncation_k=K, agent=agent)


def smon_estimate(specs: Sequence[fb.Feedback], initial, replicas: int,
                  seed: Optional[int] = None, tol: float = 1e-9):
    """Monte Carlo strong-monopoly probabilities via explosion times.

    Agent i wins a replica when its sampled explosion time is strictly
    minimal; replicas where the two smallest times are closer than the
    summed truncation bounds are discarded and counted.  Agents without
    summable reciprocal weights never explode and get probability zero
    exactly.  Returns harness.MonteCarloEstimate over agent indices.
    """
    from .harness import MonteCarloEstimate

    initial = _check_state(specs, initial)
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    A = len(specs)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(A)]

    T = np.full((replicas, A), np.inf)
    err = np.zeros(A)
    explosive = np.zeros(A, dtype=bool)
    for i, spec in enumerate(specs):
        try:
            vals, e_i, _ = sample_explosion_times(spec, int(initial[i]),
                                                  replicas, streams[i], tol)
        except NotExplosive:
            continue
        T[:, i] = vals
        err[i] = e_i
        explosive[i] = True

    if not explosive.any():
        raise NotExplosive("no agent has summable reciprocal weights; "
                           "strong monopoly has probability zero for all")

    order = np.argsort(T, axis=1)
    best = order[:, 0]
    margin = err[best] + err[order[:, 1]]
    gap = T[np.arange(replicas), order[:, 1]] - T[np.arange(replicas), best]
    ties = gap <= margin
    wins = np.asarray([np.sum((best == i) & ~ties) for i in range(A)], dtype=np.int64)
    return MonteCarloEstimate.from_counts(wins, int(np.sum(~ties)),
                                          n_discarded=int(np.sum(ties)), seed=seed)


def shares_from_initial(shares, N: int) -> np.ndarray:
    """Integer initial counts approximating target shares with total N.

    Each agent gets max(1, round(chi_i * N)) with half-up rounding; the
    largest entry absorbs the rounding mismatch.  Raises InfeasibleN when
    N cannot give every agent at least one unit.
    """
    shares = np.asarray(shares, dtype=float)
    if shares.ndim != 1 or len(shares) < 2:
        raise ValueError("shares must be a vector with >= 2 entries")
    if np.any(shares < 0) or not math.isclose(shares.sum(), 1.0, abs_tol=1e-9):
        raise ValueError("shares must be nonnegative and sum to 1")
    A = len(shares)
    if N < A:
        raise InfeasibleN(f"N={N} cannot give {A} agents one unit each")
    counts = np.maximum(1, np.floor(shares * N + 0.5).astype(np.int64))
    gap = N - counts.sum()
    if gap != 0:
        big = int(np.argmax(counts))
        counts[big] += gap
    if np.any(counts < 1):
        raise InfeasibleN(f"N={N} is too small for shares {shares.tolist()}")
    assert counts.sum() == N
    return counts
