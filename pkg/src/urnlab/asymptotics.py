"""Analytic objects of the feedback urn: attraction domains, monopoly
probabilities and bounds, deterministic limit shares, fluctuation
cumulants, and aggregated regime reports.

Everything here is deterministic.  Closed forms for the built-in
families take precedence; Custom specs fall back to numeric limit
probes that say so explicitly (verdict "indeterminate" rather than a
guess).  Tail sums carry guaranteed error bounds throughout, so every
probability bound produced here is conservative in the safe direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import feedback as fb
from .errors import (AssumptionViolated, NotExplosive, OutOfRange,
                     RadiusExceeded, ToleranceUnreachable)

__all__ = [
    "DomainClassification", "TmonBounds", "CgfReport", "LimitShares",
    "tmon_bounds", "exact_tmon_probability", "classify_domain",
    "limit_shares", "smon_lower_bound", "cgf_U", "share_floor",
    "exp_decreasing_limit", "regime_report",
    "IN_DOMAIN", "BOUNDARY", "EMPTY_DOMAIN", "INDETERMINATE_DOMAIN",
]

IN_DOMAIN = "InDomain"
BOUNDARY = "Boundary"
EMPTY_DOMAIN = "EmptyDomain"
INDETERMINATE_DOMAIN = "Indeterminate"

_METHOD_E = "TypeE_ratio"
_METHOD_P = "TypeP_tailratio"
_METHOD_N = "NumericLimit"


# ---------------------------------------------------------------------------
# result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DomainClassification:
    """Pointwise attraction-domain verdicts at one initial share vector.

    verdicts[i] says whether chi0 lies in agent i's domain (InDomain),
    on its boundary (Boundary), outside it (EmptyDomain), or could not
    be decided numerically (Indeterminate).  ratios[i, j] is the limit
    of the deciding pairwise quantity: F_i/F_j for the type-E route,
    tail_i/tail_j for the type-P route (so i beats j when the value is
    infinite resp. below 1); nan marks pairs that were not computable.
    """

    verdicts: Tuple[str, ...]
    ratios: np.ndarray
    method: str

    def as_dict(self) -> dict:
        def enc(v: float):
            if math.isnan(v):
                return None
            if math.isinf(v):
                return "inf"
            return v
        return {
            "verdicts": list(self.verdicts),
            "ratios": [[enc(float(v)) for v in row] for row in self.ratios],
            "method": self.method,
        }


@dataclass(frozen=True)
class TmonBounds:
    """Sandwich for the probability that the leading agent wins every
    draw forever, plus the constant c_N that sharpens the upper bound.

    lower = exp(-S * tail), upper = lower^(c_N), with S the total
    competitor weight at the start and tail the reciprocal tail sum of
    the leader's feedback.  exact, when present, is a truncated-product
    evaluation with its error bound.
    """

    lower: float
    upper: float
    c_N: float
    exact: Optional[Tuple[float, float]] = None

    def as_dict(self) -> dict:
        return {
            "lower": self.lower, "upper": self.upper, "c_N": self.c_N,
            "exact": None if self.exact is None else list(self.exact),
        }


@dataclass(frozen=True)
class CgfReport:
    """Cumulant generating function of the centered explosion-time
    fluctuation for one agent.

    radius is the convergence radius min_{k >= x0} F(k); cumulants are
    (l, (l-1)! * sum_{k >= x0} F(k)^-l) for l = 2..L; evaluation holds
    (lambda, CGF(lambda)) on the requested grid.
    """

    spec: fb.Feedback
    x0: int
    radius: float
    cumulants: Tuple[Tuple[int, float], ...]
    evaluation: Tuple[Tuple[float, float], ...]


@dataclass(frozen=True)
class LimitShares:
    """Long-run share verdict for a feedback configuration.

    verdict is one of Deterministic (shares holds the limit vector),
    RandomDirichlet, WeakMonopolyRandomWinner, StrongMonopoly,
    Oscillating, Unknown.  rate_note carries qualitative context.
    """

    verdict: str
    shares: Optional[np.ndarray] = None
    rate_note: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "shares": None if self.shares is None else [float(v) for v in self.shares],
            "rate_note": self.rate_note,
        }


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------

def _classes(specs: Sequence[fb.Feedback]) -> List[fb.RegimeClass]:
    return [fb.classify(s) for s in specs]


def _check_chi0(specs, chi0) -> np.ndarray:
    chi0 = np.asarray(chi0, dtype=float)
    if len(chi0) != len(specs):
        raise ValueError("chi0 must have one share per agent")
    if np.any(chi0 <= 0.0) or abs(chi0.sum() - 1.0) > 1e-9:
        raise ValueError("chi0 must lie in the open simplex")
    return chi0


def _counts(specs, chi0, N) -> np.ndarray:
    from .urn import shares_from_initial
    return shares_from_initial(_check_chi0(specs, chi0), N)


def _log_weight_sum(specs, X0, skip: int) -> float:
    """log of S = sum_{j != skip} F_j(X_j(0))."""
    logs = [float(fb.log_values(s, np.asarray([float(x)]))[0])
            for j, (s, x) in enumerate(zip(specs, X0)) if j != skip]
    m = max(logs)
    if math.isinf(m):
        return m
    return m + math.log(sum(math.exp(v - m) for v in logs))


def _leader(X0, agent: Optional[int]) -> int:
    if agent is not None:
        if not 0 <= agent < len(X0):
            raise ValueError("agent index out of range")
        return agent
    return int(np.argmax(X0))


# ---------------------------------------------------------------------------
# total-monopoly probability: bounds and exact product
# ---------------------------------------------------------------------------

def _scan_c_N(spec: fb.Feedback, x_i: int, logS: float) -> float:
    """inf_k F(x_i + k)/(F(x_i + k) + S) scanned until the factor is 1
    within double precision; cap 10^7."""
    cap = 10_000_000
    chunk = 65_536
    best = 1.0
    k0 = 0
    log_cut = logS + 12.0 * math.log(10.0)
    while k0 <= cap:
        ks = np.arange(k0, min(k0 + chunk, cap + 1), dtype=float) + float(x_i)
        lf = fb.log_values(spec, ks)
        ratio = 1.0 / (1.0 + np.exp(np.minimum(logS - lf, 700.0)))
        best = min(best, float(np.min(ratio)))
        finite = lf[np.isfinite(lf)]
        if len(finite) and float(finite[-1]) >= log_cut:
            inc = np.diff(ratio)
            tail_mono = np.all(inc[-min(len(inc), 1024):] >= -1e-16)
            if tail_mono and 1.0 - ratio[-1] < 1e-12:
                return best
            if np.isposinf(lf[-1]):
                return best
        k0 += chunk
    raise ToleranceUnreachable(
        "the weight ratio did not settle within 10^7 draws; c_N not certified")


def tmon_bounds(specs: Sequence[fb.Feedback], chi0, N: int,
                agent: Optional[int] = None) -> TmonBounds:
    """Sandwich bounds on the probability that one agent takes every
    draw from the start.

    chi0 is mapped to integer counts for total mass N.  The target is
    the leading agent unless `agent` is given.  lower multiplies the
    competitors' escape bounds exp(-F_j(X_j(0)) * tail); upper raises
    the same product to the power c_N = inf_k F_i/(F_i + S).  Tail sums
    enter with their guaranteed error in the conservative direction.
    """
    X0 = _counts(specs, chi0, N)
    i = _leader(X0, agent)
    tail = fb.tail_sum(specs[i], int(X0[i]), 1)
    if tail.is_divergent:
        raise NotExplosive(
            "the target agent's reciprocal feedback sum diverges; no explosion")
    if not tail.is_finite:
        raise ToleranceUnreachable("explosivity of the target is indeterminate")
    logS = _log_weight_sum(specs, X0, skip=i)
    if math.isinf(logS):
        raise ToleranceUnreachable("competitor weight exceeds the double range")
    S = math.exp(logS)
    lower = math.exp(-S * (tail.value + tail.error))
    c_N = _scan_c_N(specs[i], int(X0[i]), logS)
    upper = math.exp(-c_N * S * max(tail.value - tail.error, 0.0))
    return TmonBounds(lower=lower, upper=upper, c_N=c_N)


def exact_tmon_probability(specs: Sequence[fb.Feedback], X0, tol: float = 1e-6,
                           agent: Optional[int] = None) -> Tuple[float, float]:
    """Truncated-product evaluation of the always-wins probability.

    The product of F_i(X_i + k)/(F_i(X_i + k) + S) over k >= 0 is cut at
    K with the remaining factors bounded through the reciprocal tail of
    F_i; K doubles until that multiplicative defect is below tol.
    Returns (value, error) with |value - truth| <= error <= tol.
    """
    X0 = np.asarray(X0)
    if np.any(X0 < 1):
        raise ValueError("initial counts must be >= 1")
    if not tol > 0:
        raise ValueError("tol must be positive")
    i = _leader(X0, agent)
    head = fb.tail_sum(specs[i], int(X0[i]), 1)
    if head.is_divergent:
        raise NotExplosive(
            "the target agent's reciprocal feedback sum diverges; no explosion")
    if not head.is_finite:
        raise ToleranceUnreachable("explosivity of the target is indeterminate")
    logS = _log_weight_sum(specs, X0, skip=i)
    if math.isinf(logS):
        raise ToleranceUnreachable("competitor weight exceeds the double range")
    S = math.exp(logS)

    # beyond K the log-factors are corrected by their first-order tail
    # -S*T1 exactly; the curvature remainder sits in [0, S^2 T2 / 2]
    K = 64
    while True:
        t1 = fb.tail_sum(specs[i], int(X0[i]) + K, 1)
        t2 = fb.tail_sum(specs[i], int(X0[i]) + K, 2)
        if not (t1.is_finite and t2.is_finite):
            raise ToleranceUnreachable("tail at the truncation point is indeterminate")
        half_width = (S * S * (t2.value + t2.error) / 4.0
                      + S * t1.error)
        if half_width <= tol / 2.0 or K >= 2 ** 24:
            break
        K *= 2
    if half_width > tol / 2.0:
        raise ToleranceUnreachable(
            f"truncation defect {half_width:.3g} still above tol/2 at K={K}")
    ks = float(X0[i]) + np.arange(K, dtype=float)
    lf = fb.log_values(specs[i], ks)
    log_pk = float(np.sum(-np.log1p(np.exp(np.minimum(logS - lf, 700.0)))))
    log_mid = log_pk - S * t1.value + S * S * t2.value / 4.0
    value = math.exp(log_mid)
    error = value * math.expm1(half_width) + 16 * K * np.finfo(float).eps * value
    return value, error


# ---------------------------------------------------------------------------
# attraction domains
# ---------------------------------------------------------------------------

def _e_rate(spec: fb.Feedback, chi: float):
    """Growth rank of F(chi N) for the type-E ratio condition as a flat
    lexicographic tuple (exp_gamma, exp_coef, poly_deg, log_deg,
    loglog_deg); the attractiveness prefactor is deliberately excluded
    (the verdict does not depend on it)."""
    if isinstance(spec, fb.Exponential):
        sign = 1.0 if spec.beta > 0 else -1.0
        return (sign, spec.beta * chi, 0.0, 0.0, 0.0)
    if isinstance(spec, fb.StretchedExp):
        return (spec.gamma, spec.beta * chi ** spec.gamma, 0.0, 0.0, 0.0)
    if isinstance(spec, fb.Polynomial):
        return (0.0, 0.0, spec.beta, 0.0, 0.0)
    if isinstance(spec, fb.LogLinear):
        return (0.0, 0.0, 1.0, spec.beta, 0.0)
    if isinstance(spec, fb.Log):
        return (0.0, 0.0, 0.0, 0.0, 1.0)
    if isinstance(spec, fb.Constant):
        return (0.0, 0.0, 0.0, 0.0, 0.0)
    return None


def _finite_f_ratio(spec_i, spec_j, chi_i, chi_j) -> float:
    """lim F_i(chi_i N)/F_j(chi_j N) for rank-tied built-in pairs."""
    def scale(spec, chi):
        if isinstance(spec, fb.Polynomial):
            return spec.alpha * chi ** spec.beta
        if isinstance(spec, fb.LogLinear):
            return spec.alpha * chi
        return spec.alpha
    return scale(spec_i, chi_i) / scale(spec_j, chi_j)


def _p_tail_profile(spec: fb.Feedback, chi: float):
    """Asymptotics of -log tail(chi N) as (exp_rank, logN_coeff,
    loglogN_coeff, scale): larger keys mean faster explosion; exact
    scale ties are domain boundaries.  None when no closed form."""
    if isinstance(spec, fb.Polynomial) and spec.beta > 1:
        b = spec.beta
        return ((0.0, 0.0), b - 1.0, 0.0, spec.alpha * (b - 1.0) * chi ** (b - 1.0))
    if isinstance(spec, fb.StretchedExp) and spec.gamma < 1:
        g, b = spec.gamma, spec.beta
        return ((g, b * chi ** g), g - 1.0, 0.0,
                spec.alpha * b * g * chi ** (g - 1.0))
    if isinstance(spec, fb.LogLinear) and spec.beta > 1:
        return ((0.0, 0.0), 0.0, spec.beta - 1.0, spec.alpha * (spec.beta - 1.0))
    return None


_WIN, _LOSE, _TIE, _UNKNOWN = "win", "lose", "tie", "unknown"


def _compare_keys(key_i, key_j, with_scale: bool):
    """Pairwise outcome for lexicographic growth keys; scale breaks ties
    only when with_scale (type-P tail profiles)."""
    head_i, head_j = key_i[:-1], key_j[:-1]
    if head_i > head_j:
        return _WIN, math.inf
    if head_i < head_j:
        return _LOSE, 0.0
    if not with_scale:
        return _TIE, 1.0
    s_i, s_j = key_i[-1], key_j[-1]
    if s_i is None or s_j is None:
        return _UNKNOWN, math.nan
    if s_i > s_j:
        return _WIN, s_j / s_i
    if s_i < s_j:
        return _LOSE, s_j / s_i
    return _TIE, 1.0


def _numeric_tail_ratio(spec_i, spec_j, chi_i, chi_j):
    """Probe lim tail_i(chi_i N)/tail_j(chi_j N) along N = 2^j."""
    logs = []
    for j in range(8, 40):
        N = 2.0 ** j
        x_i = max(1, int(round(chi_i * N)))
        x_j = max(1, int(round(chi_j * N)))
        try:
            t_i = fb.tail_sum(spec_i, x_i, 1)
            t_j = fb.tail_sum(spec_j, x_j, 1)
        except ToleranceUnreachable:
            break
        if t_i.is_divergent and t_j.is_divergent:
            return _UNKNOWN, math.nan
        if t_i.is_divergent or t_j.is_divergent:
            return (_LOSE, math.inf) if t_i.is_divergent else (_WIN, 0.0)
        if not (t_i.is_finite and t_j.is_finite):
            break
        if t_i.value == 0.0 or t_j.value == 0.0:
            if t_i.value == 0.0 and t_j.value > 0.0:
                return _WIN, 0.0
            if t_j.value == 0.0 and t_i.value > 0.0:
                return _LOSE, math.inf
            break
        logs.append(math.log(t_i.value) - math.log(t_j.value))
        if len(logs) >= 6:
            recent = logs[-4:]
            drift = max(recent) - min(recent)
            if drift < 1e-3:
                r = math.exp(recent[-1])
                if abs(r - 1.0) <= 1e-9:
                    return _TIE, 1.0
                return (_WIN, r) if r < 1.0 else (_LOSE, r)
            if recent[-1] < -40 and logs[-1] < logs[-5]:
                return _WIN, 0.0
            if recent[-1] > 40 and logs[-1] > logs[-5]:
                return _LOSE, math.inf
    return _UNKNOWN, math.nan


def classify_domain(specs: Sequence[fb.Feedback], chi0) -> DomainClassification:
    """Pointwise attraction-domain classification at chi0.

    With any type-E agent present the deciding quantity is the pairwise
    weight ratio F_i(chi_i N)/F_j(chi_j N) (symbolic growth ranks for
    built-ins; the verdict never depends on attractiveness prefactors).
    With all explosive agents of type P it is the explosion-tail ratio,
    with polynomial closed form alpha * chi^(beta-1) threshold values.
    Custom pairs are probed numerically along N = 2^j and report
    Indeterminate when the probes do not stabilize.  Exact threshold
    ties classify as Boundary; membership is never claimed on one.
    """
    chi0 = _check_chi0(specs, chi0)
    A = len(specs)
    classes = _classes(specs)
    explosive = [c.monopoly_condition == fb.HOLDS for c in classes]
    any_e = any(explosive[i] and classes[i].pe_type == fb.TYPE_E for i in range(A))
    custom = [isinstance(s, fb.Custom) or classes[i].monopoly_condition == fb.INDETERMINATE
              for i, s in enumerate(specs)]

    outcome = [[None] * A for _ in range(A)]
    ratios = np.full((A, A), np.nan)
    np.fill_diagonal(ratios, 1.0)
    used_numeric = False
    for i in range(A):
        for j in range(i + 1, A):
            if custom[i] or custom[j]:
                used_numeric = True
                out, r = _numeric_tail_ratio(specs[i], specs[j], chi0[i], chi0[j])
                # numeric route compares tails: encode like the P branch
                ratios[i, j] = r
                ratios[j, i] = (math.nan if math.isnan(r)
                                else (math.inf if r == 0.0 else
                                      (0.0 if math.isinf(r) else 1.0 / r)))
            elif any_e:
                k_i, k_j = _e_rate(specs[i], chi0[i]), _e_rate(specs[j], chi0[j])
                if k_i > k_j:
                    out = _WIN
                    ratios[i, j], ratios[j, i] = math.inf, 0.0
                elif k_i < k_j:
                    out = _LOSE
                    ratios[i, j], ratios[j, i] = 0.0, math.inf
                else:
                    # equal growth ranks: the weight ratio has a finite
                    # positive limit and the point is a domain boundary
                    out = _TIE
                    r = _finite_f_ratio(specs[i], specs[j], chi0[i], chi0[j])
                    ratios[i, j], ratios[j, i] = r, 1.0 / r
            else:
                p_i = _p_tail_profile(specs[i], chi0[i]) if explosive[i] else None
                p_j = _p_tail_profile(specs[j], chi0[j]) if explosive[j] else None
                if not explosive[i] or not explosive[j]:
                    # a non-explosive agent has an infinitely larger tail
                    if explosive[i] and not explosive[j]:
                        out = _WIN
                        ratios[i, j], ratios[j, i] = 0.0, math.inf
                    elif explosive[j] and not explosive[i]:
                        out = _LOSE
                        ratios[i, j], ratios[j, i] = math.inf, 0.0
                    else:
                        out = _TIE
                        ratios[i, j] = ratios[j, i] = math.nan
                elif p_i is None or p_j is None:
                    used_numeric = True
                    out, r = _numeric_tail_ratio(specs[i], specs[j], chi0[i], chi0[j])
                    ratios[i, j] = r
                    ratios[j, i] = (math.nan if math.isnan(r)
                                    else (math.inf if r == 0.0 else
                                          (0.0 if math.isinf(r) else 1.0 / r)))
                else:
                    out, r = _compare_keys(p_i, p_j, with_scale=True)
                    ratios[i, j] = r
                    ratios[j, i] = (math.inf if r == 0.0 else
                                    (0.0 if math.isinf(r) else 1.0 / r))
            outcome[i][j] = out
            flip = {_WIN: _LOSE, _LOSE: _WIN, _TIE: _TIE, _UNKNOWN: _UNKNOWN}
            outcome[j][i] = flip[out]

    verdicts = []
    for i in range(A):
        if classes[i].monopoly_condition == fb.FAILS:
            verdicts.append(EMPTY_DOMAIN)
            continue
        row = [outcome[i][j] for j in range(A) if j != i]
        if classes[i].monopoly_condition == fb.INDETERMINATE:
            verdicts.append(INDETERMINATE_DOMAIN)
        elif any(o == _LOSE for o in row):
            verdicts.append(EMPTY_DOMAIN)
        elif any(o == _UNKNOWN for o in row):
            verdicts.append(INDETERMINATE_DOMAIN)
        elif all(o == _WIN for o in row):
            verdicts.append(IN_DOMAIN)
        else:
            verdicts.append(BOUNDARY)

    method = _METHOD_N if used_numeric else (_METHOD_E if any_e else _METHOD_P)
    return DomainClassification(verdicts=tuple(verdicts), ratios=ratios,
                                method=method)


# ---------------------------------------------------------------------------
# limit shares
# ---------------------------------------------------------------------------

def _same_spec(a: fb.Feedback, b: fb.Feedback) -> bool:
    if isinstance(a, fb.Custom) and isinstance(b, fb.Custom):
        return a.source == b.source
    return a == b


def _sublinear_closed_form(specs) -> Optional[np.ndarray]:
    """Deterministic limit for sublinear families with closed forms."""
    A = len(specs)
    if all(isinstance(s, (fb.Polynomial, fb.Constant)) for s in specs):
        betas = [s.beta if isinstance(s, fb.Polynomial) else 0.0 for s in specs]
        alphas = [s.alpha for s in specs]
        if any(b >= 1 for b in betas):
            return None
        top = max(betas)
        w = np.zeros(A)
        for i in range(A):
            if betas[i] == top:
                w[i] = alphas[i] ** (1.0 / (1.0 - top))
        return w / w.sum()
    if all(isinstance(s, fb.Log) for s in specs):
        w = np.asarray([s.alpha for s in specs])
        return w / w.sum()
    return None


def _linear_constants(specs, classes) -> Optional[np.ndarray]:
    out = []
    for s, c in zip(specs, classes):
        if c.growth_class != fb.LINEAR:
            return None
        if c.growth_constant is None:
            return None
        out.append(c.growth_constant)
    return np.asarray(out)


def _grids_verdict(vals_a: np.ndarray, vals_b: np.ndarray) -> Tuple[str, Optional[np.ndarray]]:
    """Decide Deterministic/Oscillating/Unknown from share samples on two
    interleaved geometric time grids (rows = doublings).

    Deterministic needs both grids internally settled and mutually
    consistent; Oscillating needs persistent inter-grid disagreement
    across the last 8 doublings.
    """
    n = min(len(vals_a), len(vals_b))
    if n < 9:
        return "Unknown", None
    a, b = vals_a[:n], vals_b[:n]
    diff_grids = np.max(np.abs(a - b), axis=1)
    step_a = np.max(np.abs(np.diff(a[-4:], axis=0)), axis=(0, 1))
    step_b = np.max(np.abs(np.diff(b[-4:], axis=0)), axis=(0, 1))
    if step_a < 1e-4 and step_b < 1e-4 and diff_grids[-3:].max() < 1e-3:
        shares = np.maximum(a[-1], 0.0)
        return "Deterministic", shares / shares.sum()
    if np.all(diff_grids[-8:] > 1e-3):
        return "Oscillating", None
    return "Unknown", None


def _numeric_share_samples(specs, factor: float, js) -> Optional[np.ndarray]:
    """chi(t) = a_inverse ratios at t = factor * 2^j (continuum probes)."""
    rows = []
    for j in js:
        t = factor * 2.0 ** j
        inv = []
        for s in specs:
            try:
                inv.append(fb.a_inverse(s, t, mode="continuum"))
            except (OutOfRange, OverflowError, ToleranceUnreachable):
                return None
        inv = np.asarray(inv, dtype=float)
        if not np.all(np.isfinite(inv)):
            big = ~np.isfinite(inv)
            if big.sum() == 1:
                row = np.zeros(len(specs))
                row[big] = 1.0
                rows.append(row)
                continue
            return None
        rows.append(inv / inv.sum())
    return np.asarray(rows)


def limit_shares(specs: Sequence[fb.Feedback]) -> LimitShares:
    """Long-run share classification.

    Dispatch order: any agent with a summable reciprocal feedback gives
    StrongMonopoly; sublinear families with closed forms give the
    deterministic time-transform ratio limit; equal linear-growth
    constants give RandomDirichlet; a symmetric superlinear
    configuration without explosion gives WeakMonopolyRandomWinner;
    everything else is probed through the inverse time transform on two
    interleaved geometric grids (Deterministic when settled, Oscillating
    on persistent grid disagreement, Unknown otherwise).
    """
    specs = list(specs)
    if len(specs) < 2:
        raise ValueError("need at least 2 agents")
    classes = _classes(specs)
    if any(c.monopoly_condition == fb.HOLDS for c in classes):
        return LimitShares(
            verdict="StrongMonopoly",
            rate_note="an explosive agent takes all but finitely many draws; "
                      "the winner's identity depends on the initial counts")
    det = _sublinear_closed_form(specs)
    if det is not None:
        return LimitShares(verdict="Deterministic", shares=det)
    cs = _linear_constants(specs, classes)
    if cs is not None and np.all(np.abs(cs - cs[0]) <= 1e-12 * abs(cs[0])):
        return LimitShares(
            verdict="RandomDirichlet",
            rate_note="shares converge to a Dirichlet vector whose parameters "
                      "are the initial counts")
    symmetric = all(_same_spec(s, specs[0]) for s in specs[1:])
    superlinear = all(c.growth_class == fb.SUPERLINEAR for c in classes)
    no_m = all(c.monopoly_condition == fb.FAILS for c in classes)
    if symmetric and superlinear and no_m:
        return LimitShares(
            verdict="WeakMonopolyRandomWinner",
            rate_note="a random single agent's share tends to 1 while every "
                      "agent still receives infinitely many draws")
    if any(c.monopoly_condition == fb.INDETERMINATE for c in classes):
        return LimitShares(verdict="Unknown",
                           rate_note="explosivity could not be certified")
    if not all(c.growth_class == fb.SUBLINEAR_TO_ZERO for c in classes):
        return LimitShares(
            verdict="Unknown",
            rate_note="growth is not sublinear for every agent; the share "
                      "limit may be random and the inverse-transform law "
                      "does not apply")
    js = range(4, 34)
    a = _numeric_share_samples(specs, 1.0, js)
    b = _numeric_share_samples(specs, 1.5, js)
    if a is None or b is None:
        return LimitShares(verdict="Unknown",
                           rate_note="inverse-transform probes failed")
    verdict, shares = _grids_verdict(a, b)
    if verdict == "Deterministic":
        return LimitShares(verdict=verdict, shares=shares,
                           rate_note="numeric inverse-transform limit")
    if verdict == "Oscillating":
        return LimitShares(verdict=verdict,
                           rate_note="share ratio oscillates on a log time "
                                     "scale; no single limit")
    return LimitShares(verdict="Unknown",
                       rate_note="inverse-transform probes did not settle")


# ---------------------------------------------------------------------------
# strong-monopoly lower bound (type P)
# ---------------------------------------------------------------------------

def _monotone_on_grid(spec: fb.Feedback) -> bool:
    if isinstance(spec, fb.Polynomial):
        return spec.beta >= 0
    if isinstance(spec, (fb.Exponential, fb.StretchedExp)):
        return spec.beta > 0
    if isinstance(spec, fb.LogLinear):
        return spec.beta >= 0
    if isinstance(spec, (fb.Log, fb.Constant)):
        return True
    ks = np.unique(np.concatenate([np.arange(1, 4097),
                                   2 ** np.arange(12, 21)]))
    v = fb.values(spec, ks)
    return bool(np.all(np.diff(v) >= -1e-12 * np.abs(v[:-1])))


def smon_lower_bound(specs: Sequence[fb.Feedback], chi0, N: int,
                     eps: float) -> float:
    """Lower bound on the strong-monopoly probability of the agent whose
    domain contains chi0, for total mass N.

    Uses 1 - sum_j exp(-(d_j - eps) * sqrt(F_j(X_j) * tail_j(X_j))) with
    d_j = (1 - r_j)/(1 + r_j) from the limiting explosion-tail ratio
    r_j < 1 of the target against competitor j; clamped to [0, 1].
    Requires every explosive agent to be monotone type P and chi0 to lie
    strictly inside one domain.
    """
    chi0 = _check_chi0(specs, chi0)
    classes = _classes(specs)
    for s, c in zip(specs, classes):
        if c.monopoly_condition == fb.INDETERMINATE:
            raise AssumptionViolated("explosivity indeterminate for an agent")
        if c.monopoly_condition == fb.HOLDS:
            if c.pe_type != fb.TYPE_P:
                raise AssumptionViolated(
                    "the bound requires every explosive agent to be of type P")
            if not _monotone_on_grid(s):
                raise AssumptionViolated("explosive agents must be monotone")
    dom = classify_domain(specs, chi0)
    if IN_DOMAIN not in dom.verdicts:
        raise AssumptionViolated(
            f"chi0 is not interior to any domain (verdicts {dom.verdicts})")
    i = dom.verdicts.index(IN_DOMAIN)
    ds = []
    for j in range(len(specs)):
        if j == i:
            continue
        r = float(dom.ratios[i, j])
        if math.isnan(r) or r >= 1.0:
            raise AssumptionViolated("pairwise tail ratio not available")
        ds.append((1.0 - r) / (1.0 + r))
    if not 0.0 < eps < min(ds):
        raise AssumptionViolated(
            f"eps must lie in (0, {min(ds):.6g}) for this configuration")
    X0 = _counts(specs, chi0, N)
    total = 0.0
    k = 0
    for j in range(len(specs)):
        if j == i:
            continue
        tail = fb.tail_sum(specs[j], int(X0[j]), 1)
        if not tail.is_finite:
            raise AssumptionViolated("competitor tail sum not finite")
        Fj = float(fb.cont_value(specs[j], float(X0[j])))
        total += math.exp(-(ds[k] - eps) * math.sqrt(Fj * max(tail.value - tail.error, 0.0)))
        k += 1
    return min(1.0, max(0.0, 1.0 - total))


# ---------------------------------------------------------------------------
# CGF of explosion-time fluctuations
# ---------------------------------------------------------------------------

def _radius(spec: fb.Feedback, x0: int) -> float:
    increasing = (
        (isinstance(spec, fb.Polynomial) and spec.beta >= 0)
        or (isinstance(spec, (fb.Exponential, fb.StretchedExp)) and spec.beta > 0)
        or (isinstance(spec, fb.LogLinear) and spec.beta >= 0)
        or isinstance(spec, (fb.Log, fb.Constant)))
    if increasing:
        return float(fb.cont_value(spec, float(x0)))
    ks = np.unique(np.concatenate([np.arange(x0, x0 + 65_537),
                                   x0 + 2 ** np.arange(17, 24)]))
    return float(np.min(fb.values(spec, ks)))


def cgf_U(spec: fb.Feedback, x0: int, lambda_grid, L: int = 4) -> CgfReport:
    """Cumulant generating function of the centered explosion-time sums.

    Valid when the reciprocal sum diverges but its square converges:
    the centered partial sums then have CGF(lambda) =
    sum_{l >= 2} (lambda^l / l) * sum_{k >= x0} F(k)^-l on
    |lambda| < min_k F(k).  Cumulants are (l-1)! times the power-l
    tails; cumulant(2) is by construction the same number tail_sum
    reports as the fluctuation variance.
    """
    if x0 < 1:
        raise ValueError("x0 must be >= 1")
    if L < 2:
        raise ValueError("L must be >= 2")
    first = fb.tail_sum(spec, x0, 1)
    second = fb.tail_sum(spec, x0, 2)
    if not (first.is_divergent and second.is_finite):
        raise AssumptionViolated(
            "requires a divergent reciprocal sum with finite square sum")
    radius = _radius(spec, x0)
    lambda_grid = [float(v) for v in np.atleast_1d(lambda_grid)]
    for lam in lambda_grid:
        if abs(lam) >= radius:
            raise RadiusExceeded(
                f"|lambda| = {abs(lam):.6g} is outside the radius {radius:.6g}")

    tails = {2: second.value}

    def tail_l(l: int) -> float:
        if l not in tails:
            ts = fb.tail_sum(spec, x0, l)
            if not ts.is_finite:
                raise ToleranceUnreachable(f"power-{l} tail not finite")
            tails[l] = ts.value
        return tails[l]

    evaluation = []
    for lam in lambda_grid:
        total = 0.0
        q = abs(lam) / radius
        l = 2
        while True:
            term = lam ** l / l * tail_l(l)
            total += term
            # remaining terms are geometrically dominated: |term| q/(1-q)
            rest = abs(term) * q / (1.0 - q)
            if rest < 1e-15 * max(abs(total), 1e-300):
                break
            if l >= 10_000:
                raise ToleranceUnreachable(
                    "CGF series converges too slowly this close to the radius")
            l += 1
        evaluation.append((lam, total))
    cumulants = tuple((l, math.factorial(l - 1) * tail_l(l))
                      for l in range(2, L + 1))
    return CgfReport(spec=spec, x0=x0, radius=radius, cumulants=cumulants,
                     evaluation=tuple(evaluation))


# ---------------------------------------------------------------------------
# share floor, exponentially decreasing limit
# ---------------------------------------------------------------------------

def _ratio_increasing(spec: fb.Feedback) -> bool:
    """Is L(k) = F(k)/k non-decreasing?"""
    if isinstance(spec, fb.Polynomial):
        return spec.beta >= 1
    if isinstance(spec, (fb.Exponential, fb.StretchedExp)):
        return spec.beta > 0
    if isinstance(spec, fb.LogLinear):
        return spec.beta >= 0
    if isinstance(spec, fb.Log):
        return False
    ks = np.unique(np.concatenate([np.arange(1, 4097),
                                   2 ** np.arange(12, 22)])).astype(float)
    ratio = fb.values(spec, ks) / ks
    return bool(np.all(np.diff(ratio) >= -1e-12 * np.abs(ratio[:-1])))


def share_floor(spec: fb.Feedback, c: float, n: float) -> float:
    """Asymptotic lower envelope e^{-c L(n)} for every agent's share,
    with L(k) = F(k)/k, valid when L is non-decreasing and the feedback
    is not explosive.

    The constant family counts as the degenerate non-decreasing case and
    floors at e^{-c} by convention.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    if not n >= 1:
        raise ValueError("n must be >= 1")
    if isinstance(spec, fb.Constant):
        return math.exp(-c)
    total = fb.tail_sum(spec, 1, 1)
    if total.is_finite:
        raise AssumptionViolated(
            "the feedback is explosive; shares have no positive floor")
    if not total.is_divergent:
        raise AssumptionViolated("explosivity could not be ruled out")
    if not _ratio_increasing(spec):
        raise AssumptionViolated("F(k)/k must be non-decreasing")
    L = float(fb.cont_value(spec, float(n))) / float(n)
    return math.exp(-c * L)


def exp_decreasing_limit(betas: Sequence[float]) -> Tuple[float, float]:
    """Deterministic limit shares for two agents with exponentially
    decreasing feedback alpha * e^{-beta k}: (beta2, beta1)/(beta1+beta2),
    independent of the alpha prefactors."""
    if len(betas) != 2:
        raise ValueError("exactly two decay rates are required")
    b1, b2 = float(betas[0]), float(betas[1])
    if not (b1 > 0 and b2 > 0):
        raise ValueError("decay rates must be positive")
    s = b1 + b2
    return (b2 / s, b1 / s)


# ---------------------------------------------------------------------------
# aggregated regime report
# ---------------------------------------------------------------------------

def _family_params(spec: fb.Feedback) -> dict:
    if isinstance(spec, fb.Polynomial):
        return {"alpha": spec.alpha, "beta": spec.beta}
    if isinstance(spec, fb.Exponential):
        return {"alpha": spec.alpha, "beta": spec.beta}
    if isinstance(spec, fb.StretchedExp):
        return {"alpha": spec.alpha, "beta": spec.beta, "gamma": spec.gamma}
    if isinstance(spec, fb.LogLinear):
        return {"alpha": spec.alpha, "beta": spec.beta}
    if isinstance(spec, (fb.Log, fb.Constant)):
        return {"alpha": spec.alpha}
    return {"source": spec.source}


_JOINT = {
    "StrongMonopoly": "strong monopoly",
    "WeakMonopolyRandomWinner": "weak monopoly (random winner)",
    "RandomDirichlet": "Dirichlet",
    "Deterministic": "deterministic",
    "Oscillating": "oscillating",
    "Unknown": "indeterminate",
}

_BOUND_FORMULAS = {
    "tmon_lower": "exp(-sum_{j!=i} F_j(X_j(0)) * sum_{k>=X_i(0)} 1/F_i(k))",
    "tmon_upper": "lower^c_N with c_N = inf_k F_i(X_i+k)/(F_i(X_i+k) + S)",
    "smon_lower": "1 - sum_{j!=i} exp(-(d_j-eps) sqrt(F_j(X_j) tail_j(X_j)))",
    "share_floor": "chi_i(n) >= exp(-c F(n)/n) eventually (non-explosive, "
                   "F(k)/k non-decreasing)",
}


def regime_report(specs: Sequence[fb.Feedback], chi0=None,
                  N: Optional[int] = None) -> dict:
    """JSON-ready aggregation of per-agent regimes, the joint verdict,
    limit shares, and (when chi0/N are supplied) domain verdicts and
    monopoly bounds.

    Schema: {agents: [{family, params, regime: {...}}], joint_verdict,
    domains, bounds, limit_shares}.
    """
    specs = list(specs)
    classes = _classes(specs)
    agents = [{"family": type(s).__name__,
               "params": _family_params(s),
               "regime": c.as_dict()} for s, c in zip(specs, classes)]
    shares = limit_shares(specs)
    report = {
        "agents": agents,
        "joint_verdict": _JOINT.get(shares.verdict, shares.verdict),
        "domains": None,
        "bounds": {"formulas": dict(_BOUND_FORMULAS), "tmon": None,
                   "smon_lower": None},
        "limit_shares": shares.as_dict(),
    }
    if chi0 is not None:
        dom = classify_domain(specs, chi0)
        report["domains"] = dom.as_dict()
        if N is not None:
            try:
                tb = tmon_bounds(specs, chi0, N)
                exact = exact_tmon_probability(specs, _counts(specs, chi0, N),
                                               tol=1e-6)
                report["bounds"]["tmon"] = replace(tb, exact=exact).as_dict()
            except (NotExplosive, ToleranceUnreachable):
                pass
            try:
                report["bounds"]["smon_lower"] = smon_lower_bound(
                    specs, chi0, N, eps=0.01)
            except (AssumptionViolated, ValueError):
                pass
    return report
