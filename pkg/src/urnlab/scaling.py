"""Scaling limits of the share process.

The share vector of a feedback urn, viewed on the time scale n = N(1+t),
follows the mean-field ODE dZ/dt = G(Z)/(1+t) with G(x) = p(x) - x, where
p is the limiting draw-probability field.  This module evaluates that
field, integrates the ODE (together with its homogeneous-time twin),
locates fixed points with stability, simulates the pairwise-antisymmetric
fluctuation system (diffusion M, drift correction H, combined H + M),
computes quadratic variations, and produces the short-time-scale reports
parameterized by an exponent beta.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate as _sint
from scipy import optimize as _sopt

from . import feedback as fb
from .errors import LimitUndefined, StepFailure

__all__ = [
    "VectorFieldEval", "ScalingPath", "FixedPoint", "FixedPointReport",
    "QuadraticVariation", "BetaScalingReport",
    "vector_field", "integrate_mean_ode", "fixed_points",
    "simulate_fclt", "quadratic_variation", "beta_scaling",
]


# ---------------------------------------------------------------------------
# the limiting probability field p(x)
# ---------------------------------------------------------------------------

def _growth_key(spec: fb.Feedback, xi: float):
    """Lexicographic growth key of F(k * xi) as k -> oo.

    Returns (exp_rank, poly_degree, log_degree, scale): exp_rank orders
    exponential factors (sign-aware), then polynomial degree, then the
    slowly-varying log exponent; agents tied on all three compare by the
    finite ratio of scales.  None for Custom specs (numeric route).
    """
    if xi == 0.0:
        # F(k*0) is constant in k: join the constant class at F(0+)
        v = _value_at_zero(spec)
        if v is None:
            return None
        if math.isinf(v):
            return ((math.inf, math.inf), 0.0, 0.0, 1.0)
        return ((0.0, 0.0), 0.0, 0.0, v)
    if isinstance(spec, fb.Polynomial):
        return ((0.0, 0.0), spec.beta, 0.0, spec.alpha * xi ** spec.beta)
    if isinstance(spec, fb.Exponential):
        c = spec.beta * xi
        if c == 0.0:
            return ((0.0, 0.0), 0.0, 0.0, spec.alpha)
        rank = (1.0, c) if c > 0 else (-1.0, c)
        return (rank, 0.0, 0.0, spec.alpha)
    if isinstance(spec, fb.StretchedExp):
        return ((spec.gamma, spec.beta * xi ** spec.gamma), 0.0, 0.0, spec.alpha)
    if isinstance(spec, fb.LogLinear):
        return ((0.0, 0.0), 1.0, spec.beta, spec.alpha * xi)
    if isinstance(spec, fb.Log):
        return ((0.0, 0.0), 0.0, 1.0, spec.alpha)
    if isinstance(spec, fb.Constant):
        return ((0.0, 0.0), 0.0, 0.0, spec.alpha)
    return None


def _value_at_zero(spec: fb.Feedback) -> Optional[float]:
    if isinstance(spec, fb.Polynomial):
        return 0.0 if spec.beta > 0 else (spec.alpha if spec.beta == 0 else math.inf)
    if isinstance(spec, (fb.Exponential, fb.StretchedExp)):
        return spec.alpha
    if isinstance(spec, fb.LogLinear):
        b = spec.beta
        return 0.0 if b > -1 else (spec.alpha if b == -1 else math.inf)
    if isinstance(spec, fb.Log):
        return 0.0
    if isinstance(spec, fb.Constant):
        return spec.alpha
    return None


def _p_limit_symbolic(specs: Sequence[fb.Feedback], x: np.ndarray) -> Optional[np.ndarray]:
    """Closed-form p(x) = lim_k softmax of F_i(k x_i); None for Custom."""
    keys = [_growth_key(spec, float(max(xi, 0.0))) for spec, xi in zip(specs, x)]
    if any(k is None for k in keys):
        return None
    top = max(k[:3] for k in keys)
    idx = [i for i, k in enumerate(keys) if k[:3] == top]
    exp_rank = top[0]
    if exp_rank != (0.0, 0.0) and len(idx) > 1:
        raise LimitUndefined(
            "exponential-rate tie between agents "
            f"{idx}: the limit field is discontinuous here")
    p = np.zeros(len(specs))
    scales = np.asarray([keys[i][3] for i in idx], dtype=float)
    total = scales.sum()
    if total <= 0.0:
        # all dominating scales vanish (vertex corner); weight the agents evenly
        p[idx] = 1.0 / len(idx)
        return p
    p[idx] = scales / total
    return p


def _p_limit_numeric(specs: Sequence[fb.Feedback], x: np.ndarray) -> np.ndarray:
    probes = []
    for j in range(18, 31):
        probes.append(_p_finite(specs, float(2.0 ** j), x))
    w = np.asarray(probes[-5:])
    spread = np.max(np.abs(w - w[-1]))
    if spread > 0.01:
        raise LimitUndefined(
            "numeric probes of the limit field do not stabilize "
            f"(spread {spread:.3g} on the last five dyadic scales)")
    return w[-1]


def _p_finite(specs: Sequence[fb.Feedback], k: float, x: np.ndarray) -> np.ndarray:
    """softmax of log F_i(k x_i) with clamped coordinates."""
    xi = np.maximum(np.asarray(x, dtype=float), 0.0)
    lw = np.empty(len(specs))
    for i, spec in enumerate(specs):
        arg = k * xi[i]
        if arg == 0.0:
            v = _value_at_zero(spec)
            if v is None:
                with np.errstate(all="ignore"):
                    v = float(fb.cont_value(spec, 1e-300))
            lw[i] = -math.inf if v == 0.0 else (math.inf if math.isinf(v) else math.log(v))
        else:
            with np.errstate(all="ignore"):
                lw[i] = float(fb.log_values(spec, np.asarray([arg]))[0])
    if np.any(np.isposinf(lw)):
        p = np.zeros(len(specs))
        winners = np.isposinf(lw)
        p[winners] = 1.0 / winners.sum()
        return p
    m = np.max(lw)
    if not math.isfinite(m):
        raise LimitUndefined("all weights vanish at this point")
    p = np.exp(lw - m)
    return p / p.sum()


def limit_p(specs: Sequence[fb.Feedback], x) -> np.ndarray:
    """p(x) of the limit field; symbolic for built-ins, probed for Custom."""
    x = np.asarray(x, dtype=float)
    p = _p_limit_symbolic(specs, x)
    if p is None:
        p = _p_limit_numeric(specs, x)
    return p


def limit_G(specs: Sequence[fb.Feedback], x) -> np.ndarray:
    """G(x) = p(x) - x (components sum to zero up to the sum defect of x)."""
    x = np.asarray(x, dtype=float)
    return limit_p(specs, x) - x


@dataclass(frozen=True)
class VectorFieldEval:
    """Field evaluation at x: finite-k field G_k (when k finite), the
    limit field G_lim, and the limiting draw probabilities p_lim."""

    x: np.ndarray
    G_k: Optional[np.ndarray]
    G_lim: Optional[np.ndarray]
    p_lim: Optional[np.ndarray]


def vector_field(specs: Sequence[fb.Feedback], k, x) -> VectorFieldEval:
    """Evaluate G(k, x) = p(k, x) - x and, when possible, its k -> oo limit.

    Pass k = math.inf (or None) for the limit field alone.  Exponential
    rate ties make the limit discontinuous and raise LimitUndefined; for
    Custom specs the limit is probed on dyadic k and LimitUndefined is
    raised when the probes do not stabilize.
    """
    x = np.asarray(x, dtype=float)
    if len(x) != len(specs):
        raise ValueError("x must have one coordinate per agent")
    if np.any(x < -1e-12) or abs(x.sum() - 1.0) > 1e-9:
        raise ValueError("x must lie on the simplex")
    G_k = None
    if k is not None and not (isinstance(k, float) and math.isinf(k)):
        if not float(k) > 0:
            raise ValueError("k must be positive or infinite")
        p_k = _p_finite(specs, float(k), x)
        G_k = p_k - x
    try:
        p_lim = limit_p(specs, x)
        G_lim = p_lim - x
    except LimitUndefined:
        if G_k is None:
            raise
        p_lim, G_lim = None, None
    return VectorFieldEval(x=x, G_k=G_k, G_lim=G_lim, p_lim=p_lim)


# ---------------------------------------------------------------------------
# mean-field ODE with homogeneous-time twin
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScalingPath:
    """Grid-aligned scaling-limit paths.

    Z is the mean path; Y, when present, solves the homogeneous-time
    equation with Z(t) = Y(log(1+t)).  M/H/Ztilde are the fluctuation
    paths and qvar the accumulated quadratic variation, when produced.
    """

    times: np.ndarray
    Z: np.ndarray
    h: float
    Y: Optional[np.ndarray] = None
    M: Optional[np.ndarray] = None
    H: Optional[np.ndarray] = None
    Ztilde: Optional[np.ndarray] = None
    qvar: Optional[np.ndarray] = None
    max_clamp: float = 0.0
    seed: Optional[int] = None

    @property
    def n_agents(self) -> int:
        return self.Z.shape[1]

    def to_csv(self, path) -> None:
        """Rows `t,Z_1..Z_A,M_1..M_A,H_1..H_A,qvar_1..qvar_A`; fluctuation
        columns are zero-filled when the path carries none."""
        A = self.n_agents
        zeros = np.zeros_like(self.Z)
        M = self.M if self.M is not None else zeros
        H = self.H if self.H is not None else zeros
        q = self.qvar if self.qvar is not None else zeros
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = (["t"] + [f"Z_{i+1}" for i in range(A)]
                      + [f"M_{i+1}" for i in range(A)]
                      + [f"H_{i+1}" for i in range(A)]
                      + [f"qvar_{i+1}" for i in range(A)])
            w.writerow(header)
            for n in range(len(self.times)):
                row = [repr(float(self.times[n]))]
                for block in (self.Z, M, H, q):
                    row += [repr(float(v)) for v in block[n]]
                w.writerow(row)


def _check_chi0(specs, chi0) -> np.ndarray:
    chi0 = np.asarray(chi0, dtype=float)
    if len(chi0) != len(specs):
        raise ValueError("chi0 must have one coordinate per agent")
    if np.any(chi0 <= 0.0) or abs(chi0.sum() - 1.0) > 1e-9:
        raise ValueError("chi0 must lie in the open simplex")
    return chi0


def _rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + h / 2, y + h / 2 * k1)
    k3 = f(t + h / 2, y + h / 2 * k2)
    k4 = f(t + h, y + h * k3)
    return y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_mean_ode(specs: Sequence[fb.Feedback], chi0, T: float, h: float,
                       _with_grid: bool = False) -> ScalingPath:
    """Integrate dZ/dt = G(Z)/(1+t) on [0, T] with fixed step h.

    Classic 4th-order steps; each step is clamped at 0 and renormalized
    onto the simplex, with the largest clamp magnitude recorded (above
    1e-6 the step is declared too coarse and StepFailure is raised).  The
    homogeneous-time twin dY/ds = G(Y) is integrated on the matching grid
    s_n = log(1 + t_n) and the identity Z(t) = Y(log(1+t)) is asserted
    within 10 h^4 (1+T).
    """
    chi0 = _check_chi0(specs, chi0)
    if not (T > 0 and h > 0):
        raise ValueError("T and h must be positive")
    n_steps = int(math.ceil(T / h - 1e-12))
    times = np.minimum(h * np.arange(n_steps + 1), T)

    def f_inhom(t, y):
        return limit_G(specs, y) / (1.0 + t)

    def f_hom(_s, y):
        return limit_G(specs, y)

    A = len(specs)
    Z = np.empty((n_steps + 1, A))
    Y = np.empty((n_steps + 1, A))
    Z[0] = Y[0] = chi0
    max_clamp = 0.0
    for n in range(n_steps):
        ht = times[n + 1] - times[n]
        z = _rk4_step(f_inhom, times[n], Z[n], ht)
        neg = -float(np.min(z))
        if neg > 0.0:
            max_clamp = max(max_clamp, neg)
            if max_clamp > 1e-6:
                raise StepFailure(
                    f"clamp magnitude {max_clamp:.3g} at t={times[n+1]:.6g}; "
                    "reduce the step size")
            z = np.maximum(z, 0.0)
        z = z / z.sum()
        Z[n + 1] = z

        hs = math.log1p(times[n + 1]) - math.log1p(times[n])
        y = _rk4_step(f_hom, math.log1p(times[n]), Y[n], hs)
        y = np.maximum(y, 0.0)
        Y[n + 1] = y / y.sum()

    defect = float(np.max(np.abs(Z - Y)))
    tol = max(10.0 * h ** 4 * (1.0 + T), 64 * n_steps * np.finfo(float).eps)
    assert defect <= tol, (
        f"time-change identity violated: max |Z - Y(log(1+t))| = {defect:.3g} "
        f"> {tol:.3g}")
    return ScalingPath(times=times, Z=Z, h=h, Y=Y, max_clamp=max_clamp)


# ---------------------------------------------------------------------------
# fixed points of the limit field
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FixedPoint:
    point: np.ndarray
    residual: float
    stability: str                 # "Stable" | "Unstable" | "Marginal"
    eig_real: np.ndarray


@dataclass(frozen=True)
class FixedPointReport:
    points: List[FixedPoint]
    continuum_of_fixed_points: bool = False


def _tangent_jacobian(specs, x, delta: float = 1e-6) -> np.ndarray:
    """DG restricted to the tangent space, in the basis e_i - e_A."""
    A = len(specs)
    cols = []
    for b in range(A - 1):
        d = np.zeros(A)
        d[b], d[A - 1] = 1.0, -1.0
        gp = limit_G(specs, x + delta * d)
        gm = limit_G(specs, x - delta * d)
        cols.append((gp - gm) / (2 * delta))
    # coordinates of each tangent column in the same basis are its first
    # A-1 components
    return np.column_stack([c[:A - 1] for c in cols])


def fixed_points(specs: Sequence[fb.Feedback], tol: float = 1e-6) -> FixedPointReport:
    """Locate zeros of the limit field with stability classification.

    Multistart root search from the vertices, barycenter, edge midpoints
    and 100 random simplex points; solutions are deduplicated within 1e-8
    and verified to residual < 1e-10.  Stability comes from the real
    parts of the tangent-space Jacobian eigenvalues (central differences,
    step 1e-6): Stable when all < -tol, Unstable when any > tol, else
    Marginal.  Linear feedback makes every probe a zero; the report then
    sets continuum=True.
    """
    A = len(specs)
    starts = []
    eye = np.eye(A)
    for i in range(A):
        starts.append(eye[i])
    starts.append(np.full(A, 1.0 / A))
    for i in range(A):
        for j in range(i + 1, A):
            starts.append((eye[i] + eye[j]) / 2.0)
    rng = np.random.default_rng(1234)
    starts.extend(rng.dirichlet(np.ones(A), size=100))

    def g_reduced(y):
        x = np.concatenate([y, [1.0 - y.sum()]])
        return limit_G(specs, x)[:A - 1]

    # a continuum shows up as every probe already being a zero; random
    # probes are included so isolated symmetric configurations (whose
    # deterministic probes all happen to be fixed) do not fool the check
    probe_residuals = []
    for s in starts[:A + 1 + A * (A - 1) // 2] + starts[-10:]:
        try:
            probe_residuals.append(float(np.max(np.abs(limit_G(specs, s)))))
        except LimitUndefined:
            probe_residuals.append(math.inf)
    continuum = all(r < 1e-10 for r in probe_residuals)

    found: List[np.ndarray] = []
    for s in starts:
        try:
            sol = _sopt.root(g_reduced, s[:A - 1], method="hybr",
                             options={"xtol": 1e-12})
        except LimitUndefined:
            continue
        if not sol.success:
            continue
        x = np.concatenate([sol.x, [1.0 - sol.x.sum()]])
        if np.any(x < -1e-9) or np.any(x > 1 + 1e-9):
            continue
        x = np.maximum(x, 0.0)
        x = x / x.sum()
        try:
            res = float(np.max(np.abs(limit_G(specs, x))))
        except LimitUndefined:
            continue
        if res >= 1e-10:
            continue
        if not any(np.max(np.abs(x - f)) < 1e-8 for f in found):
            found.append(x)

    points = []
    for x in sorted(found, key=lambda v: tuple(-v)):
        try:
            J = _tangent_jacobian(specs, x)
            eig = np.linalg.eigvals(J).real
        except (LimitUndefined, FloatingPointError):
            eig = np.full(A - 1, np.nan)
        if np.all(np.isfinite(eig)):
            if np.all(eig < -tol):
                stab = "Stable"
            elif np.any(eig > tol):
                stab = "Unstable"
            else:
                stab = "Marginal"
        else:
            stab = "Marginal"
        res = float(np.max(np.abs(limit_G(specs, x))))
        points.append(FixedPoint(point=x, residual=res, stability=stab,
                                 eig_real=np.sort(eig)[::-1]))
    return FixedPointReport(points=points, continuum_of_fixed_points=continuum)


# ---------------------------------------------------------------------------
# fluctuation system: diffusion M, drift correction H, Ztilde = H + M
# ---------------------------------------------------------------------------

def _dg_dot(specs, x, v, delta_scale: float = 1e-6) -> np.ndarray:
    """Directional derivative DG(x) . v by central differences.

    The exact derivative is tangent (components sum to 0); the mean is
    removed to keep the discretized H exactly tangent as well.
    """
    nv = float(np.max(np.abs(v)))
    if nv == 0.0:
        return np.zeros_like(v)
    d = delta_scale / nv
    w = (limit_G(specs, x + d * v) - limit_G(specs, x - d * v)) / (2 * d)
    return w - w.mean()


def simulate_fclt(specs: Sequence[fb.Feedback], chi0, T: float, h: float,
                  rng=None) -> ScalingPath:
    """Euler-Maruyama simulation of the fluctuation limit around Z.

    For each unordered agent pair one Gaussian increment sqrt(h) N(0,1)
    enters M_i with coefficient sqrt(p_i p_j)/(1+t) and M_j with the
    opposite sign, so every M row sums to zero exactly.  H follows the
    random ODE dH = DG(Z) (H + M)/(1+t) dt on the same grid, Ztilde =
    H + M, and qvar accumulates h p_i (1 - p_i)/(1+t)^2.  Z itself is
    advanced with 4th-order steps as in integrate_mean_ode.
    """
    chi0 = _check_chi0(specs, chi0)
    if not (T > 0 and h > 0):
        raise ValueError("T and h must be positive")
    seed = rng if isinstance(rng, int) else None
    rng = np.random.default_rng(rng)
    A = len(specs)
    n_steps = int(math.ceil(T / h - 1e-12))
    times = np.minimum(h * np.arange(n_steps + 1), T)
    iu, ju = np.triu_indices(A, k=1)

    def f_inhom(t, y):
        return limit_G(specs, y) / (1.0 + t)

    Z = np.empty((n_steps + 1, A))
    M = np.zeros((n_steps + 1, A))
    H = np.zeros((n_steps + 1, A))
    qvar = np.zeros((n_steps + 1, A))
    Z[0] = chi0
    max_clamp = 0.0
    for n in range(n_steps):
        ht = times[n + 1] - times[n]
        t = times[n]
        p = limit_p(specs, Z[n])
        # diffusion: one increment per unordered pair, antisymmetric
        xi = rng.standard_normal(len(iu)) * math.sqrt(ht)
        amp = np.sqrt(p[iu] * p[ju]) / (1.0 + t)
        dM = np.zeros(A)
        np.add.at(dM, iu, amp * xi)
        np.add.at(dM, ju, -amp * xi)
        M[n + 1] = M[n] + dM
        H[n + 1] = H[n] + ht * _dg_dot(specs, Z[n], H[n] + M[n]) / (1.0 + t)
        qvar[n + 1] = qvar[n] + ht * p * (1.0 - p) / (1.0 + t) ** 2

        z = _rk4_step(f_inhom, t, Z[n], ht)
        neg = -float(np.min(z))
        if neg > 0.0:
            max_clamp = max(max_clamp, neg)
            if max_clamp > 1e-6:
                raise StepFailure(
                    f"clamp magnitude {max_clamp:.3g} at t={times[n+1]:.6g}")
            z = np.maximum(z, 0.0)
        Z[n + 1] = z / z.sum()

    return ScalingPath(times=times, Z=Z, h=h, M=M, H=H, Ztilde=H + M,
                       qvar=qvar, max_clamp=max_clamp, seed=seed)


@dataclass(frozen=True)
class FcltEnsemble:
    """Final-time fluctuation samples over many independent paths.

    M_T/H_T/Ztilde_T have shape (replicas, A); checkpoints, when
    requested, hold Ztilde at the given intermediate times with shape
    (n_checkpoints, replicas, A).  Z and qvar are the shared
    deterministic paths on `times`.
    """

    times: np.ndarray
    Z: np.ndarray
    qvar: np.ndarray
    M_T: np.ndarray
    H_T: np.ndarray
    Ztilde_T: np.ndarray
    checkpoint_times: Optional[np.ndarray] = None
    checkpoints: Optional[np.ndarray] = None
    seed: Optional[int] = None


def ensemble_fclt(specs: Sequence[fb.Feedback], chi0, T: float, h: float,
                  replicas: int, rng=None,
                  checkpoints: Optional[Sequence[float]] = None) -> FcltEnsemble:
    """Many fluctuation paths at once over the shared deterministic Z.

    Z does not depend on the noise, so it is integrated once and the
    M/H recursions are advanced for all replicas simultaneously; the
    per-path law is identical to simulate_fclt with the same grid.
    """
    chi0 = _check_chi0(specs, chi0)
    if not (T > 0 and h > 0 and replicas >= 1):
        raise ValueError("need T, h > 0 and replicas >= 1")
    seed = rng if isinstance(rng, int) else None
    rng = np.random.default_rng(rng)
    A = len(specs)
    n_steps = int(math.ceil(T / h - 1e-12))
    times = np.minimum(h * np.arange(n_steps + 1), T)
    iu, ju = np.triu_indices(A, k=1)
    incidence = np.zeros((A, len(iu)))
    incidence[iu, np.arange(len(iu))] = 1.0
    incidence[ju, np.arange(len(iu))] = -1.0

    def f_inhom(t, y):
        return limit_G(specs, y) / (1.0 + t)

    Z = np.empty((n_steps + 1, A))
    qvar = np.zeros((n_steps + 1, A))
    Z[0] = chi0
    M = np.zeros((replicas, A))
    H = np.zeros((replicas, A))
    check_times = None if checkpoints is None else np.asarray(checkpoints, float)
    checks = None if checkpoints is None else np.empty((len(check_times), replicas, A))
    next_check = 0
    max_clamp = 0.0
    for n in range(n_steps):
        t = times[n]
        ht = times[n + 1] - times[n]
        p = limit_p(specs, Z[n])
        amp = np.sqrt(p[iu] * p[ju]) / (1.0 + t)
        xi = rng.standard_normal((replicas, len(iu))) * math.sqrt(ht)
        J = _tangent_jacobian(specs, Z[n])
        V = H + M
        W = np.empty_like(V)
        W[:, :A - 1] = V[:, :A - 1] @ J.T
        W[:, A - 1] = -W[:, :A - 1].sum(axis=1)
        H = H + ht * W / (1.0 + t)
        M = M + (xi * amp) @ incidence.T
        qvar[n + 1] = qvar[n] + ht * p * (1.0 - p) / (1.0 + t) ** 2

        z = _rk4_step(f_inhom, t, Z[n], ht)
        neg = -float(np.min(z))
        if neg > 0.0:
            max_clamp = max(max_clamp, neg)
            if max_clamp > 1e-6:
                raise StepFailure(
                    f"clamp magnitude {max_clamp:.3g} at t={times[n+1]:.6g}")
            z = np.maximum(z, 0.0)
        Z[n + 1] = z / z.sum()
        if checks is not None:
            while (next_check < len(check_times)
                   and times[n + 1] >= check_times[next_check] - 1e-12):
                checks[next_check] = H + M
                next_check += 1

    return FcltEnsemble(times=times, Z=Z, qvar=qvar, M_T=M, H_T=H,
                        Ztilde_T=H + M, checkpoint_times=check_times,
                        checkpoints=checks, seed=seed)


# ---------------------------------------------------------------------------
# quadratic variation to arbitrary horizons
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadraticVariation:
    """<M_i>(T) per agent, with quadrature error and infinite-horizon tail.

    values[i] integrates p_i(Z(s))(1 - p_i(Z(s)))/(1+s)^2 over [0, T] to
    absolute accuracy abs_error; tail_bound is the analytic remainder
    bound 1/(4(1+T)) for extrapolating T -> oo.
    """

    values: np.ndarray
    abs_error: float
    tail_bound: float
    T: float


def quadratic_variation(specs: Sequence[fb.Feedback], chi0,
                        T: float) -> QuadraticVariation:
    """Deterministic quadratic variation of the fluctuation martingales.

    Z is solved in homogeneous time (dense output) and the integral is
    evaluated in the variable u = 1/(1+s), which maps [0, T] onto a
    bounded interval and makes the integrand smooth; absolute error is
    kept below 1e-6.  Monotone in T and bounded by 1/4 per agent.
    """
    chi0 = _check_chi0(specs, chi0)
    if T < 0:
        raise ValueError("T must be >= 0")
    A = len(specs)
    if T == 0:
        return QuadraticVariation(values=np.zeros(A), abs_error=0.0,
                                  tail_bound=0.25, T=0.0)
    s_end = math.log1p(T)
    sol = _sint.solve_ivp(lambda s, y: limit_G(specs, y), (0.0, s_end), chi0,
                          method="RK45", rtol=1e-10, atol=1e-12,
                          dense_output=True)
    if not sol.success:
        raise StepFailure(f"mean-path solve failed: {sol.message}")
    samples = sol.sol(np.linspace(0.0, s_end, 512))
    if float(samples.min()) < -1e-6:
        raise StepFailure("mean path left the simplex; refine the solver")

    def p_of_u(u: float) -> np.ndarray:
        s = 1.0 / u - 1.0
        z = np.maximum(sol.sol(math.log1p(s)), 0.0)
        return limit_p(specs, z / z.sum())

    u_lo = 1.0 / (1.0 + T)
    values = np.empty(A)
    err_total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", _sint.IntegrationWarning)
        for i in range(A):
            def integrand(u, i=i):
                pi = float(p_of_u(u)[i])
                return pi * (1.0 - pi)
            val, err = _sint.quad(integrand, u_lo, 1.0, epsabs=1e-9, limit=200)
            values[i] = val
            err_total = max(err_total, err)
    if err_total > 1e-6:
        raise StepFailure(f"quadrature error {err_total:.3g} above 1e-6")
    return QuadraticVariation(values=values, abs_error=err_total,
                              tail_bound=1.0 / (4.0 * (1.0 + T)), T=float(T))


# ---------------------------------------------------------------------------
# short-time-scale (beta) report
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaScalingReport:
    """First- and second-order short-time behaviour at chi0, with one
    rescaled empirical path for comparison.

    lln_slope is G(chi0); curvature is (1/2) DG(chi0) G(chi0); regime
    tags which limit applies at the exponent beta; covariance is the
    driving Brownian covariance p_i delta_ij - p_i p_j.  empirical holds
    N^(1-beta) (chi(floor(N^beta t)) - chi(0)) on the `times` grid.
    """

    beta: float
    N: int
    T: float
    lln_slope: np.ndarray
    curvature: np.ndarray
    regime: str
    covariance: np.ndarray
    times: np.ndarray
    empirical: np.ndarray
    seed: Optional[int] = None

    def lln_line(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return t[..., None] * self.lln_slope

    def second_order_curve(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        return (t ** 2)[..., None] * self.curvature


def beta_scaling(specs: Sequence[fb.Feedback], chi0, beta: float, N: int,
                 T: float, seed: Optional[int] = None,
                 max_points: int = 2000) -> BetaScalingReport:
    """Short-time-scale report at exponent beta in (0, 1).

    Returns the law-of-large-numbers line G(chi0) t, the second-order
    curve (1/2) DG(chi0) G(chi0) t^2 with the applicable regime tag
    (beta > 2/3 deterministic curve, beta = 2/3 curve plus diffusion,
    beta < 2/3 diffusion only), the Brownian covariance at chi0, and one
    simulated path of size N rescaled by N^(1-beta) on the same clock.
    """
    from .urn import shares_from_initial, simulate_many

    chi0 = _check_chi0(specs, chi0)
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if not (T > 0 and N >= len(specs)):
        raise ValueError("need T > 0 and N >= number of agents")
    G0 = limit_G(specs, chi0)
    curv = 0.5 * _dg_dot(specs, chi0, G0)
    p = limit_p(specs, chi0)
    cov = np.diag(p) - np.outer(p, p)
    if beta > 2.0 / 3.0:
        regime = "deterministic_curve"
    elif beta == 2.0 / 3.0:
        regime = "curve_plus_diffusion"
    else:
        regime = "diffusion_only"

    steps = int(math.floor(N ** beta * T))
    x0 = shares_from_initial(chi0, N)
    every = max(1, steps // max_points)
    if steps == 0:
        times = np.zeros(1)
        emp = np.zeros((1, len(specs)))
    else:
        _, snaps = simulate_many(specs, x0, steps, replicas=1, seed=seed,
                                 record_every=every)
        chi_path = snaps[:, 0, :]
        idx = np.arange(len(chi_path)) * every
        idx[0] = 0
        times = idx / N ** beta
        emp = N ** (1.0 - beta) * (chi_path - chi_path[0])
    return BetaScalingReport(beta=beta, N=N, T=T, lln_slope=G0, curvature=curv,
                             regime=regime, covariance=cov, times=times,
                             empirical=emp, seed=seed)
