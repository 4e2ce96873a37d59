"""Bounded nonlinear weighted least squares plus the two model fits.

The solver is a damped Gauss-Newton (Levenberg-Marquardt) with numerical
forward-difference Jacobian, box bounds by step clipping, per-parameter
linear or logarithmic internal coordinates, and a Nelder-Mead fallback when
the normal equations degenerate. Steps are accepted only on a chi^2
decrease, so the returned point is never worse than the start. NaN residuals
reject the step and raise the damping.
"""

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import dynamics, mattis_bardeen
from .core import TlsClass
from .distribution import DistributionParams, density
from .errors import FitError, SaturationError, StepConvergenceError

_DAMPING_MIN = 1e-8
_DAMPING_MAX = 1e8
_MAX_ITER = 200
_JAC_REL_STEP = 1e-6
_JAC_ABS_FLOOR = 1e-12


@dataclass
class FitParameter:
    """One named fit parameter with bounds and coordinate scale.

    scale "log" optimizes ln(value) (requires positive bounds); "linear"
    optimizes the raw value. frozen=True pins the parameter.
    """

    name: str
    value: float
    lower: float = -math.inf
    upper: float = math.inf
    scale: str = "log"
    frozen: bool = False

    def __post_init__(self):
        if self.scale not in ("log", "linear"):
            raise ValueError("scale must be 'log' or 'linear'")
        if not self.lower < self.upper:
            raise ValueError("parameter %s: lower must be < upper" % self.name)
        if not self.lower <= self.value <= self.upper:
            raise ValueError("parameter %s: initial value outside bounds"
                             % self.name)
        if self.scale == "log":
            if self.value <= 0:
                raise ValueError("parameter %s: log scale needs value > 0"
                                 % self.name)
            if self.lower <= 0:
                self.lower = 1e-300

    def to_internal(self, p):
        return math.log(p) if self.scale == "log" else p

    def from_internal(self, u):
        return math.exp(u) if self.scale == "log" else u


@dataclass
class FitProblem:
    """residual_fn maps a full parameter vector (frozen entries included, in
    order) to the unweighted residual vector; data_weights are per-point 1
    sigma."""

    residual_fn: object
    params: list
    data_weights: np.ndarray

    def __post_init__(self):
        self.data_weights = np.asarray(self.data_weights, dtype=float)
        if np.any(self.data_weights <= 0):
            raise ValueError("data_weights must be positive 1 sigma values")


@dataclass
class FitResult:
    """Optimum, 1 sigma from the local covariance, and the iteration log."""

    names: tuple
    values: np.ndarray
    sigma: np.ndarray
    chi2_reduced: float
    n_points: int
    convergence_log: list
    converged: bool
    method: str = "lm"

    def __post_init__(self):
        if self.chi2_reduced < 0:
            raise ValueError("chi2_reduced must be >= 0")

    @property
    def values_dict(self):
        return dict(zip(self.names, (float(v) for v in self.values)))

    @property
    def sigma_dict(self):
        return dict(zip(self.names, (float(s) for s in self.sigma)))

    def to_json(self):
        return json.dumps({
            "parameters": list(self.names),
            "values": [float(v) for v in self.values],
            "sigma": [float(s) for s in self.sigma],
            "chi2_reduced": float(self.chi2_reduced),
            "n_points": int(self.n_points),
            "converged": bool(self.converged),
            "method": self.method,
            "convergence_log": self.convergence_log,
        }, indent=2)


def numerical_jacobian(fn, u, *, rel_step=_JAC_REL_STEP,
                       abs_floor=_JAC_ABS_FLOOR, scheme="forward",
                       lower=None, upper=None, f0=None):
    """Numerical Jacobian of fn at u with per-coordinate relative steps.

    Steps reverse direction at an upper bound so trial points stay feasible.
    """
    u = np.asarray(u, dtype=float)
    if f0 is None:
        f0 = fn(u)
    f0 = np.asarray(f0, dtype=float)
    jac = np.empty((len(f0), len(u)))
    for j in range(len(u)):
        h = rel_step * abs(u[j]) + abs_floor
        if upper is not None and u[j] + h > upper[j]:
            h = -h
        up = u.copy()
        up[j] += h
        if scheme == "central":
            dn = u.copy()
            dn[j] -= h
            jac[:, j] = (np.asarray(fn(up)) - np.asarray(fn(dn))) / (2 * h)
        else:
            jac[:, j] = (np.asarray(fn(up)) - f0) / h
    return jac


def _nelder_mead(fn, u0, lower, upper, max_evals=4000):
    """Compact simplex minimizer on the internal coordinates (clipped)."""
    ndim = len(u0)

    def cost(u):
        v = fn(np.clip(u, lower, upper))
        return v if math.isfinite(v) else math.inf

    pts = [np.array(u0, dtype=float)]
    for j in range(ndim):
        p = pts[0].copy()
        p[j] += 0.05 * (abs(p[j]) + 0.1)
        pts.append(p)
    vals = [cost(p) for p in pts]
    evals = len(vals)
    while evals < max_evals:
        order = np.argsort(vals)
        pts = [pts[i] for i in order]
        vals = [vals[i] for i in order]
        if vals[-1] - vals[0] <= 1e-14 * (abs(vals[0]) + 1e-30):
            break
        centroid = np.mean(pts[:-1], axis=0)
        refl = centroid + (centroid - pts[-1])
        fr = cost(refl)
        evals += 1
        if fr < vals[0]:
            exp = centroid + 2.0 * (centroid - pts[-1])
            fe = cost(exp)
            evals += 1
            if fe < fr:
                pts[-1], vals[-1] = exp, fe
            else:
                pts[-1], vals[-1] = refl, fr
        elif fr < vals[-2]:
            pts[-1], vals[-1] = refl, fr
        else:
            contr = centroid + 0.5 * (pts[-1] - centroid)
            fc = cost(contr)
            evals += 1
            if fc < vals[-1]:
                pts[-1], vals[-1] = contr, fc
            else:
                for i in range(1, len(pts)):
                    pts[i] = pts[0] + 0.5 * (pts[i] - pts[0])
                    vals[i] = cost(pts[i])
                evals += ndim
    best = int(np.argmin(vals))
    return np.clip(pts[best], lower, upper), vals[best]


def minimize(problem):
    """Weighted least squares over the free parameters of the problem.

    Returns a FitResult; converged=False flags an iteration-cap stop at the
    best point found. Raises FitError only for an invalid starting point.
    """
    params = problem.params
    free = [p for p in params if not p.frozen]
    if not free:
        raise FitError("no free parameters")
    sigma = problem.data_weights

    full = np.array([p.value for p in params], dtype=float)
    free_idx = [i for i, p in enumerate(params) if not p.frozen]
    n_res = [None]

    def wres(u):
        vec = full.copy()
        for k, i in enumerate(free_idx):
            vec[i] = params[i].from_internal(u[k])
        try:
            r = np.asarray(problem.residual_fn(vec), dtype=float)
        except (ValueError, ArithmeticError, SaturationError,
                StepConvergenceError, np.linalg.LinAlgError):
            # model domain violation at a trial point: reject the step
            if n_res[0] is None:
                raise
            return np.full(n_res[0], np.nan)
        n_res[0] = len(r)
        return r / sigma

    lower = np.array([p.to_internal(max(p.lower, 1e-300))
                      if p.scale == "log" else p.lower for p in free])
    upper = np.array([p.to_internal(p.upper) if p.scale == "log"
                      and math.isfinite(p.upper) else
                      (math.inf if not math.isfinite(p.upper) else p.upper)
                      for p in free])
    u = np.array([p.to_internal(p.value) for p in free])

    f = wres(u)
    if not np.all(np.isfinite(f)):
        raise FitError("residuals not finite at the initial point")
    chi2 = float(f @ f)
    n_pts = len(f)
    if n_pts - len(free) <= 0:
        raise FitError("degrees of freedom must be positive")

    lam = 1e-3
    log = []
    converged = False
    method = "lm"
    stall = 0
    flat = 0

    for it in range(_MAX_ITER):
        try:
            jac = numerical_jacobian(wres, u, lower=lower, upper=upper, f0=f)
        except FloatingPointError:
            jac = None
        if jac is None or not np.all(np.isfinite(jac)):
            method = "lm+simplex"
            u, chi2 = _nelder_mead(lambda v: float(wres(v) @ wres(v)),
                                   u, lower, upper)
            f = wres(u)
            log.append({"iteration": it, "chi2": chi2, "damping": lam,
                        "accepted": True, "note": "simplex fallback"})
            converged = True
            break
        grad = jac.T @ f
        hess = jac.T @ jac
        diag = np.diag(hess).copy()
        floor = 1e-30 * max(float(np.max(diag)), 1e-300)
        diag[diag < floor] = floor
        accepted = False
        degenerate = False
        while True:
            try:
                step = np.linalg.solve(hess + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                degenerate = True
                break
            if not np.all(np.isfinite(step)):
                degenerate = True
                break
            u_try = np.clip(u + step, lower, upper)
            f_try = wres(u_try)
            if np.all(np.isfinite(f_try)):
                chi2_try = float(f_try @ f_try)
                if chi2_try <= chi2:
                    rel_gain = (chi2 - chi2_try) / max(chi2, 1e-300)
                    step_size = float(np.max(np.abs(u_try - u) /
                                             (np.abs(u) + 1.0)))
                    u, f, chi2 = u_try, f_try, chi2_try
                    lam = max(lam / 10.0, _DAMPING_MIN)
                    accepted = True
                    log.append({"iteration": it, "chi2": chi2,
                                "damping": lam, "step": step_size,
                                "accepted": True})
                    # parameters frozen at double resolution: done no
                    # matter what the (noise-floor) chi2 gains look like
                    if step_size < 1e-9:
                        converged = True
                    # sustained statistically insignificant gains: the
                    # remaining motion is along a flat chi2 plateau
                    flat = flat + 1 if rel_gain < 1e-6 else 0
                    if flat >= 3:
                        converged = True
                    break
            if lam >= _DAMPING_MAX:
                break
            lam = min(lam * 10.0, _DAMPING_MAX)
        if degenerate:
            method = "lm+simplex"
            u, chi2 = _nelder_mead(lambda v: float(wres(v) @ wres(v)),
                                   u, lower, upper)
            f = wres(u)
            log.append({"iteration": it, "chi2": chi2, "damping": lam,
                        "accepted": True, "note": "simplex fallback"})
            converged = True
            break
        if not accepted:
            log.append({"iteration": it, "chi2": chi2, "damping": lam,
                        "accepted": False})
            stall += 1
            if stall >= 2:
                converged = True
                break
        else:
            stall = 0
        if converged:
            break

    # covariance at the optimum
    jac = numerical_jacobian(wres, u, lower=lower, upper=upper, f0=f)
    dof = n_pts - len(free)
    chi2_red = chi2 / dof
    hess = jac.T @ jac
    try:
        cov_u = np.linalg.inv(hess) * chi2_red
    except np.linalg.LinAlgError:
        cov_u = np.linalg.pinv(hess) * chi2_red
    sig_u = np.sqrt(np.maximum(np.diag(cov_u), 0.0))

    names = tuple(p.name for p in params)
    values = full.copy()
    sig_full = np.zeros(len(params))
    for k, i in enumerate(free_idx):
        values[i] = params[i].from_internal(u[k])
        if params[i].scale == "log":
            sig_full[i] = sig_u[k] * values[i]
        else:
            sig_full[i] = sig_u[k]
    return FitResult(names=names, values=values, sigma=sig_full,
                     chi2_reduced=chi2_red, n_points=n_pts,
                     convergence_log=log, converged=converged, method=method)


def rolling_sigma(values, window=50):
    """Per-point 1 sigma as the rolling standard deviation of the mean.

    Centered windows, truncated at the edges, minimum 2 points.
    """
    values = np.asarray(values, dtype=float)
    n = len(values)
    out = np.empty(n)
    half = window // 2
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        seg = values[lo:hi]
        if len(seg) < 2:
            lo = max(0, min(i, n - 2))
            seg = values[lo:lo + 2]
        out[i] = np.std(seg, ddof=1) / math.sqrt(len(seg))
    floor = 1e-12 * max(float(np.max(np.abs(values))), 1e-300)
    return np.maximum(out, floor)


@lru_cache(maxsize=4096)
def _unit_class_table(beta, epsilon_s, g_min, g_max, n_classes):
    """(g_i, fraction_i) with fraction = N_i / n_tot; exact in n_tot by the
    linearity of the density."""
    from scipy.integrate import quad
    params = DistributionParams(n_tot=1.0, beta=beta, epsilon_s=epsilon_s,
                                g_min=g_min, g_max=g_max, n_classes=n_classes)
    edges = np.geomspace(g_min, g_max, n_classes + 1)
    table = []
    for k in range(n_classes):
        frac, _ = quad(lambda g: density(g, params), edges[k], edges[k + 1],
                       limit=200)
        table.append((math.sqrt(edges[k] * edges[k + 1]), frac))
    return tuple(table)


def _as_fit_parameter(name, given, default_bounds, scale):
    if isinstance(given, FitParameter):
        return given
    lo, hi = default_bounds
    return FitParameter(name=name, value=float(given), lower=lo,
                        upper=hi, scale=scale)


def joint_tls_fit(traces, shared, per_trace, cavity, *, sigmas=None,
                  g_min=1e-3, g_max=1e3, n_classes=7, m_steps=2000,
                  window_margin=10.0):
    """Simultaneous fit of several ring-down traces in kappa(t) space.

    traces : list of (times, photon_numbers); the first row of each trace is
        the exact reference (t = 0, n0) used both for kappa conversion and as
        the model's initial photon number.
    shared : {"t2_star": init, "beta": init, "epsilon_s": init}; entries may
        be FitParameter instances (e.g. to freeze one).
    per_trace : one n_tot initial value (or FitParameter) per trace.
    sigmas : per-trace 1 sigma arrays aligned with the kappa series
        (len(times) - 1); default 0.01/t, the exact propagation of 1%
        multiplicative amplitude noise.

    The model kappa is evolved on its own m_steps grid and interpolated in
    ln n at the data times. The discretization self-check runs once at the
    initial point and is then disabled inside the loop.
    """
    if not traces:
        raise FitError("need at least one trace")
    if len(per_trace) != len(traces):
        raise FitError("need exactly one n_tot per trace")

    prepared = []
    for idx, (times, values) in enumerate(traces):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times[0] != 0.0:
            raise FitError("trace %d must start with the t = 0 reference row"
                           % idx)
        if np.any(values <= 0):
            raise FitError("trace %d has non-positive photon numbers" % idx)
        t_k, kappa_data = dynamics.kappa_of_time(times, values, 0)
        if sigmas is not None:
            sig = np.asarray(sigmas[idx], dtype=float)
            if len(sig) != len(t_k):
                raise FitError("sigma length mismatch on trace %d" % idx)
        else:
            sig = 0.01 / t_k
        prepared.append((t_k, kappa_data, sig, float(values[0]),
                         float(times[-1])))

    params = [
        _as_fit_parameter("t2_star", shared["t2_star"], (5e-8, 2e-6), "log"),
        _as_fit_parameter("beta", shared["beta"], (1.5, 6.0), "linear"),
        _as_fit_parameter("epsilon_s", shared["epsilon_s"], (0.02, 3.0),
                          "log"),
    ]
    for i, init in enumerate(per_trace):
        params.append(_as_fit_parameter("n_tot_%d" % i, init, (1e3, 1e12),
                                        "log"))

    cache = {}
    verified = [False]

    def trace_kappa(t2, beta, eps, n_tot, idx):
        key = (t2, beta, eps, n_tot, idx)
        hit = cache.get(key)
        if hit is not None:
            return hit
        t_k, _, _, n0, t_final = prepared[idx]
        table = _unit_class_table(beta, eps, g_min, g_max, n_classes)
        classes = [TlsClass.from_t2_star(g, frac * n_tot, cavity.omega0, t2)
                   for g, frac in table]
        traj = dynamics.evolve_ringdown(
            n0, classes, cavity, t_final, m_steps,
            verify=not verified[0], window_margin=window_margin)
        verified[0] = True
        ln_n = np.log(traj.n)
        kappa = -(np.interp(t_k, traj.times, ln_n) - ln_n[0]) / t_k
        cache[key] = kappa
        return kappa

    def residual(vec):
        t2, beta, eps = vec[0], vec[1], vec[2]
        parts = []
        for idx in range(len(prepared)):
            n_tot = vec[3 + idx]
            model = trace_kappa(t2, beta, eps, n_tot, idx)
            parts.append(model - prepared[idx][1])
        return np.concatenate(parts)

    weights = np.concatenate([p[2] for p in prepared])
    problem = FitProblem(residual_fn=residual, params=params,
                         data_weights=weights)
    return minimize(problem)


def temperature_fit(freq_sweep, q_sweep, fixed):
    """Two-stage temperature fit: (alpha, delta0) then (sigma_n, T1, T_phi).

    freq_sweep : (temperatures, normalized shifts, 1 sigma array)
    q_sweep : (temperatures, Q_int values, 1 sigma array)
    fixed : dict with "cavity" (CavityParams), "class_table" (list of
        (g_i, N_i)), "g_factor", and initial values "alpha", "delta0",
        "sigma_n", "t1", "t_phi".

    Stage 1 fits the frequency shift, which is independent of sigma_n; stage
    2 freezes the gap and fits the quasiparticle and TLS-time parameters to
    the Q sweep. Returns one combined FitResult (chi2 of stage 2).
    """
    cavity = fixed["cavity"]
    class_table = list(fixed["class_table"])
    g_factor = float(fixed["g_factor"])
    omega0 = cavity.omega0

    t_f, shift_data, sig_f = (np.asarray(a, dtype=float) for a in freq_sweep)
    t_q, q_data, sig_q = (np.asarray(a, dtype=float) for a in q_sweep)

    def shift_model(vec):
        alpha, delta0 = vec
        sc = mattis_bardeen.SuperconductorParams(
            delta0=delta0, sigma_n=1.0, alpha=alpha, g_factor=g_factor)
        return np.array([mattis_bardeen.freq_shift(t, sc, omega0)
                         for t in t_f]) - shift_data

    stage1 = minimize(FitProblem(
        residual_fn=shift_model,
        params=[
            FitParameter("alpha", fixed["alpha"], 1e-8, 1e-2, "log"),
            FitParameter("delta0", fixed["delta0"], 1e-23, 1e-21, "log"),
        ],
        data_weights=sig_f))
    alpha_fit, delta0_fit = (float(v) for v in stage1.values)

    def q_model(vec):
        sigma_n, t1, t_phi = vec
        sc = mattis_bardeen.SuperconductorParams(
            delta0=delta0_fit, sigma_n=sigma_n, alpha=alpha_fit,
            g_factor=g_factor)
        classes = [TlsClass(g=g, count=n, omega_tls=omega0, T1=t1,
                            T_phi=t_phi) for g, n in class_table]
        return np.array([mattis_bardeen.q_int_temperature(t, sc, classes,
                                                          cavity)
                         for t in t_q]) - q_data

    stage2 = minimize(FitProblem(
        residual_fn=q_model,
        params=[
            FitParameter("sigma_n", fixed["sigma_n"], 1e5, 1e10, "log"),
            FitParameter("t1", fixed["t1"], 1e-9, 1e-4, "log"),
            FitParameter("t_phi", fixed["t_phi"], 1e-9, 1e-4, "log"),
        ],
        data_weights=sig_q))

    names = ("alpha", "delta0", "sigma_n", "t1", "t_phi")
    values = np.concatenate([stage1.values, stage2.values])
    sigma = np.concatenate([stage1.sigma, stage2.sigma])
    log = [{"stage": 1, **rec} for rec in stage1.convergence_log] + \
          [{"stage": 2, **rec} for rec in stage2.convergence_log]
    return FitResult(names=names, values=values, sigma=sigma,
                     chi2_reduced=stage2.chi2_reduced,
                     n_points=len(t_f) + len(t_q), convergence_log=log,
                     converged=stage1.converged and stage2.converged,
                     method="two-stage")
