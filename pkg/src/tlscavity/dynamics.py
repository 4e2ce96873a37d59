"""Closed moment-system evolution: ring-down, ring-up, steady state, kappa(t).

The cavity moment vector a = (n, <a>, <a*>)^T obeys a linear system da/dt =
A_S a + v_S whose coefficients are frozen over each coarse step and rebuilt
from the quasi-steady TLS states at the start of the step. The step itself is
advanced with the exact solution of the frozen system, so the only
discretization error is the freezing of the rates; a halving self-check
asserts the coarse grid sits inside the validity window.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import core, tls_bath
from .errors import SaturationError, StepConvergenceError

_MOMENT_RTOL = 1e-9  # slack on n >= |<a>|^2 for roundoff at the boundary


@dataclass(frozen=True)
class CavityMoments:
    """First and second cavity moments: photon number and field amplitude."""

    n: float
    a_mean: complex

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be >= 0")
        amp2 = abs(self.a_mean) ** 2
        if amp2 > self.n * (1.0 + _MOMENT_RTOL) + 1e-25:
            raise ValueError("moment inequality n >= |<a>|^2 violated")

    @classmethod
    def from_photon_number(cls, n):
        """Ring-down convention: amplitude sqrt(n) with zero phase."""
        return cls(n=float(n), a_mean=complex(math.sqrt(n), 0.0))


@dataclass(frozen=True)
class DriftSystem:
    """Frozen drift of the moment system over one coarse step."""

    a_matrix: np.ndarray
    v_vector: np.ndarray
    kappa_tilde: float


@dataclass(frozen=True)
class Trajectory:
    """Time grid plus per-point moments and bath rates (array backed).

    rates[k] are the rates rebuilt from the state at times[k]; they drive the
    step from k to k+1. The final entry is diagnostic.
    """

    times: np.ndarray
    n: np.ndarray
    a_mean: np.ndarray
    kappa_plus: np.ndarray
    kappa_minus: np.ndarray
    omega_prime: np.ndarray

    @property
    def moments(self):
        return tuple(CavityMoments(n=float(nk), a_mean=complex(ak))
                     for nk, ak in zip(self.n, self.a_mean))

    @property
    def rates(self):
        return tuple(
            tls_bath.BathRates(omega_prime=complex(o), kappa_plus=float(p),
                               kappa_minus=float(m))
            for o, p, m in zip(self.omega_prime, self.kappa_plus,
                               self.kappa_minus))

    def __len__(self):
        return len(self.times)


def build_drift(rates, cavity):
    """Assemble the frozen 3x3 drift and inhomogeneity for one step.

    kappa_tilde = kappa0 + kappa_minus - kappa_plus must stay positive; net
    bath gain has no stable moment solution and aborts the evolution. The
    first inhomogeneity component carries the bare thermal feed kappa0*f in
    addition to the TLS emission (negligible at mK but not at kelvin).
    """
    kt = cavity.kappa0 + rates.kappa_minus - rates.kappa_plus
    if kt <= 0.0:
        raise SaturationError(
            "kappa_tilde = %g <= 0: bath gain exceeds cavity loss" % kt)
    op = rates.omega_prime
    f0 = core.bose_einstein(cavity.omega0, cavity.temperature)
    a_matrix = np.array([
        [-kt, 1j * op, -1j * op.conjugate()],
        [0.0, -0.5 * kt, 0.0],
        [0.0, 0.0, -0.5 * kt],
    ], dtype=complex)
    v_vector = np.array([
        rates.kappa_plus + cavity.kappa0 * f0,
        -1j * op.conjugate(),
        1j * op,
    ], dtype=complex)
    return DriftSystem(a_matrix=a_matrix, v_vector=v_vector, kappa_tilde=kt)


def step_closed_form(prev, rates, cavity, dt):
    """Advance the moments by dt with the exact solution at frozen rates.

    n(dt) = a + b e^{-kt*dt} + c e^{-kt*dt/2} with
        a = v1/kt + 4|O'|^2/kt^2
        c = (4/kt) Re[i O' <a>] - 8|O'|^2/kt^2
        b = n_prev - a - c
    and <a> relaxing to its own fixed point -2i conj(O')/kt at rate kt/2.
    The coherent cross term uses the stored amplitude; for the ring-down
    convention <a> = sqrt(n) it reduces to the sqrt(n_prev) form.
    """
    drift = build_drift(rates, cavity)
    kt = drift.kappa_tilde
    op = rates.omega_prime
    v1 = drift.v_vector[0].real
    amp = complex(prev.a_mean)
    op2 = op.real * op.real + op.imag * op.imag
    a_term = v1 / kt + 4.0 * op2 / (kt * kt)
    c_term = (4.0 / kt) * (1j * op * amp).real - 8.0 * op2 / (kt * kt)
    b_term = prev.n - a_term - c_term
    eh = math.exp(-0.5 * kt * dt)
    ef = eh * eh
    n_new = a_term + b_term * ef + c_term * eh
    if n_new < 0.0:
        if n_new > -1e-25:
            n_new = 0.0
        else:
            raise SaturationError("photon number went negative: %g" % n_new)
    a_ss = -2j * op.conjugate() / kt
    amp_new = a_ss + (amp - a_ss) * eh
    return CavityMoments(n=n_new, a_mean=amp_new)


class _ClassTable:
    """Per-class coefficient arrays frozen over one trajectory.

    Everything temperature- and detuning-dependent is evaluated once; the
    per-step work is a handful of length-n_classes vector operations. The
    output of rates_at() matches tls_bath.bath_rates applied to
    tls_steady_state of every class (asserted in the tests).
    """

    def __init__(self, classes, cavity):
        omega0 = cavity.omega0
        temp = cavity.temperature
        g = np.array([c.g for c in classes], dtype=float)
        count = np.array([c.count for c in classes], dtype=float)
        t2 = np.array([core.t2_star(c.T1, c.T_phi, c.omega_tls, temp)
                       for c in classes], dtype=float)
        f = np.array([core.bose_einstein(c.omega_tls, temp)
                      for c in classes], dtype=float)
        x = np.array([tls_bath.chi(c.omega_tls, omega0, tk)
                      for c, tk in zip(classes, t2)], dtype=complex)
        ax2 = np.abs(x) ** 2
        T1 = np.array([c.T1 for c in classes], dtype=float)
        self.phi = ax2 * (1.0 + 2.0 * f)              # unsaturated D
        self.sat = g * g * T1 * t2                    # D slope in n
        self.w = 2.0 * count * g * g * t2 / ax2       # rate weight
        self.pop0 = ax2 * f                           # thermal population numerator
        self.coh = ax2 * (g * t2) ** 2                # |rho_ge|^2 weight per |A|^2
        self.svec = count * g * g * t2 * x            # Omega' weight per conj(A)
        self.t2max = float(np.max(t2)) if len(classes) else 0.0
        self.f_cav = core.bose_einstein(omega0, temp)
        self.kappa0 = cavity.kappa0

    def rates_at(self, n, amp2):
        """(kappa_plus, kappa_minus, S) from photon number and |<a>|^2.

        Omega' = omega_ext + i conj(<a>) S.
        """
        d = self.phi + self.sat * n
        inv_d = 1.0 / d
        ree = (self.pop0 + 0.5 * self.sat * n) * inv_d
        coh2 = self.coh * amp2 * inv_d * inv_d
        kp = float(np.dot(self.w, ree - coh2))
        km = float(np.dot(self.w, 1.0 - ree - coh2))
        scale = abs(kp) + abs(km) + 1e-30
        if kp < 0.0:
            if -kp <= 1e-3 * scale:
                kp = 0.0
            else:
                raise ValueError("kappa_plus negative beyond tolerance")
        if km < 0.0:
            if -km <= 1e-3 * scale:
                km = 0.0
            else:
                raise ValueError("kappa_minus negative beyond tolerance")
        s = complex(np.sum(self.svec * inv_d))
        return kp, km, s


def _check_window(dt, table, margin):
    lo = margin * table.t2max
    hi = 1.0 / (margin * table.kappa0)
    if dt < lo * (1.0 - 1e-9):
        raise ValueError(
            "step dt = %g below the Markovian window (need >= %g = margin*T2*)"
            % (dt, lo))
    if dt > hi * (1.0 + 1e-9):
        raise ValueError(
            "step dt = %g above the Markovian window (need <= %g = 1/(margin*kappa0))"
            % (dt, hi))


def _default_m_steps(t_final, table):
    dt_rule = max(10.0 * table.t2max, t_final / 1e5)
    k = max(1, math.floor(t_final / dt_rule))
    return k + 1


def _evolve(table, cavity, omega_ext, n0, amp0, t_final, m_pts, pinned):
    times = np.linspace(0.0, t_final, m_pts)
    dt = times[1] - times[0]
    n_arr = np.empty(m_pts, dtype=float)
    a_arr = np.empty(m_pts, dtype=complex)
    kp_arr = np.empty(m_pts, dtype=float)
    km_arr = np.empty(m_pts, dtype=float)
    op_arr = np.empty(m_pts, dtype=complex)
    kappa0 = cavity.kappa0
    feed = kappa0 * table.f_cav
    n = float(n0)
    amp = complex(amp0)
    eps_n = 1e-25
    for k in range(m_pts):
        if pinned:
            amp = complex(math.sqrt(n), 0.0)
        amp2 = amp.real * amp.real + amp.imag * amp.imag
        kp, km, s = table.rates_at(n, amp2)
        op = omega_ext + 1j * amp.conjugate() * s
        n_arr[k] = n
        a_arr[k] = amp
        kp_arr[k] = kp
        km_arr[k] = km
        op_arr[k] = op
        if k == m_pts - 1:
            break
        kt = kappa0 + km - kp
        if kt <= 0.0:
            raise SaturationError(
                "kappa_tilde = %g <= 0 at t = %g" % (kt, times[k]))
        v1 = kp + feed
        op2 = op.real * op.real + op.imag * op.imag
        a_term = v1 / kt + 4.0 * op2 / (kt * kt)
        c_term = (4.0 / kt) * (1j * op * amp).real - 8.0 * op2 / (kt * kt)
        b_term = n - a_term - c_term
        eh = math.exp(-0.5 * kt * dt)
        n = a_term + b_term * (eh * eh) + c_term * eh
        if n < 0.0:
            if n > -eps_n:
                n = 0.0
            else:
                raise SaturationError("photon number went negative: %g" % n)
        a_ss = -2j * op.conjugate() / kt
        amp = a_ss + (amp - a_ss) * eh
    return Trajectory(times=times, n=n_arr, a_mean=a_arr, kappa_plus=kp_arr,
                      kappa_minus=km_arr, omega_prime=op_arr)


def _verified_evolve(table, cavity, omega_ext, n0, amp0, t_final, m_pts,
                     pinned, verify):
    coarse = _evolve(table, cavity, omega_ext, n0, amp0, t_final, m_pts,
                     pinned)
    if verify:
        fine = _evolve(table, cavity, omega_ext, n0, amp0, t_final,
                       2 * (m_pts - 1) + 1, pinned)
        ref = np.maximum(np.abs(coarse.n), 1e-30)
        dev = float(np.max(np.abs(coarse.n - fine.n[::2]) / ref))
        if dev >= 1e-3:
            raise StepConvergenceError(
                "halving dt moved n(t) by %g relative (limit 1e-3)" % dev,
                deviation=dev, resolutions=(m_pts, 2 * (m_pts - 1) + 1))
    return coarse


def evolve_ringdown(initial, classes, cavity, t_final, m_steps=None, *,
                    mode="pinned", verify=True, window_margin=10.0):
    """Free decay of the loaded cavity through the saturable bath.

    initial may be a CavityMoments or a bare photon number (then the
    amplitude convention sqrt(n) at zero phase is applied). mode "pinned"
    resets the amplitude entering the TLS coherences to sqrt(n) at every
    step (the recursive scheme of the reference analysis); "tracked" keeps
    the complex amplitude evolving under its own linear equation. The two
    coincide for a real sqrt(n) start. verify=True reruns at half the step
    and asserts every n(t) moves < 1e-3 relative.
    """
    if not isinstance(initial, CavityMoments):
        initial = CavityMoments.from_photon_number(initial)
    if initial.n <= 0:
        raise ValueError("initial photon number must be > 0")
    if mode not in ("pinned", "tracked"):
        raise ValueError("mode must be 'pinned' or 'tracked'")
    table = _ClassTable(classes, cavity)
    if m_steps is None:
        m_steps = _default_m_steps(t_final, table)
    if m_steps < 2:
        raise ValueError("m_steps must be >= 2")
    dt = t_final / (m_steps - 1)
    _check_window(dt, table, window_margin)
    return _verified_evolve(table, cavity, 0.0, initial.n, initial.a_mean,
                            t_final, m_steps, mode == "pinned", verify)


def evolve_ringup(classes, cavity, omega_ext, t_final, m_steps=None, *,
                  verify=True, window_margin=10.0):
    """Drive the cavity from vacuum toward the driven steady state."""
    omega_ext = complex(omega_ext)
    if abs(omega_ext) <= 0.0:
        raise ValueError("omega_ext must be nonzero for a ring-up")
    table = _ClassTable(classes, cavity)
    if m_steps is None:
        m_steps = _default_m_steps(t_final, table)
    if m_steps < 2:
        raise ValueError("m_steps must be >= 2")
    dt = t_final / (m_steps - 1)
    _check_window(dt, table, window_margin)
    return _verified_evolve(table, cavity, omega_ext, 0.0, 0.0, t_final,
                            m_steps, False, verify)


def steady_state(classes, cavity, omega_ext, *, tol=1e-10, max_iter=10000,
                 damping=0.5):
    """Self-consistent fixed point of the driven moment system.

    Damped iteration n <- (1-l)n + l*map(n) with map(n) = v1/kt +
    4|Omega_ext|^2/|kt + 2S|^2, run from two starting guesses (vacuum and the
    bare-cavity value); disagreement between the two converged points flags
    multiple solutions.
    """
    omega_ext = complex(omega_ext)
    table = _ClassTable(classes, cavity)
    kappa0 = cavity.kappa0
    feed = kappa0 * table.f_cav
    drive2 = omega_ext.real ** 2 + omega_ext.imag ** 2
    bare = 4.0 * drive2 / (kappa0 * kappa0) + feed / kappa0

    def fixed_point(n_start):
        n = float(n_start)
        amp2 = 0.0
        history = []
        for _ in range(max_iter):
            kp, km, s = table.rates_at(n, amp2)
            kt = kappa0 + km - kp
            if kt <= 0.0:
                raise SaturationError("kappa_tilde <= 0 during steady state")
            denom = kt + 2.0 * s
            amp2_map = 4.0 * drive2 / (denom.real ** 2 + denom.imag ** 2)
            n_map = (kp + feed) / kt + amp2_map
            resid = abs(n_map - n) / max(n_map, 1e-300)
            history.append(resid)
            n = (1.0 - damping) * n + damping * n_map
            amp2 = (1.0 - damping) * amp2 + damping * amp2_map
            if resid < tol:
                return n, amp2, history
        raise SaturationError(
            "steady-state iteration did not converge; last residuals %s"
            % history[-5:])

    n_a, _, _ = fixed_point(0.0)
    n_b, amp2_b, _ = fixed_point(bare)
    if abs(n_a - n_b) > 1e-6 * max(n_a, n_b, 1e-300):
        raise SaturationError(
            "multiple steady-state solutions: n = %g and %g" % (n_a, n_b))
    n_fix = n_b
    kp, km, s = table.rates_at(n_fix, amp2_b)
    kt = kappa0 + km - kp
    amp = -2j * omega_ext.conjugate() / (kt + 2.0 * s.conjugate())
    return CavityMoments(n=n_fix, a_mean=amp)


def kappa_of_time(times, values, reference_index=0):
    """Instantaneous-average decay rate kappa(t) = -ln(v/v0)/(t - t0).

    Returns (times_out, kappa) with the reference point excluded. values
    must be strictly positive.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    if times.shape != values.shape:
        raise ValueError("times and values must have the same shape")
    if np.any(values <= 0.0):
        raise ValueError("values must be strictly positive")
    if not 0 <= reference_index < len(times):
        raise ValueError("reference_index out of range")
    t0 = times[reference_index]
    v0 = values[reference_index]
    keep = np.arange(len(times)) != reference_index
    tau = times[keep] - t0
    if np.any(tau == 0.0):
        raise ValueError("duplicate time at the reference point")
    kappa = -np.log(values[keep] / v0) / tau
    return times[keep], kappa


def trajectory_kappa(traj, reference_index=0):
    """kappa(t) series of a trajectory's photon number."""
    return kappa_of_time(traj.times, traj.n, reference_index)


def _fmt(x):
    if isinstance(x, float) and math.isnan(x):
        return "nan"
    return repr(float(x))


def trajectory_csv_rows(traj, reference_index=0):
    """Rows for the trajectory CSV export (header first).

    kappa at the reference point is undefined and written as nan.
    """
    header = ("time_s,n,kappa_t_1_per_s,kappa_plus,kappa_minus,"
              "re_omega_prime,im_omega_prime")
    t0 = traj.times[reference_index]
    v0 = traj.n[reference_index]
    rows = [header]
    for k in range(len(traj.times)):
        if k == reference_index:
            kap = float("nan")
        else:
            kap = -math.log(traj.n[k] / v0) / (traj.times[k] - t0)
        rows.append(",".join([
            _fmt(traj.times[k]), _fmt(traj.n[k]), _fmt(kap),
            _fmt(traj.kappa_plus[k]), _fmt(traj.kappa_minus[k]),
            _fmt(traj.omega_prime[k].real), _fmt(traj.omega_prime[k].imag),
        ]))
    return rows


def write_trajectory_csv(traj, path, reference_index=0):
    with open(path, "w", newline="") as fh:
        fh.write("\n".join(trajectory_csv_rows(traj, reference_index)) + "\n")
