"""Quasi-steady TLS bath: per-class density matrix and summed back-action.

Between coarse time steps each TLS class relaxes to the steady state of its
Bloch equations under the instantaneous cavity field, so the bath acts on the
cavity moments only through three numbers per step: an emission rate
kappa_plus, an absorption rate kappa_minus, and a coherent drive correction
added to Omega'. All classes are treated resonantly (chi = 1) unless a cavity
frequency is supplied; the detuning factor chi is kept in every formula.
"""

import math
from dataclasses import dataclass

from . import core

# The quasi-steady closed forms overshoot the coherence-population bound by
# O(2 T2*/T1 - 1) at small n; 0.3% for the measured T1, T_phi pair.
_POSITIVITY_RTOL = 1e-2
# Negative rate magnitudes below this fraction of the positive scale are
# rounded to zero (same closed-form overshoot); larger ones are real errors.
_CLAMP_RTOL = 1e-3


@dataclass(frozen=True)
class TlsState:
    """Quasi-steady density matrix of one TLS class.

    rho_ee : excited-state population
    rho_ge : coherence <g|rho|e>
    """

    rho_ee: float
    rho_ge: complex

    def __post_init__(self):
        if not 0.0 <= self.rho_ee <= 1.0:
            raise ValueError("rho_ee must lie in [0, 1]")
        bound = self.rho_ee * (1.0 - self.rho_ee)
        if abs(self.rho_ge) ** 2 > bound * (1.0 + _POSITIVITY_RTOL) + 1e-30:
            raise ValueError("|rho_ge|^2 exceeds rho_ee*rho_gg beyond tolerance")

    @property
    def rho_gg(self):
        return 1.0 - self.rho_ee


@dataclass(frozen=True)
class BathRates:
    """Summed TLS back-action on the cavity for one coarse step.

    omega_prime : external drive plus coherent TLS scattering [1/s]
    kappa_plus : photon emission into the cavity [1/s]
    kappa_minus : photon absorption from the cavity [1/s]
    """

    omega_prime: complex
    kappa_plus: float
    kappa_minus: float

    def __post_init__(self):
        if self.kappa_plus < 0.0 or self.kappa_minus < 0.0:
            raise ValueError("bath rates must be non-negative")


def chi(omega_tls, omega0, t2_star):
    """Detuning factor chi = 1 + i(omega_tls - omega0)*T2*."""
    if not t2_star > 0:
        raise ValueError("t2_star must be > 0")
    return complex(1.0, (omega_tls - omega0) * t2_star)


def tls_steady_state(cls, n, temperature, omega0=None):
    """Quasi-steady TLS state under a cavity field of n photons.

    With D = |chi|^2 (1 + 2f) + g^2 n T1 T2*:

        rho_ee = (|chi|^2 f + g^2 n T1 T2* / 2) / D
        rho_ge = i chi g sqrt(n) T2* / D

    f is the thermal occupation at the TLS frequency. omega0 = None keeps the
    resonant approximation chi = 1 (default); passing the cavity frequency
    turns on the detuning factor.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    f = core.bose_einstein(cls.omega_tls, temperature)
    t2 = core.t2_star(cls.T1, cls.T_phi, cls.omega_tls, temperature)
    if omega0 is None:
        x = complex(1.0, 0.0)
    else:
        x = chi(cls.omega_tls, omega0, t2)
    ax2 = x.real * x.real + x.imag * x.imag
    gsq = cls.g * cls.g
    d = ax2 * (1.0 + 2.0 * f) + gsq * n * cls.T1 * t2
    rho_ee = (ax2 * f + 0.5 * gsq * n * cls.T1 * t2) / d
    rho_ge = 1j * x * cls.g * math.sqrt(n) * t2 / d
    return TlsState(rho_ee=rho_ee, rho_ge=rho_ge)


def _clamped(value, scale, name):
    if value >= 0.0:
        return value
    if -value <= _CLAMP_RTOL * scale + 1e-30:
        return 0.0
    raise ValueError("%s negative beyond tolerance: %g" % (name, value))


def bath_rates(classes, states, omega_ext, omega0, temperature):
    """Sum per-class states into the three bath rates.

    kappa_plus/minus carry the weight 2 N g^2 T2* / |chi|^2 per class;
    Omega' = Omega_ext + sum_i N_i g_i rho_ge,i. Summation uses fsum so the
    result is independent of class ordering at machine precision.
    """
    if len(classes) != len(states):
        raise ValueError("classes and states must align one-to-one")
    kp_terms = []
    km_terms = []
    op_re = []
    op_im = []
    for cls, st in zip(classes, states):
        t2 = core.t2_star(cls.T1, cls.T_phi, cls.omega_tls, temperature)
        x = chi(cls.omega_tls, omega0, t2)
        ax2 = x.real * x.real + x.imag * x.imag
        w = 2.0 * cls.count * cls.g * cls.g * t2 / ax2
        coh2 = abs(st.rho_ge) ** 2
        kp_terms.append(w * (st.rho_ee - coh2))
        km_terms.append(w * (st.rho_gg - coh2))
        term = cls.count * cls.g * st.rho_ge
        op_re.append(term.real)
        op_im.append(term.imag)
    kp = math.fsum(kp_terms)
    km = math.fsum(km_terms)
    scale = abs(kp) + abs(km)
    kp = _clamped(kp, scale, "kappa_plus")
    km = _clamped(km, scale, "kappa_minus")
    op = complex(omega_ext) + complex(math.fsum(op_re), math.fsum(op_im))
    return BathRates(omega_prime=op, kappa_plus=kp, kappa_minus=km)
