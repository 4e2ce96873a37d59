"""YAML run configuration with documented defaults.

Every physical default is a fitted value from the measured device this
toolkit models, so a bare `tlscavity simulate ...` run reproduces the
reference curves. Validation failures raise ConfigError naming the field.

Schema (all sections and keys optional; values shown are the defaults)::

    cavity:
      f0: 7.9e9            # resonance frequency [Hz]
      kappa0: 537.7        # bare (non-TLS) energy decay rate [1/s]
      kappa_c: 496.4       # coupling contribution to kappa0 [1/s]
      temperature: 0.02    # bath temperature [K]
    tls:                   # coherence times for the pulsed-trace ensemble
      t2_star: 2.86e-7     # [s]; or give t1 and t_phi explicitly
    distribution:
      n_tot: 2.4e6         # total TLS count over [g_min, g_max]
      beta: 3.26           # power-law exponent
      epsilon_s: 0.25      # strength scale [1/s]
      g_min: 1.0e-3        # class window [1/s]
      g_max: 1.0e3
      n_classes: 7
    superconductor:
      delta0_j: 2.45133025002e-22   # gap at T=0 [J] (1.53 meV); or tc [K]
      sigma_n: 4.0e7       # normal-state conductivity [S/m]
      alpha: 3.3e-5        # kinetic inductance fraction
      g_factor: 74.4       # geometric factor [Ohm]
    ringdown:
      n_tot: 1.2e8         # ensemble size for the pulsed traces
      n_tot_per_trace: []  # optional per-trace override (len = #powers)
      initial_photons: [5.0e13, ... ten values, factor sqrt(10) apart]
      t_final: 0.022       # [s]
      m_steps: 4000
      mode: pinned         # or tracked
    ringup:
      q_int: 5.3e8
      q_c: 1.0e8
      delta: 0.8           # drive detuning [Hz]
      p_f: 1.0e-12         # forward power [W]
      t_final: 0.03        # [s]
      n_points: 600
    sweep:                 # temperature sweep and its own (VNA-side) TLS
      t_min: 0.05          # [K]
      t_max: 4.4
      n_points: 88
      tls_n_tot: 5.808e8
      tls_t1: 7.23e-7      # [s]
      tls_t_phi: 4.84e-7
    noise:
      level: 0.01          # multiplicative 1 sigma for synthetic data
    oxide:                 # derived-quantity report inputs
      e_max: 4.549e-3      # field scale [V/m]
      v_ox: 4.86e-12       # oxide volume for tan delta [m^3]
      eps_r: 33.0
      g_threshold: 100.0   # [1/s] counting cut for the volume density
      bandwidth: 537.7     # [1/s] linewidth for the density estimate
      v_ox_field: 2.3e-13  # field-weighted volume for the density [m^3]
    fit:
      m_steps: 2000
      window_margin: 10.0
"""

from dataclasses import dataclass, field

import yaml

from .core import CONSTANTS, CavityParams
from .distribution import DistributionParams, sample_classes
from .errors import ConfigError
from .mattis_bardeen import BCS_RATIO, SuperconductorParams

_DEFAULT_POWERS = tuple(5.0e13 * 10.0 ** (-0.5 * i) for i in range(10))


@dataclass(frozen=True)
class RingdownSettings:
    n_tot: float = 1.2e8
    n_tot_per_trace: tuple = ()
    initial_photons: tuple = _DEFAULT_POWERS
    t_final: float = 0.022
    m_steps: int = 4000
    mode: str = "pinned"

    def __post_init__(self):
        if self.n_tot <= 0:
            raise ValueError("n_tot must be positive")
        if self.t_final <= 0:
            raise ValueError("t_final must be positive")
        if self.m_steps < 2:
            raise ValueError("m_steps must be at least 2")
        if self.mode not in ("pinned", "tracked"):
            raise ValueError("mode must be 'pinned' or 'tracked'")
        if any(p <= 0 for p in self.initial_photons):
            raise ValueError("initial_photons must be positive")
        if self.n_tot_per_trace and \
                len(self.n_tot_per_trace) != len(self.initial_photons):
            raise ValueError("n_tot_per_trace must match initial_photons "
                             "in length")


@dataclass(frozen=True)
class RingupSettings:
    q_int: float = 5.3e8
    q_c: float = 1.0e8
    delta: float = 0.8
    p_f: float = 1.0e-12
    t_final: float = 0.03
    n_points: int = 600

    def __post_init__(self):
        if self.q_int <= 0 or self.q_c <= 0:
            raise ValueError("quality factors must be positive")
        if self.p_f <= 0 or self.t_final <= 0:
            raise ValueError("p_f and t_final must be positive")
        if self.n_points < 4:
            raise ValueError("n_points must be at least 4")


@dataclass(frozen=True)
class SweepSettings:
    t_min: float = 0.05
    t_max: float = 4.4
    n_points: int = 88
    tls_n_tot: float = 5.808e8
    tls_t1: float = 7.23e-7
    tls_t_phi: float = 4.84e-7

    def __post_init__(self):
        if not 0 < self.t_min < self.t_max:
            raise ValueError("need 0 < t_min < t_max")
        if self.n_points < 2:
            raise ValueError("n_points must be at least 2")
        if self.tls_n_tot < 0:
            raise ValueError("tls_n_tot must be non-negative")
        if self.tls_t1 <= 0 or self.tls_t_phi <= 0:
            raise ValueError("TLS times must be positive")


@dataclass(frozen=True)
class OxideSettings:
    e_max: float = 4.549e-3
    v_ox: float = 4.86e-12
    eps_r: float = 33.0
    g_threshold: float = 100.0
    bandwidth: float = 537.7
    v_ox_field: float = 2.3e-13

    def __post_init__(self):
        for name in ("e_max", "v_ox", "eps_r", "g_threshold", "bandwidth",
                     "v_ox_field"):
            if getattr(self, name) <= 0:
                raise ValueError("%s must be positive" % name)


@dataclass(frozen=True)
class FitSettings:
    m_steps: int = 2000
    window_margin: float = 10.0

    def __post_init__(self):
        if self.m_steps < 2:
            raise ValueError("m_steps must be at least 2")
        if self.window_margin <= 0:
            raise ValueError("window_margin must be positive")


@dataclass(frozen=True)
class RunConfig:
    cavity: CavityParams = field(
        default_factory=lambda: CavityParams(
            f0=7.9e9, kappa0=537.7, kappa_c=496.4, temperature=0.02))
    tls_t1: float = None
    tls_t_phi: float = None
    tls_t2_star: float = 2.86e-7
    distribution: DistributionParams = field(
        default_factory=lambda: DistributionParams(
            n_tot=2.4e6, beta=3.26, epsilon_s=0.25, g_min=1.0e-3,
            g_max=1.0e3, n_classes=7))
    superconductor: SuperconductorParams = field(
        default_factory=lambda: SuperconductorParams(
            delta0=2.45133025002e-22, sigma_n=4.0e7, alpha=3.3e-5,
            g_factor=74.4))
    ringdown: RingdownSettings = field(default_factory=RingdownSettings)
    ringup: RingupSettings = field(default_factory=RingupSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    noise_level: float = 0.01
    oxide: OxideSettings = field(default_factory=OxideSettings)
    fit: FitSettings = field(default_factory=FitSettings)

    def trace_classes(self, n_tot=None, distribution=None):
        """TLS classes for the pulsed-trace ensemble (tls section times)."""
        dist = distribution if distribution is not None else self.distribution
        if n_tot is not None:
            dist = DistributionParams(
                n_tot=n_tot, beta=dist.beta, epsilon_s=dist.epsilon_s,
                g_min=dist.g_min, g_max=dist.g_max, n_classes=dist.n_classes)
        if self.tls_t2_star is not None:
            return sample_classes(dist, omega_tls=self.cavity.omega0,
                                  t2_star=self.tls_t2_star)
        return sample_classes(dist, omega_tls=self.cavity.omega0,
                              T1=self.tls_t1, T_phi=self.tls_t_phi)

    def sweep_classes(self):
        """TLS classes for the temperature model (sweep section)."""
        dist = DistributionParams(
            n_tot=self.sweep.tls_n_tot, beta=self.distribution.beta,
            epsilon_s=self.distribution.epsilon_s,
            g_min=self.distribution.g_min, g_max=self.distribution.g_max,
            n_classes=self.distribution.n_classes)
        return sample_classes(dist, omega_tls=self.cavity.omega0,
                              T1=self.sweep.tls_t1,
                              T_phi=self.sweep.tls_t_phi)

    def as_dict(self):
        """Fully resolved configuration for the run manifest."""
        return {
            "cavity": {"f0": self.cavity.f0, "kappa0": self.cavity.kappa0,
                       "kappa_c": self.cavity.kappa_c,
                       "temperature": self.cavity.temperature},
            "tls": ({"t2_star": self.tls_t2_star}
                    if self.tls_t2_star is not None
                    else {"t1": self.tls_t1, "t_phi": self.tls_t_phi}),
            "distribution": {
                "n_tot": self.distribution.n_tot,
                "beta": self.distribution.beta,
                "epsilon_s": self.distribution.epsilon_s,
                "g_min": self.distribution.g_min,
                "g_max": self.distribution.g_max,
                "n_classes": self.distribution.n_classes},
            "superconductor": {
                "delta0_j": self.superconductor.delta0,
                "sigma_n": self.superconductor.sigma_n,
                "alpha": self.superconductor.alpha,
                "g_factor": self.superconductor.g_factor},
            "ringdown": {
                "n_tot": self.ringdown.n_tot,
                "n_tot_per_trace": list(self.ringdown.n_tot_per_trace),
                "initial_photons": list(self.ringdown.initial_photons),
                "t_final": self.ringdown.t_final,
                "m_steps": self.ringdown.m_steps,
                "mode": self.ringdown.mode},
            "ringup": {"q_int": self.ringup.q_int, "q_c": self.ringup.q_c,
                       "delta": self.ringup.delta, "p_f": self.ringup.p_f,
                       "t_final": self.ringup.t_final,
                       "n_points": self.ringup.n_points},
            "sweep": {"t_min": self.sweep.t_min, "t_max": self.sweep.t_max,
                      "n_points": self.sweep.n_points,
                      "tls_n_tot": self.sweep.tls_n_tot,
                      "tls_t1": self.sweep.tls_t1,
                      "tls_t_phi": self.sweep.tls_t_phi},
            "noise": {"level": self.noise_level},
            "oxide": {"e_max": self.oxide.e_max, "v_ox": self.oxide.v_ox,
                      "eps_r": self.oxide.eps_r,
                      "g_threshold": self.oxide.g_threshold,
                      "bandwidth": self.oxide.bandwidth,
                      "v_ox_field": self.oxide.v_ox_field},
            "fit": {"m_steps": self.fit.m_steps,
                    "window_margin": self.fit.window_margin},
        }


def _as_float(section, key, value):
    if isinstance(value, bool) or value is None:
        raise ConfigError("%s.%s: expected a number, found %r"
                          % (section, key, value))
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError("%s.%s: expected a number, found %r"
                          % (section, key, value)) from None


def _as_int(section, key, value):
    f = _as_float(section, key, value)
    if f != int(f):
        raise ConfigError("%s.%s: expected an integer, found %r"
                          % (section, key, value))
    return int(f)


def _section(raw, name, known):
    sec = raw.pop(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigError("%s: expected a mapping" % name)
    for key in sec:
        if key not in known:
            raise ConfigError("%s.%s: unknown field (known: %s)"
                              % (name, key, ", ".join(sorted(known))))
    return sec


def _build(section, cls, values):
    try:
        return cls(**values)
    except (ValueError, TypeError) as exc:
        raise ConfigError("%s: %s" % (section, exc)) from exc


def load_config(path=None):
    """Load a RunConfig from a YAML file; path=None gives pure defaults."""
    raw = {}
    if path is not None:
        try:
            with open(path) as handle:
                raw = yaml.safe_load(handle)
        except OSError as exc:
            raise ConfigError("cannot open config %s: %s" % (path, exc)) \
                from exc
        except yaml.YAMLError as exc:
            raise ConfigError("cannot parse config %s: %s" % (path, exc)) \
                from exc
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping")

    defaults = RunConfig()

    sec = _section(raw, "cavity", {"f0", "kappa0", "kappa_c", "temperature"})
    cav_kw = {k: _as_float("cavity", k, v) for k, v in sec.items()}
    base = defaults.cavity
    cavity = _build("cavity", CavityParams, {
        "f0": cav_kw.get("f0", base.f0),
        "kappa0": cav_kw.get("kappa0", base.kappa0),
        "kappa_c": cav_kw.get("kappa_c", base.kappa_c),
        "temperature": cav_kw.get("temperature", base.temperature)})

    sec = _section(raw, "tls", {"t1", "t_phi", "t2_star"})
    if "t2_star" in sec and ("t1" in sec or "t_phi" in sec):
        raise ConfigError("tls: give either t2_star or the t1/t_phi pair, "
                          "not both")
    if "t1" in sec or "t_phi" in sec:
        if not ("t1" in sec and "t_phi" in sec):
            raise ConfigError("tls: t1 and t_phi must be given together")
        t1 = _as_float("tls", "t1", sec["t1"])
        t_phi = _as_float("tls", "t_phi", sec["t_phi"])
        if t1 <= 0 or t_phi <= 0:
            raise ConfigError("tls: t1 and t_phi must be positive")
        tls_t1, tls_t_phi, tls_t2 = t1, t_phi, None
    else:
        tls_t2 = _as_float("tls", "t2_star",
                           sec.get("t2_star", defaults.tls_t2_star))
        if tls_t2 <= 0:
            raise ConfigError("tls: t2_star must be positive")
        tls_t1 = tls_t_phi = None

    sec = _section(raw, "distribution", {"n_tot", "beta", "epsilon_s",
                                         "g_min", "g_max", "n_classes"})
    base = defaults.distribution
    distribution = _build("distribution", DistributionParams, {
        "n_tot": _as_float("distribution", "n_tot",
                           sec.get("n_tot", base.n_tot)),
        "beta": _as_float("distribution", "beta", sec.get("beta", base.beta)),
        "epsilon_s": _as_float("distribution", "epsilon_s",
                               sec.get("epsilon_s", base.epsilon_s)),
        "g_min": _as_float("distribution", "g_min",
                           sec.get("g_min", base.g_min)),
        "g_max": _as_float("distribution", "g_max",
                           sec.get("g_max", base.g_max)),
        "n_classes": _as_int("distribution", "n_classes",
                             sec.get("n_classes", base.n_classes))})

    sec = _section(raw, "superconductor", {"delta0_j", "tc", "sigma_n",
                                           "alpha", "g_factor"})
    base = defaults.superconductor
    if "delta0_j" in sec and "tc" in sec:
        raise ConfigError("superconductor: give either delta0_j or tc, "
                          "not both")
    if "tc" in sec:
        delta0 = BCS_RATIO * CONSTANTS.k_b * _as_float(
            "superconductor", "tc", sec["tc"])
    else:
        delta0 = _as_float("superconductor", "delta0_j",
                           sec.get("delta0_j", base.delta0))
    superconductor = _build("superconductor", SuperconductorParams, {
        "delta0": delta0,
        "sigma_n": _as_float("superconductor", "sigma_n",
                             sec.get("sigma_n", base.sigma_n)),
        "alpha": _as_float("superconductor", "alpha",
                           sec.get("alpha", base.alpha)),
        "g_factor": _as_float("superconductor", "g_factor",
                              sec.get("g_factor", base.g_factor))})

    sec = _section(raw, "ringdown", {"n_tot", "n_tot_per_trace",
                                     "initial_photons", "t_final",
                                     "m_steps", "mode"})
    base = defaults.ringdown
    powers = sec.get("initial_photons", list(base.initial_photons))
    if not isinstance(powers, (list, tuple)) or not powers:
        raise ConfigError("ringdown.initial_photons: expected a non-empty "
                          "list")
    powers = tuple(_as_float("ringdown", "initial_photons", p)
                   for p in powers)
    per_trace = sec.get("n_tot_per_trace", list(base.n_tot_per_trace))
    if per_trace is None:
        per_trace = []
    if not isinstance(per_trace, (list, tuple)):
        raise ConfigError("ringdown.n_tot_per_trace: expected a list")
    per_trace = tuple(_as_float("ringdown", "n_tot_per_trace", v)
                      for v in per_trace)
    mode = sec.get("mode", base.mode)
    if not isinstance(mode, str):
        raise ConfigError("ringdown.mode: expected a string")
    ringdown = _build("ringdown", RingdownSettings, {
        "n_tot": _as_float("ringdown", "n_tot", sec.get("n_tot",
                                                        base.n_tot)),
        "n_tot_per_trace": per_trace,
        "initial_photons": powers,
        "t_final": _as_float("ringdown", "t_final",
                             sec.get("t_final", base.t_final)),
        "m_steps": _as_int("ringdown", "m_steps",
                           sec.get("m_steps", base.m_steps)),
        "mode": mode})

    sec = _section(raw, "ringup", {"q_int", "q_c", "delta", "p_f",
                                   "t_final", "n_points"})
    base = defaults.ringup
    ringup = _build("ringup", RingupSettings, {
        "q_int": _as_float("ringup", "q_int", sec.get("q_int", base.q_int)),
        "q_c": _as_float("ringup", "q_c", sec.get("q_c", base.q_c)),
        "delta": _as_float("ringup", "delta", sec.get("delta", base.delta)),
        "p_f": _as_float("ringup", "p_f", sec.get("p_f", base.p_f)),
        "t_final": _as_float("ringup", "t_final",
                             sec.get("t_final", base.t_final)),
        "n_points": _as_int("ringup", "n_points",
                            sec.get("n_points", base.n_points))})

    sec = _section(raw, "sweep", {"t_min", "t_max", "n_points", "tls_n_tot",
                                  "tls_t1", "tls_t_phi"})
    base = defaults.sweep
    sweep = _build("sweep", SweepSettings, {
        "t_min": _as_float("sweep", "t_min", sec.get("t_min", base.t_min)),
        "t_max": _as_float("sweep", "t_max", sec.get("t_max", base.t_max)),
        "n_points": _as_int("sweep", "n_points",
                            sec.get("n_points", base.n_points)),
        "tls_n_tot": _as_float("sweep", "tls_n_tot",
                               sec.get("tls_n_tot", base.tls_n_tot)),
        "tls_t1": _as_float("sweep", "tls_t1",
                            sec.get("tls_t1", base.tls_t1)),
        "tls_t_phi": _as_float("sweep", "tls_t_phi",
                               sec.get("tls_t_phi", base.tls_t_phi))})

    sec = _section(raw, "noise", {"level"})
    noise_level = _as_float("noise", "level",
                            sec.get("level", defaults.noise_level))
    if noise_level < 0:
        raise ConfigError("noise.level: must be non-negative")

    sec = _section(raw, "oxide", {"e_max", "v_ox", "eps_r", "g_threshold",
                                  "bandwidth", "v_ox_field"})
    base = defaults.oxide
    oxide = _build("oxide", OxideSettings, {
        k: _as_float("oxide", k, sec.get(k, getattr(base, k)))
        for k in ("e_max", "v_ox", "eps_r", "g_threshold", "bandwidth",
                  "v_ox_field")})

    sec = _section(raw, "fit", {"m_steps", "window_margin"})
    base = defaults.fit
    fit = _build("fit", FitSettings, {
        "m_steps": _as_int("fit", "m_steps",
                           sec.get("m_steps", base.m_steps)),
        "window_margin": _as_float("fit", "window_margin",
                                   sec.get("window_margin",
                                           base.window_margin))})

    if raw:
        raise ConfigError("unknown top-level section(s): %s"
                          % ", ".join(sorted(raw)))

    return RunConfig(cavity=cavity, tls_t1=tls_t1, tls_t_phi=tls_t_phi,
                     tls_t2_star=tls_t2, distribution=distribution,
                     superconductor=superconductor, ringdown=ringdown,
                     ringup=ringup, sweep=sweep, noise_level=noise_level,
                     oxide=oxide, fit=fit)
