"""Closed-form first-passage machinery for drifted Brownian motion.

Covers four models:

- one absorbing boundary, constant drift: non-passage density (NPD),
  first-passage-time density (FPTD), defective mass;
- one absorbing boundary, drift mu active on [0, T] and zero afterwards
  (the "single-switch" model): exact FPTD, survival probability past T,
  truncated mean;
- the TADA surrogate density for the same switch model, i.e. the
  constant-drift FPTD evaluated at the gaze-weighted average drift
  alpha(mu, tau, T);
- two absorbing boundaries, constant drift: series FPTD per boundary
  (short-time image sum and long-time eigenfunction sum).

Everything is evaluated through the scaled erfcx where exp/erfc
products appear, so no intermediate overflows for moderate b*mu.
Ties tau == T always resolve to the pre-switch branch.
"""

import math
from dataclasses import dataclass

import numpy as np

from .special import erfc, erfcx

SQRT_2PI = math.sqrt(2.0 * math.pi)

__all__ = [
    "OneBoundaryModel",
    "SwitchModel",
    "TwoBoundaryModel",
    "npd",
    "fptd_one_boundary",
    "fptd_addm_switch",
    "tada_density",
    "tada_tail_mass",
    "survival_after_T",
    "truncated_mean",
    "fptd_two_boundary",
    "absorption_probability",
]


@dataclass(frozen=True)
class OneBoundaryModel:
    """Drifted Brownian motion x0 + mu*t + sigma*W(t) absorbed at level b."""

    x0: float = 0.0
    mu: float = 0.0
    sigma: float = 1.0
    b: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.b == self.x0:
            raise ValueError("boundary must differ from the start position")


@dataclass(frozen=True)
class SwitchModel:
    """Unit-noise Brownian motion from 0 with drift mu on [0, T], 0 after.

    The upper absorbing boundary sits at b > 0.
    """

    mu: float
    b: float = 1.0
    T: float = 0.5

    def __post_init__(self):
        if not self.b > 0:
            raise ValueError("b must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")


@dataclass(frozen=True)
class TwoBoundaryModel:
    """Constant-drift diffusion between absorbing boundaries lower < upper."""

    x0: float
    mu: float
    sigma: float
    upper: float
    lower: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.lower < self.x0 < self.upper:
            raise ValueError("need lower < x0 < upper")


def npd(x, t, model: OneBoundaryModel):
    """Sub-density of the position at time t, jointly with not yet absorbed.

    x must lie on the same side of the boundary as x0 (the density is 0
    at the boundary itself).  Exponents of the direct and image terms
    are combined before exponentiation to stay overflow-safe.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    x0, mu, sig, b = model.x0, model.mu, model.sigma, model.b
    if np.any((x - b) * (x0 - b) < 0):
        raise ValueError("x must be on the same side of the boundary as x0")
    sig2t = sig * sig * t
    e_direct = -((x - x0 - mu * t) ** 2) / (2.0 * sig2t)
    e_image = 2.0 * mu * (b - x0) / (sig * sig) - (x + x0 - 2.0 * b - mu * t) ** 2 / (2.0 * sig2t)
    out = (np.exp(e_direct) - np.exp(e_image)) / (SQRT_2PI * sig * math.sqrt(t))
    # the two exponents coincide at the boundary; pin the rounding residue
    out = np.where(x == b, 0.0, np.maximum(out, 0.0))
    return out if out.ndim else float(out)


def fptd_one_boundary(t, model: OneBoundaryModel):
    """Density of the first hitting time of the boundary (defective if the
    drift points away from it): |b-x0| / sqrt(2 pi sigma^2 t^3) * Gaussian."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    x0, mu, sig, b = model.x0, model.mu, model.sigma, model.b
    d = b - x0
    out = abs(d) / np.sqrt(2.0 * np.pi * sig * sig * t**3) * np.exp(
        -((d - mu * t) ** 2) / (2.0 * sig * sig * t)
    )
    return out if out.ndim else float(out)


def _switch_before(tau, mu, b):
    # pre-switch branch: plain constant-drift FPTD from 0 to b
    return b / np.sqrt(2.0 * np.pi * tau**3) * np.exp(-((b - mu * tau) ** 2) / (2.0 * tau))


def _switch_after(tau, mu, b, T):
    """Post-switch branch of the switch-model FPTD.

    The two erfc products are evaluated as coeff * exp(-(T mu - b)^2 / (2T))
    * erfcx(z) whenever z > 0; the exponents collapse to that form exactly,
    which is what keeps e^{2 b mu (tau-T)/tau} * Erfc(...) finite.
    """
    s = np.sqrt((tau - T) / (2.0 * T * tau))
    zp = (T * mu + b) * s
    zm = (T * mu - b) * s
    e0 = -((T * mu - b) ** 2) / (2.0 * T)
    # np.where evaluates both branches; the discarded one may overflow
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        term_p = np.where(
            zp > 0,
            (T * mu + b) * np.exp(e0) * erfcx(zp),
            (T * mu + b)
            * np.exp(-((T * mu - b) ** 2) / (2.0 * tau) + 2.0 * b * mu * (tau - T) / tau)
            * erfc(zp),
        )
        term_m = np.where(
            zm > 0,
            (T * mu - b) * np.exp(e0) * erfcx(zm),
            (T * mu - b) * np.exp(-((T * mu - b) ** 2) / (2.0 * tau)) * erfc(zm),
        )
    return (term_p - term_m) / (2.0 * np.sqrt(2.0 * np.pi * tau**3))


def fptd_addm_switch(tau, model: SwitchModel):
    """Exact FPTD of the single-switch model; strictly positive on (0, inf).

    tau <= T: constant-drift FPTD.  tau > T: the hitting law restarted
    from the (random) position at T, integrated against the NPD.
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    mu, b, T = model.mu, model.b, model.T
    before = tau <= T
    out = np.empty_like(tau)
    if np.any(before):
        out[before] = _switch_before(tau[before], mu, b)
    if np.any(~before):
        out[~before] = _switch_after(tau[~before], mu, b, T)
    return out if out.ndim else float(out)


def tada_alpha(mu, tau, T):
    """Gaze-weighted average drift up to tau: mu for tau <= T, mu*T/tau after."""
    tau = np.asarray(tau, dtype=float)
    return np.where(tau <= T, mu, mu * T / tau)


def tada_density(tau, model: SwitchModel):
    """TADA surrogate "density": constant-drift FPTD at the averaged drift.

    Identical to the exact density for tau <= T; for tau > T it is not a
    probability density (its total mass differs from 1).
    """
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    mu, b, T = model.mu, model.b, model.T
    a = tada_alpha(mu, tau, T)
    out = b / np.sqrt(2.0 * np.pi * tau**3) * np.exp(-((b - a * tau) ** 2) / (2.0 * tau))
    return out if out.ndim else float(out)


def tada_tail_mass(model: SwitchModel):
    """Closed form for int_T^inf tada_density: b/(T mu - b) * (1 - Erfc(q))
    with q = (T mu - b)/sqrt(2T); the T mu = b limit is sqrt(2/(pi T)) * b."""
    mu, b, T = model.mu, model.b, model.T
    q = (T * mu - b) / math.sqrt(2.0 * T)
    if abs(q) < 1e-6:
        # erf(q)/q expansion keeps the removable singularity smooth
        return b * math.sqrt(2.0 / (math.pi * T)) * (1.0 - q * q / 3.0)
    return b / (T * mu - b) * (1.0 - erfc(q))


def survival_after_T(model: SwitchModel):
    """P(tau > T): (1/2) Erfc(q) - (1/2) e^{2 b mu} Erfc(p), q/p = (T mu -/+ b)/sqrt(2T).

    The exponential-erfc product is rewritten via erfcx (2 b mu = p^2 - q^2)."""
    mu, b, T = model.mu, model.b, model.T
    rt = math.sqrt(2.0 * T)
    q = (T * mu - b) / rt
    p = (T * mu + b) / rt
    if p > 0:
        second = math.exp(-q * q) * erfcx(p)
    else:
        second = math.exp(2.0 * b * mu) * erfc(p)
    return 0.5 * erfc(q) - 0.5 * second


def truncated_mean(model: SwitchModel):
    """E[tau; tau <= T] = (b/mu)(1 - Erfc(q)/2 - e^{2 b mu} Erfc(p)/2).

    The closed form divides by mu; for mu == 0 we integrate
    t * fptd_one_boundary(t) over (0, T] numerically instead.
    """
    mu, b, T = model.mu, model.b, model.T
    if mu == 0.0:
        from .quadrature import integrate

        one = OneBoundaryModel(x0=0.0, mu=0.0, sigma=1.0, b=b)
        return integrate(lambda t: t * fptd_one_boundary(t, one), 0.0, T)
    rt = math.sqrt(2.0 * T)
    q = (T * mu - b) / rt
    p = (T * mu + b) / rt
    if p > 0:
        second = math.exp(-q * q) * erfcx(p)
    else:
        second = math.exp(2.0 * b * mu) * erfc(p)
    return b / mu * (1.0 - 0.5 * erfc(q) - 0.5 * second)


# ---------------------------------------------------------------------------
# two-boundary series density
# ---------------------------------------------------------------------------

_TAIL_REL = 1e-10  # dropped series tail, relative to the retained sum
_TINY = 1e-300


def _nf_small_count(tn, eps):
    # number of image terms for the normalized small-time series
    arg = 2.0 * eps * math.sqrt(2.0 * math.pi * tn)
    if arg < 1.0:
        ks = 2.0 + math.sqrt(-2.0 * tn * math.log(arg))
        return max(ks, math.sqrt(tn) + 1.0)
    return 2.0


def _nf_large_count(tn, eps):
    # number of eigenfunction terms for the normalized large-time series
    arg = math.pi * tn * eps
    if arg < 1.0:
        kl = math.sqrt(-2.0 * math.log(arg) / (math.pi**2 * tn))
        return max(kl, 1.0 / (math.pi * math.sqrt(tn)))
    return 1.0 / (math.pi * math.sqrt(tn))


def _f0_small(tn, w):
    """Normalized driftless hitting density at 0 from w in (0,1): image sum.

    Adds +/-k image pairs until a geometric bound on the dropped tail is
    below _TAIL_REL of the retained sum.
    """
    s = w * math.exp(-w * w / (2.0 * tn))
    k = 1
    while k <= 256:
        c1 = w + 2.0 * k
        c2 = w - 2.0 * k
        s += c1 * math.exp(-c1 * c1 / (2.0 * tn)) + c2 * math.exp(-c2 * c2 / (2.0 * tn))
        # |pair_j| <= 2(2j+1) exp(-(2j-1)^2/(2 tn)), ratio <= (5/3) e^{-4/tn}
        nb = 2.0 * (2.0 * k + 3.0) * math.exp(-((2.0 * k + 1.0) ** 2) / (2.0 * tn))
        ratio = (5.0 / 3.0) * math.exp(-4.0 / tn)
        if ratio < 1.0 and nb / (1.0 - ratio) < _TAIL_REL * max(abs(s), _TINY):
            break
        k += 1
    return s / math.sqrt(2.0 * math.pi * tn**3)


def _f0_large(tn, w):
    """Normalized driftless hitting density at 0 from w: eigenfunction sum."""
    s = 0.0
    k = 1
    while k <= 100000:
        lam = k * k * math.pi * math.pi * tn / 2.0
        s += k * math.exp(-lam) * math.sin(k * math.pi * w)
        nb = (k + 1.0) * math.exp(-((k + 1.0) ** 2) * math.pi * math.pi * tn / 2.0)
        ratio = (k + 2.0) / (k + 1.0) * math.exp(-(2.0 * k + 3.0) * math.pi * math.pi * tn / 2.0)
        if ratio < 1.0 and nb / (1.0 - ratio) < _TAIL_REL * max(abs(s), _TINY):
            break
        k += 1
    return s * math.pi


def _fptd_two_boundary_scalar(t, hit_lower, x0, mu, sigma, upper, lower):
    a = (upper - lower) / sigma
    z0 = (x0 - lower) / sigma
    m = mu / sigma
    if hit_lower:
        z, drift = z0, m
    else:
        z, drift = a - z0, -m
    w = z / a
    tn = t / (a * a)
    # pick the representation needing fewer terms at this normalized time
    if _nf_small_count(tn, 1e-12) < _nf_large_count(tn, 1e-12):
        k = _f0_small(tn, w)
    else:
        k = _f0_large(tn, w)
    log_pref = -drift * z - drift * drift * t / 2.0
    if log_pref < -700.0:
        return 0.0
    return math.exp(log_pref) * k / (a * a)


def fptd_two_boundary(t, choice, model: TwoBoundaryModel):
    """Sub-density of absorption at the named boundary ("upper"/"lower") at t.

    Uses the image-sum series at short times and the eigenfunction series
    at long times; the crossover minimizes the term count and truncation
    drops less than 1e-10 of the retained sum.
    """
    if choice not in ("upper", "lower"):
        raise ValueError("choice must be 'upper' or 'lower'")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr <= 0):
        raise ValueError("t must be positive")
    hit_lower = choice == "lower"
    if t_arr.ndim == 0:
        return _fptd_two_boundary_scalar(
            float(t_arr), hit_lower, model.x0, model.mu, model.sigma, model.upper, model.lower
        )
    return _two_boundary_batch(
        t_arr,
        np.full(t_arr.shape, hit_lower),
        np.full(t_arr.shape, model.mu, dtype=float),
        model.x0,
        model.sigma,
        model.upper,
        model.lower,
    )


def _two_boundary_batch(ts, hit_lower, mus, x0, sigma, upper, lower):
    """Vectorized two-boundary FPTD for per-element (t, mu, boundary).

    Term counts come from the crossover heuristics (evaluated at a
    conservative 1e-12 tolerance); each element is summed with the number
    of terms its branch demands, padded up to the batch maximum.
    """
    ts = np.asarray(ts, dtype=float)
    a = (upper - lower) / sigma
    z0 = (x0 - lower) / sigma
    m = np.asarray(mus, dtype=float) / sigma
    z = np.where(hit_lower, z0, a - z0)
    drift = np.where(hit_lower, m, -m)
    w = z / a
    tn = ts / (a * a)

    ks = 2.0 + np.sqrt(np.maximum(-2.0 * tn * np.log(2e-12 * np.sqrt(2.0 * np.pi * tn)), 0.0))
    ks = np.maximum(ks, np.sqrt(tn) + 1.0)
    kl = np.sqrt(np.maximum(-2.0 * np.log(np.pi * tn * 1e-12), 0.0) / (np.pi**2 * tn))
    kl = np.maximum(kl, 1.0 / (np.pi * np.sqrt(tn)))
    use_small = ks < kl

    out = np.zeros_like(ts)
    if np.any(use_small):
        tn_s, w_s = tn[use_small], w[use_small]
        kmax = int(np.ceil(ks[use_small].max() / 2.0)) + 1
        acc = w_s * np.exp(-(w_s**2) / (2.0 * tn_s))
        for k in range(1, kmax + 1):
            c1 = w_s + 2.0 * k
            c2 = w_s - 2.0 * k
            acc += c1 * np.exp(-(c1**2) / (2.0 * tn_s)) + c2 * np.exp(-(c2**2) / (2.0 * tn_s))
        out[use_small] = acc / np.sqrt(2.0 * np.pi * tn_s**3)
    if np.any(~use_small):
        tn_l, w_l = tn[~use_small], w[~use_small]
        kmax = int(np.ceil(kl[~use_small].max())) + 1
        acc = np.zeros_like(tn_l)
        for k in range(1, kmax + 1):
            acc += k * np.exp(-(k**2) * np.pi**2 * tn_l / 2.0) * np.sin(k * np.pi * w_l)
        out[~use_small] = acc * np.pi
    log_pref = -drift * z - drift * drift * ts / 2.0
    with np.errstate(under="ignore"):
        res = np.where(log_pref < -700.0, 0.0, np.exp(log_pref) * out / (a * a))
    return np.maximum(res, 0.0)


def absorption_probability(choice, model: TwoBoundaryModel):
    """Probability of exiting through the named boundary (gambler's ruin).

    Evaluated through expm1 with all exponents kept negative, for either
    drift sign.
    """
    if choice not in ("upper", "lower"):
        raise ValueError("choice must be 'upper' or 'lower'")
    a = (model.upper - model.lower) / model.sigma
    z0 = (model.x0 - model.lower) / model.sigma
    m = model.mu / model.sigma
    if m == 0.0:
        p_lower = 1.0 - z0 / a
    elif m > 0:
        p_lower = math.exp(-2.0 * m * z0) * math.expm1(-2.0 * m * (a - z0)) / math.expm1(-2.0 * m * a)
    else:
        p_lower = math.expm1(2.0 * m * (a - z0)) / math.expm1(2.0 * m * a)
    return p_lower if choice == "lower" else 1.0 - p_lower
