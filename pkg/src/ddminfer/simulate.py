"""Synthetic data generation: paths to absorption, fixations, ratings.

Reproducibility contract: every sampler is a pure function of
(seed, stream_id, parameters).  Trial i of a dataset uses stream_id = i
with a counter-based generator (Philox), so datasets are bit-identical
across runs, platforms and any parallel scheduling.  Within a trial,
noise, fixations and ratings draw from separate substreams, so lazily
extending a fixation trajectory never perturbs the noise sequence.

Euler-Maruyama absorption is recorded at the first grid point at or
beyond the boundary (no bridge correction).  For the one-boundary
switch model the drift vanishes after the switch; the remaining hitting
time of the driftless phase is drawn from its exact law
(b - x)^2 / Z^2 instead of stepping (its mean is infinite, so stepping
to absorption is not an option).
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import SwitchModel

__all__ = [
    "RngSeed",
    "FixationConfig",
    "FixationTrajectory",
    "Trial",
    "sample_fixations",
    "sample_ratings",
    "simulate_one_boundary",
    "simulate_switch_taus",
    "simulate_switch_taus_pooled",
    "simulate_two_boundary",
    "simulate_two_drift_dataset",
    "simulate_addm_dataset",
    "attention_drift",
    "write_trials",
    "read_trials",
]

# substream tags; changing these invalidates stored datasets
_NOISE, _FIXATIONS, _RATINGS = 0, 1, 2

# gamma fixation defaults: shape fixed at 2, rate calibrated so the
# two-drift experiment averages ~3.806 fixations per decision
# (scripts/calibrate_fixations.py reproduces the search)
FIX_SHAPE_DEFAULT = 2.0
FIX_RATE_DEFAULT = 3.221

_MAX_STEPS = 200_000_000  # hard sanity cap for two-boundary stepping


@dataclass(frozen=True)
class RngSeed:
    """Identifies one reproducible random stream: (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def generator(self, substream=0):
        ss = np.random.SeedSequence((self.seed, self.stream_id, substream))
        return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True)
class FixationConfig:
    """Gamma fixation-duration law (shape, rate); first option is fair."""

    shape: float = FIX_SHAPE_DEFAULT
    rate: float = FIX_RATE_DEFAULT

    def __post_init__(self):
        if self.shape <= 0 or self.rate <= 0:
            raise ValueError("gamma shape and rate must be positive")


@dataclass
class FixationTrajectory:
    """Alternating gaze segments: (option, duration) with options in {A, B}."""

    options: tuple
    durations: np.ndarray

    def __post_init__(self):
        self.options = tuple(self.options)
        self.durations = np.asarray(self.durations, dtype=float)
        if len(self.options) != len(self.durations):
            raise ValueError("options and durations must align")
        if np.any(self.durations <= 0):
            raise ValueError("durations must be strictly positive")
        if any(o not in ("A", "B") for o in self.options):
            raise ValueError("options must be 'A' or 'B'")
        if any(a == b for a, b in zip(self.options, self.options[1:])):
            raise ValueError("consecutive segments must alternate options")

    @property
    def total_duration(self):
        return float(self.durations.sum())

    def breakpoints(self):
        """Switch times strictly inside (0, total_duration)."""
        return np.cumsum(self.durations)[:-1]

    def time_per_option(self, tau=None):
        """(time on A, time on B) within [0, tau] (default: full trajectory)."""
        if tau is None:
            tau = self.total_duration
        t_a = 0.0
        start = 0.0
        for opt, d in zip(self.options, self.durations):
            seg = min(d, max(tau - start, 0.0))
            if opt == "A":
                t_a += seg
            start += d
            if start >= tau:
                break
        return t_a, min(tau, start) - t_a


@dataclass
class Trial:
    """One observed decision: time, boundary, and its covariates."""

    tau: float
    choice: str
    fixations: FixationTrajectory
    r_a: int = 0
    r_b: int = 0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.choice not in ("upper", "lower"):
            raise ValueError("choice must be 'upper' or 'lower'")


def attention_drift(option, r_a, r_b, eta, kappa):
    """Drift while fixating ``option``: kappa (r_A - eta r_B) on A,
    kappa (eta r_A - r_B) on B."""
    if option == "A":
        return kappa * (r_a - eta * r_b)
    if option == "B":
        return kappa * (eta * r_a - r_b)
    raise ValueError("option must be 'A' or 'B'")


def sample_fixations(rng: RngSeed, cfg: FixationConfig = FixationConfig(), horizon=10.0):
    """Alternating fixation trajectory covering at least ``horizon``.

    Regenerating with a larger horizon extends the same trajectory: the
    draws come from the trajectory's own substream in a fixed order.
    """
    gen = rng.generator(_FIXATIONS)
    first = "A" if gen.random() < 0.5 else "B"
    options, durations = [], []
    cum = 0.0
    opt = first
    while cum < horizon:
        d = gen.gamma(cfg.shape, 1.0 / cfg.rate)
        options.append(opt)
        durations.append(d)
        cum += d
        opt = "B" if opt == "A" else "A"
    return FixationTrajectory(tuple(options), np.array(durations))


def sample_ratings(rng: RngSeed):
    """Independent uniform ratings on {1, ..., 5}."""
    gen = rng.generator(_RATINGS)
    r = gen.integers(1, 6, size=2)
    return int(r[0]), int(r[1])


def simulate_one_boundary(model: SwitchModel, dt, rng: RngSeed):
    """First passage time of the switch model to its upper boundary.

    Euler-Maruyama on [0, T] (X <- X + mu dt + sqrt(dt) N), absorption at
    the first grid time with X >= b; if still below b at T, the
    remaining zero-drift hitting time is exact: (b - X_T)^2 / Z^2.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    gen = rng.generator(_NOISE)
    return _one_boundary_core(model, dt, gen)


def _one_boundary_core(model, dt, gen):
    mu, b, T = model.mu, model.b, model.T
    n1 = max(1, int(round(T / dt)))
    dte = T / n1
    z = gen.standard_normal(n1)
    x = np.cumsum(mu * dte + math.sqrt(dte) * z)
    hit = x >= b
    if hit.any():
        return float((int(np.argmax(hit)) + 1) * dte)
    z2 = gen.standard_normal()
    while z2 == 0.0:
        z2 = gen.standard_normal()
    return float(T + ((b - x[-1]) / z2) ** 2)


def simulate_switch_taus(n, model: SwitchModel, dt, seed):
    """Dataset of n i.i.d. first passage times; trial i uses stream_id=i."""
    return np.array(
        [simulate_one_boundary(model, dt, RngSeed(seed, i)) for i in range(n)]
    )


def simulate_switch_taus_pooled(n, model: SwitchModel, dt, seed):
    """Fast single-stream variant for large Monte Carlo cross-checks.

    Same law as ``simulate_switch_taus`` but all trials share one stream
    and step in lockstep, so it does not honor the per-trial stream
    layout (use only where the dataset identity does not matter).
    """
    gen = RngSeed(seed, 0).generator(_NOISE)
    mu, b, T = model.mu, model.b, model.T
    n1 = max(1, int(round(T / dt)))
    dte = T / n1
    sq = math.sqrt(dte)
    tau = np.empty(n)
    idx = np.arange(n)
    x = np.zeros(n)
    for k in range(n1):
        x = x + mu * dte + sq * gen.standard_normal(idx.size)
        crossed = x >= b
        if crossed.any():
            tau[idx[crossed]] = (k + 1) * dte
            keep = ~crossed
            idx = idx[keep]
            x = x[keep]
    if idx.size:
        z = gen.standard_normal(idx.size)
        z[z == 0.0] = 1e-300
        tau[idx] = T + ((b - x) / z) ** 2
    return tau


def simulate_two_boundary(drift, x0, sigma, upper, lower, dt, rng: RngSeed, block=4096):
    """Euler-Maruyama to the first exit from (lower, upper).

    ``drift`` is a PiecewiseDrift; its terminal value applies past the
    last breakpoint, so the schedule is defined for any horizon.
    Returns (tau, choice) with tau on the dt grid.
    """
    if not lower < x0 < upper:
        raise ValueError("need lower < x0 < upper")
    if not dt > 0:
        raise ValueError("dt must be positive")
    gen = rng.generator(_NOISE)
    bps = np.asarray(drift.breakpoints)
    vals = np.asarray(drift.values)
    sdt = sigma * math.sqrt(dt)
    x = x0
    k0 = 0
    while True:
        t_left = k0 * dt + dt * np.arange(block)
        mu = vals[np.searchsorted(bps, t_left, side="right")]
        z = gen.standard_normal(block)
        path = x + np.cumsum(mu * dt + sdt * z)
        above = path >= upper
        below = path <= lower
        hit = above | below
        if hit.any():
            i = int(np.argmax(hit))
            tau = (k0 + i + 1) * dt
            return float(tau), ("upper" if above[i] else "lower")
        x = path[-1]
        k0 += block
        if k0 > _MAX_STEPS:
            raise RuntimeError("no absorption after an implausible number of steps")


def _run_fixation_trial(noise_gen, fix_gen, fix_cfg, drift_of, x0, sigma, upper, lower, dt):
    """EM between two boundaries with gaze-driven drift, extending the
    fixation sequence lazily until absorption.

    Returns (tau, choice, consumed trajectory); the last consumed
    fixation is trimmed so the trajectory's total duration equals tau.
    """
    options, durations = [], []
    opt = "A" if fix_gen.random() < 0.5 else "B"
    sdt = sigma * math.sqrt(dt)
    x = x0
    cum = 0.0
    k_done = 0  # EM steps completed so far
    while True:
        d = fix_gen.gamma(fix_cfg.shape, 1.0 / fix_cfg.rate)
        options.append(opt)
        durations.append(d)
        cum += d
        k_end = int(math.ceil(cum / dt - 1e-12))
        n = k_end - k_done
        if n > 0:
            mu = drift_of(opt)
            z = noise_gen.standard_normal(n)
            path = x + np.cumsum(mu * dt + sdt * z)
            above = path >= upper
            below = path <= lower
            hit = above | below
            if hit.any():
                i = int(np.argmax(hit))
                tau = (k_done + i + 1) * dt
                choice = "upper" if above[i] else "lower"
                # trim the absorbing fixation so the consumed prefix sums to tau
                # (steps of fixation j start at or after its onset, so this is > 0)
                durations[-1] = tau - (cum - d)
                traj = FixationTrajectory(tuple(options), np.array(durations))
                return float(tau), choice, traj
            x = path[-1]
            k_done = k_end
        opt = "B" if opt == "A" else "A"
        if k_done > _MAX_STEPS:
            raise RuntimeError("no absorption after an implausible number of steps")


def simulate_two_drift_dataset(
    n,
    mu1,
    mu2,
    x0,
    sigma,
    upper,
    lower,
    dt,
    seed,
    fix_cfg: FixationConfig = FixationConfig(),
):
    """Trials of the two-drift gaze model: drift mu1 while on A, mu2 on B."""
    trials = []
    for i in range(n):
        rng = RngSeed(seed, i)
        tau, choice, traj = _run_fixation_trial(
            rng.generator(_NOISE),
            rng.generator(_FIXATIONS),
            fix_cfg,
            lambda opt: mu1 if opt == "A" else mu2,
            x0,
            sigma,
            upper,
            lower,
            dt,
        )
        trials.append(Trial(tau=tau, choice=choice, fixations=traj))
    return trials


def simulate_addm_dataset(n, params, dt, seed, fix_cfg: FixationConfig = FixationConfig()):
    """Attentional-model trials: ratings, fixations, absorption at +/-u.

    ``params`` carries (eta, kappa, u, x0, sigma).  Drift per fixation is
    attention_drift(option, r_a, r_b, eta, kappa).
    """
    if n < 1:
        raise ValueError("need n >= 1")
    trials = []
    for i in range(n):
        rng = RngSeed(seed, i)
        r_a, r_b = sample_ratings(rng)
        tau, choice, traj = _run_fixation_trial(
            rng.generator(_NOISE),
            rng.generator(_FIXATIONS),
            fix_cfg,
            lambda opt: attention_drift(opt, r_a, r_b, params.eta, params.kappa),
            params.x0,
            params.sigma,
            params.u,
            -params.u,
            dt,
        )
        trials.append(Trial(tau=tau, choice=choice, fixations=traj, r_a=r_a, r_b=r_b))
    return trials


def write_trials(path, trials):
    """One JSON record per line: tau, choice, r_a, r_b, fixations."""
    with open(path, "w") as fh:
        for tr in trials:
            rec = {
                "tau": tr.tau,
                "choice": tr.choice,
                "r_a": tr.r_a,
                "r_b": tr.r_b,
                "fixations": [
                    {"option": o, "duration": float(d)}
                    for o, d in zip(tr.fixations.options, tr.fixations.durations)
                ],
            }
            fh.write(json.dumps(rec) + "\n")


def read_trials(path):
    trials = []
    with open(path) as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            traj = FixationTrajectory(
                tuple(seg["option"] for seg in rec["fixations"]),
                np.array([seg["duration"] for seg in rec["fixations"]])
                if rec["fixations"]
                else np.empty(0),
            )
            trials.append(
                Trial(
                    tau=rec["tau"],
                    choice=rec["choice"],
                    fixations=traj,
                    r_a=rec["r_a"],
                    r_b=rec["r_b"],
                )
            )
    return trials
