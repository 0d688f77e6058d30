"""First-passage densities for piecewise-constant drift via the forward equation.

The non-passage density u(x, t) solves

    u_t = -mu(t) u_x + (sigma^2 / 2) u_xx,   u = 0 at absorbing boundaries,

with a Dirac initial condition at the start position.  Absorption flux
at a boundary is the first-passage density there, read off as
-(sigma^2/2) u_x with a one-sided second-order difference.

Discretization: Crank-Nicolson with centered advection on a uniform
spatial grid.  Each drift segment starts with two backward-Euler
sub-steps followed by a geometrically growing sub-step ramp inside the
first nominal step (Rannacher-style startup); without it the drift
discontinuity excites slowly-damped CN oscillations at the boundary
flux.  One-sided problems truncate the open side at
x0 - 8 sigma sqrt(horizon) with a reflecting far boundary.

Each solve owns its grid and buffers; everything here is safe to run
concurrently across trials.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

__all__ = [
    "PiecewiseDrift",
    "SolverConfig",
    "FptdCurve",
    "ConfigurationError",
    "DivergenceError",
    "HorizonError",
    "solve_forward",
    "loglik_trial",
    "batch_loglik",
]

LOG_FLOOR = math.log(1e-300)
RAMP_LEVELS = 6  # first nominal step of each segment splits into ~2+RAMP_LEVELS sub-steps


class ConfigurationError(ValueError):
    """Solver configuration incompatible with the requested problem."""


class DivergenceError(RuntimeError):
    """The numerical solution lost positivity beyond tolerance."""


class HorizonError(ValueError):
    """Requested evaluation time lies beyond the configured horizon."""


@dataclass(frozen=True)
class PiecewiseDrift:
    """Drift schedule: value ``values[j]`` on [breakpoints[j-1], breakpoints[j]).

    ``breakpoints`` are the strictly increasing switch times after 0;
    ``values`` has one more entry than ``breakpoints``, the last one
    applying for all times past the final switch.
    """

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        bp = tuple(float(t) for t in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(vals) != len(bp) + 1:
            raise ValueError("need exactly one more drift value than breakpoints")
        if any(not math.isfinite(v) for v in vals):
            raise ValueError("drift values must be finite")
        if any(t <= 0 for t in bp):
            raise ValueError("breakpoints must be positive")
        if any(b >= a for a, b in zip(bp[1:], bp[:-1])):
            raise ValueError("breakpoints must be strictly increasing")

    @classmethod
    def constant(cls, mu):
        return cls(breakpoints=(), values=(mu,))

    def value_at(self, t):
        idx = int(np.searchsorted(self.breakpoints, t, side="right"))
        return self.values[idx]

    def simplify(self):
        """Merge consecutive segments carrying the same drift value."""
        bp, vals = [], [self.values[0]]
        for t, v in zip(self.breakpoints, self.values[1:]):
            if v == vals[-1]:
                continue
            bp.append(t)
            vals.append(v)
        return PiecewiseDrift(tuple(bp), tuple(vals))

    def segments_until(self, horizon):
        """(durations, values) of the segments covering [0, horizon]."""
        if not horizon > 0:
            raise ValueError("horizon must be positive")
        edges = [0.0] + [t for t in self.breakpoints if t < horizon] + [horizon]
        durations = np.diff(edges)
        vals = np.asarray(self.values[: len(durations)])
        return durations, vals


@dataclass(frozen=True)
class SolverConfig:
    """Grid resolution: dx as a fraction of the domain width, dt in seconds."""

    space_step: float = 1e-4
    time_step: float = 1e-4
    horizon: float = 10.0

    def __post_init__(self):
        if self.space_step <= 0 or self.time_step <= 0 or self.horizon <= 0:
            raise ValueError("all solver configuration entries must be positive")

    @property
    def n_space(self):
        return int(round(1.0 / self.space_step)) + 1


@dataclass
class FptdCurve:
    """Boundary absorption flux tabulated on a uniform time grid.

    ``residual_mass`` is the probability not yet absorbed at the final
    grid time; fluxes integrate (trapezoid) against the grid.
    """

    time_grid: np.ndarray
    upper_flux: np.ndarray
    lower_flux: Optional[np.ndarray]
    residual_mass: float

    def upper_mass(self):
        return float(np.trapezoid(self.upper_flux, self.time_grid))

    def lower_mass(self):
        if self.lower_flux is None:
            return 0.0
        return float(np.trapezoid(self.lower_flux, self.time_grid))

    def flux_at(self, t, choice="upper"):
        flux = self.upper_flux if choice == "upper" else self.lower_flux
        if flux is None:
            raise ValueError("no lower boundary in this solve")
        return float(np.interp(t, self.time_grid, flux))


@njit(cache=True)
def _factor(cp, dd, n, lo, di, up, di0, up0, reflect):
    prev = 0.0
    for i in range(n):
        if i == 0 and reflect:
            diag, upp = di0, up0
        else:
            diag, upp = di, up
        inv = 1.0 / (diag - (lo * prev if i > 0 else 0.0))
        cp[i] = upp * inv
        dd[i] = inv
        prev = cp[i]


@njit(cache=True)
def _substep(u, rhs, cp, dd, M, i0, n, a, c, dt, be, reflect):
    # one implicit step of size dt; be=True -> backward Euler, else CN
    if be:
        lo = -dt * (a + c)
        di = 1.0 + 2.0 * dt * a
        up = -dt * (a - c)
        di0 = 1.0 + 2.0 * dt * a
        up0 = -2.0 * dt * a
    else:
        lo = -0.5 * dt * (a + c)
        di = 1.0 + dt * a
        up = -0.5 * dt * (a - c)
        di0 = 1.0 + dt * a
        up0 = -dt * a
    _factor(cp, dd, n, lo, di, up, di0, up0, reflect)
    if be:
        prevd = u[i0] * dd[0]
        rhs[0] = prevd
        for i in range(1, n):
            prevd = (u[i0 + i] - lo * prevd) * dd[i]
            rhs[i] = prevd
    else:
        blo = 0.5 * dt * (a + c)
        bdi = 1.0 - dt * a
        bup = 0.5 * dt * (a - c)
        if i0 == 0:
            r0 = (1.0 - dt * a) * u[0] + dt * a * u[1]
        else:
            r0 = blo * u[i0 - 1] + bdi * u[i0] + bup * u[i0 + 1]
        prevd = r0 * dd[0]
        rhs[0] = prevd
        for i in range(1, n):
            j = i0 + i
            prevd = (blo * u[j - 1] + bdi * u[j] + bup * u[j + 1] - lo * prevd) * dd[i]
            rhs[i] = prevd
    u[i0 + n - 1] = rhs[n - 1]
    for i in range(n - 2, -1, -1):
        u[i0 + i] = rhs[i] - cp[i] * u[i0 + i + 1]


@njit(cache=True)
def _evolve(u, dx, sig2, seg_mu, seg_dt, seg_nsteps, lower_absorb, ramp_levels, fup, flo):
    """March the density through all drift segments, recording boundary flux.

    fup/flo must hold one slot per recorded node (sum of seg_nsteps + 1);
    slot 0 is left untouched (flux of the initial delta is defined as 0).
    """
    M = u.shape[0]
    cp = np.empty(M)
    dd = np.empty(M)
    rhs = np.empty(M)
    i0 = 1 if lower_absorb else 0
    n = (M - 1) - i0
    reflect = not lower_absorb
    pos = 0
    for k in range(seg_mu.shape[0]):
        mu = seg_mu[k]
        dtk = seg_dt[k]
        a = sig2 / (2.0 * dx * dx)
        c = mu / (2.0 * dx)
        # CN factorization reused for all regular steps of this segment
        lo = -0.5 * dtk * (a + c)
        _factor(
            cp, dd, n, lo, 1.0 + dtk * a, -0.5 * dtk * (a - c), 1.0 + dtk * a, -dtk * a, reflect
        )
        blo = 0.5 * dtk * (a + c)
        bdi = 1.0 - dtk * a
        bup = 0.5 * dtk * (a - c)
        for s in range(seg_nsteps[k]):
            if s == 0 and ramp_levels > 0:
                # startup: 2 backward-Euler sub-steps of dtk/2^L, then CN
                # sub-steps doubling until the nominal step is filled
                dts = dtk / (2.0 ** ramp_levels)
                _substep(u, rhs, cp, dd, M, i0, n, a, c, dts, True, reflect)
                _substep(u, rhs, cp, dd, M, i0, n, a, c, dts, True, reflect)
                cur = 2.0 * dts
                lvl = 1
                while cur < dtk * (1.0 - 1e-12):
                    step_dt = dts * (2.0 ** lvl)
                    if step_dt > dtk - cur:
                        step_dt = dtk - cur
                    _substep(u, rhs, cp, dd, M, i0, n, a, c, step_dt, False, reflect)
                    cur += step_dt
                    lvl += 1
                # restore the segment factorization clobbered by _substep
                _factor(
                    cp,
                    dd,
                    n,
                    lo,
                    1.0 + dtk * a,
                    -0.5 * dtk * (a - c),
                    1.0 + dtk * a,
                    -dtk * a,
                    reflect,
                )
            else:
                # fused RHS build + forward elimination, then back-substitution
                if i0 == 0:
                    r0 = (1.0 - dtk * a) * u[0] + dtk * a * u[1]
                else:
                    r0 = blo * u[i0 - 1] + bdi * u[i0] + bup * u[i0 + 1]
                prevd = r0 * dd[0]
                rhs[0] = prevd
                for i in range(1, n):
                    j = i0 + i
                    prevd = (blo * u[j - 1] + bdi * u[j] + bup * u[j + 1] - lo * prevd) * dd[i]
                    rhs[i] = prevd
                u[i0 + n - 1] = rhs[n - 1]
                for i in range(n - 2, -1, -1):
                    u[i0 + i] = rhs[i] - cp[i] * u[i0 + i + 1]
            pos += 1
            fup[pos] = 0.5 * sig2 * (4.0 * u[M - 2] - u[M - 3]) / (2.0 * dx)
            if lower_absorb:
                flo[pos] = 0.5 * sig2 * (4.0 * u[1] - u[2]) / (2.0 * dx)
    return pos


@njit(cache=True)
def _batch_loglik_kernel(
    seg_ptr,
    seg_mu,
    seg_dt,
    seg_nsteps,
    choice_upper,
    M,
    dx,
    delta_idx,
    delta_frac,
    sig2,
    ramp_levels,
    max_steps,
    out,
):
    u = np.empty(M)
    fup = np.empty(max_steps + 1)
    flo = np.empty(max_steps + 1)
    n_trials = seg_ptr.shape[0] - 1
    for tr in range(n_trials):
        for i in range(M):
            u[i] = 0.0
        u[delta_idx] = (1.0 - delta_frac) / dx
        u[delta_idx + 1] = delta_frac / dx
        a, b = seg_ptr[tr], seg_ptr[tr + 1]
        pos = _evolve(
            u, dx, sig2, seg_mu[a:b], seg_dt[a:b], seg_nsteps[a:b], True, ramp_levels, fup, flo
        )
        f = fup[pos] if choice_upper[tr] else flo[pos]
        if f < 1e-300:
            out[tr] = LOG_FLOOR
        else:
            out[tr] = math.log(f)


def _delta_weights(x0, lo_dom, dx, M):
    # two-node linear interpolation; keeps exact mass and first moment
    pos = (x0 - lo_dom) / dx
    j = int(math.floor(pos))
    frac = pos - j
    j = min(max(j, 1), M - 3)  # keep the stencil interior
    return j, frac


def _segment_grid(durations, time_step):
    """Per-segment step counts and sizes: each segment length is split into
    an integer number of steps as close to time_step as possible."""
    nsteps = np.maximum(1, np.round(np.asarray(durations) / time_step)).astype(np.int64)
    dts = np.asarray(durations, dtype=float) / nsteps
    return dts, nsteps


def solve_forward(drift, x0, sigma, upper, lower=None, cfg=SolverConfig()):
    """Solve the forward equation and return the absorption-flux curve.

    ``lower=None`` requests the one-boundary problem; the open side is
    then truncated at x0 - 8 sigma sqrt(horizon) with a reflecting wall.
    Drift breakpoints must land on the uniform time grid.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if lower is None:
        if not x0 < upper:
            raise ValueError("need x0 < upper")
        lo_dom = x0 - 8.0 * sigma * math.sqrt(cfg.horizon)
        lower_absorb = False
    else:
        if not lower < x0 < upper:
            raise ValueError("need lower < x0 < upper")
        lo_dom = lower
        lower_absorb = True

    dt = cfg.time_step
    nsteps = int(round(cfg.horizon / dt))
    horizon = nsteps * dt
    for t in drift.breakpoints:
        if t >= horizon:
            raise ConfigurationError(f"drift breakpoint {t} beyond horizon {horizon}")
        k = t / dt
        if abs(k - round(k)) > 1e-9:
            raise ConfigurationError(
                f"drift breakpoint {t} is not representable on the time grid (dt={dt})"
            )

    edges = [0.0] + list(drift.breakpoints) + [horizon]
    seg_nsteps = np.array(
        [int(round((b - a) / dt)) for a, b in zip(edges[:-1], edges[1:])], dtype=np.int64
    )
    seg_dt = np.full(len(seg_nsteps), dt)
    seg_mu = np.asarray(drift.values[: len(seg_nsteps)], dtype=float)

    M = cfg.n_space
    dx = (upper - lo_dom) / (M - 1)
    u = np.zeros(M)
    j, frac = _delta_weights(x0, lo_dom, dx, M)
    u[j] = (1.0 - frac) / dx
    u[j + 1] = frac / dx

    fup = np.zeros(nsteps + 1)
    flo = np.zeros(nsteps + 1)
    _evolve(u, dx, sigma * sigma, seg_mu, seg_dt, seg_nsteps, lower_absorb, RAMP_LEVELS, fup, flo)

    residual = float(np.trapezoid(u, dx=dx))
    if residual < -1e-8:
        raise DivergenceError(f"residual mass went negative: {residual}")
    grid = np.arange(nsteps + 1) * dt
    return FptdCurve(
        time_grid=grid,
        upper_flux=fup,
        lower_flux=flo if lower_absorb else None,
        residual_mass=residual,
    )


def loglik_trial(drift, x0, sigma, upper, lower, tau, choice, cfg=SolverConfig()):
    """Log first-passage density of one trial (tau, choice) under ``drift``.

    The time grid is rebuilt per trial: every drift breakpoint before tau
    becomes a segment edge and each segment gets a locally uniform step
    near cfg.time_step, so breakpoints and tau itself land exactly on
    grid nodes.  Zero-flux reads are floored at log(1e-300).
    """
    if choice not in ("upper", "lower"):
        raise ValueError("choice must be 'upper' or 'lower'")
    if tau > cfg.horizon:
        raise HorizonError(f"tau={tau} beyond solver horizon {cfg.horizon}")
    if not tau > 0:
        raise ValueError("tau must be positive")
    seg_ptr, seg_mu, seg_dt, seg_nsteps = _trial_segments(drift, tau, cfg.time_step)
    return float(
        batch_loglik(
            seg_ptr,
            seg_mu,
            seg_dt,
            seg_nsteps,
            np.array([choice == "upper"]),
            x0,
            sigma,
            upper,
            lower,
            cfg,
        )[0]
    )


def _trial_segments(drift, tau, time_step):
    edges = [0.0] + [t for t in drift.breakpoints if t < tau] + [tau]
    durations = np.diff(edges)
    seg_mu = np.asarray(drift.values[: len(durations)], dtype=float)
    seg_dt, seg_nsteps = _segment_grid(durations, time_step)
    seg_ptr = np.array([0, len(durations)], dtype=np.int64)
    return seg_ptr, seg_mu, seg_dt, seg_nsteps


def batch_loglik(seg_ptr, seg_mu, seg_dt, seg_nsteps, choice_upper, x0, sigma, upper, lower, cfg):
    """Per-trial log first-passage densities for a batch of trials.

    Trials are laid out in CSR form over segments: trial i owns segments
    seg_ptr[i]:seg_ptr[i+1].  All trials share the geometry (x0, sigma,
    boundaries).  Results do not depend on how callers split the batch.
    """
    if not lower < x0 < upper:
        raise ValueError("need lower < x0 < upper")
    M = cfg.n_space
    dx = (upper - lower) / (M - 1)
    j, frac = _delta_weights(x0, lower, dx, M)
    out = np.empty(seg_ptr.shape[0] - 1)
    max_steps = 0
    for tr in range(seg_ptr.shape[0] - 1):
        tot = int(np.sum(seg_nsteps[seg_ptr[tr] : seg_ptr[tr + 1]]))
        max_steps = max(max_steps, tot)
    _batch_loglik_kernel(
        seg_ptr,
        np.ascontiguousarray(seg_mu, dtype=float),
        np.ascontiguousarray(seg_dt, dtype=float),
        np.ascontiguousarray(seg_nsteps, dtype=np.int64),
        np.ascontiguousarray(choice_upper, dtype=np.bool_),
        M,
        dx,
        j,
        frac,
        sigma * sigma,
        RAMP_LEVELS,
        max_steps,
        out,
    )
    return out
