"""Independent test oracles, deliberately decoupled from the package's
own numerical paths."""

import numpy as np


def sample_switch_exact(n, mu, b, T, seed):
    """Exact draws of the switch-model hitting time (requires mu > 0).

    Drift phase: an inverse-Gaussian hitting time via the
    Michael-Schucany-Haas transform.  If it lands past T, the position
    at T given no crossing is sampled by Gaussian proposal plus
    Brownian-bridge rejection (accept with 1 - exp(2 b (y - b)/T)), and
    the zero-drift remainder is (b - y)^2 / Z^2.  No time discretization
    anywhere, so estimator tests see pure sampling error.
    """
    if not mu > 0:
        raise ValueError("exact oracle sampler assumes mu > 0")
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 424242))))
    m_ig, lam = b / mu, b * b
    out = np.empty(n)
    for i in range(n):
        nu = gen.standard_normal() ** 2
        x = m_ig + m_ig * m_ig * nu / (2 * lam) - m_ig / (2 * lam) * np.sqrt(
            4 * m_ig * lam * nu + (m_ig * nu) ** 2
        )
        if gen.random() >= m_ig / (m_ig + x):
            x = m_ig * m_ig / x
        if x <= T:
            out[i] = x
            continue
        while True:
            y = mu * T + np.sqrt(T) * gen.standard_normal()
            if y < b and gen.random() < 1.0 - np.exp(2.0 * b * (y - b) / T):
                break
        z = gen.standard_normal()
        while z == 0.0:
            z = gen.standard_normal()
        out[i] = T + ((b - y) / z) ** 2
    return out


def em_survivor_positions(n_paths, mu, sigma, b, t_end, dt, seed, chunk=20000):
    """Euler-Maruyama positions at t_end of paths that never crossed b.

    Brute-force simulation oracle for the non-passage density.
    """
    gen = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 31337))))
    nsteps = int(round(t_end / dt))
    out = []
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        x = np.zeros(m)
        alive = np.ones(m, dtype=bool)
        for _ in range(nsteps):
            x[alive] += mu * dt + sigma * np.sqrt(dt) * gen.standard_normal(int(alive.sum()))
            alive &= x < b
        out.append(x[alive])
        done += m
    return np.concatenate(out)
