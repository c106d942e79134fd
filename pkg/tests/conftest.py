import numpy as np
import pytest

from dwlab import damping, modeode, resonance


@pytest.fixture(scope="session")
def default_cfg():
    return modeode.IntegratorConfig()


@pytest.fixture(scope="session")
def tight_cfg():
    # pure relative control: oracle comparisons track decaying states
    return modeode.IntegratorConfig(rel_tol=1e-12, abs_tol=1e-300)


@pytest.fixture(scope="session")
def catalog():
    return damping.catalog()


@pytest.fixture(scope="session")
def resonant_14_dyads():
    """Shared resonant coefficient (a=1, r=1/2, lam*=1) built through 2^14."""
    return resonance.build_resonant(1.0, 0.5, 1.0, 1.0, t_end=2.0**14)


def rk4_fixed(coef, lam, u0, v0, t0, t_end, h):
    """Independent fixed-step RK4 reference integrator (test oracle only)."""

    def f(t, u, v):
        return v, -coef(t) * v - lam * lam * u

    n = int(np.ceil((t_end - t0) / h))
    h = (t_end - t0) / n
    t, u, v = t0, u0, v0
    ts = np.empty(n + 1)
    us = np.empty(n + 1)
    vs = np.empty(n + 1)
    ts[0], us[0], vs[0] = t, u, v
    for i in range(n):
        k1u, k1v = f(t, u, v)
        k2u, k2v = f(t + h / 2, u + h / 2 * k1u, v + h / 2 * k1v)
        k3u, k3v = f(t + h / 2, u + h / 2 * k2u, v + h / 2 * k2v)
        k4u, k4v = f(t + h, u + h * k3u, v + h * k3v)
        u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        t = t0 + (i + 1) * h
        ts[i + 1], us[i + 1], vs[i + 1] = t, u, v
    return ts, us, vs
