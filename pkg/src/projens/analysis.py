"""Entanglement-time, fidelity-decay, and device-equivalence fits.

All fits operate on plain (x, y) traces keyed by system size, so the same
code serves analog evolutions (time in us) and layered circuits (depth).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

# exact linear law of the saturated half-chain entropy of a random-circuit
# state, in bits: S = eta0 + eta1 * n
PAGE_INTERCEPT = -math.log2(math.e) / 2
PAGE_SLOPE = 0.5

# default multipliers taking the fitted kink location to a firmly saturated
# evaluation point
SATURATION_MARGIN = {"rydberg": 1.35, "fsim": 1.0, "su4": 1.7}


def _linear_fit(x, y):
    """Least-squares line with parameter standard errors."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    coeffs, cov = np.polyfit(x, y, 1, cov=True)
    slope, intercept = float(coeffs[0]), float(coeffs[1])
    return slope, intercept, float(np.sqrt(cov[0, 0])), float(np.sqrt(cov[1, 1]))


# ---------------------------------------------------------------------------
# entanglement saturation time

@dataclass
class PiecewiseFit:
    """Joint two-slope fit of entropy growth across system sizes.

    The early slope m1 is shared; each size has its own kink time t_c and
    late slope m2.  t_ent = c * t_c, and (alpha0, alpha1) fit t_ent versus
    system size.
    """

    m1: float
    m2: dict[int, float]
    t_c: dict[int, float]
    t_ent: dict[int, float]
    c: float
    alpha0: float
    alpha1: float
    alpha0_err: float
    alpha1_err: float
    meta: dict = field(default_factory=dict)

    def t_ent_at(self, n: float) -> float:
        return self.alpha0 + self.alpha1 * n


def _piecewise(t, m1, m2, tc):
    return np.where(t <= tc, m1 * t, m1 * tc + m2 * (t - tc))


def fit_entanglement_time(traces: dict[int, tuple], c: float = 1.35) -> PiecewiseFit:
    """Fit S(N, t) = m1 t (t <= t_c) then linear with slope m2(N), with m1
    shared across sizes; requires at least 3 sizes and monotone traces."""
    if len(traces) < 3:
        raise ValueError("need at least 3 system sizes")
    sizes = sorted(traces)
    data = {}
    for n in sizes:
        t, s = traces[n]
        t = np.asarray(t, float)
        s = np.asarray(s, float)
        if np.any(np.diff(s) < -0.05 * np.max(s)):
            raise ValueError(f"entropy trace for N={n} is not monotone")
        data[n] = (t, s)

    # initial guesses: kink near 90% of the maximum, early slope from the
    # first quarter of the smallest size
    t0, s0 = data[sizes[0]]
    quarter = max(2, t0.size // 4)
    m1_init = max(np.polyfit(t0[:quarter], s0[:quarter], 1)[0], 1e-6)
    tc_init = [float(data[n][0][np.argmax(data[n][1] >= 0.9 * data[n][1].max())])
               for n in sizes]
    x0 = np.concatenate([[m1_init], np.full(len(sizes), 0.02), tc_init])

    def residuals(params):
        m1 = params[0]
        out = []
        for i, n in enumerate(sizes):
            t, s = data[n]
            out.append(_piecewise(t, m1, params[1 + i], params[1 + len(sizes) + i]) - s)
        return np.concatenate(out)

    lower = np.concatenate([[0.0], np.full(len(sizes), -np.inf), np.zeros(len(sizes))])
    upper = np.full(1 + 2 * len(sizes), np.inf)
    sol = scipy.optimize.least_squares(residuals, x0, bounds=(lower, upper))
    m1 = float(sol.x[0])
    m2 = {n: float(sol.x[1 + i]) for i, n in enumerate(sizes)}
    t_c = {n: float(sol.x[1 + len(sizes) + i]) for i, n in enumerate(sizes)}
    t_ent = {n: c * t_c[n] for n in sizes}
    a1, a0, a1_err, a0_err = _linear_fit(sizes, [t_ent[n] for n in sizes])
    return PiecewiseFit(m1=m1, m2=m2, t_c=t_c, t_ent=t_ent, c=c,
                        alpha0=a0, alpha1=a1, alpha0_err=a0_err, alpha1_err=a1_err,
                        meta={"cost": float(sol.cost)})


def fit_saturated_entropy(traces: dict[int, tuple], fit: PiecewiseFit):
    """Linear fit (sigma0, sigma1) of the entropy reached at t_ent vs size."""
    sizes = sorted(traces)
    values = []
    for n in sizes:
        s_at = fit.m1 * fit.t_c[n] + fit.m2[n] * (fit.t_ent[n] - fit.t_c[n])
        values.append(s_at)
    s1, s0, s1_err, s0_err = _linear_fit(sizes, values)
    return s0, s1, s0_err, s1_err


# ---------------------------------------------------------------------------
# fidelity decay

@dataclass
class DecayFit:
    gammas: dict[int, float]
    gamma0: float
    gamma1: float
    gamma0_err: float
    gamma1_err: float

    def gamma_at(self, n: float) -> float:
        return self.gamma0 + self.gamma1 * n


def fit_fidelity_decay(traces: dict[int, tuple]) -> DecayFit:
    """Log-linear exponential-decay fits with free intercepts, followed by a
    linear fit of the rate versus system size."""
    gammas = {}
    for n, (t, f) in sorted(traces.items()):
        t = np.asarray(t, float)
        f = np.asarray(f, float)
        if np.any(f <= 0):
            raise ValueError(f"non-positive fidelity in trace N={n}")
        slope, _ = np.polyfit(t, np.log(f), 1)
        gamma = -float(slope)
        if gamma < -1e-9:
            raise ValueError(f"negative decay rate fitted for N={n}")
        gammas[n] = max(gamma, 0.0)
    sizes = sorted(gammas)
    g1, g0, g1_err, g0_err = _linear_fit(sizes, [gammas[n] for n in sizes])
    return DecayFit(gammas=gammas, gamma0=g0, gamma1=g1,
                    gamma0_err=g0_err, gamma1_err=g1_err)


def predicted_fidelity(n: float, decay: DecayFit, tent: PiecewiseFit,
                       f0: float = 0.997) -> float:
    """Model fidelity at the entanglement time: f0^N exp(-gamma(N) t_ent(N))."""
    return f0**n * math.exp(-decay.gamma_at(n) * tent.t_ent_at(n))


# ---------------------------------------------------------------------------
# digital-analog comparison

def page_equivalence(sigma0: float, sigma1: float, n) -> np.ndarray | float:
    """Equivalent circuit size N_RUC with the same saturated entropy:
    N_RUC = (sigma1 N + sigma0 - eta0) / eta1 with the exact random-state
    entropy law eta0 = -log2(e)/2, eta1 = 1/2."""
    n = np.asarray(n, dtype=float)
    out = (sigma1 * n + (sigma0 - PAGE_INTERCEPT)) / PAGE_SLOPE
    return float(out) if out.ndim == 0 else out


def page_map_coefficients(sigma0: float, sigma1: float) -> tuple[float, float]:
    """(slope, intercept) of the N -> N_RUC map."""
    return sigma1 / PAGE_SLOPE, (sigma0 - PAGE_INTERCEPT) / PAGE_SLOPE


@dataclass
class CycleFidelityReport:
    n: float
    n_ruc: float
    d_ent: float
    f_cycle: float
    sigma: float


def cycle_fidelity(n: float, gamma: tuple[float, float], t_ent: tuple[float, float],
                   d_ent: tuple[float, float], page: tuple[float, float],
                   errors: dict | None = None) -> CycleFidelityReport:
    """Equivalent two-qubit cycle fidelity of a circuit matching the analog
    evolution fidelity at the entanglement time.

    Solves F_cycle^((N_RUC - 1) d_ent / 2) = exp(-gamma(N) t_ent(N)); all
    inputs are (intercept, slope) pairs in N or N_RUC.  ``errors`` may give
    1-sigma uncertainties keyed by gamma0, gamma1, alpha0, alpha1, beta0,
    beta1, sigma0, sigma1; they propagate by finite differences assuming
    independence.
    """
    params = {
        "gamma0": gamma[0], "gamma1": gamma[1],
        "alpha0": t_ent[0], "alpha1": t_ent[1],
        "beta0": d_ent[0], "beta1": d_ent[1],
        "sigma0": page[0], "sigma1": page[1],
    }

    def value(p):
        g = p["gamma0"] + p["gamma1"] * n
        te = p["alpha0"] + p["alpha1"] * n
        n_ruc = page_equivalence(p["sigma0"], p["sigma1"], n)
        de = p["beta0"] + p["beta1"] * n_ruc
        exponent = (n_ruc - 1.0) * de / 2.0
        if exponent <= 0:
            raise ValueError("non-positive gate count in the equivalent circuit")
        return math.exp(-g * te / exponent), n_ruc, de

    f_cycle, n_ruc, de = value(params)
    sigma = 0.0
    if errors:
        var = 0.0
        for key, err in errors.items():
            if err == 0:
                continue
            bumped = dict(params)
            bumped[key] = params[key] + err
            var += (value(bumped)[0] - f_cycle) ** 2
        sigma = math.sqrt(var)
    return CycleFidelityReport(n=n, n_ruc=n_ruc, d_ent=de, f_cycle=f_cycle, sigma=sigma)
