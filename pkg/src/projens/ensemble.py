"""Projected ensembles and their randomness diagnostics.

A projected ensemble collects the normalized conditional states of a
subsystem A for every admissible measurement outcome z_B of the complement,
together with the outcome probabilities.  Closeness to the uniform
(Haar-random) state ensemble is quantified through conditional-probability
histograms, scalar moments, and trace distances between moment operators
and their Haar counterparts.

Weighting schemes for ensemble averages:
  "p"  : Born weights p(z_B)                 (default)
  "pk" : p(z_B)^k / sum p(z_B)^k, per moment order k
  "p2" : p(z_B)^2 / sum p(z_B)^2
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betaln, gammaln

from .hilbert import (
    Bipartition,
    StateVector,
    bitstring_to_code,
    subsystem_basis,
)

MIN_OUTCOME_PROB = 1e-14

WEIGHTING_SCHEMES = ("p", "pk", "p2")


def rising_factorial(d: int, k: int) -> int:
    out = 1
    for j in range(k):
        out *= d + j
    return out


# ---------------------------------------------------------------------------
# projected ensembles

@dataclass
class ProjectedEnsemble:
    """Weighted conditional pure states on subsystem A.

    ``states[i]`` is the normalized conditional state for outcome
    ``zb_codes[i]``, expanded over the admissible A codes ``a_codes``;
    ``probs`` are the Born weights p(z_B) renormalized over the retained
    (admissible) outcomes.
    """

    part: Bipartition
    constraint: str
    a_codes: np.ndarray
    zb_codes: np.ndarray
    probs: np.ndarray
    states: np.ndarray
    weighting: str = "p"

    @property
    def d_a(self) -> int:
        return int(self.a_codes.size)

    @property
    def n_entries(self) -> int:
        return int(self.zb_codes.size)

    def weights(self, k: int = 1) -> np.ndarray:
        """Averaging weights of the selected scheme for moment order k."""
        if self.weighting == "p":
            return self.probs
        if self.weighting == "p2":
            w = self.probs**2
        elif self.weighting == "pk":
            w = self.probs ** float(k)
        else:
            raise ValueError(f"unknown weighting {self.weighting!r}")
        return w / w.sum()

    def conditional_probs(self, z_a: int | str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """(values, weights) of p(z_A | z_B) across the ensemble.

        For ``z_a=None`` all admissible components are pooled with equal
        1/D_A share of each outcome's weight.
        """
        w = self.weights(1)
        if z_a is None:
            values = (np.abs(self.states) ** 2).reshape(-1)
            weights = np.repeat(w / self.d_a, self.d_a)
            return values, weights
        code = bitstring_to_code(z_a) if isinstance(z_a, str) else int(z_a)
        pos = int(np.searchsorted(self.a_codes, code))
        if pos >= self.d_a or self.a_codes[pos] != code:
            raise KeyError(f"z_A code {code} not admissible")
        return np.abs(self.states[:, pos]) ** 2, w


def project(state: StateVector, part: Bipartition, weighting: str = "p",
            min_prob: float = MIN_OUTCOME_PROB) -> ProjectedEnsemble:
    """Build the projected ensemble of ``state`` on subsystem A.

    Outcomes failing the bipartition's boundary rule or with
    p(z_B) < ``min_prob`` are dropped; the remaining weights are
    renormalized.
    """
    if weighting not in WEIGHTING_SCHEMES:
        raise ValueError(f"weighting must be one of {WEIGHTING_SCHEMES}")
    basis = state.basis
    if basis.n != part.n:
        raise ValueError("state and bipartition sizes differ")
    bits = basis.bits().astype(np.int64)
    pow_a = np.zeros(basis.n, dtype=np.int64)
    pow_b = np.zeros(basis.n, dtype=np.int64)
    for rank, s in enumerate(part.sites_a):
        pow_a[s - 1] = 1 << (part.len_a - 1 - rank)
    for rank, s in enumerate(part.sites_b):
        pow_b[s - 1] = 1 << (part.len_b - 1 - rank)
    ca = bits @ pow_a
    cb = bits @ pow_b

    a_codes = subsystem_basis(part, basis.constraint)
    a_pos = np.searchsorted(a_codes, ca)
    if np.any(a_pos >= a_codes.size) or np.any(a_codes[a_pos] != ca):
        raise ValueError("state contains inadmissible subsystem components")

    zb_unique, zb_inverse = np.unique(cb, return_inverse=True)
    amp_matrix = np.zeros((zb_unique.size, a_codes.size), dtype=np.complex128)
    amp_matrix[zb_inverse, a_pos] = state.amps
    probs = np.sum(np.abs(amp_matrix) ** 2, axis=1)

    keep = probs >= min_prob
    if part.boundary_rule:
        admissible = np.fromiter(
            (part.admissible_b(int(c)) for c in zb_unique), bool, zb_unique.size
        )
        keep &= admissible
    if not np.any(keep):
        raise ValueError("no admissible measurement outcomes survive projection")
    amp_matrix = amp_matrix[keep]
    probs = probs[keep]
    states = amp_matrix / np.sqrt(probs)[:, None]
    return ProjectedEnsemble(
        part=part,
        constraint=basis.constraint,
        a_codes=a_codes,
        zb_codes=zb_unique[keep],
        probs=probs / probs.sum(),
        states=states,
        weighting=weighting,
    )


def reduced_density(ens: ProjectedEnsemble) -> np.ndarray:
    """Born-weighted average of conditional projectors (the reduced density
    operator of A, conditioned on the admissible outcomes)."""
    w = ens.probs
    return (w[:, None] * ens.states).T @ ens.states.conj()


# ---------------------------------------------------------------------------
# moment operators

def haar_moment(d_a: int, k: int) -> np.ndarray:
    """k-th moment operator of the uniform ensemble on dimension d_a.

    Symmetric-subspace projector normalized to unit trace: the sum of all
    k-fold permutation operators over the rising factorial
    d_a (d_a + 1) ... (d_a + k - 1).
    """
    if k < 1 or k > 4:
        raise ValueError("moment order k must be in 1..4")
    dim = d_a**k
    digits = np.array(list(np.ndindex(*([d_a] * k))), dtype=np.int64)
    place = d_a ** np.arange(k - 1, -1, -1, dtype=np.int64)
    acc = np.zeros((dim, dim))
    src = digits @ place
    for perm in itertools.permutations(range(k)):
        tgt = digits[:, list(perm)] @ place
        acc[tgt, src] += 1.0
    return acc / rising_factorial(d_a, k)


def ensemble_moment(ens: ProjectedEnsemble, k: int) -> np.ndarray:
    """Weighted k-fold moment operator of a projected ensemble."""
    d_a = ens.d_a
    if k < 1 or k * math.log2(d_a) > 24:
        raise ValueError("moment order out of the supported memory range")
    w = ens.weights(k)
    phi = ens.states
    for _ in range(k - 1):
        phi = (phi[:, :, None] * ens.states[:, None, :]).reshape(ens.n_entries, -1)
    return (w[:, None] * phi).T @ phi.conj()


def design_distance(ens: ProjectedEnsemble, k: int) -> float:
    """Trace (l1) distance between the ensemble's k-th moment and Haar's."""
    diff = ensemble_moment(ens, k) - haar_moment(ens.d_a, k)
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


# ---------------------------------------------------------------------------
# histograms

@dataclass
class ProbHistogram:
    """Normalized density of conditional probabilities on [0, 1]."""

    edges: np.ndarray
    density: np.ndarray
    mass: np.ndarray                 # per-bin probability mass, sums to 1
    n_samples: int | None = None     # shot count when sample-based

    def __post_init__(self):
        widths = np.diff(self.edges)
        integral = float(np.sum(self.density * widths))
        if abs(integral - 1.0) > 1e-9:
            raise ValueError(f"histogram density integrates to {integral!r}")

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def to_rows(self) -> list[tuple[float, float]]:
        return list(zip(self.centers.tolist(), self.density.tolist()))


def _make_histogram(values, weights, bins, n_samples=None) -> ProbHistogram:
    if bins < 5:
        raise ValueError("need at least 5 bins")
    edges = np.linspace(0.0, 1.0, bins + 1)
    mass, _ = np.histogram(np.clip(values, 0.0, 1.0), bins=edges, weights=weights)
    total = mass.sum()
    if total <= 0:
        raise ValueError("histogram has no mass")
    mass = mass / total
    density = mass / np.diff(edges)
    return ProbHistogram(edges=edges, density=density, mass=mass, n_samples=n_samples)


def conditional_histogram(ens: ProjectedEnsemble, z_a: int | str | None = None,
                          bins: int = 30) -> ProbHistogram:
    """Histogram of conditional probabilities from an exact ensemble."""
    values, weights = ens.conditional_probs(z_a)
    return _make_histogram(values, weights, bins)


def conditional_histogram_from_samples(samples, part: Bipartition,
                                       z_a: int | str | None = None,
                                       bins: int = 30,
                                       min_count: int = 20) -> ProbHistogram:
    """Histogram of empirical conditional frequencies from measured shots.

    Shots are grouped by their z_B outcome; only outcomes with at least
    ``min_count`` shots contribute (weighted by their shot counts).
    """
    codes = np.asarray(samples.codes, dtype=np.int64)
    ca = np.empty(codes.size, dtype=np.int64)
    cb = np.empty(codes.size, dtype=np.int64)
    for i, code in enumerate(codes):
        ca[i], cb[i] = part.split_code(int(code))
    if part.boundary_rule:
        keep = np.fromiter((part.admissible_b(int(c)) for c in cb), bool, cb.size)
        ca, cb = ca[keep], cb[keep]
    zb_unique, inverse, counts = np.unique(cb, return_inverse=True, return_counts=True)
    good = counts >= min_count
    if not np.any(good):
        raise ValueError(f"no z_B outcome reaches min_count={min_count}")
    values, weights = [], []
    if z_a is None:
        a_codes = np.unique(ca)
        for g in np.nonzero(good)[0]:
            sel = ca[inverse == g]
            n_b = sel.size
            for code in a_codes:
                values.append(np.count_nonzero(sel == code) / n_b)
                weights.append(n_b / a_codes.size)
    else:
        target = bitstring_to_code(z_a) if isinstance(z_a, str) else int(z_a)
        for g in np.nonzero(good)[0]:
            sel = ca[inverse == g]
            values.append(np.count_nonzero(sel == target) / sel.size)
            weights.append(sel.size)
    return _make_histogram(
        np.asarray(values, float), np.asarray(weights, float), bins,
        n_samples=int(counts[good].sum()),
    )


# ---------------------------------------------------------------------------
# scalar moments

@dataclass
class MomentResult:
    k: int
    raw: float
    rescaled: float
    raw_err: float | None = None
    rescaled_err: float | None = None


def moments_scalar(source, k: int, d_a: int | None = None,
                   z_a: int | str | None = None,
                   n_bootstrap: int = 200, seed: int = 0) -> MomentResult:
    """k-th moment of the conditional-probability distribution.

    ``source`` is a ProjectedEnsemble (exact, pooled over z_A by default)
    or a ProbHistogram (binned; bootstrap errors when sample-based, using
    ``d_a`` for the rescaling).  The rescaled moment multiplies by
    d_a (d_a + 1) ... (d_a + k - 1) and approaches k! for Haar-like
    ensembles.
    """
    if k < 1 or k > 6:
        raise ValueError("k must be in 1..6")
    if isinstance(source, ProjectedEnsemble):
        values, weights = source.conditional_probs(z_a)
        w = source.weights(k)
        if z_a is None:
            weights = np.repeat(w / source.d_a, source.d_a)
        else:
            weights = w
        raw = float(np.sum(weights * values**k))
        scale = rising_factorial(source.d_a, k)
        return MomentResult(k=k, raw=raw, rescaled=raw * scale)
    hist: ProbHistogram = source
    if d_a is None:
        raise ValueError("d_a is required for histogram-based moments")
    raw = float(np.sum(hist.mass * hist.centers**k))
    scale = rising_factorial(d_a, k)
    raw_err = rescaled_err = None
    if hist.n_samples:
        rng = np.random.default_rng(seed)
        draws = rng.multinomial(hist.n_samples, hist.mass, size=n_bootstrap) / hist.n_samples
        boot = draws @ hist.centers**k
        raw_err = float(np.std(boot))
        rescaled_err = raw_err * scale
    return MomentResult(k=k, raw=raw, rescaled=raw * scale,
                        raw_err=raw_err, rescaled_err=rescaled_err)


def correlator_fluctuation(ens: ProjectedEnsemble) -> float:
    """RMS connected ZZ correlator of a two-site subsystem.

    sqrt( sum_zB p(z_B) C(z1, z2 | z_B)^2 ) with C the connected
    correlator of Pauli Z values (+1 for 0, -1 for 1) on the two A sites.
    """
    if ens.part.len_a != 2:
        raise ValueError("correlator_fluctuation requires a two-site subsystem")
    s1 = 1.0 - 2.0 * ((ens.a_codes >> 1) & 1)
    s2 = 1.0 - 2.0 * (ens.a_codes & 1)
    probs = np.abs(ens.states) ** 2
    ez1 = probs @ s1
    ez2 = probs @ s2
    ez1z2 = probs @ (s1 * s2)
    c = ez1z2 - ez1 * ez2
    return float(np.sqrt(np.sum(ens.probs * c**2)))


# ---------------------------------------------------------------------------
# Haar and Scrooge reference laws

def haar_states(d: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """n Haar-random pure states of dimension d (rows, normalized)."""
    z = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def haar_moment_scalar(d: int, k: int) -> float:
    """E |<z|psi>|^{2k} over Haar: k! / (d (d+1) ... (d+k-1))."""
    return math.factorial(k) / rising_factorial(d, k)


def haar_density(p, d: int):
    """Probability density (d-1)(1-p)^(d-2) of a Haar component."""
    p = np.asarray(p, dtype=float)
    return (d - 1) * (1.0 - p) ** (d - 2)


def haar_bin_mass(edges: np.ndarray, d: int) -> np.ndarray:
    cdf = 1.0 - (1.0 - np.asarray(edges, float)) ** (d - 1)
    return np.diff(cdf)


def haar_count_pmf(n_shots: int, d: int) -> np.ndarray:
    """Distribution of the count k out of n shots hitting a fixed component
    when the underlying probability is Haar-distributed.

    Beta-binomial form: (d-1) C(n,k) B(k+1, n-k+d-1).  For d=2 this is
    uniform on 0..n.
    """
    k = np.arange(n_shots + 1)
    log_comb = gammaln(n_shots + 1) - gammaln(k + 1) - gammaln(n_shots - k + 1)
    log_pmf = np.log(d - 1) + log_comb + betaln(k + 1, n_shots - k + d - 1)
    pmf = np.exp(log_pmf)
    return pmf / pmf.sum()


def scrooge_density_params(marginal: float) -> tuple[float, float]:
    """Constants (a, b) of the density (a p + b (1-p))^-3 fixed by
    normalization and a mean equal to ``marginal``."""
    if not 0 < marginal < 1:
        raise ValueError("marginal must lie strictly between 0 and 1")
    a = ((1.0 - marginal) / (2.0 * marginal**2)) ** (1.0 / 3.0)
    b = 1.0 / (2.0 * a**2 * marginal)
    return a, b


def scrooge_density(p, marginal: float):
    a, b = scrooge_density_params(marginal)
    p = np.asarray(p, dtype=float)
    return (a * p + b * (1.0 - p)) ** (-3.0)


def scrooge_bin_mass(edges: np.ndarray, marginal: float) -> np.ndarray:
    a, b = scrooge_density_params(marginal)
    edges = np.asarray(edges, dtype=float)
    c = a - b
    if abs(c) < 1e-12:
        return np.diff(edges)
    cdf = -1.0 / (2.0 * c * (b + c * edges) ** 2)
    mass = np.diff(cdf)
    return mass / mass.sum()


def scrooge_count_pmf(n_shots: int, marginal: float, quad_points: int = 512) -> np.ndarray:
    """Count distribution analogous to ``haar_count_pmf`` for the
    finite-temperature (Scrooge) law, by Gauss-Legendre quadrature."""
    nodes, weights = np.polynomial.legendre.leggauss(quad_points)
    p = 0.5 * (nodes + 1.0)
    wq = 0.5 * weights * scrooge_density(p, marginal)
    k = np.arange(n_shots + 1)
    log_comb = gammaln(n_shots + 1) - gammaln(k + 1) - gammaln(n_shots - k + 1)
    with np.errstate(divide="ignore"):
        log_p = np.log(p)
        log_q = np.log1p(-p)
    log_binom = log_comb[:, None] + k[:, None] * log_p[None, :] \
        + (n_shots - k)[:, None] * log_q[None, :]
    pmf = np.exp(log_binom) @ wq
    return pmf / pmf.sum()


@dataclass
class ScroogeEnsemble:
    """Sampled rho-adjusted uniform ensemble with normalized weights."""

    rho: np.ndarray
    states: np.ndarray
    weights: np.ndarray

    def first_moment(self) -> np.ndarray:
        return (self.weights[:, None] * self.states).T @ self.states.conj()


def scrooge_ensemble(rho: np.ndarray, n_states: int, seed: int) -> ScroogeEnsemble:
    """Sample the distorted-uniform ensemble whose first moment is ``rho``.

    States are Haar draws mapped through rho^(1/2) and renormalized, with
    weights proportional to D <psi| rho |psi>.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    d = rho.shape[0]
    evals, evecs = np.linalg.eigh(rho)
    if np.any(evals < -1e-12) or abs(evals.sum() - 1.0) > 1e-9:
        raise ValueError("rho must be a unit-trace positive operator")
    sqrt_rho = (evecs * np.sqrt(np.clip(evals, 0, None))) @ evecs.conj().T
    rng = np.random.default_rng(seed)
    psi = haar_states(d, n_states, rng)
    mapped = psi @ sqrt_rho.T
    quad = np.real(np.sum(mapped.conj() * mapped, axis=1))  # <psi|rho|psi>
    states = mapped / np.sqrt(quad)[:, None]
    weights = quad * d
    return ScroogeEnsemble(rho=rho, states=states, weights=weights / weights.sum())
