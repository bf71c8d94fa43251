"""Fidelity estimators from bitstring statistics.

The cross-correlation estimator

    F_c = 2 * sum_z p0(z) p(z) / sum_z p0(z)^2 - 1

compares an ideal distribution p0 against an observed one p (exact tables
or finite samples).  A blockade- and parity-adjusted variant handles
constrained chains with a site-reversal symmetry; the linear cross-entropy
benchmark and KL divergence are provided for comparison.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hilbert import (
    BasisMap,
    StateVector,
    bitstring_to_code,
    code_to_bitstring,
    is_blockade_legal,
    reverse_code,
)
from .samples import SampleSet

SPARSE_TABLE_THRESHOLD = 1 << 20


# ---------------------------------------------------------------------------
# probability tables

@dataclass
class ProbTable:
    """Probabilities over a basis (dense) or over observed bitstrings (sparse).

    Dense tables carry a BasisMap and must sum to 1 within 1e-9; sparse
    tables map codes to probabilities and may sum to less than 1.
    """

    n: int
    basis: BasisMap | None = None
    probs: np.ndarray | None = None
    table: dict[int, float] | None = None

    def __post_init__(self):
        if (self.probs is None) == (self.table is None):
            raise ValueError("provide exactly one of probs (dense) or table (sparse)")
        if self.probs is not None:
            if self.basis is None:
                raise ValueError("dense tables need a basis")
            self.probs = np.asarray(self.probs, dtype=float)
            if self.probs.shape != (self.basis.dim,):
                raise ValueError("probability vector does not match the basis")
            if np.any(self.probs < -1e-12):
                raise ValueError("negative probability")
            total = float(self.probs.sum())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"dense table sums to {total!r}")
        else:
            total = float(sum(self.table.values()))
            if total > 1 + 1e-9 or any(v < -1e-12 for v in self.table.values()):
                raise ValueError("sparse table has invalid probabilities")

    @property
    def is_dense(self) -> bool:
        return self.probs is not None

    @classmethod
    def from_state(cls, state: StateVector) -> "ProbTable":
        return cls(n=state.basis.n, basis=state.basis, probs=state.probabilities())

    @classmethod
    def from_samples(cls, samples: SampleSet, basis: BasisMap | None = None) -> "ProbTable":
        """Empirical frequencies; dense when a basis is given (out-of-basis
        shots are dropped), sparse over observed codes otherwise."""
        codes, counts = samples.counts()
        if basis is not None:
            probs = np.zeros(basis.dim)
            pos = np.searchsorted(basis.states, codes)
            ok = (pos < basis.dim) & (basis.states[np.minimum(pos, basis.dim - 1)] == codes)
            probs[pos[ok]] = counts[ok]
            return cls(n=basis.n, basis=basis, probs=probs / probs.sum())
        total = counts.sum()
        return cls(n=samples.n, table={int(c): k / total for c, k in zip(codes, counts)})

    def lookup(self, codes: np.ndarray) -> np.ndarray:
        """p0 values for packed bitstrings; codes outside the table give 0."""
        codes = np.asarray(codes, dtype=np.int64)
        if self.is_dense:
            pos = np.searchsorted(self.basis.states, codes)
            pos_c = np.minimum(pos, self.basis.dim - 1)
            ok = self.basis.states[pos_c] == codes
            return np.where(ok, self.probs[pos_c], 0.0)
        return np.array([self.table.get(int(c), 0.0) for c in codes])

    def sum_sq(self) -> float:
        if self.is_dense:
            return float(np.sum(self.probs**2))
        return float(sum(v * v for _, v in sorted(self.table.items())))

    # -- CSV persistence (bitstring, probability) ---------------------------

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("bitstring,probability\n")
            if self.is_dense:
                for code, p in zip(self.basis.states, self.probs):
                    f.write(f"{code_to_bitstring(int(code), self.n)},{float(p)!r}\n")
            else:
                for code in sorted(self.table):
                    f.write(f"{code_to_bitstring(code, self.n)},{float(self.table[code])!r}\n")

    @classmethod
    def read_csv(cls, path: str | Path, basis: BasisMap | None = None) -> "ProbTable":
        table: dict[int, float] = {}
        n = None
        with open(path, encoding="utf-8") as f:
            for lineno, raw in enumerate(f, start=1):
                line = raw.strip()
                if not line or line.lower().startswith("bitstring"):
                    continue
                try:
                    z, p = line.split(",")
                    code = bitstring_to_code(z.strip())
                    table[code] = float(p)
                except ValueError as exc:
                    raise ValueError(f"{path}:{lineno}: bad table row {line!r}") from exc
                n = len(z.strip()) if n is None else n
        if n is None:
            raise ValueError(f"{path}: empty probability table")
        if basis is not None:
            probs = np.zeros(basis.dim)
            for code, p in table.items():
                probs[basis.index(code)] = p
            return cls(n=n, basis=basis, probs=probs)
        return cls(n=n, table=table)


def _common_support(p0: ProbTable, p: ProbTable):
    """(p0 values, p values) on the union support, in canonical code order."""
    if p0.n != p.n:
        raise ValueError("tables are over different system sizes")
    if p0.is_dense and p.is_dense:
        if not np.array_equal(p0.basis.states, p.basis.states):
            raise ValueError("dense tables must share a basis")
        return p0.probs, p.probs
    keys0 = set(p0.table) if not p0.is_dense else set(int(c) for c in p0.basis.states)
    keys1 = set(p.table) if not p.is_dense else set(int(c) for c in p.basis.states)
    keys = np.array(sorted(keys0 | keys1), dtype=np.int64)
    return p0.lookup(keys), p.lookup(keys)


# ---------------------------------------------------------------------------
# estimators

@dataclass
class FcReport:
    """Outcome of a fidelity estimation."""

    value: float
    variant: str                      # "exact" | "empirical" | "blockade-parity"
    m: int | None = None
    sigma: float | None = None
    b: float | None = None
    b0: float | None = None
    n_out_of_basis: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.variant == "empirical" and (self.m is None or self.m < 1):
            raise ValueError("empirical reports require the shot count")


def fc_exact(p0: ProbTable, p: ProbTable) -> float:
    """Cross-correlation fidelity estimator from two full distributions."""
    v0, v = _common_support(p0, p)
    denom = float(np.sum(v0 * v0))
    if denom <= 0:
        raise ValueError("reference distribution has zero second moment")
    return 2.0 * float(np.sum(v0 * v)) / denom - 1.0


def fc_empirical(p0: ProbTable, samples: SampleSet, n_bootstrap: int = 200,
                 seed: int = 0) -> FcReport:
    """Unbiased finite-sample estimator of fc_exact.

    Sample bitstrings missing from the reference table contribute p0 = 0
    and are counted in the report.  The attached sigma is a bootstrap
    standard error (deterministic in ``seed``).
    """
    m = samples.shots
    if m < 1:
        raise ValueError("need at least one sample")
    vals = p0.lookup(samples.codes)
    n_out = int(np.count_nonzero(vals == 0.0))
    denom = p0.sum_sq()
    if denom <= 0:
        raise ValueError("reference distribution has zero second moment")
    value = 2.0 * float(vals.mean()) / denom - 1.0
    sigma = None
    if n_bootstrap > 0:
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, m, size=(n_bootstrap, m))
        boot = 2.0 * vals[idx].mean(axis=1) / denom - 1.0
        sigma = float(np.std(boot))
    return FcReport(value=value, variant="empirical", m=m, sigma=sigma,
                    n_out_of_basis=n_out)


# ---------------------------------------------------------------------------
# blockade- and parity-adjusted estimator

def _parity_collapse(codes: np.ndarray, probs: np.ndarray, n: int):
    """Fold probabilities onto site-reversal representatives min(z, rev z)."""
    rev = np.fromiter((reverse_code(int(c), n) for c in codes), np.int64, codes.size)
    reps = np.minimum(codes, rev)
    uniq, inv = np.unique(reps, return_inverse=True)
    folded = np.zeros(uniq.size)
    np.add.at(folded, inv, probs)
    return uniq, folded


def _blockade_filter(codes: np.ndarray, probs: np.ndarray):
    legal = np.fromiter((is_blockade_legal(int(c)) for c in codes), bool, codes.size)
    return codes[legal], probs[legal], float(probs[legal].sum())


def fc_rydberg(p0: ProbTable, p, b: float | None = None, b0: float | None = None,
               n_bootstrap: int = 200, seed: int = 0) -> FcReport:
    """Blockade-sector, parity-symmetrized fidelity estimator.

    Probabilities are restricted to the blockade sector and renormalized;
    both a bitstring and its site reversal are attributed to the same
    even-parity state, so sector probabilities are folded onto reversal
    representatives before correlating.  The result carries the factor
    B(t) B0(t) of sector weights (estimated from the inputs when not
    given).  ``p`` may be a ProbTable or a SampleSet; out-of-sector
    samples are discarded.
    """
    n = p0.n
    if p0.is_dense:
        codes0, probs0 = p0.basis.states, p0.probs
    else:
        codes0 = np.array(sorted(p0.table), dtype=np.int64)
        probs0 = p0.lookup(codes0)
    codes0, probs0, mass0 = _blockade_filter(codes0, probs0)
    if codes0.size == 0 or mass0 <= 0:
        raise ValueError("reference has no weight in the blockade sector")
    if b0 is None:
        b0 = mass0
    rep0, folded0 = _parity_collapse(codes0, probs0 / mass0, n)
    denom = float(np.sum(folded0**2))
    if denom <= 0:
        raise ValueError("reference distribution has zero second moment")

    if isinstance(p, SampleSet):
        m = p.shots
        legal = np.fromiter((is_blockade_legal(int(c)) for c in p.codes), bool, m)
        m_in = int(np.count_nonzero(legal))
        if m_in == 0:
            raise ValueError("no samples fall in the blockade sector")
        b_estimated = b is None
        if b_estimated:
            b = m_in / m
        kept = p.codes[legal]
        rev = np.fromiter((reverse_code(int(c), n) for c in kept), np.int64, m_in)
        reps = np.minimum(kept, rev)
        pos = np.searchsorted(rep0, reps)
        pos_c = np.minimum(pos, rep0.size - 1)
        vals = np.where(rep0[pos_c] == reps, folded0[pos_c], 0.0)
        core = 2.0 * float(vals.mean()) / denom - 1.0
        value = b * b0 * core
        sigma = None
        if n_bootstrap > 0:
            rng = np.random.default_rng(seed)
            idx = rng.integers(0, m_in, size=(n_bootstrap, m_in))
            boot_core = 2.0 * vals[idx].mean(axis=1) / denom - 1.0
            if b_estimated and m > m_in:
                frac = rng.binomial(m, m_in / m, size=n_bootstrap) / m
            else:
                frac = np.full(n_bootstrap, b)
            sigma = float(np.std(frac * b0 * boot_core))
        return FcReport(value=value, variant="blockade-parity", m=m, sigma=sigma,
                        b=b, b0=b0, n_out_of_basis=m - m_in)

    if p.is_dense:
        codes1, probs1 = p.basis.states, p.probs
    else:
        codes1 = np.array(sorted(p.table), dtype=np.int64)
        probs1 = p.lookup(codes1)
    codes1, probs1, mass1 = _blockade_filter(codes1, probs1)
    if b is None:
        b = mass1
    if mass1 <= 0:
        raise ValueError("observed distribution has no blockade-sector weight")
    rep1, folded1 = _parity_collapse(codes1, probs1 / mass1, n)
    pos = np.searchsorted(rep0, rep1)
    pos_c = np.minimum(pos, rep0.size - 1)
    vals0 = np.where(rep0[pos_c] == rep1, folded0[pos_c], 0.0)
    core = 2.0 * float(np.sum(vals0 * folded1)) / denom - 1.0
    return FcReport(value=b * b0 * core, variant="blockade-parity", b=b, b0=b0)


# ---------------------------------------------------------------------------
# cross-entropy and divergence

def fxeb(p0: ProbTable, p: ProbTable, d: int | None = None) -> float:
    """Linear cross-entropy benchmark (D+1) sum p0 p - 1."""
    v0, v = _common_support(p0, p)
    if d is None:
        d = p0.basis.dim if p0.is_dense else 1 << p0.n
    return (d + 1) * float(np.sum(v0 * v)) - 1.0


def kl_divergence(p_ref: ProbTable, p_model: ProbTable) -> float:
    """sum p_ref log(p_ref / p_model); +inf on support violations."""
    v_ref, v_model = _common_support(p_ref, p_model)
    active = v_ref > 0
    if np.any(v_model[active] <= 0):
        warnings.warn("model assigns zero probability on the reference support",
                      RuntimeWarning, stacklevel=2)
        return math.inf
    return float(np.sum(v_ref[active] * np.log(v_ref[active] / v_model[active])))


# ---------------------------------------------------------------------------
# sample complexity

@dataclass
class SampleComplexityFit:
    a: float
    a_err: float
    n_points: int


def sample_complexity(entries) -> SampleComplexityFit:
    """Fit sigma(F_c) sqrt(M) = a^N over a grid of (N, M, sigma) records.

    Least squares in log space through the origin; requires at least
    3 distinct N and 4 distinct M values.
    """
    entries = [(int(n), int(m), float(s)) for n, m, s in entries]
    ns = {e[0] for e in entries}
    ms = {e[1] for e in entries}
    if len(ns) < 3 or len(ms) < 4:
        raise ValueError("need at least 3 system sizes and 4 sample sizes")
    x = np.array([e[0] for e in entries], dtype=float)
    y = np.log([s * math.sqrt(m) for _, m, s in entries])
    log_a = float(np.sum(x * y) / np.sum(x * x))
    resid = y - log_a * x
    var = float(np.sum(resid**2) / max(len(entries) - 1, 1) / np.sum(x * x))
    a = math.exp(log_a)
    return SampleComplexityFit(a=a, a_err=a * math.sqrt(var), n_points=len(entries))


# ---------------------------------------------------------------------------
# single-error experiments

@dataclass
class SingleErrorResult:
    times: np.ndarray
    tau: np.ndarray
    fidelity: np.ndarray
    fc: np.ndarray
    angle: float
    error_site: int


def apply_phase_error(state: StateVector, site: int, angle: float) -> StateVector:
    """Instantaneous z-phase rotation exp(i angle n_site) on one site."""
    bit = np.int64(1) << (state.basis.n - site)
    phases = np.where((state.basis.states & bit) != 0, np.exp(1j * angle), 1.0)
    return StateVector(state.basis, state.amps * phases)


def apply_rotation_error(state: StateVector, site: int, angle: float,
                         axis: str = "x") -> StateVector:
    """Single-site rotation exp(-i angle sigma_axis / 2); needs a full basis
    for x or y (bit flips leave the blockade sector)."""
    if axis == "z":
        # equivalent to a phase rotation up to a global phase
        rotated = apply_phase_error(state, site, angle)
        return StateVector(state.basis, rotated.amps * np.exp(-1j * angle / 2))
    if state.basis.constraint != "full":
        raise ValueError("x/y rotations require the full basis")
    n = state.basis.n
    bit = np.int64(1) << (n - site)
    flipped_idx = np.searchsorted(state.basis.states, state.basis.states ^ bit)
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    partner = state.amps[flipped_idx]
    if axis == "x":
        amps = c * state.amps - 1j * s * partner
    elif axis == "y":
        sign = np.where((state.basis.states & bit) != 0, 1.0, -1.0)
        amps = c * state.amps + s * sign * partner
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return StateVector(state.basis, amps)


def single_error_experiment(h, basis: BasisMap, psi0: StateVector, error_site: int,
                            t_err: float, times, angle: float,
                            axis: str = "z") -> SingleErrorResult:
    """Fidelity and F_c traces for one instantaneous single-site error.

    The ideal branch evolves unperturbed; the erroneous branch picks up the
    rotation at ``t_err``.  F is the exact overlap, F_c the full-distribution
    estimator, both reported against tau = t - t_err.
    """
    from .evolve import evolve_exact

    times = np.asarray(times, dtype=float)
    if np.any(times < t_err):
        raise ValueError("evaluation times must not precede the error")
    ideal_at_err = evolve_exact(h, psi0, [t_err]).states[0]
    err_state = apply_rotation_error(ideal_at_err, error_site, angle, axis)
    ideal = evolve_exact(h, psi0, times).states
    erroneous = evolve_exact(h, err_state, times - t_err).states
    f = np.empty(times.size)
    fc = np.empty(times.size)
    for k, (si, se) in enumerate(zip(ideal, erroneous)):
        f[k] = abs(si.overlap(se)) ** 2
        fc[k] = fc_exact(ProbTable.from_state(si), ProbTable.from_state(se))
    return SingleErrorResult(times=times, tau=times - t_err, fidelity=f, fc=fc,
                             angle=angle, error_site=error_site)
