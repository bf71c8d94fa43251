"""Basis enumeration, bitstring indexing, and bipartition bookkeeping.

Conventions used throughout the package:

* A measurement outcome on ``N`` sites is a bitstring ``z = z_1 z_2 ... z_N``
  with site 1 printed leftmost.  Internally a bitstring is packed into a
  Python int ("code") with site 1 as the most significant bit, so that
  lexicographic order on printed strings equals numeric order on codes.
* Basis states are enumerated in lexicographic (numeric) order, which fixes
  reproducible indices across runs.
* The ``blockade`` constraint forbids two adjacent sites from being 1
  simultaneously; the resulting dimension follows the Fibonacci recurrence
  dim(N) = dim(N-1) + dim(N-2) with dim(1) = 2, dim(2) = 3.
* Parity sectors refer to the site-reversal (left-right inversion) symmetry.
  A sector basis enumerates representative codes: ``min(z, reverse(z))`` of
  each symmetric pair, with palindromes belonging to the even sector only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

MAX_N_FULL = 24
MAX_N_BLOCKADE = 32

NORM_ATOL = 1e-10


# ---------------------------------------------------------------------------
# bitstring codes

def bitstring_to_code(z: str) -> int:
    """Pack an ASCII 0/1 string (site 1 first) into an integer code."""
    if not z or any(c not in "01" for c in z):
        raise ValueError(f"not a 0/1 bitstring: {z!r}")
    return int(z, 2)


def code_to_bitstring(code: int, n: int) -> str:
    """Unpack an integer code into an ASCII 0/1 string of length ``n``."""
    if code < 0 or code >= (1 << n):
        raise ValueError(f"code {code} out of range for {n} sites")
    return format(code, f"0{n}b")


def reverse_code(code: int, n: int) -> int:
    """Site-reversed code, z_1...z_N -> z_N...z_1."""
    out = 0
    for _ in range(n):
        out = (out << 1) | (code & 1)
        code >>= 1
    return out


def parity_partner(z: str) -> str:
    """Site-reversed bitstring; an involution with palindromic fixed points."""
    return z[::-1]


def is_blockade_legal(code: int) -> bool:
    """True when no two adjacent sites are both 1."""
    return (code & (code >> 1)) == 0


@lru_cache(maxsize=None)
def blockade_dim(n: int) -> int:
    """Dimension of the n-site blockaded space (Fibonacci recurrence)."""
    if n == 0:
        return 1
    if n == 1:
        return 2
    return blockade_dim(n - 1) + blockade_dim(n - 2)


def _blockade_codes(n: int) -> np.ndarray:
    # codes(m) = codes starting 0 (recurse m-1) then codes starting 10 (recurse m-2)
    prev2 = np.zeros(1, dtype=np.int64)         # m = 0
    prev1 = np.array([0, 1], dtype=np.int64)    # m = 1
    if n == 0:
        return prev2
    for m in range(2, n + 1):
        cur = np.concatenate([prev1, (np.int64(1) << (m - 1)) | prev2])
        prev2, prev1 = prev1, cur
    return prev1


def enumerate_codes(n: int, constraint: str) -> np.ndarray:
    """Sorted array of basis codes for ``n`` sites under the constraint."""
    if constraint == "full":
        return np.arange(1 << n, dtype=np.int64)
    if constraint == "blockade":
        return np.sort(_blockade_codes(n))
    raise ValueError(f"unknown constraint {constraint!r}")


# ---------------------------------------------------------------------------
# basis maps

@dataclass(frozen=True)
class BasisMap:
    """Immutable enumeration of a Hilbert-space basis.

    ``states`` holds the sorted basis codes.  For parity sectors the codes
    are pair representatives (see module docstring); ``dim`` is then the
    sector dimension, not the number of raw bitstrings.
    """

    n: int
    constraint: str
    sector: str
    states: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.states.size)

    def index(self, z: int | str) -> int:
        """Dense index of a bitstring (code or ASCII string)."""
        code = bitstring_to_code(z) if isinstance(z, str) else int(z)
        i = int(np.searchsorted(self.states, code))
        if i >= self.dim or self.states[i] != code:
            raise KeyError(f"bitstring {code_to_bitstring(code, self.n)} not in basis")
        return i

    def contains(self, code: int) -> bool:
        i = int(np.searchsorted(self.states, code))
        return i < self.dim and self.states[i] == code

    def code(self, i: int) -> int:
        return int(self.states[i])

    def bitstring(self, i: int) -> str:
        return code_to_bitstring(self.code(i), self.n)

    def bits(self) -> np.ndarray:
        """(dim, n) uint8 array of site occupations, site 1 in column 0."""
        shifts = np.arange(self.n - 1, -1, -1, dtype=np.int64)
        return ((self.states[:, None] >> shifts[None, :]) & 1).astype(np.uint8)

    def reversal_permutation(self) -> np.ndarray:
        """Index permutation i -> index(reverse(code(i))).

        Only defined for sector "all" bases, which are closed under reversal.
        """
        if self.sector != "all":
            raise ValueError("reversal permutation requires the sector-less basis")
        rev = np.fromiter(
            (reverse_code(int(c), self.n) for c in self.states),
            dtype=np.int64,
            count=self.dim,
        )
        perm = np.searchsorted(self.states, rev)
        return perm.astype(np.int64)


def build_basis(n: int, constraint: str = "full", sector: str = "all") -> BasisMap:
    """Enumerate a basis for ``n`` sites.

    ``constraint`` is "full" or "blockade"; ``sector`` is "all", "even", or
    "odd" (site-reversal parity).  Ordering is lexicographic on bitstrings.
    """
    if constraint not in ("full", "blockade"):
        raise ValueError(f"unknown constraint {constraint!r}")
    if sector not in ("all", "even", "odd"):
        raise ValueError(f"unknown sector {sector!r}")
    limit = MAX_N_FULL if constraint == "full" else MAX_N_BLOCKADE
    if not 1 <= n <= limit:
        raise ValueError(f"n={n} outside supported range 1..{limit} for {constraint}")
    codes = enumerate_codes(n, constraint)
    if sector != "all":
        rev = np.fromiter((reverse_code(int(c), n) for c in codes), dtype=np.int64, count=codes.size)
        if sector == "even":
            keep = codes <= rev
        else:
            keep = codes < rev
        codes = codes[keep]
    return BasisMap(n=n, constraint=constraint, sector=sector, states=codes)


# ---------------------------------------------------------------------------
# bipartitions

@dataclass(frozen=True)
class Bipartition:
    """Split of sites {1..n} into a subsystem A and its complement B.

    With ``boundary_rule`` set, only measurement outcomes with 0 on every
    B site adjacent (on the chain) to A are admissible; this keeps the
    conditional A space at a fixed dimension under the blockade constraint.
    """

    n: int
    sites_a: tuple[int, ...]
    boundary_rule: bool = False
    sites_b: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        sites_a = tuple(sorted(self.sites_a))
        if not sites_a:
            raise ValueError("subsystem A must be non-empty")
        if sites_a[0] < 1 or sites_a[-1] > self.n or len(set(sites_a)) != len(sites_a):
            raise ValueError(f"invalid A sites {sites_a} for n={self.n}")
        if len(sites_a) == self.n:
            raise ValueError("subsystem B must be non-empty")
        object.__setattr__(self, "sites_a", sites_a)
        in_a = set(sites_a)
        object.__setattr__(
            self, "sites_b", tuple(s for s in range(1, self.n + 1) if s not in in_a)
        )

    @classmethod
    def contiguous(cls, n: int, len_a: int, start: int = 1, boundary_rule: bool = False) -> "Bipartition":
        return cls(n=n, sites_a=tuple(range(start, start + len_a)), boundary_rule=boundary_rule)

    @property
    def len_a(self) -> int:
        return len(self.sites_a)

    @property
    def len_b(self) -> int:
        return len(self.sites_b)

    def border_sites_b(self) -> tuple[int, ...]:
        """B sites adjacent to A on the 1D chain."""
        in_a = set(self.sites_a)
        out = []
        for s in self.sites_b:
            if (s - 1) in in_a or (s + 1) in in_a:
                out.append(s)
        return tuple(out)

    def runs_a(self) -> list[tuple[int, ...]]:
        """Maximal contiguous runs of A sites."""
        runs: list[list[int]] = []
        for s in self.sites_a:
            if runs and s == runs[-1][-1] + 1:
                runs[-1].append(s)
            else:
                runs.append([s])
        return [tuple(r) for r in runs]

    def split_code(self, code: int) -> tuple[int, int]:
        """Split a global code into (code_a, code_b), each in site order."""
        za = 0
        for s in self.sites_a:
            za = (za << 1) | ((code >> (self.n - s)) & 1)
        zb = 0
        for s in self.sites_b:
            zb = (zb << 1) | ((code >> (self.n - s)) & 1)
        return za, zb

    def join_codes(self, code_a: int, code_b: int) -> int:
        """Inverse of split_code."""
        code = 0
        for k, s in enumerate(self.sites_a):
            bit = (code_a >> (self.len_a - 1 - k)) & 1
            code |= bit << (self.n - s)
        for k, s in enumerate(self.sites_b):
            bit = (code_b >> (self.len_b - 1 - k)) & 1
            code |= bit << (self.n - s)
        return code

    def admissible_b(self, code_b: int) -> bool:
        """Boundary-rule check on a B outcome (always True when rule is off)."""
        if not self.boundary_rule:
            return True
        border = set(self.border_sites_b())
        for k, s in enumerate(self.sites_b):
            if s in border and (code_b >> (self.len_b - 1 - k)) & 1:
                return False
        return True


def split_bitstring(z: str, part: Bipartition) -> tuple[str, str]:
    """Split a printed bitstring into its (z_A, z_B) substrings."""
    if len(z) != part.n:
        raise ValueError(f"bitstring length {len(z)} does not match n={part.n}")
    za = "".join(z[s - 1] for s in part.sites_a)
    zb = "".join(z[s - 1] for s in part.sites_b)
    return za, zb


def join_bitstring(za: str, zb: str, part: Bipartition) -> str:
    """Reassemble a global bitstring from its (z_A, z_B) substrings."""
    if len(za) != part.len_a or len(zb) != part.len_b:
        raise ValueError("substring lengths do not match the bipartition")
    out = [""] * part.n
    for c, s in zip(za, part.sites_a):
        out[s - 1] = c
    for c, s in zip(zb, part.sites_b):
        out[s - 1] = c
    return "".join(out)


def subsystem_basis(part: Bipartition, constraint: str) -> np.ndarray:
    """Sorted admissible z_A codes for the subsystem under the constraint.

    Under "blockade" each contiguous run of A sites is independently
    blockade-legal; with the boundary rule active the bordering B sites are
    0, so no cross-boundary constraint remains.
    """
    if constraint == "full":
        return np.arange(1 << part.len_a, dtype=np.int64)
    if constraint != "blockade":
        raise ValueError(f"unknown constraint {constraint!r}")
    codes = np.zeros(1, dtype=np.int64)
    for run in part.runs_a():
        run_codes = enumerate_codes(len(run), "blockade")
        codes = (codes[:, None] << len(run) | run_codes[None, :]).reshape(-1)
    return np.sort(codes)


def subsystem_dim(part: Bipartition, constraint: str) -> int:
    """Dimension of the admissible z_A space (see ``subsystem_basis``)."""
    if constraint == "full":
        return 1 << part.len_a
    dim = 1
    for run in part.runs_a():
        dim *= blockade_dim(len(run))
    return dim


# ---------------------------------------------------------------------------
# state vectors

@dataclass
class StateVector:
    """Normalized complex amplitude vector over a BasisMap."""

    basis: BasisMap
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=np.complex128)
        if self.amps.shape != (self.basis.dim,):
            raise ValueError(
                f"amplitude shape {self.amps.shape} does not match basis dim {self.basis.dim}"
            )
        nrm = float(np.sum(np.abs(self.amps) ** 2))
        if abs(nrm - 1.0) > NORM_ATOL:
            raise ValueError(f"state not normalized: sum |amp|^2 = {nrm!r}")

    @classmethod
    def from_unnormalized(cls, basis: BasisMap, amps: np.ndarray) -> "StateVector":
        amps = np.asarray(amps, dtype=np.complex128)
        nrm = np.linalg.norm(amps)
        if nrm == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(basis, amps / nrm)

    @classmethod
    def zero_state(cls, basis: BasisMap) -> "StateVector":
        """|00...0>, which is index 0 in lexicographic ordering."""
        amps = np.zeros(basis.dim, dtype=np.complex128)
        amps[basis.index(0)] = 1.0
        return cls(basis, amps)

    @classmethod
    def basis_state(cls, basis: BasisMap, z: int | str) -> "StateVector":
        amps = np.zeros(basis.dim, dtype=np.complex128)
        amps[basis.index(z)] = 1.0
        return cls(basis, amps)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def overlap(self, other: "StateVector") -> complex:
        if self.basis.states is not other.basis.states and not np.array_equal(
            self.basis.states, other.basis.states
        ):
            raise ValueError("overlap requires a shared basis")
        return complex(np.vdot(self.amps, other.amps))


def restrict_state(state: StateVector, target: BasisMap) -> tuple[StateVector, float]:
    """Project a state onto a sub-basis and renormalize.

    Returns the restricted state and the projected weight (the probability
    mass carried by the retained codes).  Mirrors experimental post-selection
    onto the blockade sector.
    """
    if target.n != state.basis.n:
        raise ValueError("basis size mismatch")
    pos = np.searchsorted(state.basis.states, target.states)
    if np.any(pos >= state.basis.dim) or np.any(state.basis.states[pos] != target.states):
        raise ValueError("target basis is not a subset of the state's basis")
    sub = state.amps[pos]
    weight = float(np.sum(np.abs(sub) ** 2))
    if weight <= 0:
        raise ValueError("state has no weight in the target basis")
    return StateVector(target, sub / np.sqrt(weight)), weight


def expand_state(state: StateVector, target: BasisMap) -> StateVector:
    """Embed a state into a larger basis (amplitudes elsewhere are 0)."""
    if target.n != state.basis.n:
        raise ValueError("basis size mismatch")
    pos = np.searchsorted(target.states, state.basis.states)
    if np.any(pos >= target.dim) or np.any(target.states[pos] != state.basis.states):
        raise ValueError("state's basis is not a subset of the target basis")
    amps = np.zeros(target.dim, dtype=np.complex128)
    amps[pos] = state.amps
    return StateVector(target, amps)
