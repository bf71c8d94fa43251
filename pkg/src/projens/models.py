"""Parametric Hamiltonian and random-circuit builders.

Unit convention: every Hamiltonian coefficient is stored as an ordinary
frequency in MHz (the value usually quoted as X/2pi); time evolution applies
the 2pi factor internally with times in microseconds.  All builders return a
``scipy.sparse`` CSR matrix; call ``.toarray()`` for the dense form.

Local operators on the qubit basis (|0>, |1>), with |1> the excited state:
S^x = sigma_x / 2, S^y = sigma_y / 2, S^z = diag(+1/2, -1/2), n = |1><1|.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg

from .hilbert import BasisMap, build_basis

UNITARY_ATOL = 1e-12

# Fixed representative of the hardware-style iSWAP-like gate family:
# swap angle pi/2 and controlled phase pi/6.
FSIM_THETA = np.pi / 2
FSIM_PHI = np.pi / 6


class ConvergenceError(RuntimeError):
    """Iterative eigensolver failed; carries the worst residual."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


# ---------------------------------------------------------------------------
# model specifications

@dataclass(frozen=True)
class RydbergSpec:
    """Driven Rydberg chain with power-law 1/R^6 interactions.

    ``omega`` and ``delta`` are the global Rabi frequency and detuning in
    MHz, ``c6`` the interaction constant in MHz um^6, ``spacing`` the lattice
    constant in um.  Optional per-site offsets model static disorder;
    ``site_displacements`` shift atom positions along the chain, and
    ``positions`` (n x d array, um) overrides the chain geometry entirely.
    """

    n: int
    omega: float
    delta: float
    c6: float = 0.0
    spacing: float = 1.0
    omega_offsets: tuple[float, ...] | None = None
    delta_offsets: tuple[float, ...] | None = None
    site_displacements: tuple[float, ...] | None = None
    positions: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("lattice spacing must be positive")
        for name in ("omega_offsets", "delta_offsets", "site_displacements"):
            v = getattr(self, name)
            if v is not None and len(v) != self.n:
                raise ValueError(f"{name} must have length n={self.n}")
        if self.positions is not None and len(self.positions) != self.n:
            raise ValueError("positions must have one entry per site")

    def site_omegas(self) -> np.ndarray:
        out = np.full(self.n, self.omega, dtype=float)
        if self.omega_offsets is not None:
            out += np.asarray(self.omega_offsets, dtype=float)
        return out

    def site_deltas(self) -> np.ndarray:
        out = np.full(self.n, self.delta, dtype=float)
        if self.delta_offsets is not None:
            out += np.asarray(self.delta_offsets, dtype=float)
        return out

    def pair_couplings(self) -> np.ndarray:
        """Symmetric matrix V_ij = C6 / R_ij^6 in MHz (zero diagonal)."""
        if self.positions is not None:
            pos = np.asarray(self.positions, dtype=float)
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.sqrt(np.sum(diff**2, axis=-1))
        else:
            coord = self.spacing * np.arange(self.n, dtype=float)
            if self.site_displacements is not None:
                coord = coord + np.asarray(self.site_displacements, dtype=float)
            dist = np.abs(coord[:, None] - coord[None, :])
        with np.errstate(divide="ignore", invalid="ignore"):
            v = self.c6 / dist**6
        np.fill_diagonal(v, 0.0)
        return v


@dataclass(frozen=True)
class IonSpec:
    """Long-range transverse-field model with 1/|i-j| XX couplings."""

    n: int
    j: float = 1.0
    field_x: float = 0.4
    field_y: float = 0.45

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("ion model requires n >= 2")


@dataclass(frozen=True)
class QIMFSpec:
    """Mixed-field Ising chain with optional site-dependent S^z fields."""

    n: int
    field_x: float = 0.22
    field_y: float = 0.25
    coupling: float = 1.0
    site_fields: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.site_fields is not None and len(self.site_fields) != self.n:
            raise ValueError("site_fields must have length n")


@dataclass(frozen=True)
class QuenchSpec:
    """Generic 1D spin Hamiltonian: per-site S^x/S^y/S^z fields plus
    nearest-neighbor S^x S^x couplings (scalars broadcast over sites)."""

    n: int
    sx: float | tuple[float, ...] = 0.0
    sy: float | tuple[float, ...] = 0.0
    sz: float | tuple[float, ...] = 0.0
    sxsx: float | tuple[float, ...] = 0.0

    def site_coeffs(self, name: str) -> np.ndarray:
        v = getattr(self, name)
        size = self.n - 1 if name == "sxsx" else self.n
        if np.isscalar(v):
            return np.full(size, float(v))
        arr = np.asarray(v, dtype=float)
        if arr.shape != (size,):
            raise ValueError(f"{name} must be a scalar or length-{size} sequence")
        return arr


@dataclass
class CircuitLayer:
    pairs: tuple[tuple[int, int], ...]
    gates: list[np.ndarray]
    rotations: list[np.ndarray] | None = None  # one 2x2 per qubit, site order


@dataclass
class CircuitSpec:
    """Layered random circuit on a 1D chain with open boundaries.

    ``gate_set`` is "su4" (brickwork of Haar two-qubit gates) or "fsim"
    (random pi/2 single-qubit rotations about x, y, x+y before each
    two-qubit layer of the fixed iSWAP-like gate).  ``start_offset`` selects
    which brickwork topology comes first (0: pairs (1,2),(3,4),...).
    Layers are empty until materialized by ``build_circuit``.
    """

    n: int
    gate_set: str = "su4"
    depth: int = 1
    seed: int = 0
    start_offset: int = 0
    layers: list[CircuitLayer] = field(default_factory=list)

    def __post_init__(self):
        if self.gate_set not in ("su4", "fsim"):
            raise ValueError(f"unknown gate set {self.gate_set!r}")
        if self.depth < 0:
            raise ValueError("depth must be >= 0")
        if self.start_offset not in (0, 1):
            raise ValueError("start_offset must be 0 or 1")


# ---------------------------------------------------------------------------
# Hamiltonian assembly

def _flip_terms(basis: BasisMap, site_coeffs: np.ndarray, phase: str):
    """COO triplets for sum_i c_i S^{x or y}_i restricted to the basis."""
    n = basis.n
    codes = basis.states
    rows_all, cols_all, data_all = [], [], []
    for i in range(n):
        bit = np.int64(1) << (n - 1 - i)
        flipped = codes ^ bit
        if basis.constraint == "blockade":
            legal = (flipped & (flipped >> 1)) == 0
        else:
            legal = np.ones(codes.size, dtype=bool)
        src = np.nonzero(legal)[0]
        tgt = np.searchsorted(codes, flipped[src])
        c = site_coeffs[i] / 2.0
        if phase == "x":
            data = np.full(src.size, c, dtype=np.complex128)
        else:
            # <z'|S^y|z> = +i c for a 0 -> 1 flip, -i c otherwise
            up = (codes[src] & bit) == 0
            data = np.where(up, 1j * c, -1j * c)
        rows_all.append(tgt)
        cols_all.append(src)
        data_all.append(data)
    return rows_all, cols_all, data_all


def _assemble(basis: BasisMap, diag: np.ndarray, offdiag) -> scipy.sparse.csr_matrix:
    rows, cols, data = offdiag
    rows = np.concatenate(rows + [np.arange(basis.dim)])
    cols = np.concatenate(cols + [np.arange(basis.dim)])
    data = np.concatenate(data + [diag.astype(np.complex128)])
    h = scipy.sparse.coo_matrix((data, (rows, cols)), shape=(basis.dim, basis.dim))
    return h.tocsr()


def build_rydberg(spec: RydbergSpec, basis: BasisMap) -> scipy.sparse.csr_matrix:
    """H = sum_i Omega_i S^x_i - sum_i Delta_i n_i + sum_{i<j} V_ij n_i n_j.

    In a blockaded basis the matrix is the restriction of the full
    Hamiltonian to the sector (flips leaving the sector are dropped).
    """
    if basis.n != spec.n:
        raise ValueError(f"basis n={basis.n} does not match spec n={spec.n}")
    if basis.sector != "all":
        raise ValueError("Hamiltonians are built in the sector-less basis")
    bits = basis.bits().astype(float)
    # site-by-site accumulation keeps the floating-point summation order
    # identical between the full matrix and its blockade restriction
    diag = np.zeros(basis.dim)
    deltas = spec.site_deltas()
    for i in range(spec.n):
        diag -= deltas[i] * bits[:, i]
    v = spec.pair_couplings()
    for i in range(spec.n):
        for j in range(i + 1, spec.n):
            if v[i, j] != 0:
                diag += v[i, j] * (bits[:, i] * bits[:, j])
    offdiag = _flip_terms(basis, spec.site_omegas(), "x")
    return _assemble(basis, diag, offdiag)


def build_ion(spec: IonSpec) -> scipy.sparse.csr_matrix:
    """Long-range model J [sum_i (fx S^x_i + fy S^y_i) + sum_{i<j} S^x_i S^x_j / |i-j|]."""
    basis = build_basis(spec.n, "full")
    pairs = [
        (i, j, spec.j / abs(i - j))
        for i in range(spec.n)
        for j in range(i + 1, spec.n)
    ]
    return _build_spin_chain(
        basis,
        sx=np.full(spec.n, spec.j * spec.field_x),
        sy=np.full(spec.n, spec.j * spec.field_y),
        sz=np.zeros(spec.n),
        xx_pairs=pairs,
    )


def build_qimf(spec: QIMFSpec) -> scipy.sparse.csr_matrix:
    """Mixed-field Ising chain plus optional site-resolved S^z fields."""
    basis = build_basis(spec.n, "full")
    pairs = [(i, i + 1, spec.coupling) for i in range(spec.n - 1)]
    sz = np.zeros(spec.n) if spec.site_fields is None else np.asarray(spec.site_fields, float)
    return _build_spin_chain(
        basis,
        sx=np.full(spec.n, spec.field_x),
        sy=np.full(spec.n, spec.field_y),
        sz=sz,
        xx_pairs=pairs,
    )


def build_quench(spec: QuenchSpec) -> scipy.sparse.csr_matrix:
    basis = build_basis(spec.n, "full")
    xx = spec.site_coeffs("sxsx")
    pairs = [(i, i + 1, xx[i]) for i in range(spec.n - 1)]
    return _build_spin_chain(
        basis,
        sx=spec.site_coeffs("sx"),
        sy=spec.site_coeffs("sy"),
        sz=spec.site_coeffs("sz"),
        xx_pairs=pairs,
    )


def _build_spin_chain(basis, sx, sy, sz, xx_pairs) -> scipy.sparse.csr_matrix:
    if basis.constraint != "full":
        raise ValueError("spin-chain builders require the full basis")
    n = basis.n
    codes = basis.states
    bits = basis.bits().astype(float)
    diag = (0.5 - bits) @ np.asarray(sz, float)
    rows, cols, data = [], [], []
    if np.any(sx):
        r, c, d = _flip_terms(basis, np.asarray(sx, float), "x")
        rows += r; cols += c; data += d
    if np.any(sy):
        r, c, d = _flip_terms(basis, np.asarray(sy, float), "y")
        rows += r; cols += c; data += d
    for i, j, w in xx_pairs:
        if w == 0:
            continue
        mask = (np.int64(1) << (n - 1 - i)) | (np.int64(1) << (n - 1 - j))
        flipped = codes ^ mask
        tgt = np.searchsorted(codes, flipped)
        rows.append(tgt)
        cols.append(np.arange(codes.size))
        data.append(np.full(codes.size, w / 4.0, dtype=np.complex128))
    return _assemble(basis, diag, (rows, cols, data))


def sample_qimf_fields(n: int, rng: np.random.Generator) -> np.ndarray:
    """Site fields drawn uniformly from [-0.5, 0.5], then mean-subtracted
    so they sum to zero exactly."""
    j = rng.uniform(-0.5, 0.5, size=n)
    return j - np.mean(j)


# ---------------------------------------------------------------------------
# circuits

def sample_su4(rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed 4x4 special unitary.

    QR of a complex Gaussian matrix with the R diagonal phase absorbed into
    Q (the naive QR alone is not Haar); the determinant is normalized away.
    """
    z = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))[None, :]
    return q * np.linalg.det(q) ** (-0.25)


def fsim_gate(theta: float = FSIM_THETA, phi: float = FSIM_PHI) -> np.ndarray:
    return np.array(
        [
            [1, 0, 0, 0],
            [0, np.cos(theta), -1j * np.sin(theta), 0],
            [0, -1j * np.sin(theta), np.cos(theta), 0],
            [0, 0, 0, np.exp(-1j * phi)],
        ],
        dtype=np.complex128,
    )


def _pi_half_rotation(axis: np.ndarray) -> np.ndarray:
    sx = np.array([[0, 1], [1, 0]], dtype=np.complex128)
    sy = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
    nvec = axis / np.linalg.norm(axis)
    gen = nvec[0] * sx + nvec[1] * sy
    return scipy.linalg.expm(-1j * (np.pi / 4) * gen)

_ROTATIONS = [
    _pi_half_rotation(np.array([1.0, 0.0])),
    _pi_half_rotation(np.array([0.0, 1.0])),
    _pi_half_rotation(np.array([1.0, 1.0])),
]


def brickwork_pairs(n: int, layer: int, start_offset: int = 0) -> tuple[tuple[int, int], ...]:
    """Qubit pairs (1-based) for a brickwork layer with open boundaries."""
    first = 1 + (layer + start_offset) % 2
    return tuple((i, i + 1) for i in range(first, n, 2))


def build_circuit(spec: CircuitSpec) -> CircuitSpec:
    """Materialize the gate list of a circuit spec (deterministic in seed)."""
    rng = np.random.default_rng(spec.seed)
    layers = []
    for layer_idx in range(spec.depth):
        pairs = brickwork_pairs(spec.n, layer_idx, spec.start_offset)
        if spec.gate_set == "su4":
            gates = [sample_su4(rng) for _ in pairs]
            rotations = None
        else:
            rotations = [_ROTATIONS[rng.integers(3)] for _ in range(spec.n)]
            gates = [fsim_gate() for _ in pairs]
        layers.append(CircuitLayer(pairs=pairs, gates=gates, rotations=rotations))
    for layer in layers:
        for g in layer.gates:
            if np.max(np.abs(g.conj().T @ g - np.eye(4))) > UNITARY_ATOL:
                raise AssertionError("materialized gate is not unitary")
    return dataclasses.replace(spec, layers=layers)


# ---------------------------------------------------------------------------
# ground states

def ground_state(h, k: int = 1, tol: float = 1e-10):
    """Lowest-k eigenpairs of a Hermitian matrix, eigenvalues ascending.

    Dense solve below dimension 2000, Lanczos (ARPACK) above.  Raises
    ConvergenceError when the eigenresidual exceeds 1e-8.
    """
    dim = h.shape[0]
    if dim < 2000:
        dense = h.toarray() if scipy.sparse.issparse(h) else np.asarray(h)
        evals, evecs = np.linalg.eigh(dense)
        evals, evecs = evals[:k], evecs[:, :k]
    else:
        try:
            evals, evecs = scipy.sparse.linalg.eigsh(h, k=k, which="SA", tol=tol)
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise ConvergenceError(f"eigsh did not converge: {exc}", residual=np.inf) from exc
        order = np.argsort(evals)
        evals, evecs = evals[order], evecs[:, order]
    residual = 0.0
    for i in range(k):
        r = np.linalg.norm(h @ evecs[:, i] - evals[i] * evecs[:, i])
        residual = max(residual, float(r))
    if residual > 1e-8:
        raise ConvergenceError(f"eigenpair residual {residual:.2e} exceeds 1e-8", residual)
    return evals, evecs


# ---------------------------------------------------------------------------
# config ingestion

_SPEC_KINDS = {
    "rydberg": RydbergSpec,
    "ion": IonSpec,
    "qimf": QIMFSpec,
    "quench": QuenchSpec,
    "circuit": CircuitSpec,
}


def spec_from_dict(d: dict):
    """Build a model spec from a config mapping with a "kind" field.

    Unknown fields are rejected to catch typos early.
    """
    d = dict(d)
    kind = d.pop("kind", None)
    if kind not in _SPEC_KINDS:
        raise ValueError(f"model.kind must be one of {sorted(_SPEC_KINDS)}, got {kind!r}")
    cls = _SPEC_KINDS[kind]
    allowed = {f.name for f in dataclasses.fields(cls) if f.init} - {"layers"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown model fields for kind={kind}: {sorted(unknown)}")
    for key in ("omega_offsets", "delta_offsets", "site_displacements", "site_fields",
                "sx", "sy", "sz", "sxsx"):
        if key in d and isinstance(d[key], list):
            d[key] = tuple(d[key])
    if "positions" in d and d["positions"] is not None:
        d["positions"] = tuple(tuple(p) for p in d["positions"])
    return cls(**d)
