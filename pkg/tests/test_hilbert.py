import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from projens import hilbert as hb


def brute_blockade_strings(n):
    """Enumeration oracle: all length-n 0/1 strings without adjacent 1s."""
    out = []
    for code in range(1 << n):
        s = format(code, f"0{n}b")
        if "11" not in s:
            out.append(s)
    return out


def test_blockade_dim_n10_matches_enumeration():
    legal = brute_blockade_strings(10)
    assert len(legal) == 144
    basis = hb.build_basis(10, "blockade")
    assert basis.dim == 144
    assert [basis.bitstring(i) for i in range(basis.dim)] == sorted(legal)


def test_even_sector_dim_n10():
    legal = brute_blockade_strings(10)
    palindromes = [s for s in legal if s == s[::-1]]
    expected_even = (len(legal) + len(palindromes)) // 2
    assert hb.build_basis(10, "blockade", "even").dim == expected_even == 76
    assert hb.build_basis(10, "blockade", "odd").dim == len(legal) - expected_even


def test_single_qubit_full():
    basis = hb.build_basis(1, "full")
    assert basis.dim == 2
    assert basis.bitstring(0) == "0" and basis.bitstring(1) == "1"


@pytest.mark.parametrize("n", range(1, 33))
def test_blockade_dim_fibonacci(n):
    assert hb.blockade_dim(n) == hb.blockade_dim(n - 1) + hb.blockade_dim(n - 2) if n > 2 else True
    if n <= 18:
        assert hb.build_basis(n, "blockade").dim == hb.blockade_dim(n)


def test_blockade_dim_n32():
    basis = hb.build_basis(32, "blockade")
    assert basis.dim == hb.blockade_dim(32)
    assert all(hb.is_blockade_legal(int(c)) for c in basis.states[:: basis.dim // 97])


@pytest.mark.parametrize("constraint", ["full", "blockade"])
@pytest.mark.parametrize("n", [1, 2, 5, 9, 14])
def test_index_roundtrip_exhaustive(n, constraint):
    basis = hb.build_basis(n, constraint)
    for i in range(basis.dim):
        assert basis.index(basis.code(i)) == i
        assert basis.index(basis.bitstring(i)) == i


def test_index_rejects_missing():
    basis = hb.build_basis(4, "blockade")
    with pytest.raises(KeyError):
        basis.index("0011")


@pytest.mark.parametrize(
    "n,constraint",
    [(0, "full"), (25, "full"), (33, "blockade")],
)
def test_build_basis_range_errors(n, constraint):
    with pytest.raises(ValueError):
        hb.build_basis(n, constraint)


def test_sector_dims_sum():
    for n in (3, 6, 10):
        for constraint in ("full", "blockade"):
            full = hb.build_basis(n, constraint).dim
            even = hb.build_basis(n, constraint, "even").dim
            odd = hb.build_basis(n, constraint, "odd").dim
            assert even + odd == full


def test_parity_projectors_orthogonal_idempotent():
    # P_even/P_odd built from the reversal permutation are orthogonal
    # idempotents summing to the identity.
    for n in (4, 7, 10):
        basis = hb.build_basis(n, "blockade")
        perm = basis.reversal_permutation()
        q = np.zeros((basis.dim, basis.dim))
        q[perm, np.arange(basis.dim)] = 1.0
        eye = np.eye(basis.dim)
        p_even = (eye + q) / 2
        p_odd = (eye - q) / 2
        assert np.allclose(p_even @ p_even, p_even, atol=1e-12)
        assert np.allclose(p_odd @ p_odd, p_odd, atol=1e-12)
        assert np.allclose(p_even @ p_odd, 0.0, atol=1e-12)
        assert np.allclose(p_even + p_odd, eye, atol=1e-12)
        assert np.trace(p_even) == hb.build_basis(n, "blockade", "even").dim


# ---------------------------------------------------------------------------
# parity partner

def test_parity_partner_examples():
    assert hb.parity_partner("100") == "001"
    assert hb.parity_partner("010") == "010"


def test_parity_partner_fixed_points_match_sector_count():
    legal = brute_blockade_strings(10)
    fixed = sum(1 for s in legal if hb.parity_partner(s) == s)
    even = hb.build_basis(10, "blockade", "even").dim
    assert even == (len(legal) + fixed) // 2


@given(st.integers(min_value=1, max_value=20), st.data())
@settings(max_examples=200, deadline=None)
def test_reverse_code_involution(n, data):
    code = data.draw(st.integers(min_value=0, max_value=(1 << n) - 1))
    assert hb.reverse_code(hb.reverse_code(code, n), n) == code
    assert hb.reverse_code(code, n) == hb.bitstring_to_code(
        hb.parity_partner(hb.code_to_bitstring(code, n))
    )


# ---------------------------------------------------------------------------
# bipartitions

def test_split_prefix():
    part = hb.Bipartition(n=10, sites_a=(1, 2))
    assert hb.split_bitstring("1010010010", part) == ("10", "10010010")


def test_split_all_zeros_discontiguous():
    part = hb.Bipartition(n=4, sites_a=(2, 4))
    assert hb.split_bitstring("0000", part) == ("00", "00")


@given(st.integers(min_value=2, max_value=16), st.data())
@settings(max_examples=1000, deadline=None)
def test_split_join_roundtrip(n, data):
    code = data.draw(st.integers(min_value=0, max_value=(1 << n) - 1))
    k = data.draw(st.integers(min_value=1, max_value=n - 1))
    sites_a = tuple(sorted(data.draw(
        st.sets(st.integers(min_value=1, max_value=n), min_size=k, max_size=k)
    )))
    part = hb.Bipartition(n=n, sites_a=sites_a)
    z = hb.code_to_bitstring(code, n)
    za, zb = hb.split_bitstring(z, part)
    assert hb.join_bitstring(za, zb, part) == z
    ca, cb = part.split_code(code)
    assert (ca, cb) == (hb.bitstring_to_code(za) if za else 0, hb.bitstring_to_code(zb))
    assert part.join_codes(ca, cb) == code


@pytest.mark.parametrize(
    "len_a,expected",
    [(1, 2), (2, 3), (3, 5)],
)
def test_subsystem_dim_blockade_contiguous(len_a, expected):
    part = hb.Bipartition.contiguous(10, len_a, boundary_rule=True)
    assert hb.subsystem_dim(part, "blockade") == expected
    assert hb.subsystem_basis(part, "blockade").size == expected


def test_subsystem_dim_discontiguous_runs():
    # two singleton runs: 2 * 2 admissible patterns
    part = hb.Bipartition(n=6, sites_a=(2, 4), boundary_rule=True)
    assert hb.subsystem_dim(part, "blockade") == 4
    # a pair and a singleton: 3 * 2
    part = hb.Bipartition(n=8, sites_a=(1, 2, 5), boundary_rule=True)
    assert hb.subsystem_dim(part, "blockade") == 6


def test_subsystem_dim_full():
    part = hb.Bipartition(n=6, sites_a=(1, 3, 5))
    assert hb.subsystem_dim(part, "full") == 8


def test_boundary_rule_admissibility():
    part = hb.Bipartition(n=5, sites_a=(3,), boundary_rule=True)
    assert part.border_sites_b() == (2, 4)
    # z_B over sites (1,2,4,5); admissible requires z_2 = z_4 = 0
    assert part.admissible_b(hb.bitstring_to_code("1001"))
    assert not part.admissible_b(hb.bitstring_to_code("0100"))
    relaxed = hb.Bipartition(n=5, sites_a=(3,), boundary_rule=False)
    assert relaxed.admissible_b(hb.bitstring_to_code("0100"))


def test_bipartition_validation():
    with pytest.raises(ValueError):
        hb.Bipartition(n=4, sites_a=())
    with pytest.raises(ValueError):
        hb.Bipartition(n=4, sites_a=(0, 1))
    with pytest.raises(ValueError):
        hb.Bipartition(n=4, sites_a=(1, 2, 3, 4))


# ---------------------------------------------------------------------------
# state vectors

def test_statevector_normalization_enforced():
    basis = hb.build_basis(2, "full")
    with pytest.raises(ValueError):
        hb.StateVector(basis, np.array([1.0, 1.0, 0, 0]))
    sv = hb.StateVector.from_unnormalized(basis, np.array([1.0, 1.0, 0, 0]))
    assert np.isclose(np.sum(sv.probabilities()), 1.0)


def test_zero_state_index():
    basis = hb.build_basis(6, "blockade")
    sv = hb.StateVector.zero_state(basis)
    assert sv.probabilities()[basis.index("000000")] == 1.0


def test_restrict_and_expand_state():
    full = hb.build_basis(4, "full")
    blk = hb.build_basis(4, "blockade")
    rng = np.random.default_rng(7)
    sv = hb.StateVector.from_unnormalized(full, rng.normal(size=16) + 1j * rng.normal(size=16))
    restricted, weight = hb.restrict_state(sv, blk)
    mask = np.array([hb.is_blockade_legal(int(c)) for c in full.states])
    assert np.isclose(weight, np.sum(np.abs(sv.amps[mask]) ** 2))
    back = hb.expand_state(restricted, full)
    assert np.allclose(back.amps[mask] * np.sqrt(weight), sv.amps[mask])
    assert np.allclose(back.amps[~mask], 0.0)
