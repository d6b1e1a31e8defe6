import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qexciton.errors import ConfigError
from qexciton.pauli import (
    PAULI_MATRICES,
    PauliString,
    PauliSum,
    all_pauli_strings,
    matrix_to_pauli_sum,
    pauli_multiply,
    to_matrix,
)

letters = st.text(alphabet="IXYZ", min_size=1, max_size=4)


def kron_letters(s):
    out = np.eye(1)
    for c in s:
        out = np.kron(out, PAULI_MATRICES[c])
    return out


class TestPauliString:
    def test_identity(self):
        p = PauliString.identity(3)
        assert p.is_identity()
        assert np.allclose(p.to_matrix(), np.eye(8))

    def test_invalid_letters(self):
        with pytest.raises(ConfigError):
            PauliString("XA")
        with pytest.raises(ConfigError):
            PauliString("")

    def test_from_ops(self):
        assert PauliString.from_ops(3, {0: "X", 2: "Z"}).letters == "XIZ"
        with pytest.raises(ConfigError):
            PauliString.from_ops(2, {2: "X"})

    def test_qubit_one_is_most_significant(self):
        # Z on qubit 1 flips sign of indices with the top bit set
        assert np.allclose(np.diag(PauliString("ZI").to_matrix()), [1, 1, -1, -1])

    @given(letters)
    def test_matches_kron(self, s):
        assert np.allclose(PauliString(s).to_matrix(), kron_letters(s))

    @given(letters)
    def test_traceless_unless_identity(self, s):
        tr = np.trace(PauliString(s).to_matrix())
        if set(s) == {"I"}:
            assert tr == 2 ** len(s)
        else:
            assert abs(tr) < 1e-14


class TestMultiply:
    def test_x_times_y(self):
        assert pauli_multiply(PauliString("X"), PauliString("Y")) == (1j, PauliString("Z"))

    def test_z_squared(self):
        assert pauli_multiply(PauliString("Z"), PauliString("Z")) == (1, PauliString("I"))

    def test_two_qubit_phases_cancel(self):
        phase, prod = pauli_multiply(PauliString("XZ"), PauliString("ZX"))
        assert prod == PauliString("YY")
        assert phase == 1
        assert np.allclose(kron_letters("XZ") @ kron_letters("ZX"), phase * kron_letters("YY"))

    @pytest.mark.parametrize("n", [1, 2])
    def test_exhaustive(self, n):
        for a, b in itertools.product(all_pauli_strings(n), repeat=2):
            phase, p = pauli_multiply(a, b)
            assert phase in (1, -1, 1j, -1j)
            assert np.allclose(a.to_matrix() @ b.to_matrix(), phase * p.to_matrix(), atol=1e-14)

    def test_length_mismatch(self):
        with pytest.raises(ConfigError):
            pauli_multiply(PauliString("X"), PauliString("XX"))


class TestPauliSum:
    def test_canonical_merge_and_order(self):
        s = PauliSum([(1, "ZI"), (0.5, "XX"), (0.25, "ZI"), (1e-16, "YY")])
        assert [str(p) for p in s.strings] == ["XX", "ZI"]
        assert s.coefficient("ZI") == 1.25

    def test_order_is_ixyz(self):
        s = PauliSum([(1, l) for l in "ZYXI"])
        assert [str(p) for p in s.strings] == ["I", "X", "Y", "Z"]

    def test_empty_needs_width(self):
        with pytest.raises(ConfigError):
            PauliSum([])
        assert len(PauliSum([], 2)) == 0

    def test_width_mismatch(self):
        with pytest.raises(ConfigError):
            PauliSum([(1, "X"), (1, "XX")])

    def test_hermitian_predicate(self):
        assert PauliSum([(1, "X")]).is_hermitian()
        assert not PauliSum([(1j, "X")]).is_hermitian()

    def test_z_matrix(self):
        assert np.allclose(PauliSum([(1.0, "Z")]).to_matrix(), np.diag([1, -1]))

    def test_xx_matrix(self):
        assert np.allclose(PauliSum([(0.5, "XX")]).to_matrix(), 0.5 * np.fliplr(np.eye(4)))

    def test_section_v_matrix_round_trip(self):
        h = PauliSum([(0.010, "ZI"), (0.040, "IX"), (0.040, "XX")])
        direct = 0.010 * kron_letters("ZI") + 0.040 * kron_letters("IX") + 0.040 * kron_letters("XX")
        assert np.allclose(h.to_matrix(), direct, atol=1e-15)
        assert matrix_to_pauli_sum(direct, 2).allclose(h, atol=1e-15)

    def test_dimension_cap(self):
        with pytest.raises(ConfigError):
            to_matrix(PauliSum([(1, "X" * 3)]), max_qubits=2)

    def test_product_matches_matrices(self, rng):
        a = matrix_to_pauli_sum(rng.normal(size=(4, 4)), 2)
        b = matrix_to_pauli_sum(rng.normal(size=(4, 4)), 2)
        assert np.allclose((a @ b).to_matrix(), a.to_matrix() @ b.to_matrix(), atol=1e-12)
        assert np.allclose((a + b).to_matrix(), a.to_matrix() + b.to_matrix())
        assert np.allclose((a - 2 * b).to_matrix(), a.to_matrix() - 2 * b.to_matrix())

    def test_text_round_trip(self):
        s = PauliSum([(0.04, "XX"), (0.01 - 0.5j, "ZI")])
        assert PauliSum.from_text(s.to_text()) == s
        assert "0.04 0.0 XX" in s.to_text()

    def test_text_errors(self):
        with pytest.raises(ConfigError):
            PauliSum.from_text("0.1 XX")
        with pytest.raises(ConfigError):
            PauliSum.from_text("a b XX")

    def test_apply_matches_matrix(self, rng):
        s = matrix_to_pauli_sum(rng.normal(size=(8, 8)), 3)
        v = rng.normal(size=8) + 0j
        assert np.allclose(s.apply(v), s.to_matrix() @ v)


class TestDecomposition:
    def test_z(self):
        assert matrix_to_pauli_sum(np.diag([1.0, -1.0]), 1) == PauliSum([(1.0, "Z")])

    def test_identity(self):
        assert matrix_to_pauli_sum(np.eye(4), 2) == PauliSum([(1.0, "II")])

    def test_random_hermitian_has_16_terms(self, rng):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        a = a + a.conj().T
        s = matrix_to_pauli_sum(a, 2)
        assert len(s) == 16
        assert s.is_hermitian()
        assert np.max(np.abs(s.to_matrix() - a)) <= 1e-12

    @given(st.integers(1, 4), st.integers(0, 2**32 - 1))
    def test_round_trip(self, n, seed):
        r = np.random.default_rng(seed)
        a = r.normal(size=(2**n, 2**n)) + 1j * r.normal(size=(2**n, 2**n))
        assert np.max(np.abs(matrix_to_pauli_sum(a, n).to_matrix() - a)) <= 1e-12

    def test_wrong_shape(self):
        with pytest.raises(ConfigError):
            matrix_to_pauli_sum(np.eye(3), 2)
