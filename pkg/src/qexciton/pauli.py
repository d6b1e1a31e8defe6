"""Pauli strings and weighted Pauli sums.

Qubit convention, used throughout the package: ``letters[0]`` acts on qubit 1,
and qubit 1 is the *most* significant bit of a computational-basis index, so a
string ``"ZX"`` is the matrix ``kron(Z, X)`` and basis index ``m`` of an
``L``-qubit register has qubit ``q`` (1-based) in bit ``L - q``.  Bitstrings are
printed qubit 1 first, which makes ``int(bitstring, 2)`` the basis index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .errors import ConfigError

MAX_QUBITS = 12
COEFF_CUTOFF = 1e-14

_LETTERS = "IXYZ"
_ORDER = {c: i for i, c in enumerate(_LETTERS)}

PAULI_MATRICES = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# single-qubit products: a*b = phase * c
_PRODUCT_TABLE = {
    ("I", "I"): (1, "I"), ("I", "X"): (1, "X"), ("I", "Y"): (1, "Y"), ("I", "Z"): (1, "Z"),
    ("X", "I"): (1, "X"), ("X", "X"): (1, "I"), ("X", "Y"): (1j, "Z"), ("X", "Z"): (-1j, "Y"),
    ("Y", "I"): (1, "Y"), ("Y", "X"): (-1j, "Z"), ("Y", "Y"): (1, "I"), ("Y", "Z"): (1j, "X"),
    ("Z", "I"): (1, "Z"), ("Z", "X"): (1j, "Y"), ("Z", "Y"): (-1j, "X"), ("Z", "Z"): (1, "I"),
}


@dataclass(frozen=True, order=False)
class PauliString:
    """Tensor product of single-qubit Paulis, one letter per qubit."""

    letters: str

    def __post_init__(self):
        if not self.letters:
            raise ConfigError("a Pauli string needs at least one qubit")
        bad = set(self.letters) - set(_LETTERS)
        if bad:
            raise ConfigError(f"invalid Pauli letters {sorted(bad)} in {self.letters!r}")

    @classmethod
    def identity(cls, num_qubits: int) -> PauliString:
        return cls("I" * num_qubits)

    @classmethod
    def from_ops(cls, num_qubits: int, ops: dict[int, str]) -> PauliString:
        """Build from ``{qubit_index: letter}`` with 0-based qubit indices."""
        letters = ["I"] * num_qubits
        for q, c in ops.items():
            if not 0 <= q < num_qubits:
                raise ConfigError(f"qubit {q} out of range for {num_qubits} qubits")
            letters[q] = c
        return cls("".join(letters))

    @property
    def num_qubits(self) -> int:
        return len(self.letters)

    def is_identity(self) -> bool:
        return set(self.letters) == {"I"}

    def support(self) -> tuple[int, ...]:
        """0-based indices of the qubits acted on non-trivially."""
        return tuple(q for q, c in enumerate(self.letters) if c != "I")

    def sort_key(self) -> tuple[int, ...]:
        return tuple(_ORDER[c] for c in self.letters)

    def masks(self) -> tuple[int, int, int]:
        """Return ``(x_mask, z_mask, y_count)`` with P = i^y_count X^x Z^z."""
        n = self.num_qubits
        x = z = ny = 0
        for q, c in enumerate(self.letters):
            bit = 1 << (n - 1 - q)
            if c in "XY":
                x |= bit
            if c in "ZY":
                z |= bit
            if c == "Y":
                ny += 1
        return x, z, ny

    def apply(self, array: np.ndarray) -> np.ndarray:
        """Left-multiply ``array`` (basis index on axis 0) by this string."""
        dim = array.shape[0]
        if dim != 1 << self.num_qubits:
            raise ConfigError(f"array of dimension {dim} does not match {self.num_qubits} qubits")
        x, z, ny = self.masks()
        idx = np.arange(dim)
        src = idx ^ x
        phase = (1j ** ny) * _parity_sign(src & z)
        out = array[src]
        return out * phase.reshape((-1,) + (1,) * (array.ndim - 1))

    def to_matrix(self) -> np.ndarray:
        return self.apply(np.eye(1 << self.num_qubits, dtype=complex))

    def __str__(self) -> str:
        return self.letters


def _parity_sign(values: np.ndarray) -> np.ndarray:
    v = np.asarray(values, dtype=np.int64).copy()
    parity = np.zeros_like(v)
    while np.any(v):
        parity ^= v & 1
        v >>= 1
    return 1 - 2 * parity


def pauli_multiply(a: PauliString, b: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, product)`` with ``a @ b == phase * product``."""
    if a.num_qubits != b.num_qubits:
        raise ConfigError(f"length mismatch: {a.num_qubits} vs {b.num_qubits}")
    phase: complex = 1
    letters = []
    for ca, cb in zip(a.letters, b.letters):
        p, c = _PRODUCT_TABLE[(ca, cb)]
        phase *= p
        letters.append(c)
    return complex(phase), PauliString("".join(letters))


def _as_string(s) -> PauliString:
    return s if isinstance(s, PauliString) else PauliString(str(s))


class PauliSum:
    """Canonical weighted sum of Pauli strings on a fixed number of qubits.

    Duplicate strings are merged, coefficients below ``1e-14`` in magnitude are
    dropped, and terms are ordered lexicographically with ``I < X < Y < Z``.
    That order is what the Trotter circuits use.
    """

    __slots__ = ("_terms", "_num_qubits")

    def __init__(self, terms: Iterable = (), num_qubits: int | None = None):
        acc: dict[PauliString, complex] = {}
        for coeff, string in terms:
            ps = _as_string(string)
            if num_qubits is None:
                num_qubits = ps.num_qubits
            elif ps.num_qubits != num_qubits:
                raise ConfigError(f"term {ps} does not act on {num_qubits} qubits")
            acc[ps] = acc.get(ps, 0j) + complex(coeff)
        if num_qubits is None:
            raise ConfigError("an empty PauliSum needs an explicit num_qubits")
        kept = [(c, s) for s, c in acc.items() if abs(c) >= COEFF_CUTOFF]
        kept.sort(key=lambda t: t[1].sort_key())
        self._terms = tuple(kept)
        self._num_qubits = num_qubits

    @classmethod
    def from_dict(cls, terms: dict, num_qubits: int | None = None) -> PauliSum:
        return cls(((c, s) for s, c in terms.items()), num_qubits)

    @property
    def num_qubits(self) -> int:
        return self._num_qubits

    @property
    def terms(self) -> tuple[tuple[complex, PauliString], ...]:
        return self._terms

    @property
    def strings(self) -> tuple[PauliString, ...]:
        return tuple(s for _, s in self._terms)

    @property
    def coeffs(self) -> np.ndarray:
        return np.array([c for c, _ in self._terms], dtype=complex)

    def __iter__(self) -> Iterator[tuple[complex, PauliString]]:
        return iter(self._terms)

    def __len__(self) -> int:
        return len(self._terms)

    def __repr__(self) -> str:
        body = " + ".join(f"({c:.6g})*{s}" for c, s in self._terms) or "0"
        return f"PauliSum({body}; L={self._num_qubits})"

    def coefficient(self, string) -> complex:
        ps = _as_string(string)
        for c, s in self._terms:
            if s == ps:
                return c
        return 0j

    def identity_coefficient(self) -> complex:
        return self.coefficient(PauliString.identity(self._num_qubits))

    def without_identity(self) -> PauliSum:
        return PauliSum(((c, s) for c, s in self._terms if not s.is_identity()), self._num_qubits)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) <= tol for c, _ in self._terms)

    def real(self) -> PauliSum:
        """Drop imaginary parts; only meaningful after an `is_hermitian` check."""
        return PauliSum(((c.real, s) for c, s in self._terms), self._num_qubits)

    def _check(self, other: PauliSum):
        if other.num_qubits != self._num_qubits:
            raise ConfigError(f"qubit-count mismatch: {self._num_qubits} vs {other.num_qubits}")

    def __add__(self, other: PauliSum) -> PauliSum:
        self._check(other)
        return PauliSum(self._terms + other._terms, self._num_qubits)

    def __sub__(self, other: PauliSum) -> PauliSum:
        return self + (-1.0) * other

    def __mul__(self, scalar) -> PauliSum:
        return PauliSum(((scalar * c, s) for c, s in self._terms), self._num_qubits)

    __rmul__ = __mul__

    def __matmul__(self, other: PauliSum) -> PauliSum:
        self._check(other)
        out = []
        for ca, sa in self._terms:
            for cb, sb in other._terms:
                phase, s = pauli_multiply(sa, sb)
                out.append((ca * cb * phase, s))
        return PauliSum(out, self._num_qubits)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self._num_qubits == other._num_qubits and self._terms == other._terms

    def __hash__(self):
        return hash((self._num_qubits, self._terms))

    def allclose(self, other: PauliSum, atol: float = 1e-12) -> bool:
        self._check(other)
        diff = self - other
        return all(abs(c) <= atol for c, _ in diff)

    def apply(self, array: np.ndarray) -> np.ndarray:
        """Left-multiply ``array`` (basis index on axis 0) by the operator."""
        out = np.zeros(array.shape, dtype=complex)
        for c, s in self._terms:
            out += c * s.apply(array)
        return out

    def to_matrix(self, max_qubits: int = MAX_QUBITS) -> np.ndarray:
        return to_matrix(self, max_qubits)

    def to_text(self) -> str:
        """One term per line: ``<re> <im> <letters>``."""
        return "\n".join(f"{c.real!r} {c.imag!r} {s.letters}" for c, s in self._terms)

    @classmethod
    def from_text(cls, text: str, num_qubits: int | None = None) -> PauliSum:
        terms = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ConfigError(f"line {lineno}: expected '<re> <im> <letters>', got {line!r}")
            try:
                coeff = complex(float(parts[0]), float(parts[1]))
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad coefficient") from exc
            terms.append((coeff, PauliString(parts[2])))
        return cls(terms, num_qubits)


def to_matrix(s: PauliSum | PauliString, max_qubits: int = MAX_QUBITS) -> np.ndarray:
    """Dense ``2^L x 2^L`` matrix of a Pauli sum (or a single string)."""
    if isinstance(s, PauliString):
        s = PauliSum([(1.0, s)])
    if s.num_qubits > max_qubits:
        raise ConfigError(f"{s.num_qubits} qubits exceeds the dense-matrix cap of {max_qubits}")
    return s.apply(np.eye(1 << s.num_qubits, dtype=complex))


def all_pauli_strings(num_qubits: int) -> list[PauliString]:
    """All 4^L strings in canonical order."""
    out = [""]
    for _ in range(num_qubits):
        out = [p + c for p in out for c in _LETTERS]
    return [PauliString(p) for p in out]


def matrix_to_pauli_sum(matrix: np.ndarray, num_qubits: int) -> PauliSum:
    """Decompose a dense matrix as sum_P Tr[P A] / 2^L * P."""
    a = np.asarray(matrix, dtype=complex)
    dim = 1 << num_qubits
    if a.ndim != 2 or a.shape != (dim, dim):
        raise ConfigError(f"expected a {dim}x{dim} matrix, got shape {a.shape}")
    terms = []
    for p in all_pauli_strings(num_qubits):
        # Tr[P A] = sum_j (P A)_jj
        coeff = np.trace(p.apply(a)) / dim
        terms.append((coeff, p))
    return PauliSum(terms, num_qubits)
