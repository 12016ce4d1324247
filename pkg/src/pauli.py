import itertools
import re
import typing

import numpy as np
import torch

MAX_QUBITS = 8
LETTERS = "IXYZ"  # basis order, leftmost qubit most significant
_PREFIXES = {"": 0, "+": 0, "i": 1, "+i": 1, "-": 2, "-i": 3}
_PHASE_LABELS = ("", "i", "-", "-i")
_COEFFICIENTS = (1, 1j, -1, -1j)
_SINGLE = {"I": torch.tensor([[1, 0], [0, 1]], dtype=torch.complex128),
           "X": torch.tensor([[0, 1], [1, 0]], dtype=torch.complex128),
           "Y": torch.tensor([[0, -1j], [1j, 0]], dtype=torch.complex128),
           "Z": torch.tensor([[1, 0], [0, -1]], dtype=torch.complex128)}
_SPARSE_TOKEN = re.compile(r"([IXYZ])_?(\d+)")


class PauliError(ValueError):
    pass


class PauliOperator:
    """
    i^phase_exp times a tensor product of letters from IXYZ, stored as symplectic bits.
    Letter Y is x=1, z=1 under Y = iXZ; qubit 1 is the leftmost letter.
    """
    __slots__ = ("x_bits", "z_bits", "phase_exp")

    def __init__(self, x_bits: typing.Sequence[int], z_bits: typing.Sequence[int], phase_exp: int = 0):
        x_bits = np.array(x_bits, dtype=np.uint8).reshape(-1) % 2
        z_bits = np.array(z_bits, dtype=np.uint8).reshape(-1) % 2
        if x_bits.shape != z_bits.shape:
            raise PauliError(f"x part has {x_bits.size} qubits but z part has {z_bits.size}")
        if not 1 <= x_bits.size <= MAX_QUBITS:
            raise PauliError(f"qubit count must be within 1..{MAX_QUBITS}, got {x_bits.size}")
        x_bits.flags.writeable = False
        z_bits.flags.writeable = False
        object.__setattr__(self, "x_bits", x_bits)
        object.__setattr__(self, "z_bits", z_bits)
        object.__setattr__(self, "phase_exp", int(phase_exp) % 4)

    def __setattr__(self, key, value):
        raise AttributeError("PauliOperator is immutable")

    @property
    def n(self) -> int:
        return int(self.x_bits.size)

    @property
    def letters(self) -> str:
        return ''.join("IXZY"[x + 2 * z] for x, z in zip(self.x_bits.tolist(), self.z_bits.tolist()))

    @property
    def weight(self) -> int:
        return int(np.count_nonzero(self.x_bits | self.z_bits))

    @property
    def hermitian(self) -> bool:
        return self.phase_exp % 2 == 0

    @property
    def is_identity(self) -> bool:
        return self.weight == 0

    def stripped(self) -> 'PauliOperator':
        return PauliOperator(self.x_bits, self.z_bits)

    def with_phase(self, phase_exp: int) -> 'PauliOperator':
        return PauliOperator(self.x_bits, self.z_bits, phase_exp)

    def dagger(self) -> 'PauliOperator':
        return PauliOperator(self.x_bits, self.z_bits, -self.phase_exp)

    def __mul__(self, other: 'PauliOperator') -> 'PauliOperator':
        return multiply(self, other)

    def __eq__(self, other):
        if not isinstance(other, PauliOperator):
            return NotImplemented
        return (self.phase_exp == other.phase_exp and np.array_equal(self.x_bits, other.x_bits)
                and np.array_equal(self.z_bits, other.z_bits))

    def __hash__(self):
        return hash((self.x_bits.tobytes(), self.z_bits.tobytes(), self.phase_exp))

    def __repr__(self):
        return f"PauliOperator('{format_pauli(self)}')"

    def __str__(self):
        return format_pauli(self)


def _count_y(x_bits: np.ndarray, z_bits: np.ndarray) -> int:
    return int(np.sum(np.logical_and(x_bits, z_bits)))


def _check_size(a: PauliOperator, b: PauliOperator):
    if a.n != b.n:
        raise PauliError(f"dimension mismatch: {a.n} vs {b.n} qubits")


def exponent_to_coeff(phase_exp: int) -> complex:
    return _COEFFICIENTS[phase_exp % 4]


def coeff_to_exponent(coeff: complex, tolerance: float = 1e-9) -> int:
    for exponent, candidate in enumerate(_COEFFICIENTS):
        if abs(coeff - candidate) < tolerance:
            return exponent
    raise PauliError(f"{coeff} is not one of 1, i, -1, -i")


def from_letters(letters: str, phase_exp: int = 0) -> PauliOperator:
    if not letters or any(c not in LETTERS for c in letters):
        raise PauliError(f"malformed Pauli letters '{letters}'")
    x_bits = [c in "XY" for c in letters]
    z_bits = [c in "ZY" for c in letters]
    return PauliOperator(x_bits, z_bits, phase_exp)


def identity(n: int) -> PauliOperator:
    return PauliOperator(np.zeros(n), np.zeros(n))


def multiply(a: PauliOperator, b: PauliOperator) -> PauliOperator:
    _check_size(a, b)
    # work in X^x Z^z form: a letter Y carries an extra factor i
    phase = a.phase_exp + _count_y(a.x_bits, a.z_bits) + b.phase_exp + _count_y(b.x_bits, b.z_bits)
    phase += 2 * int(np.dot(a.z_bits.astype(np.int64), b.x_bits.astype(np.int64)))
    x_bits = a.x_bits ^ b.x_bits
    z_bits = a.z_bits ^ b.z_bits
    return PauliOperator(x_bits, z_bits, phase - _count_y(x_bits, z_bits))


def product(operators: typing.Iterable[PauliOperator], n: typing.Optional[int] = None) -> PauliOperator:
    out = identity(n) if n is not None else None
    for op in operators:
        out = op if out is None else multiply(out, op)
    if out is None:
        raise PauliError("empty product needs an explicit qubit count")
    return out


def symplectic_product(a: PauliOperator, b: PauliOperator) -> int:
    _check_size(a, b)
    ax, az = a.x_bits.astype(np.int64), a.z_bits.astype(np.int64)
    bx, bz = b.x_bits.astype(np.int64), b.z_bits.astype(np.int64)
    return int(np.dot(ax, bz) + np.dot(az, bx)) % 2


def commutes(a: PauliOperator, b: PauliOperator) -> bool:
    return symplectic_product(a, b) == 0


def to_matrix(a: PauliOperator) -> torch.Tensor:
    out = torch.ones((1, 1), dtype=torch.complex128)
    for letter in a.letters:
        out = torch.kron(out, _SINGLE[letter])
    return out * exponent_to_coeff(a.phase_exp)


def parse(text: str, n: typing.Optional[int] = None) -> PauliOperator:
    """
    Accepts full letter strings ("XIX", "-iYYZ") and subscripted shorthand ("X_1 Z_2", "X1Z2").
    The shorthand needs the qubit count n; "I" with an explicit n is the identity.
    """
    if not isinstance(text, str):
        raise PauliError(f"expected a string, got {type(text).__name__}")
    body = text.strip().replace("−", "-")
    match = re.match(r"^([+-]?i?)(.*)$", body)
    prefix, body = match.group(1), match.group(2).strip()
    if prefix not in _PREFIXES:
        raise PauliError(f"malformed phase prefix in '{text}'")
    phase_exp = _PREFIXES[prefix]
    if not body:
        raise PauliError(f"missing Pauli letters in '{text}'")
    if not any(c.isdigit() for c in body):
        if any(c not in LETTERS for c in body):
            raise PauliError(f"malformed Pauli string '{text}'")
        if n is not None and len(body) != n:
            if body == "I":
                return identity(n).with_phase(phase_exp)
            raise PauliError(f"'{text}' has {len(body)} letters but {n} qubits were expected")
        return from_letters(body, phase_exp)

    if n is None:
        raise PauliError(f"subscripted Pauli '{text}' needs an explicit qubit count")
    compact = re.sub(r"\s+", "", body)
    if _SPARSE_TOKEN.sub("", compact):
        raise PauliError(f"malformed Pauli string '{text}'")
    letters = ["I"] * n
    seen = set()
    for letter, index in _SPARSE_TOKEN.findall(compact):
        index = int(index)
        if not 1 <= index <= n:
            raise PauliError(f"qubit {index} in '{text}' is outside 1..{n}")
        if index in seen:
            raise PauliError(f"qubit {index} appears twice in '{text}'")
        seen.add(index)
        letters[index - 1] = letter
    return from_letters(''.join(letters), phase_exp)


def format_pauli(a: PauliOperator) -> str:
    return _PHASE_LABELS[a.phase_exp] + a.letters


def format_sparse(a: PauliOperator) -> str:
    """X1Z2-style label; the identity is "I"."""
    body = ''.join(f"{letter}{i}" for i, letter in enumerate(a.letters, 1) if letter != "I")
    return _PHASE_LABELS[a.phase_exp] + (body or "I")


def sort_key(a: PauliOperator) -> typing.Tuple[int, str, int]:
    return a.weight, a.letters, a.phase_exp


def basis_index(a: PauliOperator) -> int:
    index = 0
    for letter in a.letters:
        index = 4 * index + LETTERS.index(letter)
    return index


def all_paulis(n: int) -> typing.List[PauliOperator]:
    """Every phase-0 Pauli on n qubits in basis order (I, X, Y, Z per qubit, leftmost most significant)."""
    return [from_letters(''.join(letters)) for letters in itertools.product(LETTERS, repeat=n)]


def embed(a: PauliOperator, coords: typing.Sequence[int], n: int) -> PauliOperator:
    coords = list(coords)
    if len(coords) != a.n:
        raise PauliError(f"{a.n}-qubit operator cannot be placed on {len(coords)} coordinates")
    if len(set(coords)) != len(coords) or any(not 1 <= c <= n for c in coords):
        raise PauliError(f"coordinates {coords} must be distinct and within 1..{n}")
    letters = ["I"] * n
    for letter, coord in zip(a.letters, coords):
        letters[coord - 1] = letter
    return from_letters(''.join(letters), a.phase_exp)


def restrict(a: PauliOperator, coords: typing.Sequence[int]) -> PauliOperator:
    coords = list(coords)
    outside = [i for i, letter in enumerate(a.letters, 1) if letter != "I" and i not in coords]
    if outside:
        raise PauliError(f"{format_pauli(a)} acts on qubits {outside} outside {coords}")
    return from_letters(''.join(a.letters[c - 1] for c in coords), a.phase_exp)


def random_pauli(n: int, rng: np.random.Generator, with_phase: bool = True) -> PauliOperator:
    x_bits = rng.integers(0, 2, n)
    z_bits = rng.integers(0, 2, n)
    return PauliOperator(x_bits, z_bits, int(rng.integers(0, 4)) if with_phase else 0)
