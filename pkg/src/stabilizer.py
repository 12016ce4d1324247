import functools
import itertools
import typing

import numpy as np
import torch

from src.pauli import (PauliError, PauliOperator, all_paulis, coeff_to_exponent, commutes, format_pauli, identity,
                       multiply, parse, sort_key, to_matrix)
from src.utils import format_table

CODEWORD_TOLERANCE = 1e-10
NORM_TOLERANCE = 1e-12


class CodeError(ValueError):
    pass


class Syndrome(typing.NamedTuple):
    signs: typing.Tuple[int, ...]

    @property
    def label(self) -> str:
        return ''.join('+' if s > 0 else '-' for s in self.signs)

    @classmethod
    def from_label(cls, label: str) -> 'Syndrome':
        label = label.strip().replace("−", "-")
        if not label or any(c not in "+-" for c in label):
            raise CodeError(f"malformed syndrome label '{label}'")
        return cls(tuple(1 if c == '+' else -1 for c in label))

    def combine(self, other: 'Syndrome') -> 'Syndrome':
        if len(self.signs) != len(other.signs):
            raise CodeError(f"cannot combine syndromes of length {len(self.signs)} and {len(other.signs)}")
        return Syndrome(tuple(a * b for a, b in zip(self.signs, other.signs)))

    def truncate(self, dropped: typing.Iterable[int]) -> 'Syndrome':
        dropped = set(dropped)
        return Syndrome(tuple(s for i, s in enumerate(self.signs) if i not in dropped))

    @property
    def trivial(self) -> bool:
        return all(s > 0 for s in self.signs)

    def __str__(self):
        return self.label


class LogicalAction(typing.NamedTuple):
    logical: PauliOperator  # phase-0 Pauli on the k logical qubits
    phase_exp: int  # the normalizer element acts as i^phase_exp * logical

    @property
    def label(self) -> str:
        return format_pauli(self.logical.with_phase(self.phase_exp)) + "_L"


def gf2_rank(rows: np.ndarray) -> int:
    rows = np.array(rows, dtype=np.uint8) % 2
    rank = 0
    for col in range(rows.shape[1] if rows.ndim == 2 else 0):
        pivot = next((r for r in range(rank, rows.shape[0]) if rows[r, col]), None)
        if pivot is None:
            continue
        rows[[rank, pivot]] = rows[[pivot, rank]]
        for r in range(rows.shape[0]):
            if r != rank and rows[r, col]:
                rows[r] ^= rows[rank]
        rank += 1
    return rank


def symplectic_rows(operators: typing.Sequence[PauliOperator]) -> np.ndarray:
    return np.array([np.concatenate([op.x_bits, op.z_bits]) for op in operators], dtype=np.uint8)


def _dimension_check(error: PauliOperator, code: 'StabilizerCode'):
    if error.n != code.n:
        raise CodeError(f"{error.n}-qubit operator does not fit the {code.n}-qubit code {code.name}")


def _projector(generators: typing.Sequence[PauliOperator], signs: typing.Sequence[int]) -> torch.Tensor:
    dim = 2 ** generators[0].n
    eye = torch.eye(dim, dtype=torch.complex128)
    out = eye
    for generator, sign in zip(generators, signs):
        out = out @ (eye + sign * to_matrix(generator)) / 2
    return out


def derive_codewords(generators: typing.Sequence[PauliOperator]) -> torch.Tensor:
    """
    Orthonormal code-space basis from projecting computational basis states in index order.
    Each vector is rescaled so its first nonzero amplitude is real and positive.
    """
    n = generators[0].n
    k = n - len(generators)
    proj = _projector(generators, [1] * len(generators))
    basis = []
    for index in range(2 ** n):
        vector = proj[:, index].clone()
        for previous in basis:
            vector = vector - torch.vdot(previous, vector) * previous
        norm = torch.linalg.vector_norm(vector).item()
        if norm < 1e-9:
            continue
        vector = vector / norm
        lead = vector[int(torch.nonzero(vector.abs() > 1e-12)[0])]
        basis.append(vector * (lead.abs() / lead))
        if len(basis) == 2 ** k:
            break
    return torch.stack(basis)


class StabilizerCode:
    def __init__(self, generators: typing.Sequence[typing.Union[PauliOperator, str]],
                 codewords: typing.Optional[typing.Any] = None, name: str = "code"):
        try:
            generators = tuple(parse(g) if isinstance(g, str) else g for g in generators)
        except PauliError as exc:
            raise CodeError(f"{name}: {exc}") from exc
        if not generators:
            raise CodeError(f"{name}: a code needs at least one generator")
        n = generators[0].n
        if any(g.n != n for g in generators):
            raise CodeError(f"{name}: generators act on different qubit counts")
        for g in generators:
            if not g.hermitian or g.is_identity:
                raise CodeError(f"{name}: generator {format_pauli(g)} must be a Hermitian non-identity Pauli")
        for a, b in itertools.combinations(generators, 2):
            if not commutes(a, b):
                raise CodeError(f"{name}: generators {format_pauli(a)} and {format_pauli(b)} do not commute")
        if gf2_rank(symplectic_rows(generators)) != len(generators):
            raise CodeError(f"{name}: generators are not independent")
        self.name = name
        self.n = n
        self.k = n - len(generators)
        self.generators = generators
        if codewords is None:
            self.codewords = derive_codewords(generators)
        else:
            self.codewords = self._check_codewords(codewords)

    def _check_codewords(self, codewords) -> torch.Tensor:
        codewords = torch.as_tensor(np.asarray(codewords, dtype=np.complex128))
        if codewords.shape != (2 ** self.k, 2 ** self.n):
            raise CodeError(f"{self.name}: expected {2 ** self.k} codewords of length {2 ** self.n}, "
                            f"got shape {tuple(codewords.shape)}")
        for j, word in enumerate(codewords):
            for g in self.generators:
                if torch.linalg.vector_norm(to_matrix(g) @ word - word).item() > CODEWORD_TOLERANCE:
                    raise CodeError(f"{self.name}: codeword {j} is not stabilized by {format_pauli(g)}")
        gram = codewords.conj() @ codewords.T
        if not torch.allclose(gram, torch.eye(len(codewords), dtype=torch.complex128), atol=CODEWORD_TOLERANCE):
            raise CodeError(f"{self.name}: codewords are not orthonormal")
        return codewords

    def __repr__(self):
        return f"StabilizerCode([[{self.n},{self.k}]] {self.name}: {' '.join(map(format_pauli, self.generators))})"


def syndrome_of(error: PauliOperator, code: StabilizerCode) -> Syndrome:
    _dimension_check(error, code)
    return Syndrome(tuple(1 if commutes(error, g) else -1 for g in code.generators))


def codespace_projector(code: StabilizerCode) -> torch.Tensor:
    return _projector(code.generators, [1] * len(code.generators))


def syndrome_projector(code: StabilizerCode, syndrome: typing.Union[Syndrome, str]) -> torch.Tensor:
    if isinstance(syndrome, str):
        syndrome = Syndrome.from_label(syndrome)
    if len(syndrome.signs) != len(code.generators):
        raise CodeError(f"syndrome {syndrome.label} does not match {len(code.generators)} generators")
    return _projector(code.generators, syndrome.signs)


def stabilizer_group(code: StabilizerCode) -> typing.List[PauliOperator]:
    """All 2^(n-k) stabilizer elements with their phases."""
    elements = []
    for mask in itertools.product((0, 1), repeat=len(code.generators)):
        element = identity(code.n)
        for bit, generator in zip(mask, code.generators):
            if bit:
                element = multiply(element, generator)
        elements.append(element)
    return sorted(elements, key=sort_key)


def in_stabilizer(p: PauliOperator, code: StabilizerCode, up_to_phase: bool = False) -> bool:
    _dimension_check(p, code)
    if up_to_phase:
        p = p.stripped()
        return any(s.stripped() == p for s in stabilizer_group(code))
    return p in stabilizer_group(code)


def _commuting_mask(code: StabilizerCode) -> np.ndarray:
    indices = np.arange(4 ** code.n)
    digits = (indices[:, None] // 4 ** np.arange(code.n - 1, -1, -1)[None, :]) % 4  # 0=I 1=X 2=Y 3=Z
    x_bits = ((digits == 1) | (digits == 2)).astype(np.int64)
    z_bits = ((digits == 2) | (digits == 3)).astype(np.int64)
    gens = symplectic_rows(code.generators).astype(np.int64)
    gx, gz = gens[:, :code.n], gens[:, code.n:]
    return np.all((x_bits @ gz.T + z_bits @ gx.T) % 2 == 0, axis=1)


def normalizer(code: StabilizerCode) -> typing.List[PauliOperator]:
    """Phase-0 Paulis commuting with every generator, sorted by (weight, letters)."""
    paulis = all_paulis(code.n)
    mask = _commuting_mask(code)
    return sorted((p for p, keep in zip(paulis, mask) if keep), key=sort_key)


def logical_matrix(N: PauliOperator, code: StabilizerCode) -> torch.Tensor:
    _dimension_check(N, code)
    return code.codewords.conj() @ to_matrix(N) @ code.codewords.T


def logical_action(N: PauliOperator, code: StabilizerCode, tolerance: float = CODEWORD_TOLERANCE) -> LogicalAction:
    _dimension_check(N, code)
    offender = next((g for g in code.generators if not commutes(N, g)), None)
    if offender is not None:
        raise CodeError(f"{format_pauli(N)} anticommutes with {format_pauli(offender)}: "
                        f"it has no logical action on {code.name}")
    matrix = logical_matrix(N, code)
    for logical in all_paulis(code.k):
        reference = to_matrix(logical)
        coeff = torch.trace(reference.conj().T @ matrix).item() / 2 ** code.k
        if abs(abs(coeff) - 1) > tolerance:
            continue
        if torch.allclose(matrix, coeff * reference, atol=tolerance):
            return LogicalAction(logical, coeff_to_exponent(coeff, tolerance))
    raise CodeError(f"{format_pauli(N)} has no Pauli action in the codeword basis of {code.name}")


@functools.lru_cache(maxsize=None)
def logical_representatives(code: StabilizerCode) -> typing.Dict[str, PauliOperator]:
    """
    One normalizer element per logical Pauli, keyed by its logical letters and phased to act as exactly +L.
    Scans Paulis in basis order and stops once all 4^k logical classes are covered.
    """
    found = {}
    for candidate, keep in zip(all_paulis(code.n), _commuting_mask(code)):
        if not keep:
            continue
        action = logical_action(candidate, code)
        letters = action.logical.letters
        if letters not in found:
            found[letters] = candidate.with_phase(-action.phase_exp)
        if len(found) == 4 ** code.k:
            break
    return {letters.letters: found[letters.letters] for letters in all_paulis(code.k)}


def encode(state: typing.Sequence[complex], code: StabilizerCode, tolerance: float = NORM_TOLERANCE) -> torch.Tensor:
    amplitudes = torch.as_tensor(np.asarray(state, dtype=np.complex128))
    if amplitudes.shape != (2 ** code.k,):
        raise CodeError(f"{code.name} encodes {2 ** code.k} amplitudes, got shape {tuple(amplitudes.shape)}")
    norm = torch.linalg.vector_norm(amplitudes).item()
    if abs(norm - 1) > tolerance:
        raise CodeError(f"logical state has norm {norm:.15f}, expected 1")
    return amplitudes @ code.codewords


def logical_expectations(state: torch.Tensor, code: StabilizerCode,
                         tolerance: float = CODEWORD_TOLERANCE) -> typing.Tuple[float, ...]:
    """<L> for every non-identity logical Pauli in basis order; (X_L, Y_L, Z_L) when k = 1."""
    state = torch.as_tensor(state, dtype=torch.complex128)
    if state.shape != (2 ** code.n,):
        raise CodeError(f"expected a {2 ** code.n}-amplitude state, got shape {tuple(state.shape)}")
    if torch.linalg.vector_norm(codespace_projector(code) @ state - state).item() > tolerance:
        raise CodeError(f"state lies outside the code space of {code.name}")
    representatives = logical_representatives(code)
    return tuple(torch.vdot(state, to_matrix(rep) @ state).real.item()
                 for letters, rep in representatives.items() if set(letters) != {"I"})


def dump_code(code: StabilizerCode) -> str:
    lines = [f"{code.n} {code.k}"] + [format_pauli(g) for g in code.generators]
    for j, word in enumerate(code.codewords.tolist()):
        lines.append(f"codeword {j}")
        lines.extend(f"{index} {amp.real!r} {amp.imag!r}" for index, amp in enumerate(word) if abs(amp) > 0)
    return '\n'.join(lines) + '\n'


def load_code(text: str, name: str = "code") -> StabilizerCode:
    lines = [line.split('#')[0].strip() for line in text.splitlines()]
    lines = [line for line in lines if line]
    if not lines:
        raise CodeError(f"{name}: empty code description")
    try:
        n, k = map(int, lines[0].split())
    except ValueError as exc:
        raise CodeError(f"{name}: header must be 'n k', got '{lines[0]}'") from exc
    generators = lines[1:1 + n - k]
    if len(generators) != n - k or any(line.startswith("codeword") for line in generators):
        raise CodeError(f"{name}: expected {n - k} generator lines")
    blocks = lines[1 + n - k:]
    if not blocks:
        code = StabilizerCode(generators, name=name)
    else:
        codewords = np.zeros((2 ** k, 2 ** n), dtype=np.complex128)
        current = None
        for line in blocks:
            fields = line.split()
            if fields[0] == "codeword":
                current = int(fields[1])
                if not 0 <= current < 2 ** k:
                    raise CodeError(f"{name}: codeword index {current} outside 0..{2 ** k - 1}")
                continue
            if current is None or len(fields) != 3:
                raise CodeError(f"{name}: malformed amplitude line '{line}'")
            codewords[current, int(fields[0])] = complex(float(fields[1]), float(fields[2]))
        code = StabilizerCode(generators, codewords, name=name)
    if code.k != k:
        raise CodeError(f"{name}: header says k={k} but generators give k={code.k}")
    return code


def normalizer_classes(code: StabilizerCode) -> typing.Dict[str, typing.List[typing.Tuple[PauliOperator, int]]]:
    """Phase-0 normalizer elements grouped by logical Pauli, each with the phase exponent of its action."""
    classes = {p.letters: [] for p in all_paulis(code.k)}
    for element in normalizer(code):
        action = logical_action(element, code)
        classes[action.logical.letters].append((element, action.phase_exp))
    return classes


def format_normalizer_table(code: StabilizerCode) -> str:
    signs = ("+", "+i", "-", "-i")
    columns = [[f"{letters}_L"] + [signs[phase] + element.letters for element, phase in members]
               for letters, members in normalizer_classes(code).items()]
    depth = max(len(c) for c in columns)
    return format_table([[c[i] if i < len(c) else "" for c in columns] for i in range(depth)])
