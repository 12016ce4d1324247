import functools
import math
import pathlib
import typing

import numpy as np
import torch

from src.pauli import (PauliOperator, all_paulis, coeff_to_exponent, commutes, embed, format_pauli, from_letters,
                       parse, to_matrix)
from src.stabilizer import (CodeError, StabilizerCode, derive_codewords, in_stabilizer, load_code, logical_action,
                            normalizer, syndrome_of)

H_ZY = torch.tensor([[1, 1j], [1j, 1]], dtype=torch.complex128) / math.sqrt(2)
H_YX = torch.tensor([[1 + 1j, 1 + 1j], [-1 + 1j, 1 - 1j]], dtype=torch.complex128) / 2

KetTerms = typing.List[typing.Tuple[int, str]]


class CatalogError(ValueError):
    pass


class CatalogEntry(typing.NamedTuple):
    id: str
    code: StabilizerCode
    noisy_coords: typing.Tuple[int, ...]
    note: str
    printed_generators: typing.Tuple[str, ...]
    source: typing.Optional[str] = None  # resolved path of a code file


# printed material, kept verbatim so validate_catalog can report disagreements
_PRINTED_KETS: typing.Dict[str, typing.Tuple[float, KetTerms, KetTerms]] = {
    "q3": (1 / 2,
           [(1, "001"), (1, "010"), (1, "100"), (1, "111")],
           [(1, "110"), (-1, "101"), (1, "011"), (-1, "000")]),
    "q5": (1 / (2 * math.sqrt(2)),
           [(-1, "00000"), (1, "0111"), (-1, "10011"), (1, "11100"),
            (1, "00110"), (1, "01001"), (1, "10101"), (1, "11010")],
           [(-1, "11111"), (1, "10000"), (1, "01100"), (-1, "00011"),
            (1, "11001"), (1, "10110"), (-1, "01010"), (-1, "00101")]),
    "C1": (1 / (2 * math.sqrt(2)),
           [(-1, "0000"), (1, "0010"), (1, "0101"), (1, "0111"),
            (-1, "1001"), (1, "1011"), (1, "1100"), (1, "1110")],
           [(-1, "1111"), (1, "1101"), (1, "1010"), (1, "1000"),
            (-1, "0110"), (1, "0100"), (1, "0011"), (1, "0001")]),
}
_PRINTED_GENERATORS = {
    "q3": ("XIX", "YYZ"),
    "q5": ("IXXYY", "IYYXX", "XIYZY", "YXYIZ"),
    "C1": ("XIIX", "YIXY", "YYZZ"),
    "C2": ("IZZX", "XIIX", "YZYZ"),
    "C3": ("IXXZ", "XIXZ", "YXYX"),
}
_CORRECTED_GENERATORS = {"C3": ("IXXZ", "XIZX", "YXYX")}
# syndrome sign rows per generator, over columns of two ambiguous errors on qubits 1 and 2
_PRINTED_SYNDROME_TABLES = {
    "C1": (("II", "X1", "X2", "Y1", "Z1", "XX", "YX", "ZX"),
           ("Y2", "XY", "Z2", "YY", "ZY", "XZ", "YZ", "ZZ"),
           ("+++--+--", "+-++--+-", "+--+-+-+")),
    "C2": (("II", "X1", "X2", "Y1", "Z1", "XX", "YX", "ZX"),
           ("Z2", "XZ", "Y2", "YZ", "ZZ", "XY", "YY", "ZY"),
           ("++-++---", "+++--+--", "+--+-+-+")),
    "C3": (("II", "X1", "Y1", "Y2", "Z1", "XY", "YY", "ZY"),
           ("X2", "XX", "YX", "Z2", "ZX", "XZ", "YZ", "ZZ"),
           ("+++-+---", "++-+-+--", "+-+--+-+")),
}
_PRINTED_NORMALIZER = {"q3": {"I": (0, ("III", "XIX", "YYZ", "ZYY")),
                              "X": (2, ("XZI", "IZX", "YXY", "ZXZ")),
                              "Y": (0, ("IYI", "XYX", "YIZ", "ZIY")),
                              "Z": (0, ("XXI", "IXX", "YZY", "ZZZ"))}}
_PRINTED_CLASS_LISTING = {"q5": {
    "++++": ("I",), "+++-": ("X1", "Y2Y3", "X3Y4"), "++-+": ("Y1", "Z2Z3", "Y3X4"),
    "++--": ("Z1", "X2X3", "Z3Z4"), "+-++": ("X2", "Z1X3", "Y3Z4"), "+-+-": ("Y5", "X1X2", "Z2Y3"),
    "+--+": ("Y4", "Y1X2", "Y2Z3"), "+---": ("X3", "Z1X2", "Z2X4"), "-+++": ("Y3", "X1Y2", "X2Z4"),
    "-++-": ("Y2", "X1Y3", "Z3Y4"), "-+-+": ("X4", "Z1Y2", "Z2X3"), "-+--": ("X5", "Y1Y2", "X2Z3"),
    "--++": ("Z4", "X1Z2", "X2Y3"), "--+-": ("Z2", "Y1Z3", "X3X4"), "---+": ("Z5", "Z1Z2", "X1Z3"),
    "----": ("Z3", "Y1Z2", "Y2Y4")}}
_NOTES = {
    "q3": "[[3,1]] code correcting arbitrary errors on qubit 1",
    "q5": "[[5,1]] perfect code; codewords derived from the generators",
    "C1": "[[4,1]] two-fold ambiguous code, last qubit of the 5-qubit code dropped",
    "C2": "C1 conjugated by H_ZY on every qubit",
    "C3": "C1 conjugated by H_YX on every qubit",
}
IDS = ("q3", "q5", "C1", "C2", "C3")


def ket_amplitudes(prefactor: float, terms: KetTerms, n: int) -> np.ndarray:
    vector = np.zeros(2 ** n, dtype=np.complex128)
    for sign, bits in terms:
        if len(bits) != n or any(b not in "01" for b in bits):
            raise CatalogError(f"ket |{bits}> is not an {n}-qubit basis state")
        vector[int(bits, 2)] += sign * prefactor
    return vector


def _single_pauli_image(unitary: torch.Tensor, letter: str) -> typing.Tuple[str, int]:
    image = unitary @ to_matrix(from_letters(letter)) @ unitary.conj().T
    for candidate in "IXYZ":
        coeff = torch.trace(to_matrix(from_letters(candidate)) @ image).item() / 2
        if abs(abs(coeff) - 1) < 1e-10:
            return candidate, coeff_to_exponent(coeff)
    raise CatalogError(f"conjugating {letter} does not give a Pauli")


def conjugation_map(unitary: torch.Tensor) -> typing.Dict[str, str]:
    """Single-qubit action, e.g. {'X': 'X', 'Y': '-Z', 'Z': 'Y'} for H_ZY."""
    out = {}
    for letter in "XYZ":
        image, phase = _single_pauli_image(unitary, letter)
        out[letter] = {0: "", 1: "i", 2: "-", 3: "-i"}[phase] + image
    return out


def _as_pauli(matrix: torch.Tensor, n: int) -> PauliOperator:
    for candidate in all_paulis(n):
        coeff = torch.trace(to_matrix(candidate) @ matrix).item() / 2 ** n
        if abs(abs(coeff) - 1) < 1e-10 and torch.allclose(matrix, coeff * to_matrix(candidate), atol=1e-10):
            return candidate.with_phase(coeff_to_exponent(coeff))
    raise CatalogError("conjugated generator is not proportional to a Pauli")


def transform_code(code: StabilizerCode, unitary: torch.Tensor,
                   powers: typing.Optional[typing.Sequence[int]] = None, name: typing.Optional[str] = None
                   ) -> StabilizerCode:
    """Applies unitary^power_i to qubit i of every codeword and conjugates the generators to match."""
    unitary = torch.as_tensor(unitary, dtype=torch.complex128)
    if unitary.shape != (2, 2):
        raise CatalogError(f"expected a 2x2 unitary, got shape {tuple(unitary.shape)}")
    if not torch.allclose(unitary @ unitary.conj().T, torch.eye(2, dtype=torch.complex128), atol=1e-12):
        raise CatalogError("transform is not unitary")
    powers = [1] * code.n if powers is None else list(powers)
    if len(powers) != code.n:
        raise CatalogError(f"{len(powers)} powers for {code.n} qubits")
    full = torch.ones((1, 1), dtype=torch.complex128)
    for power in powers:
        full = torch.kron(full, torch.linalg.matrix_power(unitary, power))
    generators = [_as_pauli(full @ to_matrix(g) @ full.conj().T, code.n) for g in code.generators]
    codewords = code.codewords @ full.T
    return StabilizerCode(generators, codewords, name=name or f"{code.name}'")


def _build(entry_id: str) -> CatalogEntry:
    coords = (1, 2)
    printed = _PRINTED_GENERATORS[entry_id]
    generators = _CORRECTED_GENERATORS.get(entry_id, printed)
    if entry_id in ("q3", "C1"):
        prefactor, zero, one = _PRINTED_KETS[entry_id]
        n = len(generators[0])
        codewords = np.stack([ket_amplitudes(prefactor, zero, n), ket_amplitudes(prefactor, one, n)])
        code = StabilizerCode(generators, codewords, name=entry_id)
    elif entry_id == "q5":
        code = StabilizerCode(generators, name=entry_id)
    else:
        unitary = H_ZY if entry_id == "C2" else H_YX
        transformed = transform_code(get("C1").code, unitary)
        code = StabilizerCode(generators, transformed.codewords, name=entry_id)
    return CatalogEntry(entry_id, code, coords, _NOTES[entry_id], printed)


@functools.lru_cache(maxsize=None)
def get(entry_id: str) -> CatalogEntry:
    if entry_id not in IDS:
        raise CatalogError(f"unknown code '{entry_id}', expected one of {', '.join(IDS)} or a code file")
    try:
        return _build(entry_id)
    except CodeError as exc:
        raise CatalogError(f"catalog entry {entry_id} is invalid: {exc}") from exc


def load_entry(reference: str, coords: typing.Optional[typing.Sequence[int]] = None) -> CatalogEntry:
    """Catalog id or path to a code file in the stabilizer text format."""
    if reference in IDS:
        entry = get(reference)
    else:
        path = pathlib.Path(reference)
        if not path.exists():
            raise CatalogError(f"unknown code '{reference}', expected one of {', '.join(IDS)} or a code file")
        code = load_code(path.read_text(), name=path.stem)
        entry = CatalogEntry(path.stem, code, (1, 2) if code.n >= 2 else (1,), f"loaded from {path}",
                             tuple(format_pauli(g) for g in code.generators), str(path.resolve()))
    if coords is not None:
        coords = tuple(coords)
        if len(set(coords)) != len(coords) or any(not 1 <= c <= entry.code.n for c in coords):
            raise CatalogError(f"coordinates {list(coords)} must be distinct and within 1..{entry.code.n}")
        entry = entry._replace(noisy_coords=coords)
    return entry


def _pair_label(label: str) -> PauliOperator:
    if len(label) == 2 and all(c in "IXYZ" for c in label):
        return from_letters(label)
    return parse(label, n=2)


class CatalogReport(typing.NamedTuple):
    checked: typing.Dict[str, typing.List[str]]  # passed checks per entry
    errata: typing.List[str]
    failures: typing.List[str]

    @property
    def ok(self) -> bool:
        return not self.failures


def validate_catalog() -> CatalogReport:
    checked = {entry_id: [] for entry_id in IDS}
    errata, failures = [], []
    for entry_id in IDS:
        try:
            entry = get(entry_id)
        except CatalogError as exc:
            failures.append(f"{entry_id}: {exc}")
            continue
        code = entry.code
        checked[entry_id].append("generators commute and are independent")
        checked[entry_id].append("codewords are stabilized and orthonormal")
        printed = [from_letters(g) for g in entry.printed_generators]
        for a_index, a in enumerate(printed):
            for b in printed[a_index + 1:]:
                if not commutes(a, b):
                    errata.append(f"{entry_id}: printed generators {format_pauli(a)} and {format_pauli(b)} "
                                  f"anticommute; using {', '.join(map(format_pauli, code.generators))}")
        if entry_id in _PRINTED_KETS:
            prefactor, zero, one = _PRINTED_KETS[entry_id]
            for j, terms in enumerate((zero, one)):
                try:
                    printed_word = ket_amplitudes(prefactor, terms, code.n)
                except CatalogError as exc:
                    errata.append(f"{entry_id}: printed codeword {j}: {exc}; using the projector-derived basis")
                    continue
                overlap = abs(np.vdot(printed_word, code.codewords[j].numpy()))
                if abs(overlap - 1) > 1e-10:
                    errata.append(f"{entry_id}: printed codeword {j} differs from the codeword in use")
            checked[entry_id].append("printed codewords compared")
        if entry_id in _PRINTED_SYNDROME_TABLES:
            errata.extend(_check_syndrome_table(entry))
            checked[entry_id].append("syndrome table compared")
        if entry_id in _PRINTED_NORMALIZER:
            errata.extend(_check_normalizer(entry))
            checked[entry_id].append("normalizer table compared")
        if entry_id in _PRINTED_CLASS_LISTING:
            errata.extend(_check_class_listing(entry))
            checked[entry_id].append("partial ambiguous class compared")
    errata.extend(_check_transforms())
    return CatalogReport(checked, errata, failures)


def _check_syndrome_table(entry: CatalogEntry) -> typing.List[str]:
    top, bottom, rows = _PRINTED_SYNDROME_TABLES[entry.id]
    errata = []
    for column, (first, second) in enumerate(zip(top, bottom)):
        printed = tuple(1 if row[column] == "+" else -1 for row in rows)
        for label in (first, second):
            error = embed(_pair_label(label), entry.noisy_coords, entry.code.n)
            derived = syndrome_of(error, entry.code).signs
            if derived != printed:
                errata.append(f"{entry.id}: syndrome of {label} is "
                              f"{''.join('+' if s > 0 else '-' for s in derived)}, printed "
                              f"{''.join('+' if s > 0 else '-' for s in printed)}")
    return errata


def _check_normalizer(entry: CatalogEntry) -> typing.List[str]:
    errata = []
    members = set(normalizer(entry.code))
    for letters, (phase, column) in _PRINTED_NORMALIZER[entry.id].items():
        for element in column:
            pauli = from_letters(element)
            if pauli not in members:
                errata.append(f"{entry.id}: printed normalizer element {element} does not commute with the code")
                continue
            action = logical_action(pauli, entry.code)
            if action.logical.letters != letters:
                errata.append(f"{entry.id}: {element} acts as {action.label}, printed in column {letters}_L")
            elif action.phase_exp != phase:
                errata.append(f"{entry.id}: {element} acts as {action.label}, printed with the column sign of "
                              f"{'-' if phase == 2 else ''}{letters}_L")
    return errata


def _check_class_listing(entry: CatalogEntry) -> typing.List[str]:
    errata = []
    code = entry.code
    for label, cells in _PRINTED_CLASS_LISTING[entry.id].items():
        for cell in cells:
            derived = syndrome_of(parse(cell, n=code.n), code).label
            if derived != label:
                errata.append(f"{entry.id}: {cell} has syndrome {derived}, printed under {label}")
    return errata


def _check_transforms() -> typing.List[str]:
    errata = []
    claims = {"H_ZY": (H_ZY, "X"), "H_YX": (H_YX, "Z")}
    for name, (unitary, fixed) in claims.items():
        action = conjugation_map(unitary)
        if action[fixed] != fixed:
            cycle = ', '.join(f"{k}->{v}" for k, v in action.items())
            errata.append(f"{name} does not fix {fixed} as captioned; its conjugation action is {cycle}")
    return errata


def back_conjugated_in_parent(child: str, parent: str = "C1") -> bool:
    """Every generator of `child`, conjugated back by the inverse transform, lies in the parent's stabilizer."""
    unitary = H_ZY if child == "C2" else H_YX
    back = transform_code(get(child).code, unitary.conj().T)
    return all(in_stabilizer(g, get(parent).code) for g in back.generators)


def projector_codewords(entry_id: str) -> torch.Tensor:
    return derive_codewords(get(entry_id).code.generators)
