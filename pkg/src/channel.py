import functools
import json
import pathlib
import re
import typing

import numpy as np
import torch
import yaml

from src.pauli import PauliError, PauliOperator, all_paulis, basis_index, embed, format_sparse, parse, to_matrix

HERMITIAN_TOLERANCE = 1e-12
PSD_TOLERANCE = 1e-10
_PRESET = re.compile(r"^(\w+)(?:\((.*)\))?$")


class ChannelError(ValueError):
    pass


class Parameter(typing.NamedTuple):
    """
    One real coordinate of chi: 'diag' is chi[j][j], 're'/'im' are Re/Im of chi[j][k] with j < k in basis order.
    """
    kind: str
    row: int
    col: int

    def label(self, m: int) -> str:
        basis = all_paulis(m)
        row, col = format_sparse(basis[self.row]), format_sparse(basis[self.col])
        if self.kind == "diag":
            return f"chi({row},{row})"
        return f"{self.kind.capitalize()}({row},{col})"

    @classmethod
    def make(cls, kind: str, row: typing.Union[int, str, PauliOperator], col: typing.Union[int, str, PauliOperator],
             m: int) -> 'Parameter':
        row, col = _index(row, m), _index(col, m)
        if kind == "diag":
            if row != col:
                raise ChannelError("diagonal parameters need row == col")
            return cls(kind, row, row)
        if kind not in ("re", "im"):
            raise ChannelError(f"unknown parameter kind '{kind}'")
        if row == col:
            if kind == "im":
                raise ChannelError("diagonal entries of a Hermitian chi have no imaginary part")
            return cls("diag", row, row)
        return cls(kind, min(row, col), max(row, col))

    @classmethod
    def parse(cls, text: str, m: int) -> 'Parameter':
        match = re.match(r"^\s*(Re|Im|chi)\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)\s*$", text)
        if match is None:
            raise ChannelError(f"malformed parameter label '{text}'")
        kind = {"Re": "re", "Im": "im", "chi": "diag"}[match.group(1)]
        row, col = _index(match.group(2), m), _index(match.group(3), m)
        if kind == "im" and row > col:
            raise ChannelError(f"'{text}' is Im(chi[k][j]) = -Im(chi[j][k]); "
                               "write it with the row first in basis order")
        return cls.make(kind, row, col, m)


def _index(value: typing.Union[int, str, PauliOperator], m: int) -> int:
    if isinstance(value, int):
        if not 0 <= value < 4 ** m:
            raise ChannelError(f"basis index {value} outside 0..{4 ** m - 1}")
        return value
    try:
        pauli = parse(value, n=m) if isinstance(value, str) else value
    except PauliError as exc:
        raise ChannelError(str(exc)) from exc
    if pauli.n != m:
        raise ChannelError(f"{value} is not an operator on {m} noisy qubits")
    return basis_index(pauli)


def all_parameters(m: int) -> typing.List[Parameter]:
    size = 4 ** m
    params = [Parameter("diag", j, j) for j in range(size)]
    for j in range(size):
        for k in range(j + 1, size):
            params.extend([Parameter("re", j, k), Parameter("im", j, k)])
    return params


class ProcessMatrix:
    def __init__(self, chi: typing.Any, m: int):
        chi = torch.as_tensor(np.asarray(chi, dtype=np.complex128))
        if chi.shape != (4 ** m, 4 ** m):
            raise ChannelError(f"chi on {m} qubits must be {4 ** m}x{4 ** m}, got {tuple(chi.shape)}")
        self.m = m
        self.chi = chi
        self.basis = all_paulis(m)

    def index(self, error: typing.Union[int, str, PauliOperator]) -> int:
        return _index(error, self.m)

    def entry(self, row, col) -> complex:
        return complex(self.chi[self.index(row), self.index(col)].item())

    def parameter_value(self, param: Parameter) -> float:
        value = complex(self.chi[param.row, param.col].item())
        return value.imag if param.kind == "im" else value.real

    def support(self, tolerance: float = 0.) -> typing.List[int]:
        mask = (self.chi.abs() > tolerance).any(dim=0) | (self.chi.abs() > tolerance).any(dim=1)
        return torch.nonzero(mask).flatten().tolist()

    def off_diagonal_support(self, tolerance: float = 0.) -> typing.List[typing.Tuple[int, int]]:
        size = 4 ** self.m
        return [(j, k) for j in range(size) for k in range(j + 1, size) if abs(self.chi[j, k].item()) > tolerance]

    @classmethod
    def from_parameters(cls, m: int, values: typing.Dict[Parameter, float]) -> 'ProcessMatrix':
        chi = np.zeros((4 ** m, 4 ** m), dtype=np.complex128)
        for param, value in values.items():
            if param.kind == "diag":
                chi[param.row, param.row] = value
            elif param.kind == "re":
                chi[param.row, param.col] += value
                chi[param.col, param.row] += value
            else:
                chi[param.row, param.col] += 1j * value
                chi[param.col, param.row] -= 1j * value
        return cls(chi, m)

    def __repr__(self):
        return f"ProcessMatrix(m={self.m}, support={[format_sparse(self.basis[i]) for i in self.support()]})"


@functools.lru_cache(maxsize=64)
def embedded_operators(m: int, coords: typing.Tuple[int, ...], n: int) -> torch.Tensor:
    try:
        return torch.stack([to_matrix(embed(p, coords, n)) for p in all_paulis(m)])
    except PauliError as exc:
        raise ChannelError(str(exc)) from exc


def _hermitian_residual(chi: ProcessMatrix) -> float:
    return (chi.chi - chi.chi.conj().T).abs().max().item()


def apply(chi: ProcessMatrix, rho: torch.Tensor, coords: typing.Sequence[int],
          tolerance: float = HERMITIAN_TOLERANCE) -> torch.Tensor:
    """Sum over j, k of chi[j][k] E_j rho E_k^dagger with the E_j placed on the noisy coordinates."""
    coords = tuple(coords)
    if len(coords) != chi.m:
        raise ChannelError(f"chi acts on {chi.m} qubits but {len(coords)} coordinates were given")
    if len(set(coords)) != len(coords):
        raise ChannelError(f"coordinate clash in {list(coords)}")
    if _hermitian_residual(chi) > tolerance:
        raise ChannelError("chi is not Hermitian")
    n = int(round(np.log2(rho.shape[0])))
    ops = embedded_operators(chi.m, coords, n)
    left = torch.einsum('jab,bc->jac', ops, rho)
    return torch.einsum('jk,jac,kdc->ad', chi.chi, left, ops.conj())


def trace_residual(chi: ProcessMatrix) -> torch.Tensor:
    """Sum over j, k of chi[j][k] E_k^dagger E_j minus identity, on the m noisy qubits."""
    ops = embedded_operators(chi.m, tuple(range(1, chi.m + 1)), chi.m)
    return torch.einsum('jk,kba,jbc->ac', chi.chi, ops.conj(), ops) - torch.eye(2 ** chi.m, dtype=torch.complex128)


class ChannelReport(typing.NamedTuple):
    hermitian: bool
    unit_mass: bool
    trace_preserving: bool
    completely_positive: bool
    residuals: typing.Dict[str, float]


def validate(chi: ProcessMatrix, tolerance: float = HERMITIAN_TOLERANCE,
             psd_tolerance: float = PSD_TOLERANCE) -> ChannelReport:
    hermitian = _hermitian_residual(chi)
    mass = abs(torch.trace(chi.chi).item() - 1)
    trace = trace_residual(chi).abs().max().item()
    symmetric = (chi.chi + chi.chi.conj().T) / 2
    eigenvalue = torch.linalg.eigvalsh(symmetric).min().item()
    residuals = {"hermitian": hermitian, "unit_mass": mass, "trace_preserving": trace,
                 "completely_positive": max(0., -eigenvalue)}
    return ChannelReport(hermitian <= tolerance, mass <= tolerance, trace <= tolerance,
                         eigenvalue >= -psd_tolerance, residuals)


def _toy_entries() -> typing.Dict[str, typing.Tuple[str, str]]:
    return {"ab": ("XI", "IX"), "cd": ("II", "XX"), "ef": ("XZ", "IY")}


def make_toy_noise_EA(delta: float, a: float, b: float, c: float, d: float, e: float, f: float) -> ProcessMatrix:
    """
    delta on the identity, (1-delta)/5 on X1, X1Z2, Y2, X2, X1X2, and the off-diagonal pairs
    (X1,X2) = (a+ib)/6, (I,X1X2) = (c+id)/6, (X1Z2,Y2) = (e+if)/6 with their conjugates.
    """
    chi = np.zeros((16, 16), dtype=np.complex128)
    chi[0, 0] = delta
    for letters in ("XI", "XZ", "IY", "IX", "XX"):
        i = _index(letters, 2)
        chi[i, i] = (1 - delta) / 5
    values = {"ab": complex(a, b), "cd": complex(c, d), "ef": complex(e, f)}
    for key, (row, col) in _toy_entries().items():
        r, c_ = _index(row, 2), _index(col, 2)
        chi[r, c_] = values[key] / 6
        chi[c_, r] = np.conj(values[key]) / 6
    return ProcessMatrix(chi, 2)


def project_toy_parameters(delta: float, a: float, b: float, c: float, d: float, e: float,
                           f: float) -> typing.Dict[str, float]:
    """Nearest (a..f) on which the toy channel is trace preserving."""

    def residual(values: typing.Sequence[float]) -> torch.Tensor:
        matrix = trace_residual(make_toy_noise_EA(delta, *values)).flatten()
        return torch.cat([matrix.real, matrix.imag])

    offset = residual([0.] * 6)
    columns = [residual(unit) - offset for unit in torch.eye(6, dtype=torch.float64).tolist()]
    linear = torch.stack(columns, dim=1)
    values = torch.tensor([a, b, c, d, e, f], dtype=torch.float64)
    projected = values - torch.linalg.pinv(linear) @ (linear @ values + offset)
    return dict(zip("abcdef", projected.tolist()), delta=delta)


def identity_channel(m: int) -> ProcessMatrix:
    chi = np.zeros((4 ** m, 4 ** m), dtype=np.complex128)
    chi[0, 0] = 1
    return ProcessMatrix(chi, m)


def pauli_channel(m: int, probabilities: typing.Dict[str, float]) -> ProcessMatrix:
    chi = np.zeros((4 ** m, 4 ** m), dtype=np.complex128)
    for error, p in probabilities.items():
        i = _index(error, m)
        chi[i, i] = p
    return ProcessMatrix(chi, m)


def depolarizing(m: int, p: float) -> ProcessMatrix:
    if not 0 <= p <= 1:
        raise ChannelError(f"depolarizing strength must lie in [0, 1], got {p}")
    diagonal = np.full(4 ** m, p / (4 ** m - 1))
    diagonal[0] = 1 - p
    return ProcessMatrix(np.diag(diagonal), m)


def random_hermitian_chi(m: int, seed: int, support: typing.Optional[typing.Sequence[int]] = None) -> ProcessMatrix:
    """Positive semidefinite chi with unit diagonal mass, optionally restricted to a basis support."""
    generator = torch.Generator().manual_seed(seed)
    size = 4 ** m
    factor = torch.complex(torch.randn(size, size, generator=generator, dtype=torch.float64),
                           torch.randn(size, size, generator=generator, dtype=torch.float64))
    if support is not None:
        mask = torch.zeros(size, dtype=torch.bool)
        mask[list(support)] = True
        factor = factor * mask[:, None]
    chi = factor @ factor.conj().T
    chi = (chi + chi.conj().T) / 2
    return ProcessMatrix(chi / torch.trace(chi).real, m)


def load_noise(spec: str, m: int = 2, toy_parameters: typing.Optional[typing.Dict[str, float]] = None) -> ProcessMatrix:
    """Preset name ("identity", "EA", "depolarizing(p)", "random(seed)") or a YAML/JSON file."""
    match = _PRESET.match(spec.strip())
    if match is not None and not pathlib.Path(spec).exists():
        name, argument = match.group(1).lower(), match.group(2)
        try:
            if name == "identity":
                return identity_channel(m)
            if name == "ea":
                if m != 2:
                    raise ChannelError("the toy channel acts on 2 noisy qubits")
                params = dict(toy_parameters or {})
                return make_toy_noise_EA(*(params[key] for key in ("delta", "a", "b", "c", "d", "e", "f")))
            if name == "depolarizing" and argument is not None:
                return depolarizing(m, float(argument))
            if name == "random" and argument is not None:
                return random_hermitian_chi(m, int(argument))
        except ChannelError:
            raise
        except (KeyError, ValueError) as exc:
            raise ChannelError(f"bad noise preset '{spec}': {exc}") from exc
    path = pathlib.Path(spec)
    if not path.exists():
        raise ChannelError(f"unknown noise preset or missing file '{spec}'")
    with open(path) as f:
        content = json.load(f) if path.suffix == ".json" else yaml.safe_load(f)
    return noise_from_dict(content)


def noise_from_dict(content: typing.Dict[str, typing.Any]) -> ProcessMatrix:
    if not isinstance(content, dict) or "m" not in content or "entries" not in content:
        raise ChannelError("noise file needs 'm' and 'entries'")
    m = int(content["m"])
    chi = np.zeros((4 ** m, 4 ** m), dtype=np.complex128)
    for entry in content["entries"]:
        row, col = _index(str(entry["row"]), m), _index(str(entry["col"]), m)
        value = complex(float(entry.get("re", 0.)), float(entry.get("im", 0.)))
        if row == col:
            if value.imag != 0:
                raise ChannelError(f"diagonal entry {entry['row']} must be real")
            chi[row, row] = value.real
            continue
        chi[row, col] = value
        chi[col, row] = np.conj(value)
    return ProcessMatrix(chi, m)


def noise_to_dict(chi: ProcessMatrix, tolerance: float = 0.) -> typing.Dict[str, typing.Any]:
    entries = []
    for j in range(4 ** chi.m):
        for k in range(j, 4 ** chi.m):
            value = complex(chi.chi[j, k].item())
            if abs(value) > tolerance:
                entries.append({"row": format_sparse(chi.basis[j]), "col": format_sparse(chi.basis[k]),
                                "re": value.real, "im": value.imag})
    return {"m": chi.m, "entries": entries}
