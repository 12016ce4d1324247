import cmath
import functools
import itertools
import math
import typing

import numpy as np
import torch

from src.ambiguity import AmbiguousClass, ErrorSet, build_class
from src.channel import Parameter, ProcessMatrix, apply
from src.pauli import (PauliError, PauliOperator, all_paulis, basis_index, commutes, embed, exponent_to_coeff,
                       format_sparse, multiply, parse, restrict, to_matrix)
from src.stabilizer import (LogicalAction, StabilizerCode, Syndrome, encode, logical_action, syndrome_of,
                            syndrome_projector)

COEFFICIENT_CUTOFF = 1e-15
_STATES = {"0L": (1, 0), "1L": (0, 1), "+L": (1, 1), "-L": (1, -1), "upL": (1, 1j), "downL": (1, -1j)}


class SimulationError(ValueError):
    pass


class Preprocessing(typing.NamedTuple):
    """
    "none", "U:Ea,Eb", "T:auto;U:Ea,Eb" or "T:<one sign per ambiguous set>;U:Ea,Eb".
    Ea and Eb are phase-0 Paulis on the noisy coordinates, written as X1Z2-style labels.
    """
    e_a: typing.Optional[PauliOperator] = None
    e_b: typing.Optional[PauliOperator] = None
    toggle: typing.Union[None, str, typing.Tuple[int, ...]] = None

    @property
    def direct(self) -> bool:
        return self.e_a is None

    @property
    def toggled(self) -> bool:
        return self.toggle is not None

    @classmethod
    def parse(cls, text: str, m: int) -> 'Preprocessing':
        text = text.strip().replace(" ", "")
        if text in ("", "none"):
            return cls()
        toggle = None
        parts = text.split(";")
        if len(parts) == 2 and parts[0].startswith("T:"):
            signs = parts[0][2:]
            if signs == "auto":
                toggle = "auto"
            elif signs and all(c in "+-" for c in signs):
                toggle = tuple(1 if c == "+" else -1 for c in signs)
            else:
                raise SimulationError(f"malformed toggle signs in '{text}'")
            parts = parts[1:]
        if len(parts) != 1 or not parts[0].startswith("U:") or parts[0].count(",") != 1:
            raise SimulationError(f"malformed preprocessing '{text}'")
        try:
            e_a, e_b = (parse(label, n=m).stripped() for label in parts[0][2:].split(","))
        except PauliError as exc:
            raise SimulationError(f"malformed preprocessing '{text}': {exc}") from exc
        return cls(e_a, e_b, toggle)

    def format(self) -> str:
        if self.direct:
            return "none"
        body = f"U:{format_sparse(self.e_a)},{format_sparse(self.e_b)}"
        if self.toggle is None:
            return body
        signs = self.toggle if self.toggle == "auto" else ''.join('+' if s > 0 else '-' for s in self.toggle)
        return f"T:{signs};{body}"


def noise_coordinates(cls: AmbiguousClass) -> typing.Tuple[int, ...]:
    return cls.errors.coords if cls.errors.coords is not None else tuple(range(1, cls.code.n + 1))


def named_state(name: str, k: int = 1) -> torch.Tensor:
    """Logical amplitudes for "0L", "1L", "+L", "-L", "upL", "downL" or "theta:<radians>", comma-joined when k > 1."""
    names = [part.strip() for part in name.split(",")]
    if len(names) != k:
        raise SimulationError(f"'{name}' names {len(names)} logical qubits, the code has {k}")
    out = torch.ones(1, dtype=torch.complex128)
    for part in names:
        if part.startswith("theta:"):
            try:
                theta = float(part[len("theta:"):])
            except ValueError as exc:
                raise SimulationError(f"malformed angle in '{part}'") from exc
            single = torch.tensor([math.cos(theta), math.sin(theta)], dtype=torch.complex128)
        elif part in _STATES:
            single = torch.tensor(_STATES[part], dtype=torch.complex128)
            single = single / torch.linalg.vector_norm(single)
        else:
            raise SimulationError(f"unknown input state '{part}'")
        out = torch.kron(out, single)
    return out


def input_schedule(k: int, theta: float) -> typing.List[str]:
    single = ["0L", "+L", "upL", f"theta:{theta!r}"]
    return [','.join(names) for names in itertools.product(single, repeat=k)]


def expectation_map(amplitudes: torch.Tensor, k: int) -> typing.Dict[str, float]:
    """<L> over every logical Pauli, evaluated on the logical amplitudes."""
    amplitudes = torch.as_tensor(amplitudes, dtype=torch.complex128)
    return {p.letters: torch.vdot(amplitudes, to_matrix(p) @ amplitudes).real.item() for p in all_paulis(k)}


class Configuration:
    def __init__(self, code: StabilizerCode, coords: typing.Sequence[int],
                 state: typing.Union[str, typing.Sequence[complex]] = "0L",
                 preprocessing: typing.Union[str, Preprocessing] = "none",
                 errors: typing.Optional[ErrorSet] = None):
        self.code = code
        self.coords = tuple(coords)
        self.errors = ErrorSet.on_coordinates(code.n, self.coords) if errors is None else errors
        self.ambiguous_class = build_class(code, self.errors)
        self.state_name = state if isinstance(state, str) else "custom"
        self.amplitudes = named_state(state, code.k) if isinstance(state, str) else torch.as_tensor(
            np.asarray(state, dtype=np.complex128))
        if isinstance(preprocessing, str):
            preprocessing = Preprocessing.parse(preprocessing, len(self.coords))
        self.preprocessing = preprocessing
        self.signs = self._check_preprocessing()

    def _check_preprocessing(self) -> typing.Optional[typing.Dict[Syndrome, int]]:
        pre = self.preprocessing
        if pre.direct:
            return None
        cls = self.ambiguous_class
        e_a, e_b = (self.embed(e) for e in (pre.e_a, pre.e_b))
        if e_a == e_b:
            raise SimulationError(f"U needs two distinct errors, got {format_sparse(pre.e_a)} twice")
        for error in (e_a, e_b):
            if error not in cls:
                raise SimulationError(f"{format_sparse(error)} is not an allowed error")
        if cls.ambiguous(e_a, e_b):
            raise SimulationError(f"{format_sparse(pre.e_a)} and {format_sparse(pre.e_b)} are mutually ambiguous")
        if pre.toggle is None:
            return None
        if pre.toggle == "auto":
            return auto_toggle_signs(cls, e_a, e_b)
        if len(pre.toggle) != len(cls.sets):
            raise SimulationError(f"{len(pre.toggle)} toggle signs for {len(cls.sets)} ambiguous sets")
        signs = dict(zip(cls.sets, pre.toggle))
        _check_balanced(signs)
        return signs

    def embed(self, error: PauliOperator) -> PauliOperator:
        return embed(error, self.coords, self.code.n)

    @property
    def expectations(self) -> typing.Dict[str, float]:
        return expectation_map(self.amplitudes, self.code.k)

    def __repr__(self):
        return f"Configuration({self.code.name}, {self.state_name}, {self.preprocessing.format()})"


def _check_balanced(signs: typing.Dict[Syndrome, int]):
    plus = sum(1 for s in signs.values() if s > 0)
    minus = len(signs) - plus
    if abs(plus - minus) > len(signs) % 2:
        raise SimulationError(f"toggle signs are unbalanced: {plus} '+' against {minus} '-'")


class ProbabilityFunctional:
    """
    p = sum over parameters of value * (sum over logical labels of weight * <L>), where the
    identity label carries the state-independent part.
    """

    def __init__(self, terms: typing.Dict[Parameter, typing.Dict[str, float]], k: int):
        self.k = k
        self.terms = {param: {label: w for label, w in weights.items() if abs(w) > COEFFICIENT_CUTOFF}
                      for param, weights in terms.items()}
        self.terms = {param: weights for param, weights in self.terms.items() if weights}

    def row(self, expectations: typing.Dict[str, float]) -> typing.Dict[Parameter, float]:
        out = {}
        for param, weights in self.terms.items():
            value = sum(w * expectations[label] for label, w in weights.items())
            if abs(value) > COEFFICIENT_CUTOFF:
                out[param] = value
        return out

    def evaluate(self, chi: ProcessMatrix, expectations: typing.Dict[str, float]) -> float:
        return sum(chi.parameter_value(param) * w for param, w in self.row(expectations).items())

    def component(self, label: str) -> typing.Dict[Parameter, float]:
        return {param: weights[label] for param, weights in self.terms.items() if label in weights}

    @property
    def constant(self) -> typing.Dict[Parameter, float]:
        return self.component("I" * self.k)

    def support(self, label: typing.Optional[str] = None) -> typing.Set[Parameter]:
        return set(self.terms if label is None else self.component(label))

    def __repr__(self):
        return f"ProbabilityFunctional({len(self.terms)} parameters)"


class _Contribution(typing.NamedTuple):
    noise: int  # basis index of the noise error on the noisy coordinates
    outcome: PauliOperator  # the error the state carries at measurement time, phase 0
    coefficient: complex


@functools.lru_cache(maxsize=None)
def _action(code: StabilizerCode, normalizer_element: PauliOperator) -> LogicalAction:
    return logical_action(normalizer_element, code)


def pauli_factors(e_j: PauliOperator, e_side: PauliOperator) -> typing.Tuple[PauliOperator, int]:
    """Partner and exponent q with i^q e_j = e_side * partner, partner phase 0."""
    partner = multiply(e_side, e_j).stripped()
    reached = multiply(e_side, partner)
    return partner, (reached.phase_exp - e_j.phase_exp) % 4


def _toggle_factor(code: StabilizerCode, error: PauliOperator,
                   signs: typing.Optional[typing.Dict[Syndrome, int]]) -> complex:
    if not signs:
        return 1
    sign = signs.get(syndrome_of(error, code), 0)
    return cmath.exp(1j * sign * math.pi / 4)


def _contributions(cls: AmbiguousClass, syndrome: Syndrome, pre: Preprocessing,
                   signs: typing.Optional[typing.Dict[Syndrome, int]]) -> typing.List[_Contribution]:
    code = cls.code
    coords = noise_coordinates(cls)
    out = []

    def add(noise: PauliOperator, outcome: PauliOperator, coefficient: complex):
        if noise not in cls:
            return
        index = basis_index(restrict(noise, coords))
        out.append(_Contribution(index, outcome, coefficient * _toggle_factor(code, noise, signs)))

    for outcome in cls.sets.get(syndrome, []):
        if pre.direct:
            add(outcome, outcome, 1)
            continue
        e_a, e_b = (embed(e, coords, code.n) for e in (pre.e_a, pre.e_b))
        omega = 1 if not commutes(e_a, e_b) else 1j
        alpha, g_a = pauli_factors(outcome, e_a)
        beta, g_b = pauli_factors(outcome, e_b)
        add(alpha, outcome, exponent_to_coeff(g_a) / math.sqrt(2))
        add(beta, outcome, omega * exponent_to_coeff(g_b) / math.sqrt(2))
    return out


def _functional(cls: AmbiguousClass, contributions: typing.List[_Contribution]) -> ProbabilityFunctional:
    code = cls.code
    terms: typing.Dict[Parameter, typing.Dict[str, float]] = {}

    def accumulate(param: Parameter, label: str, value: float):
        weights = terms.setdefault(param, {})
        weights[label] = weights.get(label, 0.) + value

    for i, first in enumerate(contributions):
        for second in contributions[i:]:
            product = multiply(second.outcome, first.outcome)
            action = _action(code, product.stripped())
            weight = (second.coefficient.conjugate() * first.coefficient
                      * exponent_to_coeff(product.phase_exp + action.phase_exp))
            label = action.logical.letters
            u, v = first.noise, second.noise
            if u == v:
                scale = 1. if first is second else 2.
                accumulate(Parameter("diag", u, u), label, scale * weight.real)
            elif u < v:
                accumulate(Parameter("re", u, v), label, 2 * weight.real)
                accumulate(Parameter("im", u, v), label, -2 * weight.imag)
            else:
                accumulate(Parameter("re", v, u), label, 2 * weight.real)
                accumulate(Parameter("im", v, u), label, 2 * weight.imag)
    return ProbabilityFunctional(terms, code.k)


def _as_syndrome(syndrome: typing.Union[Syndrome, str]) -> Syndrome:
    return Syndrome.from_label(syndrome) if isinstance(syndrome, str) else syndrome


def direct_functional(cls: AmbiguousClass, syndrome: typing.Union[Syndrome, str]) -> ProbabilityFunctional:
    """Probability of one syndrome with no preprocessing, symbolic in chi and the logical expectations."""
    return _functional(cls, _contributions(cls, _as_syndrome(syndrome), Preprocessing(), None))


def preprocessed_functional(cls: AmbiguousClass, preprocessing: Preprocessing,
                            syndrome: typing.Union[Syndrome, str],
                            signs: typing.Optional[typing.Dict[Syndrome, int]] = None) -> ProbabilityFunctional:
    if preprocessing.toggled and signs is None:
        raise SimulationError("toggled preprocessing needs resolved sign assignments")
    return _functional(cls, _contributions(cls, _as_syndrome(syndrome), preprocessing, signs))


def functional(config: Configuration, syndrome: typing.Union[Syndrome, str]) -> ProbabilityFunctional:
    if config.preprocessing.direct:
        return direct_functional(config.ambiguous_class, syndrome)
    return preprocessed_functional(config.ambiguous_class, config.preprocessing, syndrome, config.signs)


def build_U(e_a: PauliOperator, e_b: PauliOperator) -> torch.Tensor:
    """(E_a + E_b)/sqrt(2) for anticommuting errors, (E_a + i E_b)/sqrt(2) for commuting ones."""
    if e_a.stripped() == e_b.stripped():
        raise SimulationError(f"U needs two distinct errors, got {format_sparse(e_a)} twice")
    omega = 1 if not commutes(e_a, e_b) else 1j
    return (to_matrix(e_a) + omega * to_matrix(e_b)) / math.sqrt(2)


def build_toggler(code: StabilizerCode, signs: typing.Dict[Syndrome, int]) -> torch.Tensor:
    """exp(+-i pi/4) on each signed erroneous subspace, identity on the rest."""
    _check_balanced(signs)
    dim = 2 ** code.n
    toggler = torch.eye(dim, dtype=torch.complex128)
    for syndrome, sign in signs.items():
        projector = syndrome_projector(code, syndrome)
        toggler = toggler + (cmath.exp(1j * sign * math.pi / 4) - 1) * projector
    return toggler


def auto_toggle_signs(cls: AmbiguousClass, e_p: PauliOperator, e_q: PauliOperator) -> typing.Dict[Syndrome, int]:
    """
    Character of the first Pauli b (basis order) whose commutation is constant on every ambiguous set and
    which anticommutes with e_p e_q; a set is '+' iff its errors commute with b.
    """
    code = cls.code
    if cls.errors.coords is not None:
        candidates = [embed(p, cls.errors.coords, code.n) for p in all_paulis(len(cls.errors.coords))]
    else:
        candidates = all_paulis(code.n)
    target = multiply(e_p, e_q)
    for b in candidates:
        if commutes(b, target):
            continue
        signs = {}
        for syndrome, members in cls.sets.items():
            values = {1 if commutes(b, e) else -1 for e in members}
            if len(values) != 1:
                break
            signs[syndrome] = values.pop()
        else:
            _check_balanced(signs)
            return signs
    raise SimulationError(f"no toggler separates {format_sparse(e_p)} from {format_sparse(e_q)}")


def preprocessing_operator(config: Configuration) -> torch.Tensor:
    dim = 2 ** config.code.n
    operator = torch.eye(dim, dtype=torch.complex128)
    pre = config.preprocessing
    if pre.direct:
        return operator
    if config.signs:
        operator = build_toggler(config.code, config.signs)
    return build_U(config.embed(pre.e_a), config.embed(pre.e_b)) @ operator


def noisy_state(config: Configuration, chi: ProcessMatrix) -> torch.Tensor:
    state = encode(config.amplitudes, config.code)
    return apply(chi, torch.outer(state, state.conj()), config.coords)


def syndrome_distribution(config: Configuration, chi: ProcessMatrix,
                          rho: typing.Optional[torch.Tensor] = None) -> typing.Dict[Syndrome, float]:
    """Dense oracle: Tr(V rho' V^dagger Q_x) for each ambiguous set's syndrome x, with V = U T."""
    allowed = {basis_index(restrict(e, config.coords)) for e in config.errors}
    outside = [i for i in chi.support() if i not in allowed]
    if outside:
        print(f"Warning: chi has support on {len(outside)} errors outside the allowed set of "
              f"{config.code.name}; probabilities will not sum to one")
    if rho is None:
        rho = noisy_state(config, chi)
    operator = preprocessing_operator(config)
    evolved = operator @ rho @ operator.conj().T
    return {syndrome: torch.trace(evolved @ syndrome_projector(config.code, syndrome)).real.item()
            for syndrome in config.ambiguous_class.sets}


def separate_logical_terms(states: typing.Sequence[typing.Union[str, torch.Tensor]],
                           probabilities: typing.Sequence[float], k: int = 1) -> typing.Dict[str, float]:
    """Solves p(state) = sum over L of coefficient_L <L>_state for the identity term C and each logical weight."""
    labels = [p.letters for p in all_paulis(k)]
    rows = []
    for state in states:
        amplitudes = named_state(state, k) if isinstance(state, str) else state
        expectations = expectation_map(amplitudes, k)
        rows.append([expectations[label] for label in labels])
    matrix = torch.tensor(rows, dtype=torch.float64)
    if len(states) < len(labels) or torch.linalg.matrix_rank(matrix).item() < len(labels):
        raise SimulationError(f"the {len(states)} input states do not separate all {len(labels)} logical terms")
    observed = torch.tensor(list(probabilities), dtype=torch.float64)
    solution = torch.linalg.lstsq(matrix, observed[:, None]).solution.flatten()
    return dict(zip(labels, solution.tolist()))
