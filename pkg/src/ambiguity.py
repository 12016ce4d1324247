import itertools
import typing

from src.pauli import (PauliOperator, all_paulis, commutes, embed, format_pauli, format_sparse, identity, multiply,
                       sort_key)
from src.stabilizer import LogicalAction, StabilizerCode, Syndrome, logical_action, syndrome_of
from src.utils import format_table


class AmbiguityError(ValueError):
    pass


def _coordinates(coords: typing.Union[int, typing.Sequence[int]]) -> typing.Tuple[int, ...]:
    if isinstance(coords, int):
        return tuple(range(1, coords + 1))
    return tuple(coords)


class ErrorSet:
    """Allowed errors as phase-0 representatives on n qubits."""

    def __init__(self, n: int, elements: typing.Iterable[PauliOperator],
                 coords: typing.Optional[typing.Sequence[int]] = None):
        elements = [e.stripped() for e in elements]
        if any(e.n != n for e in elements):
            raise AmbiguityError(f"allowed errors must all act on {n} qubits")
        if len(set(elements)) != len(elements):
            raise AmbiguityError("allowed errors contain duplicates")
        self.n = n
        self.elements = tuple(elements)
        self.coords = None if coords is None else tuple(coords)

    @classmethod
    def on_coordinates(cls, n: int, coords: typing.Union[int, typing.Sequence[int]]) -> 'ErrorSet':
        """All of P_m on the given coordinates, identity elsewhere, in basis order of P_m."""
        coords = _coordinates(coords)
        if not coords or len(set(coords)) != len(coords) or any(not 1 <= c <= n for c in coords):
            raise AmbiguityError(f"coordinates {list(coords)} must be distinct and within 1..{n}")
        return cls(n, [embed(p, coords, n) for p in all_paulis(len(coords))], coords)

    @classmethod
    def up_to_weight(cls, n: int, weight: int) -> 'ErrorSet':
        return cls(n, sorted((p for p in all_paulis(n) if p.weight <= weight), key=sort_key))

    @property
    def m(self) -> int:
        return len(self.coords) if self.coords is not None else self.n

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


class AmbiguousClass:
    def __init__(self, code: StabilizerCode, sets: typing.Dict[Syndrome, typing.List[PauliOperator]],
                 errors: ErrorSet):
        self.code = code
        self.errors = errors
        self.sets = {s: list(sets[s]) for s in sorted(sets, key=lambda s: s.label)}
        self._lookup = {e: s for s, members in self.sets.items() for e in members}

    @property
    def order_sigma(self) -> int:
        return sum(1 for members in self.sets.values() if members)

    @property
    def degree_gamma(self) -> int:
        return max(len(members) for members in self.sets.values())

    def set_of(self, error: PauliOperator) -> Syndrome:
        key = error.stripped()
        if key not in self._lookup:
            raise AmbiguityError(f"{format_pauli(key)} is not an allowed error of this class")
        return self._lookup[key]

    def representative(self, syndrome: Syndrome) -> PauliOperator:
        return self.sets[syndrome][0]

    def __contains__(self, error: PauliOperator) -> bool:
        return error.stripped() in self._lookup

    def ambiguous(self, a: PauliOperator, b: PauliOperator) -> bool:
        return self.set_of(a) == self.set_of(b)

    def __repr__(self):
        return f"AmbiguousClass({self.code.name}, sigma={self.order_sigma}, gamma={self.degree_gamma})"


def build_class(code: StabilizerCode, errors: ErrorSet) -> AmbiguousClass:
    if errors.n != code.n:
        raise AmbiguityError(f"allowed errors act on {errors.n} qubits, code {code.name} on {code.n}")
    sets = {}
    for error in errors:
        sets.setdefault(syndrome_of(error, code), []).append(error)
    return AmbiguousClass(code, {s: sorted(m, key=sort_key) for s, m in sets.items()}, errors)


class AmbiguityLink(typing.NamedTuple):
    product: PauliOperator  # e1 * e2 with its phase
    reverse: PauliOperator  # e2 * e1
    action: LogicalAction  # action of the phase-0 representative of the product
    commuting: bool

    @property
    def hermitian_relation(self) -> bool:
        return self.reverse == self.product.dagger()


def ambiguity_normalizer(e1: PauliOperator, e2: PauliOperator, code: StabilizerCode) -> AmbiguityLink:
    product = multiply(e1, e2)
    offender = next((g for g in code.generators if not commutes(product, g)), None)
    if offender is not None:
        raise AmbiguityError(f"{format_pauli(e1)} and {format_pauli(e2)} are not ambiguous: "
                             f"their product anticommutes with {format_pauli(offender)}")
    return AmbiguityLink(product, multiply(e2, e1), logical_action(product.stripped(), code), commutes(e1, e2))


class GroupCheck(typing.NamedTuple):
    group: typing.List[PauliOperator]
    closure: bool
    identity: bool
    self_inverse: bool
    normal: bool

    @property
    def ok(self) -> bool:
        return self.closure and self.identity and self.self_inverse and self.normal


def verify_ambiguous_group(code: StabilizerCode, coords: typing.Union[int, typing.Sequence[int]]) -> GroupCheck:
    """
    Extracts the errors on the noisy coordinates that share the no-error syndrome and checks,
    modulo phase, that they form a normal subgroup of P_m.
    """
    errors = ErrorSet.on_coordinates(code.n, coords)
    trivial = Syndrome((1,) * len(code.generators))
    group = sorted((e for e in errors if syndrome_of(e, code) == trivial), key=sort_key)
    members = set(group)
    closure = all(multiply(a, b).stripped() in members for a, b in itertools.product(group, repeat=2))
    self_inverse = all(multiply(b, b).stripped() == identity(code.n) for b in group)
    normal = all(multiply(multiply(g, b), g.dagger()).stripped() in members
                 for g in errors for b in group)
    return GroupCheck(group, closure, identity(code.n) in members, self_inverse, normal)


class Coset(typing.NamedTuple):
    syndrome: Syndrome
    representative: PauliOperator
    elements: typing.List[PauliOperator]  # representative * b for b in the ambiguous group, group order


def quotient_structure(code: StabilizerCode, coords: typing.Union[int, typing.Sequence[int]]) -> typing.List[Coset]:
    check = verify_ambiguous_group(code, coords)
    if not check.ok:
        raise AmbiguityError(f"errors sharing the trivial syndrome of {code.name} do not form a group")
    cls = build_class(code, ErrorSet.on_coordinates(code.n, coords))
    cosets = []
    for syndrome, members in cls.sets.items():
        rep = members[0]
        elements = [multiply(rep, b).stripped() for b in check.group]
        if set(elements) != set(members):
            raise AmbiguityError(f"set {syndrome.label} is not the coset {format_pauli(rep)}B")
        cosets.append(Coset(syndrome, rep, elements))
    return cosets


class HammingReport(typing.NamedTuple):
    satisfied: bool
    perfect: bool


def hamming_check(n: int, k: int, error_count: int) -> HammingReport:
    lhs, rhs = 2 ** k * error_count, 2 ** n
    return HammingReport(lhs <= rhs, lhs == rhs)


def max_coordinates(n: int, k: int) -> int:
    """Largest number of fully covered noisy coordinates an unambiguous [[n,k]] code allows."""
    return (n - k) // 2


def coarse_grain(cls: AmbiguousClass, dropped: typing.Iterable[int]) -> AmbiguousClass:
    dropped = sorted(set(dropped))
    count = len(cls.code.generators)
    if any(not 0 <= i < count for i in dropped):
        raise AmbiguityError(f"generator indices {dropped} outside 0..{count - 1}")
    if not dropped:
        return cls
    if len(dropped) == count:
        raise AmbiguityError("cannot drop every syndrome measurement")
    kept = [g for i, g in enumerate(cls.code.generators) if i not in dropped]
    code = StabilizerCode(kept, name=f"{cls.code.name}-drop{','.join(str(i + 1) for i in dropped)}")
    return build_class(code, cls.errors)


def degree_formula_check(n: int, k: int, m: int) -> int:
    exponent = 2 * m - n + k
    if exponent < 0:
        raise AmbiguityError(f"2m >= n-k is required, got m={m} for [[{n},{k}]]")
    return 2 ** exponent


def format_class_table(cls: AmbiguousClass) -> str:
    """One column per syndrome, header row of syndrome signs, errors in X1Z2 notation."""
    columns = [[s.label] + [format_sparse(e) for e in members] for s, members in cls.sets.items()]
    depth = max(len(c) for c in columns)
    rows = [[c[i] if i < len(c) else "" for c in columns] for i in range(depth)]
    return format_table(rows)
