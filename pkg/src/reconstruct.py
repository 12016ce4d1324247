import functools
import json
import math
import pathlib
import typing

import torch
import yaml

from src.channel import ChannelError, Parameter, ProcessMatrix
from src.codes import IDS, CatalogEntry, load_entry
from src.pauli import all_paulis, format_sparse
from src.simulate import (Configuration, ProbabilityFunctional, expectation_map, functional, input_schedule,
                          named_state, noisy_state, syndrome_distribution)
from src.utils import format_number, format_table

RANK_TOLERANCE = 1e-9
RESOLUTION_TOLERANCE = 1e-8
DEFAULT_THETA = math.pi / 8

ObservationKey = typing.Tuple[int, str, str]  # (plan entry index, input state, syndrome label)


class PlanError(ValueError):
    pass


class MeasurementEntry(typing.NamedTuple):
    code: str
    inputs: typing.Tuple[str, ...]
    preprocessing: str = "none"
    stage: str = "diagonal"
    coords: typing.Optional[typing.Tuple[int, ...]] = None

    def describe(self) -> str:
        return f"{self.code} {self.preprocessing}"


class MeasurementPlan(typing.NamedTuple):
    entries: typing.List[MeasurementEntry]
    targets: typing.List[Parameter]
    m: int
    unreachable: typing.List[typing.Tuple[int, int]] = []
    closed: bool = False  # parameters outside the targets are known to vanish

    def __add__(self, other: 'MeasurementPlan') -> 'MeasurementPlan':
        if self.m != other.m:
            raise PlanError(f"cannot merge plans over {self.m} and {other.m} noisy qubits")
        targets = list(dict.fromkeys(self.targets + other.targets))
        return MeasurementPlan(self.entries + other.entries, targets, self.m, self.unreachable + other.unreachable,
                               self.closed and other.closed)


class LinearSystem(typing.NamedTuple):
    matrix: torch.Tensor  # rows are observations, columns are real chi parameters
    observations: torch.Tensor
    columns: typing.List[Parameter]
    rows: typing.List[str]


class ReconstructionReport(typing.NamedTuple):
    values: typing.Dict[Parameter, float]
    resolved: typing.List[Parameter]
    unresolved: typing.List[Parameter]
    residual: float
    rank: int
    chi_estimate: typing.Optional[ProcessMatrix]
    reference_error: typing.Optional[float] = None


class ResourceEstimate(typing.NamedTuple):
    preparations: int
    configurations: int  # order-of-magnitude figure gamma * 4^m
    inputs_per_configuration: int


_REGISTERED: typing.Dict[str, CatalogEntry] = {}  # keyed by resolved path for code files


def _register(catalog: CatalogEntry) -> str:
    if catalog.id in IDS and catalog.source is None:
        return catalog.id
    key = catalog.source or catalog.id
    _REGISTERED[key] = catalog
    return key


def _entry(entry: MeasurementEntry) -> CatalogEntry:
    if entry.code in _REGISTERED:
        return _REGISTERED[entry.code]._replace(noisy_coords=entry.coords)
    return load_entry(entry.code, entry.coords)


@functools.lru_cache(maxsize=None)
def _configuration(entry: MeasurementEntry, state: str) -> Configuration:
    catalog = _entry(entry)
    return Configuration(catalog.code, catalog.noisy_coords, state, entry.preprocessing)


@functools.lru_cache(maxsize=None)
def _functional(entry: MeasurementEntry, syndrome: str) -> ProbabilityFunctional:
    return functional(_configuration(entry, entry.inputs[0]), syndrome)


def _syndromes(entry: MeasurementEntry) -> typing.List[str]:
    return [s.label for s in _configuration(entry, entry.inputs[0]).ambiguous_class.sets]


def _noisy_count(entries: typing.Sequence[typing.Union[str, CatalogEntry]]) -> typing.Tuple[
        typing.List[CatalogEntry], int]:
    catalog = [load_entry(e) if isinstance(e, str) else e for e in entries]
    if not catalog:
        raise PlanError("a plan needs at least one code")
    counts = {len(e.noisy_coords) for e in catalog}
    if len(counts) != 1:
        raise PlanError(f"codes disagree on the number of noisy qubits: {sorted(counts)}")
    return catalog, counts.pop()


def _as_measurement(catalog: CatalogEntry, inputs: typing.Sequence[str], preprocessing: str,
                    stage: str) -> MeasurementEntry:
    return MeasurementEntry(_register(catalog), tuple(inputs), preprocessing, stage, catalog.noisy_coords)


def _rows_for(entry: MeasurementEntry) -> typing.List[typing.Tuple[str, str, typing.Dict[Parameter, float]]]:
    out = []
    k = _entry(entry).code.k
    for state in entry.inputs:
        expectations = expectation_map(named_state(state, k), k)
        for syndrome in _syndromes(entry):
            out.append((state, syndrome, _functional(entry, syndrome).row(expectations)))
    return out


def plan_diagonal(entries: typing.Sequence[typing.Union[str, CatalogEntry]], theta: float = DEFAULT_THETA,
                  strict: bool = False, closed: bool = False) -> MeasurementPlan:
    """
    Direct syndrome measurements, one per code, with the first schedule input on which every logical
    weight of the direct functionals vanishes; codes without such an input use the whole schedule.
    """
    catalog, m = _noisy_count(entries)
    plan = []
    for item in catalog:
        schedule = input_schedule(item.code.k, theta)
        first = _as_measurement(item, schedule[:1], "none", "diagonal")
        labels = set()
        for syndrome in _syndromes(first):
            for weights in _functional(first, syndrome).terms.values():
                labels.update(label for label in weights if set(label) != {"I"})
        chosen = None
        for state in schedule:
            expectations = expectation_map(named_state(state, item.code.k), item.code.k)
            if all(abs(expectations[label]) < 1e-12 for label in labels):
                chosen = (state,)
                break
        if chosen is None:
            if strict:
                raise PlanError(f"no input of {item.id} hides every logical cross term")
            chosen = tuple(schedule)
        plan.append(_as_measurement(item, chosen, "none", "diagonal"))
    targets = [Parameter("diag", j, j) for j in range(4 ** m)]
    rows = [row for entry in plan for _, _, row in _rows_for(entry)]
    matrix = torch.tensor([[row.get(p, 0.) for p in targets] for row in rows], dtype=torch.float64)
    rank = torch.linalg.matrix_rank(matrix, rtol=RANK_TOLERANCE).item()
    if rank < len(targets):
        codes = ", ".join(e.id for e in catalog)
        message = f"direct measurements on {codes} fix only {rank} of {len(targets)} diagonals"
        if strict:
            raise PlanError(message)
        print(f"Warning: {message}")
    return MeasurementPlan(plan, targets, m, [], closed)


def plan_offdiagonal(entries: typing.Sequence[typing.Union[str, CatalogEntry]],
                     pairs: typing.Sequence[typing.Tuple[int, int]], theta: float = DEFAULT_THETA,
                     closed: bool = False) -> MeasurementPlan:
    """U(E_p, E_q) with and without an automatic toggler on every code that separates the pair."""
    catalog, m = _noisy_count(entries)
    basis = all_paulis(m)
    plan, targets, unreachable = [], [], []
    for p, q in pairs:
        p, q = min(p, q), max(p, q)
        if p == q or not 0 <= p < 4 ** m or q >= 4 ** m:
            raise PlanError(f"({p}, {q}) is not an off-diagonal pair of a {4 ** m}x{4 ** m} chi")
        spec = f"U:{format_sparse(basis[p])},{format_sparse(basis[q])}"
        reached = False
        for item in catalog:
            config = _configuration(_as_measurement(item, ("0L",), "none", "diagonal"), "0L")
            if config.ambiguous_class.ambiguous(config.embed(basis[p]), config.embed(basis[q])):
                continue
            reached = True
            schedule = tuple(input_schedule(item.code.k, theta))
            plan.append(_as_measurement(item, schedule, spec, "offdiagonal"))
            plan.append(_as_measurement(item, schedule, f"T:auto;{spec}", "offdiagonal"))
        if reached:
            targets.extend([Parameter("re", p, q), Parameter("im", p, q)])
        else:
            print(f"Warning: ({format_sparse(basis[p])}, {format_sparse(basis[q])}) is ambiguous in every code")
            unreachable.append((p, q))
    return MeasurementPlan(plan, targets, m, unreachable, closed)


def plan_family(entries: typing.Sequence[typing.Union[str, CatalogEntry]],
                pairs: typing.Sequence[typing.Tuple[int, int]] = (), theta: float = DEFAULT_THETA,
                strict: bool = False, closed: bool = False) -> MeasurementPlan:
    """Diagonal stage plus the off-diagonal pairs; closed plans take every other parameter as zero."""
    plan = plan_diagonal(entries, theta, strict, closed)
    if pairs:
        plan = plan + plan_offdiagonal(entries, pairs, theta, closed)
    return plan


def load_plan(path: typing.Union[str, pathlib.Path], theta: float = DEFAULT_THETA) -> MeasurementPlan:
    """
    YAML plan: m, optional theta, optional targets (parameter labels or "diagonal"), optional closed (every
    parameter outside the targets is known to vanish), and entries with code, optional coords, inputs (list of
    state names or "schedule"), preprocessing and stage.
    """
    with open(path) as f:
        content = yaml.safe_load(f)
    if not isinstance(content, dict) or "entries" not in content:
        raise PlanError(f"{path}: a plan needs 'entries'")
    m = int(content.get("m", 2))
    theta = float(content.get("theta", theta))
    entries = []
    for index, raw in enumerate(content["entries"]):
        if "code" not in raw:
            raise PlanError(f"{path}: entry {index} has no code")
        coords = tuple(raw["coords"]) if "coords" in raw else None
        catalog = load_entry(str(raw["code"]), coords)
        if len(catalog.noisy_coords) != m:
            raise PlanError(f"{path}: entry {index} has {len(catalog.noisy_coords)} noisy qubits, the plan {m}")
        inputs = raw.get("inputs", ["0L"])
        if inputs == "schedule":
            inputs = input_schedule(catalog.code.k, theta)
        preprocessing = str(raw.get("preprocessing", "none"))
        stage = raw.get("stage", "diagonal" if preprocessing == "none" else "offdiagonal")
        if stage not in ("diagonal", "offdiagonal"):
            raise PlanError(f"{path}: entry {index} has unknown stage '{stage}'")
        entries.append(MeasurementEntry(_register(catalog), tuple(inputs), preprocessing, stage, catalog.noisy_coords))
    targets = _targets(content.get("targets"), entries, m)
    for entry in entries:
        _configuration(entry, entry.inputs[0])
    return MeasurementPlan(entries, targets, m, [], bool(content.get("closed", False)))


def _targets(raw: typing.Optional[typing.List[str]], entries: typing.List[MeasurementEntry],
             m: int) -> typing.List[Parameter]:
    if raw is None:
        targets = [Parameter("diag", j, j) for j in range(4 ** m)]
        for entry in entries:
            pre = _configuration(entry, entry.inputs[0]).preprocessing
            if not pre.direct:
                targets.extend([Parameter.make("re", pre.e_a, pre.e_b, m), Parameter.make("im", pre.e_a, pre.e_b, m)])
        return list(dict.fromkeys(targets))
    targets = []
    for label in raw:
        if label == "diagonal":
            targets.extend(Parameter("diag", j, j) for j in range(4 ** m))
            continue
        try:
            targets.append(Parameter.parse(label, m))
        except ChannelError as exc:
            raise PlanError(str(exc)) from exc
    return list(dict.fromkeys(targets))


def collect(plan: MeasurementPlan, chi: ProcessMatrix, verbose: bool = False) -> typing.Dict[ObservationKey, float]:
    """Exact probabilities for every plan entry, input and syndrome from the dense simulator."""
    if chi.m != plan.m:
        raise PlanError(f"chi acts on {chi.m} qubits, the plan on {plan.m}")
    states = {}
    out = {}
    width = len(str(len(plan.entries)))
    for index, entry in enumerate(plan.entries):
        for state in entry.inputs:
            config = _configuration(entry, state)
            key = (entry.code, entry.coords, state)
            if key not in states:
                states[key] = noisy_state(config, chi)
            for syndrome, probability in syndrome_distribution(config, chi, states[key]).items():
                out[(index, state, syndrome.label)] = probability
        if verbose:
            print(f"[{index + 1:{width}d}/{len(plan.entries)}] {entry.describe()} | "
                  f"rows: {len(entry.inputs) * len(_syndromes(entry))}")
    return out


def load_observations(path: typing.Union[str, pathlib.Path]) -> typing.Dict[ObservationKey, float]:
    """Measured probabilities as a list of {entry, input, syndrome, probability} records (YAML or JSON)."""
    path = pathlib.Path(path)
    with open(path) as f:
        content = json.load(f) if path.suffix == ".json" else yaml.safe_load(f)
    records = content.get("observations", content) if isinstance(content, dict) else content
    if not isinstance(records, list):
        raise PlanError(f"{path}: expected a list of observation records")
    out = {}
    for record in records:
        try:
            out[(int(record["entry"]), str(record["input"]), str(record["syndrome"]))] = float(record["probability"])
        except (KeyError, TypeError, ValueError) as exc:
            raise PlanError(f"{path}: malformed observation record {record}") from exc
    return out


def assemble(plan: MeasurementPlan, probabilities: typing.Dict[ObservationKey, float],
             solved: typing.Optional[typing.Dict[Parameter, float]] = None,
             stage: typing.Optional[str] = None) -> LinearSystem:
    """
    One row per (entry, input, syndrome) of the selected stage. Solved values move to the observation side.
    Unsolved targets come first among the columns; every other parameter a row touches follows, unless the
    plan is closed and takes it as zero.
    """
    solved = solved or {}
    targets = set(plan.targets)
    extra = set()
    rows, observations, labels = [], [], []
    for index, entry in enumerate(plan.entries):
        if stage is not None and entry.stage != stage:
            continue
        for state, syndrome, row in _rows_for(entry):
            key = (index, state, syndrome)
            if key not in probabilities:
                raise PlanError(f"missing probability for entry {index} ({entry.describe()}), "
                                f"input {state}, syndrome {syndrome}")
            shift = sum(w * solved[p] for p, w in row.items() if p in solved)
            kept = {p: w for p, w in row.items() if p not in solved}
            if plan.closed:
                kept = {p: w for p, w in kept.items() if p in targets}
            extra.update(p for p in kept if p not in targets)
            rows.append(kept)
            observations.append(probabilities[key] - shift)
            labels.append(f"{index}:{state}:{syndrome}")
    columns = [p for p in plan.targets if p not in solved and any(p in row for row in rows)]
    columns.extend(sorted(extra, key=lambda p: (p.kind != "diag", p.row, p.col, p.kind)))
    matrix = torch.tensor([[row.get(p, 0.) for p in columns] for row in rows], dtype=torch.float64)
    return LinearSystem(matrix.reshape(len(rows), len(columns)), torch.tensor(observations, dtype=torch.float64),
                        columns, labels)


def solve(system: LinearSystem, rank_tolerance: float = RANK_TOLERANCE,
          resolution_tolerance: float = RESOLUTION_TOLERANCE) -> ReconstructionReport:
    """
    Minimum-norm least squares through a rank-revealing SVD; a parameter is resolved when its unit
    vector lies in the row space of the design matrix.
    """
    matrix, observations = system.matrix, system.observations
    if matrix.numel() == 0:
        return ReconstructionReport({}, [], list(system.columns), 0., 0, None)
    u, s, vh = torch.linalg.svd(matrix, full_matrices=False)
    rank = int((s > rank_tolerance * s[0]).sum().item()) if s[0] > 0 else 0
    u, s, vh = u[:, :rank], s[:rank], vh[:rank]
    solution = vh.T @ ((u.T @ observations) / s)
    projector = torch.diagonal(vh.T @ vh)
    is_resolved = 1 - projector < resolution_tolerance
    # rows touching only resolved columns
    settled = (matrix[:, ~is_resolved] == 0).all(dim=1)
    misfit = (matrix[settled] @ solution - observations[settled]).abs()
    residual = misfit.max().item() if misfit.numel() else 0.
    values, resolved, unresolved = {}, [], []
    for param, value, flag in zip(system.columns, solution.tolist(), is_resolved.tolist()):
        values[param] = value
        (resolved if flag else unresolved).append(param)
    return ReconstructionReport(values, resolved, unresolved, residual, rank, None)


def _finish(reports: typing.List[ReconstructionReport], plan: MeasurementPlan,
            reference: typing.Optional[ProcessMatrix] = None) -> ReconstructionReport:
    values, resolved, unresolved = {}, [], []
    targets = set(plan.targets)
    for report in reports:
        values.update((p, v) for p, v in report.values.items() if p in targets)
        resolved.extend(report.resolved)
    for param in plan.targets:
        if param not in resolved:
            unresolved.append(param)
            values.setdefault(param, 0.)
    resolved = [p for p in plan.targets if p in resolved]
    estimate = ProcessMatrix.from_parameters(plan.m, {p: values[p] for p in resolved})
    error = None
    if reference is not None and resolved:
        error = max(abs(values[p] - reference.parameter_value(p)) for p in resolved)
    if unresolved:
        print(f"Warning: {len(unresolved)} of {len(plan.targets)} target parameters are unresolved")
    return ReconstructionReport(values, resolved, unresolved, max((r.residual for r in reports), default=0.),
                                sum(r.rank for r in reports), estimate, error)


def solve_staged(plan: MeasurementPlan, probabilities: typing.Dict[ObservationKey, float],
                 reference: typing.Optional[ProcessMatrix] = None, rank_tolerance: float = RANK_TOLERANCE,
                 resolution_tolerance: float = RESOLUTION_TOLERANCE) -> ReconstructionReport:
    """Diagonal-stage rows first; their resolved values are substituted into the off-diagonal stage."""
    first = solve(assemble(plan, probabilities, stage="diagonal"), rank_tolerance, resolution_tolerance)
    solved = {p: first.values[p] for p in first.resolved}
    second = solve(assemble(plan, probabilities, solved, stage="offdiagonal"), rank_tolerance, resolution_tolerance)
    return _finish([first, second], plan, reference)


def solve_joint(plan: MeasurementPlan, probabilities: typing.Dict[ObservationKey, float],
                reference: typing.Optional[ProcessMatrix] = None, rank_tolerance: float = RANK_TOLERANCE,
                resolution_tolerance: float = RESOLUTION_TOLERANCE) -> ReconstructionReport:
    return _finish([solve(assemble(plan, probabilities), rank_tolerance, resolution_tolerance)], plan, reference)


def qascd_round_trip(entries: typing.Sequence[typing.Union[str, CatalogEntry]], chi_true: ProcessMatrix,
                     pairs: typing.Optional[typing.Sequence[typing.Tuple[int, int]]] = None,
                     theta: float = DEFAULT_THETA, verbose: bool = False) -> ReconstructionReport:
    """
    Simulates every planned configuration on chi_true, reconstructs, and records the largest resolved error.
    Without explicit pairs the plan targets the support of chi_true and is closed on it.
    """
    closed = pairs is None
    if closed:
        pairs = chi_true.off_diagonal_support(tolerance=1e-15)
    plan = plan_family(entries, pairs, theta, closed=closed)
    return solve_staged(plan, collect(plan, chi_true, verbose), chi_true)


def resource_estimate(m: int, gamma: int, k: int = 1) -> ResourceEstimate:
    if gamma < 1 or m < 1 or k < 1:
        raise PlanError(f"need gamma, m, k >= 1, got gamma={gamma}, m={m}, k={k}")
    return ResourceEstimate(gamma + 1, gamma * 4 ** m, 4 ** k)


def format_report(report: ReconstructionReport, m: int, structured: bool = False, digits: int = 6) -> str:
    params = list(report.resolved) + list(report.unresolved)
    params.sort(key=lambda p: (p.kind != "diag", p.row, p.col, p.kind))
    if structured:
        content = {"parameters": [{"label": p.label(m), "value": float(f"{report.values.get(p, 0.):.17g}"),
                                   "resolved": p in report.resolved} for p in params],
                   "residual": float(f"{report.residual:.17g}"), "rank": report.rank}
        if report.reference_error is not None:
            content["reference_error"] = float(f"{report.reference_error:.17g}")
        return yaml.safe_dump(content, sort_keys=False)
    resolved = set(report.resolved)
    rows = [["parameter", "value", "status"]]
    rows.extend([p.label(m), format_number(report.values.get(p, 0.), digits),
                 "resolved" if p in resolved else "unresolved"] for p in params)
    footer = f"residual: {format_number(report.residual, digits)}  rank: {report.rank}"
    if report.reference_error is not None:
        footer += f"  max error: {format_number(report.reference_error, digits)}"
    return format_table(rows) + footer + "\n"
