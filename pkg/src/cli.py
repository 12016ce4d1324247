import argparse
import sys
import typing

import yaml

from src.ambiguity import (ErrorSet, build_class, coarse_grain, degree_formula_check, format_class_table,
                           hamming_check, quotient_structure, verify_ambiguous_group)
from src.channel import ProcessMatrix, load_noise, project_toy_parameters, validate
from src.codes import load_entry
from src.dataclass import Context
from src.pauli import basis_index, format_sparse, parse
from src.reconstruct import (collect, format_report, load_observations, load_plan, plan_family, resource_estimate,
                             solve_joint, solve_staged)
from src.simulate import Configuration, syndrome_distribution
from src.stabilizer import format_normalizer_table, normalizer_classes
from src.utils import format_number, format_table


def _coords(text: str) -> typing.Tuple[int, ...]:
    try:
        return tuple(int(c) for c in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"coordinates must look like 1,2 not '{text}'")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML file overriding the default context")
    common.add_argument("--format", choices=("human", "structured"), help="fixed-width table or YAML")
    common.add_argument("--out", help="write the result here instead of stdout")
    common.add_argument("--verbose", action="store_true", help="progress line per plan entry")

    parser = argparse.ArgumentParser(prog="main.py", description="ambiguous stabilizer codes and noise "
                                                                 "characterization from syndrome statistics")
    commands = parser.add_subparsers(dest="command", required=True)

    analyze = commands.add_parser("analyze", parents=[common], help="ambiguous class, group and Hamming report")
    analyze.add_argument("--code", required=True, help="catalog id (q3, q5, C1, C2, C3) or code file")
    errors = analyze.add_mutually_exclusive_group()
    errors.add_argument("--coords", type=_coords, help="noisy coordinates, all of P_m on them")
    errors.add_argument("--weight", type=int, help="every Pauli up to this weight")
    analyze.add_argument("--drop", type=_coords, default=(), help="1-based generators left unmeasured")

    normalizer = commands.add_parser("normalizer", parents=[common], help="normalizer grouped by logical class")
    normalizer.add_argument("--code", required=True)

    simulate = commands.add_parser("simulate", parents=[common], help="syndrome probabilities under noise")
    simulate.add_argument("--code", help="catalog id or code file")
    simulate.add_argument("--coords", type=_coords)
    simulate.add_argument("--noise", default="identity", help="identity, EA, depolarizing(p), random(seed) or file")
    simulate.add_argument("--state", default="0L", help="0L, 1L, +L, -L, upL, downL or theta:<value>")
    simulate.add_argument("--pre", default="none", help="none, U:Ea,Eb or T:auto;U:Ea,Eb")
    simulate.add_argument("--plan", help="measurement plan file; overrides --code/--state/--pre")

    reconstruct = commands.add_parser("reconstruct", parents=[common], help="chi from syndrome statistics")
    reconstruct.add_argument("--code", help="comma-separated code family, defaults to protocol.codes")
    reconstruct.add_argument("--noise", default="EA")
    reconstruct.add_argument("--plan", help="measurement plan file instead of the automatic planner")
    reconstruct.add_argument("--pairs", default="auto",
                             help="off-diagonal targets 'I,X1X2;X2,X1', 'none' or 'auto' (noise support)")
    reconstruct.add_argument("--observed", help="measured probabilities for the entries of --plan")
    reconstruct.add_argument("--joint", action="store_true", help="solve all stages as one system")

    resources = commands.add_parser("resources", parents=[common], help="preparation and configuration counts")
    resources.add_argument("--m", type=int, required=True)
    resources.add_argument("--gamma", type=int, required=True)
    resources.add_argument("--k", type=int, default=1)
    return parser


def _structured(ctx: Context) -> bool:
    return ctx.output.format == "structured"


def _number(ctx: Context, value: float) -> typing.Union[str, float]:
    if _structured(ctx):
        return float(f"{value:.{ctx.log.structured_digits}g}")
    return format_number(value, ctx.log.human_digits)


def _dump(content: typing.Dict[str, typing.Any]) -> str:
    return yaml.safe_dump(content, sort_keys=False)


def _noise(ctx: Context, spec: str, m: int) -> ProcessMatrix:
    chi = load_noise(spec, m, project_toy_parameters(**ctx.toy_noise.parameters()))
    report = validate(chi, ctx.numerics.hermitian_tolerance, ctx.numerics.psd_tolerance)
    if not report.trace_preserving:
        print(f"Warning: noise '{spec}' is not trace preserving, probabilities will not sum to one")
    return chi


def cmd_analyze(ctx: Context, args: argparse.Namespace) -> str:
    entry = load_entry(args.code, args.coords)
    code = entry.code
    if args.weight is not None:
        errors = ErrorSet.up_to_weight(code.n, args.weight)
    else:
        errors = ErrorSet.on_coordinates(code.n, entry.noisy_coords)
    cls = coarse_grain(build_class(code, errors), [i - 1 for i in args.drop])
    hamming = hamming_check(code.n, code.k, len(errors))
    content = {"code": cls.code.name, "n": code.n, "k": code.k, "errors": len(errors),
               "sigma": cls.order_sigma, "gamma": cls.degree_gamma,
               "sets": {s.label: [format_sparse(e) for e in members] for s, members in cls.sets.items()},
               "hamming": {"satisfied": hamming.satisfied, "perfect": hamming.perfect}}
    if errors.coords is not None and not args.drop:
        check = verify_ambiguous_group(code, errors.coords)
        content["coordinates"] = list(errors.coords)
        content["group"] = [format_sparse(b) for b in check.group]
        content["group_ok"] = check.ok
        if check.ok:
            cosets = quotient_structure(code, errors.coords)
            content["cosets"] = {c.syndrome.label: format_sparse(c.representative) for c in cosets}
            content["cosets_equal_size"] = len({len(c.elements) for c in cosets}) == 1
        if 2 * errors.m >= code.n - code.k:
            content["degree_formula"] = degree_formula_check(code.n, code.k, errors.m)
    if _structured(ctx):
        return _dump(content)
    lines = [f"code: {content['code']} [[{code.n},{code.k}]]", f"errors: {len(errors)}",
             f"sigma: {cls.order_sigma}", f"gamma: {cls.degree_gamma}"]
    if "group" in content:
        state = "ok" if check.ok else "not a normal subgroup"
        lines.append(f"ambiguous group: {', '.join(content['group'])} ({state})")
    if "cosets" in content:
        size = "equal size" if content["cosets_equal_size"] else "unequal sizes"
        lines.append(f"cosets: {', '.join(f'{s}:{r}' for s, r in content['cosets'].items())} ({size})")
    if "degree_formula" in content:
        lines.append(f"degree formula: {content['degree_formula']}")
    lines.append(f"hamming bound: {'satisfied' if hamming.satisfied else 'violated'}"
                 f"{', perfect' if hamming.perfect else ''}")
    return format_class_table(cls) + "\n" + "\n".join(lines) + "\n"


def cmd_normalizer(ctx: Context, args: argparse.Namespace) -> str:
    code = load_entry(args.code).code
    if not _structured(ctx):
        return format_normalizer_table(code)
    signs = {0: "+", 1: "+i", 2: "-", 3: "-i"}
    return _dump({f"{letters}_L": [f"{signs[phase]}{element.letters}" for element, phase in members]
                  for letters, members in normalizer_classes(code).items()})


def cmd_simulate(ctx: Context, args: argparse.Namespace) -> str:
    if args.plan is not None:
        plan = load_plan(args.plan, ctx.protocol.theta)
        probabilities = collect(plan, _noise(ctx, args.noise, plan.m), ctx.log.verbose)
        records = [[str(index), state, syndrome, _number(ctx, p)] for (index, state, syndrome), p in
                   probabilities.items()]
        if _structured(ctx):
            return _dump({"observations": [dict(zip(("entry", "input", "syndrome", "probability"),
                                                    [int(r[0])] + r[1:])) for r in records]})
        return format_table([["entry", "input", "syndrome", "probability"]] + records)
    if args.code is None:
        raise ValueError("simulate needs --code or --plan")
    entry = load_entry(args.code, args.coords)
    config = Configuration(entry.code, entry.noisy_coords, args.state, args.pre)
    distribution = syndrome_distribution(config, _noise(ctx, args.noise, len(entry.noisy_coords)))
    if _structured(ctx):
        return _dump({"code": entry.id, "state": args.state, "preprocessing": config.preprocessing.format(),
                      "probabilities": {s.label: _number(ctx, p) for s, p in distribution.items()}})
    rows = [["syndrome", "probability"]] + [[s.label, _number(ctx, p)] for s, p in distribution.items()]
    rows.append(["total", _number(ctx, sum(distribution.values()))])
    return format_table(rows)


def _pairs(text: str, chi: typing.Optional[ProcessMatrix], m: int) -> typing.List[typing.Tuple[int, int]]:
    if text == "none":
        return []
    if text == "auto":
        if chi is None:
            raise ValueError("--pairs auto needs a noise model, name the pairs explicitly")
        return chi.off_diagonal_support(tolerance=1e-15)
    pairs = []
    for item in text.split(";"):
        parts = item.split(",")
        if len(parts) != 2:
            raise ValueError(f"pair '{item}' must look like I,X1X2")
        pairs.append(tuple(basis_index(parse(p.strip(), n=m)) for p in parts))
    return pairs


def cmd_reconstruct(ctx: Context, args: argparse.Namespace) -> str:
    codes = args.code.split(",") if args.code else list(ctx.protocol.codes)
    if args.observed is not None and args.plan is None:
        raise ValueError("--observed needs the --plan its entries refer to")
    plan = None if args.plan is None else load_plan(args.plan, ctx.protocol.theta)
    m = len(load_entry(codes[0]).noisy_coords) if plan is None else plan.m
    chi = None if args.observed is not None else _noise(ctx, args.noise, m)
    if plan is None:
        plan = plan_family(codes, _pairs(args.pairs, chi, m), ctx.protocol.theta, closed=args.pairs == "auto")
    if chi is None:
        probabilities = load_observations(args.observed)
    else:
        probabilities = collect(plan, chi, ctx.log.verbose)
    solver = solve_joint if args.joint else solve_staged
    report = solver(plan, probabilities, chi, ctx.numerics.rank_tolerance, ctx.numerics.resolution_tolerance)
    digits = ctx.log.structured_digits if _structured(ctx) else ctx.log.human_digits
    return format_report(report, plan.m, _structured(ctx), digits)


def cmd_resources(ctx: Context, args: argparse.Namespace) -> str:
    estimate = resource_estimate(args.m, args.gamma, args.k)
    if _structured(ctx):
        return _dump(estimate._asdict())
    return (f"preparations: {estimate.preparations}\n"
            f"configurations (estimate, order gamma*4^m): {estimate.configurations}\n"
            f"inputs per configuration: {estimate.inputs_per_configuration}\n")


def main(argv: typing.Optional[typing.Sequence[str]] = None, ctx: typing.Optional[Context] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler = {"analyze": cmd_analyze, "normalizer": cmd_normalizer, "simulate": cmd_simulate,
               "reconstruct": cmd_reconstruct, "resources": cmd_resources}[args.command]
    try:
        if ctx is None or args.config is not None:
            ctx = Context(path=args.config) if args.config is not None else Context()
        if args.format is not None:
            ctx.output.format = args.format
        if args.verbose:
            ctx.log.verbose = True
        if args.out is not None:
            ctx.output.path = args.out
        text = handler(ctx, args)
        if ctx.output.path is not None:
            with open(ctx.output.path, "w") as f:
                f.write(text)
        else:
            sys.stdout.write(text)
    except (ValueError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0
