import pytest
import torch
import yaml

from src.channel import Parameter, ProcessMatrix, depolarizing, identity_channel
from src.codes import get
from src.reconstruct import (LinearSystem, PlanError, assemble, collect, format_report, load_observations, load_plan,
                             plan_diagonal, plan_family, plan_offdiagonal, qascd_round_trip, resource_estimate,
                             solve, solve_joint, solve_staged)
from src.stabilizer import dump_code
from tests.conftest import ROOT, TOY

FAMILY = ["C1", "C2", "C3"]
EA_PLAN = ROOT / "configs" / "plans" / "ea_toy.yaml"


def _system(rows, observations, size):
    columns = [Parameter("diag", j, j) for j in range(size)]
    return LinearSystem(torch.tensor(rows, dtype=torch.float64), torch.tensor(observations, dtype=torch.float64),
                        columns, [str(i) for i in range(len(rows))])


@pytest.mark.parametrize("m, gamma, preparations, configurations", [(2, 1, 2, 16), (2, 2, 3, 32), (2, 4, 5, 64)])
def test_resource_estimate(m, gamma, preparations, configurations):
    estimate = resource_estimate(m, gamma)
    assert (estimate.preparations, estimate.configurations, estimate.inputs_per_configuration) == (
        preparations, configurations, 4)


def test_resource_estimate_rejects():
    with pytest.raises(PlanError):
        resource_estimate(2, 0)
    with pytest.raises(PlanError):
        resource_estimate(0, 1)


def test_diagonal_plan_on_the_family(capsys):
    plan = plan_diagonal(FAMILY)
    assert [entry.inputs for entry in plan.entries] == [("0L",)] * 3
    assert [entry.code for entry in plan.entries] == FAMILY
    assert len(plan.targets) == 16 and plan.m == 2
    assert "Warning" not in capsys.readouterr().out


def test_diagonal_plan_on_one_code_falls_short(capsys):
    plan = plan_diagonal(["C1"])
    assert len(plan.entries) == 1
    assert "fix only 8 of 16" in capsys.readouterr().out
    with pytest.raises(PlanError):
        plan_diagonal(["C1"], strict=True)


def test_diagonal_plan_without_a_hiding_input():
    with pytest.raises(PlanError, match="hides every logical cross term"):
        plan_diagonal(["q3"], strict=True)
    plan = plan_diagonal(["q3"])
    assert len(plan.entries[0].inputs) == 4


def test_offdiagonal_plan():
    plan = plan_offdiagonal(FAMILY, [(5, 0)])
    assert len(plan.entries) == 6
    assert plan.targets == [Parameter("re", 0, 5), Parameter("im", 0, 5)]
    assert {entry.preprocessing for entry in plan.entries} == {"U:I,X1X2", "T:auto;U:I,X1X2"}
    assert all(entry.stage == "offdiagonal" and len(entry.inputs) == 4 for entry in plan.entries)


def test_offdiagonal_plan_reports_unreachable_pairs(capsys):
    plan = plan_offdiagonal(["C1"], [(0, 2)])
    assert plan.entries == [] and plan.targets == []
    assert plan.unreachable == [(0, 2)]
    assert "ambiguous in every code" in capsys.readouterr().out
    with pytest.raises(PlanError):
        plan_offdiagonal(["C1"], [(3, 3)])


def test_plans_need_matching_codes():
    with pytest.raises(PlanError):
        plan_diagonal([])
    first = plan_diagonal(FAMILY)
    with pytest.raises(PlanError):
        first + first._replace(m=3)


def test_toy_channel_round_trip(toy_chi):
    report = qascd_round_trip(FAMILY, toy_chi)
    assert report.unresolved == []
    assert len(report.resolved) == 22
    assert report.reference_error < 1e-9
    assert report.values[Parameter("re", 0, 5)] == pytest.approx(TOY["c"] / 6, abs=1e-9)
    assert report.values[Parameter("re", 1, 4)] == pytest.approx(TOY["a"] / 6, abs=1e-9)
    assert report.values[Parameter("im", 2, 7)] == pytest.approx(-TOY["f"] / 6, abs=1e-9)
    torch.testing.assert_close(report.chi_estimate.chi, toy_chi.chi, atol=1e-9, rtol=0)


def test_joint_and_staged_solves_agree(toy_chi):
    plan = plan_family(FAMILY, toy_chi.off_diagonal_support(1e-15), closed=True)
    probabilities = collect(plan, toy_chi)
    staged = solve_staged(plan, probabilities, toy_chi)
    joint = solve_joint(plan, probabilities, toy_chi)
    assert joint.unresolved == []
    for param in plan.targets:
        assert joint.values[param] == pytest.approx(staged.values[param], abs=1e-9)


def test_diagonal_round_trip():
    chi = depolarizing(2, 0.2)
    report = qascd_round_trip(FAMILY, chi)
    assert report.unresolved == []
    assert report.reference_error < 1e-10
    assert report.values[Parameter("diag", 0, 0)] == pytest.approx(0.8)


def test_identity_round_trip():
    report = qascd_round_trip(FAMILY, identity_channel(2))
    assert report.values[Parameter("diag", 0, 0)] == pytest.approx(1)
    assert report.reference_error < 1e-10


def test_coverage_grows_with_the_family(toy_chi):
    resolved = [len(qascd_round_trip(FAMILY[:size], toy_chi).resolved) for size in (1, 2, 3)]
    assert resolved[0] < 22
    assert resolved == sorted(resolved)
    assert resolved[-1] == 22


def test_single_code_leaves_parameters_unresolved(toy_chi, capsys):
    report = qascd_round_trip(["C1"], toy_chi)
    assert report.unresolved
    assert "unresolved" in capsys.readouterr().out


def test_assemble_needs_every_probability():
    plan = plan_diagonal(FAMILY)
    with pytest.raises(PlanError, match="missing probability"):
        assemble(plan, {})


def test_collect_checks_qubit_count():
    plan = plan_diagonal(FAMILY)
    with pytest.raises(PlanError):
        collect(plan, depolarizing(1, 0.1))


def test_solve_full_rank():
    report = solve(_system([[1., 0.], [0., 2.]], [1., 4.], 2))
    assert report.rank == 2 and report.unresolved == []
    assert [report.values[p] for p in report.resolved] == pytest.approx([1., 2.])
    assert report.residual == pytest.approx(0, abs=1e-12)


def test_solve_rank_deficient_gives_minimum_norm():
    report = solve(_system([[1., 1.], [2., 2.]], [2., 4.], 2))
    assert report.rank == 1 and report.resolved == []
    assert list(report.values.values()) == pytest.approx([1., 1.])


def test_solve_partially_resolved():
    report = solve(_system([[1., 0., 0.], [0., 1., 1.]], [3., 2.], 3))
    assert report.resolved == [Parameter("diag", 0, 0)]
    assert report.values[Parameter("diag", 0, 0)] == pytest.approx(3.)
    assert len(report.unresolved) == 2


def test_solve_empty_system():
    report = solve(LinearSystem(torch.zeros(0, 0, dtype=torch.float64), torch.zeros(0, dtype=torch.float64), [], []))
    assert report.values == {} and report.rank == 0


def test_load_plan_and_round_trip(toy_chi):
    plan = load_plan(EA_PLAN)
    assert len(plan.entries) == 9
    assert len(plan.targets) == 22
    assert Parameter.parse("Im(Y2,X1Z2)", 2) in plan.targets
    report = solve_staged(plan, collect(plan, toy_chi), toy_chi)
    assert report.unresolved == []
    assert report.reference_error < 1e-9


def test_load_plan_defaults_targets(tmp_path):
    path = tmp_path / "plan.yaml"
    path.write_text(yaml.safe_dump({"m": 2, "entries": [{"code": "C1"}, {"code": "C2"}, {"code": "C3"},
                                                        {"code": "C1", "inputs": "schedule",
                                                         "preprocessing": "U:X2,X1"}]}))
    plan = load_plan(path)
    assert plan.entries[3].stage == "offdiagonal"
    assert plan.targets[16:] == [Parameter("re", 1, 4), Parameter("im", 1, 4)]


@pytest.mark.parametrize("content", [{"m": 2},
                                     {"m": 2, "entries": [{"inputs": ["0L"]}]},
                                     {"m": 2, "entries": [{"code": "C1", "coords": [1]}]},
                                     {"m": 2, "entries": [{"code": "C1", "stage": "third"}]},
                                     {"m": 2, "targets": ["Im(X1,X2)"], "entries": [{"code": "C1"}]}])
def test_load_plan_rejects(tmp_path, content):
    path = tmp_path / "plan.yaml"
    path.write_text(yaml.safe_dump(content))
    with pytest.raises(PlanError):
        load_plan(path)


def test_observations_file_round_trip(tmp_path, toy_chi):
    plan = load_plan(EA_PLAN)
    probabilities = collect(plan, toy_chi)
    records = [{"entry": index, "input": state, "syndrome": syndrome, "probability": p}
               for (index, state, syndrome), p in probabilities.items()]
    path = tmp_path / "observed.yaml"
    path.write_text(yaml.safe_dump({"observations": records}))
    assert load_observations(path) == probabilities
    report = solve_staged(plan, load_observations(path))
    assert report.unresolved == []
    assert report.reference_error is None


def test_observations_reject_malformed_records(tmp_path):
    path = tmp_path / "observed.yaml"
    path.write_text(yaml.safe_dump([{"entry": 0, "input": "0L"}]))
    with pytest.raises(PlanError):
        load_observations(path)


def test_format_report(toy_chi):
    report = qascd_round_trip(FAMILY, toy_chi)
    structured = yaml.safe_load(format_report(report, 2, structured=True))
    assert len(structured["parameters"]) == 22
    assert structured["parameters"][0] == {"label": "chi(I,I)", "value": pytest.approx(TOY["delta"]),
                                           "resolved": True}
    assert structured["reference_error"] < 1e-9
    human = format_report(report, 2).splitlines()
    assert human[0].split() == ["parameter", "value", "status"]
    assert human[-1].startswith("residual:") and "max error:" in human[-1]
    assert any(line.startswith("Re(I,X1X2)") for line in human)


def test_from_parameters_feeds_back_into_a_valid_estimate(toy_chi):
    report = qascd_round_trip(FAMILY, toy_chi)
    assert isinstance(report.chi_estimate, ProcessMatrix)
    assert report.chi_estimate.off_diagonal_support(1e-12) == [(0, 5), (1, 4), (2, 7)]


def test_three_qubit_direct_plan_cannot_split_its_sets(capsys):
    plan = load_plan(ROOT / "configs" / "plans" / "q3_direct.yaml")
    assert len(plan.entries[0].inputs) == 4 and len(plan.targets) == 16
    report = solve_staged(plan, collect(plan, depolarizing(2, 0.1)))
    assert report.unresolved
    assert "unresolved" in capsys.readouterr().out


def test_named_pairs_only_report_values_they_pin_down(toy_chi):
    report = qascd_round_trip(FAMILY, toy_chi, pairs=[(0, 5)])
    for param in report.resolved:
        assert report.values[param] == pytest.approx(toy_chi.parameter_value(param), abs=1e-9)
    assert report.reference_error is None or report.reference_error < 1e-9


def test_open_plans_carry_every_parameter_a_row_touches(toy_chi):
    plan = plan_family(FAMILY, [(0, 5)])
    probabilities = collect(plan, toy_chi)
    system = assemble(plan, probabilities, stage="offdiagonal")
    extra = set(system.columns) - set(plan.targets)
    assert extra & {Parameter("re", 1, 4), Parameter("im", 1, 4), Parameter("re", 2, 7), Parameter("im", 2, 7)}
    closed = assemble(plan._replace(closed=True), probabilities, stage="offdiagonal")
    assert set(closed.columns) <= set(plan.targets)


def test_plan_files_declare_closed_support():
    assert load_plan(EA_PLAN).closed
    assert not load_plan(ROOT / "configs" / "plans" / "q3_direct.yaml").closed
    assert not (plan_diagonal(FAMILY) + plan_offdiagonal(FAMILY, [(0, 5)], closed=True)).closed


def test_residual_ignores_rows_with_unresolved_parameters():
    report = solve(_system([[1., 0., 0.], [0., 1., 1.], [0., 2., 2.]], [3., 2., 5.], 3))
    assert report.resolved == [Parameter("diag", 0, 0)]
    assert report.residual == pytest.approx(0, abs=1e-12)


def test_code_files_sharing_a_name_stay_apart(tmp_path):
    paths = []
    for folder, name in (("a", "q3"), ("b", "C1")):
        (tmp_path / folder).mkdir()
        path = tmp_path / folder / "code.txt"
        path.write_text(dump_code(get(name).code))
        paths.append(str(path))
    plan = plan_diagonal(paths)
    assert plan.entries[0].code != plan.entries[1].code
    probabilities = collect(plan, depolarizing(2, 0.1))
    assert {len(syndrome) for index, _, syndrome in probabilities if index == 0} == {2}
    assert {len(syndrome) for index, _, syndrome in probabilities if index == 1} == {3}
