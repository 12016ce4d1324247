import numpy as np
import pytest
import torch

from src.ambiguity import ErrorSet, build_class
from src.pauli import all_paulis, from_letters, multiply, parse, to_matrix
from src.stabilizer import (CodeError, LogicalAction, StabilizerCode, Syndrome, codespace_projector, dump_code,
                            encode, format_normalizer_table, gf2_rank, in_stabilizer, load_code, logical_action,
                            logical_expectations, logical_representatives, normalizer, normalizer_classes,
                            stabilizer_group, symplectic_rows, syndrome_of, syndrome_projector)
from tests.conftest import golden


def test_repetition_code_codewords():
    code = StabilizerCode(["ZZI", "IZZ"])
    assert (code.n, code.k) == (3, 1)
    expected = torch.zeros(2, 8, dtype=torch.complex128)
    expected[0, 0] = expected[1, 7] = 1
    torch.testing.assert_close(code.codewords, expected)


@pytest.mark.parametrize("generators", [["XX", "ZI"], ["XX", "XX"], ["-iXX"], ["II"], [], ["XX", "ZZZ"]])
def test_invalid_generators(generators):
    with pytest.raises(CodeError):
        StabilizerCode(generators)


def test_supplied_codewords_are_checked():
    with pytest.raises(CodeError):
        StabilizerCode(["ZZ"], codewords=[[1, 0, 0, 0], [0, 1, 0, 0]])
    with pytest.raises(CodeError):
        StabilizerCode(["ZZ"], codewords=[[1, 0, 0, 0]])


def test_gf2_rank():
    assert gf2_rank(symplectic_rows([from_letters("XZ"), from_letters("ZX"), from_letters("YY")])) == 2


def test_syndromes(q3):
    assert syndrome_of(parse("X2", n=3), q3).label == "+-"
    assert syndrome_of(parse("Y1", n=3), q3).label == "-+"
    assert syndrome_of(parse("Z1", n=3), q3).label == "--"
    assert syndrome_of(parse("X1X2", n=3), q3).trivial
    with pytest.raises(CodeError):
        syndrome_of(from_letters("XX"), q3)


def test_syndrome_label_helpers():
    assert Syndrome.from_label("+-").signs == (1, -1)
    assert Syndrome.from_label("+−").signs == (1, -1)
    assert Syndrome.from_label("+-").combine(Syndrome.from_label("--")).label == "-+"
    assert Syndrome.from_label("+-+").truncate([1]).label == "++"
    with pytest.raises(CodeError):
        Syndrome.from_label("+x")


def test_syndrome_projectors_resolve_identity(q3):
    total = sum(syndrome_projector(q3, label) for label in ("++", "+-", "-+", "--"))
    torch.testing.assert_close(total, torch.eye(8, dtype=torch.complex128))
    error = to_matrix(parse("X2", n=3))
    torch.testing.assert_close(error @ codespace_projector(q3) @ error, syndrome_projector(q3, "+-"))
    with pytest.raises(CodeError):
        syndrome_projector(q3, "+++")


def test_stabilizer_group(q3):
    group = stabilizer_group(q3)
    assert [str(g) for g in group] == ["III", "XIX", "YYZ", "ZYY"]
    assert in_stabilizer(from_letters("ZYY"), q3)
    assert not in_stabilizer(from_letters("ZYY", 2), q3)
    assert in_stabilizer(from_letters("ZYY", 2), q3, up_to_phase=True)


def test_normalizer_sizes(q3, q5):
    assert len(normalizer(q3)) == 16
    assert len(normalizer(q5)) == 64
    assert all(p.phase_exp == 0 for p in normalizer(q5))


def test_logical_action(q3):
    assert logical_action(from_letters("XXI"), q3) == LogicalAction(from_letters("Z"), 0)
    assert logical_action(from_letters("XZI"), q3).label == "-X_L"
    assert logical_action(from_letters("IYI"), q3).label == "Y_L"
    assert logical_action(from_letters("XIX"), q3).label == "I_L"
    with pytest.raises(CodeError):
        logical_action(from_letters("IXI"), q3)


def test_logical_representatives_act_as_plus(q3):
    reps = logical_representatives(q3)
    assert list(reps) == ["I", "X", "Y", "Z"]
    for letters, rep in reps.items():
        action = logical_action(rep.stripped(), q3)
        assert action.logical.letters == letters
        assert (action.phase_exp + rep.phase_exp) % 4 == 0


def test_normalizer_table_matches_golden(q3):
    assert format_normalizer_table(q3) == golden("q3_normalizer.txt")
    classes = normalizer_classes(q3)
    assert [p for p, _ in classes["I"]] == stabilizer_group(q3)


def test_encode_and_expectations(q3):
    zero = encode([1, 0], q3)
    torch.testing.assert_close(zero, q3.codewords[0])
    assert logical_expectations(zero, q3) == pytest.approx((0, 0, 1), abs=1e-12)
    plus = encode([2 ** -0.5, 2 ** -0.5], q3)
    assert logical_expectations(plus, q3) == pytest.approx((1, 0, 0), abs=1e-12)
    up = encode([2 ** -0.5, 1j * 2 ** -0.5], q3)
    assert logical_expectations(up, q3) == pytest.approx((0, 1, 0), abs=1e-12)


def test_encode_rejects_bad_states(q3):
    with pytest.raises(CodeError):
        encode([1, 1], q3)
    with pytest.raises(CodeError):
        encode([1, 0, 0], q3)
    outside = torch.zeros(8, dtype=torch.complex128)
    outside[0] = 1
    with pytest.raises(CodeError):
        logical_expectations(outside, q3)


def test_code_text_format(q3):
    loaded = load_code(dump_code(q3), name="copy")
    assert loaded.generators == q3.generators
    torch.testing.assert_close(loaded.codewords, q3.codewords)
    derived = load_code("# header then generators\n3 1\nXIX\nYYZ\n")
    assert derived.k == 1


@pytest.mark.parametrize("text", ["", "three one\nXIX\nYYZ\n", "3 1\nXIX\n", "3 1\nXIX\nYYZ\n5 0.5 0\n",
                                  "3 1\nXIX\nXIX\n"])
def test_code_text_format_errors(text):
    with pytest.raises(CodeError):
        load_code(text)


def test_five_qubit_degeneracy(q5):
    # errors of one ambiguous set: Y2Y3 and X4X5 differ by a stabilizer, X1 and Y2Y3 by a logical
    y2y3, x4x5, x1 = (parse(label, n=5) for label in ("Y2Y3", "X4X5", "X1"))
    assert syndrome_of(y2y3, q5) == syndrome_of(x4x5, q5) == syndrome_of(x1, q5)
    assert in_stabilizer(y2y3 * x4x5, q5, up_to_phase=True)
    assert not in_stabilizer(x1 * y2y3, q5, up_to_phase=True)
    assert (x1 * y2y3).stripped() in normalizer(q5)


def test_syndrome_of_a_product(q3):
    paulis = all_paulis(3)
    syndromes = {p: syndrome_of(p, q3) for p in paulis}
    for a in paulis:
        for b in paulis:
            assert syndrome_of(a * b, q3) == syndromes[a].combine(syndromes[b])


def test_erroneous_subspaces_of_the_three_qubit_class(q3):
    cls = build_class(q3, ErrorSet.on_coordinates(3, (1, 2)))
    code_space = codespace_projector(q3)
    spaces = []
    for syndrome, members in cls.sets.items():
        for error in members:
            matrix = to_matrix(error)
            spaces.append((syndrome, matrix @ code_space @ matrix.conj().T))
    assert len(spaces) == 16
    for syndrome, space in spaces:
        torch.testing.assert_close(space, syndrome_projector(q3, syndrome))
        for other, other_space in spaces:
            if syndrome == other:
                torch.testing.assert_close(space, other_space)
            else:
                assert torch.allclose(space @ other_space, torch.zeros_like(space), atol=1e-12)


def test_logical_action_is_a_class_function(q3, rng):
    states = []
    for _ in range(4):
        amplitudes = rng.normal(size=2) + 1j * rng.normal(size=2)
        states.append(encode(amplitudes / np.linalg.norm(amplitudes), q3))
    for element in normalizer(q3):
        action = logical_action(element, q3)
        for stabilizer in stabilizer_group(q3):
            shifted = multiply(element, stabilizer)
            other = logical_action(shifted.stripped(), q3)
            assert other.logical == action.logical
            assert (other.phase_exp + shifted.phase_exp) % 4 == action.phase_exp
            for state in states:
                assert torch.vdot(state, to_matrix(shifted) @ state).item() == pytest.approx(
                    torch.vdot(state, to_matrix(element) @ state).item(), abs=1e-12)
