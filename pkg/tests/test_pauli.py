import numpy as np
import pytest
import torch

from src.pauli import (PauliError, all_paulis, basis_index, coeff_to_exponent, commutes, embed, format_pauli,
                       format_sparse, from_letters, identity, multiply, parse, product, random_pauli, restrict,
                       sort_key, symplectic_product, to_matrix)


def test_single_qubit_products_follow_y_equals_ixz():
    x, y, z = (from_letters(c) for c in "XYZ")
    assert multiply(x, y) == from_letters("Z", 1)
    assert multiply(y, x) == from_letters("Z", 3)
    assert multiply(z, x) == from_letters("Y", 1)
    assert multiply(y, y) == identity(1)


def test_product_matches_matrix_product(rng):
    for n in range(1, 5):
        for _ in range(250):
            a, b = random_pauli(n, rng), random_pauli(n, rng)
            torch.testing.assert_close(to_matrix(a * b), to_matrix(a) @ to_matrix(b))


def test_group_laws(rng):
    for _ in range(10 ** 4):
        n = int(rng.integers(1, 5))
        a, b, c = (random_pauli(n, rng) for _ in range(3))
        assert (a * b) * c == a * (b * c)
        assert a * identity(n) == identity(n) * a == a
        assert a * a.dagger() == identity(n)


def test_commutation():
    assert commutes(from_letters("XX"), from_letters("ZZ"))
    assert not commutes(from_letters("XI"), from_letters("ZI"))
    assert symplectic_product(from_letters("XYZ"), from_letters("ZZZ")) == 0


@pytest.mark.parametrize("n", [1, 2, 3])
def test_commutation_matches_dense_commutator(n):
    paulis = all_paulis(n)
    matrices = [to_matrix(p) for p in paulis]
    for a, ma in zip(paulis, matrices):
        for b, mb in zip(paulis, matrices):
            assert commutes(a, b) == bool(torch.allclose(ma @ mb, mb @ ma))


def test_product_of_sequence():
    assert product([from_letters(c) for c in "XYZ"]) == identity(1).with_phase(1)
    assert product([], n=2) == identity(2)
    with pytest.raises(PauliError):
        product([])


def test_parse_full_strings():
    assert parse("-iYYZ") == from_letters("YYZ", 3)
    assert parse("+iXI") == from_letters("XI", 1)
    assert parse("−XZ").phase_exp == 2
    assert parse("I", n=2) == identity(2)


def test_parse_subscripted():
    assert parse("X1Z2", n=3).letters == "XZI"
    assert parse("X_1 Z_3", n=3).letters == "XIZ"
    assert parse("-Y2", n=2) == from_letters("IY", 2)


@pytest.mark.parametrize("text, n", [("X1X1", 2), ("X3", 2), ("X1", None), ("XQ", None), ("", None),
                                     ("XZ", 3)])
def test_parse_rejects(text, n):
    with pytest.raises(PauliError):
        parse(text, n=n)


def test_formatting():
    assert format_pauli(from_letters("XZ", 2)) == "-XZ"
    assert format_sparse(from_letters("IXZ")) == "X2Z3"
    assert format_sparse(identity(3)) == "I"
    assert str(from_letters("Y", 3)) == "-iY"


def test_basis_order():
    assert [p.letters for p in all_paulis(1)] == ["I", "X", "Y", "Z"]
    assert basis_index(from_letters("XY")) == 6
    assert all_paulis(2)[6].letters == "XY"
    assert [basis_index(p) for p in all_paulis(2)] == list(range(16))


def test_sort_key():
    ops = [from_letters("ZZ"), from_letters("XI"), from_letters("II"), from_letters("IX")]
    assert [p.letters for p in sorted(ops, key=sort_key)] == ["II", "IX", "XI", "ZZ"]


def test_embed_and_restrict():
    placed = embed(from_letters("XZ", 2), (1, 3), 3)
    assert placed == from_letters("XIZ", 2)
    assert restrict(placed, (1, 3)) == from_letters("XZ", 2)
    with pytest.raises(PauliError):
        restrict(placed, (1, 2))
    with pytest.raises(PauliError):
        embed(from_letters("XZ"), (1, 1), 3)


def test_phase_helpers():
    op = from_letters("X", 1)
    assert not op.hermitian
    assert op.dagger().phase_exp == 3
    assert op.stripped() == from_letters("X")
    assert coeff_to_exponent(-1j) == 3
    with pytest.raises(PauliError):
        coeff_to_exponent(2)


def test_immutable_and_hashable():
    op = from_letters("XY")
    with pytest.raises(AttributeError):
        op.phase_exp = 1
    assert len({op, from_letters("XY"), from_letters("XY", 2)}) == 2


def test_bounds():
    with pytest.raises(PauliError):
        from_letters("I" * 9)
    with pytest.raises(PauliError):
        multiply(from_letters("X"), from_letters("XX"))
    assert random_pauli(4, np.random.default_rng(0), with_phase=False).phase_exp == 0
