import pytest
import torch

from src.codes import (H_YX, H_ZY, IDS, CatalogError, back_conjugated_in_parent, conjugation_map, get,
                       ket_amplitudes, load_entry, projector_codewords, transform_code, validate_catalog)
from src.pauli import format_pauli
from src.stabilizer import dump_code, in_stabilizer


def _projector(codewords: torch.Tensor) -> torch.Tensor:
    return codewords.T @ codewords.conj()


def test_catalog_builds_and_validates():
    report = validate_catalog()
    assert report.ok, report.failures
    assert set(report.checked) == set(IDS)
    assert "syndrome table compared" in report.checked["C1"]


def test_catalog_reports_printed_errata():
    errata = validate_catalog().errata
    assert any(e.startswith("C3: printed generators XIXZ and YXYX anticommute") for e in errata)
    assert any(e.startswith("H_YX does not fix Z") for e in errata)
    assert not any(e.startswith("H_ZY") for e in errata)
    assert any(e.startswith("q5: printed codeword 0: ket |0111>") for e in errata)
    assert any(e.startswith("q3: YXY acts as") for e in errata)
    assert any(e.startswith("q3: ZZZ acts as") for e in errata)
    assert not any(e.startswith("q3: printed codeword") for e in errata)
    assert not any(e.startswith(("C1: syndrome", "C2: syndrome", "C3: syndrome")) for e in errata)


def test_catalog_shapes():
    for entry_id, (n, k) in {"q3": (3, 1), "q5": (5, 1), "C1": (4, 1), "C2": (4, 1), "C3": (4, 1)}.items():
        entry = get(entry_id)
        assert (entry.code.n, entry.code.k) == (n, k)
        assert entry.noisy_coords == (1, 2)
    assert [format_pauli(g) for g in get("C3").code.generators] == ["IXXZ", "XIZX", "YXYX"]


def test_conjugation_maps():
    assert conjugation_map(H_ZY) == {"X": "X", "Y": "-Z", "Z": "Y"}
    assert conjugation_map(H_YX) == {"X": "Z", "Y": "X", "Z": "Y"}


@pytest.mark.parametrize("child", ["C2", "C3"])
def test_transformed_codes_come_from_c1(child):
    assert back_conjugated_in_parent(child)


def test_transform_round_trip_keeps_the_code_space():
    c1 = get("C1").code
    forth = transform_code(c1, H_ZY)
    back = transform_code(forth, H_ZY.conj().T)
    torch.testing.assert_close(_projector(back.codewords), _projector(c1.codewords))
    assert all(in_stabilizer(g, c1) for g in back.generators)


def test_transform_code_rejects():
    c1 = get("C1").code
    with pytest.raises(CatalogError):
        transform_code(c1, torch.tensor([[1, 1], [0, 1]], dtype=torch.complex128))
    with pytest.raises(CatalogError):
        transform_code(c1, torch.eye(3, dtype=torch.complex128))
    with pytest.raises(CatalogError):
        transform_code(c1, H_ZY, powers=[1, 1])


def test_derived_codewords_span_the_catalog_code_space():
    for entry_id in ("q3", "C1"):
        torch.testing.assert_close(_projector(projector_codewords(entry_id)), _projector(get(entry_id).code.codewords))


def test_ket_amplitudes():
    vector = ket_amplitudes(0.5, [(1, "00"), (-1, "11")], 2)
    assert vector[0] == 0.5 and vector[3] == -0.5
    with pytest.raises(CatalogError):
        ket_amplitudes(0.5, [(1, "0111")], 5)


def test_load_entry(tmp_path):
    assert load_entry("q3", coords=(2, 3)).noisy_coords == (2, 3)
    path = tmp_path / "rep.txt"
    path.write_text(dump_code(get("q3").code))
    entry = load_entry(str(path))
    assert entry.id == "rep" and entry.noisy_coords == (1, 2)
    assert entry.source == str(path.resolve())
    torch.testing.assert_close(entry.code.codewords, get("q3").code.codewords)


@pytest.mark.parametrize("reference, coords", [("q7", None), ("missing.txt", None), ("q3", (1, 1)), ("q3", (4,))])
def test_load_entry_rejects(reference, coords):
    with pytest.raises(CatalogError):
        load_entry(reference, coords)
