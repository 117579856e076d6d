import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from campusplan.model import MilpModel, build, canonical_dump
from campusplan.solve import ExportError, MPSParseError, export_mps, read_mps, read_mps_file, write_mps

from conftest import TESTS, small_problem
from oracles import random_milp


def _one_variable():
    return MilpModel(sp.csr_matrix([[2.0]]), ["G"], [1.0], [3.0], [0.0], [np.inf], [False], ["demand"], ["x"], name="one")


def test_one_variable_model_matches_golden():
    golden = (TESTS / "golden" / "one_variable.mps").read_text()
    text = export_mps(_one_variable())
    assert text == golden
    assert len(text.splitlines()) == 12


@pytest.mark.parametrize("seed", range(10))
def test_random_models_roundtrip(seed):
    model = random_milp(np.random.default_rng(seed))
    back = read_mps(export_mps(model))
    assert canonical_dump(back) == canonical_dump(model)


def test_built_model_roundtrip_through_a_file(tmp_path):
    model = build(small_problem(stages=2)).model
    path = tmp_path / "m.mps"
    write_mps(model, path)
    assert canonical_dump(read_mps_file(path)) == canonical_dump(model)
    assert export_mps(model) == path.read_text()


def test_export_is_byte_deterministic():
    model = build(small_problem(stages=2)).model
    assert export_mps(model) == export_mps(build(small_problem(stages=2)).model)


def test_integer_columns_are_marked_and_bounded():
    A = sp.csr_matrix([[1.0, 1.0]])
    m = MilpModel(A, ["L"], [4.0], [1.0, 0.0], [0, 0], [np.inf, 3], [True, True], ["r"], ["a", "b"])
    text = export_mps(m)
    assert " M0 'MARKER' 'INTORG'" in text and " M1 'MARKER' 'INTEND'" in text
    assert " PL BND a" in text and " UP BND b 3" in text
    back = read_mps(text)
    assert back.integer.tolist() == [True, True]
    assert back.ub.tolist() == [math.inf, 3.0]


@pytest.mark.parametrize(
    "rows, cols",
    [(["r", "r"], ["a", "b"]), (["r", "s"], ["a", "a"]), (["OBJ", "s"], ["a", "b"]), (["r s", "t"], ["a", "b"])],
)
def test_name_problems_raise_export_error(rows, cols):
    m = MilpModel(sp.csr_matrix(np.eye(2)), ["L", "L"], [1, 1], [1, 1], [0, 0], [1, 1], [False, False], rows, cols)
    with pytest.raises(ExportError):
        export_mps(m)


def test_reader_handles_max_and_other_bound_types():
    text = "\n".join(
        [
            "NAME t",
            "OBJSENSE",
            "    MAX",
            "ROWS",
            " N  cost",
            " E  r",
            "COLUMNS",
            " x cost 2 r 1",
            " y cost 1 r 1",
            "RHS",
            " RHS r 3",
            "BOUNDS",
            " BV BND x",
            " MI BND y",
            "ENDATA",
        ]
    )
    m = read_mps(text)
    assert m.c.tolist() == [-2.0, -1.0]
    assert m.integer.tolist() == [True, False]
    assert m.ub[0] == 1.0 and m.lb[1] == -math.inf


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("NAME a\nROWS\n N OBJ\n L r\nCOLUMNS\n x q 1\nENDATA\n", "q"),
        ("NAME a\nROWS\n N OBJ\nRANGES\nENDATA\n", "RANGES"),
        ("NAME a\nROWS\n N OBJ\nCOLUMNS\n x OBJ abc\nENDATA\n", "abc"),
        ("NAME a\nROWS\n N OBJ\n", "ENDATA"),
    ],
)
def test_reader_errors_point_at_the_line(text, fragment):
    with pytest.raises(MPSParseError, match=fragment):
        read_mps(text)


def test_external_reader_accepts_export(tmp_path):
    highspy = pytest.importorskip("highspy")
    path = tmp_path / "m.mps"
    write_mps(build(small_problem(stages=2)).model, path)
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    assert h.readModel(str(path)) == highspy.HighsStatus.kOk
    assert h.getNumCol() == build(small_problem(stages=2)).model.n_cols


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_roundtrip_property(seed):
    model = random_milp(np.random.default_rng(seed))
    assert canonical_dump(read_mps(export_mps(model))) == canonical_dump(model)
