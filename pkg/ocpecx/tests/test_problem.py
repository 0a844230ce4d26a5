"""Problem module tests."""

import json
from dataclasses import replace

import numpy as np
import pytest

from ocpecx.models.errors import DimensionError, ProblemFileError, UnknownProblemError
from ocpecx.models.lcp import simulate_lcs
from ocpecx.models.problem import (
    Box,
    Psi,
    audit_derivatives,
    autonomize,
    builtin,
    counterexample,
    linear_lcs,
    load_problem,
    problem_from_dict,
)
from ocpecx.models.qp import FREE, NONNEG, NONPOS, ZERO
from ocpecx.resources import RESOURCES_PATH


def lcs_dict(**changes):
    data = {
        "kind": "linear_lcs",
        "A": [[0.0]],
        "B": [[1.0]],
        "c": [-1.0],
        "C": [[1.0]],
        "D": [[1.0]],
        "q": [0.0],
        "x0": [1.0],
    }
    data.update(changes)
    return data


def test_counterexample_oracles():
    p = counterexample()
    p.check_dimensions()
    ev = p.H([0.0, 0.5], [[1.0], [2.0]], [[3.0], [-1.0]])
    np.testing.assert_allclose(ev.value.ravel(), [1.0 - 9.0, 2.0 - 1.0])
    np.testing.assert_allclose(ev.du.ravel(), [-6.0, 2.0])
    np.testing.assert_allclose(ev.dx.ravel(), [1.0, 1.0])
    assert not p.affine
    assert p.endpoint.initial.hi.tolist() == [0.0]
    assert np.isinf(p.radius)


def test_linear_lcs_layout():
    p = linear_lcs(A=[[0.0, 1.0], [0.0, 0.0]], B=[[0.0], [1.0]], c=[0.0, 0.0], C=[[1.0, 0.0]], D=[[2.0]], q=[0.5], x0=[1.0, 0.0])
    p.check_dimensions()
    assert (p.n, p.m, p.l, p.l1, p.l2) == (2, 1, 1, 0, 0)
    assert p.affine and p.linear is not None
    ev = p.H([0.0], [[3.0, 4.0]], [[1.0]])
    assert ev.value.tolist() == [[3.0 + 2.0 + 0.5]]
    assert p.G([0.0], [[3.0, 4.0]], [[1.0]]).value.tolist() == [[1.0]]


@pytest.mark.parametrize(
    "field, changes",
    [
        ("A", {"A": [[0.0, 1.0]]}),
        ("B", {"B": [[1.0, 2.0]]}),
        ("C", {"C": [[1.0, 0.0]]}),
        ("x0", {"x0": [1.0, 2.0]}),
    ],
)
def test_dimension_errors_name_the_matrix(field, changes):
    with pytest.raises(DimensionError) as info:
        problem_from_dict(lcs_dict(**changes))
    assert info.value.field == field
    assert str(info.value).startswith(f"{field}: dimension mismatch")


def test_problem_file_errors():
    with pytest.raises(ProblemFileError, match="missing field"):
        problem_from_dict({"kind": "linear_lcs", "A": [[0.0]]})
    with pytest.raises(ProblemFileError, match="expected a number"):
        problem_from_dict(lcs_dict(c=["one"]))
    with pytest.raises(ProblemFileError, match="either x0 or E0"):
        data = lcs_dict()
        del data["x0"]
        problem_from_dict(data)
    with pytest.raises(UnknownProblemError):
        problem_from_dict({"kind": "bilinear"})
    with pytest.raises(UnknownProblemError):
        builtin("nope")


def test_box_initial_and_radius_from_dict():
    data = lcs_dict(E0={"lo": ["-inf"], "hi": [0.0]}, radius=2.5, U={"lo": [0.0], "hi": [3.0]})
    del data["x0"]
    p = problem_from_dict(data)
    assert p.endpoint.initial.lo.tolist() == [-np.inf]
    assert p.radius == 2.5
    assert p.control_set.hi.tolist() == [3.0]


def test_load_problem(tmp_path):
    assert load_problem("builtin:counterexample").name == "counterexample"
    assert load_problem(RESOURCES_PATH / "counterexample.json").name == "counterexample"
    p = load_problem(RESOURCES_PATH / "lcs_scalar.json")
    assert p.name == "lcs_scalar" and p.affine
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    with pytest.raises(ProblemFileError, match="json"):
        load_problem(broken)
    with pytest.raises(ProblemFileError, match="no such file"):
        load_problem(tmp_path / "missing.json")
    (tmp_path / "ok.json").write_text(json.dumps(lcs_dict(t1=2.0)))
    assert load_problem(tmp_path / "ok.json").t1 == 2.0


def test_load_problem_rejects_unreadable_paths(tmp_path):
    with pytest.raises(ProblemFileError, match="is a directory") as info:
        load_problem(tmp_path)
    assert info.value.field == "path"
    latin = tmp_path / "latin.json"
    latin.write_bytes(b'{"kind": "linear_lcs", "name": "\xe9t\xe9"}')
    with pytest.raises(ProblemFileError, match="not UTF-8") as info:
        load_problem(latin)
    assert info.value.field == "encoding"


def test_horizon_must_be_increasing():
    with pytest.raises(ProblemFileError, match="t1"):
        counterexample(t0=1.0, t1=1.0)


def test_box_normal_codes():
    box = Box(np.array([0.0, -np.inf, 1.0, -1.0]), np.array([1.0, np.inf, 1.0, 1.0]))
    codes = box.normal_codes(np.array([1.0, 0.0, 1.0, -1.0]), 1e-9)
    assert codes.tolist() == [NONNEG, ZERO, FREE, NONPOS]


@pytest.mark.parametrize("problem", [counterexample(), linear_lcs(), autonomize(counterexample()), autonomize(linear_lcs())])
def test_derivatives_match_central_differences(problem):
    errors = audit_derivatives(problem, points=50, seed=1)
    assert max(errors.values()) <= 1e-6


def test_autonomize_keeps_linear_problems_affine():
    a = autonomize(linear_lcs())
    assert a.affine and a.n == 2
    assert a.endpoint.initial.lo.tolist() == [1.0, 0.0]
    assert a.endpoint.final.is_free
    ev = a.dynamics([0.3], [[1.0, 0.3]], [[0.0]])
    assert ev.value.tolist() == [[-1.0, 1.0]]


def test_autonomize_reads_time_from_clock_state():
    calls = []

    p = counterexample()
    original = p.dynamics

    def dynamics(t, x, u):
        calls.append(np.asarray(t).tolist())
        return original(t, x, u)

    a = autonomize(replace(p, dynamics=dynamics))
    a.dynamics([0.0], [[0.0, 0.75]], [[1.0]])
    assert calls == [[0.75]]


def test_psi_sign_convention():
    p = linear_lcs(D=[[2.0]])
    value, dx, du = Psi(p)([0.0], [[1.0]], [[0.5]], [[]], [[]], [[3.0]], [[-1.0]])
    # −G·μ − H·ν with G = u, H = x + 2u
    assert value.tolist() == [-1.5 + 2.0]
    assert dx.tolist() == [[1.0]]
    assert du.tolist() == [[-3.0 + 2.0]]


def test_autonomized_simulation_reproduces_state_and_clock():
    problem = linear_lcs(
        A=[[0.0, 1.0], [-1.0, 0.0]],
        B=[[0.0], [1.0]],
        c=[0.0, 0.1],
        C=[[1.0, 0.5]],
        D=[[2.0]],
        q=[0.3],
        x0=[1.0, 0.0],
        t0=0.25,
        t1=1.25,
    )
    plain = simulate_lcs(problem, 40)
    clocked = simulate_lcs(autonomize(problem), 40)
    np.testing.assert_allclose(clocked.x[:, :2], plain.x, rtol=0.0, atol=1e-12)
    np.testing.assert_allclose(clocked.u, plain.u, rtol=0.0, atol=1e-12)
    np.testing.assert_allclose(clocked.x[:, 2], plain.t, rtol=0.0, atol=1e-12)
