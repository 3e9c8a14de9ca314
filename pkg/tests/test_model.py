import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kondo_phonon.errors import (
    ConditionViolation,
    DimensionMismatch,
    MixedCouplingSigns,
    NotSymmetric,
    UnsupportedSize,
)
from kondo_phonon.model import (
    ModelSpec,
    effective_coulomb,
    example_model,
    is_positive_semidefinite,
    predicted_total_spin,
    validate,
)


def two_by_two(**over):
    d = dict(
        lambda_sites=[0, 1], lambda_partition={0: 1, 1: 2},
        omega_sites=[10, 11], omega_partition={10: 2, 11: 1},
        t=[[0, 1], [1, 0]], J=[[1, 0], [0, 1]], U=np.eye(2), g=np.zeros((2, 2)), omega0=1.0,
    )
    d.update(over)
    return ModelSpec(**d)


def labels(spec):
    with pytest.raises(ConditionViolation) as info:
        validate(spec)
    return info.value


def test_example1_is_valid(ex1):
    assert ex1.coupling_class == "antiferromagnetic"
    assert list(ex1.gamma_lambda) == [-1, 1]
    assert ex1.spec.sublattice_counts() == {"L1": 1, "L2": 1, "O1": 1, "O2": 1}


@pytest.mark.parametrize(
    "kind,size,counts,spin",
    [
        ("example1", 2, (1, 1, 1, 1), 0),
        ("example1", 4, (2, 2, 2, 2), 0),
        ("example2", 2, (4, 8, 2, 2), 2),
        ("example3", 2, (4, 4, 4, 2), 1),
        ("star", 4, (1, 3, 1, 1), 1),
    ],
)
def test_examples_counts_and_spin(kind, size, counts, spin):
    m = validate(example_model(kind, size))
    c = m.spec.sublattice_counts()
    assert (c["L1"], c["L2"], c["O1"], c["O2"]) == counts
    assert predicted_total_spin(m) == spin


def test_example2_spin_matches_lattice_count_rule():
    # S = |Λ₁|/2 = N/8 for the decorated square lattice, either sign of J
    for J in (1.0, -1.0):
        m = validate(example_model("example2", 2, {"J": J}))
        n = m.n_lambda + m.n_omega
        assert predicted_total_spin(m) == Fraction(m.spec.sublattice_counts()["L1"], 2) == Fraction(n, 8)


def test_example1_ferromagnetic_spin_is_sublattice_difference():
    m = validate(example_model("example1", 4, {"J": -1.0}))
    assert m.coupling_class == "ferromagnetic"
    assert predicted_total_spin(m) == 0


def test_odd_lambda_reports_c4():
    spec = ModelSpec(
        lambda_sites=[0, 1, 2], lambda_partition={0: 1, 1: 2, 2: 1},
        omega_sites=[10, 11], omega_partition={10: 2, 11: 1},
        t=[[0, 1, 0], [1, 0, 1], [0, 1, 0]], J=[[1, 0], [0, 1], [1, 0]],
        U=np.eye(3), g=np.zeros((3, 3)), omega0=1.0,
    )
    err = labels(spec)
    assert ("C.4", "|Λ| must be even") in err.violations


def test_same_sublattice_hopping_is_c1():
    spec = two_by_two(lambda_partition={0: 1, 1: 1}, omega_partition={10: 2, 11: 2})
    assert "C.1" in labels(spec).labels


def test_disconnected_is_c1():
    spec = two_by_two(t=np.zeros((2, 2)))
    assert "C.1" in labels(spec).labels


def test_uncoupled_omega_is_c2():
    spec = two_by_two(J=[[1, 0], [0, 0]])
    assert "C.2" in labels(spec).labels


def test_same_index_coupling_is_c3():
    spec = two_by_two(J=[[0, 1], [1, 0]])
    assert "C.3" in labels(spec).labels


def test_unequal_g_columns_is_c5():
    spec = two_by_two(g=[[1.0, 0], [0, 0.5]])
    assert "C.5" in labels(spec).labels


def test_shape_and_symmetry_errors():
    with pytest.raises(DimensionMismatch):
        validate(two_by_two(J=np.ones((3, 2))))
    with pytest.raises(NotSymmetric):
        validate(two_by_two(U=[[1, 0.5], [0, 1]]))
    with pytest.raises(ValueError):
        validate(two_by_two(omega0=0.0))


def test_mixed_signs():
    m = validate(two_by_two(J=[[1, 0], [0, -1]]))
    assert m.coupling_class == "mixed"
    with pytest.raises(MixedCouplingSigns):
        predicted_total_spin(m)


def test_critical_coupling_gives_zero_ueff():
    m = validate(example_model("example1", 2, {"U": 2.0, "omega0": 0.5, "g": 1.0}))
    assert np.array_equal(effective_coulomb(m), np.zeros((2, 2)))
    assert is_positive_semidefinite(effective_coulomb(m))


def test_ueff_negative_beyond_critical():
    m = validate(example_model("example1", 2, {"g": 1.5}))
    assert not is_positive_semidefinite(effective_coulomb(m))


def test_example_size_errors():
    with pytest.raises(UnsupportedSize):
        example_model("example1", 3)
    with pytest.raises(UnsupportedSize):
        example_model("star", 6)
    with pytest.raises(ValueError):
        example_model("example1", 2, {"bogus": 1})


@settings(max_examples=40, deadline=None)
@given(
    t=st.floats(0.1, 3.0),
    J=st.floats(-3.0, 3.0).filter(lambda v: abs(v) > 1e-3),
    U=st.floats(0.0, 3.0),
    g=st.floats(0.0, 2.0),
    w=st.floats(0.2, 3.0),
)
def test_json_round_trip(t, J, U, g, w):
    spec = example_model("example1", 4, {"t": t, "J": J, "U": U, "g": g, "omega0": w})
    back = ModelSpec.from_json(spec.to_json())
    assert back.to_dict() == spec.to_dict()
    m = validate(back)
    assert is_positive_semidefinite(effective_coulomb(m)) == (g * g / w - U < 1e-9)


def test_json_schema_shape(ex1):
    d = json.loads(ex1.spec.to_json())
    assert set(d) == {"lambda", "omega", "t", "J", "U", "g", "omega0"}
    assert d["lambda"][0] == {"id": "c0", "sublattice": 1}
