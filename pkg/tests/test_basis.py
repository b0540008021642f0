import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from modewitness.basis import (
    Lifter,
    basis_from_params,
    beamsplitter,
    clements_orthogonal,
    mesh_params_for,
    n_mesh_params,
    orthogonal_to_unitary,
    restrict_local,
    symplectic_form,
    unitary_to_orthogonal,
)
from modewitness.generators import GeneratorSet, Partition

from conftest import random_unitary
from oracles import lift_by_substitution


def test_two_mode_mesh_is_rotation_times_phase():
    from modewitness.basis import phase

    th, ph = 0.4, 1.3
    assert np.allclose(clements_orthogonal([th], [ph], 2).O, beamsplitter(th, 0, 1, 2) @ phase(ph, 0, 2))


@pytest.mark.parametrize("m", [2, 3, 4, 5])
def test_mesh_is_orthogonal_symplectic(rng, m):
    o = basis_from_params(rng.uniform(0, 2 * np.pi, 2 * n_mesh_params(m)), m).O
    assert np.allclose(o @ o.T, np.eye(2 * m), atol=1e-12)
    j = symplectic_form(m)
    assert np.allclose(o @ j @ o.T, j, atol=1e-12)
    u = orthogonal_to_unitary(o)
    assert np.allclose(unitary_to_orthogonal(u), o)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_mesh_reaches_any_unitary_up_to_output_phases(rng, m):
    u = random_unitary(rng, m)
    params = mesh_params_for(u)
    w = orthogonal_to_unitary(basis_from_params(params, m).O) @ u.conj().T
    assert np.allclose(np.abs(w), np.eye(m), atol=1e-8)


def test_mesh_parameter_count_is_checked():
    with pytest.raises(ValueError):
        clements_orthogonal([0.1, 0.2], [0.3], 2)


def test_lift_worked_example():
    gens = GeneratorSet(3, 2)
    lift = Lifter(gens)
    i, j = gens.index_of("q1^2 p1"), gens.index_of("q1 p1 q2")
    for th in np.random.default_rng(3).uniform(0, 2 * np.pi, 20):
        u = lift(beamsplitter(th, 0, 1, 2))
        assert abs(u[i, j] - 2 * math.cos(th) ** 2 * math.sin(th)) < 1e-10


@pytest.mark.parametrize("order,modes", [(1, 3), (2, 2), (3, 2)])
def test_lift_matches_symbolic_substitution(rng, order, modes):
    gens = GeneratorSet(order, modes)
    o = basis_from_params(rng.uniform(0, 2 * np.pi, 2 * n_mesh_params(modes)), modes).O
    assert np.allclose(Lifter(gens)(o), lift_by_substitution(o, gens), atol=1e-10)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**31), order=st.integers(1, 3))
def test_lift_is_a_homomorphism(seed, order):
    rng = np.random.default_rng(seed)
    gens = GeneratorSet(order, 2)
    lift = Lifter(gens)
    a = basis_from_params(rng.uniform(0, 2 * np.pi, 2), 2).O
    b = basis_from_params(rng.uniform(0, 2 * np.pi, 2), 2).O
    assert np.allclose(lift(a @ b), lift(a) @ lift(b), atol=1e-9)
    assert np.allclose(lift(np.eye(4)), np.eye(len(gens)))


def test_restrict_local_drops_cross_terms():
    gens = GeneratorSet(2, 2)
    mat = np.arange(14 * 14, dtype=float).reshape(14, 14)
    red, keep = restrict_local(mat, gens, Partition.parse("1|2"))
    assert red.shape == (10, 10) and len(keep) == 10
    with pytest.raises(ValueError):
        restrict_local(np.eye(3), gens, Partition.parse("1|2"))


def test_lift_rejects_wrong_shape():
    with pytest.raises(ValueError):
        Lifter(GeneratorSet(1, 2))(np.eye(6))
