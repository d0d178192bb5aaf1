"""State-vector engine: canonicalization, gates, measurement, factorization,
and the name registry."""

import math

import numpy as np
import pytest

from dmcverify.errors import NormalizationError, OverlapError, UnknownQubitError
from dmcverify.quantum import (
    PureStateVector,
    StateRegistry,
    apply_correction,
    apply_entangle,
    basis_state,
    effective_angle,
    factored,
    measure,
    schmidt_rank,
    tensor,
)

SQ2 = 1.0 / math.sqrt(2.0)


def test_canonical_phase_removes_global_phase():
    a = PureStateVector(("q1",), [0.6, 0.8])
    b = PureStateVector(("q1",), [-0.6, -0.8])
    c = PureStateVector(("q1",), np.array([0.6, 0.8]) * np.exp(0.3j))
    assert a.close_to(b)
    assert a.close_to(c)
    assert a.amps[0].real > 0
    assert a.amps[0].imag == 0


def test_unnormalized_state_rejected():
    with pytest.raises(NormalizationError):
        PureStateVector(("q1",), [1.0, 1.0])


def test_tensor_rejects_shared_qubits():
    a = PureStateVector(("q1",), [1.0, 0.0])
    with pytest.raises(OverlapError):
        tensor(a, a)


def test_entangle_flips_the_11_amplitude():
    plus2 = PureStateVector(("q1", "q2"), [0.5, 0.5, 0.5, 0.5])
    got = apply_entangle(plus2, "q1", "q2")
    assert np.allclose(got.amps, [0.5, 0.5, 0.5, -0.5])
    with pytest.raises(UnknownQubitError):
        apply_entangle(plus2, "q1", "q1")


def test_corrections_on_named_axis():
    state = PureStateVector(("q1", "q2"), [0.6, 0.0, 0.0, 0.8])
    x2 = apply_correction(state, "q2", "X")
    assert np.allclose(x2.amps, [0.0, 0.6, 0.8, 0.0])
    z1 = apply_correction(state, "q1", "Z")
    assert np.allclose(z1.amps, [0.6, 0.0, 0.0, -0.8])


def test_measure_plus_state_in_computational_rotation():
    # |+> measured in the {|+_0>, |-_0>} basis: outcome 0 is certain
    plus = PureStateVector(("q1",), [SQ2, SQ2])
    zero, one = measure(plus, "q1", 0.0)
    assert zero.probability == pytest.approx(1.0, abs=1e-12)
    assert one.probability == pytest.approx(0.0, abs=1e-12)
    assert one.collapsed_qubit_state is None


def test_measure_basis_vector_probabilities():
    # |0> against the rotated basis: both outcomes carry probability 1/2
    ket0 = PureStateVector(("q1",), [1.0, 0.0])
    for alpha in (0.0, math.pi / 2, math.pi / 4):
        outs = measure(ket0, "q1", alpha)
        for o in outs:
            assert o.probability == pytest.approx(0.5, abs=1e-12)
            assert o.collapsed_qubit_state.close_to(
                PureStateVector(("q1",), basis_state(alpha, o.outcome_bit).amps)
            )


def test_measure_splits_residual():
    # measuring q1 of the CZ-coupled teleportation state leaves a 2-qubit rest
    pair = PureStateVector(("q2", "q3"), [0.5, 0.5, 0.5, -0.5])
    joint = apply_entangle(tensor(PureStateVector(("q1",), [0.6, 0.8]), pair),
                           "q1", "q2")
    zero, one = measure(joint, "q1", 0.0)
    assert zero.probability + one.probability == pytest.approx(1.0, abs=1e-12)
    assert zero.residual.qubits == ("q2", "q3")
    expected = PureStateVector(("q2", "q3"), [0.7, 0.7, -0.1, 0.1])
    assert zero.residual.close_to(expected)


def test_effective_angle():
    assert effective_angle(math.pi / 2) == pytest.approx(math.pi / 2)
    assert effective_angle(math.pi / 2, s_val=1) == pytest.approx(3 * math.pi / 2)
    assert effective_angle(math.pi / 2, t_val=1) == pytest.approx(3 * math.pi / 2)
    assert effective_angle(math.pi / 2, s_val=1, t_val=1) == pytest.approx(math.pi / 2)


def test_factorization_of_product_state():
    a = PureStateVector(("q1",), [0.6, 0.8])
    b = PureStateVector(("q2", "q3"), [0.5, 0.5, 0.5, -0.5])
    fs = factored(tensor(a, b))
    assert [f.qubits for f in fs] == [("q1",), ("q2", "q3")]
    assert fs[0].close_to(a)
    assert fs[1].close_to(b)


def test_entangled_state_does_not_factor():
    bell = PureStateVector(("q1", "q2"), [SQ2, 0.0, 0.0, SQ2])
    assert [f.qubits for f in factored(bell)] == [("q1", "q2")]
    assert schmidt_rank(bell, 0b01) == 2


def test_registry_interns_by_closeness():
    reg = StateRegistry()
    a = PureStateVector(("q1",), [0.6, 0.8])
    assert reg.intern(a) == "qs1"
    jitter = PureStateVector(
        ("q1",), np.array([0.6, 0.8]) + 1e-8, check=False
    )
    assert reg.intern(jitter) == "qs1"
    other = PureStateVector(("q1",), [0.8, 0.6])
    assert reg.intern(other) == "qs2"
    assert reg.names() == ["qs1", "qs2"]
    assert reg.lookup(PureStateVector(("q1",), [1.0, 0.0])) is None
    assert reg.state_of("qs2").close_to(other)


def test_registry_csv_has_no_negative_zero():
    reg = StateRegistry()
    reg.intern(PureStateVector(("q1",), [0.6, -0.8]))
    csv = reg.to_csv()
    lines = csv.strip().splitlines()
    assert lines[0] == "name,qubits,amplitudes"
    assert "-0i" not in csv
    assert lines[1].startswith("qs1,1,")
