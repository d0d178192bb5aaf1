"""Configuration-graph exploration: step semantics, canonical numbering,
ownership flow and atom evaluation."""

import pytest

from dmcverify.errors import StateBudgetExceededError
from dmcverify.formulas import Has, QubitEqInit, QubitEqQubit, QubitIsKet, VarEq
from dmcverify.parser import load_network
from dmcverify.semantics import (
    config_summary,
    enabled_steps,
    eval_config_atom,
    explore,
    initial_configurations,
)

from conftest import protocol_text


def test_qtp_graph_shape(qtp):
    net, graph, *_ = qtp
    assert len(graph.nodes) == 20
    assert len(graph.edges) == 23
    assert graph.initials == [0]
    assert len(graph.registry) == 10
    # node names are C1.. in canonical order
    assert graph.node_name(0) == "C1"
    assert graph.node_name(19) == "C20"


def test_initial_configurations_enumerate_free_inputs():
    net = load_network(protocol_text("qkd"))
    inits = initial_configurations(net)
    assert len(inits) == 4  # two free one-bit inputs
    assignments = {
        (c.agent("A").value("ba"), c.agent("B").value("bb")) for c in inits
    }
    assert assignments == {(0, 0), (0, 1), (1, 0), (1, 1)}


def test_input_overrides_pin_free_inputs():
    net = load_network(protocol_text("qkd"))
    inits = initial_configurations(net, input_overrides={("A", "ba"): 1})
    assert len(inits) == 2
    assert all(c.agent("A").value("ba") == 1 for c in inits)


def test_receive_never_initiates():
    net = load_network(protocol_text("qtp"))
    (init,) = initial_configurations(net)
    steps = enabled_steps(net, init)
    # only Alice's entangle is enabled; Bob blocks on the receive
    assert [(s.kind, s.agent) for s in steps] == [("entangle", "A")]


def test_measurement_branches_on_both_outcomes():
    net = load_network(protocol_text("qtp"))
    graph = explore(net)
    first_measures = [
        e for e in graph.edges if e.step is not None
        and e.step.kind == "measure" and e.step.event_idx == 1
        and e.step.agent == "A"
    ]
    outcomes = {e.step.outcome for e in first_measures}
    assert outcomes == {0, 1}
    for e in first_measures:
        assert e.step.probability == pytest.approx(0.5, abs=1e-9)


def test_qsend_transfers_ownership():
    net = load_network(protocol_text("sdc"))
    graph = explore(net)
    moved = [e for e in graph.edges if e.step and e.step.kind == "qsend"]
    assert moved
    for e in moved:
        before, after = graph.nodes[e.src], graph.nodes[e.dst]
        assert "q1" in before.agent("A").owned
        assert "q1" not in after.agent("A").owned
        assert "q1" in after.agent("B").owned


def test_entangling_forgets_known_state():
    net = load_network("""
network forget {
  qubits { q1 = [1, 0]; q2 = [0, 1]; }
  agent A owns q1, q2 knows q1, q2 {
    E(q1, q2);
  }
  formulae { }
}
""")
    graph = explore(net)
    terminal = [
        i for i in range(len(graph.nodes))
        if graph.nodes[i].agent("A").pc == 1
    ]
    (t,) = terminal
    assert graph.nodes[t].agent("A").known == ()


def test_canonical_numbering_is_shuffle_invariant():
    net = load_network(protocol_text("qkd"))
    base = explore(net)
    for seed in (0, 1, 2, 12345):
        other = explore(net, shuffle_seed=seed)
        assert len(other.nodes) == len(base.nodes)
        assert [
            (e.src, e.dst, e.label) for e in other.edges
        ] == [(e.src, e.dst, e.label) for e in base.edges]
        assert other.registry.names() == base.registry.names()
        for (n1, s1), (n2, s2) in zip(
            other.registry.entries, base.registry.entries
        ):
            assert n1 == n2 and s1.close_to(s2)


def test_state_budget_enforced():
    net = load_network(protocol_text("qkd"))
    with pytest.raises(StateBudgetExceededError):
        explore(net, max_states=5)


def test_stutter_loops_only_at_terminals(qtp):
    net, graph, *_ = qtp
    for e in graph.edges:
        if e.step is None:
            assert e.src == e.dst
            node_edges = [x for x in graph.edges if x.src == e.src]
            assert node_edges == [e]


def test_atom_evaluation_on_configurations(qtp):
    net, graph, *_ = qtp
    init = 0
    # ownership flags: Alice starts owning q1 unknown (1), Bob owns q3 (1)
    assert eval_config_atom(graph, init, VarEq("A", "q1", 1))
    assert eval_config_atom(graph, init, VarEq("B", "q3", 1))
    assert not eval_config_atom(graph, init, VarEq("A", "q3", 1))
    assert eval_config_atom(graph, init, Has("A", "q1"))
    assert not eval_config_atom(graph, init, Has("A", "q3"))
    # q1 initially carries its declared state
    assert eval_config_atom(graph, init, QubitIsKet("q1", (0.6, 0.8)))
    assert eval_config_atom(graph, init, QubitEqInit("q1", "q1"))
    # q2 and q3 are entangled: name atoms over them are false
    assert not eval_config_atom(graph, init, QubitIsKet("q2", (1.0, 0.0)))
    assert not eval_config_atom(graph, init, QubitEqQubit("q2", "q3"))
    # an undefined signal compares false, even against itself
    assert not eval_config_atom(graph, init, VarEq("A", "s1", 0))


def test_config_summary_mentions_interned_names(qtp):
    net, graph, *_ = qtp
    text = config_summary(graph, 0)
    assert "qs1" in text and "qs2" in text
    assert "A[pc=0]" in text


def test_dot_output_lists_all_nodes(qtp):
    net, graph, *_ = qtp
    dot = graph.to_dot()
    assert dot.startswith("digraph")
    for i in range(len(graph.nodes)):
        assert f"n{i} " in dot
