"""Shared helpers: bundled protocol loading and the full check pipeline."""

import importlib.resources

import pytest

from dmcverify.checker import build_state_graph, check_all, model_from_is
from dmcverify.isbuilder import assemble, crosscheck, translate_config
from dmcverify.parser import load_network
from dmcverify.semantics import explore


def protocol_text(name):
    res = importlib.resources.files("dmcverify") / "protocols" / f"{name}.dmc"
    return res.read_text(encoding="utf-8")


def protocol_path(name):
    return str(importlib.resources.files("dmcverify") / "protocols" / f"{name}.dmc")


def run_pipeline(name, shuffle_seed=None):
    """load -> explore -> assemble -> crosscheck -> execute -> model-check."""
    net = load_network(protocol_text(name))
    graph = explore(net, shuffle_seed=shuffle_seed)
    is_ = assemble(net, graph)
    xrep = crosscheck(graph, is_)
    sg = build_state_graph(is_)
    names = {
        translate_config(is_, graph, i): graph.node_name(i)
        for i in range(len(graph.nodes))
    }
    state_names = [names.get(st, f"S{k}") for k, st in enumerate(sg.states)]
    model = model_from_is(is_, sg, state_names)
    report = check_all(model, net.spec.formulas)
    return net, graph, is_, xrep, model, report


@pytest.fixture(scope="session")
def qtp():
    return run_pipeline("qtp")


@pytest.fixture(scope="session")
def qkd():
    return run_pipeline("qkd")


@pytest.fixture(scope="session")
def sdc():
    return run_pipeline("sdc")
