"""Matplotlib rendering of configuration graphs."""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import networkx as nx

from .semantics import config_summary


def config_graph_figure(graph, path, max_label_nodes=60):
    """Draw the configuration graph to an image file.

    Solid arrows are transitions (labelled with the triggering event);
    dashed lines join configurations an agent cannot distinguish (drawn for
    the first agent whose relation is not the identity, to keep the picture
    readable).  Node annotations are dropped on large graphs.
    """
    g = nx.DiGraph()
    n = len(graph.nodes)
    for i in range(n):
        g.add_node(i)
    for e in graph.edges:
        if e.src != e.dst:
            g.add_edge(e.src, e.dst, label=e.label)

    try:
        layers = {}
        for i in range(n):
            layers[i] = nx.shortest_path_length(
                g, source=min(graph.initials)
            ).get(i, 0)
        pos = nx.multipartite_layout(
            nx.DiGraph(
                [(u, v) for u, v in g.edges()] + [(i, i) for i in g.nodes()]
            ),
            subset_key={v: [k for k, d in layers.items() if d == v]
                        for v in set(layers.values())},
        )
    except Exception:
        pos = nx.spring_layout(g, seed=7)

    fig, ax = plt.subplots(figsize=(max(8, n * 0.5), max(6, n * 0.35)))
    nx.draw_networkx_nodes(
        g, pos, ax=ax, node_size=600,
        node_color=["#ffd98e" if i in graph.initials else "#cfe2ff"
                    for i in g.nodes()],
        edgecolors="#444444",
    )
    nx.draw_networkx_edges(g, pos, ax=ax, arrowsize=12, edge_color="#555555")
    nx.draw_networkx_labels(
        g, pos, ax=ax,
        labels={i: graph.node_name(i) for i in g.nodes()}, font_size=8,
    )
    if n <= max_label_nodes:
        nx.draw_networkx_edge_labels(
            g, pos, ax=ax,
            edge_labels={(u, v): d["label"] for u, v, d in g.edges(data=True)},
            font_size=6,
        )

    # epistemic relation of the first agent with a non-trivial partition
    for agent in [a.name for a in graph.net.spec.agents]:
        classes = {}
        for i in range(n):
            classes.setdefault(graph.nodes[i].local_view(agent), []).append(i)
        pairs = [
            (grp[k], grp[k + 1])
            for grp in classes.values() if len(grp) > 1
            for k in range(len(grp) - 1)
        ]
        if pairs:
            nx.draw_networkx_edges(
                nx.Graph(pairs), pos, ax=ax, style="dashed",
                edge_color="#c06060", arrows=False, width=0.8,
            )
            ax.plot([], [], linestyle="--", color="#c06060",
                    label=f"{agent} indistinguishable")
            ax.legend(loc="lower right", fontsize=7)
            break

    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
