from __future__ import annotations

from hypothesis import strategies as st

from adgap.graph_model import InfluenceGraph

DYADIC = (0.25, 0.5, 0.75)


@st.composite
def small_graphs(draw, max_nodes: int = 5, max_edges: int = 6, probs=DYADIC):
    """Arbitrary directed graphs without self-loops or parallel edges."""
    n = draw(st.integers(1, max_nodes))
    pairs = [(s, d) for s in range(n) for d in range(n) if s != d]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=max_edges)) if pairs else []
    edges = tuple((s, d, draw(st.sampled_from(probs))) for s, d in chosen)
    return InfluenceGraph(n, edges)

