from __future__ import annotations

import pytest

from adgap.graph_model import InfluenceGraph, make_line_instance


@pytest.fixture
def line22() -> InfluenceGraph:
    return make_line_instance(2, 2)


@pytest.fixture
def single_edge():
    def make(p: float) -> InfluenceGraph:
        return InfluenceGraph(2, ((0, 1, p),))

    return make
