import pytest

from ctconsensus.errors import GraphFormatError, InvalidArgument, InvalidFaultSet
from ctconsensus.graph import (
    DiGraph,
    FaultSet,
    complete,
    cycle,
    empty,
    fault_sets,
    from_code,
    from_mask,
    loads,
    pair_index,
    reduced_graph,
    to_code,
    to_mask,
)


def test_masks_roundtrip():
    assert to_mask([0, 2, 5]) == 0b100101
    assert from_mask(0b100101) == frozenset({0, 2, 5})


def test_neighbourhoods_include_self():
    G = DiGraph(3, [(0, 1)])
    assert G.out_neighbors(0) == {0, 1}
    assert G.in_neighbors(1) == {0, 1}
    assert G.in_neighbors(2) == {2}
    assert G.in_degree(1) == 1


def test_rejects_self_loops_and_small_graphs():
    with pytest.raises(InvalidArgument):
        DiGraph(3, [(1, 1)])
    with pytest.raises(InvalidArgument):
        DiGraph(1)


def test_constructors():
    assert len(complete(4).edges) == 12
    assert cycle(3).edges == {(0, 1), (1, 2), (2, 0)}
    assert not empty(2).edges


def test_reduced_graph_examples():
    K3 = complete(3)
    assert reduced_graph(K3, []).edges == K3.edges
    assert reduced_graph(K3, [2]).edges == {(0, 1), (1, 0)}
    H = reduced_graph(cycle(3), [2])
    assert H.edges == {(0, 1)}
    assert H.nodes == {0, 1}


def test_reduced_graph_rejects_unknown_nodes():
    with pytest.raises(InvalidFaultSet):
        reduced_graph(complete(3), [3])


def test_fault_set_bound():
    with pytest.raises(InvalidArgument):
        FaultSet(frozenset({0, 1}), 1)


def test_fault_sets_order_and_properness():
    assert list(fault_sets(3, 2)) == [(), (0,), (1,), (2,), (0, 1), (0, 2), (1, 2)]
    assert (0, 1, 2) not in list(fault_sets(3, 3))


def test_code_roundtrip():
    for code in range(1 << 6):
        assert to_code(from_code(3, code)) == code
    assert len(pair_index(4)) == 12


def test_file_roundtrip():
    G = complete(4)
    assert loads(G.dumps("a comment")) == G


def test_parser_comments_and_blank_lines():
    G = loads("# header\n\nn 3  # three nodes\n0 1\n1 2 # edge\n")
    assert G.edges == {(0, 1), (1, 2)}


@pytest.mark.parametrize(
    "text, lineno",
    [
        ("0 1\n", 1),
        ("n 3\n0 1\n0 1\n", 3),
        ("n 3\n1 1\n", 2),
        ("n 3\n0 3\n", 2),
        ("n 3\n0 x\n", 2),
        ("n 3\n0 1 2\n", 2),
        ("n one\n", 1),
        ("# only a comment\n", None),
    ],
)
def test_parser_errors_carry_line_numbers(text, lineno):
    with pytest.raises(GraphFormatError) as exc:
        loads(text)
    assert exc.value.lineno == lineno
