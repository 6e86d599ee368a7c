from typing import Iterator, Optional, Tuple

import networkx as nx

Node = Tuple[int, int]


def lattice_walk(rows: int, cols: int, start: Optional[Node] = None) -> Iterator[Tuple[Optional[Node], Node]]:
    """
    Breadth-first order over a rows x cols grid starting at start (the center
    by default). Yields (parent, node); the start node comes first with parent
    None, and every later node has an already visited neighbour as parent.
    """
    if rows < 1 or cols < 1:
        raise ValueError("Grid must have at least one row and one column.")
    grid = nx.grid_2d_graph(rows, cols)
    start = start if start is not None else (rows // 2, cols // 2)
    if start not in grid:
        raise ValueError(f"Start node {start} lies outside the {rows}x{cols} grid.")
    yield None, start
    for parent, node in nx.bfs_edges(grid, start):
        yield parent, node
