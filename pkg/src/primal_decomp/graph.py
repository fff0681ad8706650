"""Static undirected communication graphs."""
from collections import deque
from dataclasses import dataclass, field

from . import rng as _rng
from .errors import GenerationError, MalformedInputError


@dataclass(frozen=True)
class Graph:
    n: int
    edges: frozenset
    _adj: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n < 1:
            raise MalformedInputError("a graph needs at least one vertex")
        norm = set()
        for i, j in self.edges:
            if i == j:
                raise MalformedInputError(f"self-loop at vertex {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise MalformedInputError(f"edge ({i}, {j}) out of range")
            norm.add((min(i, j), max(i, j)))
        adj = [[] for _ in range(self.n)]
        for i, j in norm:
            adj[i].append(j)
            adj[j].append(i)
        object.__setattr__(self, "edges", frozenset(norm))
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))

    def degree(self, i):
        return len(neighbors(self, i))


def neighbors(g: Graph, i: int):
    if not 0 <= i < g.n:
        raise MalformedInputError(f"vertex {i} out of range for n={g.n}")
    return list(g._adj[i])


def is_connected(g: Graph) -> bool:
    seen = [False] * g.n
    seen[0] = True
    queue = deque([0])
    count = 1
    while queue:
        v = queue.popleft()
        for w in g._adj[v]:
            if not seen[w]:
                seen[w] = True
                count += 1
                queue.append(w)
    return count == g.n


def complete_graph(n):
    return Graph(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))


def generate_erdos_renyi(n: int, p: float, seed: int, max_retries: int = 1000) -> Graph:
    """Draw G(n, p) graphs from one stream until a connected one appears.

    Pairs are visited in lexicographic order ``(0,1), (0,2), ..., (n-2,n-1)``;
    a pair is kept when its uniform draw is ``< p``.
    """
    if n < 1:
        raise MalformedInputError("n must be >= 1")
    if not 0.0 <= p <= 1.0:
        raise MalformedInputError("edge probability must lie in [0, 1]")
    gen = _rng.stream(seed, _rng.GRAPH)
    for _ in range(max(1, max_retries)):
        edges = [(i, j) for i in range(n) for j in range(i + 1, n) if gen.random() < p]
        g = Graph(n, frozenset(edges))
        if is_connected(g):
            return g
    raise GenerationError(f"no connected G({n}, {p}) graph after {max_retries} draws")
