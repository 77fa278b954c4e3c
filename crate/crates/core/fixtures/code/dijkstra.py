import heapq
from collections import defaultdict


class Graph:
    """Weighted directed graph."""

    def __init__(self):
        self.edges = defaultdict(list)

    def add_edge(self, u, v, w):
        if w < 0:
            raise ValueError("negative weight")
        self.edges[u].append((v, w))


def dijkstra(graph, source):
    dist = {source: 0}
    heap = [(0, source)]
    seen = set()
    while heap:
        d, u = heapq.heappop(heap)
        if u in seen:
            continue
        seen.add(u)
        for v, w in graph.edges[u]:
            nd = d + w
            if v not in dist or nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, v))
    return dist


def shortest_path(graph, source, target):
    dist = dijkstra(graph, source)
    return dist.get(target, -1)


def read_graph(lines):
    g = Graph()
    for line in lines:
        parts = line.split()
        if len(parts) != 3:
            continue
        u, v, w = parts
        g.add_edge(int(u), int(v), int(w))
    return g


def main():
    n, m = map(int, input().split())
    g = read_graph([input() for _ in range(m)])
    s, t = map(int, input().split())
    print(shortest_path(g, s, t))


if __name__ == "__main__":
    main()
