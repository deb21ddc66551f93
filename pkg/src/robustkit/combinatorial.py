"""Structured robust problems: budgeted-weight knapsack and interval min-max
regret shortest path, each with a brute-force reference solver.
"""

import heapq
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import InstanceError, LimitError

log = logging.getLogger(__name__)

KNAPSACK_BRUTE_MAX = 20
PATH_BRUTE_MAX_NODES = 12
STRATEGIES = ("worst-case-branching", "midpoint-branching")


# ---------------------------------------------------------------------------
# knapsack


def _nonneg_int(value, what):
    if isinstance(value, bool) or int(value) != value or value < 0:
        raise InstanceError("BAD_KNAPSACK", f"{what} must be a nonnegative integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class KnapsackInstance:
    items: tuple  # (profit, weight, deviation)
    capacity: int
    gamma: int

    def __post_init__(self):
        items = []
        for i, (p, w, d) in enumerate(self.items):
            if not (math.isfinite(p) and p >= 0):
                raise InstanceError("BAD_KNAPSACK", f"item {i}: profit must be finite and nonnegative")
            items.append((float(p), _nonneg_int(w, f"item {i} weight"), _nonneg_int(d, f"item {i} deviation")))
        object.__setattr__(self, "items", tuple(items))
        object.__setattr__(self, "capacity", _nonneg_int(self.capacity, "capacity"))
        object.__setattr__(self, "gamma", _nonneg_int(self.gamma, "gamma"))

    @property
    def n(self):
        return len(self.items)

    def worst_weight(self, chosen):
        """Nominal weight of ``chosen`` plus its ``gamma`` largest deviations."""
        devs = sorted((self.items[i][2] for i in chosen), reverse=True)
        return sum(self.items[i][1] for i in chosen) + sum(devs[: self.gamma])


@dataclass(frozen=True)
class KnapsackResult:
    profit: float
    chosen: tuple  # item indices, ascending
    worst_weight: int


def cc_knapsack_dp(inst):
    """Exact optimum of the knapsack with at most ``gamma`` weights at their upper value.

    Items are scanned by nonincreasing deviation, so the first ``gamma`` items
    chosen are exactly those whose deviation counts. The table is indexed by
    (chosen so far capped at gamma, capacity used); time and memory are
    O(gamma * n * capacity).
    """
    n, c, G = inst.n, inst.capacity, inst.gamma
    order = sorted(range(n), key=lambda i: (-inst.items[i][2], i))
    best = np.full((G + 1, c + 1), -np.inf)
    best[0, 0] = 0.0
    shape = best.shape
    trail = []
    for i in order:
        p, w, d = inst.items[i]
        new = best.copy()
        take = np.zeros(shape, dtype=bool)
        full = np.zeros(shape, dtype=bool)  # taken from the capped state k = gamma
        for k2 in range(G + 1):
            sources = []
            if k2 >= 1:
                sources.append((k2 - 1, w + d, False))
            if k2 == G:
                sources.append((G, w, True))
            for k, cost, capped in sources:
                if cost > c:
                    continue
                cand = best[k, : c + 1 - cost] + p
                better = cand > new[k2, cost:]
                new[k2, cost:][better] = cand[better]
                take[k2, cost:][better] = True
                full[k2, cost:][better] = capped
        best = new
        trail.append((np.packbits(take, axis=None), np.packbits(full, axis=None)))
    k, cap = divmod(int(np.argmax(best)), c + 1)
    profit = float(best[k, cap])
    chosen = []
    size = shape[0] * shape[1]
    for step in range(n - 1, -1, -1):
        take, full = trail[step]
        at = k * (c + 1) + cap
        if not np.unpackbits(take, count=size)[at]:
            continue
        i = order[step]
        _, w, d = inst.items[i]
        chosen.append(i)
        if np.unpackbits(full, count=size)[at]:
            cap -= w
        else:
            k, cap = k - 1, cap - w - d
    chosen = tuple(sorted(chosen))
    return KnapsackResult(profit, chosen, inst.worst_weight(chosen))


def knapsack_brute_force(inst):
    """Best subset by exhaustive enumeration (first in bitmask order on ties)."""
    n = inst.n
    if n > KNAPSACK_BRUTE_MAX:
        raise LimitError("SIZE_LIMIT", f"brute force handles at most {KNAPSACK_BRUTE_MAX} items, got {n}")
    p = np.array([it[0] for it in inst.items])
    w = np.array([it[1] for it in inst.items], dtype=np.int64)
    d = np.array([it[2] for it in inst.items], dtype=np.int64)
    masks = np.arange(1 << n, dtype=np.int64)
    chosen = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)
    order = np.argsort(-d, kind="stable")
    by_dev = chosen[:, order]
    counted = by_dev & (np.cumsum(by_dev, axis=1) <= inst.gamma)
    weight = chosen @ w + counted @ d[order]
    profit = np.where(weight <= inst.capacity, chosen @ p, -np.inf)
    m = int(np.argmax(profit))
    picked = tuple(int(i) for i in np.flatnonzero(chosen[m]))
    return KnapsackResult(float(profit[m]), picked, inst.worst_weight(picked))


def knapsack_from_dict(doc):
    try:
        items = tuple((it["profit"], it["weight"], it.get("deviation", 0)) for it in doc["items"])
        return KnapsackInstance(items, doc["capacity"], doc.get("gamma", 0))
    except (KeyError, TypeError) as exc:
        raise InstanceError("BAD_KNAPSACK", f"malformed knapsack document: {exc}") from None


# ---------------------------------------------------------------------------
# interval shortest path


@dataclass(frozen=True)
class Arc:
    tail: int
    head: int
    lower: float
    upper: float


@dataclass(frozen=True)
class IntervalGraph:
    nodes: int
    source: int
    target: int
    arcs: tuple

    def __post_init__(self):
        if self.source == self.target:
            raise InstanceError("BAD_GRAPH", "source and target coincide")
        for v in (self.source, self.target):
            if not 0 <= v < self.nodes:
                raise InstanceError("BAD_GRAPH", f"node {v} out of range")
        arcs = []
        for i, a in enumerate(self.arcs):
            a = a if isinstance(a, Arc) else Arc(*a)
            if not (0 <= a.tail < self.nodes and 0 <= a.head < self.nodes):
                raise InstanceError("BAD_GRAPH", f"arc {i}: endpoint out of range")
            if not (math.isfinite(a.lower) and math.isfinite(a.upper) and 0 <= a.lower <= a.upper):
                raise InstanceError("BAD_GRAPH", f"arc {i}: need finite 0 <= lower <= upper")
            arcs.append(Arc(a.tail, a.head, float(a.lower), float(a.upper)))
        object.__setattr__(self, "arcs", tuple(arcs))

    @property
    def lower(self):
        return [a.lower for a in self.arcs]

    @property
    def upper(self):
        return [a.upper for a in self.arcs]

    @property
    def midpoint(self):
        return [(a.lower + a.upper) / 2.0 for a in self.arcs]


@dataclass(frozen=True)
class PathSolution:
    arcs: tuple
    regret: float
    nodes: int = 0


def graph_from_dict(doc):
    try:
        arcs = tuple(Arc(int(a["from"]), int(a["to"]), float(a["lower"]), float(a["upper"])) for a in doc["arcs"])
        return IntervalGraph(int(doc["nodes"]), int(doc["source"]), int(doc["target"]), arcs)
    except (KeyError, TypeError, ValueError) as exc:
        raise InstanceError("BAD_GRAPH", f"malformed graph document: {exc}") from None


def graph_to_dict(graph):
    return {
        "nodes": graph.nodes,
        "source": graph.source,
        "target": graph.target,
        "arcs": [{"from": a.tail, "to": a.head, "lower": a.lower, "upper": a.upper} for a in graph.arcs],
    }


def load_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise InstanceError("SYNTAX", exc.msg, exc.lineno, exc.colno) from None


def _distances_to(graph, lengths, end, skip_arcs=frozenset(), skip_nodes=frozenset()):
    """Dijkstra on the reversed graph: distance from every node to ``end``."""
    incoming = [[] for _ in range(graph.nodes)]
    for i, a in enumerate(graph.arcs):
        if i not in skip_arcs and a.tail not in skip_nodes and a.head not in skip_nodes:
            incoming[a.head].append(i)
    dist = [math.inf] * graph.nodes
    if end in skip_nodes:
        return dist
    dist[end] = 0.0
    heap = [(0.0, end)]
    while heap:
        dv, v = heapq.heappop(heap)
        if dv > dist[v]:
            continue
        for i in incoming[v]:
            u = graph.arcs[i].tail
            du = dv + lengths[i]
            if du < dist[u]:
                dist[u] = du
                heapq.heappush(heap, (du, u))
    return dist


def _tight(dist_u, length, dist_v):
    return abs(dist_u - (length + dist_v)) <= 1e-12 * max(1.0, abs(dist_u))


def _lex_path(graph, lengths, start, dist, skip_arcs, skip_nodes):
    """Lexicographically smallest arc sequence among shortest simple start-end paths."""
    out_arcs = [[] for _ in range(graph.nodes)]
    for i, a in enumerate(graph.arcs):
        if i not in skip_arcs and a.tail not in skip_nodes and a.head not in skip_nodes:
            if math.isfinite(dist[a.head]) and _tight(dist[a.tail], lengths[i], dist[a.head]):
                out_arcs[a.tail].append(i)
    end = graph.target

    def reaches(v, visited):
        seen, stack = {v}, [v]
        while stack:
            u = stack.pop()
            if u == end:
                return True
            for i in out_arcs[u]:
                h = graph.arcs[i].head
                if h not in seen and h not in visited:
                    seen.add(h)
                    stack.append(h)
        return False

    path, visited, v = [], {start}, start
    while v != end:
        for i in out_arcs[v]:
            h = graph.arcs[i].head
            if h not in visited and reaches(h, visited):
                path.append(i)
                visited.add(h)
                v = h
                break
        else:  # pragma: no cover - dist guarantees a tight continuation
            raise RuntimeError("no tight continuation")
    return path


def _shortest(graph, lengths, start=None, skip_arcs=frozenset(), skip_nodes=frozenset()):
    start = graph.source if start is None else start
    dist = _distances_to(graph, lengths, graph.target, skip_arcs, skip_nodes)
    if not math.isfinite(dist[start]):
        return None
    return dist[start], _lex_path(graph, lengths, start, dist, skip_arcs, skip_nodes)


def shortest_path(graph, lengths):
    """Shortest source-target distance and path for nonnegative arc ``lengths``.

    Among shortest paths the one with the lexicographically smallest arc-index
    sequence is returned.
    """
    lengths = [float(x) for x in lengths]
    if len(lengths) != len(graph.arcs) or any(not (x >= 0) for x in lengths):
        raise InstanceError("BAD_LENGTHS", "need one nonnegative length per arc")
    out = _shortest(graph, lengths)
    if out is None:
        raise InstanceError("UNREACHABLE", f"target {graph.target} unreachable from {graph.source}")
    return out[0], tuple(out[1])


def _check_path(graph, path):
    v, seen = graph.source, {graph.source}
    for i in path:
        if not 0 <= i < len(graph.arcs) or graph.arcs[i].tail != v:
            raise InstanceError("INVALID_PATH", f"arc {i} does not continue the path at node {v}")
        v = graph.arcs[i].head
        if v in seen:
            raise InstanceError("INVALID_PATH", f"node {v} visited twice")
        seen.add(v)
    if v != graph.target:
        raise InstanceError("INVALID_PATH", "path does not end at the target")


def regret_of_path(graph, path):
    """Worst-case regret: upper lengths on the path, lower lengths elsewhere."""
    path = tuple(path)
    _check_path(graph, path)
    on = set(path)
    lengths = [a.upper if i in on else a.lower for i, a in enumerate(graph.arcs)]
    best = _distances_to(graph, lengths, graph.target)[graph.source]
    return max(0.0, math.fsum(lengths[i] for i in path) - best)


def midpoint_path(graph):
    """Shortest path for interval midpoints; its regret is at most twice the optimum."""
    _, path = shortest_path(graph, graph.midpoint)
    return PathSolution(path, regret_of_path(graph, path))


def _better(reg, path, incumbent):
    return reg < incumbent[0] - 1e-12 or (reg <= incumbent[0] + 1e-12 and path < incumbent[1])


def default_root_bound(graph, midpoint_regret):
    return midpoint_regret / 2.0


def regret_path_bb(graph, strategy="midpoint-branching", max_nodes=1_000_000, root_bound=default_root_bound,
                   on_node=None):
    """Minimum-regret path by branch-and-bound over path prefixes.

    A node fixes a prefix I from the source and a set O of excluded arcs. Its
    bound is SP_I(xi) - SP(xi) for xi = upper lengths on I and lower lengths
    elsewhere, where SP_I is restricted to completions of I avoiding O and SP
    is over the whole graph. The node's branching path (worst-case or midpoint
    completion) b_1..b_k splits it into children that keep b_1..b_{j-1} and
    exclude b_j. ``on_node(prefix, excluded, bound)`` is called for every
    explored node.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    mid = midpoint_path(graph)
    incumbent = (mid.regret, mid.arcs)
    lower, upper, midpoint = graph.lower, graph.upper, graph.midpoint
    stack = [((), frozenset(), root_bound(graph, mid.regret))]
    nodes = 0
    while stack:
        prefix, out, parent_bound = stack.pop()
        if parent_bound >= incumbent[0] - 1e-9:
            continue
        if nodes >= max_nodes:
            raise LimitError("NODE_LIMIT", f"more than {max_nodes} nodes",
                             best=PathSolution(incumbent[1], incumbent[0], nodes))
        nodes += 1
        end = graph.arcs[prefix[-1]].head if prefix else graph.source
        banned = {graph.source} | {graph.arcs[i].head for i in prefix[:-1]}
        banned.discard(end)
        on = set(prefix)
        xi = [upper[i] if i in on else lower[i] for i in range(len(graph.arcs))]
        rest = _shortest(graph, xi, end, out, frozenset(banned))
        if rest is None:
            continue
        full = _distances_to(graph, xi, graph.target)[graph.source]
        bound = max(parent_bound, math.fsum(xi[i] for i in prefix) + rest[0] - full)
        if on_node is not None:
            on_node(prefix, out, bound)
        wc_path = prefix + tuple(rest[1])
        reg = regret_of_path(graph, wc_path)
        if _better(reg, wc_path, incumbent):
            incumbent = (reg, wc_path)
        if strategy == "midpoint-branching":
            branch = prefix + tuple(_shortest(graph, midpoint, end, out, frozenset(banned))[1])
            reg = regret_of_path(graph, branch)
            if _better(reg, branch, incumbent):
                incumbent = (reg, branch)
        else:
            branch = wc_path
        if bound >= incumbent[0] - 1e-9:
            continue
        free = branch[len(prefix):]
        children = [(prefix + free[:j], out | {free[j]}, bound) for j in range(len(free))]
        stack.extend(reversed(children))
    log.info("regret_path_bb strategy=%s nodes=%d regret=%g", strategy, nodes, incumbent[0])
    return PathSolution(incumbent[1], incumbent[0], nodes)


def simple_paths(graph):
    """All simple source-target paths in lexicographic arc-index order."""
    out_arcs = [[] for _ in range(graph.nodes)]
    for i, a in enumerate(graph.arcs):
        out_arcs[a.tail].append(i)
    path, visited = [], {graph.source}

    def walk(v):
        if v == graph.target:
            yield tuple(path)
            return
        for i in out_arcs[v]:
            h = graph.arcs[i].head
            if h not in visited:
                path.append(i)
                visited.add(h)
                yield from walk(h)
                visited.discard(h)
                path.pop()

    yield from walk(graph.source)


def regret_path_brute_force(graph):
    """Minimum-regret path by enumerating every simple path (first on ties)."""
    if graph.nodes > PATH_BRUTE_MAX_NODES:
        raise LimitError("SIZE_LIMIT", f"brute force handles at most {PATH_BRUTE_MAX_NODES} nodes")
    best = None
    for path in simple_paths(graph):
        reg = regret_of_path(graph, path)
        if best is None or reg < best.regret - 1e-12:
            best = PathSolution(path, reg)
    if best is None:
        raise InstanceError("UNREACHABLE", f"target {graph.target} unreachable from {graph.source}")
    return best
