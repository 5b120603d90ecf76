"""Island detection, topology classification and chain covers.

Only binary joints form graph edges; unary (world) joints ride on a body.
"""
from collections import deque
from dataclasses import dataclass, field

from .problem import EmptyScene


@dataclass(frozen=True)
class Topology:
    kind: str  # "chain", "tree", "loop" or "graph"
    breakers: tuple = ()
    order: tuple = ()  # body path for chains

    def __str__(self):
        if self.kind == "loop":
            return f"Loop(breakers={len(self.breakers)})"
        return self.kind.capitalize()


def _edges(n_bodies, joints):
    """joints: iterable of (a, b) with b possibly None."""
    adj = [[] for _ in range(n_bodies)]
    for k, (a, b) in enumerate(joints):
        if b is not None:
            adj[a].append((b, k))
            adj[b].append((a, k))
    return adj


def islands(n_bodies, joints):
    """Connected components as (bodies, joint indices), ordered by first body."""
    adj = _edges(n_bodies, joints)
    comp = [-1] * n_bodies
    out = []
    for s in range(n_bodies):
        if comp[s] >= 0:
            continue
        cid = len(out)
        comp[s] = cid
        bodies, dq = [], deque([s])
        while dq:
            u = dq.popleft()
            bodies.append(u)
            for v, _ in adj[u]:
                if comp[v] < 0:
                    comp[v] = cid
                    dq.append(v)
        out.append((sorted(bodies), []))
    for k, (a, _) in enumerate(joints):
        out[comp[a]][1].append(k)
    return out


def _is_forest(nodes, adj, removed):
    seen = set()
    for s in nodes:
        if s in removed or s in seen:
            continue
        n_nodes, n_edge_ends = 0, 0
        stack = [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            n_nodes += 1
            for v, _ in adj[u]:
                if v in removed:
                    continue
                n_edge_ends += 1
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        if n_edge_ends // 2 != n_nodes - 1:
            return False
    return True


def _cyclomatic(nodes, adj, removed):
    live = [u for u in nodes if u not in removed]
    e = sum(1 for u in live for v, _ in adj[u] if v not in removed) // 2
    seen, comps = set(), 0
    for s in live:
        if s in seen:
            continue
        comps += 1
        stack = [s]
        seen.add(s)
        while stack:
            u = stack.pop()
            for v, _ in adj[u]:
                if v not in removed and v not in seen:
                    seen.add(v)
                    stack.append(v)
    return e - len(live) + comps


def chain_order(nodes, adj):
    """Body sequence of a path graph (starting from the lowest-index end)."""
    if len(nodes) == 1:
        return tuple(nodes)
    ends = [u for u in nodes if len(adj[u]) == 1]
    start = min(ends)
    order, prev, u = [start], None, start
    while True:
        nxt = [v for v, _ in adj[u] if v != prev]
        if not nxt:
            break
        prev, u = u, nxt[0]
        order.append(u)
    return tuple(order)


def classify_topology(n_bodies, joints, max_breakers=4):
    """Classify a single connected island.

    ``joints`` is a list of (a, b) body pairs, ``b`` may be ``None``.
    """
    if n_bodies == 0:
        raise EmptyScene("island has no bodies")
    adj = _edges(n_bodies, joints)
    nodes = list(range(n_bodies))
    n_edges = sum(len(a) for a in adj) // 2
    if n_edges == n_bodies - 1 and _is_forest(nodes, adj, set()):
        if all(len(a) <= 2 for a in adj):
            return Topology("chain", order=chain_order(nodes, adj))
        return Topology("tree")
    removed = []
    cyc = _cyclomatic(nodes, adj, set())
    degs = sorted((len(a) - 1 for a in adj), reverse=True)
    if cyc > sum(degs[:max_breakers]):
        return Topology("graph")
    for _ in range(max_breakers):
        best, best_cyc = None, None
        for u in nodes:
            if u in removed:
                continue
            c = _cyclomatic(nodes, adj, set(removed) | {u})
            if best_cyc is None or c < best_cyc:
                best, best_cyc = u, c
        removed.append(best)
        if best_cyc == 0 and len(removed) < n_bodies:
            return Topology("loop", breakers=tuple(removed))
    return Topology("graph")


def chain_cover(n_bodies, joints):
    """Split binary joints into body paths; unary joints become singleton chains.

    Each path starts from the highest-degree body with unused joints and
    walks to the farthest reachable body (BFS), then extends greedily.
    Returns lists of joint indices ordered along their path.
    """
    adj = _edges(n_bodies, joints)
    used = [False] * len(joints)
    chains = []

    def free(u):
        return [(v, k) for v, k in adj[u] if not used[k]]

    while True:
        cand = [u for u in range(n_bodies) if free(u)]
        if not cand:
            break
        start = max(cand, key=lambda u: (len(free(u)), -u))
        # farthest body from start over unused joints, paths kept simple
        parent = {start: None}
        dq = deque([start])
        last = start
        while dq:
            u = dq.popleft()
            last = u
            for v, k in free(u):
                if v not in parent:
                    parent[v] = (u, k)
                    dq.append(v)
        path_joints, path_bodies = [], [last]
        u = last
        while parent[u] is not None:
            u, k = parent[u]
            path_joints.append(k)
            path_bodies.append(u)
        for k in path_joints:
            used[k] = True
        on_path = set(path_bodies)
        # extend from the start end while a free joint leads off the path
        u = path_bodies[-1]
        while True:
            nxt = [(v, k) for v, k in free(u) if v not in on_path]
            if not nxt:
                break
            v, k = nxt[0]
            used[k] = True
            path_joints.append(k)
            on_path.add(v)
            u = v
        chains.append(path_joints)
    for k, (_, b) in enumerate(joints):
        if b is None:
            chains.append([k])
    return chains
