"""Graph parameterization: edge-existence/direction vectors, weighted adjacency,
acyclicity polynomials, and rounding to a binary digraph.

An undirected pair {i, j} (i < j) maps to edge index e. Edge e carries an
existence value p_e in [-1, 1] and a direction value q_e in [0, 1]; the
weighted adjacency is W[i, j] = p_e * q_e and W[j, i] = p_e * (1 - q_e).
Decision variables are laid out as q (edge count), then p, then the KKT
multipliers lambda (edge count + 1); the polynomial modules share this layout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .polys import Monomial, Poly

BOX_TOL = 1e-9


@dataclass(frozen=True)
class EdgeIndexMap:
    """Bijection between unordered node pairs {i, j} and edge indices."""

    D: int

    def __post_init__(self):
        if self.D < 1:
            raise InvalidInput("need at least one node")

    @property
    def n_edges(self) -> int:
        return self.D * (self.D - 1) // 2

    def edge_index(self, i: int, j: int) -> int:
        if i == j:
            raise InvalidInput("no self pairs")
        if not (0 <= i < self.D and 0 <= j < self.D):
            raise InvalidInput(f"node out of range for D={self.D}")
        a, b = min(i, j), max(i, j)
        return a * self.D - a * (a + 1) // 2 + (b - a - 1)

    def pair(self, e: int) -> tuple[int, int]:
        if not (0 <= e < self.n_edges):
            raise InvalidInput(f"edge index {e} out of range")
        for i in range(self.D - 1):
            row = self.D - 1 - i
            if e < row:
                return i, i + 1 + e
            e -= row
        raise AssertionError("unreachable")

    def pairs(self):
        return combinations(range(self.D), 2)


# Variable layout over the full decision vector (q, p, lambda).
def q_var(e: int) -> int:
    return e


def p_var(e: int, n_edges: int) -> int:
    return n_edges + e


def lam_var(k: int, n_edges: int) -> int:
    """lambda_0 is the objective multiplier; lambda_{e+1} pairs with edge e."""
    return 2 * n_edges + k


def n_structure_vars(n_edges: int) -> int:
    """q and p only (the bilevel universe)."""
    return 2 * n_edges


def n_total_vars(n_edges: int) -> int:
    """q, p, and lambda (the single-level universe)."""
    return 3 * n_edges + 1


@dataclass
class StructureParams:
    """Edge parameters: p in [-1,1]^E, q in [0,1]^E, lambda >= 0 of length E+1."""

    q: np.ndarray
    p: np.ndarray
    lam: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        self.lam = np.asarray(self.lam, dtype=float)
        if self.q.shape != self.p.shape:
            raise InvalidInput("p and q must have equal length")
        if self.lam.shape != (self.q.size + 1,):
            raise InvalidInput("lambda must have length n_edges + 1")
        if np.any(np.abs(self.p) > 1 + BOX_TOL):
            raise InvalidInput("p outside [-1, 1]")
        if np.any(self.q < -BOX_TOL) or np.any(self.q > 1 + BOX_TOL):
            raise InvalidInput("q outside [0, 1]")
        if np.any(self.lam < -BOX_TOL):
            raise InvalidInput("lambda must be nonnegative")
        self.p = np.clip(self.p, -1.0, 1.0)
        self.q = np.clip(self.q, 0.0, 1.0)
        self.lam = np.maximum(self.lam, 0.0)

    @property
    def n_edges(self) -> int:
        return self.q.size

    def to_vector(self) -> np.ndarray:
        """Concatenated (q, p, lambda) in the shared variable layout."""
        return np.concatenate([self.q, self.p, self.lam])

    @staticmethod
    def from_vector(x: np.ndarray, n_edges: int) -> "StructureParams":
        x = np.asarray(x, dtype=float)
        if x.size != n_total_vars(n_edges):
            raise InvalidInput("vector length does not match layout")
        return StructureParams(
            q=x[:n_edges], p=x[n_edges:2 * n_edges], lam=x[2 * n_edges:]
        )


def assemble_W(params: StructureParams, D: int) -> np.ndarray:
    """Weighted adjacency W with W[i,j] = p_e q_e, W[j,i] = p_e (1 - q_e), i < j."""
    emap = EdgeIndexMap(D)
    if params.n_edges != emap.n_edges:
        raise InvalidInput("parameter length does not match D")
    W = np.zeros((D, D))
    for i, j in emap.pairs():
        e = emap.edge_index(i, j)
        W[i, j] = params.p[e] * params.q[e]
        W[j, i] = params.p[e] * (1.0 - params.q[e])
    return W


def _walk_entry(i: int, j: int, emap: EdgeIndexMap, nvars: int) -> Poly:
    """Walk-matrix entry A[i,j] = p_e^2 q_e (i<j) or p_e^2 (1-q_e) (i>j).

    The p^2 factor keeps entries nonnegative on the box while staying at
    degree 3, so trace(A^k) vanishes exactly when no length-k cycle has all
    of its edges active.
    """
    e = emap.edge_index(i, j)
    p2 = Monomial.variable(p_var(e, emap.n_edges), 2)
    q = Monomial.variable(q_var(e))
    if i < j:
        return Poly({p2 * q: 1.0}, nvars)
    return Poly({p2: 1.0, p2 * q: -1.0}, nvars)


def acyclicity_terms(D: int, k_max: int, nvars: int | None = None) -> list[tuple[int, tuple[int, ...], Poly]]:
    """Closed-walk polynomials split per supporting edge set.

    Returns (k, edge-indices, poly) triples; summing the polys of a given k
    yields trace(A^k). Each piece is nonnegative on the box domain, so the
    split preserves the zero set of the aggregate. Walk lengths 2 and 3 are
    split per pair / per triangle; longer lengths are kept aggregated.
    """
    if not (2 <= k_max <= D):
        raise InvalidInput(f"k_max must be in [2, {D}]")
    emap = EdgeIndexMap(D)
    nv = nvars if nvars is not None else n_structure_vars(emap.n_edges)
    out: list[tuple[int, tuple[int, ...], Poly]] = []
    for i, j in emap.pairs():
        piece = (_walk_entry(i, j, emap, nv) * _walk_entry(j, i, emap, nv)).scale(2.0)
        out.append((2, (emap.edge_index(i, j),), piece))
    if k_max >= 3:
        for i, j, l in combinations(range(D), 3):
            fwd = _walk_entry(i, j, emap, nv) * _walk_entry(j, l, emap, nv) * _walk_entry(l, i, emap, nv)
            bwd = _walk_entry(i, l, emap, nv) * _walk_entry(l, j, emap, nv) * _walk_entry(j, i, emap, nv)
            piece = (fwd + bwd).scale(3.0)
            edges = tuple(sorted(emap.edge_index(a, b) for a, b in ((i, j), (j, l), (i, l))))
            out.append((3, edges, piece))
    for k in range(4, k_max + 1):
        out.append((k, tuple(range(emap.n_edges)), _trace_power(D, k, emap, nv)))
    return out


def _trace_power(D: int, k: int, emap: EdgeIndexMap, nvars: int) -> Poly:
    A = [[_walk_entry(i, j, emap, nvars) if i != j else Poly.zero(nvars) for j in range(D)] for i in range(D)]
    M = A
    for _ in range(k - 1):
        M = [
            [
                sum((M[i][l] * A[l][j] for l in range(D)), Poly.zero(nvars))
                for j in range(D)
            ]
            for i in range(D)
        ]
    return sum((M[i][i] for i in range(D)), Poly.zero(nvars))


def acyclicity_polys(D: int, k_max: int, nvars: int | None = None) -> list[Poly]:
    """Aggregate closed-walk counts h_k = trace(A^k) for k = 2..k_max."""
    if not (2 <= k_max <= D):
        raise InvalidInput(f"k_max must be in [2, {D}]")
    emap = EdgeIndexMap(D)
    nv = nvars if nvars is not None else n_structure_vars(emap.n_edges)
    polys = []
    for k in range(2, k_max + 1):
        total = Poly.zero(nv)
        for kk, _, piece in acyclicity_terms(D, k_max, nv):
            if kk == k:
                total = total + piece
        polys.append(total)
    return polys


def round_params(params: StructureParams, D: int, tau_p: float = 0.3) -> np.ndarray:
    """Threshold |p_e| >= tau_p into a 0/1 adjacency; q_e >= 0.5 orients i -> j."""
    if not (0.0 < tau_p < 1.0):
        raise InvalidInput("tau_p must lie strictly inside (0, 1)")
    emap = EdgeIndexMap(D)
    adj = np.zeros((D, D), dtype=int)
    for i, j in emap.pairs():
        e = emap.edge_index(i, j)
        if abs(params.p[e]) >= tau_p:
            if params.q[e] >= 0.5:
                adj[i, j] = 1
            else:
                adj[j, i] = 1
    return adj


# -- digraph utilities ---------------------------------------------------

def find_cycle(adj: np.ndarray) -> list[tuple[int, int]] | None:
    """A directed cycle as a list of edges, or None if the graph is acyclic."""
    D = adj.shape[0]
    color = [0] * D  # 0 unvisited, 1 on stack, 2 done
    parent: dict[int, int] = {}

    def dfs(u: int):
        color[u] = 1
        for v in range(D):
            if not adj[u, v]:
                continue
            if color[v] == 0:
                parent[v] = u
                found = dfs(v)
                if found is not None:
                    return found
            elif color[v] == 1:
                cycle = [(u, v)]
                w = u
                while w != v:
                    cycle.append((parent[w], w))
                    w = parent[w]
                cycle.reverse()
                return cycle
        color[u] = 2
        return None

    for s in range(D):
        if color[s] == 0:
            found = dfs(s)
            if found is not None:
                return found
    return None


def is_acyclic(adj: np.ndarray) -> bool:
    return find_cycle(adj) is None


def topological_order(adj: np.ndarray) -> list[int]:
    D = adj.shape[0]
    indeg = adj.sum(axis=0).astype(int)
    queue = [i for i in range(D) if indeg[i] == 0]
    order: list[int] = []
    while queue:
        u = min(queue)
        queue.remove(u)
        order.append(u)
        for v in range(D):
            if adj[u, v]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    queue.append(v)
    if len(order) != D:
        raise InvalidInput("graph contains a cycle")
    return order


# -- graph JSON (shared with the data generator and evaluator) ------------

def graph_to_json(adj: np.ndarray, extra: dict | None = None) -> dict:
    D = int(adj.shape[0])
    edges = [[int(i), int(j)] for i in range(D) for j in range(D) if adj[i, j]]
    doc = {"D": D, "edges": edges}
    if extra:
        doc.update(extra)
    return doc


def graph_from_json(doc: dict) -> np.ndarray:
    D = int(doc["D"])
    adj = np.zeros((D, D), dtype=int)
    for i, j in doc["edges"]:
        adj[int(i), int(j)] = 1
    return adj


def save_graph(path: str | Path, adj: np.ndarray, extra: dict | None = None) -> None:
    Path(path).write_text(json.dumps(graph_to_json(adj, extra), indent=2, sort_keys=True))


def load_graph(path: str | Path) -> tuple[np.ndarray, dict]:
    doc = json.loads(Path(path).read_text())
    return graph_from_json(doc), doc
