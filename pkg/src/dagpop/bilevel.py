"""Bilevel program assembly and its single-level KKT reformulation.

The upper level minimizes the mixed interventional/observational score
subject to acyclicity and direction-box constraints; the lower level ties the
edge-existence vector p to the observational score. Replacing the lower
problem by its Fritz-John first-order system yields a single polynomial
program over (q, p, lambda) whose inequality list follows the fixed layout

    [-upper constraints..., lambda_0..lambda_J, -lower constraints...]

followed by lambda box constraints that compactify the multiplier domain
(the first-order system is scale-invariant in lambda, so bounding each
multiplier to [0, 1] discards no normalized multiplier ray).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .graphs import (
    EdgeIndexMap,
    acyclicity_terms,
    lam_var,
    n_structure_vars,
    n_total_vars,
    p_var,
    q_var,
)
from .polys import Monomial, Poly
from .scoring import Dataset, ScoreConfig, fit_feature_degrees, lower_objective, upper_objective


@dataclass
class Constraint:
    """A named polynomial constraint with a structural kind tag."""

    name: str
    kind: str
    poly: Poly
    edges: tuple[int, ...] = ()


@dataclass
class BilevelProblem:
    """Upper objective/constraints and lower objective/constraints over (q, p)."""

    D: int
    k_max: int
    F: Poly
    upper_ineqs: list[Constraint]  # f_i <= 0: aggregated acyclicity then q-box
    G: Poly
    lower_ineqs: list[Constraint]  # g_j <= 0: -p_j^2 (1 - p_j^2)
    acyc_pieces: list[Constraint] = field(default_factory=list)
    degrees: np.ndarray | None = None

    @property
    def n_edges(self) -> int:
        return EdgeIndexMap(self.D).n_edges

    @property
    def I(self) -> int:
        return len(self.upper_ineqs)

    @property
    def J(self) -> int:
        return len(self.lower_ineqs)


def lower_constraint(e: int, n_edges: int, nvars: int) -> Poly:
    """g_e(p) = -p_e^2 (1 - p_e^2) = -p_e^2 + p_e^4."""
    pv = p_var(e, n_edges)
    return Poly({Monomial.variable(pv, 2): -1.0, Monomial.variable(pv, 4): 1.0}, nvars)


def qbox_constraint(e: int, nvars: int) -> Poly:
    """-q_e (1 - q_e) = q_e^2 - q_e <= 0 carries q into [0, 1]."""
    qv = q_var(e)
    return Poly({Monomial.variable(qv, 2): 1.0, Monomial.variable(qv): -1.0}, nvars)


def build_bilevel(
    dataset: Dataset, config: ScoreConfig, k_max: int = 2
) -> BilevelProblem:
    """Assemble the bilevel program from data and score configuration."""
    D = dataset.D
    emap = EdgeIndexMap(D)
    if not (2 <= k_max <= D):
        raise InvalidInput(f"k_max must be in [2, {D}]")
    nvars = n_structure_vars(emap.n_edges)
    degrees = fit_feature_degrees(dataset, config)
    F = upper_objective(dataset, config, degrees)
    G = lower_objective(dataset, config, degrees)

    pieces = [
        Constraint(f"acyc{k}[{','.join(map(str, edges))}]", "acyclicity", poly, edges)
        for k, edges, poly in acyclicity_terms(D, k_max, nvars)
    ]
    upper: list[Constraint] = []
    for k in range(2, k_max + 1):
        agg = Poly.zero(nvars)
        for c in pieces:
            if c.name.startswith(f"acyc{k}["):
                agg = agg + c.poly
        upper.append(Constraint(f"h{k}", "acyclicity", agg, tuple(range(emap.n_edges))))
    for e in range(emap.n_edges):
        upper.append(Constraint(f"qbox[{e}]", "qbox", qbox_constraint(e, nvars), (e,)))

    lower = [
        Constraint(f"g[{e}]", "pbox", lower_constraint(e, emap.n_edges, nvars), (e,))
        for e in range(emap.n_edges)
    ]
    return BilevelProblem(
        D=D, k_max=k_max, F=F, upper_ineqs=upper, G=G, lower_ineqs=lower,
        acyc_pieces=pieces, degrees=degrees,
    )


@dataclass
class SingleLevelPOP:
    """The KKT single-level program over x = (q, p, lambda).

    ``ineqs`` are >= 0 constraints; the first block follows the layout
    -f (acyclicity split per supporting edge set, then q-box), then the
    multipliers, then -g; trailing entries are the lambda box constraints.
    ``eqs`` are the stationarity components followed by complementarity.
    """

    D: int
    k_max: int
    nvars: int
    objective: Poly
    ineqs: list[Constraint]
    eqs: list[Constraint]
    n_layout_ineqs: int  # acyclicity pieces + qbox + lambdas + (-g)
    bilevel: BilevelProblem

    @property
    def n_edges(self) -> int:
        return EdgeIndexMap(self.D).n_edges

    @property
    def stationarity(self) -> list[Constraint]:
        return [c for c in self.eqs if c.kind == "stationarity"]

    @property
    def complementarity(self) -> list[Constraint]:
        return [c for c in self.eqs if c.kind == "complementarity"]

    def to_jsonable(self) -> dict:
        return {
            "D": self.D,
            "k_max": self.k_max,
            "nvars": self.nvars,
            "objective": self.objective.to_jsonable(),
            "ineqs": [
                {"name": c.name, "kind": c.kind, "poly": c.poly.to_jsonable()}
                for c in self.ineqs
            ],
            "eqs": [
                {"name": c.name, "kind": c.kind, "poly": c.poly.to_jsonable()}
                for c in self.eqs
            ],
        }

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_jsonable(), indent=1, sort_keys=True))


def kkt_reformulate(bp: BilevelProblem) -> SingleLevelPOP:
    """Replace the lower problem with its Fritz-John system.

    The acyclicity aggregates are split per supporting edge set before
    entering the inequality list: each summand is nonnegative on the box, so
    the split preserves the feasible set while keeping the correlative
    sparsity pattern local to the participating edges.
    """
    emap = EdgeIndexMap(bp.D)
    ne = emap.n_edges
    nv = n_total_vars(ne)

    def lift(poly: Poly) -> Poly:
        return poly.with_nvars(nv)

    objective = lift(bp.F)
    ineqs: list[Constraint] = []
    for c in bp.acyc_pieces:
        ineqs.append(Constraint(f"-{c.name}", "acyclicity", lift(c.poly).scale(-1.0), c.edges))
    for c in bp.upper_ineqs:
        if c.kind == "acyclicity":
            continue
        ineqs.append(Constraint(f"-{c.name}", c.kind, lift(c.poly).scale(-1.0), c.edges))
    for k in range(ne + 1):
        lam = Poly.variable(lam_var(k, ne), nv)
        edges = () if k == 0 else (k - 1,)
        ineqs.append(Constraint(f"lam[{k}]", "lam_nonneg", lam, edges))
    for c in bp.lower_ineqs:
        ineqs.append(Constraint(f"-{c.name}", "pbox", lift(c.poly).scale(-1.0), c.edges))
    n_layout = len(ineqs)
    # Lambda box: lam (1 - lam) >= 0 compactifies the multiplier cone.
    for k in range(ne + 1):
        lv = lam_var(k, ne)
        poly = Poly({Monomial.variable(lv): 1.0, Monomial.variable(lv, 2): -1.0}, nv)
        edges = () if k == 0 else (k - 1,)
        ineqs.append(Constraint(f"lambox[{k}]", "lam_box", poly, edges))

    eqs: list[Constraint] = []
    G = lift(bp.G)
    for e in range(ne):
        lam0 = Monomial.variable(lam_var(0, ne))
        lam_e = Monomial.variable(lam_var(e + 1, ne))
        dG = G.grad(p_var(e, ne))
        dg = lift(bp.lower_ineqs[e].poly).grad(p_var(e, ne))
        stat = dG.mul_monomial(lam0) + dg.mul_monomial(lam_e)
        # Every monomial touches lambda plus at most one foreign edge.
        edges = tuple(sorted({e} | {
            f for m in stat.terms for v in m.variables()
            if ne <= v < 2 * ne for f in (v - ne,)
        }))
        eqs.append(Constraint(f"stat[{e}]", "stationarity", stat, edges))
    for e in range(ne):
        lam_e = Monomial.variable(lam_var(e + 1, ne))
        comp = lift(bp.lower_ineqs[e].poly).mul_monomial(lam_e)
        eqs.append(Constraint(f"comp[{e}]", "complementarity", comp, (e,)))

    return SingleLevelPOP(
        D=bp.D, k_max=bp.k_max, nvars=nv, objective=objective,
        ineqs=ineqs, eqs=eqs, n_layout_ineqs=n_layout, bilevel=bp,
    )


@dataclass
class KktReport:
    """Max absolute violations of the first-order system at a point."""

    stationarity: float
    complementarity: float
    sign: float
    inequality: float
    worst: str

    @property
    def residual(self) -> float:
        return max(self.stationarity, self.complementarity, self.sign, self.inequality)


def verify_kkt(pop: SingleLevelPOP, point: np.ndarray) -> KktReport:
    """Evaluate all single-level constraints at a full (q, p, lambda) vector."""
    point = np.asarray(point, dtype=float)
    if point.size != pop.nvars:
        raise InvalidInput(f"point has {point.size} entries, expected {pop.nvars}")
    stat = comp = 0.0
    worst, worst_val = "", -1.0

    def track(name: str, val: float):
        nonlocal worst, worst_val
        if val > worst_val:
            worst, worst_val = name, val

    for c in pop.eqs:
        v = abs(c.poly.evaluate(point))
        if c.kind == "stationarity":
            stat = max(stat, v)
        else:
            comp = max(comp, v)
        track(c.name, v)
    ne = pop.n_edges
    lam = point[2 * ne:]
    sign = float(max(0.0, -lam.min())) if lam.size else 0.0
    track("lam_sign", sign)
    ineq = 0.0
    for c in pop.ineqs:
        if c.kind in ("lam_nonneg", "lam_box"):
            continue  # lambda handled by the sign check; box is an artifact bound
        v = max(0.0, -c.poly.evaluate(point))
        ineq = max(ineq, v)
        track(c.name, v)
    return KktReport(stationarity=stat, complementarity=comp, sign=sign,
                     inequality=ineq, worst=worst)
