"""Least-squares score polynomials over the edge parameterization.

The upper objective mixes per-target masked interventional losses with a
weighted observational loss; the lower objective is the observational loss
plus a smooth sparsity penalty on edge existence. All losses expand to
polynomials of degree at most 4 in (q, p) and are normalized by 1/(2N) so
coefficients stay O(1) regardless of sample size.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInput
from .graphs import EdgeIndexMap, n_structure_vars, p_var, q_var
from .polys import Monomial, Poly

COEFF_PRUNE = 1e-12


@dataclass
class Dataset:
    """Observational matrix plus per-target single-node interventional blocks."""

    obs: np.ndarray
    int_blocks: list[tuple[int, np.ndarray]] = field(default_factory=list)

    def __post_init__(self):
        self.obs = np.asarray(self.obs, dtype=float)
        if self.obs.ndim != 2 or self.obs.shape[0] == 0:
            raise InvalidInput("observational data must be a nonempty 2-D matrix")
        D = self.obs.shape[1]
        seen = set()
        blocks = []
        for target, data in self.int_blocks:
            data = np.asarray(data, dtype=float)
            if data.ndim != 2 or data.shape[1] != D:
                raise InvalidInput("interventional block column count mismatch")
            if not (0 <= target < D):
                raise InvalidInput(f"intervention target {target} out of range")
            if target in seen:
                raise InvalidInput(f"duplicate intervention block for target {target}")
            seen.add(target)
            blocks.append((int(target), data))
        self.int_blocks = blocks

    @property
    def D(self) -> int:
        return self.obs.shape[1]

    @property
    def n_rows(self) -> int:
        return self.obs.shape[0] + sum(b.shape[0] for _, b in self.int_blocks)

    def observational_only(self) -> "Dataset":
        return Dataset(obs=self.obs, int_blocks=[])


@dataclass
class ScoreConfig:
    """Weights for the score polynomials.

    alpha weighs the observational loss inside the upper objective;
    lambda_sp weighs the sparsity penalty in the lower objective.
    feature_mode 'per-pair-monomial' fits a monomial degree in {1,2,3} per
    ordered pair before building the loss; 'linear' uses the identity.
    """

    alpha: float = 0.2
    lambda_sp: float = 0.05
    feature_mode: str = "linear"

    def __post_init__(self):
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise InvalidInput("alpha must be finite and nonnegative")
        if not np.isfinite(self.lambda_sp) or self.lambda_sp < 0:
            raise InvalidInput("lambda_sp must be finite and nonnegative")
        if self.feature_mode not in ("linear", "per-pair-monomial"):
            raise InvalidInput(f"unknown feature_mode {self.feature_mode!r}")


def fit_feature_degrees(dataset: Dataset, config: ScoreConfig) -> np.ndarray:
    """Monomial degree per ordered pair j -> i, fit on observational rows.

    In linear mode every degree is 1. Otherwise each pair picks the degree in
    {1, 2, 3} whose univariate least-squares fit of x_i on x_j^g has the
    smallest residual.
    """
    D = dataset.D
    degrees = np.ones((D, D), dtype=int)
    if config.feature_mode == "linear":
        return degrees
    X = dataset.obs
    for j in range(D):
        for i in range(D):
            if i == j:
                continue
            best, best_sse = 1, np.inf
            xi = X[:, i]
            for g in (1, 2, 3):
                f = X[:, j] ** g
                denom = float(f @ f)
                if denom < 1e-12:
                    continue
                w = float(f @ xi) / denom
                sse = float(np.sum((xi - w * f) ** 2))
                if sse < best_sse - 1e-12:
                    best, best_sse = g, sse
            degrees[j, i] = best
    return degrees


def _weight_poly(parent: int, child: int, emap: EdgeIndexMap, nvars: int) -> Poly:
    """W[parent, child] as a polynomial: p q on the low->high orientation,
    p (1 - q) on the reverse."""
    e = emap.edge_index(parent, child)
    pm = Monomial.variable(p_var(e, emap.n_edges))
    qm = Monomial.variable(q_var(e))
    if parent < child:
        return Poly({pm * qm: 1.0}, nvars)
    return Poly({pm: 1.0, pm * qm: -1.0}, nvars)


def ls_loss(
    data: np.ndarray,
    D: int,
    mask_target: int | None = None,
    degrees: np.ndarray | None = None,
) -> Poly:
    """Masked least-squares loss (1/2N) sum_i sum_n (x_ni - sum_j W_ji phi(x_nj))^2.

    Column ``mask_target`` is excluded from the residual sum (its mechanism
    changed under intervention). ``degrees`` selects the per-pair feature
    monomial; identity when None.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise InvalidInput("loss requires a nonempty data matrix")
    if data.shape[1] != D:
        raise InvalidInput("data column count does not match D")
    if mask_target is not None and not (0 <= mask_target < D):
        raise InvalidInput("mask target out of range")
    emap = EdgeIndexMap(D)
    nvars = n_structure_vars(emap.n_edges)
    N = data.shape[0]
    total: dict[Monomial, float] = {}

    def add(poly: Poly, scale: float) -> None:
        for m, c in poly.terms.items():
            total[m] = total.get(m, 0.0) + c * scale

    for i in range(D):
        if i == mask_target:
            continue
        xi = data[:, i]
        if degrees is None:
            feats = data
        else:
            feats = data ** degrees[:, i][None, :]
        s_ii = float(xi @ xi) / N
        cross = (feats.T @ xi) / N
        gram = (feats.T @ feats) / N
        add(Poly.constant(s_ii, nvars), 0.5)
        wpolys = {j: _weight_poly(j, i, emap, nvars) for j in range(D) if j != i}
        for j, wp in wpolys.items():
            add(wp, -cross[j])
        parents = list(wpolys)
        for a_idx, j in enumerate(parents):
            for jj in parents[a_idx:]:
                coeff = gram[j, jj] * (0.5 if j == jj else 1.0)
                if abs(coeff) < COEFF_PRUNE:
                    continue
                add(wpolys[j] * wpolys[jj], coeff)
    return Poly(total, nvars)


def upper_objective(
    dataset: Dataset, config: ScoreConfig, degrees: np.ndarray | None = None
) -> Poly:
    """Sum of per-target masked interventional losses plus alpha times the
    observational loss."""
    if degrees is None:
        degrees = fit_feature_degrees(dataset, config)
    emap = EdgeIndexMap(dataset.D)
    F = Poly.zero(n_structure_vars(emap.n_edges))
    for target, block in dataset.int_blocks:
        F = F + ls_loss(block, dataset.D, mask_target=target, degrees=degrees)
    if config.alpha > 0:
        F = F + ls_loss(dataset.obs, dataset.D, degrees=degrees).scale(config.alpha)
    return F


def lower_objective(
    dataset: Dataset, config: ScoreConfig, degrees: np.ndarray | None = None
) -> Poly:
    """Observational loss plus lambda_sp * sum_e p_e^2."""
    if degrees is None:
        degrees = fit_feature_degrees(dataset, config)
    emap = EdgeIndexMap(dataset.D)
    nvars = n_structure_vars(emap.n_edges)
    G = ls_loss(dataset.obs, dataset.D, degrees=degrees)
    if config.lambda_sp > 0:
        pen = {
            Monomial.variable(p_var(e, emap.n_edges), 2): config.lambda_sp
            for e in range(emap.n_edges)
        }
        G = G + Poly(pen, nvars)
    return G


def numeric_loss(data: np.ndarray, W: np.ndarray, mask_target: int | None = None,
                 degrees: np.ndarray | None = None) -> float:
    """Direct numeric evaluation of the masked loss for a fixed weight matrix.

    Independent of the polynomial expansion; used as an oracle and by the
    brute-force structure search.
    """
    data = np.asarray(data, dtype=float)
    N, D = data.shape
    total = 0.0
    for i in range(D):
        if i == mask_target:
            continue
        feats = data if degrees is None else data ** degrees[:, i][None, :]
        pred = feats @ W[:, i] - data[:, i] * W[i, i]
        total += float(np.sum((data[:, i] - pred) ** 2))
    return total / (2 * N)


# -- CSV dataset format ----------------------------------------------------
# Header X1..XD plus a final `target` column: 0 = observational row, k means
# an intervention on node k-1. One file holds all regimes.

def write_csv(path: str | Path, dataset: Dataset) -> None:
    D = dataset.D
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"X{i + 1}" for i in range(D)] + ["target"])
        for row in dataset.obs:
            writer.writerow([repr(float(v)) for v in row] + ["0"])
        for target, block in sorted(dataset.int_blocks):
            for row in block:
                writer.writerow([repr(float(v)) for v in row] + [str(target + 1)])


def read_csv(path: str | Path) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "target":
            raise InvalidInput("dataset CSV must end with a `target` column")
        D = len(header) - 1
        obs_rows: list[list[float]] = []
        int_rows: dict[int, list[list[float]]] = {}
        for row in reader:
            if not row:
                continue
            values = [float(v) for v in row[:D]]
            regime = int(row[D])
            if regime == 0:
                obs_rows.append(values)
            else:
                int_rows.setdefault(regime - 1, []).append(values)
    if not obs_rows:
        raise InvalidInput("dataset CSV has no observational rows")
    blocks = [(t, np.array(rows)) for t, rows in sorted(int_rows.items())]
    return Dataset(obs=np.array(obs_rows), int_blocks=blocks)
