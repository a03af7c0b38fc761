"""Janossy kernels, window-count probabilities, extreme-value curves.

For a family of windows I_1..I_M (one per floor) the Janossy density of
points inside the windows factorizes as

    J(points) = const(I) * det L(l_i, x_i; m_j, x_j)

where const(I) is the probability that every window is empty and L is again
a block kernel of chain type, built exactly like the correlation kernel but
with every floor integration restricted to the complement of that floor's
window:

    L(l, x; m, y) = -g^c_{l,m}(x, y)
                    + sum_{i,j} (g^c_{l,M} *c phi_i)(x) [(A^c)^{-1}]_{ij}
                                 (f_j *c g^c_{1,m})(y).

The same object equals the resolvent K_I (Id - K_I)^{-1} of the restricted
correlation kernel; the kernels module computes that route and the two are
cross-checked in the verify suites.  const(I) equals det(A^c)/det(A), the
ratio of complement to full pairing determinants.

Window-count probabilities use a bordered-determinant form of
const * det(L) that never inverts A^c, so they stay finite for degenerate
window families (for example a window covering the whole space, where
A^c = 0); that is what lets the extreme-value curves sweep s across the
entire axis.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .chain_ensemble import (
    HARD_RCOND,
    WARN_RCOND,
    ChainEnsemble,
    ConvolutionTables,
    GramMatrix,
    build_tables,
    marginal_ensemble,
)
from .errors import SingularOperatorError
from .kernels import KIND_JANOSSY, BlockKernel, check_points, kernel_from_tables
from .measure_space import Window, WindowFamily

KIND_BIORTHOGONAL = "janossy-biorthogonal"

# imaginary residue allowed on probabilities before they are reported real
IMAG_RESIDUE = 1e-6


@dataclass(eq=False)
class JanossyKernel:
    """Janossy kernel of one window family, plus its normalization.

    ``const`` is the probability that every window is empty; Janossy
    densities are ``const`` times determinants of ``kernel`` values.
    ``complement_gram`` carries the complement pairing matrix and its
    condition number for diagnostics.
    """

    kernel: BlockKernel
    windows: WindowFamily
    const: complex
    complement_gram: GramMatrix

    @property
    def ensemble(self) -> ChainEnsemble:
        return self.kernel.ensemble

    @property
    def warnings(self) -> tuple[str, ...]:
        return self.kernel.warnings


def _complement_tables(ensemble: ChainEnsemble,
                       windows: WindowFamily) -> ConvolutionTables:
    wf = ensemble.check_windows(windows)
    return build_tables(ensemble.f, ensemble.phi, ensemble.g,
                        ensemble.space.weights, masks=wf.complement_masks())


def _det_ratio(num: np.ndarray, den: np.ndarray) -> complex:
    """det(num)/det(den) via log-determinants, safe for tiny values."""
    s1, l1 = np.linalg.slogdet(num)
    s2, l2 = np.linalg.slogdet(den)
    if s1 == 0:
        return 0.0 + 0.0j
    return complex(s1 / s2 * np.exp(l1 - l2))


def janossy_kernel_explicit(ensemble: ChainEnsemble,
                            windows: WindowFamily) -> JanossyKernel:
    """Closed-form Janossy kernel of a window family.

    Raises SingularOperatorError naming the windows when the complement
    pairing matrix is numerically singular, which happens in particular
    when some window covers every node of the space.
    """
    wf = ensemble.check_windows(windows)
    tables = _complement_tables(ensemble, wf)
    kernel = kernel_from_tables(
        ensemble, tables, KIND_JANOSSY,
        "complement pairing matrix", detail=f"windows: {wf.describe()}",
    )
    const = _det_ratio(tables.gram, ensemble.tables.gram)
    comp = GramMatrix(entries=tables.gram, variant="complement", windows=wf,
                      cond=float(np.linalg.cond(tables.gram)))
    return JanossyKernel(kernel=kernel, windows=wf, const=const,
                         complement_gram=comp)


def janossy_density(jk: JanossyKernel, points) -> complex:
    """Janossy density at (floor, node) points inside the windows.

    The density (against the product of node measures) of observing
    particles of floor l exactly at the floor-l points inside window I_l
    and nowhere else inside I_l, jointly over all floors.  The empty list
    gives const(I).
    """
    ens = jk.ensemble
    pts = check_points(ens, points)
    counts = [0] * ens.floors
    for floor, node in pts:
        if not jk.windows.window(floor).mask[node]:
            raise ValueError(
                f"point (floor {floor}, node {node}) lies outside its window"
            )
        counts[floor - 1] += 1
    for l, c in enumerate(counts, start=1):
        if c > ens.n:
            raise ValueError(
                f"{c} points on floor {l} but only {ens.n} particles"
            )
    if not pts:
        return jk.const
    return complex(jk.const * np.linalg.det(jk.kernel.matrix_at(pts)))


# ---------------------------------------------------------------------------
# window-count probabilities
# ---------------------------------------------------------------------------

def _bordered_janossy_sum(ensemble: ChainEnsemble, tables: ConvolutionTables,
                          windows: WindowFamily, counts: Sequence[int]) -> complex:
    """Sum over node subsets of the bordered-determinant Janossy mass.

    For per-floor subsets S_l of window nodes with |S_l| = counts[l], the
    Janossy mass J(S) * prod weights is accumulated, with

        J(S) = det [[A^c, -F_S^T], [R_S, -G_S]] / det A

    whose Schur complement reproduces const * det L(S) whenever A^c is
    invertible, and which extends it continuously when it is not.
    Configurations with repeated nodes carry duplicate rows, hence vanish,
    so subsets (not tuples) suffice and no factorials appear.
    """
    n, M = ensemble.n, ensemble.floors
    w = ensemble.space.weights
    a_full = ensemble.tables.gram
    a_comp = tables.gram

    floors_vec: list[int] = []
    combo_arrays: list[np.ndarray] = []
    for l, k in enumerate(counts, start=1):
        if k == 0:
            continue
        nodes = windows.window(l).node_indices
        combos = list(itertools.combinations(nodes.tolist(), k))
        if not combos:
            return 0.0 + 0.0j
        combo_arrays.append(np.array(combos, dtype=np.int64))
        floors_vec.extend([l] * k)
    k_total = len(floors_vec)
    if k_total == 0:
        return _det_ratio(a_comp, a_full)

    # cross product of per-floor subset choices -> node matrix (C, k_total)
    sizes = [c.shape[0] for c in combo_arrays]
    grids = np.meshgrid(*[np.arange(s) for s in sizes], indexing="ij")
    parts = [combo_arrays[i][grids[i].reshape(-1)] for i in range(len(sizes))]
    nodes_mat = np.concatenate(parts, axis=1)
    C = nodes_mat.shape[0]

    bordered = np.zeros((C, n + k_total, n + k_total), dtype=np.complex128)
    bordered[:, :n, :n] = a_comp
    for j in range(k_total):
        lj = floors_vec[j]
        nj = nodes_mat[:, j]
        bordered[:, :n, n + j] = -tables.left[lj - 1][nj, :]
        bordered[:, n + j, :n] = tables.right[lj - 1][nj, :]
        for q in range(k_total):
            lq = floors_vec[q]
            block = tables.chain.get((lj, lq))
            if block is not None:
                bordered[:, n + j, n + q] = -block[nj, nodes_mat[:, q]]
    dets = np.linalg.det(bordered)
    wprod = np.prod(w[nodes_mat], axis=1) if k_total else np.ones(C)
    s_full, l_full = np.linalg.slogdet(a_full)
    return complex(np.sum(dets * wprod) / s_full * np.exp(-l_full))


def count_probability(ensemble: ChainEnsemble, windows: WindowFamily,
                      counts: Sequence[int]) -> float:
    """Probability of exactly counts[l-1] floor-l particles in window I_l.

    Integrates the Janossy density over the windows (a sum over per-floor
    node subsets), through a bordered-determinant form that tolerates
    degenerate window families.  Summing over all count vectors in
    {0..n}^M returns 1.
    """
    wf = ensemble.check_windows(windows)
    counts = [int(c) for c in counts]
    if len(counts) != ensemble.floors:
        raise ValueError(f"need {ensemble.floors} counts, got {len(counts)}")
    if any(c < 0 or c > ensemble.n for c in counts):
        raise ValueError(f"counts must lie in 0..{ensemble.n}")
    tables = _complement_tables(ensemble, wf)
    value = _bordered_janossy_sum(ensemble, tables, wf, counts)
    if abs(value.imag) > IMAG_RESIDUE * max(1.0, abs(value.real)):
        raise ArithmeticError(
            f"count probability has imaginary residue {value.imag:.3e}"
        )
    return float(value.real)


# ---------------------------------------------------------------------------
# extreme-value curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExtremePoint:
    """One grid point of a k-th largest particle distribution curve."""

    s: float
    count_probs: tuple[float, ...]
    prob_ge: float
    cdf: float


def kth_extreme_distribution(ensemble: ChainEnsemble, floor: int, k: int,
                             s_grid: Sequence[float],
                             threads: int = 1) -> list[ExtremePoint]:
    """Distribution of the k-th largest floor-`floor` particle on a grid.

    For each s the counting probabilities Pr(#particles >= s equals j),
    j = 0..k, are computed on the single-floor marginal; then
    Pr(kth largest >= s) = 1 - sum_{j<k} Pr(# = j) and the cdf is its
    complement.  Output order follows the grid.
    """
    floor = ensemble.check_floor(floor)
    k = int(k)
    if not 1 <= k <= ensemble.n:
        raise ValueError(f"k must lie in 1..{ensemble.n}")
    marg = marginal_ensemble(ensemble, [floor])
    space = marg.space

    def at(s: float) -> ExtremePoint:
        window = space.window_from_intervals([(float(s), None)])
        wf = WindowFamily((window,))
        probs = tuple(count_probability(marg, wf, (j,)) for j in range(k + 1))
        prob_ge = 1.0 - sum(probs[:k])
        return ExtremePoint(s=float(s), count_probs=probs,
                            prob_ge=prob_ge, cdf=1.0 - prob_ge)

    s_list = [float(s) for s in s_grid]
    if threads <= 1 or len(s_list) <= 1:
        return [at(s) for s in s_list]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        return list(pool.map(at, s_list))


# ---------------------------------------------------------------------------
# single-floor recipe via biorthogonalization
# ---------------------------------------------------------------------------

def biorthogonal_janossy_recipe(ensemble: ChainEnsemble,
                                window: Window) -> JanossyKernel:
    """Single-floor Janossy kernel built by explicit biorthogonalization.

    Pairs the row functions against the column functions over the
    complement of the window, LU-factors the pairing matrix to produce
    biorthogonal families (ftilde_i in span f, phitilde_i in span phi with
    restricted pairing delta_ij), and returns their rank-n kernel

        L(x, y) = sum_i phitilde_i(x) ftilde_i(y)

    extended to all nodes.  An independent construction of the same object
    as janossy_kernel_explicit for single-floor ensembles.
    """
    if ensemble.floors != 1:
        raise ValueError("the biorthogonal recipe applies to single-floor "
                         "ensembles only")
    if window.space is not ensemble.space:
        raise ValueError("window lives on a different space")
    wf = WindowFamily((window,))
    wc = ensemble.space.weights * (~window.mask)
    a_comp = (ensemble.f * wc[None, :]) @ ensemble.phi.T
    cond = float(np.linalg.cond(a_comp))
    rcond = 1.0 / cond if cond > 0 else 0.0
    if not np.isfinite(cond) or rcond < HARD_RCOND:
        raise SingularOperatorError(
            "pairing matrix on window complement", rcond,
            detail=f"window keeps {window.count}/{ensemble.space.size} nodes",
        )
    warns: tuple[str, ...] = ()
    if rcond < WARN_RCOND:
        warns = (f"pairing matrix on window complement: rcond {rcond:.3e} "
                 f"below warning threshold {WARN_RCOND:.0e}",)
    perm, low, up = scipy.linalg.lu(a_comp)
    # rows of f_t: ftilde_i = sum_j [L^{-1} P^T]_{ij} f_j
    f_t = scipy.linalg.solve_triangular(low, perm.T @ ensemble.f, lower=True)
    # rows of phi_t: phitilde_i = sum_m [U^{-1}]_{mi} phi_m
    phi_t = scipy.linalg.solve_triangular(up, ensemble.phi, trans="T",
                                          lower=False)
    blocks = (phi_t.T @ f_t)[None, None, :, :].astype(np.complex128)
    kernel = BlockKernel(ensemble=ensemble, blocks=blocks,
                         kind=KIND_BIORTHOGONAL, warnings=warns)
    const = _det_ratio(a_comp, ensemble.tables.gram)
    comp = GramMatrix(entries=a_comp, variant="complement", windows=wf,
                      cond=cond)
    return JanossyKernel(kernel=kernel, windows=wf, const=const,
                         complement_gram=comp)
