"""Correlation kernel, restricted operators, Fredholm determinant, resolvent.

The multi-floor correlation kernel of a chain ensemble is the block kernel

    K(l, x; m, y) = -g_{l,m}(x, y)
                    + sum_{i,j} (g_{l,M} * phi_i)(x) [A^{-1}]_{ij} (f_j * g_{1,m})(y)

with the convention g_{l,m} = 0 for m <= l.  Determinants of K evaluated at
point lists give the correlation functions; the Fredholm determinant of K
restricted to a family of windows gives the probability that every window is
empty; and the resolvent K_I (Id - K_I)^{-1} of the restriction reproduces
the Janossy kernel computed in closed form by the janossy module.

Restriction symmetrizes with sqrt-weights, so operator products and
determinants become plain matrix products and determinants.  The sqrt-weight
scaling never leaks out of this module: kernel values are always reported in
the unscaled convention above.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .chain_ensemble import (
    HARD_RCOND,
    WARN_RCOND,
    ChainEnsemble,
    ConvolutionTables,
)
from .errors import SingularOperatorError
from .measure_space import WindowFamily

KIND_CORRELATION = "correlation"
KIND_RESOLVENT = "resolvent"
KIND_JANOSSY = "janossy-explicit"

CSV_SCHEMA = "jk-csv-1"
JSON_SCHEMA = "jk-kernel-1"


@dataclass(eq=False)
class BlockKernel:
    """Kernel values for every floor pair, sampled on the space nodes.

    ``blocks[l-1, m-1, x, y]`` is the kernel value at (floor l, node x;
    floor m, node y).  ``kind`` records the construction route.
    """

    ensemble: ChainEnsemble
    blocks: np.ndarray
    kind: str
    warnings: tuple[str, ...] = ()

    @property
    def floors(self) -> int:
        return self.blocks.shape[0]

    @property
    def size(self) -> int:
        return self.blocks.shape[2]

    def value(self, l: int, x: int, m: int, y: int) -> complex:
        """Kernel value at (floor l, node x; floor m, node y)."""
        self.ensemble.check_floor(l)
        self.ensemble.check_floor(m)
        P = self.size
        for node in (x, y):
            if not 0 <= int(node) < P:
                raise ValueError(f"node index {node} outside 0..{P - 1}")
        return complex(self.blocks[l - 1, m - 1, x, y])

    def block(self, l: int, m: int) -> np.ndarray:
        self.ensemble.check_floor(l)
        self.ensemble.check_floor(m)
        return self.blocks[l - 1, m - 1]

    def matrix_at(self, points) -> np.ndarray:
        """Square matrix of kernel values at a list of (floor, node) points."""
        pts = check_points(self.ensemble, points)
        k = len(pts)
        out = np.empty((k, k), dtype=np.complex128)
        for i, (li, xi) in enumerate(pts):
            for j, (lj, xj) in enumerate(pts):
                out[i, j] = self.blocks[li - 1, lj - 1, xi, xj]
        return out


def check_points(ensemble: ChainEnsemble, points) -> list[tuple[int, int]]:
    """Validate a list of (floor, node-index) pairs against an ensemble."""
    out = []
    P = ensemble.space.size
    for p in points:
        if len(p) != 2:
            raise ValueError(f"point {p!r} is not a (floor, node) pair")
        floor, node = int(p[0]), int(p[1])
        ensemble.check_floor(floor)
        if not 0 <= node < P:
            raise ValueError(f"node index {node} outside 0..{P - 1}")
        out.append((floor, node))
    return out


def _inverse(matrix: np.ndarray, name: str, detail: str = ""):
    """Inverse with the package-wide rcond gate; returns (inv, warnings)."""
    cond = float(np.linalg.cond(matrix))
    rcond = 1.0 / cond if cond > 0 else 0.0
    if not np.isfinite(cond) or rcond < HARD_RCOND:
        raise SingularOperatorError(name, rcond, detail)
    warns = ()
    if rcond < WARN_RCOND:
        warns = (f"{name}: rcond {rcond:.3e} below warning threshold "
                 f"{WARN_RCOND:.0e}",)
    inv = np.linalg.inv(matrix)
    return inv, warns


def kernel_from_tables(ensemble: ChainEnsemble, tables: ConvolutionTables,
                       kind: str, name: str, detail: str = "") -> BlockKernel:
    """Assemble -g_{l,m} + right @ inv(gram) @ left^T from any table set."""
    M, P = tables.floors, ensemble.space.size
    inv, warns = _inverse(tables.gram, name, detail)
    blocks = np.empty((M, M, P, P), dtype=np.complex128)
    for l in range(1, M + 1):
        lead = tables.right[l - 1] @ inv
        for m in range(1, M + 1):
            block = lead @ tables.left[m - 1].T
            gl = tables.chain.get((l, m))
            if gl is not None:
                block = block - gl
            blocks[l - 1, m - 1] = block
    return BlockKernel(ensemble=ensemble, blocks=blocks, kind=kind,
                       warnings=warns)


def correlation_kernel(ensemble: ChainEnsemble) -> BlockKernel:
    """Block kernel whose determinants give the correlation functions."""
    return kernel_from_tables(ensemble, ensemble.tables, KIND_CORRELATION,
                              "pairing matrix")


def correlation_function(kernel: BlockKernel, points) -> complex:
    """det of kernel values at the points; 1 for the empty list.

    With ``k_l`` points on floor l this is the density, against the product
    of node measures, of finding distinct particles at all listed positions
    simultaneously (ordered-tuple normalization ``n!/(n-k_l)!`` per floor).
    """
    if kernel.kind != KIND_CORRELATION:
        raise ValueError(
            f"correlation_function needs a correlation kernel, got {kernel.kind!r}"
        )
    pts = check_points(kernel.ensemble, points)
    if not pts:
        return 1.0 + 0.0j
    return complex(np.linalg.det(kernel.matrix_at(pts)))


@dataclass(eq=False)
class RestrictedOperator:
    """Kernel restricted to window nodes, sqrt-weight symmetrized.

    Rows and columns are indexed by the (floor, node) pairs in ``index``,
    floors ascending and node indices ascending within a floor.  The matrix
    entry is ``sqrt(w_x) K(l,x; m,y) sqrt(w_y)``, so Fredholm determinants
    and resolvents of the continuum operator become finite-matrix ones.
    """

    kernel: BlockKernel
    windows: WindowFamily
    matrix: np.ndarray
    index: tuple[tuple[int, int], ...]

    @property
    def size(self) -> int:
        return self.matrix.shape[0]


def restrict(kernel: BlockKernel, windows: WindowFamily) -> RestrictedOperator:
    """Restriction of a block kernel to the nodes of a window family."""
    ens = kernel.ensemble
    wf = ens.check_windows(windows)
    sqrtw = np.sqrt(ens.space.weights)
    per_floor = [w.node_indices for w in wf.windows]
    index = tuple((l, int(x)) for l in range(1, ens.floors + 1)
                  for x in per_floor[l - 1])
    sizes = [idx.size for idx in per_floor]
    total = int(sum(sizes))
    matrix = np.empty((total, total), dtype=np.complex128)
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    for l in range(1, ens.floors + 1):
        il = per_floor[l - 1]
        if il.size == 0:
            continue
        for m in range(1, ens.floors + 1):
            im = per_floor[m - 1]
            if im.size == 0:
                continue
            sub = kernel.blocks[l - 1, m - 1][np.ix_(il, im)]
            matrix[offs[l - 1]:offs[l], offs[m - 1]:offs[m]] = (
                sub * np.outer(sqrtw[il], sqrtw[im])
            )
    return RestrictedOperator(kernel=kernel, windows=wf, matrix=matrix,
                              index=index)


def fredholm_det(op: RestrictedOperator) -> complex:
    """det(Id - K_I) of a restricted operator.

    For a correlation kernel this is the probability that every window in
    the family contains no particle of its class.  Exact for discrete
    spaces; quadrature-converged otherwise.  The empty restriction gives 1.
    """
    t = np.eye(op.size, dtype=np.complex128) - op.matrix
    sign, logdet = np.linalg.slogdet(t)
    return complex(sign * np.exp(logdet))


def resolvent_kernel(kernel: BlockKernel, windows: WindowFamily) -> BlockKernel:
    """Resolvent K_I (Id - K_I)^{-1} of the restriction, as a block kernel.

    The returned blocks are zero outside the windows.  A single LU
    factorization of Id - K_I is reused for every right-hand side.  Raises
    SingularOperatorError when Id - K_I is numerically singular (e.g. full
    windows on a discrete space, where some window surely holds particles).
    """
    if kernel.kind != KIND_CORRELATION:
        raise ValueError(
            f"resolvent_kernel needs a correlation kernel, got {kernel.kind!r}"
        )
    ens = kernel.ensemble
    op = restrict(kernel, windows)
    M, P = ens.floors, ens.space.size
    blocks = np.zeros((M, M, P, P), dtype=np.complex128)
    warns: tuple[str, ...] = ()
    if op.size:
        t = np.eye(op.size, dtype=np.complex128) - op.matrix
        cond = float(np.linalg.cond(t))
        rcond = 1.0 / cond if cond > 0 else 0.0
        if not np.isfinite(cond) or rcond < HARD_RCOND:
            raise SingularOperatorError(
                "Id - restricted kernel", rcond,
                detail=f"windows: {op.windows.describe()}",
            )
        if rcond < WARN_RCOND:
            warns = (f"Id - restricted kernel: rcond {rcond:.3e} below "
                     f"warning threshold {WARN_RCOND:.0e}",)
        lu = scipy.linalg.lu_factor(t)
        # L (Id - K) = K  =>  (Id - K)^T L^T = K^T
        lmat = scipy.linalg.lu_solve(lu, op.matrix.T, trans=1).T
        sqrtw = np.sqrt(ens.space.weights)
        per_floor = [w.node_indices for w in op.windows.windows]
        sizes = [idx.size for idx in per_floor]
        offs = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
        for l in range(1, M + 1):
            il = per_floor[l - 1]
            if il.size == 0:
                continue
            for m in range(1, M + 1):
                im = per_floor[m - 1]
                if im.size == 0:
                    continue
                sub = lmat[offs[l - 1]:offs[l], offs[m - 1]:offs[m]]
                blocks[l - 1, m - 1][np.ix_(il, im)] = (
                    sub / np.outer(sqrtw[il], sqrtw[im])
                )
    return BlockKernel(ensemble=ens, blocks=blocks, kind=KIND_RESOLVENT,
                       warnings=warns)


def dyson_mehta_check(kernel: BlockKernel, k: int, m: int, x: int, z: int) -> float:
    """Residual of the reproducing identity at (floor k, node x; floor m, node z).

    Computes | sum_l \\int K(k,x; l,y) K(l,y; m,z) dmu(y)
               - (1 + (m-k)) K(k,x; m,z) - 2 (m-k) g_{k,m}(x,z) |.

    The k = m case is an identity of the construction and its residual is
    rounding-level; the k != m case is a recorded diagnostic, not an
    assertion (see the dyson-mehta verify suite).
    """
    if kernel.kind != KIND_CORRELATION:
        raise ValueError("dyson_mehta_check needs a correlation kernel")
    ens = kernel.ensemble
    (k, x), (m, z) = check_points(ens, [(k, x), (m, z)])
    w = ens.space.weights
    lhs = 0.0 + 0.0j
    for l in range(1, ens.floors + 1):
        row = kernel.blocks[k - 1, l - 1][x, :]
        col = kernel.blocks[l - 1, m - 1][:, z]
        lhs += np.sum(row * w * col)
    rhs = (1 + (m - k)) * kernel.blocks[k - 1, m - 1][x, z]
    gkm = ens.tables.chain.get((k, m))
    if gkm is not None:
        rhs += 2 * (m - k) * gkm[x, z]
    return float(abs(lhs - rhs))


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def export_kernel_csv(kernel: BlockKernel, path: str) -> None:
    """Write every kernel value as one CSV row, atomically.

    Columns: floor_row, node_row, point_row, floor_col, node_col, point_col,
    re, im.  The first line carries the schema tag.
    """
    ens = kernel.ensemble
    nodes = ens.space.nodes
    tmp = f"{path}.tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(f"# {CSV_SCHEMA} kernel kind={kernel.kind}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["floor_row", "node_row", "point_row",
                         "floor_col", "node_col", "point_col", "re", "im"])
        M, P = ens.floors, ens.space.size
        for l in range(1, M + 1):
            for x in range(P):
                for m in range(1, M + 1):
                    for y in range(P):
                        v = kernel.blocks[l - 1, m - 1, x, y]
                        writer.writerow([l, x, repr(float(nodes[x])),
                                         m, y, repr(float(nodes[y])),
                                         repr(float(v.real)),
                                         repr(float(v.imag))])
    os.replace(tmp, path)


def kernel_to_json(kernel: BlockKernel) -> dict:
    """Binary-free JSON document of all blocks, values as [re, im] pairs."""
    ens = kernel.ensemble
    M, P = ens.floors, ens.space.size
    blocks = [
        [
            [[[float(v.real), float(v.imag)] for v in row]
             for row in kernel.blocks[l, m]]
            for m in range(M)
        ]
        for l in range(M)
    ]
    return {
        "schema": JSON_SCHEMA,
        "kind": kernel.kind,
        "floors": M,
        "nodes": P,
        "space": ens.space.to_json(),
        "blocks": blocks,
        "warnings": list(kernel.warnings),
    }
