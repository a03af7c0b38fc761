"""Chains of coupled particle classes and their transfer structure.

An ensemble holds, over one discretized space, the data of a joint density
for M classes ("floors") of n particles each:

* row functions ``f_1..f_n`` attached to floor 1,
* column functions ``phi_1..phi_n`` attached to floor M,
* one transfer kernel per adjacent floor pair, ``g[l]`` linking floor l
  to floor l+1.

The joint density of all M*n particles is the normalized product of the
determinant ``det f_i(x^1_j)``, the adjacent-floor determinants
``det g(x^l_i, x^{l+1}_j)`` and ``det phi_j(x^M_i)``.  Everything downstream
(correlation kernels, Fredholm determinants, Janossy densities) is built from
iterated convolutions of these ingredients, so the ensemble eagerly caches

* ``g_{l,m}``: the transfer kernel from floor l to floor m, obtained by
  integrating out all floors strictly between them (zero when m <= l),
* left convolutions ``f_j * g_{1,m}`` for every floor m,
* right convolutions ``g_{l,M} * phi_s`` for every floor l,
* the pairing (Gram) matrix ``A[j,k] = f_j * g_{1,M} * phi_k`` with all M
  floor integrations applied.

Floor and function indices are 1-based in every public signature, matching
the transfer-chain conventions (``f_j * g_{1,1} = f_j``,
``g_{M,M} * phi_s = phi_s``); node indices are 0-based positions into
``space.nodes``.  Caches are built once at construction, so concurrent reads
need no locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import SingularOperatorError
from .measure_space import DiscretizedSpace, WindowFamily

# Reciprocal-condition thresholds shared by every inversion in the package:
# below HARD_RCOND the operation refuses to proceed, between the two values
# it proceeds but flags the result.
HARD_RCOND = 1e-12
WARN_RCOND = 1e-6

# Construction-time gate on the pairing matrix condition number.
DEFAULT_COND_LIMIT = 1e12


def _as_complex_matrix(a, name: str, shape: tuple[int, ...]) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.complex128)
    if out.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


class ChainEnsemble:
    """Sampled chain data plus eager convolution caches.

    Parameters
    ----------
    space : DiscretizedSpace
        Common one-particle space of every floor.
    f : array_like, shape (n, P)
        Floor-1 row functions sampled at the nodes.
    phi : array_like, shape (n, P)
        Floor-M column functions sampled at the nodes.
    g : sequence of array_like, each (P, P)
        Adjacent-floor transfer kernels; ``len(g) = M - 1``.  An empty
        sequence gives a single-floor ensemble.
    cond_limit : float
        Construction fails if the pairing matrix condition number exceeds
        this bound.

    Notes
    -----
    Input arrays are promoted to complex128.  ``n`` must be at least 1: a
    floor with no particles has no determinant structure to speak of.
    """

    def __init__(self, space: DiscretizedSpace, f, phi, g=(),
                 cond_limit: float = DEFAULT_COND_LIMIT):
        if not isinstance(space, DiscretizedSpace):
            raise ValueError("space must be a DiscretizedSpace")
        self.space = space
        P = space.size
        f = np.asarray(f, dtype=np.complex128)
        if f.ndim != 2 or f.shape[1] != P:
            raise ValueError(f"f must have shape (n, {P}), got {f.shape}")
        n = f.shape[0]
        if n < 1:
            raise ValueError("need at least one function per floor (n >= 1)")
        if n > P:
            raise ValueError(
                f"{n} functions cannot be independent on {P} nodes"
            )
        self.f = _as_complex_matrix(f, "f", (n, P))
        self.phi = _as_complex_matrix(phi, "phi", (n, P))
        self.g = tuple(
            _as_complex_matrix(gl, f"g[{i}]", (P, P)) for i, gl in enumerate(g)
        )
        self.n = n
        self.floors = len(self.g) + 1
        self.cond_limit = float(cond_limit)

        self._tables = build_tables(self.f, self.phi, self.g, space.weights,
                                    masks=None)
        a = self._tables.gram
        cond = float(np.linalg.cond(a))
        if not np.isfinite(cond) or cond > self.cond_limit:
            raise SingularOperatorError(
                "pairing matrix", 1.0 / cond if cond > 0 else 0.0,
                detail=f"condition number {cond:.3e} exceeds limit "
                       f"{self.cond_limit:.1e}",
            )
        self.gram_cond = cond

    # convenience -----------------------------------------------------------

    @property
    def nodes(self) -> np.ndarray:
        return self.space.nodes

    @property
    def weights(self) -> np.ndarray:
        return self.space.weights

    @property
    def tables(self) -> ConvolutionTables:
        """Unrestricted convolution tables, cached at construction."""
        return self._tables

    def check_floor(self, floor: int, what: str = "floor") -> int:
        if not isinstance(floor, (int, np.integer)) or not 1 <= floor <= self.floors:
            raise ValueError(f"{what} {floor} outside 1..{self.floors}")
        return int(floor)

    def check_function(self, j: int) -> int:
        if not isinstance(j, (int, np.integer)) or not 1 <= j <= self.n:
            raise ValueError(f"function index {j} outside 1..{self.n}")
        return int(j)

    def check_windows(self, wf: WindowFamily) -> WindowFamily:
        if wf.floors != self.floors:
            raise ValueError(
                f"window family has {wf.floors} floors, ensemble has {self.floors}"
            )
        if wf.space is not self.space:
            raise ValueError("window family lives on a different space")
        return wf


@dataclass(frozen=True, eq=False)
class ConvolutionTables:
    """All chain convolutions of an ensemble under per-floor node masks.

    ``chain[(l, m)]`` holds the floor-l to floor-m transfer kernel for
    l < m, with the integrations over floors l+1..m-1 restricted by the
    masks.  ``left[m-1][:, j]`` holds ``f_{j+1} * g_{1,m}`` (integrations
    over floors 1..m-1) and ``right[l-1][:, s]`` holds
    ``g_{l,M} * phi_{s+1}`` (integrations over floors l+1..M).  ``gram``
    applies all M integrations.  ``masks`` is None for the unrestricted
    tables.
    """

    floors: int
    n: int
    chain: dict
    left: tuple
    right: tuple
    gram: np.ndarray
    masks: tuple | None

    def chain_block(self, l: int, m: int) -> np.ndarray | None:
        """g_{l,m} for l < m, else None (the kernel is zero)."""
        return self.chain.get((l, m))


def _masked_weights(weights: np.ndarray, masks, floor: int) -> np.ndarray:
    # floor is 1-based; masks is None (unrestricted) or a list of bool arrays
    if masks is None:
        return weights
    return weights * masks[floor - 1]


def build_tables(f: np.ndarray, phi: np.ndarray, g: Sequence[np.ndarray],
                 weights: np.ndarray, masks=None) -> ConvolutionTables:
    """Compute every chain convolution once, under optional floor masks.

    Parameters
    ----------
    f, phi : ndarray, shape (n, P)
    g : sequence of (P, P) arrays, length M-1
    weights : ndarray, shape (P,)
    masks : sequence of (P,) bool arrays or None
        One mask per floor; integration over floor l keeps only nodes with
        ``masks[l-1]`` set.  None means no restriction.
    """
    n, P = f.shape
    M = len(g) + 1
    if masks is not None:
        masks = [np.asarray(m, dtype=bool) for m in masks]
        if len(masks) != M:
            raise ValueError(f"need {M} masks, got {len(masks)}")
    wm = [_masked_weights(weights, masks, l) for l in range(1, M + 1)]

    # chain kernels g_{l,m}: iterate right from each starting floor
    chain: dict[tuple[int, int], np.ndarray] = {}
    for l in range(1, M):
        block = g[l - 1]
        chain[(l, l + 1)] = block
        for m in range(l + 2, M + 1):
            # integrate out floor m-1 between the accumulated block and the
            # next adjacent kernel
            block = (block * wm[m - 2][None, :]) @ g[m - 2]
            chain[(l, m)] = block

    # left convolutions f_j * g_{1,m}, floors 1..m-1 integrated out
    left = [f.T.copy()]
    v = f * wm[0][None, :]
    for m in range(2, M + 1):
        left.append((v @ g[m - 2]).T)
        if m < M:
            v = (left[-1].T) * wm[m - 1][None, :]
    # right convolutions g_{l,M} * phi_s, floors l+1..M integrated out
    right = [phi.T.copy()]
    u = phi * wm[M - 1][None, :]
    for l in range(M - 1, 0, -1):
        right.append((u @ g[l - 1].T).T)
        if l > 1:
            u = (right[-1].T) * wm[l - 1][None, :]
    right.reverse()

    gram = (left[M - 1].T * wm[M - 1][None, :]) @ phi.T

    return ConvolutionTables(
        floors=M, n=n, chain=chain, left=tuple(left), right=tuple(right),
        gram=gram,
        masks=None if masks is None else tuple(masks),
    )


# ---------------------------------------------------------------------------
# public chain operations
# ---------------------------------------------------------------------------

def chain_convolve(ensemble: ChainEnsemble, l: int, m: int,
                   restriction=None) -> np.ndarray:
    """Transfer kernel from floor l to floor m as a (P, P) node matrix.

    Zero for m <= l.  For m > l+1 the floors strictly between are
    integrated out; ``restriction`` may list one boolean node mask per
    intermediate floor (l+1, ..., m-1 in order) to restrict those
    integrations.
    """
    l = ensemble.check_floor(l, "source floor")
    m = ensemble.check_floor(m, "target floor")
    P = ensemble.space.size
    if m <= l:
        return np.zeros((P, P), dtype=np.complex128)
    if restriction is None:
        return ensemble.tables.chain[(l, m)].copy()
    restriction = [np.asarray(r, dtype=bool) for r in restriction]
    if len(restriction) != m - l - 1:
        raise ValueError(
            f"restriction needs {m - l - 1} masks for floors {l + 1}..{m - 1}, "
            f"got {len(restriction)}"
        )
    w = ensemble.weights
    block = ensemble.g[l - 1]
    for i, t in enumerate(range(l + 1, m)):
        block = (block * (w * restriction[i])[None, :]) @ ensemble.g[t - 1]
    return block


def left_convolve(ensemble: ChainEnsemble, j: int, m: int,
                  first_mask=None, intermediate=None) -> np.ndarray:
    """``f_j * g_{1,m}`` sampled at the nodes; equals ``f_j`` for m = 1.

    ``first_mask`` restricts the floor-1 integration, ``intermediate`` the
    floors 2..m-1 (one mask each, in order).
    """
    j = ensemble.check_function(j)
    m = ensemble.check_floor(m, "target floor")
    if m == 1:
        return ensemble.f[j - 1].copy()
    if first_mask is None and intermediate is None:
        return ensemble.tables.left[m - 1][:, j - 1].copy()
    w = ensemble.weights
    n_inter = m - 2
    if intermediate is None:
        intermediate = [None] * n_inter
    else:
        intermediate = list(intermediate)
        if len(intermediate) != n_inter:
            raise ValueError(
                f"intermediate needs {n_inter} masks for floors 2..{m - 1}, "
                f"got {len(intermediate)}"
            )
    wm1 = w if first_mask is None else w * np.asarray(first_mask, dtype=bool)
    v = ensemble.f[j - 1] * wm1
    for i, t in enumerate(range(2, m)):
        v = v @ ensemble.g[t - 2]
        mask = intermediate[i]
        v = v * (w if mask is None else w * np.asarray(mask, dtype=bool))
    return v @ ensemble.g[m - 2]


def right_convolve(ensemble: ChainEnsemble, s: int, l: int,
                   last_mask=None, intermediate=None) -> np.ndarray:
    """``g_{l,M} * phi_s`` sampled at the nodes; equals ``phi_s`` for l = M.

    ``last_mask`` restricts the floor-M integration, ``intermediate`` the
    floors l+1..M-1 (one mask each, in order).
    """
    s = ensemble.check_function(s)
    l = ensemble.check_floor(l, "source floor")
    M = ensemble.floors
    if l == M:
        return ensemble.phi[s - 1].copy()
    if last_mask is None and intermediate is None:
        return ensemble.tables.right[l - 1][:, s - 1].copy()
    w = ensemble.weights
    n_inter = M - l - 1
    if intermediate is None:
        intermediate = [None] * n_inter
    else:
        intermediate = list(intermediate)
        if len(intermediate) != n_inter:
            raise ValueError(
                f"intermediate needs {n_inter} masks for floors {l + 1}..{M - 1}, "
                f"got {len(intermediate)}"
            )
    wmM = w if last_mask is None else w * np.asarray(last_mask, dtype=bool)
    v = ensemble.phi[s - 1] * wmM
    for i, t in enumerate(range(M - 1, l, -1)):
        v = ensemble.g[t - 1] @ v
        mask = intermediate[t - l - 1]
        v = v * (w if mask is None else w * np.asarray(mask, dtype=bool))
    return ensemble.g[l - 1] @ v


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Pairing matrix of a chain under one of the three mask variants."""

    entries: np.ndarray
    variant: str
    windows: WindowFamily | None
    cond: float

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def gram_matrix(ensemble: ChainEnsemble, variant: str = "full",
                windows: WindowFamily | None = None) -> GramMatrix:
    """Pairing matrix ``A[j,k] = f_j * g_{1,M} * phi_k`` under a mask variant.

    ``variant`` selects the integration domain per floor: ``"full"`` (all
    nodes), ``"complement"`` (nodes outside each floor's window) or
    ``"window"`` (nodes inside; diagnostic use only).
    """
    if variant == "full":
        entries = ensemble.tables.gram.copy()
        wf = None
    elif variant in ("complement", "window"):
        if windows is None:
            raise ValueError(f"variant {variant!r} needs a window family")
        wf = ensemble.check_windows(windows)
        masks = wf.complement_masks() if variant == "complement" else wf.masks()
        entries = build_tables(ensemble.f, ensemble.phi, ensemble.g,
                               ensemble.weights, masks=masks).gram
    else:
        raise ValueError(f"unknown gram variant {variant!r}")
    cond = float(np.linalg.cond(entries))
    return GramMatrix(entries=entries, variant=variant, windows=wf, cond=cond)


def partition_function(ensemble: ChainEnsemble) -> complex:
    """Total unnormalized mass ``(n!)^M det A`` of the chain density."""
    a = ensemble.tables.gram
    return complex(
        math.factorial(ensemble.n) ** ensemble.floors * np.linalg.det(a)
    )


def marginal_ensemble(ensemble: ChainEnsemble, floors: Sequence[int]) -> ChainEnsemble:
    """Chain observed only at a subsequence of floors.

    The marginal of the joint density on floors ``l_1 < ... < l_k`` is again
    a chain density: the new row functions are ``f_j * g_{1,l_1}``, the new
    adjacent transfers are the cached ``g_{l_i, l_{i+1}}``, and the new
    column functions are ``g_{l_k, M} * phi_s``.  The pairing matrix is
    unchanged.
    """
    floors = [ensemble.check_floor(l) for l in floors]
    if not floors:
        raise ValueError("need at least one floor")
    if any(b <= a for a, b in zip(floors, floors[1:])):
        raise ValueError("floors must be strictly increasing")
    t = ensemble.tables
    first, last = floors[0], floors[-1]
    f_new = t.left[first - 1].T
    phi_new = t.right[last - 1].T
    g_new = [t.chain[(a, b)] for a, b in zip(floors, floors[1:])]
    return ChainEnsemble(ensemble.space, f_new, phi_new, g_new,
                         cond_limit=ensemble.cond_limit)
