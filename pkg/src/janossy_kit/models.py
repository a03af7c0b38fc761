"""Ready-made ensembles: unitary-type, coupled chains, non-intersecting paths.

Builders return ordinary ChainEnsemble objects; nothing downstream knows
where an ensemble came from.  ``ChainModelSpec`` is the JSON-facing
description the CLI uses to name one of the builders or to pass explicit
sampled arrays.

Potentials are accepted either as callables ``V(x) -> array`` or as
polynomial coefficient lists in ascending order (``[0, 0, 1]`` is x^2).
For more than 8 functions per floor the raw monomial columns are recombined
into a discretely orthonormalized basis with the same span; spans determine
every probabilistic output, so only the (recomputed) overall normalization
differs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .chain_ensemble import DEFAULT_COND_LIMIT, ChainEnsemble
from .errors import ConfigError
from .measure_space import DiscretizedSpace, make_discrete, make_quadrature

ORTHONORMALIZE_ABOVE = 8
KM_DEFAULT_ORDER = 120
KM_PADDING_SIGMAS = 6.0

Potential = Callable[[np.ndarray], np.ndarray]


def as_potential(spec) -> Potential:
    """Callable potential from a callable or ascending coefficient list."""
    if callable(spec):
        return spec
    coeffs = np.asarray(spec, dtype=float)
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise ValueError("potential coefficients must be a non-empty list")
    return lambda x: np.polynomial.polynomial.polyval(x, coeffs)


def _weighted_monomials(space: DiscretizedSpace, n: int,
                        potential: Potential) -> np.ndarray:
    """Rows x^{j-1} exp(-V(x)/2), j = 1..n, recombined when n is large."""
    x = space.nodes
    half = np.exp(-0.5 * np.asarray(potential(x), dtype=float))
    rows = np.vander(x, n, increasing=True).T * half[None, :]
    if n > ORTHONORMALIZE_ABOVE:
        sqrtw = np.sqrt(space.weights)
        q, _ = np.linalg.qr((rows * sqrtw[None, :]).T)
        rows = (q / sqrtw[:, None]).T
    return rows


def build_unitary(potential, n: int, space: DiscretizedSpace) -> ChainEnsemble:
    """Single floor with rows = columns = x^{j-1} exp(-V(x)/2).

    The associated density is proportional to the squared Vandermonde times
    exp(-sum V(x_i)).
    """
    if n < 1:
        raise ValueError("need at least one particle")
    if space.kind == "quadrature" and space.order is not None and n > space.order:
        raise ValueError(
            f"{n} particles on an order-{space.order} rule leaves the "
            f"pairing matrix rank-deficient"
        )
    rows = _weighted_monomials(space, n, as_potential(potential))
    return ChainEnsemble(space, rows, rows, ())


def build_coupled_chain(n: int, floors: int, potentials: Sequence,
                        couplings: Sequence[float],
                        space: DiscretizedSpace) -> ChainEnsemble:
    """Chain of coupled floors with exponential cross terms.

    The joint weight is exp of minus (half the end potentials, the full
    interior ones) plus sum_l c_l x^l x^{l+1}, times the Vandermonde factors
    of the end floors.  Row functions carry exp(-V_1/2), column functions
    exp(-V_M/2); each interior potential attaches wholly to the transfer
    kernel on its left, so the product of factors reproduces the weight.
    """
    if n < 1:
        raise ValueError("need at least one particle")
    if floors < 1:
        raise ValueError("need at least one floor")
    if len(potentials) != floors:
        raise ValueError(f"need {floors} potentials, got {len(potentials)}")
    if len(couplings) != floors - 1:
        raise ValueError(f"need {floors - 1} couplings, got {len(couplings)}")
    pots = [as_potential(p) for p in potentials]
    x = space.nodes
    f = _weighted_monomials(space, n, pots[0])
    phi = _weighted_monomials(space, n, pots[-1])
    g = []
    for l in range(1, floors):
        block = np.exp(float(couplings[l - 1]) * np.outer(x, x))
        if l < floors - 1:
            # interior floor l+1 carries its full potential on the right slot
            block = block * np.exp(-np.asarray(pots[l](x), dtype=float))[None, :]
        g.append(block)
    return ChainEnsemble(space, f, phi, g)


def heat_kernel(s: float, t: float, x, y) -> np.ndarray:
    """Gaussian transition density from time s to time t."""
    dt = float(t) - float(s)
    if dt <= 0:
        raise ValueError("times must be strictly increasing")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return np.exp(-((y - x) ** 2) / (2.0 * dt)) / math.sqrt(2.0 * math.pi * dt)


def build_karlin_mcgregor(times: Sequence[float], start: Sequence[float],
                          end: Sequence[float], n: int | None = None,
                          order: int = KM_DEFAULT_ORDER,
                          space: DiscretizedSpace | None = None) -> ChainEnsemble:
    """Non-intersecting Brownian paths pinned at both ends.

    ``times`` lists t_0 < t_1 < ... < t_{M+1}; the paths start at the
    ``start`` positions at t_0, are observed at the M interior times, and
    end at the ``end`` positions.  Row functions are transitions from the
    starts into the first observed floor, transfers are transitions between
    consecutive observed floors, column functions are transitions into the
    ends.  Without an explicit space, a Gauss-Legendre rule of the given
    order covers the endpoint range padded by 6 sqrt(total time).
    """
    times = [float(t) for t in times]
    if len(times) < 3:
        raise ValueError("need t_0, at least one interior time, and t_{M+1}")
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ValueError("times must be strictly increasing")
    start = [float(v) for v in start]
    end = [float(v) for v in end]
    if n is None:
        n = len(start)
    if len(start) != n or len(end) != n:
        raise ValueError(f"start and end must each list {n} positions")
    if any(b <= a for a, b in zip(start, start[1:])) or \
            any(b <= a for a, b in zip(end, end[1:])):
        raise ValueError("start and end positions must be strictly increasing")
    if space is None:
        span = math.sqrt(times[-1] - times[0]) * KM_PADDING_SIGMAS
        lo = min(min(start), min(end)) - span
        hi = max(max(start), max(end)) + span
        space = make_quadrature((lo, hi), order)
    nodes = space.nodes
    f = np.array([heat_kernel(times[0], times[1], a, nodes) for a in start])
    phi = np.array([heat_kernel(times[-2], times[-1], nodes, b) for b in end])
    g = [heat_kernel(times[l], times[l + 1], nodes[:, None], nodes[None, :])
         for l in range(1, len(times) - 2)]
    return ChainEnsemble(space, f, phi, g)


def build_random(seed: int, nodes: int, n: int, floors: int,
                 cond_limit: float = DEFAULT_COND_LIMIT) -> ChainEnsemble:
    """Seeded random ensemble on a discrete space, for cross-checks.

    Node positions are 0..P-1; masses and every function/transfer entry are
    drawn uniformly from [0.2, 1.2].  The same seed reproduces the ensemble
    bit for bit.  The density is signed in general: these instances exercise
    the algebraic identities, not positivity.
    """
    if nodes < 1 or n < 1 or floors < 1:
        raise ValueError("nodes, n and floors must be positive")
    if nodes < n:
        raise ValueError(f"{n} particles on {nodes} nodes cannot be distinct")
    rng = np.random.default_rng(seed)
    space = make_discrete(np.arange(nodes, dtype=float),
                          rng.uniform(0.2, 1.2, nodes))
    f = rng.uniform(0.2, 1.2, (n, nodes))
    phi = rng.uniform(0.2, 1.2, (n, nodes))
    g = [rng.uniform(0.2, 1.2, (nodes, nodes)) for _ in range(floors - 1)]
    return ChainEnsemble(space, f, phi, g, cond_limit=cond_limit)


# ---------------------------------------------------------------------------
# JSON-facing model descriptions
# ---------------------------------------------------------------------------

VARIANTS = ("unitary", "coupled-chain", "karlin-mcgregor", "random", "explicit")


@dataclass(frozen=True)
class ChainModelSpec:
    """Parsed model section of a run configuration."""

    variant: str
    params: dict = field(default_factory=dict)

    @staticmethod
    def from_json(doc: dict) -> "ChainModelSpec":
        if not isinstance(doc, dict):
            raise ConfigError("model section must be an object")
        variant = doc.get("variant")
        if variant not in VARIANTS:
            raise ConfigError(
                f"unknown model variant {variant!r}; known: {', '.join(VARIANTS)}"
            )
        params = {k: v for k, v in doc.items() if k != "variant"}
        return ChainModelSpec(variant=variant, params=params)

    def build(self) -> ChainEnsemble:
        return build_model(self)


def _require(params: dict, *names: str) -> list:
    missing = [k for k in names if k not in params]
    if missing:
        raise ConfigError(f"model lacks required fields: {', '.join(missing)}")
    return [params[k] for k in names]


def build_model(spec: ChainModelSpec) -> ChainEnsemble:
    """Instantiate the ensemble a model spec describes."""
    p = spec.params
    try:
        if spec.variant == "unitary":
            potential, n, space_doc = _require(p, "potential", "particles", "space")
            return build_unitary(potential, int(n),
                                 DiscretizedSpace.from_json(space_doc))
        if spec.variant == "coupled-chain":
            n, floors, pots, coups, space_doc = _require(
                p, "particles", "floors", "potentials", "couplings", "space")
            return build_coupled_chain(int(n), int(floors), pots, coups,
                                       DiscretizedSpace.from_json(space_doc))
        if spec.variant == "karlin-mcgregor":
            times, start, end = _require(p, "times", "start", "end")
            order = int(p.get("order", KM_DEFAULT_ORDER))
            space = (DiscretizedSpace.from_json(p["space"])
                     if "space" in p else None)
            return build_karlin_mcgregor(times, start, end,
                                         n=p.get("particles"),
                                         order=order, space=space)
        if spec.variant == "random":
            seed, nodes, n, floors = _require(
                p, "seed", "nodes", "particles", "floors")
            return build_random(int(seed), int(nodes), int(n), int(floors))
        if spec.variant == "explicit":
            space_doc, f, phi = _require(p, "space", "f", "phi")
            space = DiscretizedSpace.from_json(space_doc)
            return ChainEnsemble(space, np.asarray(f, dtype=float),
                                 np.asarray(phi, dtype=float),
                                 [np.asarray(gl, dtype=float)
                                  for gl in p.get("g", [])])
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {spec.variant} model: {exc}") from exc
    raise ConfigError(f"unknown model variant {spec.variant!r}")
