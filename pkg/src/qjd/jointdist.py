"""Joint distributions for tuples of observables.

Four constructions share one output type:

* ``qjd_joint`` -- a probability distribution defined for any tuple,
  commuting or not.
* ``standard_commuting_joint`` -- ``Re tr(rho P1 ... Pn)``, only defined for
  commuting tuples; the reference for the commuting case.
* ``sequential_joint`` -- Lüders measurement in list order (baseline).
* ``margenau_hill_joint`` -- symmetrized two-observable quasi-distribution
  (baseline).

How ``qjd_joint`` works
-----------------------
The state is carried as a factor ``S`` with ``S S^H = rho`` (a purification
written as a d x d matrix, i.e. a vector in H (x) H).  For an ordering
``sigma`` of the observables, the weight of outcome tuple ``j`` is

    || P^{sigma(n)}_{j_sigma(n)} ... P^{sigma(1)}_{j_sigma(1)} S ||_F^2

which is a squared norm, so it is nonnegative, and the weights over all
tuples add up to ``tr rho = 1``.  The symmetric group acts on orderings and
the distribution is the average over that orbit, which makes the result
independent of how the observables are listed.  If the projectors commute,
every ordering gives ``tr(rho P1 ... Pn)``, and conjugating every
observable and the state by one unitary leaves every term unchanged.
"""

from __future__ import annotations

import dataclasses
import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from .errors import (
    EmptyAxisSet,
    GridMismatch,
    IndexOutOfRange,
    InvalidInput,
    NonnegativityViolation,
    NormalizationViolation,
    NotCommuting,
    TooLarge,
    UnsupportedKind,
    WrongArity,
)
from .matrix import as_observable, as_state, check_same_dim, commutator_norm, frobenius
from .spectral import CLUSTER_TOL, SpectralMeasure, eigendecompose

PROBABILITY = "probability"
QUASI = "quasi"

GRID_TOL = 1e-8
MAX_TRANSPORT_SUPPORT = 4096

# HiGHS occasionally declares tiny-mass transport problems infeasible under
# tight tolerances with presolve on; later entries are fallbacks.
_TIGHT = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}
_TRANSPORT_ATTEMPTS = (
    ("highs-ds", {**_TIGHT, "presolve": False}),
    ("highs-ipm", {**_TIGHT, "presolve": False}),
    ("highs", {}),
)


@dataclass(frozen=True)
class QjdConfig:
    """Every numerical knob of the constructions in one place.

    The orbit average over orderings is a finite exact sum, so there is no
    quadrature order or iteration tolerance; ``max_observables`` only caps
    the n! cost of that sum.
    """

    commute_tol: float = 1e-10
    cluster_tol: float = CLUSTER_TOL
    clamp_tol: float = 1e-10
    renormalize_above: float = 1e-12
    violation_tol: float = 1e-6
    max_observables: int = 7

    def replace(self, **changes: float) -> "QjdConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT_CONFIG = QjdConfig()


@dataclass(frozen=True)
class OutcomeGrid:
    """Product of the observables' spectra, enumerated in lexicographic index order."""

    axes: tuple[tuple[float, ...], ...]

    @classmethod
    def from_measures(cls, measures: Iterable[SpectralMeasure]) -> "OutcomeGrid":
        return cls(tuple(tuple(sm.eigenvalues) for sm in measures))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(ax) for ax in self.axes)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    @property
    def points(self) -> list[tuple[int, ...]]:
        return list(itertools.product(*(range(k) for k in self.shape)))

    @cached_property
    def coordinates(self) -> np.ndarray:
        """(size, n) array of eigenvalue tuples, one row per grid point."""
        mesh = np.meshgrid(*(np.asarray(ax) for ax in self.axes), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def matches(self, other: "OutcomeGrid", tol: float = GRID_TOL) -> bool:
        if self.shape != other.shape:
            return False
        return all(
            np.max(np.abs(np.subtract(a, b)), initial=0.0) <= tol for a, b in zip(self.axes, other.axes)
        )


@dataclass(frozen=True)
class JointDistribution:
    grid: OutcomeGrid
    weights: np.ndarray
    kind: str = PROBABILITY

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        if w.size != self.grid.size:
            raise InvalidInput(f"{w.size} weights for a grid of {self.grid.size} points")
        if self.kind not in (PROBABILITY, QUASI):
            raise InvalidInput(f"unknown kind {self.kind!r}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n_axes(self) -> int:
        return len(self.grid.axes)

    def table(self) -> np.ndarray:
        return self.weights.reshape(self.grid.shape)

    def as_dict(self) -> dict[tuple[float, ...], float]:
        return {
            tuple(float(x) for x in row): float(w)
            for row, w in zip(self.grid.coordinates, self.weights)
        }

    def to_json(self) -> dict:
        return {
            "axes": [[float(x) for x in ax] for ax in self.grid.axes],
            "weights": [float(w) for w in self.weights],
            "kind": self.kind,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "JointDistribution":
        try:
            axes = tuple(tuple(float(x) for x in ax) for ax in obj["axes"])
            return cls(OutcomeGrid(axes), np.asarray(obj["weights"], dtype=float), obj.get("kind", PROBABILITY))
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInput(f"malformed distribution JSON: {exc}") from exc


def check_distribution(d: JointDistribution, sum_tol: float = 1e-10, neg_tol: float = 1e-10) -> None:
    """Raise if ``d`` is not normalized or, for probabilities, has negative mass."""
    total = float(np.sum(d.weights))
    if not abs(total - 1.0) <= sum_tol:
        raise NormalizationViolation(total)
    if d.kind == PROBABILITY and d.weights.size:
        i = int(np.argmin(d.weights))
        if d.weights[i] < -neg_tol:
            raise NonnegativityViolation(i, float(d.weights[i]))


def _finalize(grid: OutcomeGrid, weights: np.ndarray, kind: str, config: QjdConfig) -> JointDistribution:
    w = np.asarray(weights, dtype=np.float64).ravel().copy()
    total = float(w.sum())
    if not abs(total - 1.0) <= config.violation_tol:
        raise NormalizationViolation(total)
    if kind == PROBABILITY:
        i = int(np.argmin(w))
        if w[i] < -config.violation_tol:
            raise NonnegativityViolation(i, float(w[i]))
        # Only roundoff-sized negatives are clamped; anything larger stays visible.
        tiny = (w < 0) & (w >= -config.clamp_tol)
        clamped = float(-w[tiny].sum())
        w[tiny] = 0.0
        if clamped > config.renormalize_above:
            w /= w.sum()
    return JointDistribution(grid, w, kind)


def _prepare(obs: Sequence[Any], rho: Any, config: QjdConfig):
    if len(obs) == 0:
        raise WrongArity("need at least one observable")
    observables = [as_observable(a) for a in obs]
    state = as_state(rho)
    check_same_dim(state, *observables)
    measures = [eigendecompose(a, config.cluster_tol) for a in observables]
    return observables, state, measures


def _stack(sm: SpectralMeasure) -> np.ndarray:
    return np.stack(sm.projectors)


def _state_factor(rho: np.ndarray) -> np.ndarray:
    """A matrix S with S S^H = rho."""
    w, v = np.linalg.eigh(rho)
    return v * np.sqrt(np.clip(w, 0.0, None))[np.newaxis, :]


def _ordered_weights(measures: Sequence[SpectralMeasure], factor: np.ndarray, order: Sequence[int]) -> np.ndarray:
    """Squared norms of P_{order[-1]} ... P_{order[0]} S, indexed in original axis order."""
    d = factor.shape[0]
    branches = factor[np.newaxis]
    for idx in order:
        p = _stack(measures[idx])
        branches = (p[np.newaxis] @ branches[:, np.newaxis]).reshape(-1, d, d)
    w = np.sum(np.abs(branches) ** 2, axis=(1, 2))
    w = w.reshape([len(measures[i]) for i in order])
    return np.transpose(w, np.argsort(order))


def qjd_joint(obs: Sequence[Any], rho: Any, config: QjdConfig = DEFAULT_CONFIG) -> JointDistribution:
    """Joint probability distribution of an arbitrary tuple of observables.

    Orbit average of ordered Lüders weights over all orderings; see the
    module docstring.
    """
    if len(obs) > config.max_observables:
        raise TooLarge(f"{len(obs)} observables exceeds max_observables={config.max_observables}")
    _, state, measures = _prepare(obs, rho, config)
    factor = _state_factor(state.matrix)
    n = len(measures)
    acc = np.zeros([len(sm) for sm in measures])
    orders = list(itertools.permutations(range(n)))
    for order in orders:
        acc += _ordered_weights(measures, factor, order)
    acc /= len(orders)
    return _finalize(OutcomeGrid.from_measures(measures), acc, PROBABILITY, config)


def commuting_violation(obs: Sequence[Any], commute_tol: float = DEFAULT_CONFIG.commute_tol) -> tuple[int, int, float, float] | None:
    """First pair breaking the commuting precondition, as ``(i, j, norm, bound)``."""
    mats = [as_observable(a) for a in obs]
    for i, j in itertools.combinations(range(len(mats)), 2):
        norm = commutator_norm(mats[i], mats[j])
        bound = commute_tol * max(1.0, frobenius(mats[i]) * frobenius(mats[j]))
        if norm > bound:
            return i, j, norm, bound
    return None


def standard_commuting_joint(obs: Sequence[Any], rho: Any, commute_tol: float = DEFAULT_CONFIG.commute_tol,
                             config: QjdConfig = DEFAULT_CONFIG) -> JointDistribution:
    """``Re tr(rho P1_{j1} ... Pn_{jn})`` for a pairwise-commuting tuple."""
    if len(obs) == 0:
        raise WrongArity("need at least one observable")
    check_same_dim(rho, *obs)
    bad = commuting_violation(obs, commute_tol)
    if bad is not None:
        i, j, norm, bound = bad
        raise NotCommuting((i, j), norm, bound)
    _, state, measures = _prepare(obs, rho, config)
    d = state.dim
    prods = state.matrix[np.newaxis]
    for sm in measures:
        prods = (prods[:, np.newaxis] @ _stack(sm)[np.newaxis]).reshape(-1, d, d)
    w = np.trace(prods, axis1=1, axis2=2).real
    return _finalize(OutcomeGrid.from_measures(measures), w, PROBABILITY, config)


def sequential_joint(obs: Sequence[Any], rho: Any, config: QjdConfig = DEFAULT_CONFIG) -> JointDistribution:
    """Lüders measurements in list order: ``Re tr(Pn..P1 rho P1..Pn)``."""
    _, state, measures = _prepare(obs, rho, config)
    d = state.dim
    states = state.matrix[np.newaxis]
    for sm in measures:
        p = _stack(sm)
        states = (p[np.newaxis] @ states[:, np.newaxis] @ p[np.newaxis]).reshape(-1, d, d)
    w = np.trace(states, axis1=1, axis2=2).real
    return _finalize(OutcomeGrid.from_measures(measures), w, PROBABILITY, config)


def margenau_hill_joint(obs: Sequence[Any], rho: Any, config: QjdConfig = DEFAULT_CONFIG) -> JointDistribution:
    """``Re tr(rho (P_i Q_j + Q_j P_i) / 2)``; may be negative."""
    if len(obs) != 2:
        raise WrongArity(f"Margenau-Hill needs exactly 2 observables, got {len(obs)}")
    _, state, (sa, sb) = _prepare(obs, rho, config)
    pa, pb = _stack(sa), _stack(sb)
    sym = 0.5 * (pa[:, np.newaxis] @ pb[np.newaxis] + pb[np.newaxis] @ pa[:, np.newaxis])
    w = np.einsum("ab,ijba->ij", state.matrix, sym).real
    return _finalize(OutcomeGrid.from_measures([sa, sb]), w, QUASI, config)


def born(a: Any, rho: Any, config: QjdConfig = DEFAULT_CONFIG) -> JointDistribution:
    """Single-observable Born distribution ``tr(rho P_j)``."""
    _, state, (sm,) = _prepare([a], rho, config)
    w = np.array([np.trace(state.matrix @ p).real for p in sm.projectors])
    return _finalize(OutcomeGrid.from_measures([sm]), w, PROBABILITY, config)


def marginal(d: JointDistribution, axes_to_keep: Iterable[int]) -> JointDistribution:
    keep = sorted(set(int(a) for a in axes_to_keep))
    if not keep:
        raise EmptyAxisSet("axes_to_keep is empty")
    if keep[0] < 0 or keep[-1] >= d.n_axes:
        raise IndexOutOfRange(f"axes {keep} outside 0..{d.n_axes - 1}")
    drop = tuple(i for i in range(d.n_axes) if i not in keep)
    w = d.table().sum(axis=drop) if drop else d.table()
    grid = OutcomeGrid(tuple(d.grid.axes[i] for i in keep))
    return JointDistribution(grid, w.ravel(), d.kind)


def total_variation(d1: JointDistribution, d2: JointDistribution, grid_tol: float = GRID_TOL) -> float:
    if not d1.grid.matches(d2.grid, grid_tol):
        raise GridMismatch(f"grids differ: {d1.grid.shape} vs {d2.grid.shape}")
    return 0.5 * float(np.sum(np.abs(d1.weights - d2.weights)))


def wasserstein1(d1: JointDistribution, d2: JointDistribution, max_support: int = MAX_TRANSPORT_SUPPORT) -> float:
    """Exact W1 distance with the L1 ground metric on eigenvalue tuples.

    Solved as a transportation linear program with HiGHS on the supports
    (points of positive weight) of both distributions.
    """
    if d1.kind != PROBABILITY or d2.kind != PROBABILITY:
        raise UnsupportedKind("wasserstein1 is only defined for probability distributions")
    if d1.n_axes != d2.n_axes:
        raise GridMismatch(f"{d1.n_axes} axes vs {d2.n_axes} axes")
    m1, m2 = d1.weights > 0, d2.weights > 0
    x, p = d1.grid.coordinates[m1], d1.weights[m1]
    y, q = d2.grid.coordinates[m2], d2.weights[m2]
    if len(p) + len(q) > max_support:
        raise TooLarge(f"combined support {len(p) + len(q)} exceeds {max_support}")
    p, q = p / p.sum(), q / q.sum()
    cost = np.abs(x[:, np.newaxis, :] - y[np.newaxis, :, :]).sum(axis=2)
    if len(p) == 1 or len(q) == 1:
        return float(np.sum(cost * np.outer(p, q)))

    a, b = len(p), len(q)
    rows = np.repeat(np.arange(a), b)
    cols = np.tile(np.arange(b), a)
    var = np.arange(a * b)
    eq = sparse.csr_matrix(
        (np.ones(2 * a * b), (np.concatenate([rows, a + cols]), np.concatenate([var, var]))),
        shape=(a + b, a * b),
    )
    # One marginal constraint is implied by the others; dropping it keeps the system full rank.
    a_eq, b_eq = eq[:-1], np.concatenate([p, q])[:-1]
    for method, options in _TRANSPORT_ATTEMPTS:
        res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method=method, options=options)
        if res.status == 0 and np.max(np.abs(a_eq @ res.x - b_eq)) <= 1e-9:
            return max(0.0, float(cost.ravel() @ res.x))
    raise InvalidInput(f"transport solver failed: {res.message}")
