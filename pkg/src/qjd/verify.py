"""Seeded property suites for the joint-distribution construction.

Every suite is a pure function of its arguments.  Trial ``i`` uses seed
``base_seed + i`` and nothing else, and draws its pieces from fixed
substreams of that seed (see ``STREAMS``), so a single trial can be
reproduced in isolation from its recorded seed.
"""

from __future__ import annotations

import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import InvalidInput, NotCommuting, QjdError
from .jointdist import (
    DEFAULT_CONFIG,
    JointDistribution,
    QjdConfig,
    born,
    marginal,
    qjd_joint,
    sequential_joint,
    standard_commuting_joint,
    total_variation,
    wasserstein1,
)
from .matrix import (
    DensityState,
    HermitianObservable,
    UnitaryMatrix,
    conjugate_observable,
    conjugate_state,
    haar_unitary,
    random_density,
    random_hermitian,
    uniform_stream,
)

GENERIC = "generic"
COMMUTING = "commuting"
NEAR_COMMUTING = "near_commuting"

STREAMS = {
    "observable": 0,  # + observable index
    "state": 100,
    "unitary": 200,
    "direction": 300,
    "spectrum": 400,  # + observable index
    "shape": 500,
    "noise": 600,  # + observable index
}

DEFAULT_TS = (1e-1, 3e-2, 1e-2, 3e-3, 1e-3, 3e-4, 1e-4)
SUM_TOL = 1e-10


@dataclass(frozen=True)
class TrialSpec:
    dim: int
    n_obs: int
    seed: int
    family: str = GENERIC
    epsilon: float | None = None

    def __post_init__(self):
        if self.dim < 2 or self.n_obs < 1:
            raise InvalidInput(f"need dim >= 2 and n_obs >= 1, got {self.dim}, {self.n_obs}")
        if self.family not in (GENERIC, COMMUTING, NEAR_COMMUTING):
            raise InvalidInput(f"unknown family {self.family!r}")
        if self.family == NEAR_COMMUTING and not (self.epsilon and self.epsilon > 0):
            raise InvalidInput("near_commuting needs epsilon > 0")

    def to_json(self) -> dict:
        out = {"dim": self.dim, "n_obs": self.n_obs, "seed": self.seed, "family": self.family}
        if self.epsilon is not None:
            out["epsilon"] = self.epsilon
        return out


PASS, FAIL, INVALID, ERROR = "pass", "fail", "invalid", "error"


@dataclass(frozen=True)
class TrialResult:
    spec: TrialSpec
    error: float
    status: str
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_json(self) -> dict:
        return {**self.spec.to_json(), "error": _json_float(self.error), "status": self.status,
                "pass": self.passed, "detail": self.detail}


@dataclass
class VerificationReport:
    suite: str
    tolerance: float
    trials: list[TrialResult]
    config: dict = field(default_factory=dict)
    wall_time: float = 0.0
    series: list[tuple[float, float]] = field(default_factory=list)

    @property
    def valid(self) -> list[TrialResult]:
        return [t for t in self.trials if t.status != INVALID]

    @property
    def n_failed(self) -> int:
        return sum(t.status in (FAIL, ERROR) for t in self.trials)

    @property
    def n_invalid(self) -> int:
        return sum(t.status == INVALID for t in self.trials)

    @property
    def max_error(self) -> float:
        errs = [t.error for t in self.valid if not math.isnan(t.error)]
        return max(errs, default=math.nan)

    @property
    def passed(self) -> bool:
        # A report without a single valid trial proves nothing.
        return bool(self.valid) and self.n_failed == 0

    def summary(self) -> dict:
        return {
            "trials": len(self.trials),
            "valid": len(self.valid),
            "failed": self.n_failed,
            "invalid": self.n_invalid,
            "max_error": _json_float(self.max_error),
            "passed": self.passed,
        }

    def to_json(self, include_wall_time: bool = True) -> dict:
        out = {
            "suite": self.suite,
            "tolerance": self.tolerance,
            "config": self.config,
            "summary": self.summary(),
            "trials": [t.to_json() for t in self.trials],
        }
        if self.series:
            out["series"] = [{"t": t, "w1_distance": w} for t, w in self.series]
        if include_wall_time:
            out["wall_time"] = self.wall_time
        return out

    def to_table(self) -> str:
        buf = io.StringIO()
        s = self.summary()
        buf.write(f"suite: {self.suite}   tolerance: {self.tolerance:.3g}   "
                  f"{'PASS' if self.passed else 'FAIL'}\n")
        buf.write(f"trials {s['trials']}  valid {s['valid']}  failed {s['failed']}  "
                  f"invalid {s['invalid']}  max error {_fmt(self.max_error)}  "
                  f"time {self.wall_time:.2f}s\n")
        header = f"{'seed':>8} {'dim':>4} {'n':>3} {'family':<15} {'error':>20} {'status':<8}"
        buf.write(header + "\n" + "-" * len(header) + "\n")
        for t in self.trials:
            sp = t.spec
            buf.write(f"{sp.seed:>8} {sp.dim:>4} {sp.n_obs:>3} {sp.family:<15} {_fmt(t.error):>20} {t.status:<8}\n")
        return buf.getvalue()

    def to_csv(self) -> str:
        lines = ["t,w1_distance"]
        lines += [f"{t!r},{w!r}" for t, w in self.series]
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def _json_float(x: float):
    return None if math.isnan(x) else float(x)


def dumps_reports(reports: Sequence[VerificationReport], include_wall_time: bool = True) -> str:
    payload = {"reports": [r.to_json(include_wall_time) for r in reports],
               "passed": all(r.passed for r in reports)}
    return json.dumps(payload, indent=2, sort_keys=True)


# --- input families --------------------------------------------------------


def _unit(h: np.ndarray) -> np.ndarray:
    return h / np.linalg.norm(h, "fro")


def trial_shape(seed: int, dims: tuple[int, int], n_obs: tuple[int, int]) -> tuple[int, int]:
    """Dimension and tuple length for a trial, drawn from the trial's own seed."""
    u = uniform_stream(seed, STREAMS["shape"], 2)
    dim = dims[0] + int(u[0] * (dims[1] - dims[0] + 1))
    n = n_obs[0] + int(u[1] * (n_obs[1] - n_obs[0] + 1))
    return dim, n


def commuting_spectra(spec: TrialSpec) -> list[np.ndarray]:
    """Integer-valued diagonals; small integer alphabets make degeneracies common."""
    out = []
    for i in range(spec.n_obs):
        u = uniform_stream(spec.seed, STREAMS["spectrum"] + i, spec.dim)
        out.append(np.floor(u * spec.dim) - spec.dim // 2)
    return out


def build_family(spec: TrialSpec) -> tuple[list[HermitianObservable], UnitaryMatrix | None, list[np.ndarray] | None]:
    """Observables for a trial, plus the shared eigenbasis and spectra if commuting."""
    if spec.family == GENERIC:
        obs = [random_hermitian(spec.dim, spec.seed, stream=STREAMS["observable"] + i, label=f"A{i + 1}")
               for i in range(spec.n_obs)]
        return obs, None, None
    u = haar_unitary(spec.dim, spec.seed, stream=STREAMS["unitary"] + 1)
    diags = commuting_spectra(spec)
    mats = [u.matrix @ np.diag(dg) @ u.matrix.conj().T for dg in diags]
    if spec.family == NEAR_COMMUTING:
        mats = [m + spec.epsilon * _unit(random_hermitian(spec.dim, spec.seed, stream=STREAMS["noise"] + i).matrix)
                for i, m in enumerate(mats)]
    obs = [HermitianObservable(m, label=f"A{i + 1}") for i, m in enumerate(mats)]
    return obs, u, diags


def build_state(spec: TrialSpec) -> DensityState:
    return random_density(spec.dim, spec.seed, stream=STREAMS["state"])


def _specs(trials: int, base_seed: int, dims, n_obs, family: str, epsilon: float | None) -> list[TrialSpec]:
    if trials < 1:
        raise InvalidInput("trials must be >= 1")
    out = []
    for i in range(trials):
        seed = base_seed + i
        dim, n = trial_shape(seed, tuple(dims), tuple(n_obs))
        out.append(TrialSpec(dim, n, seed, family, epsilon))
    return out


def _run(suite: str, tol: float, specs: Sequence[TrialSpec], measure: Callable[[TrialSpec], float],
         config: dict) -> VerificationReport:
    start = time.perf_counter()
    results = []
    for spec in specs:
        try:
            err = float(measure(spec))
        except NotCommuting as exc:
            results.append(TrialResult(spec, math.nan, INVALID, str(exc)))
            continue
        except QjdError as exc:
            results.append(TrialResult(spec, math.nan, ERROR, f"{type(exc).__name__}: {exc}"))
            continue
        results.append(TrialResult(spec, err, PASS if err <= tol else FAIL))
    return VerificationReport(suite, tol, results, config, time.perf_counter() - start)


def _echo(config: QjdConfig, **extra: Any) -> dict:
    return {**extra, "qjd": config.as_dict()}


# --- suites ----------------------------------------------------------------


def max_weight_difference(d1: JointDistribution, d2: JointDistribution) -> float:
    if not d1.grid.matches(d2.grid):
        return math.inf
    return float(np.max(np.abs(d1.weights - d2.weights)))


def check_commuting_agreement(trials: int, base_seed: int, dims=(2, 6), n_obs=(2, 3), tol: float = 1e-8,
                              family: str = COMMUTING, epsilon: float | None = None,
                              config: QjdConfig = DEFAULT_CONFIG) -> VerificationReport:
    """Max per-weight gap between qjd_joint and the standard commuting formula."""

    def measure(spec):
        obs, _, _ = build_family(spec)
        rho = build_state(spec)
        ref = standard_commuting_joint(obs, rho, config.commute_tol, config)
        return max_weight_difference(qjd_joint(obs, rho, config), ref)

    specs = _specs(trials, base_seed, dims, n_obs, family, epsilon)
    return _run("commuting_agreement", tol, specs, measure,
                _echo(config, trials=trials, base_seed=base_seed, dims=list(dims), n_obs=list(n_obs)))


def covariance_error(obs: Sequence[Any], rho: Any, u: Any, config: QjdConfig = DEFAULT_CONFIG) -> float:
    """max(total variation, largest eigenvalue-axis shift) after conjugating by ``u``."""
    before = qjd_joint(obs, rho, config)
    after = qjd_joint([conjugate_observable(a, u) for a in obs], conjugate_state(rho, u), config)
    if before.grid.shape != after.grid.shape:
        return math.inf
    axis_err = max(float(np.max(np.abs(np.subtract(a, b)))) for a, b in zip(before.grid.axes, after.grid.axes))
    tv = 0.5 * float(np.sum(np.abs(before.weights - after.weights)))
    return max(tv, axis_err)


def check_unitary_covariance(trials: int, base_seed: int, dims=(2, 6), n_obs=(1, 3), tol: float = 1e-8,
                             unitary: Callable[[int, int], UnitaryMatrix] | None = None,
                             config: QjdConfig = DEFAULT_CONFIG) -> VerificationReport:
    """Generic tuples and states conjugated by a Haar unitary (or ``unitary(dim, seed)``)."""

    def measure(spec):
        obs, _, _ = build_family(spec)
        u = unitary(spec.dim, spec.seed) if unitary else haar_unitary(spec.dim, spec.seed, stream=STREAMS["unitary"])
        return covariance_error(obs, build_state(spec), u, config)

    specs = _specs(trials, base_seed, dims, n_obs, GENERIC, None)
    return _run("unitary_covariance", tol, specs, measure,
                _echo(config, trials=trials, base_seed=base_seed, dims=list(dims), n_obs=list(n_obs),
                      unitary="haar" if unitary is None else getattr(unitary, "__name__", "custom")))


def continuity_series(obs: Sequence[Any], rho: Any, direction: np.ndarray, ts: Sequence[float],
                      config: QjdConfig = DEFAULT_CONFIG, index: int = 0) -> list[float]:
    """W1 distance between the distribution at ``A_index + t H`` and at ``A_index``."""
    obs = list(obs)
    base = qjd_joint(obs, rho, config)
    out = []
    for t in ts:
        moved = list(obs)
        moved[index] = HermitianObservable(np.asarray(_matrix(obs[index])) + t * direction)
        out.append(wasserstein1(qjd_joint(moved, rho, config), base))
    return out


def _matrix(a: Any) -> np.ndarray:
    return a.matrix if isinstance(a, HermitianObservable) else np.asarray(a)


def _check_ts(ts: Sequence[float]) -> None:
    if not ts or any(t <= 0 for t in ts) or any(b >= a for a, b in zip(ts, ts[1:])):
        raise InvalidInput("ts must be positive and strictly decreasing")


def check_continuity_sweep(tuple_seed: int, direction_seed: int, ts: Sequence[float] = DEFAULT_TS,
                           dim: int = 3, n_obs: int = 2, small_t_cap: float = 1e-2, slack: float = 1e-10,
                           config: QjdConfig = DEFAULT_CONFIG) -> VerificationReport:
    """Perturb the first observable of a generic tuple along a unit-Frobenius Hermitian direction.

    One report row per ``t``: the row's error is ``w(t)``; a row fails if
    ``w`` grew relative to the previous (larger) ``t`` by more than
    ``slack``, and the last row also fails if ``w`` exceeds ``small_t_cap``.
    The perturbation size is measured in the Frobenius norm.
    """
    _check_ts(ts)
    spec = TrialSpec(dim, n_obs, tuple_seed, GENERIC)
    start = time.perf_counter()
    obs, _, _ = build_family(spec)
    rho = build_state(spec)
    direction = _unit(random_hermitian(dim, direction_seed, stream=STREAMS["direction"]).matrix)
    results = []
    try:
        ws = continuity_series(obs, rho, direction, ts, config)
    except QjdError as exc:
        results = [TrialResult(spec, math.nan, ERROR, f"{type(exc).__name__}: {exc}")]
        ws = []
    for k, (t, w) in enumerate(zip(ts, ws)):
        ok = k == 0 or w <= ws[k - 1] + slack
        detail = f"t={t!r}"
        if not ok:
            detail += f"; increased from {ws[k - 1]!r}"
        if k == len(ts) - 1 and w > small_t_cap:
            ok = False
            detail += f"; exceeds cap {small_t_cap}"
        results.append(TrialResult(spec, w, PASS if ok else FAIL, detail))
    report = VerificationReport(
        "continuity_sweep", small_t_cap, results,
        _echo(config, tuple_seed=tuple_seed, direction_seed=direction_seed, ts=list(ts), dim=dim, n_obs=n_obs,
              slack=slack, perturbation_norm="frobenius", metric="wasserstein1_l1_ground"),
        time.perf_counter() - start, list(zip(ts, ws)),
    )
    return report


def check_continuity_suite(sweeps: int, base_seed: int, dims=(2, 6), n_obs=(1, 3), ts: Sequence[float] = DEFAULT_TS,
                           small_t_cap: float = 1e-2, slack: float = 1e-10,
                           config: QjdConfig = DEFAULT_CONFIG) -> VerificationReport:
    """Several continuity sweeps; each row is one sweep, failing if any of its steps fails."""
    _check_ts(ts)
    start = time.perf_counter()
    results = []
    for spec in _specs(sweeps, base_seed, dims, n_obs, GENERIC, None):
        # The direction seed is offset so it never coincides with another trial's tuple seed.
        rep = check_continuity_sweep(spec.seed, spec.seed + (1 << 32), ts, spec.dim, spec.n_obs,
                                     small_t_cap, slack, config)
        bad = [t.detail for t in rep.trials if not t.passed]
        err = rep.trials[-1].error
        results.append(TrialResult(spec, err, PASS if not bad else (ERROR if math.isnan(err) else FAIL),
                                   "; ".join(bad)))
    return VerificationReport(
        "continuity", small_t_cap, results,
        _echo(config, sweeps=sweeps, base_seed=base_seed, dims=list(dims), n_obs=list(n_obs), ts=list(ts),
              slack=slack, error="w1 at smallest t"),
        time.perf_counter() - start,
    )


def axiom_error(d: JointDistribution) -> float:
    """Largest of |sum - 1| and the most negative weight's magnitude."""
    return max(abs(float(np.sum(d.weights)) - 1.0), max(0.0, -float(np.min(d.weights))))


def check_axioms(trials: int, base_seed: int, dims=(2, 6), n_obs=(1, 3), construction: str = "qjd",
                 config: QjdConfig = DEFAULT_CONFIG) -> VerificationReport:
    """Normalization and nonnegativity at 1e-10.

    ``construction`` is ``qjd`` or ``sequential`` (generic inputs) or
    ``standard`` (commuting inputs, since it is undefined otherwise).
    """
    builders = {
        "qjd": (GENERIC, lambda o, r: qjd_joint(o, r, config)),
        "sequential": (GENERIC, lambda o, r: sequential_joint(o, r, config)),
        "standard": (COMMUTING, lambda o, r: standard_commuting_joint(o, r, config.commute_tol, config)),
    }
    if construction not in builders:
        raise InvalidInput(f"unknown construction {construction!r}")
    family, build = builders[construction]

    def measure(spec):
        obs, _, _ = build_family(spec)
        return axiom_error(build(obs, build_state(spec)))

    specs = _specs(trials, base_seed, dims, n_obs, family, None)
    return _run(f"axioms[{construction}]", SUM_TOL, specs, measure,
                _echo(config, trials=trials, base_seed=base_seed, dims=list(dims), n_obs=list(n_obs)))


def run_all(trials: int, seed: int, dims=(2, 6), n_obs=(1, 3), config: QjdConfig = DEFAULT_CONFIG,
            sweeps: int = 10, agreement_tol: float = 1e-8, covariance_tol: float = 1e-8,
            continuity_cap: float = 1e-2) -> list[VerificationReport]:
    """The four suites, all derived from one seed."""
    lo = max(2, n_obs[0])
    return [
        check_commuting_agreement(trials, seed, dims, (lo, max(lo, n_obs[1])), agreement_tol, config=config),
        check_unitary_covariance(trials, seed, dims, n_obs, covariance_tol, config=config),
        check_continuity_suite(sweeps, seed, dims, n_obs, small_t_cap=continuity_cap, config=config),
        check_axioms(trials, seed, dims, n_obs, "qjd", config=config),
    ]


# --- measured, not asserted ------------------------------------------------


def survey_open_properties(trials: int, base_seed: int, dims=(2, 6), n_obs=(2, 3),
                           config: QjdConfig = DEFAULT_CONFIG) -> dict:
    """Permutation symmetry and Born-marginal agreement of qjd_joint on generic tuples.

    Returns the worst observed deviations; nothing here is a pass/fail claim.
    """
    worst_perm = 0.0
    worst_marginal = 0.0
    for spec in _specs(trials, base_seed, dims, n_obs, GENERIC, None):
        obs, _, _ = build_family(spec)
        rho = build_state(spec)
        d = qjd_joint(obs, rho, config)
        rev = qjd_joint(obs[::-1], rho, config)
        back = np.transpose(rev.table(), list(range(spec.n_obs))[::-1]).ravel()
        worst_perm = max(worst_perm, float(np.max(np.abs(back - d.weights))))
        for i, a in enumerate(obs):
            worst_marginal = max(worst_marginal, total_variation(marginal(d, [i]), born(a, rho, config)))
    return {"trials": trials, "base_seed": base_seed, "max_reorder_difference": worst_perm,
            "max_marginal_tv_from_born": worst_marginal}


def survey_commuting_bridge(trials: int, base_seed: int, epsilons: Sequence[float] = (1e-2, 1e-4, 1e-6),
                            dims=(2, 6), n_obs=(2, 3), config: QjdConfig = DEFAULT_CONFIG) -> dict:
    """W1 from qjd on near-commuting tuples to the standard distribution of the commuting base.

    Trials whose commuting base has a degenerate spectrum are tallied apart
    from those with simple spectra, since only the latter are expected to
    converge as epsilon shrinks.
    """
    simple = {eps: [] for eps in epsilons}
    degenerate = {eps: [] for eps in epsilons}
    for spec in _specs(trials, base_seed, dims, n_obs, COMMUTING, None):
        base, _, diags = build_family(spec)
        rho = build_state(spec)
        ref = standard_commuting_joint(base, rho, config.commute_tol, config)
        bucket = simple if all(len(set(d)) == len(d) for d in diags) else degenerate
        for eps in epsilons:
            near, _, _ = build_family(TrialSpec(spec.dim, spec.n_obs, spec.seed, NEAR_COMMUTING, eps))
            bucket[eps].append(wasserstein1(qjd_joint(near, rho, config), ref))

    def worst(bucket):
        return {repr(eps): (max(v) if v else None) for eps, v in bucket.items()}

    return {"trials": trials, "base_seed": base_seed,
            "simple_spectrum": {"count": len(simple[epsilons[0]]), "max_w1": worst(simple)},
            "degenerate_spectrum": {"count": len(degenerate[epsilons[0]]), "max_w1": worst(degenerate)}}
