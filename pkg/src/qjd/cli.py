"""qjd command-line front end.

Usage:
    qjd decompose --obs A.json
    qjd joint --obs A.json --obs B.json --state rho.json [--format table]
    qjd baselines --obs A.json --obs B.json --state rho.json
    qjd verify --seed 1 [--trials 100] [--dims 2..6] [--nobs 1..3]
    qjd sweep --seed 5 [--dims 3] [--nobs 2] [--format csv]

Exit status: 0 success, 1 property failure, 2 invalid input, 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import InvalidInput, PropertyViolation, QjdError
from .jointdist import (
    DEFAULT_CONFIG,
    JointDistribution,
    QjdConfig,
    commuting_violation,
    margenau_hill_joint,
    qjd_joint,
    sequential_joint,
    standard_commuting_joint,
)
from .matrix import HermitianObservable, as_state, matrix_from_json, random_hermitian
from .spectral import eigendecompose
from .verify import (
    DEFAULT_TS,
    STREAMS,
    check_continuity_sweep,
    continuity_series,
    dumps_reports,
    run_all,
    VerificationReport,
    TrialResult,
    TrialSpec,
    PASS,
    FAIL,
)

EXIT_OK, EXIT_PROPERTY, EXIT_INVALID, EXIT_INTERNAL = 0, 1, 2, 3

# Suite-level tolerances that --tol may override besides the QjdConfig fields.
SUITE_TOLS = {"agreement_tol": 1e-8, "covariance_tol": 1e-8, "continuity_cap": 1e-2}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_INVALID)


def _range(text: str) -> tuple[int, int]:
    lo, sep, hi = text.partition("..")
    try:
        lo_i = int(lo)
        hi_i = int(hi) if sep else lo_i
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N or LO..HI, got {text!r}")
    if lo_i > hi_i or lo_i < 1:
        raise argparse.ArgumentTypeError(f"bad range {text!r}")
    return lo_i, hi_i


def _tol(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        x = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not a number")
    if not 0 < x <= 1e-2:
        raise argparse.ArgumentTypeError(f"tolerance {name} must lie in (0, 1e-2], got {x}")
    return name.strip(), x


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qjd", description="Joint distributions for tuples of quantum observables.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, fmt="json"):
        p.add_argument("--out", type=Path, help="write output here instead of stdout")
        p.add_argument("--format", choices=["json", "table", "csv"], default=fmt)
        p.add_argument("--tol", type=_tol, action="append", default=[], metavar="NAME=VALUE")
        p.add_argument("--json-errors", action="store_true", help="diagnostics as JSON on stderr")

    p = sub.add_parser("decompose", help="spectral measure of one observable")
    p.add_argument("--obs", type=Path, action="append", required=True)
    common(p)

    for name, text in (("joint", "joint distribution of the observables"),
                       ("baselines", "joint distribution next to the baseline constructions")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--obs", type=Path, action="append", required=True)
        p.add_argument("--state", type=Path, required=True)
        common(p, "json" if name == "joint" else "table")

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--sweeps", type=int, default=10)
    p.add_argument("--dims", type=_range, default=(2, 6))
    p.add_argument("--nobs", type=_range, default=(1, 3))
    p.add_argument("--omit-timing", action="store_true", help="leave wall times out of the JSON report")
    common(p)

    p = sub.add_parser("sweep", help="continuity sweep, CSV of t against W1 distance")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dims", type=_range, default=(3, 3))
    p.add_argument("--nobs", type=_range, default=(2, 2))
    p.add_argument("--obs", type=Path, action="append", help="sweep these observables instead of random ones")
    p.add_argument("--state", type=Path)
    p.add_argument("--ts", type=float, nargs="+", default=list(DEFAULT_TS))
    common(p, "csv")
    return parser


def _load_json(path: Path):
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"{path} is not valid JSON: {exc}") from exc


def _observables(paths) -> list[HermitianObservable]:
    return [HermitianObservable(matrix_from_json(_load_json(p)), label=p.stem) for p in paths]


def _config(tols) -> tuple[QjdConfig, dict]:
    fields = set(DEFAULT_CONFIG.as_dict()) - {"max_observables"}
    cfg, suite = {}, dict(SUITE_TOLS)
    for name, value in tols:
        if name in fields:
            cfg[name] = value
        elif name in suite:
            suite[name] = value
        else:
            raise InvalidInput(f"unknown tolerance {name!r}; known: {sorted(fields | set(suite))}")
    return DEFAULT_CONFIG.replace(**cfg), suite


def _num(x: float) -> str:
    return f"{x:.12g}"


def _dist_table(d: JointDistribution, labels) -> str:
    head = "  ".join(f"{lab:>20}" for lab in labels) + f"  {'weight':>20}"
    rows = [head, "-" * len(head)]
    for coords, w in zip(d.grid.coordinates, d.weights):
        rows.append("  ".join(f"{_num(c):>20}" for c in coords) + f"  {_num(w):>20}")
    return "\n".join(rows) + "\n"


def _dist_csv(d: JointDistribution, labels) -> str:
    rows = [",".join(list(labels) + ["weight"])]
    rows += [",".join(repr(float(c)) for c in coords) + f",{float(w)!r}"
             for coords, w in zip(d.grid.coordinates, d.weights)]
    return "\n".join(rows) + "\n"


def _labels(obs) -> list[str]:
    return [o.label or f"A{i + 1}" for i, o in enumerate(obs)]


def cmd_decompose(args, config, suite) -> tuple[str, int]:
    out = []
    for a in _observables(args.obs):
        sm = eigendecompose(a, config.cluster_tol)
        out.append((a, sm))
    if args.format == "json":
        payload = [sm.to_json() for _, sm in out]
        return json.dumps(payload[0] if len(payload) == 1 else payload, indent=2), EXIT_OK
    lines = []
    if args.format == "csv":
        lines.append("observable,eigenvalue,rank")
        lines += [f"{a.label},{lam!r},{r}" for a, sm in out for lam, r in zip(sm.eigenvalues, sm.ranks)]
    else:
        for a, sm in out:
            lines.append(f"{a.label}: dim {sm.dim}, {len(sm)} distinct eigenvalues")
            lines += [f"  {_num(lam):>20}  rank {r}" for lam, r in zip(sm.eigenvalues, sm.ranks)]
    return "\n".join(lines) + "\n", EXIT_OK


def cmd_joint(args, config, suite) -> tuple[str, int]:
    obs = _observables(args.obs)
    rho = as_state(matrix_from_json(_load_json(args.state)))
    d = qjd_joint(obs, rho, config)
    if args.format == "json":
        return json.dumps(d.to_json(), indent=2), EXIT_OK
    if args.format == "csv":
        return _dist_csv(d, _labels(obs)), EXIT_OK
    return _dist_table(d, _labels(obs)), EXIT_OK


def cmd_baselines(args, config, suite) -> tuple[str, int]:
    obs = _observables(args.obs)
    rho = as_state(matrix_from_json(_load_json(args.state)))
    results: dict[str, JointDistribution | None] = {"qjd": qjd_joint(obs, rho, config)}
    notes = {}
    bad = commuting_violation(obs, config.commute_tol)
    if bad is None:
        results["standard"] = standard_commuting_joint(obs, rho, config.commute_tol, config)
    else:
        results["standard"] = None
        notes["standard"] = f"observables {bad[0]} and {bad[1]} do not commute (norm {bad[2]:.3g})"
    results["sequential"] = sequential_joint(obs, rho, config)
    if len(obs) == 2:
        results["margenau_hill"] = margenau_hill_joint(obs, rho, config)
    else:
        results["margenau_hill"] = None
        notes["margenau_hill"] = "defined for exactly two observables"

    ref = results["qjd"].weights
    present = {k: v for k, v in results.items() if v is not None}
    deviation = np.max(np.abs(np.stack([v.weights for v in present.values()]) - ref), axis=0)

    if args.format == "json":
        payload = {k: (v.to_json() if v is not None else None) for k, v in results.items()}
        payload["max_deviation"] = [float(x) for x in deviation]
        payload["notes"] = notes
        return json.dumps(payload, indent=2), EXIT_OK

    labels = _labels(obs)
    names = list(present)
    if args.format == "csv":
        rows = [",".join(labels + names + ["max_deviation"])]
        for k, coords in enumerate(results["qjd"].grid.coordinates):
            rows.append(",".join([repr(float(c)) for c in coords]
                                 + [repr(float(present[n].weights[k])) for n in names]
                                 + [repr(float(deviation[k]))]))
        return "\n".join(rows) + "\n", EXIT_OK
    head = "  ".join(f"{x:>20}" for x in labels + names + ["max_deviation"])
    rows = [head, "-" * len(head)]
    for k, coords in enumerate(results["qjd"].grid.coordinates):
        cells = [_num(c) for c in coords] + [_num(present[n].weights[k]) for n in names] + [_num(deviation[k])]
        rows.append("  ".join(f"{c:>20}" for c in cells))
    rows += [f"note: {k}: {v}" for k, v in notes.items()]
    return "\n".join(rows) + "\n", EXIT_OK


def cmd_verify(args, config, suite) -> tuple[str, int]:
    if args.trials < 1 or args.sweeps < 1:
        raise InvalidInput("--trials and --sweeps must be >= 1")
    if args.dims[0] < 2:
        raise InvalidInput("--dims must start at 2 or more")
    reports = run_all(args.trials, args.seed, args.dims, args.nobs, config, sweeps=args.sweeps,
                      agreement_tol=suite["agreement_tol"], covariance_tol=suite["covariance_tol"],
                      continuity_cap=suite["continuity_cap"])
    status = EXIT_OK if all(r.passed for r in reports) else EXIT_PROPERTY
    if args.format == "json":
        return dumps_reports(reports, include_wall_time=not args.omit_timing) + "\n", status
    if args.format == "csv":
        rows = ["suite,seed,dim,n_obs,family,error,status"]
        rows += [f"{r.suite},{t.spec.seed},{t.spec.dim},{t.spec.n_obs},{t.spec.family},{t.error!r},{t.status}"
                 for r in reports for t in r.trials]
        return "\n".join(rows) + "\n", status
    return "\n".join(r.to_table() for r in reports), status


def cmd_sweep(args, config, suite) -> tuple[str, int]:
    if args.obs:
        report = _sweep_given(args, config, suite)
    else:
        report = check_continuity_sweep(args.seed, args.seed + (1 << 32), args.ts, args.dims[0], args.nobs[0],
                                        suite["continuity_cap"], config=config)
    status = EXIT_OK if report.passed else EXIT_PROPERTY
    if args.format == "csv":
        return report.to_csv(), status
    if args.format == "json":
        return json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", status
    return report.to_table(), status


def _sweep_given(args, config, suite) -> VerificationReport:
    if args.state is None:
        raise InvalidInput("--state is required together with --obs")
    ts = list(args.ts)
    if any(t <= 0 for t in ts) or any(b >= a for a, b in zip(ts, ts[1:])):
        raise InvalidInput("--ts must be positive and strictly decreasing")
    obs = _observables(args.obs)
    rho = as_state(matrix_from_json(_load_json(args.state)))
    h = random_hermitian(obs[0].dim, args.seed, stream=STREAMS["direction"]).matrix
    ws = continuity_series(obs, rho, h / np.linalg.norm(h, "fro"), ts, config)
    spec = TrialSpec(obs[0].dim, len(obs), args.seed)
    rows = []
    for k, (t, w) in enumerate(zip(ts, ws)):
        ok = (k == 0 or w <= ws[k - 1] + 1e-10) and (k < len(ts) - 1 or w <= suite["continuity_cap"])
        rows.append(TrialResult(spec, w, PASS if ok else FAIL, f"t={t!r}"))
    return VerificationReport("continuity_sweep", suite["continuity_cap"], rows,
                              {"direction_seed": args.seed, "ts": ts, "observables": [str(p) for p in args.obs]},
                              series=list(zip(ts, ws)))


COMMANDS = {
    "decompose": cmd_decompose,
    "joint": cmd_joint,
    "baselines": cmd_baselines,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def _report_error(args, exc: BaseException, code: int) -> int:
    if getattr(args, "json_errors", False):
        print(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit": code}), file=sys.stderr)
    else:
        print(f"qjd: {type(exc).__name__}: {exc}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config, suite = _config(args.tol)
        text, status = COMMANDS[args.command](args, config, suite)
    except PropertyViolation as exc:
        return _report_error(args, exc, EXIT_PROPERTY)
    except InvalidInput as exc:
        return _report_error(args, exc, EXIT_INVALID)
    except QjdError as exc:
        return _report_error(args, exc, EXIT_INTERNAL)
    except Exception as exc:  # noqa: BLE001 - every other failure is an internal error
        return _report_error(args, exc, EXIT_INTERNAL)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
