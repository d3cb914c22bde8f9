"""Spectral measures of Hermitian observables.

Downstream code only ever sees the distinct eigenvalues (ascending) and
their orthogonal projectors; raw eigenvectors never leave this module, so
eigensolver basis choices inside degenerate eigenspaces cannot leak out.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DecompositionFailure, DimensionMismatch, IndexOutOfRange, InvalidInput
from .matrix import as_matrix, as_observable, as_unitary, matrix_from_json, matrix_to_json

CLUSTER_TOL = 1e-8
PROJECTOR_TOL = 1e-8
RECONSTRUCTION_RTOL = 1e-7


@dataclass(frozen=True)
class SpectralMeasure:
    eigenvalues: tuple[float, ...]
    projectors: tuple[np.ndarray, ...]
    dim: int

    def __len__(self) -> int:
        return len(self.eigenvalues)

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(int(round(np.trace(p).real)) for p in self.projectors)

    def reconstruct(self) -> np.ndarray:
        out = np.zeros((self.dim, self.dim), dtype=np.complex128)
        for lam, p in zip(self.eigenvalues, self.projectors):
            out += lam * p
        return out

    def invariant_errors(self, source: Any = None) -> dict[str, float]:
        """Worst-case Frobenius residual of each defining invariant.

        ``reconstruction`` is relative to ``max(1, ||A||_F)`` and only
        present when the source observable is given.
        """
        eye = np.eye(self.dim)
        idem = herm = orth = 0.0
        for i, p in enumerate(self.projectors):
            idem = max(idem, float(np.linalg.norm(p @ p - p, "fro")))
            herm = max(herm, float(np.linalg.norm(p - p.conj().T, "fro")))
            for q in self.projectors[i + 1:]:
                orth = max(orth, float(np.linalg.norm(p @ q, "fro")))
        errors = {
            "idempotent": idem,
            "hermitian": herm,
            "orthogonal": orth,
            "resolution": float(np.linalg.norm(sum(self.projectors) - eye, "fro")),
            "rank_sum": float(abs(sum(self.ranks) - self.dim)),
        }
        if source is not None:
            a = as_matrix(source)
            scale = max(1.0, float(np.linalg.norm(a, "fro")))
            errors["reconstruction"] = float(np.linalg.norm(self.reconstruct() - a, "fro")) / scale
        return errors

    def invariants_hold(self, source: Any = None) -> bool:
        errs = self.invariant_errors(source)
        ok = all(errs[k] <= PROJECTOR_TOL for k in ("idempotent", "hermitian", "orthogonal", "resolution"))
        ok = ok and errs["rank_sum"] == 0
        if "reconstruction" in errs:
            ok = ok and errs["reconstruction"] <= RECONSTRUCTION_RTOL
        return ok

    def to_json(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "projectors": [matrix_to_json(p) for p in self.projectors],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SpectralMeasure":
        try:
            eigs = tuple(float(x) for x in obj["eigenvalues"])
            projs = tuple(_readonly(matrix_from_json(p)) for p in obj["projectors"])
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed spectral measure JSON: {exc}") from exc
        if len(eigs) != len(projs) or not projs:
            raise InvalidInput("eigenvalue and projector counts differ")
        if any(b <= a for a, b in zip(eigs, eigs[1:])):
            raise InvalidInput("eigenvalues must be strictly increasing")
        return cls(eigs, projs, projs[0].shape[0])


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.complex128)
    arr.setflags(write=False)
    return arr


def eigendecompose(a: Any, cluster_tol: float = CLUSTER_TOL, *, validate: bool = True) -> SpectralMeasure:
    """Distinct eigenvalues of a Hermitian observable with their projectors.

    Sorted eigenvalues whose consecutive gap is at most
    ``cluster_tol * max(1, max|lambda|)`` are merged; the merged eigenvalue is
    the mean of its members and the projector the sum of their rank-one
    projectors.  With ``validate`` the result is checked against every
    SpectralMeasure invariant and a violation raises DecompositionFailure.
    """
    obs = as_observable(a)
    try:
        w, v = np.linalg.eigh(obs.matrix)
    except np.linalg.LinAlgError as exc:
        raise DecompositionFailure(str(exc)) from exc
    if not np.all(np.isfinite(w)):
        raise DecompositionFailure("eigensolver returned non-finite eigenvalues")

    thresh = cluster_tol * max(1.0, float(np.max(np.abs(w))))
    breaks = np.flatnonzero(np.diff(w) > thresh) + 1
    groups = np.split(np.arange(len(w)), breaks)

    eigs = tuple(float(np.mean(w[g])) for g in groups)
    projs = tuple(_readonly(v[:, g] @ v[:, g].conj().T) for g in groups)
    sm = SpectralMeasure(eigs, projs, obs.dim)
    if validate and not sm.invariants_hold(obs.matrix):
        raise DecompositionFailure(f"spectral invariants violated: {sm.invariant_errors(obs.matrix)}")
    return sm


def projector_for(sm: SpectralMeasure, index: int) -> np.ndarray:
    if not 0 <= index < len(sm):
        raise IndexOutOfRange(f"index {index} outside 0..{len(sm) - 1}")
    return sm.projectors[index]


def conjugate(sm: SpectralMeasure, u: Any) -> SpectralMeasure:
    """Same spectrum, projectors mapped to ``U P U^H``."""
    uu = as_unitary(u).matrix
    if uu.shape[0] != sm.dim:
        raise DimensionMismatch(f"unitary has dim {uu.shape[0]}, measure has dim {sm.dim}")
    projs = []
    for p in sm.projectors:
        q = uu @ p @ uu.conj().T
        projs.append(_readonly(0.5 * (q + q.conj().T)))
    return SpectralMeasure(sm.eigenvalues, tuple(projs), sm.dim)
