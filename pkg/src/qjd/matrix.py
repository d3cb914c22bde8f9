"""Dense complex-matrix kernel.

Validated wrappers for observables, density states and unitaries, a handful
of norms, the JSON matrix format, and seeded samplers.

Random streams come from Philox4x64-10 with the key set directly to
``(seed, substream)``; the raw 64-bit stream is the Philox blocks for
counters 1, 2, 3, ... (NumPy bumps the counter before each block), fixed by
the published Philox constants and never passed through NumPy's seed
hashing.  Uniform doubles take the top 53 bits of each word and
Gaussians use the basic Box-Muller transform; both steps are easy to port.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .errors import (
    DegenerateSample,
    DimensionMismatch,
    InvalidInput,
    NotDensityState,
    NotHermitian,
    NotUnitary,
)

HERMITIAN_RTOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-10
UNITARY_TOL = 1e-8

_U64 = (1 << 64) - 1
_MAX_DENSITY_ATTEMPTS = 8
# Substream layout: each logical stream owns 16 retry slots.
_STREAM_STRIDE = 16


def as_matrix(m: Any) -> np.ndarray:
    """Return ``m`` as a square, finite complex128 array.

    Accepts raw array-likes and any of the wrapper types below.
    """
    if isinstance(m, (HermitianObservable, DensityState, UnitaryMatrix)):
        return m.matrix
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise DimensionMismatch(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInput("matrix has non-finite entries")
    return arr


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


def adjoint(m: Any) -> np.ndarray:
    return as_matrix(m).conj().T


def frobenius(m: Any) -> float:
    return float(np.linalg.norm(as_matrix(m), "fro"))


def hermiticity_error(m: Any) -> float:
    arr = as_matrix(m)
    return float(np.linalg.norm(arr - arr.conj().T, "fro"))


def is_hermitian(m: Any, rtol: float = HERMITIAN_RTOL) -> bool:
    arr = as_matrix(m)
    return hermiticity_error(arr) <= rtol * max(1.0, frobenius(arr))


@dataclass(frozen=True)
class HermitianObservable:
    """A Hermitian matrix with an optional label used in reports.

    The stored matrix is the exact Hermitian part of the input, which is
    accepted only if it is already Hermitian within ``rtol``.
    """

    matrix: np.ndarray
    label: str = ""
    rtol: float = field(default=HERMITIAN_RTOL, repr=False, compare=False)

    def __post_init__(self):
        arr = as_matrix(self.matrix)
        if not is_hermitian(arr, self.rtol):
            raise NotHermitian(
                f"||A - A^H||_F = {hermiticity_error(arr):.3g} exceeds "
                f"{self.rtol:g} * max(1, ||A||_F)"
            )
        object.__setattr__(self, "matrix", _frozen(0.5 * (arr + arr.conj().T)))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class DensityState:
    matrix: np.ndarray
    tol: float = field(default=TRACE_TOL, repr=False, compare=False)

    def __post_init__(self):
        arr = as_matrix(self.matrix)
        if not is_hermitian(arr):
            raise NotHermitian("density matrix is not Hermitian")
        arr = 0.5 * (arr + arr.conj().T)
        tr = np.trace(arr).real
        if abs(tr - 1.0) > self.tol:
            raise NotDensityState(f"trace is {tr!r}, expected 1")
        lo = float(np.linalg.eigvalsh(arr)[0])
        if lo < -PSD_TOL:
            raise NotDensityState(f"smallest eigenvalue {lo!r} is negative")
        object.__setattr__(self, "matrix", _frozen(arr))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class UnitaryMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        arr = as_matrix(self.matrix)
        d = arr.shape[0]
        err = float(np.linalg.norm(arr.conj().T @ arr - np.eye(d), "fro"))
        if err > UNITARY_TOL * d:
            raise NotUnitary(f"||U^H U - I||_F = {err:.3g}")
        object.__setattr__(self, "matrix", _frozen(arr))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def as_observable(a: Any, label: str = "") -> HermitianObservable:
    if isinstance(a, HermitianObservable):
        return a
    return HermitianObservable(a, label=label)


def as_state(rho: Any) -> DensityState:
    if isinstance(rho, DensityState):
        return rho
    return DensityState(rho)


def as_unitary(u: Any) -> UnitaryMatrix:
    if isinstance(u, UnitaryMatrix):
        return u
    return UnitaryMatrix(u)


def check_same_dim(*mats: Any) -> int:
    dims = {as_matrix(m).shape[0] for m in mats}
    if len(dims) != 1:
        raise DimensionMismatch(f"matrices have differing dimensions {sorted(dims)}")
    return dims.pop()


def commutator_norm(a: Any, b: Any) -> float:
    """Frobenius norm of ``AB - BA``."""
    check_same_dim(a, b)
    x, y = as_matrix(a), as_matrix(b)
    return float(np.linalg.norm(x @ y - y @ x, "fro"))


def conjugate_observable(a: Any, u: Any) -> HermitianObservable:
    obs, uu = as_observable(a), as_unitary(u)
    check_same_dim(obs, uu)
    m = uu.matrix @ obs.matrix @ uu.matrix.conj().T
    return HermitianObservable(m, label=obs.label)


def conjugate_state(rho: Any, u: Any) -> DensityState:
    st, uu = as_state(rho), as_unitary(u)
    check_same_dim(st, uu)
    m = uu.matrix @ st.matrix @ uu.matrix.conj().T
    return DensityState(m)


# --- seeded sampling -------------------------------------------------------


def _philox(seed: int, substream: int) -> np.random.Philox:
    key = np.array([int(seed) & _U64, int(substream) & _U64], dtype=np.uint64)
    return np.random.Philox(key=key)


def uniform_stream(seed: int, substream: int, n: int) -> np.ndarray:
    """``n`` doubles in [0, 1) from the top 53 bits of consecutive Philox words."""
    raw = _philox(seed, substream).random_raw(n)
    return (raw >> np.uint64(11)).astype(np.float64) * 2.0**-53


def normal_stream(seed: int, substream: int, n: int) -> np.ndarray:
    """``n`` standard normals via Box-Muller on consecutive uniform pairs."""
    m = (n + 1) // 2
    u = uniform_stream(seed, substream, 2 * m)
    u1, u2 = 1.0 - u[0::2], u[1::2]  # u1 in (0, 1]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(2.0 * math.pi * u2)
    z[1::2] = r * np.sin(2.0 * math.pi * u2)
    return z[:n]


def ginibre(dim: int, seed: int, substream: int = 0) -> np.ndarray:
    """Row-major complex Ginibre matrix with E|z|^2 = 1 per entry."""
    if dim < 1:
        raise InvalidInput("dim must be >= 1")
    z = normal_stream(seed, substream, 2 * dim * dim)
    return ((z[0::2] + 1j * z[1::2]) / math.sqrt(2.0)).reshape(dim, dim)


def random_hermitian(dim: int, seed: int, *, stream: int = 0, label: str = "") -> HermitianObservable:
    g = ginibre(dim, seed, stream * _STREAM_STRIDE)
    return HermitianObservable(g + g.conj().T, label=label)


def random_density(dim: int, seed: int, *, stream: int = 0) -> DensityState:
    for attempt in range(_MAX_DENSITY_ATTEMPTS):
        g = ginibre(dim, seed, stream * _STREAM_STRIDE + attempt)
        w = g @ g.conj().T
        tr = np.trace(w).real
        if tr >= 1e-14:
            return DensityState(w / tr)
    raise DegenerateSample(f"no usable sample after {_MAX_DENSITY_ATTEMPTS} attempts")


def haar_unitary(dim: int, seed: int, *, stream: int = 0) -> UnitaryMatrix:
    """Haar-distributed unitary: QR of a Ginibre matrix with R-phase correction."""
    z = ginibre(dim, seed, stream * _STREAM_STRIDE)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    phases = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1.0), 1.0)
    return UnitaryMatrix(q * phases[np.newaxis, :])


def basis_state(dim: int, index: int) -> DensityState:
    m = np.zeros((dim, dim), dtype=np.complex128)
    m[index, index] = 1.0
    return DensityState(m)


# --- JSON ------------------------------------------------------------------


def matrix_to_json(m: Any) -> dict:
    """``{"dim", "re", "im"}``; floats go through ``repr`` and round-trip exactly."""
    arr = as_matrix(m)
    return {
        "dim": int(arr.shape[0]),
        "re": [[float(x) for x in row] for row in arr.real],
        "im": [[float(x) for x in row] for row in arr.imag],
    }


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        dim = int(obj["dim"])
        re = np.asarray(obj["re"], dtype=np.float64)
        im = np.asarray(obj.get("im", np.zeros_like(re)), dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidInput(f"malformed matrix JSON: {exc}") from exc
    if re.shape != (dim, dim) or im.shape != (dim, dim):
        raise DimensionMismatch(f"matrix JSON declares dim {dim} but has shape {re.shape}/{im.shape}")
    return as_matrix(re + 1j * im)
