"""Operators on truncated vectors and orbit generation.

Shift-type operators act on sequence spaces (``omega``/``kothe``); the
translation, differentiation and differential operators act on Taylor
coefficients (``entire``). Each application returns a new vector whose
``valid_len`` reflects the coefficients lost to truncation.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import SpaceMismatch, ValidityExhausted, WeightLengthMismatch
from .spaces import SEQUENCE_TAGS, TAYLOR_TAGS, TruncatedVector

DEFAULT_TAIL_TOL = 1e-12


def _frozen(values, dtype=None) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    if arr.dtype.kind not in "fc":
        arr = arr.astype(np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class BackwardShift:
    """``(x_1, x_2, ...) -> (w_1 x_2, w_2 x_3, ...)``; unweighted when ``weights`` is None."""

    weights: np.ndarray | None = None
    name = "backward_shift"

    def __post_init__(self):
        if self.weights is not None:
            w = _frozen(self.weights, np.float64)
            if np.any(w <= 0):
                raise ValueError("shift weights must be positive")
            object.__setattr__(self, "weights", w)

    @property
    def invertible(self) -> bool:
        return False

    @property
    def validity_cost(self) -> int:
        return 1

    def to_config(self) -> dict:
        out = {"variant": "backward_shift"}
        if self.weights is not None:
            out["weights"] = ",".join(repr(float(v)) for v in self.weights)
        return out


@dataclass(frozen=True, eq=False)
class Diagonal:
    """``x_j -> lambda_j x_j`` (works in every space)."""

    lambdas: np.ndarray

    name = "diagonal"

    def __post_init__(self):
        object.__setattr__(self, "lambdas", _frozen(self.lambdas))

    @property
    def invertible(self) -> bool:
        return bool(np.all(self.lambdas != 0))

    @property
    def validity_cost(self) -> int:
        return 0

    def to_config(self) -> dict:
        return {"variant": "diagonal", "lambdas": ",".join(_fmt_scalar(v) for v in self.lambdas)}


@dataclass(frozen=True, eq=False)
class Birkhoff:
    """Translation ``f(z) -> f(z + a)`` on Taylor coefficients."""

    a: complex
    tail_tol: float = DEFAULT_TAIL_TOL

    name = "birkhoff"

    def __post_init__(self):
        if self.a == 0:
            raise ValueError("Birkhoff translation needs a != 0")

    @property
    def invertible(self) -> bool:
        return True

    @property
    def validity_cost(self) -> int:
        return 0

    def inverse(self) -> "Birkhoff":
        return Birkhoff(-self.a, self.tail_tol)

    def to_config(self) -> dict:
        return {"variant": "birkhoff", "a": _fmt_scalar(self.a)}


@dataclass(frozen=True, eq=False)
class MacLane:
    """Differentiation ``f -> f'`` on Taylor coefficients."""

    name = "maclane"

    @property
    def invertible(self) -> bool:
        return False

    @property
    def validity_cost(self) -> int:
        return 1

    def to_config(self) -> dict:
        return {"variant": "maclane"}


@dataclass(frozen=True, eq=False)
class DiffOp:
    """``phi(D) = sum_i phi_i D^i`` for a polynomial ``phi``."""

    phi_coeffs: np.ndarray

    name = "diffop"

    def __post_init__(self):
        phi = np.array(self.phi_coeffs)
        if phi.size == 0:
            raise ValueError("phi_coeffs must be nonempty")
        # drop trailing zeros so the degree (and validity cost) is honest
        nz = np.flatnonzero(phi)
        phi = phi[: nz[-1] + 1] if nz.size else phi[:1]
        object.__setattr__(self, "phi_coeffs", _frozen(phi))

    @property
    def degree(self) -> int:
        return len(self.phi_coeffs) - 1

    @property
    def invertible(self) -> bool:
        return False

    @property
    def validity_cost(self) -> int:
        return self.degree

    def phi(self, lam: complex) -> complex:
        return complex(np.polyval(self.phi_coeffs[::-1], lam))

    def to_config(self) -> dict:
        return {"variant": "diffop", "phi": ",".join(_fmt_scalar(v) for v in self.phi_coeffs)}


OperatorSpec = BackwardShift | Diagonal | Birkhoff | MacLane | DiffOp


def _fmt_scalar(v) -> str:
    v = complex(v)
    if v.imag == 0:
        return repr(v.real)
    return repr(v).strip("()")


def _check_domain(op, x: TruncatedVector):
    if isinstance(op, BackwardShift) and x.space_tag not in SEQUENCE_TAGS:
        raise SpaceMismatch("the backward shift acts on sequence spaces only")
    if isinstance(op, (Birkhoff, MacLane, DiffOp)) and x.space_tag not in TAYLOR_TAGS:
        raise SpaceMismatch(f"{op.name} acts on Taylor coefficients (entire space) only")


# ---------------------------------------------------------------------------
# application
# ---------------------------------------------------------------------------

def apply(op, x: TruncatedVector) -> TruncatedVector:
    """One application of ``op`` with truncation bookkeeping."""
    _check_domain(op, x)
    n = x.valid_len
    if isinstance(op, BackwardShift):
        if n < 1:
            raise ValidityExhausted("backward shift needs valid_len >= 1", achieved=0)
        if op.weights is None:
            return TruncatedVector(x.coeffs[1:n], n - 1, x.space_tag, x.finite_support)
        if len(op.weights) < n - 1:
            raise WeightLengthMismatch(f"{len(op.weights)} weights for {n - 1} output coordinates")
        return TruncatedVector(op.weights[: n - 1] * x.coeffs[1:n], n - 1, x.space_tag, x.finite_support)
    if isinstance(op, Diagonal):
        if len(op.lambdas) < n:
            raise WeightLengthMismatch(f"{len(op.lambdas)} eigenvalues for {n} coordinates")
        return TruncatedVector(op.lambdas[:n] * x.coeffs[:n], n, x.space_tag, x.finite_support)
    if isinstance(op, MacLane):
        if n < 2:
            raise ValidityExhausted("differentiation needs valid_len >= 2", achieved=0)
        return TruncatedVector(np.arange(1, n) * x.coeffs[1:n], n - 1, x.space_tag, x.finite_support)
    if isinstance(op, DiffOp):
        return _apply_diffop(op, x)
    if isinstance(op, Birkhoff):
        return _apply_birkhoff(op, x)
    raise TypeError(f"unknown operator {op!r}")


def _apply_diffop(op: DiffOp, x: TruncatedVector) -> TruncatedVector:
    n, d = x.valid_len, op.degree
    if n < d + 1:
        raise ValidityExhausted(f"phi(D) of degree {d} needs valid_len >= {d + 1}", achieved=0)
    out_len = n - d
    c = x.coeffs[:n]
    dtype = np.result_type(c.dtype, op.phi_coeffs.dtype)
    out = np.zeros(out_len, dtype=dtype)
    j = np.arange(out_len, dtype=np.float64)
    falling = np.ones(out_len)  # (j+i)!/j!
    for i, phi_i in enumerate(op.phi_coeffs):
        if i:
            falling = falling * (j + i)
        if phi_i != 0:
            out += phi_i * falling * c[i : i + out_len]
    return TruncatedVector(out, out_len, x.space_tag, x.finite_support)


def _log_binom(n: np.ndarray, k: np.ndarray) -> np.ndarray:
    from math import lgamma

    lg = np.vectorize(lgamma, otypes=[float])
    return lg(n + 1.0) - lg(k + 1.0) - lg(n - k + 1.0)


def _birkhoff_matrix(a: complex, L: int) -> np.ndarray:
    """``M[j, m] = C(m, j) a^(m-j)`` for ``m >= j`` (log-space so large L cannot overflow)."""
    j = np.arange(L)[:, None]
    m = np.arange(L)[None, :]
    upper = m >= j
    if L <= 60:
        binom = np.array([[math.comb(mm, jj) if mm >= jj else 0 for mm in range(L)] for jj in range(L)],
                         dtype=float)
        powers = np.where(upper, m - j, 0)
        return np.where(upper, binom * np.power(complex(a), powers), 0)
    jj, mm = np.broadcast_arrays(j, m)
    diff = np.where(upper, mm - jj, 0)
    logmag = np.where(upper, _log_binom(mm.astype(float), np.minimum(jj, mm).astype(float)), -np.inf)
    logmag = logmag + diff * math.log(abs(a))
    phase = np.exp(1j * math.atan2(complex(a).imag, complex(a).real) * diff)
    return np.where(upper, np.exp(logmag) * phase, 0)


def birkhoff_valid_prefix(a: complex, coeffs: np.ndarray, tol: float) -> int:
    """Number of leading output indices whose omitted-tail estimate stays below ``tol``.

    The tail at index ``j`` is estimated as ``2 * C(L, j) |a|^(L-j) * t`` with
    ``t`` the largest magnitude among the last ``ceil(L/8)`` stored
    coefficients; a vanishing tail (zero padding) keeps every index.
    """
    L = len(coeffs)
    if L == 0:
        return 0
    t = float(np.max(np.abs(coeffs[L - math.ceil(L / 8):])))
    if t == 0.0:
        return L
    j = np.arange(L, dtype=float)
    log_est = math.log(2 * t) + _log_binom(np.full(L, float(L)), j) + (L - j) * math.log(abs(a))
    bad = np.flatnonzero(log_est >= math.log(tol))
    return int(bad[0]) if bad.size else L


def _apply_birkhoff(op: Birkhoff, x: TruncatedVector) -> TruncatedVector:
    n = x.valid_len
    if n < 1:
        raise ValidityExhausted("translation needs valid_len >= 1", achieved=0)
    c = x.coeffs[:n]
    out = _birkhoff_matrix(op.a, n) @ c.astype(np.complex128)
    if np.isrealobj(c) and complex(op.a).imag == 0:
        out = out.real
    keep = n if x.finite_support else birkhoff_valid_prefix(op.a, c, op.tail_tol)
    if keep == 0:
        raise ValidityExhausted("translation tail error exceeds tolerance at every index", achieved=0)
    return TruncatedVector(out[:keep], keep, x.space_tag, x.finite_support)


# ---------------------------------------------------------------------------
# orbits
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Orbit:
    """Points ``T^0 x, ..., T^H x``."""

    base: TruncatedVector
    op: object
    points: list = field(repr=False)
    horizon: int

    def __len__(self):
        return len(self.points)

    def __getitem__(self, n) -> TruncatedVector:
        return self.points[n]

    def coordinate_matrix(self, J: int) -> np.ndarray:
        """(H+1) x J array of the first ``J`` coordinates of every point."""
        short = min(p.valid_len for p in self.points)
        if short < J:
            from .errors import IndexBeyondValidity

            raise IndexBeyondValidity(f"orbit point with valid_len={short} < J={J}")
        return np.stack([p.coeffs[:J] for p in self.points])

    def to_csv(self, path, J: int):
        """Row ``n`` holds real and imaginary parts of the first ``J`` coordinates of ``T^n x``."""
        mat = self.coordinate_matrix(J)
        header = ["n"] + [f"re_{j}" for j in range(1, J + 1)] + [f"im_{j}" for j in range(1, J + 1)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for n, row in enumerate(mat):
                w.writerow([n] + [repr(float(v)) for v in row.real] + [repr(float(v)) for v in np.imag(row)])


def iter_orbit(op, x: TruncatedVector, H: int) -> Iterator[TruncatedVector]:
    """Yield ``T^0 x .. T^H x`` lazily; raises ValidityExhausted like :func:`orbit`."""
    point = x
    yield point
    for n in range(1, H + 1):
        try:
            point = apply(op, point)
        except ValidityExhausted as exc:
            raise ValidityExhausted(
                f"orbit stops after {n - 1} steps (requested {H}): {exc}", achieved=n - 1
            ) from exc
        yield point


def orbit(op, x: TruncatedVector, H: int) -> Orbit:
    """Eager orbit of length ``H + 1``."""
    if H < 0:
        raise ValueError("horizon must be >= 0")
    _check_domain(op, x)
    cost = getattr(op, "validity_cost", 0)
    if cost and x.valid_len - cost * H < 0:
        achieved = x.valid_len // cost
        raise ValidityExhausted(
            f"valid_len={x.valid_len} supports {achieved} applications, requested {H}", achieved=achieved
        )
    points = list(iter_orbit(op, x, H))
    return Orbit(x, op, points, H)


# ---------------------------------------------------------------------------
# eigenvector check
# ---------------------------------------------------------------------------

def exp_coeffs(lam: complex, degree: int) -> np.ndarray:
    """Taylor coefficients ``lam^m / m!`` of ``exp(lam z)`` for ``m = 0..degree``."""
    out = np.ones(degree + 1, dtype=np.complex128)
    for m in range(1, degree + 1):
        out[m] = out[m - 1] * lam / m
    return out


def eigencheck_diffop(phi_coeffs: Sequence[complex], lam: complex, degree: int) -> float:
    """Max coefficient deviation of ``phi(D) e^{lam z}`` from ``phi(lam) e^{lam z}``."""
    op = DiffOp(np.asarray(phi_coeffs))
    if degree < op.degree + 2:
        raise ValueError(f"degree must be >= deg(phi) + 2 = {op.degree + 2}")
    e = exp_coeffs(lam, degree)
    image = apply(op, TruncatedVector(e, degree + 1, "entire"))
    expected = op.phi(lam) * e[: image.valid_len]
    return float(np.max(np.abs(image.valid - expected)))
