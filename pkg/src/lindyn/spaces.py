"""Fréchet spaces at finite truncation.

Three ambient spaces are supported:

* ``omega``  -- all sequences, seminorms ``p_k(x) = max_{j<=k} |x_j|``;
* ``kothe``  -- Köthe echelon spaces lambda^p(A) with a finite window of the
  matrix A, seminorms ``q_k`` (p < inf) or ``r_k`` (p = inf);
* ``entire`` -- entire functions stored by Taylor coefficients, seminorms
  ``s_k(f) = max_{|z|=k} |f(z)|`` estimated on equispaced circle samples.

Sequence spaces are indexed from 1 (coordinate ``x_j`` lives at array
position ``j-1``); Taylor coefficients are indexed by degree from 0.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    IndexBeyondValidity,
    MatrixRangeExceeded,
    SpaceMismatch,
)

SEQUENCE_TAGS = ("omega", "kothe")
TAYLOR_TAGS = ("entire",)
DEFAULT_CIRCLE_SAMPLES = 1024
# zero columns in a witness are lifted to this value so every weight is positive
MIN_WEIGHT = 1e-12
# relative slack for the summed (p < inf) boundedness test only
_SUM_SLACK = 1e-12


def _as_scalar_array(values) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != 1:
        arr = arr.reshape(-1)
    if np.iscomplexobj(arr):
        return arr.astype(np.complex128, copy=False)
    return arr.astype(np.float64, copy=False)


@dataclass(frozen=True, eq=False)
class TruncatedVector:
    """A finite prefix of a sequence or Taylor-coefficient vector.

    Only the first ``valid_len`` entries are exact; anything after them is a
    truncation artifact and is never read. ``finite_support`` declares that
    every coefficient beyond the valid prefix is exactly zero (a polynomial
    or a finitely supported sequence). Real input stays real (float64),
    complex input is stored as complex128.
    """

    coeffs: np.ndarray
    valid_len: int | None = None
    space_tag: str = "omega"
    finite_support: bool = False

    def __post_init__(self):
        arr = _as_scalar_array(self.coeffs)
        if arr.flags.writeable:
            # own a private read-only copy; views of read-only arrays are reused as is
            arr = arr.copy()
            arr.flags.writeable = False
        valid = len(arr) if self.valid_len is None else int(self.valid_len)
        if not 0 <= valid <= len(arr):
            raise ValueError(f"valid_len={valid} outside [0, {len(arr)}]")
        object.__setattr__(self, "coeffs", arr)
        object.__setattr__(self, "valid_len", valid)

    def __len__(self):
        return self.valid_len

    def __repr__(self):
        head = ", ".join(f"{v:g}" for v in self.valid[:6])
        more = ", ..." if self.valid_len > 6 else ""
        return f"TruncatedVector([{head}{more}]; valid={self.valid_len}, {self.space_tag})"

    @property
    def valid(self) -> np.ndarray:
        """The exact prefix (read-only view)."""
        return self.coeffs[: self.valid_len]

    @property
    def is_taylor(self) -> bool:
        return self.space_tag in TAYLOR_TAGS

    def window(self, start: int, count: int) -> np.ndarray:
        """Entries at array positions ``start .. start+count-1``."""
        if start < 0 or start + count > self.valid_len:
            raise IndexBeyondValidity(
                f"window [{start}, {start + count}) exceeds valid_len={self.valid_len}"
            )
        return self.coeffs[start : start + count]

    def with_values(self, values, valid_len=None) -> "TruncatedVector":
        return TruncatedVector(values, valid_len, self.space_tag, self.finite_support)

    def _combine(self, other: "TruncatedVector", values, n) -> "TruncatedVector":
        exact = self.finite_support and other.finite_support and self.valid_len == other.valid_len
        return TruncatedVector(values, n, self.space_tag, exact)

    def __sub__(self, other: "TruncatedVector") -> "TruncatedVector":
        _check_same_space(self, other)
        n = min(self.valid_len, other.valid_len)
        return self._combine(other, self.coeffs[:n] - other.coeffs[:n], n)

    def __add__(self, other: "TruncatedVector") -> "TruncatedVector":
        _check_same_space(self, other)
        n = min(self.valid_len, other.valid_len)
        return self._combine(other, self.coeffs[:n] + other.coeffs[:n], n)

    def scale(self, c) -> "TruncatedVector":
        return TruncatedVector(c * self.valid, self.valid_len, self.space_tag, self.finite_support)

    def agrees_with(self, other: "TruncatedVector", atol=0.0) -> bool:
        """Coefficientwise agreement on the common valid range."""
        n = min(self.valid_len, other.valid_len)
        diff = np.abs(self.coeffs[:n] - other.coeffs[:n])
        return bool(np.all(diff <= atol))


def vector(values: Iterable, space_tag: str = "omega", valid_len: int | None = None,
           finite_support: bool = False) -> TruncatedVector:
    return TruncatedVector(np.asarray(list(values) if not isinstance(values, np.ndarray) else values),
                           valid_len, space_tag, finite_support)


def polynomial(coeffs: Iterable) -> TruncatedVector:
    """Exact Taylor vector of a polynomial (coefficients from degree 0)."""
    return vector(coeffs, "entire", finite_support=True)


def unit_vector(j: int, length: int, space_tag: str = "omega") -> TruncatedVector:
    """``e_j`` for sequence spaces (1-based ``j``)."""
    arr = np.zeros(length)
    arr[j - 1] = 1.0
    return TruncatedVector(arr, length, space_tag, True)


def _check_same_space(a: TruncatedVector, b: TruncatedVector):
    if a.space_tag != b.space_tag:
        raise SpaceMismatch(f"cannot combine {a.space_tag!r} and {b.space_tag!r} vectors")


@dataclass(frozen=True, eq=False)
class KotheMatrix:
    """A finite window ``a[k-1, j-1]`` (k <= K_max, j <= J_max) of a Köthe matrix."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64)
        if a.ndim != 2 or a.size == 0:
            raise ValueError("Köthe matrix must be a non-empty 2-D array")
        if np.any(a < 0) or not np.all(np.isfinite(a)):
            raise ValueError("Köthe matrix entries must be finite and non-negative")
        if np.any(np.diff(a, axis=0) < 0):
            k, j = np.argwhere(np.diff(a, axis=0) < 0)[0]
            raise ValueError(f"KM1 violated: a[{k + 1}][{j + 1}] > a[{k + 2}][{j + 1}]")
        if not np.all(a.max(axis=0) > 0):
            j = int(np.argmin(a.max(axis=0) > 0))
            raise ValueError(f"KM2 violated: column {j + 1} has no positive entry")
        a.flags.writeable = False
        object.__setattr__(self, "a", a)

    @property
    def k_max(self) -> int:
        return self.a.shape[0]

    @property
    def j_max(self) -> int:
        return self.a.shape[1]

    @classmethod
    def omega_type(cls, k_max: int, j_max: int) -> "KotheMatrix":
        """``a_{k,j} = 1`` for ``j <= k`` and 0 otherwise (lambda^inf(A) = omega)."""
        k = np.arange(1, k_max + 1)[:, None]
        j = np.arange(1, j_max + 1)[None, :]
        return cls((j <= k).astype(float))

    @classmethod
    def polynomial(cls, k_max: int, j_max: int) -> "KotheMatrix":
        """``a_{k,j} = j^(k-1)``; lambda^p of this matrix is the space s of rapidly decreasing sequences."""
        k = np.arange(0, k_max)[:, None]
        j = np.arange(1, j_max + 1, dtype=float)[None, :]
        return cls(j ** k)

    @classmethod
    def from_csv(cls, path) -> "KotheMatrix":
        """Row k of the file holds ``a_{k,1} .. a_{k,J_max}``."""
        with open(path, newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row and not row[0].startswith("#")]
        return cls(np.array(rows))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(self.a.tolist())


@dataclass(frozen=True, eq=False)
class SpaceSpec:
    """One of ``omega``, ``kothe`` (with matrix and p) or ``entire``."""

    variant: str = "omega"
    matrix: KotheMatrix | None = None
    p: float = math.inf
    circle_samples: int = DEFAULT_CIRCLE_SAMPLES
    description: str = ""

    def __post_init__(self):
        if self.variant not in ("omega", "kothe", "entire"):
            raise ValueError(f"unknown space variant {self.variant!r}")
        if self.variant == "kothe":
            if self.matrix is None:
                raise ValueError("kothe space needs a matrix")
            if not (self.p >= 1):
                raise ValueError("kothe exponent p must lie in [1, inf]")
        if self.variant == "entire" and self.circle_samples < 8:
            raise ValueError("circle_samples must be >= 8")

    @classmethod
    def omega(cls) -> "SpaceSpec":
        return cls("omega", description="all sequences, coordinatewise convergence")

    @classmethod
    def kothe(cls, matrix: KotheMatrix, p: float = math.inf) -> "SpaceSpec":
        return cls("kothe", matrix=matrix, p=float(p), description=f"Köthe space lambda^{p}(A)")

    @classmethod
    def entire(cls, circle_samples: int = DEFAULT_CIRCLE_SAMPLES) -> "SpaceSpec":
        return cls("entire", circle_samples=circle_samples,
                   description="entire functions, compact-open topology")

    @property
    def tag(self) -> str:
        return self.variant

    def to_config(self) -> dict:
        out = {"variant": self.variant}
        if self.variant == "kothe":
            out["p"] = "inf" if math.isinf(self.p) else repr(self.p)
            out["matrix_shape"] = f"{self.matrix.k_max}x{self.matrix.j_max}"
        if self.variant == "entire":
            out["circle_samples"] = str(self.circle_samples)
        return out


@dataclass(frozen=True, eq=False)
class NeighborhoodSpec:
    """Basic open neighbourhood ``{y : p_k(y - center) < eps for all k <= k0}``."""

    center: TruncatedVector
    k0: int
    eps: float

    def __post_init__(self):
        if self.k0 < 1:
            raise ValueError("k0 must be >= 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")


@dataclass(frozen=True, eq=False)
class BoundednessCertificate:
    """Finite boundedness witness for a set of vectors.

    ``witness_w[j-1]`` bounds coordinate ``j`` (sequence spaces) or the
    radius-``j`` sup (entire space); ``per_seminorm_sup[k-1]`` is the largest
    ``k``-th seminorm over the set; ``coord_sup`` is the raw componentwise sup.
    """

    witness_w: np.ndarray
    per_seminorm_sup: np.ndarray
    coord_sup: np.ndarray
    empty: bool = False
    count: int = 0


# ---------------------------------------------------------------------------
# seminorms
# ---------------------------------------------------------------------------

def max_modulus(coeffs, radius: float, samples: int = DEFAULT_CIRCLE_SAMPLES) -> float:
    """Largest ``|f(z)|`` over ``samples`` equispaced points of ``|z| = radius``.

    The points start at angle 0, so doubling ``samples`` only adds points and
    never lowers the value. The result is a lower bound of the true circle
    maximum with relative error O(deg^2 / samples^2) near a smooth maximum
    and at worst O(deg / samples).
    """
    if samples < 8:
        raise ValueError("samples must be >= 8")
    if not radius > 0:
        raise ValueError("radius must be positive")
    c = np.asarray(coeffs)
    if c.size == 0:
        return 0.0
    return float(_circle_max(c, np.array([float(radius)]), samples)[0])


def _circle_max(coeffs: np.ndarray, radii: np.ndarray, samples: int) -> np.ndarray:
    """``max_{|z|=r} |f(z)|`` for each radius, sampled; Horner on a (radii x samples) grid."""
    theta = np.exp(2j * np.pi * np.arange(samples) / samples)
    z = radii[:, None] * theta[None, :]
    acc = np.zeros_like(z)
    for c in coeffs[::-1]:
        acc = acc * z + c
    return np.abs(acc).max(axis=1)


def _check_member(space: SpaceSpec, x: TruncatedVector):
    if x.space_tag != space.tag:
        raise SpaceMismatch(f"vector tagged {x.space_tag!r} used in {space.tag!r} space")


def seminorm(space: SpaceSpec, k: int, x: TruncatedVector) -> float:
    """The ``k``-th defining seminorm of ``space`` evaluated at ``x``.

    Köthe seminorms sum over the valid prefix only (the seminorm of the finite
    section), which is exact for finitely supported data and a lower bound
    otherwise.
    """
    if k < 1:
        raise ValueError("seminorm index k must be >= 1")
    _check_member(space, x)
    if space.variant == "omega":
        if k > x.valid_len:
            raise IndexBeyondValidity(f"p_{k} needs {k} coordinates, valid_len={x.valid_len}")
        return float(np.max(np.abs(x.coeffs[:k])))
    if space.variant == "kothe":
        a = space.matrix
        if k > a.k_max:
            raise MatrixRangeExceeded(f"seminorm index {k} > K_max={a.k_max}")
        if x.valid_len > a.j_max:
            raise MatrixRangeExceeded(f"valid_len={x.valid_len} > J_max={a.j_max}")
        if x.valid_len == 0:
            raise IndexBeyondValidity("empty valid prefix")
        weighted = np.abs(x.valid) * a.a[k - 1, : x.valid_len]
        if math.isinf(space.p):
            return float(weighted.max())
        return float(np.sum(weighted ** space.p) ** (1.0 / space.p))
    if x.valid_len == 0:
        raise IndexBeyondValidity("empty Taylor prefix")
    return max_modulus(x.valid, k, space.circle_samples)


def in_neighborhood(space: SpaceSpec, nbhd: NeighborhoodSpec, y: TruncatedVector) -> bool:
    """Strict-inequality membership in an open basic neighbourhood."""
    _check_same_space(nbhd.center, y)
    if space.variant == "omega":
        # nested seminorms: p_k0 dominates every p_k, k <= k0
        k0 = nbhd.k0
        if y.valid_len < k0 or nbhd.center.valid_len < k0:
            raise IndexBeyondValidity(f"membership needs {k0} coordinates")
        return bool(np.max(np.abs(y.coeffs[:k0] - nbhd.center.coeffs[:k0])) < nbhd.eps)
    diff = y - nbhd.center
    return all(seminorm(space, k, diff) < nbhd.eps for k in range(1, nbhd.k0 + 1))


# ---------------------------------------------------------------------------
# boundedness
# ---------------------------------------------------------------------------

def bounded_certificate(space: SpaceSpec, vecs: Sequence[TruncatedVector], J: int, K: int) -> BoundednessCertificate:
    """Componentwise and seminormwise suprema of a finite set of vectors."""
    for v in vecs:
        _check_member(space, v)
    if not vecs:
        return BoundednessCertificate(np.zeros(J), np.zeros(K), np.zeros(J), empty=True, count=0)
    if space.variant == "entire":
        return _entire_certificate(space, vecs, J, K)
    width = max(J, K)
    short = min(v.valid_len for v in vecs)
    if short < width:
        raise IndexBeyondValidity(f"certificate needs {width} coordinates, shortest valid_len={short}")
    coords = np.stack([np.abs(v.coeffs[:width]) for v in vecs])
    return certificate_from_coords(space, coords, J, K)


def certificate_from_coords(space: SpaceSpec, abs_coords: np.ndarray, J: int, K: int) -> BoundednessCertificate:
    """Certificate for sequence spaces from a (points x width) matrix of ``|v_j|``."""
    n = abs_coords.shape[0]
    if n == 0:
        return BoundednessCertificate(np.zeros(J), np.zeros(K), np.zeros(J), empty=True, count=0)
    coord_sup = abs_coords[:, :J].max(axis=0)
    lifted = np.maximum(coord_sup, MIN_WEIGHT)
    if space.variant == "omega":
        witness = lifted
        per_k = np.maximum.accumulate(abs_coords[:, :K].max(axis=0))
    else:
        a = space.matrix
        if max(J, K) > a.j_max or K > a.k_max:
            raise MatrixRangeExceeded("certificate window exceeds the Köthe matrix")
        width = abs_coords.shape[1]
        weighted = abs_coords[:, None, :width] * a.a[None, :K, :width]
        if math.isinf(space.p):
            witness = lifted
            per_k = weighted.max(axis=2).max(axis=0)
        else:
            # w_j = J^(1/p) * sup|v_j| makes sum_j (|v_j|/w_j)^p <= 1
            witness = lifted * J ** (1.0 / space.p)
            per_k = (np.sum(weighted ** space.p, axis=2) ** (1.0 / space.p)).max(axis=0)
    return BoundednessCertificate(witness, per_k, coord_sup, empty=False, count=n)


def _entire_certificate(space: SpaceSpec, vecs, J: int, K: int) -> BoundednessCertificate:
    radii = np.arange(1, max(J, K) + 1, dtype=float)
    sups = np.zeros(len(radii))
    coord = np.zeros(J)
    for v in vecs:
        if v.valid_len == 0:
            raise IndexBeyondValidity("empty Taylor prefix")
        sups = np.maximum(sups, _circle_max(v.valid, radii, space.circle_samples))
        m = min(J, v.valid_len)
        coord[:m] = np.maximum(coord[:m], np.abs(v.valid[:m]))
    witness = np.maximum(sups[:J], MIN_WEIGHT)
    return BoundednessCertificate(witness, sups[:K].copy(), coord, empty=False, count=len(vecs))


def satisfies_witness(space: SpaceSpec, v: TruncatedVector, w: np.ndarray) -> bool:
    """The space's w-boundedness test for a single vector, on indices ``<= len(w)``."""
    J = len(w)
    if space.variant == "entire":
        radii = np.arange(1, J + 1, dtype=float)
        return bool(np.all(_circle_max(v.valid, radii, space.circle_samples) <= w))
    if v.valid_len < J:
        raise IndexBeyondValidity(f"test needs {J} coordinates, valid_len={v.valid_len}")
    ratio = np.abs(v.coeffs[:J]) / w
    if space.variant == "kothe" and not math.isinf(space.p):
        return bool(np.sum(ratio ** space.p) <= 1.0 + _SUM_SLACK)
    return bool(np.all(ratio <= 1.0))
