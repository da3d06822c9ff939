"""Recurrence of orbits at finite horizon.

Return sets, recurrence classification over a grid of neighbourhoods,
locally-bounded-orbit certificates (search, verification, falsification and
transport along an invertible operator), the uniform-recurrence covering
identity, and transfer of block recurrence to a limit point on omega.

Functions take the ambient ``space`` first. For the unweighted backward shift
on omega, orbit points are windows of one array and the scans below are
vectorized; any object with ``valid_len``, ``space_tag`` and
``window(start, count)`` (for instance a lazily generated sequence) can be
scanned that way.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .densities import (
    DEFAULT_N_MIN,
    ReturnSet,
    banach_density_curve,
    block_member,
    gaps,
    lower_density_curve,
)
from .errors import (
    EmptyReturnSet,
    IndexBeyondValidity,
    ModulusUnavailable,
    NoConvergentSubsequence,
    NotInvertible,
    SpaceMismatch,
    ValidityExhausted,
)
from .operators import BackwardShift, Birkhoff, Diagonal, apply
from .spaces import (
    NeighborhoodSpec,
    SpaceSpec,
    TruncatedVector,
    bounded_certificate,
    certificate_from_coords,
    in_neighborhood,
    satisfies_witness,
)

DEFAULT_K0_GRID = (1, 2, 4, 8)
DEFAULT_EPS_GRID = tuple(2.0 ** -i for i in range(1, 9))
DEFAULT_J = 64
DEFAULT_K = 64
DEFAULT_HORIZON = 2 ** 16
FREC_THRESHOLD = 0.01
RREC_THRESHOLD = 0.01
UREC_MAX_GAP = 50
STABILIZATION_TOL = 1e-9
_CHUNK = 1 << 15


# ---------------------------------------------------------------------------
# orbit access
# ---------------------------------------------------------------------------

def is_plain_shift(space: SpaceSpec, op) -> bool:
    return space.variant == "omega" and isinstance(op, BackwardShift) and op.weights is None


def _check_source(space: SpaceSpec, x):
    if x.space_tag != space.tag:
        raise SpaceMismatch(f"vector tagged {x.space_tag!r} used in {space.tag!r} space")


def _prefix(x, k: int) -> np.ndarray:
    if x.valid_len < k:
        raise IndexBeyondValidity(f"need {k} coordinates, valid_len={x.valid_len}")
    return np.asarray(x.window(0, k))


def _shift_scan(x, center: np.ndarray, eps: float, n_from: int, n_to: int, width: int = 0):
    """Yield ``(ns, abs_coords)`` per chunk for shift returns ``n in [n_from, n_to]``.

    ``T^n x`` has coordinates ``x_{n+1}, x_{n+2}, ...``, i.e. array positions
    ``n, n+1, ...``. ``abs_coords`` holds ``|x_{n+1..n+width}|`` for returning ``n``.
    """
    k0 = len(center)
    span = max(k0, width)
    n = n_from
    while n <= n_to:
        count = min(_CHUNK, n_to - n + 1)
        buf = np.asarray(x.window(n, count + span - 1))
        wins = sliding_window_view(buf, span)[:count]
        hit = np.flatnonzero(np.max(np.abs(wins[:, :k0] - center), axis=1) < eps)
        coords = np.abs(wins[hit, :width]) if width else None
        yield n + hit, coords
        n += count


def _iter_points(op, x: TruncatedVector, H: int):
    """``(n, T^n x)`` for ``n = 0..H``; stops early (with the achieved horizon) on validity loss."""
    point = x
    yield 0, point
    for n in range(1, H + 1):
        try:
            point = apply(op, point)
        except ValidityExhausted:
            return
        yield n, point


def orbit_point(op, x, n: int) -> TruncatedVector:
    """``T^n x`` (direct slicing for the unweighted shift)."""
    if isinstance(op, BackwardShift) and op.weights is None:
        if n > x.valid_len:
            raise ValidityExhausted(f"T^{n} needs valid_len >= {n}", achieved=x.valid_len)
        return TruncatedVector(np.asarray(x.window(n, x.valid_len - n)), x.valid_len - n, x.space_tag)
    point = x
    for i in range(n):
        try:
            point = apply(op, point)
        except ValidityExhausted as exc:
            raise ValidityExhausted(f"T^{n} unavailable: {exc}", achieved=i) from exc
    return point


# ---------------------------------------------------------------------------
# return sets
# ---------------------------------------------------------------------------

def return_set(space: SpaceSpec, op, x, nbhd: NeighborhoodSpec, H: int) -> ReturnSet:
    """``{n in [1, H] : T^n x in nbhd}``.

    Raises ValidityExhausted carrying ``partial`` (the return set up to the
    achieved horizon) when the data cannot support ``H`` steps.
    """
    _check_source(space, x)
    if is_plain_shift(space, op):
        k0 = nbhd.k0
        center = _prefix(nbhd.center, k0)
        reach = min(H, x.valid_len - k0)
        hits = [ns for ns, _ in _shift_scan(x, center, nbhd.eps, 1, reach)]
        elems = np.concatenate(hits) if hits else np.array([], dtype=np.int64)
        if reach < H:
            achieved = max(reach, 0)
            raise ValidityExhausted(
                f"membership of T^n x needs {k0} coordinates; data supports n <= {achieved} < {H}",
                achieved=achieved, partial=ReturnSet(elems, achieved))
        return ReturnSet(elems, H)
    elems, achieved = [], 0
    for n, point in _iter_points(op, x, H):
        if n == 0:
            continue
        try:
            inside = in_neighborhood(space, nbhd, point)
        except IndexBeyondValidity:
            break
        achieved = n
        if inside:
            elems.append(n)
    if achieved < H:
        raise ValidityExhausted(f"orbit data supports n <= {achieved} < {H}", achieved=achieved,
                                partial=ReturnSet(np.array(elems, dtype=np.int64), achieved))
    return ReturnSet(np.array(elems, dtype=np.int64), H)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Thresholds:
    frec: float = FREC_THRESHOLD
    rrec: float = RREC_THRESHOLD
    urec_max_gap: int = UREC_MAX_GAP
    N_min: int = DEFAULT_N_MIN


@dataclass(eq=False)
class CellResult:
    k0: int
    eps: float
    returns: ReturnSet
    d_lower_est: float
    bd_est: float
    max_gap: int

    @property
    def recurrent(self) -> bool:
        return len(self.returns) > 0

    def to_dict(self, include_elems: bool = True) -> dict:
        out = {"k0": self.k0, "eps": self.eps, "horizon": self.returns.horizon,
               "count": len(self.returns), "d_lower_est": self.d_lower_est, "bd_est": self.bd_est,
               "max_gap": self.max_gap}
        if include_elems:
            out["returns"] = [int(v) for v in self.returns.elems]
        return out


VERDICT_ORDER = ("recurrent", "reiteratively_recurrent", "frequently_recurrent", "uniformly_recurrent")


@dataclass(eq=False)
class RecurrenceReport:
    cells: list
    verdicts: dict
    pivotal: dict
    thresholds: Thresholds
    horizon: int
    lbo: object = None

    def to_dict(self, include_elems: bool = True) -> dict:
        return {
            "horizon": self.horizon,
            "thresholds": {"frec_d_lower": self.thresholds.frec, "rrec_bd": self.thresholds.rrec,
                           "urec_max_gap": self.thresholds.urec_max_gap, "N_min": self.thresholds.N_min},
            "cells": [c.to_dict(include_elems) for c in self.cells],
            "verdicts": {k: {"value": v, "confidence": "finite-horizon", "pivotal_cell": self.pivotal[k]}
                         for k, v in self.verdicts.items()},
            "lbo": None if self.lbo is None else self.lbo.to_dict(),
        }


def consistent_thresholds(th: Thresholds, H: int) -> Thresholds:
    """Lower the URec gap so that a gap-``g`` set is forced over the FRec threshold at horizon ``H``.

    A set whose gaps never exceed ``g`` has ``d_N >= 1/g - 1/N``, hence a
    tail-min estimate of at least ``1/g - 2/H``.
    """
    g = min(th.urec_max_gap, math.floor(1.0 / (th.frec + 2.0 / H)))
    if g < 1:
        raise ValueError(f"no gap bound forces lower density {th.frec} at horizon {H}")
    return Thresholds(th.frec, th.rrec, g, th.N_min)


def _cell_verdicts(cell: CellResult, th: Thresholds) -> dict:
    return {
        "recurrent": cell.recurrent,
        "reiteratively_recurrent": cell.bd_est >= th.rrec,
        "frequently_recurrent": cell.d_lower_est >= th.frec,
        "uniformly_recurrent": cell.recurrent and cell.max_gap <= th.urec_max_gap,
    }


def _cell_stat(cell: CellResult, verdict: str) -> float:
    # larger is better; used to name the worst cell when every cell passes
    return {"recurrent": len(cell.returns), "reiteratively_recurrent": cell.bd_est,
            "frequently_recurrent": cell.d_lower_est, "uniformly_recurrent": -cell.max_gap}[verdict]


def analyze_cell(A: ReturnSet, k0: int, eps: float, N_min: int = DEFAULT_N_MIN) -> CellResult:
    d_lower = lower_density_curve(A).estimate if A.horizon >= 1 else 0.0
    bd = banach_density_curve(A, N_min=min(N_min, A.horizon)).estimate if A.horizon >= 1 else 0.0
    return CellResult(k0, eps, A, d_lower, bd, int(gaps(A).max()))


def classify(space: SpaceSpec, op, x, H: int, grid: Iterable[tuple[int, float]],
             thresholds: Thresholds | None = None) -> RecurrenceReport:
    """Recurrence verdicts as the minimum over a grid of neighbourhoods of ``x``.

    Cells are evaluated in grid order; each verdict names its pivotal cell
    (the first failing cell, or the weakest passing one).
    """
    th = thresholds or Thresholds()
    grid = list(grid)
    if not grid:
        raise ValueError("grid must be nonempty")
    th = consistent_thresholds(th, H)
    center = x if isinstance(x, TruncatedVector) else TruncatedVector(
        _prefix(x, max(k for k, _ in grid)), None, x.space_tag)
    cells = []
    for k0, eps in grid:
        A = return_set(space, op, x, NeighborhoodSpec(center, int(k0), float(eps)), H)
        cells.append(analyze_cell(A, int(k0), float(eps), th.N_min))
    per_cell = [_cell_verdicts(c, th) for c in cells]
    verdicts, pivotal = {}, {}
    for v in VERDICT_ORDER:
        values = [pc[v] for pc in per_cell]
        verdicts[v] = all(values)
        idx = values.index(False) if not verdicts[v] else min(
            range(len(cells)), key=lambda i: (_cell_stat(cells[i], v), i))
        pivotal[v] = {"k0": cells[idx].k0, "eps": cells[idx].eps}
    return RecurrenceReport(cells, verdicts, pivotal, th, H)


# ---------------------------------------------------------------------------
# locally bounded orbits
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LboCertificate:
    """Every ``T^n x`` (``1 <= n <= horizon_checked``) inside the ``(k0, eps)`` ball passes the ``w`` test."""

    k0: int
    eps: float
    w: np.ndarray
    horizon_checked: int
    return_count: int = 0
    per_seminorm_sup: np.ndarray | None = None

    @property
    def vacuous(self) -> bool:
        return self.return_count == 0

    def to_dict(self) -> dict:
        return {"k0": self.k0, "eps": self.eps, "horizon_checked": self.horizon_checked,
                "return_count": self.return_count, "vacuous": self.vacuous,
                "w": [float(v) for v in self.w]}


@dataclass(eq=False)
class LboSearchResult:
    certificate: LboCertificate | None
    cells: list = field(default_factory=list)

    def __bool__(self):
        return self.certificate is not None

    def to_dict(self) -> dict:
        return {"certificate": None if self.certificate is None else self.certificate.to_dict(),
                "cells": self.cells}


def _growth(growth_bound, j: np.ndarray) -> np.ndarray:
    if growth_bound is None:
        return np.full(len(j), np.inf)
    if callable(growth_bound):
        return np.array([float(growth_bound(int(v))) for v in j])
    g = np.asarray(growth_bound, dtype=float)
    return np.broadcast_to(g, j.shape) if g.ndim == 0 else g[: len(j)]


def _ball_certificate(space, op, x, k0, eps, H, J, K, points_cache):
    """Return set and boundedness certificate of the ``(k0, eps)`` ball intersected with the orbit."""
    width = max(J, K)
    if is_plain_shift(space, op):
        center = _prefix(x, k0)
        if x.valid_len < H + width:
            raise ValidityExhausted(f"certificate needs valid_len >= H + {width}",
                                    achieved=max(x.valid_len - width, 0))
        ns, coords = [], []
        for hit, c in _shift_scan(x, center, eps, 1, H, width):
            ns.append(hit)
            coords.append(c)
        ns = np.concatenate(ns)
        coords = np.concatenate(coords) if ns.size else np.zeros((0, width))
        return ns, certificate_from_coords(space, coords, J, K)
    if points_cache.get("points") is None:
        pts = [p for _, p in _iter_points(op, x, H)]
        if len(pts) < H + 1:
            raise ValidityExhausted(f"orbit data supports n <= {len(pts) - 1} < {H}", achieved=len(pts) - 1)
        points_cache["points"] = pts
    pts = points_cache["points"]
    nb = NeighborhoodSpec(x, k0, eps)
    ns = [n for n in range(1, H + 1) if in_neighborhood(space, nb, pts[n])]
    return np.array(ns, dtype=np.int64), bounded_certificate(space, [pts[n] for n in ns], J, K)


def lbo_search(space: SpaceSpec, op, x, H: int, k0_grid: Sequence[int] = DEFAULT_K0_GRID,
               eps_grid: Sequence[float] = DEFAULT_EPS_GRID, J: int = DEFAULT_J, K: int = DEFAULT_K,
               growth_bound=None) -> LboSearchResult:
    """First grid cell whose ball-orbit intersection has a certificate ``w`` under ``growth_bound``.

    Cells are visited with ``k0`` outer and ``eps`` inner. Without a growth
    bound the first cell is accepted, since every finite set is bounded. The
    per-cell table (count and largest witness entry) is returned either way.
    """
    _check_source(space, x)
    if not k0_grid or not eps_grid:
        raise ValueError("grids must be nonempty")
    cache: dict = {}
    cells = []
    jj = np.arange(1, J + 1)
    bound = _growth(growth_bound, jj)
    for k0 in k0_grid:
        for eps in eps_grid:
            ns, cert = _ball_certificate(space, op, x, int(k0), float(eps), H, J, K, cache)
            ok = bool(np.all(cert.witness_w <= bound)) if not cert.empty else True
            row = {"k0": int(k0), "eps": float(eps), "count": int(len(ns)),
                   "max_w": float(cert.coord_sup.max()) if not cert.empty else 0.0,
                   "accepted": ok}
            if not ok:
                bad = int(np.argmax(cert.witness_w > bound))
                row["first_violation"] = {"j": bad + 1, "w_j": float(cert.witness_w[bad]),
                                          "bound": float(bound[bad])}
            cells.append(row)
            if ok:
                w = np.maximum(cert.witness_w, 0.0) if not cert.empty else np.full(J, 1e-12)
                return LboSearchResult(
                    LboCertificate(int(k0), float(eps), w, H, int(len(ns)), cert.per_seminorm_sup), cells)
    return LboSearchResult(None, cells)


def verify_certificate(space: SpaceSpec, op, x: TruncatedVector, cert: LboCertificate,
                       H: int | None = None) -> list[int]:
    """Independent point-by-point rescan; returns the ``n`` violating the certificate."""
    H = cert.horizon_checked if H is None else H
    nb = NeighborhoodSpec(x, cert.k0, cert.eps)
    bad = []
    for n, point in _iter_points(op, x, H):
        if n and in_neighborhood(space, nb, point) and not satisfies_witness(space, point, cert.w):
            bad.append(n)
    return bad


@dataclass(frozen=True)
class FalsifyWitness:
    n: int
    j: int
    magnitude: float


def lbo_falsify(space: SpaceSpec, op, x, H: int, k0: int, eps: float, growth_bound, J: int = DEFAULT_J,
                start: int = 1, limit: int | None = 100_000) -> list[FalsifyWitness]:
    """Returns ``n in [start, H]`` in the ``(k0, eps)`` ball whose coordinate ``j <= J`` exceeds ``growth_bound(j)``.

    A nonempty list shows that no ``w`` dominated by ``growth_bound`` can
    certify the ball at this horizon. At most ``limit`` witnesses are kept.
    """
    _check_source(space, x)
    jj = np.arange(1, J + 1)
    bound = _growth(growth_bound, jj)
    out: list[FalsifyWitness] = []

    def take(ns, coords):
        rows, cols = np.nonzero(coords > bound)
        for r, c in zip(rows, cols):
            out.append(FalsifyWitness(int(ns[r]), int(c) + 1, float(coords[r, c])))
            if limit is not None and len(out) >= limit:
                return True
        return False

    if is_plain_shift(space, op):
        center = _prefix(x, k0)
        reach = min(H, x.valid_len - max(k0, J))
        for ns, coords in _shift_scan(x, center, eps, start, reach, J):
            if ns.size and take(ns, coords):
                break
        return out
    nb = NeighborhoodSpec(x if isinstance(x, TruncatedVector) else TruncatedVector(_prefix(x, k0), None,
                                                                                   x.space_tag), k0, eps)
    for n, point in _iter_points(op, x, H):
        if n < start:
            continue
        try:
            inside = in_neighborhood(space, nb, point)
        except IndexBeyondValidity:
            break
        if not inside:
            continue
        if space.variant == "entire":
            cert = bounded_certificate(space, [point], J, 1)
            coords = cert.witness_w[None, :]
        else:
            if point.valid_len < J:
                break
            coords = np.abs(point.coeffs[:J])[None, :]
        if take(np.array([n]), coords):
            break
    return out


def pushforward_certificate(space: SpaceSpec, op, x: TruncatedVector, cert: LboCertificate,
                            H: int | None = None, J: int | None = None) -> tuple[TruncatedVector, LboCertificate]:
    """Certificate for ``Tx`` from one for ``x`` when ``T`` is invertible.

    The ball ``U1`` around ``Tx`` is chosen with ``T^{-1}(U1) ⊂ U0`` using the
    inverse's continuity modulus (diagonal: ``eps / max 1/|lambda_j|``;
    translation by ``a``: seminorm index raised by ``ceil(|a|)``), and the
    inclusion is rechecked on every orbit point. ``w`` comes from the image
    ``T(U0 ∩ O(x))``, which contains ``U1 ∩ O(Tx)``.
    """
    if not getattr(op, "invertible", False):
        raise NotInvertible(f"{type(op).__name__} is not invertible")
    H = cert.horizon_checked if H is None else H
    J = len(cert.w) if J is None else J
    k0, eps = cert.k0, cert.eps
    if isinstance(op, Diagonal):
        if space.variant == "entire":
            raise ModulusUnavailable("no finite-data modulus for diagonal maps on the entire space")
        reach = k0 if space.variant == "omega" else x.valid_len
        inv = 1.0 / np.abs(op.lambdas[:reach])
        k1, eps1 = k0, eps / float(inv.max())
    elif isinstance(op, Birkhoff):
        k1, eps1 = k0 + math.ceil(abs(op.a)), eps
    else:
        raise ModulusUnavailable(f"no continuity modulus known for the inverse of {type(op).__name__}")
    pts = [p for _, p in _iter_points(op, x, H + 1)]
    if len(pts) < H + 2:
        raise ValidityExhausted(f"pushforward needs {H + 1} steps of orbit data", achieved=len(pts) - 1)
    x1 = pts[1]
    u0 = NeighborhoodSpec(x, k0, eps)
    u1 = NeighborhoodSpec(x1, k1, eps1)
    image = []
    for n in range(1, H + 1):
        # T^n x1 = T^{n+1} x0, whose preimage is T^n x0
        in_u1 = in_neighborhood(space, u1, pts[n + 1])
        in_u0 = in_neighborhood(space, u0, pts[n])
        if in_u1 and not in_u0:
            raise ModulusUnavailable(f"T^{n} x1 lies in U1 but its preimage leaves U0")
        if in_u0:
            image.append(pts[n + 1])
    cover = bounded_certificate(space, image, J, J)
    w = cover.witness_w if not cover.empty else np.full(J, 1e-12)
    returns = sum(1 for n in range(1, H + 1) if in_neighborhood(space, u1, pts[n + 1]))
    return x1, LboCertificate(k1, eps1, w, H, returns, cover.per_seminorm_sup)


# ---------------------------------------------------------------------------
# uniform recurrence covering
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Coverage:
    covered: bool
    N_used: int
    checked_up_to: int
    first_failure: int | None = None


def coverage_of(A: ReturnSet, include_zero: bool = True) -> Coverage:
    """Decompose every ``m in [1, H - N]`` as ``m = n + j``, ``n in A`` (or 0), ``0 <= j <= N``.

    ``N`` is the largest gap of ``{0} ∪ A``; the check is pure index
    arithmetic via a predecessor search.
    """
    if len(A) == 0:
        raise EmptyReturnSet("coverage needs a nonempty return set")
    base = np.concatenate(([0], A.elems)) if include_zero else A.elems
    N = int(np.diff(base).max()) if len(base) > 1 else int(base[0])
    top = A.horizon - N
    if top < 1:
        return Coverage(True, N, top)
    m = np.arange(1, top + 1)
    idx = np.searchsorted(base, m, side="right") - 1
    ok = idx >= 0
    j = np.where(ok, m - base[np.maximum(idx, 0)], N + 1)
    good = ok & (j <= N)
    first = None if good.all() else int(m[np.argmin(good)])
    return Coverage(bool(good.all()), N, top, first)


def urec_coverage(space: SpaceSpec, op, x, nbhd: NeighborhoodSpec, H: int) -> Coverage:
    """Covering of ``T^m x`` by ``T^j`` images of returns, ``j`` bounded by the largest gap.

    ``x`` itself counts as the return at time 0 when it lies in ``nbhd``.
    """
    A = return_set(space, op, x, nbhd, H)
    if len(A) == 0:
        raise EmptyReturnSet(f"no returns to the (k0={nbhd.k0}, eps={nbhd.eps}) ball up to {H}")
    x0 = x if isinstance(x, TruncatedVector) else TruncatedVector(_prefix(x, nbhd.k0), None, x.space_tag)
    return coverage_of(A, include_zero=in_neighborhood(space, nbhd, x0))


# ---------------------------------------------------------------------------
# block recurrence transfer
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class TransferResult:
    x_U: TruncatedVector
    transferred: ReturnSet
    translations: list
    depth: int
    subsequence: list

    def to_dict(self) -> dict:
        return {"depth": self.depth, "translations": self.translations, "subsequence": self.subsequence,
                "transferred": [int(v) for v in self.transferred.elems],
                "horizon": self.transferred.horizon,
                "x_U": [float(v) for v in np.real(self.x_U.valid)]}


def stabilize(points: np.ndarray, tol: float = STABILIZATION_TOL) -> tuple[np.ndarray, int]:
    """Lexicographic coordinate stabilization of a sequence of prefixes.

    Coordinate by coordinate, keep the most populous cluster of values (gaps
    larger than ``tol`` split clusters; ties go to the smallest value) while
    it has at least two members. Returns the surviving row indices (in order)
    and the number of stabilized coordinates.
    """
    rows = np.arange(points.shape[0])
    depth = 0
    for c in range(points.shape[1]):
        vals = points[rows, c]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        cuts = np.flatnonzero(np.abs(np.diff(sv)) > tol) + 1
        groups = np.split(order, cuts)
        best = max(groups, key=len)
        if len(best) < 2:
            break
        rows = np.sort(rows[best])
        depth += 1
    return rows, depth


def transfer_block_recurrence(space: SpaceSpec, op, x0, nbhd: NeighborhoodSpec, witness: ReturnSet,
                              H: int, r0: int | None = None, depth: int = 64, scale: int | None = None,
                              tol: float = STABILIZATION_TOL) -> TransferResult:
    """Move block recurrence of ``x0`` to a limit point ``x_U``.

    Translations ``a_s`` with ``F_s + a_s`` inside the return set are found
    for the prefixes ``F_s`` of ``witness``; the points ``T^{a_s + r0} x0``
    are reduced to a coordinatewise-stable subsequence whose common prefix is
    ``x_U``. The result lists ``r - r0`` (``r`` in ``witness``) for which
    ``T^{r - r0} x_U`` lies in ``nbhd``, checked on the stabilized coordinates.
    """
    if space.variant != "omega":
        raise SpaceMismatch("block-recurrence transfer is implemented on omega only")
    _check_source(space, x0)
    B = return_set(space, op, x0, nbhd, H)
    W = witness.restrict(min(witness.horizon, H))
    if len(W) == 0:
        raise NoConvergentSubsequence("witness has no elements within the horizon", depth=0)
    r0 = int(W.elems[0]) if r0 is None else int(r0)
    scale = len(W) if scale is None else min(scale, len(W))
    _, shifts = block_member(B, W, scale)
    if not shifts:
        raise NoConvergentSubsequence("no translate of the first witness element returns", depth=0)
    rows = []
    for a in shifts:
        p = orbit_point(op, x0, a + r0)
        rows.append(np.asarray(p.coeffs[: min(depth, p.valid_len)]))
    width = min(len(r) for r in rows)
    pts = np.stack([r[:width] for r in rows])
    if len(shifts) == 1:
        keep, stable = np.array([0]), width
    else:
        keep, stable = stabilize(pts, tol)
    k0 = nbhd.k0
    if stable < k0:
        raise NoConvergentSubsequence(f"only {stable} coordinates stabilized, membership needs {k0}",
                                      depth=stable)
    x_U = TruncatedVector(pts[keep[-1], :stable], stable, "omega")
    H_prime = stable - k0
    center = _prefix(nbhd.center, k0)
    cand = W.elems - r0
    cand = cand[(cand >= 1) & (cand <= H_prime)]
    ok = [int(t) for t in cand
          if np.max(np.abs(x_U.coeffs[t : t + k0] - center)) < nbhd.eps]
    return TransferResult(x_U, ReturnSet(np.array(ok, dtype=np.int64), max(H_prime, 0)),
                          [int(s) for s in shifts], stable, [int(shifts[i]) for i in keep])
