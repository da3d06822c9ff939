"""Return-set combinatorics on a finite horizon.

Sets of positive integers are stored as sorted ``int64`` arrays together with
the horizon ``H`` they were observed up to. Density estimators return the
whole curve next to the declared finite-horizon estimate, so the reader can
judge convergence.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConstructionFailed, HorizonTooSmall, UnboundedInput

DEFAULT_N_MIN = 16


@dataclass(frozen=True, eq=False)
class ReturnSet:
    """Strictly increasing positive integers, all ``<= horizon``."""

    elems: np.ndarray
    horizon: int

    def __post_init__(self):
        e = np.asarray(self.elems, dtype=np.int64).reshape(-1)
        H = int(self.horizon)
        if H < 0:
            raise ValueError("horizon must be >= 0")
        if e.size:
            if np.any(np.diff(e) <= 0):
                e = np.unique(e)
            if e[0] < 1 or e[-1] > H:
                raise ValueError(f"elements must lie in [1, {H}]")
        e = e.copy()
        e.flags.writeable = False
        object.__setattr__(self, "elems", e)
        object.__setattr__(self, "horizon", H)

    def __len__(self):
        return len(self.elems)

    def __contains__(self, n):
        i = np.searchsorted(self.elems, n)
        return bool(i < len(self.elems) and self.elems[i] == n)

    def __repr__(self):
        head = ", ".join(str(v) for v in self.elems[:8])
        more = ", ..." if len(self.elems) > 8 else ""
        return f"ReturnSet({{{head}{more}}}, H={self.horizon}, size={len(self)})"

    @classmethod
    def from_indicator(cls, ind, horizon: int | None = None) -> "ReturnSet":
        """``ind[n-1]`` truthy means ``n`` is in the set."""
        ind = np.asarray(ind, dtype=bool)
        return cls(np.flatnonzero(ind) + 1, len(ind) if horizon is None else horizon)

    @classmethod
    def naturals(cls, horizon: int) -> "ReturnSet":
        return cls(np.arange(1, horizon + 1), horizon)

    def indicator(self) -> np.ndarray:
        """Boolean array of length ``H`` with entry ``n-1`` set iff ``n`` belongs to the set."""
        ind = np.zeros(self.horizon, dtype=bool)
        ind[self.elems - 1] = True
        return ind

    def translate(self, t: int) -> "ReturnSet":
        """``(A + t) ∩ [1, H]``."""
        e = self.elems + t
        return ReturnSet(e[(e >= 1) & (e <= self.horizon)], self.horizon)

    def restrict(self, horizon: int) -> "ReturnSet":
        return ReturnSet(self.elems[self.elems <= horizon], horizon)


# ---------------------------------------------------------------------------
# IO
# ---------------------------------------------------------------------------

def write_return_set(A: ReturnSet, path):
    """Newline-separated integers; a leading ``# horizon=H`` comment keeps the horizon."""
    with open(path, "w") as fh:
        fh.write(f"# horizon={A.horizon}\n")
        fh.writelines(f"{int(n)}\n" for n in A.elems)


def read_return_set(path, horizon: int | None = None) -> ReturnSet:
    elems, H = [], horizon
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if H is None and line[1:].strip().startswith("horizon="):
                    H = int(line.split("=", 1)[1])
                continue
            elems.append(int(line))
    if H is None:
        H = max(elems, default=0)
    return ReturnSet(np.array(elems, dtype=np.int64), H)


def to_bitset(A: ReturnSet) -> bytes:
    """Little-endian 64-bit words; bit ``n-1`` is the membership of ``n``."""
    words = math.ceil(A.horizon / 64)
    ind = np.zeros(words * 64, dtype=bool)
    ind[A.elems - 1] = True
    return np.packbits(ind, bitorder="little").tobytes()


def from_bitset(data: bytes, horizon: int | None = None) -> ReturnSet:
    if len(data) % 8:
        raise ValueError("bitset length must be a multiple of 8 bytes")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8), bitorder="little").astype(bool)
    H = len(bits) if horizon is None else horizon
    if np.any(bits[H:]):
        raise ValueError(f"bitset has members beyond horizon {H}")
    return ReturnSet.from_indicator(bits[:H], H)


# ---------------------------------------------------------------------------
# density curves
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DensityCurve:
    """Sampled ``(N, value)`` pairs plus the finite-horizon estimate."""

    Ns: np.ndarray
    values: np.ndarray
    estimate: float
    witnesses: np.ndarray | None = None
    consistent: bool = True
    label: str = ""

    def as_pairs(self) -> list[tuple[int, float]]:
        return [(int(n), float(v)) for n, v in zip(self.Ns, self.values)]

    def to_csv(self, path, header=("N", "value")):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for n, v in zip(self.Ns, self.values):
                w.writerow([int(n), repr(float(v))])


def lower_density_curve(A: ReturnSet) -> DensityCurve:
    """``d_N = #(A ∩ [1,N]) / N`` for ``N = 1..H``; estimate = min over ``N in [H/2, H]``."""
    H = A.horizon
    if H < 1:
        raise HorizonTooSmall("lower density needs H >= 1")
    counts = np.cumsum(A.indicator(), dtype=np.int64)
    Ns = np.arange(1, H + 1)
    d = counts / Ns
    tail_start = max(1, math.ceil(H / 2))
    return DensityCurve(Ns, d, float(d[tail_start - 1 :].min()), label="lower_density")


def geometric_grid(N_min: int, H: int) -> np.ndarray:
    """``N_min, 2 N_min, 4 N_min, ...`` below ``H``, then ``H`` itself."""
    Ns = []
    N = N_min
    while N < H:
        Ns.append(N)
        N *= 2
    Ns.append(H)
    return np.array(Ns, dtype=np.int64)


def _window_grid(H: int, N_min: int, exhaustive: bool, Ns) -> np.ndarray:
    if N_min < 1:
        raise ValueError("N_min must be >= 1")
    if H < N_min:
        raise HorizonTooSmall(f"horizon {H} < N_min={N_min}")
    if Ns is not None:
        Ns = np.asarray(sorted(set(int(n) for n in Ns)), dtype=np.int64)
        if Ns.size == 0 or Ns[0] < 1 or Ns[-1] > H:
            raise ValueError(f"window lengths must lie in [1, {H}]")
        return Ns
    if exhaustive:
        return np.arange(N_min, H + 1, dtype=np.int64)
    return geometric_grid(N_min, H)


def _window_count_max(prefix: np.ndarray, N: int) -> tuple:
    sums = prefix[N:] - prefix[:-N]
    m = int(np.argmax(sums))
    return sums[m], m


def banach_density_curve(A: ReturnSet, N_min: int = DEFAULT_N_MIN, exhaustive: bool = False,
                         Ns=None) -> DensityCurve:
    """``W_N = max_m #(A ∩ [m+1, m+N]) / N`` on a grid of window lengths.

    ``witnesses[i]`` is the smallest offset ``m`` attaining ``W_N``. The
    estimate is the maximum of ``W_N`` over the sampled ``N``. The flag
    ``consistent`` records the cross-check ``N W_N >= N' W_N' - (N' - N)``
    for consecutive sampled ``N < N'``.
    """
    Ns = _window_grid(A.horizon, N_min, exhaustive, Ns)
    prefix = np.concatenate(([0], np.cumsum(A.indicator(), dtype=np.int64)))
    counts = np.empty(len(Ns), dtype=np.int64)
    wit = np.empty(len(Ns), dtype=np.int64)
    for i, N in enumerate(Ns):
        counts[i], wit[i] = _window_count_max(prefix, int(N))
    ok = bool(np.all(counts[:-1] >= counts[1:] - np.diff(Ns)))
    values = counts / Ns
    return DensityCurve(Ns, values, float(values.max()), wit, ok, label="upper_banach_density")


def sucheston_M(phi, N_min: int = DEFAULT_N_MIN, bound: float = math.inf, exhaustive: bool = False,
                Ns=None) -> DensityCurve:
    """``S_N = max_m (1/N) sum_{j=m+1}^{m+N} phi_j`` on a grid; estimate ``S_H``.

    For an indicator sequence this is the largest value any Banach limit takes
    on it, so on ``1_A`` the curve coincides with the upper Banach density
    curve at every sampled window length.
    """
    phi = np.asarray(phi, dtype=np.float64)
    if phi.ndim != 1:
        raise ValueError("phi must be one-dimensional")
    if not np.all(np.isfinite(phi)):
        raise UnboundedInput("phi has non-finite entries")
    if phi.size and np.max(np.abs(phi)) > bound:
        j = int(np.argmax(np.abs(phi) > bound)) + 1
        raise UnboundedInput(f"|phi_{j}| = {abs(phi[j - 1])} exceeds the declared bound {bound}")
    H = len(phi)
    Ns = _window_grid(H, N_min, exhaustive, Ns)
    prefix = np.concatenate(([0.0], np.cumsum(phi)))
    best = np.empty(len(Ns))
    wit = np.empty(len(Ns), dtype=np.int64)
    for i, N in enumerate(Ns):
        sums = prefix[N:] - prefix[:-N]
        wit[i] = int(np.argmax(sums))
        best[i] = sums[wit[i]] / N
    return DensityCurve(Ns, best, float(best[-1]), wit, label="sucheston")


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LowerDensityPositive:
    threshold: float

    def __post_init__(self):
        _check_threshold(self.threshold)


@dataclass(frozen=True)
class UpperBanachPositive:
    threshold: float
    N_min: int = DEFAULT_N_MIN

    def __post_init__(self):
        _check_threshold(self.threshold)


@dataclass(frozen=True)
class Syndetic:
    max_gap: int

    def __post_init__(self):
        if self.max_gap < 1:
            raise ValueError("max_gap must be >= 1")


@dataclass(frozen=True)
class APb:
    diff_bound: int
    min_len: int

    def __post_init__(self):
        if self.diff_bound < 1 or self.min_len < 1:
            raise ValueError("diff_bound and min_len must be >= 1")


@dataclass(frozen=True, eq=False)
class BlockOf:
    """Sets containing translates of ever longer prefixes of ``witness``, a member of ``inner``."""

    inner: object
    scale: int
    witness: ReturnSet | None = None

    def __post_init__(self):
        if self.scale < 1:
            raise ValueError("BlockOf scale must be >= 1")


FamilySpec = LowerDensityPositive | UpperBanachPositive | Syndetic | APb | BlockOf


def _check_threshold(t):
    if not 0 < t <= 1:
        raise ValueError(f"threshold {t} outside (0, 1]")


def gaps(A: ReturnSet) -> np.ndarray:
    """Leading gap ``min(A) - 0``, inner gaps and trailing gap ``H - max(A)``."""
    if len(A) == 0:
        return np.array([A.horizon], dtype=np.int64)
    return np.diff(np.concatenate(([0], A.elems, [A.horizon])))


def longest_progression(A: ReturnSet, diff_bound: int, min_len: int = 1):
    """Smallest difference ``d <= diff_bound`` carrying a run of ``>= min_len`` terms in A.

    Returns ``(start, d, length)`` of the earliest such run, or None.
    Each residue class mod ``d`` is scanned for its longest run of members.
    """
    ind = A.indicator()
    H = len(ind)
    for d in range(1, diff_bound + 1):
        rows = math.ceil(H / d) if H else 0
        grid = np.zeros(rows * d, dtype=bool)
        grid[:H] = ind
        cols = np.zeros((d, rows + 1), dtype=np.int8)
        cols[:, :rows] = grid.reshape(rows, d).T
        flat = np.concatenate(([0], cols.reshape(-1), [0]))
        edges = np.diff(flat)
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1)
        lengths = ends - starts
        good = np.flatnonzero(lengths >= min_len)
        if good.size:
            residue, row = np.divmod(starts[good], rows + 1)
            first_terms = row * d + residue + 1
            pick = int(np.argmin(first_terms))
            return int(first_terms[pick]), d, int(lengths[good[pick]])
    return None


def family_member(A: ReturnSet, F) -> tuple[bool, dict]:
    """Finite-horizon verdict and evidence for ``A ∈ F``."""
    if isinstance(F, LowerDensityPositive):
        curve = lower_density_curve(A)
        return curve.estimate >= F.threshold, {"d_lower_est": curve.estimate, "finite_horizon": True}
    if isinstance(F, UpperBanachPositive):
        curve = banach_density_curve(A, N_min=F.N_min)
        i = int(np.argmax(curve.values))
        window = (int(curve.witnesses[i]) + 1, int(curve.witnesses[i] + curve.Ns[i]))
        return curve.estimate >= F.threshold, {
            "bd_est": curve.estimate, "window": window, "N": int(curve.Ns[i]), "finite_horizon": True}
    if isinstance(F, Syndetic):
        g = gaps(A)
        i = int(np.argmax(g))
        before = int(A.elems[i - 1]) if i > 0 else 0
        return bool(g[i] <= F.max_gap), {"max_gap": int(g[i]), "after": before, "finite_horizon": True}
    if isinstance(F, APb):
        found = longest_progression(A, F.diff_bound, F.min_len)
        if found is None:
            return False, {"progression": None, "finite_horizon": True}
        start, d, length = found
        return True, {"progression": {"start": start, "diff": d, "length": length},
                      "finite_horizon": True}
    if isinstance(F, BlockOf):
        witness = F.witness if F.witness is not None else ReturnSet.naturals(A.horizon)
        inner_ok, inner_ev = family_member(witness, F.inner) if F.inner is not None else (True, {})
        ok, shifts = block_member(A, witness, F.scale)
        return ok and inner_ok, {"translations": shifts, "witness_in_inner": inner_ok,
                                 "inner_evidence": inner_ev, "finite_horizon": True}
    raise TypeError(f"unknown family {F!r}")


def block_member(B: ReturnSet, witness: ReturnSet, scale: int) -> tuple[bool, list[int]]:
    """Find ``n_s`` with ``F_s + n_s ⊂ B`` for the prefixes ``F_s`` of ``witness``, ``s = 1..scale``.

    Returns the verdict and the smallest translation for each prefix that
    succeeded; a failure at ``s`` stops the search since larger prefixes
    contain ``F_s``.
    """
    if len(witness) == 0:
        raise ValueError("witness set must be nonempty")
    if scale > len(witness):
        raise ValueError(f"scale {scale} exceeds witness size {len(witness)}")
    H = B.horizon
    F = witness.elems[:scale]
    if F[-1] > H:
        raise HorizonTooSmall(f"prefix maximum {int(F[-1])} exceeds horizon {H}")
    member = np.zeros(H + 1, dtype=bool)  # member[i] <=> i in B, i = 0..H
    member[B.elems] = True
    cand = np.ones(H + 1, dtype=bool)  # candidate translations n = 0..H
    shifts: list[int] = []
    for f in F:
        f = int(f)
        cand[H - f + 1 :] = False
        cand[: H - f + 1] &= member[f:]
        hit = np.flatnonzero(cand)
        if hit.size == 0:
            return False, shifts
        shifts.append(int(hit[0]))
    return True, shifts


# ---------------------------------------------------------------------------
# separated families
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class StarFamily:
    """Sets ``A_1..A_kmax``: pairwise disjoint, ``|n - n'| >= max(k, k')``, ``min(A_k) > k``."""

    sets: tuple
    horizon: int
    period: int | None = None
    offsets: tuple | None = None

    @property
    def k_max(self) -> int:
        return len(self.sets)

    def __getitem__(self, k: int) -> np.ndarray:
        """``A_k`` (1-based)."""
        if not 1 <= k <= self.k_max:
            raise IndexError(f"k={k} outside 1..{self.k_max}")
        return self.sets[k - 1]

    def as_return_set(self, k: int) -> ReturnSet:
        return ReturnSet(self[k], self.horizon)

    def violations(self) -> list[str]:
        """Exhaustive check of the three invariants; empty list when valid."""
        out = []
        for k, A in enumerate(self.sets, start=1):
            if A.size and A[0] <= k:
                out.append(f"min(A_{k}) = {int(A[0])} <= {k}")
            if A.size > 1 and np.any(np.diff(A) <= 0):
                out.append(f"A_{k} not strictly increasing")
        allv = np.concatenate(self.sets) if self.sets else np.array([], dtype=np.int64)
        labels = np.concatenate([np.full(len(A), k, dtype=np.int64) for k, A in enumerate(self.sets, 1)])
        order = np.argsort(allv, kind="stable")
        v, lab = allv[order], labels[order]
        # two elements closer than k_max are at most k_max - 1 positions apart in sorted order
        for off in range(1, max(self.k_max, 2)):
            if off >= len(v):
                break
            dist = v[off:] - v[:-off]
            need = np.maximum(lab[off:], lab[:-off])
            bad = np.flatnonzero(dist < need)
            for i in bad[:5]:
                kind = "shared element" if dist[i] == 0 else "separation"
                out.append(f"{kind}: {int(v[i])} in A_{int(lab[i])}, {int(v[i + off])} in "
                           f"A_{int(lab[i + off])}, distance {int(dist[i])} < {int(need[i])}")
        return out

    def validate(self):
        bad = self.violations()
        if bad:
            raise ConstructionFailed("; ".join(bad[:5]))


def star_offsets(k_max: int, block_spacing: int = 2) -> tuple[list[int], int]:
    """Residues ``r_1 < ... < r_kmax`` and period ``P`` of the periodic design.

    ``r_1 = 2`` and ``r_{k+1} = r_k + max(k+1, s)``; the wrap-around gap
    ``max(k_max, s)`` closes the period, so every pair of residues (within or
    across periods) is at least ``max(k, k')`` apart.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if block_spacing < 2:
        raise ValueError("block_spacing must be >= 2")
    r = [2]
    for k in range(1, k_max):
        r.append(r[-1] + max(k + 1, block_spacing))
    period = r[-1] + max(k_max, block_spacing) - r[0]
    return r, period


def gen_star_family(k_max: int, block_spacing: int = 2, horizon: int = 2 ** 18) -> StarFamily:
    """Deterministic separated family: ``A_k = {r_k + t P : t >= 0} ∩ [1, horizon]``.

    Every ``A_k`` is an arithmetic progression, so it has lower density
    ``1/P`` and grows linearly with the horizon.
    """
    r, P = star_offsets(k_max, block_spacing)
    sets = tuple(np.arange(rk, horizon + 1, P, dtype=np.int64) for rk in r)
    for A in sets:
        A.flags.writeable = False
    fam = StarFamily(sets, horizon, P, tuple(r))
    fam.validate()
    return fam
