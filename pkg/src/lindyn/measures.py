"""Empirical measures on orbit windows.

A window ``[m+1, m+N]`` of an orbit carries the uniform probability measure
on its points. Weights are exact fractions; integrals of test functionals are
floating point. The invariance defect of such a measure telescopes to two
boundary terms, which is what makes the windowed averages of a Banach-density
witness approximately invariant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .densities import ReturnSet, banach_density_curve
from .errors import BoundViolation, HypothesisFailed, ValidityExhausted, WindowOutOfRange
from .operators import Orbit, orbit as make_orbit
from .recurrence import RREC_THRESHOLD, return_set
from .spaces import NeighborhoodSpec, SpaceSpec, TruncatedVector, in_neighborhood

N_MAX_COMPONENTS = 20


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Uniform weights ``1/N`` on orbit points ``T^n x``, ``n = start .. start+N-1``."""

    orbit: Orbit
    start: int
    length: int

    def __post_init__(self):
        if self.length < 1 or self.start < 0 or self.start + self.length - 1 > self.orbit.horizon:
            raise WindowOutOfRange(
                f"window [{self.start}, {self.start + self.length - 1}] outside orbit 0..{self.orbit.horizon}")

    @property
    def window(self) -> tuple[int, int]:
        return self.start, self.start + self.length - 1

    @property
    def indices(self) -> range:
        return range(self.start, self.start + self.length)

    @property
    def weight(self) -> Fraction:
        return Fraction(1, self.length)

    @property
    def total_mass(self) -> Fraction:
        return self.weight * self.length

    def atoms(self) -> list[tuple[int, Fraction]]:
        return [(n, self.weight) for n in self.indices]

    def integrate(self, f: "TestFunctional") -> float:
        return math.fsum(f(self.orbit[n]) for n in self.indices) / self.length

    def to_dict(self) -> dict:
        return {"window": list(self.window), "atoms": list(self.indices), "weight_denominator": self.length}


def empirical_measure(orb: Orbit, window: tuple[int, int]) -> EmpiricalMeasure:
    """Uniform measure on ``T^n x`` for ``n`` in the inclusive ``window``."""
    lo, hi = window
    return EmpiricalMeasure(orb, int(lo), int(hi) - int(lo) + 1)


@dataclass(frozen=True, eq=False)
class TestFunctional:
    """Bounded function of finitely many coordinates (0-based positions ``depends_on``)."""

    depends_on: tuple
    evaluator: Callable[[np.ndarray], float]
    sup_bound: float
    lipschitz_bound: float = math.inf
    name: str = ""

    __test__ = False  # not a pytest class

    def __call__(self, v: TruncatedVector) -> float:
        idx = np.asarray(self.depends_on, dtype=np.int64)
        if idx.size and idx.max() >= v.valid_len:
            raise ValidityExhausted(f"functional reads position {int(idx.max())}, valid_len={v.valid_len}")
        value = float(self.evaluator(np.asarray(v.coeffs)[idx]))
        if not abs(value) <= self.sup_bound:
            raise BoundViolation(f"|f| = {abs(value)} exceeds the declared bound {self.sup_bound}")
        return value

    def probe(self, rng: np.random.Generator, trials: int = 256, scale: float = 10.0) -> None:
        """Randomized check of the declared sup and Lipschitz bounds."""
        d = len(self.depends_on)
        for _ in range(trials):
            a = rng.uniform(-scale, scale, d)
            b = a + rng.uniform(-1e-3, 1e-3, d)
            fa, fb = float(self.evaluator(a)), float(self.evaluator(b))
            if abs(fa) > self.sup_bound:
                raise BoundViolation(f"|f| = {abs(fa)} > sup_bound {self.sup_bound}")
            gap = float(np.max(np.abs(a - b))) if d else 0.0
            if gap and abs(fa - fb) > self.lipschitz_bound * gap * (1 + 1e-9):
                raise BoundViolation(f"difference quotient {abs(fa - fb) / gap} > lipschitz_bound")


def coordinate_functional(j: int, bound: float = 1.0) -> TestFunctional:
    """``tanh`` of coordinate ``j`` (1-based), scaled into ``[-bound, bound]``."""
    return TestFunctional((j - 1,), lambda v: bound * math.tanh(float(np.real(v[0]))), bound, bound,
                          name=f"tanh(x_{j})")


def default_battery(k: int = 4) -> list[TestFunctional]:
    """``tanh(x_j)`` for ``j <= k`` and a bounded product of the first two coordinates."""
    fs = [coordinate_functional(j) for j in range(1, k + 1)]
    fs.append(TestFunctional((0, 1), lambda v: math.tanh(float(np.real(v[0] * v[1]))), 1.0, name="tanh(x_1 x_2)"))
    return fs


def invariance_defect(mu: EmpiricalMeasure, f: TestFunctional) -> float:
    """``|∫ f∘T dmu - ∫ f dmu|``, evaluated through its two surviving boundary terms.

    Summing ``f(T^{n+1} x) - f(T^n x)`` over the window leaves
    ``(f(T^{m+N+1} x) - f(T^{m+1} x)) / N``, so the defect is at most
    ``2 sup|f| / N``.
    """
    last = mu.start + mu.length
    if last > mu.orbit.horizon:
        raise WindowOutOfRange(f"defect needs orbit point {last}, horizon is {mu.orbit.horizon}")
    hi = f(mu.orbit[last])
    lo = f(mu.orbit[mu.start])
    return abs(hi - lo) / mu.length


def invariance_defect_bruteforce(mu: EmpiricalMeasure, f: TestFunctional) -> float:
    """The same quantity from the two full sums (reference implementation)."""
    pushed = math.fsum(f(mu.orbit[n + 1]) for n in mu.indices)
    plain = math.fsum(f(mu.orbit[n]) for n in mu.indices)
    return abs(pushed - plain) / mu.length


def measure_of_ball(space: SpaceSpec, mu: EmpiricalMeasure, nbhd: NeighborhoodSpec) -> Fraction:
    """Exact mass ``#{n in window : T^n x in nbhd} / N``."""
    hits = sum(1 for n in mu.indices if in_neighborhood(space, nbhd, mu.orbit[n]))
    return Fraction(hits, mu.length)


@dataclass(eq=False)
class MeasureMixture:
    """``sum_n 2^{-n} mu_n`` over at most ``n_max`` components plus the unassigned ``tail_mass``."""

    components: list
    weights: list
    tail_mass: Fraction

    def __post_init__(self):
        if sum(self.weights, Fraction(0)) + self.tail_mass != 1:
            raise ValueError("mixture weights and tail mass must add up to 1")

    @classmethod
    def dyadic(cls, components: Sequence[EmpiricalMeasure], n_max: int = N_MAX_COMPONENTS) -> "MeasureMixture":
        comps = list(components)[:n_max]
        weights = [Fraction(1, 2 ** n) for n in range(1, len(comps) + 1)]
        return cls(comps, weights, Fraction(1, 2 ** len(comps)))

    def integrate(self, f: TestFunctional) -> float:
        return math.fsum(float(w) * mu.integrate(f) for w, mu in zip(self.weights, self.components))

    def invariance_defect(self, f: TestFunctional) -> float:
        """Weighted sum of component defects (an upper bound for the mixture's defect)."""
        return math.fsum(float(w) * invariance_defect(mu, f) for w, mu in zip(self.weights, self.components))

    def mass_of_ball(self, space: SpaceSpec, nbhd: NeighborhoodSpec) -> Fraction:
        return sum((w * measure_of_ball(space, nbhd=nbhd, mu=mu) for w, mu in zip(self.weights, self.components)),
                   Fraction(0))


@dataclass(eq=False)
class CandidateReport:
    mixture: MeasureMixture
    components: list  # per basis element: dict with window, masses, densities
    defects: list  # per functional: dict
    support_ok: bool

    def to_dict(self) -> dict:
        return {
            "estimator": "Banach limit replaced by the density-witness window at the largest sampled N",
            "defect_bound": "2*sup|f|/N per component",
            "components": self.components,
            "weights": [str(w) for w in self.mixture.weights],
            "tail_mass": str(self.mixture.tail_mass),
            "defects": self.defects,
            "support_on_orbit_points": self.support_ok,
        }


def witness_window(A: ReturnSet, threshold: float, N_min: int) -> tuple[int, int, float]:
    """``(m, N, W_N)`` for the largest sampled ``N`` whose window density reaches ``threshold``."""
    curve = banach_density_curve(A, N_min=min(N_min, A.horizon))
    ok = np.flatnonzero(curve.values >= threshold)
    if ok.size == 0:
        return -1, 0, curve.estimate
    i = int(ok[-1])
    return int(curve.witnesses[i]), int(curve.Ns[i]), float(curve.values[i])


def build_invariant_candidate(space: SpaceSpec, op, x0: TruncatedVector, nbhd_basis: Sequence[NeighborhoodSpec],
                              H: int, functionals: Sequence[TestFunctional] | None = None,
                              threshold: float = RREC_THRESHOLD, N_min: int = 16,
                              n_max: int = N_MAX_COMPONENTS) -> CandidateReport:
    """Dyadic mixture of density-witness empirical measures, one per basis neighbourhood.

    For each ``V_n`` the return set up to ``H`` must have a sampled window
    density at least ``threshold`` (otherwise HypothesisFailed names ``n``,
    1-based). The window ``[m+1, m+N]`` attaining it, at the largest such
    ``N``, carries ``mu_n``; its ball mass equals the window density.
    """
    basis = list(nbhd_basis)[:n_max]
    if not basis:
        raise ValueError("basis must be nonempty")
    orb = make_orbit(op, x0, H + 1)
    functionals = list(functionals) if functionals is not None else default_battery()
    comps, rows = [], []
    for idx, V in enumerate(basis, start=1):
        A = return_set(space, op, x0, V, H)
        m, N, W = witness_window(A, threshold, N_min)
        if N == 0:
            raise HypothesisFailed(f"basis neighbourhood {idx} (k0={V.k0}, eps={V.eps}): "
                                   f"window density {W:.4g} below {threshold}", idx)
        mu = empirical_measure(orb, (m + 1, m + N))
        mass = measure_of_ball(space, mu, V)
        comps.append(mu)
        rows.append({"index": idx, "k0": V.k0, "eps": V.eps, "window": [m + 1, m + N],
                     "witness_density": W, "ball_mass": str(mass), "ball_mass_float": float(mass),
                     "ok": mass >= Fraction(W).limit_denominator(N) and mass > 0})
    mix = MeasureMixture.dyadic(comps, n_max)
    defects = []
    for f in functionals:
        d = mix.invariance_defect(f)
        bound = math.fsum(float(w) * 2 * f.sup_bound / mu.length for w, mu in zip(mix.weights, comps))
        defects.append({"functional": f.name, "defect": d, "bound": bound, "ok": d <= bound})
    support_ok = all(0 <= n <= orb.horizon for mu in comps for n in mu.indices)
    return CandidateReport(mix, rows, defects, support_ok)
