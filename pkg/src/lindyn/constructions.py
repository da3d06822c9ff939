"""Deterministic builders for the two explicit sequences on omega.

* The word-embedding sequence ``y``: a positive seed is extended round by
  round; a round applied to a prefix of length ``L`` appends, for
  ``M = 1..L`` and ``i = 1..M``, the word ``(y_1, ..., y_i, M)``. Every word
  ``(y_1..y_k, M)`` therefore occurs, so ``y`` has no locally bounded orbit
  under the backward shift, while ``z = (-1, y_1, y_2, ...)`` does.
* The separated-family sequence ``x``: at every ``m`` of a separated family
  member ``A_l`` it repeats the prefix ``(x_1..x_l)`` (``l`` odd) or writes the
  ramp ``(1, 2, ..., l)`` (``l`` even).

Round lengths grow like ``L^3 / 6``, so the last round of ``y`` is served
lazily through :class:`WordEmbeddingSequence.window`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .densities import StarFamily
from .errors import LengthBudgetExceeded, StarFamilyExhausted
from .spaces import TruncatedVector

DEFAULT_SEED = (1.0, 1.0, 1.0, 1.0)
DEFAULT_BUDGET = 2 ** 24
_INT64_MAX = 2 ** 63 - 1


def phi_length(N: int) -> int:
    """Length ``(N^3 + 6N^2 + 5N)/6`` added by one round applied to a length-``N`` prefix."""
    N = int(N)
    if N < 1:
        raise ValueError("N must be >= 1")
    num = N ** 3 + 6 * N ** 2 + 5 * N
    if num % 6:
        raise ArithmeticError(f"phi({N}) is not integral")  # cannot happen: N(N+1)(N+5) is divisible by 6
    value = num // 6
    if value > _INT64_MAX:
        raise OverflowError(f"phi({N}) = {value} exceeds 64-bit range")
    return value


def phi_length_sum(N: int) -> int:
    """The same length as the sum ``sum_{i=1}^N (i+1)(N+1-i)``."""
    return sum((i + 1) * (N + 1 - i) for i in range(1, N + 1))


def row_start(M):
    """Offset of row ``M`` (words ending in ``M``) within a round: ``(M-1) M (M+4) / 6``."""
    return (M - 1) * M * (M + 4) // 6


def word_offset(i):
    """Offset of word ``i`` (length ``i+1``) within its row: ``(i-1)(i+2)/2``."""
    return (i - 1) * (i + 2) // 2


@dataclass(frozen=True)
class WordRecord:
    round: int
    M: int
    i: int
    start: int  # 0-based array position of the word's first letter
    length: int


class WordEmbeddingSequence:
    """Lazily evaluated word-embedding sequence after ``rounds`` rounds.

    All rounds but the last are materialized; the last round is evaluated on
    demand from the row/word offset formulas.
    """

    space_tag = "omega"

    def __init__(self, seed: Sequence[float] = DEFAULT_SEED, rounds: int = 1,
                 materialize_budget: int = DEFAULT_BUDGET):
        seed = np.asarray(seed, dtype=np.float64)
        if seed.size == 0 or np.any(seed <= 0) or not np.all(np.isfinite(seed)):
            raise ValueError("seed must be a nonempty list of positive numbers")
        if rounds < 1:
            raise ValueError("rounds must be >= 1")
        lengths = [len(seed)]
        for _ in range(rounds):
            lengths.append(lengths[-1] + phi_length(lengths[-1]))
        self.seed = seed
        self.rounds = rounds
        self.lengths = tuple(lengths)
        if lengths[-2] > materialize_budget:
            raise LengthBudgetExceeded(
                f"round {rounds - 1} has length {lengths[-2]} > budget {materialize_budget}")
        prefix = seed
        for r in range(1, rounds):
            prefix = np.concatenate([prefix, self._round_values(prefix, lengths[r - 1],
                                                                  np.arange(lengths[r] - lengths[r - 1]))])
        prefix.flags.writeable = False
        self._prefix = prefix
        self._rows = np.array([row_start(M) for M in range(1, lengths[-2] + 2)], dtype=np.int64)

    @property
    def valid_len(self) -> int:
        return self.lengths[-1]

    def __len__(self):
        return self.valid_len

    @staticmethod
    def _locate(rows: np.ndarray, offsets: np.ndarray):
        """Row ``M``, word ``i`` and letter ``t`` for 0-based offsets inside a round."""
        M = np.searchsorted(rows, offsets, side="right")
        q = offsets - rows[M - 1]
        i = ((np.sqrt(9.0 + 8.0 * q) - 1.0) / 2.0).astype(np.int64)
        i = np.maximum(i, 1)
        # repair float rounding so that word_offset(i) <= q < word_offset(i+1)
        i = np.where(word_offset(i) > q, i - 1, i)
        i = np.where(word_offset(i + 1) <= q, i + 1, i)
        t = q - word_offset(i)
        return M, i, t

    def _round_values(self, prev: np.ndarray, L: int, offsets: np.ndarray) -> np.ndarray:
        rows = np.array([row_start(M) for M in range(1, L + 2)], dtype=np.int64)
        M, i, t = self._locate(rows, offsets)
        return np.where(t < i, prev[np.minimum(t, L - 1)], M.astype(np.float64))

    def window(self, start: int, count: int) -> np.ndarray:
        """Values at array positions ``start .. start+count-1``."""
        if start < 0 or count < 0 or start + count > self.valid_len:
            raise IndexError(f"window [{start}, {start + count}) outside [0, {self.valid_len})")
        pos = np.arange(start, start + count, dtype=np.int64)
        L = self.lengths[-2]
        out = np.empty(count, dtype=np.float64)
        early = pos < L
        out[early] = self._prefix[pos[early]]
        late = ~early
        if np.any(late):
            M, i, t = self._locate(self._rows, pos[late] - L)
            out[late] = np.where(t < i, self._prefix[np.minimum(t, L - 1)], M.astype(np.float64))
        return out

    def materialize(self, budget: int = DEFAULT_BUDGET) -> TruncatedVector:
        if self.valid_len > budget:
            raise LengthBudgetExceeded(f"length {self.valid_len} > budget {budget}")
        return TruncatedVector(self.window(0, self.valid_len), self.valid_len, "omega")

    def word_start(self, round_: int, M: int, i: int) -> int:
        """0-based position of the first letter of word ``(y_1..y_i, M)`` appended in ``round_``."""
        if not 1 <= round_ <= self.rounds:
            raise ValueError(f"round must lie in 1..{self.rounds}")
        L = self.lengths[round_ - 1]
        if not (1 <= M <= L and 1 <= i <= M):
            raise ValueError(f"need 1 <= i <= M <= {L}")
        return L + row_start(M) + word_offset(i)

    def iter_words(self, round_: int):
        L = self.lengths[round_ - 1]
        for M in range(1, L + 1):
            for i in range(1, M + 1):
                yield WordRecord(round_, M, i, L + row_start(M) + word_offset(i), i + 1)


@dataclass(eq=False)
class WordEmbeddingResult:
    vector: TruncatedVector
    lengths: tuple
    words: list

    def provenance_json(self) -> str:
        return json.dumps([w.__dict__ for w in self.words])


def build_word_embedding_sequence(seed: Sequence[float] = DEFAULT_SEED, rounds: int = 1,
                                  budget: int = DEFAULT_BUDGET) -> WordEmbeddingResult:
    """Materialized word-embedding sequence with its word provenance.

    Raises LengthBudgetExceeded when the final length exceeds ``budget``;
    use :class:`WordEmbeddingSequence` for lazy access in that case.
    """
    seq = WordEmbeddingSequence(seed, rounds, budget)
    if seq.valid_len > budget:
        raise LengthBudgetExceeded(f"{rounds} rounds reach length {seq.valid_len} > budget {budget}")
    words = [w for r in range(1, rounds + 1) for w in seq.iter_words(r)]
    return WordEmbeddingResult(seq.materialize(budget), seq.lengths, words)


class PrependedSequence:
    """``(head, x_1, x_2, ...)`` over a materialized or lazy sequence."""

    def __init__(self, head: float, tail):
        self.head = float(head)
        self.tail = tail
        self.space_tag = tail.space_tag

    @property
    def valid_len(self) -> int:
        return self.tail.valid_len + 1

    def __len__(self):
        return self.valid_len

    def window(self, start: int, count: int) -> np.ndarray:
        if start < 0 or count < 0 or start + count > self.valid_len:
            raise IndexError(f"window [{start}, {start + count}) outside [0, {self.valid_len})")
        if count == 0:
            return np.zeros(0)
        if start == 0:
            return np.concatenate(([self.head], np.asarray(self.tail.window(0, count - 1))))
        return np.asarray(self.tail.window(start - 1, count))


def build_z_from_y(y):
    """``z = (-1, y_1, y_2, ...)``; the backward shift maps ``z`` back to ``y``."""
    if y.valid_len < 1:
        raise ValueError("y must be nonempty")
    if isinstance(y, TruncatedVector):
        if np.any(np.real(y.valid) <= 0):
            raise ValueError("y entries must be positive")
        return TruncatedVector(np.concatenate(([-1.0], y.valid)), y.valid_len + 1, y.space_tag)
    return PrependedSequence(-1.0, y)


@dataclass(eq=False)
class StarRecurrentResult:
    vector: TruncatedVector
    log: np.ndarray  # rows (m, l, kind) with kind 1 = prefix copy, 2 = ramp

    def provenance_json(self) -> str:
        return json.dumps([{"m": int(m), "l": int(l), "kind": "copy" if k == 1 else "ramp"}
                           for m, l, k in self.log])


def merged_family(star: StarFamily) -> tuple[np.ndarray, np.ndarray]:
    """All elements of the family in increasing order with their set index ``l``."""
    elems = np.concatenate(star.sets)
    labels = np.concatenate([np.full(len(A), l, dtype=np.int64) for l, A in enumerate(star.sets, 1)])
    order = np.argsort(elems, kind="stable")
    return elems[order], labels[order]


def build_star_recurrent(star: StarFamily, horizon: int) -> StarRecurrentResult:
    """The first ``horizon`` coordinates of the separated-family sequence.

    ``x_1 = 1``; at ``m`` in ``A_l`` the coordinates ``x_{m+1..m+l}`` become
    ``(x_1..x_l)`` for odd ``l`` and ``(1, ..., l)`` for even ``l``; all other
    coordinates are 0.
    """
    m, lab = merged_family(star)
    if m.size == 0:
        raise StarFamilyExhausted("the family is empty")
    covered = max(star.horizon, int(m[-1] + lab[-1]))
    if horizon > covered:
        raise StarFamilyExhausted(f"family determines {covered} coordinates, {horizon} requested")
    x = np.zeros(covered, dtype=np.float64)
    x[0] = 1.0
    log = []
    for ms, l in zip(m.tolist(), lab.tolist()):
        if ms >= horizon:
            break
        if l % 2:
            x[ms : ms + l] = x[:l]
            log.append((ms, l, 1))
        else:
            x[ms : ms + l] = np.arange(1, l + 1)
            log.append((ms, l, 2))
    return StarRecurrentResult(TruncatedVector(x[:horizon], horizon, "omega"),
                               np.array(log, dtype=np.int64).reshape(-1, 3))


def replay_star_log(log: np.ndarray, horizon: int) -> np.ndarray:
    """Rebuild the sequence from its provenance log alone."""
    x = np.zeros(horizon + int(log[:, 1].max(initial=0)), dtype=np.float64)
    x[0] = 1.0
    for ms, l, kind in log:
        x[ms : ms + l] = x[:l] if kind == 1 else np.arange(1, l + 1)
    return x[:horizon]
