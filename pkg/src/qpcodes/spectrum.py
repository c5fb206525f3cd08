"""Weight spectra: doubling recursions, dual-space oracle, MacWilliams transform.

Two independent routes exist for every code in the family. The recursion
route steps a half-length spectrum up through each doubling; the oracle
route enumerates the row space of H (2^rank words) and converts to the
primal spectrum with an exact integer MacWilliams transform. Any
non-integral or negative intermediate is raised as an inconsistency, never
rounded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .construct import Code, seed
from .errors import BudgetError, ConsistencyError, PreconditionError
from .gf2 import BitMatrix

__all__ = [
    "WeightSpectrum",
    "comb0",
    "double_spectrum_step",
    "double_dual_spectrum_step",
    "row_space_spectrum",
    "spectrum_of_matrix",
    "oracle_spectrum",
    "dual_spectrum",
    "spectrum_by_doubling",
    "macwilliams",
]

_ORACLE_RANK_BUDGET = 26


def comb0(a: int, b: int) -> int:
    """Binomial with the summation convention: zero outside 0 <= b <= a."""
    if b < 0 or a < 0 or b > a:
        return 0
    return math.comb(a, b)


@dataclass(frozen=True)
class WeightSpectrum:
    """counts[w] = number of words of Hamming weight w; len(counts) = n + 1."""

    n: int
    counts: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.counts) != self.n + 1:
            raise PreconditionError("counts must have length n + 1")
        if any(c < 0 for c in self.counts):
            raise PreconditionError("negative count")
        if self.counts[0] < 1:
            raise PreconditionError("zero word missing")

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def dimension(self) -> int:
        t = self.total
        k = t.bit_length() - 1
        if t != 1 << k:
            raise ConsistencyError(f"spectrum total {t} is not a power of two")
        return k

    def min_nonzero(self) -> int | None:
        for w in range(1, self.n + 1):
            if self.counts[w]:
                return w
        return None

    def nonzero_items(self) -> list[tuple[int, int]]:
        return [(w, c) for w, c in enumerate(self.counts) if c]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "k": self.dimension,
            "counts": {str(w): str(c) for w, c in self.nonzero_items()},
        }

    @classmethod
    def from_json(cls, obj: dict) -> "WeightSpectrum":
        n = int(obj["n"])
        counts = [0] * (n + 1)
        for w, c in obj["counts"].items():
            counts[int(w)] = int(c)
        return cls(n, tuple(counts))


def double_spectrum_step(s: WeightSpectrum) -> WeightSpectrum:
    """Spectrum of the doubled code from the half-length spectrum.

    Even weights:  A'_{2v} = D_v + sum_{j=0}^{v-2} 2^{2v-2j-1} A_{2v-2j} C(half-2v+2j, j)
    with D_v = C(half, v) for even v, else 0.
    Odd weights:   A'_{2v+1} = sum_{j=0}^{v-2} 2^{2v-2j} A_{2v+1-2j} C(half-2v-1+2j, j)

    Valid only when the input code has no nonzero word of weight < 4.
    """
    half = s.n
    for w in (1, 2, 3):
        if w <= half and s.counts[w]:
            raise PreconditionError(
                f"input spectrum has A_{w} = {s.counts[w]} != 0; "
                "the doubling recursion requires minimum weight >= 4"
            )
    a = s.counts
    out = [0] * (2 * half + 1)
    for v in range(0, half + 1):
        val = comb0(half, v) if v % 2 == 0 else 0
        for j in range(0, v - 1):
            w_old = 2 * v - 2 * j
            if w_old <= half:
                val += (1 << (2 * v - 2 * j - 1)) * a[w_old] * comb0(half - 2 * v + 2 * j, j)
        out[2 * v] = val
    for v in range(0, half + 1):
        w_new = 2 * v + 1
        if w_new > 2 * half:
            break
        val = 0
        for j in range(0, v - 1):
            w_old = 2 * v + 1 - 2 * j
            if w_old <= half:
                val += (1 << (2 * v - 2 * j)) * a[w_old] * comb0(half - 2 * v - 1 + 2 * j, j)
        out[w_new] = val
    result = WeightSpectrum(2 * half, tuple(out))
    # word count must grow by exactly 2^(half-1): dimension k -> k + half - 1
    if result.total != s.total << (half - 1):
        raise ConsistencyError(
            f"doubled spectrum totals {result.total}, expected {s.total << (half - 1)}"
        )
    return result


def double_dual_spectrum_step(s_dual: WeightSpectrum, r_new: int) -> WeightSpectrum:
    """Dual spectrum across one doubling: weights double, plus 2^(r_new-1) words
    of weight half_n from cosets of the new top row. Defined for even half_n only."""
    half = s_dual.n
    if half % 2 != 0:
        raise PreconditionError(
            f"half-length {half} is odd; the dual image is not weight-aligned, "
            "use the MacWilliams route instead"
        )
    if s_dual.total != 1 << (r_new - 1):
        raise ConsistencyError(
            f"dual spectrum totals {s_dual.total}, expected 2^{r_new - 1}"
        )
    out = [0] * (2 * half + 1)
    for v in range(half + 1):
        out[2 * v] = s_dual.counts[v]
    out[half] += 1 << (r_new - 1)
    return WeightSpectrum(2 * half, tuple(out))


def _row_basis(h: BitMatrix) -> list[int]:
    basis: dict[int, int] = {}
    for row in h.rows:
        x = row
        while x:
            b = x.bit_length() - 1
            if b in basis:
                x ^= basis[b]
            else:
                basis[b] = x
                break
    return list(basis.values())


def row_space_spectrum(h: BitMatrix) -> WeightSpectrum:
    """Exact weight spectrum of the row space of h (the dual code), by Gray-code walk."""
    basis = _row_basis(h)
    rank = len(basis)
    if rank > _ORACLE_RANK_BUDGET:
        raise BudgetError(f"row space of rank {rank} exceeds 2^{_ORACLE_RANK_BUDGET} budget")
    counts = [0] * (h.cols + 1)
    counts[0] = 1
    word = 0
    for i in range(1, 1 << rank):
        word ^= basis[(i & -i).bit_length() - 1]
        counts[word.bit_count()] += 1
    return WeightSpectrum(h.cols, tuple(counts))


def spectrum_of_matrix(h: BitMatrix) -> WeightSpectrum:
    """Primal spectrum of the code {x : Hx = 0}: dual enumeration + MacWilliams."""
    dual = row_space_spectrum(h)
    return macwilliams(dual, dual.dimension)


def oracle_spectrum(c: Code) -> WeightSpectrum:
    return spectrum_of_matrix(c.H)


def dual_spectrum(c: Code) -> WeightSpectrum:
    return row_space_spectrum(c.H)


def spectrum_by_doubling(c: Code) -> WeightSpectrum:
    """Recursion route: oracle the seed spectrum, then one step per doubling."""
    lin = c.spec.lineage
    if lin.seed is None:
        raise PreconditionError("code has no seed lineage; only the oracle route applies")
    if lin.shortened:
        raise PreconditionError("shortened codes have no doubling recursion; use the oracle")
    base = seed(lin.seed)
    steps = lin.doublings - base.spec.lineage.doublings
    if steps < 0:
        raise ConsistencyError("lineage records fewer doublings than its seed")
    s = oracle_spectrum(base)
    for _ in range(steps):
        s = double_spectrum_step(s)
    if s.n != c.spec.n:
        raise ConsistencyError(f"lineage walks to length {s.n}, code has length {c.spec.n}")
    return s


def macwilliams(s: WeightSpectrum, k: int) -> WeightSpectrum:
    """Dual spectrum of a 2^k-word length-n code, exact integer arithmetic.

    B_j = 2^-k * sum_w A_w K_j(w) with binary Krawtchouk K_j; computed by the
    three-term recurrence in j. Non-integral or negative output raises, since
    it can only mean the input was not a valid spectrum.
    """
    if k < 0 or s.total != 1 << k:
        raise PreconditionError(f"spectrum totals {s.total}, not 2^{k}")
    n = s.n
    acc = [0] * (n + 1)
    for w, a_w in s.nonzero_items():
        k_prev = 1
        acc[0] += a_w
        if n >= 1:
            k_cur = n - 2 * w
            acc[1] += a_w * k_cur
            for j in range(1, n):
                nom = (n - 2 * w) * k_cur - (n - j + 1) * k_prev
                if nom % (j + 1):
                    raise ConsistencyError("Krawtchouk recurrence lost integrality")
                k_prev, k_cur = k_cur, nom // (j + 1)
                acc[j + 1] += a_w * k_cur
    out = []
    for j, v in enumerate(acc):
        q, rem = divmod(v, 1 << k)
        if rem or q < 0:
            raise ConsistencyError(
                f"MacWilliams output at weight {j} is {v}/2^{k}; input spectrum inconsistent"
            )
        out.append(q)
    return WeightSpectrum(n, tuple(out))
