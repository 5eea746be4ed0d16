"""Understandability metrics and the nonparametric tests used on survey data.

The two study-phase metrics are ratios of small counts, so they are computed
exactly as fractions: the occurrence score of an expression within a referent
is its share of that referent's proposals, and qualitative response accuracy
is the share of interpretation labels that match the intended meaning. The
classic consensus measures (agreement score, agreement rate, max-consensus,
consensus-distinct ratio) are provided for comparison over the same proposal
groupings.

Statistical tests are self-contained: Mann-Whitney U with an exact
small-sample path, and Kruskal-Wallis with tie correction against the
chi-square upper tail.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

EXACT_MWU_MAX_PER_GROUP = 8


class MetricsError(ValueError):
    pass


# --- proposal-grouping metrics ------------------------------------------------


def occurrence_score(counts: Mapping[str, int]) -> dict[str, Fraction]:
    """Share of a referent's proposals falling into each expression category.

    Exact: OS(E) = count(E) / total proposals. Scores sum to 1; a lone
    category scores 1 and N singletons each score 1/N.
    """
    if not counts:
        raise MetricsError("occurrence score needs at least one category")
    for cat, c in counts.items():
        if c < 1:
            raise MetricsError(f"category '{cat}' has non-positive count {c}")
    total = sum(counts.values())
    return {cat: Fraction(c, total) for cat, c in counts.items()}


def qra(c_plus: int, c_minus: int) -> Fraction:
    """Qualitative response accuracy: matching labels over all labels."""
    if c_plus < 0 or c_minus < 0:
        raise MetricsError("label counts cannot be negative")
    if c_plus + c_minus == 0:
        raise MetricsError("no labels to score")
    return Fraction(c_plus, c_plus + c_minus)


@dataclass(frozen=True)
class GroupSizes:
    """Sizes of identical-proposal groups for one referent."""

    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.sizes:
            raise MetricsError("group sizes must be non-empty")
        if any(s < 1 for s in self.sizes):
            raise MetricsError("every group must have at least one proposal")

    @property
    def total(self) -> int:
        return sum(self.sizes)


def agreement_score(g: GroupSizes) -> Fraction:
    """Probability two independent proposals coincide: sum of squared shares."""
    total = g.total
    return sum(
        (Fraction(s, total) ** 2 for s in g.sizes), start=Fraction(0)
    )


def agreement_rate(g: GroupSizes) -> Fraction:
    """Share of agreeing pairs among all distinct proposal pairs."""
    total = g.total
    if total < 2:
        raise MetricsError("agreement rate needs at least two proposals")
    agreeing = sum(math.comb(s, 2) for s in g.sizes)
    return Fraction(agreeing, math.comb(total, 2))


def max_consensus(g: GroupSizes) -> Fraction:
    """Share of proposals in the single most popular group."""
    return Fraction(max(g.sizes), g.total)


def consensus_distinct_ratio(g: GroupSizes, threshold: int = 2) -> Fraction:
    """Fraction of distinct groups proposed at least `threshold` times."""
    return Fraction(
        sum(1 for s in g.sizes if s >= threshold), len(g.sizes)
    )


# --- questionnaire reliability ------------------------------------------------


def _variance(values: Sequence[float]) -> float:
    n = len(values)
    mean = sum(values) / n
    return sum((v - mean) ** 2 for v in values) / (n - 1)


def cronbach_alpha(items: Sequence[Sequence[float]]) -> float:
    """Internal consistency of a battery; rows are participants, columns items.

    alpha = k/(k-1) * (1 - sum of item variances / variance of total scores)
    """
    if len(items) < 2:
        raise MetricsError("cronbach alpha needs at least two participants")
    k = len(items[0])
    if k < 2:
        raise MetricsError("cronbach alpha needs at least two items")
    if any(len(row) != k for row in items):
        raise MetricsError("ragged item matrix")
    item_vars = [_variance([row[j] for row in items]) for j in range(k)]
    total_var = _variance([sum(row) for row in items])
    if total_var == 0:
        raise MetricsError("total score variance is zero")
    return k / (k - 1) * (1 - sum(item_vars) / total_var)


# --- rank helpers -------------------------------------------------------------


def _rankdata(values: Sequence[float]) -> list[float]:
    """Average ranks, 1-based; ties share the mean of their rank block."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j + 2) / 2  # ranks are 1-based
        for idx in order[i : j + 1]:
            ranks[idx] = avg
        i = j + 1
    return ranks


def _tie_sizes(values: Sequence[float]) -> list[int]:
    sizes: dict[float, int] = {}
    for v in values:
        sizes[v] = sizes.get(v, 0) + 1
    return [t for t in sizes.values() if t > 1]


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def _chi2_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution.

    Uses the recurrence Q(a+1, z) = Q(a, z) + z^a e^-z / Gamma(a+1) from the
    half- or whole-integer base case, which is stable for the small df used
    in study reports.
    """
    if df < 1:
        raise MetricsError(f"chi-square df must be >= 1, got {df}")
    if x <= 0:
        return 1.0
    z = x / 2.0
    if df % 2 == 0:
        a = 1.0
        q = math.exp(-z)
    else:
        a = 0.5
        q = math.erfc(math.sqrt(z))
    while a < df / 2.0:
        q += math.exp(a * math.log(z) - z - math.lgamma(a + 1.0))
        a += 1.0
    return min(1.0, q)


# --- Mann-Whitney U -----------------------------------------------------------


@dataclass(frozen=True)
class MannWhitneyResult:
    u: float
    p_two_sided: float
    method: str  # "exact" or "normal_approximation"


def _u_statistics(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    ranks = _rankdata(list(a) + list(b))
    r_a = sum(ranks[: len(a)])
    u_a = r_a - len(a) * (len(a) + 1) / 2
    u_b = len(a) * len(b) - u_a
    return u_a, u_b


def _exact_u_counts(n_a: int, n_b: int) -> list[int]:
    """Null distribution of U over all rank splits: counts[u] for u=0..n_a*n_b."""
    # counts for (a, b) built by whether the largest rank belongs to a or b
    table: list[list[list[int]]] = [
        [[] for _ in range(n_b + 1)] for _ in range(n_a + 1)
    ]
    for b in range(n_b + 1):
        table[0][b] = [1]
    for a in range(1, n_a + 1):
        table[a][0] = [1]
        for b in range(1, n_b + 1):
            width = a * b + 1
            counts = [0] * width
            # largest of the a+b ranks in group a: adds b to U
            for u, c in enumerate(table[a - 1][b]):
                counts[u + b] += c
            # largest rank in group b: U unchanged
            for u, c in enumerate(table[a][b - 1]):
                counts[u] += c
            table[a][b] = counts
    return table[n_a][n_b]


def mann_whitney_u(
    a: Sequence[float], b: Sequence[float], method: str = "auto"
) -> MannWhitneyResult:
    """Two-sided Mann-Whitney U test.

    Small tie-free samples (each side <= 8) get an exact p from the full
    null distribution of rank splits; otherwise the normal approximation is
    used with tie and continuity corrections. `method` forces one path
    ("exact" or "normal_approximation"); exact requires tie-free data.
    """
    if not a or not b:
        raise MetricsError("both samples must be non-empty")
    if method not in ("auto", "exact", "normal_approximation"):
        raise MetricsError(f"unknown method '{method}'")
    n_a, n_b = len(a), len(b)
    u_a, u_b = _u_statistics(a, b)
    u_min = min(u_a, u_b)
    has_ties = bool(_tie_sizes(list(a) + list(b)))
    if method == "exact" and has_ties:
        raise MetricsError("exact method requires tie-free samples")
    use_exact = (
        method == "exact"
        or (
            method == "auto"
            and not has_ties
            and n_a <= EXACT_MWU_MAX_PER_GROUP
            and n_b <= EXACT_MWU_MAX_PER_GROUP
        )
    )
    if use_exact:
        counts = _exact_u_counts(n_a, n_b)
        total = math.comb(n_a + n_b, n_a)
        below = sum(counts[u] for u in range(int(u_min) + 1))
        p = min(1.0, (2 * below) / total)
        return MannWhitneyResult(u=u_min, p_two_sided=p, method="exact")
    n = n_a + n_b
    mean = n_a * n_b / 2.0
    tie_term = sum(t**3 - t for t in _tie_sizes(list(a) + list(b)))
    var = n_a * n_b / 12.0 * ((n + 1) - tie_term / (n * (n - 1)))
    if var <= 0:
        return MannWhitneyResult(
            u=u_min, p_two_sided=1.0, method="normal_approximation"
        )
    z = max(0.0, (abs(u_min - mean) - 0.5)) / math.sqrt(var)
    p = min(1.0, 2 * _normal_sf(z))
    return MannWhitneyResult(
        u=u_min, p_two_sided=p, method="normal_approximation"
    )


# --- Kruskal-Wallis -----------------------------------------------------------


@dataclass(frozen=True)
class KruskalWallisResult:
    h: float
    p: float
    df: int


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> KruskalWallisResult:
    """Kruskal-Wallis H test with tie correction, p from chi-square upper tail.

    All-tied data (zero rank variance) is reported as H = 0, p = 1.
    """
    if len(groups) < 2:
        raise MetricsError("kruskal-wallis needs at least two groups")
    if any(len(g) == 0 for g in groups):
        raise MetricsError("kruskal-wallis groups must be non-empty")
    pooled = [v for g in groups for v in g]
    n = len(pooled)
    if n < 3:
        raise MetricsError("kruskal-wallis needs at least three values")
    ranks = _rankdata(pooled)
    h = 0.0
    offset = 0
    for g in groups:
        r = sum(ranks[offset : offset + len(g)])
        h += r * r / len(g)
        offset += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3 * (n + 1)
    tie_term = sum(t**3 - t for t in _tie_sizes(pooled))
    correction = 1.0 - tie_term / (n**3 - n)
    if correction == 0:
        h = 0.0
    else:
        h /= correction
    df = len(groups) - 1
    p = 1.0 if h <= 0 else _chi2_sf(h, df)
    return KruskalWallisResult(h=max(h, 0.0), p=p, df=df)
