"""Ratcliff/Obershelp description similarity for grouping billers."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable


def default_junk(ch: str) -> bool:
    return ch.isspace() or ch.isdigit()


@dataclass(frozen=True)
class SimilarityConfig:
    threshold: float = 0.75
    junk: Callable[[str], bool] = field(default=default_junk, compare=False)

    def __post_init__(self) -> None:
        if not 0.0 <= self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in [0, 1], got {self.threshold}")


DEFAULT = SimilarityConfig()


def normalize(text: str, junk: Callable[[str], bool] = default_junk) -> str:
    """Case-fold and drop junk characters."""
    return "".join(ch for ch in text.casefold() if not junk(ch))


def _longest_match(a: str, b: str, alo: int, ahi: int, blo: int, bhi: int, b2j: dict) -> tuple[int, int, int]:
    # earliest block in a, then earliest in b, among the longest
    best_i, best_j, best = alo, blo, 0
    j2len: dict[int, int] = {}
    for i in range(alo, ahi):
        new: dict[int, int] = {}
        for j in b2j.get(a[i], ()):
            if j < blo:
                continue
            if j >= bhi:
                break
            k = new[j] = j2len.get(j - 1, 0) + 1
            if k > best:
                best_i, best_j, best = i - k + 1, j - k + 1, k
        j2len = new
    return best_i, best_j, best


def matched_characters(a: str, b: str) -> int:
    """Total length of the recursively found longest common blocks."""
    b2j: dict[str, list[int]] = {}
    for j, ch in enumerate(b):
        b2j.setdefault(ch, []).append(j)
    total = 0
    stack = [(0, len(a), 0, len(b))]
    while stack:
        alo, ahi, blo, bhi = stack.pop()
        i, j, k = _longest_match(a, b, alo, ahi, blo, bhi, b2j)
        if k:
            total += k
            if alo < i and blo < j:
                stack.append((alo, i, blo, j))
            if i + k < ahi and j + k < bhi:
                stack.append((i + k, ahi, j + k, bhi))
    return total


@lru_cache(maxsize=200_000)
def _ratio(a: str, b: str) -> float:
    if not a or not b:
        return 0.0
    # canonical argument order makes tie-breaking, hence the ratio, symmetric
    if b < a:
        a, b = b, a
    return 2.0 * matched_characters(a, b) / (len(a) + len(b))


def similarity(a: str, b: str, config: SimilarityConfig = DEFAULT) -> float:
    """Ratcliff/Obershelp ratio of the junk-free, case-folded descriptions.

    Strings with no content left after junk removal score 0.
    """
    return _ratio(normalize(a, config.junk), normalize(b, config.junk))


def is_same_biller(a: str, b: str, config: SimilarityConfig = DEFAULT) -> bool:
    return similarity(a, b, config) >= config.threshold
