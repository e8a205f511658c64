"""Words in a free group and the spelling length.

A word is a tuple of nonzero integers: ``j`` stands for the generator
``c_j`` and ``-j`` for its inverse, so ``c1 c2 c1^-1 c2^-1`` is
``(1, 2, -1, -2)``. The spelling length of ``g`` is the least number of
conjugates of generators or inverse generators whose product is ``g``.
"""
from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import InvalidInputError

Letters = tuple


def _check(letters: Iterable[int], n: Optional[int]) -> tuple:
    out = tuple(int(x) for x in letters)
    for x in out:
        if x == 0 or (n is not None and abs(x) > n):
            raise InvalidInputError(f"letter {x} out of range for {n} generators")
    return out


def reduce(letters: Sequence[int], n: Optional[int] = None) -> Letters:
    """Freely reduce a letter sequence (cancel adjacent ``x, -x`` pairs)."""
    stack: list[int] = []
    for x in _check(letters, n):
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


def invert(g: Sequence[int]) -> Letters:
    return tuple(-x for x in reversed(g))


def multiply(*words: Sequence[int]) -> Letters:
    return reduce(tuple(itertools.chain.from_iterable(words)))


def conjugate(g: Sequence[int], h: Sequence[int]) -> Letters:
    """``h g h^-1``."""
    return multiply(h, g, invert(h))


def cyclic_reduce(g: Sequence[int]) -> Letters:
    g = reduce(g)
    i, j = 0, len(g)
    while j - i >= 2 and g[i] == -g[j - 1]:
        i += 1
        j -= 1
    return g[i:j]


def canonical_cyclic(g: Sequence[int]) -> Letters:
    """Representative of the conjugacy class: least rotation of the cyclic reduction."""
    c = cyclic_reduce(g)
    if not c:
        return c
    return min(c[k:] + c[:k] for k in range(len(c)))


def exponent_sums(g: Sequence[int]) -> dict:
    out: dict = {}
    for x in g:
        out[abs(x)] = out.get(abs(x), 0) + (1 if x > 0 else -1)
    return out


def abelianized_length(g: Sequence[int]) -> int:
    """Sum over generators of the absolute total exponent."""
    return sum(abs(v) for v in exponent_sums(reduce(g)).values())


def spelling_lower_bound(g: Sequence[int]) -> int:
    """Abelianised length, sharpened by parity and the one-factor case.

    Every factor changes the total exponent parity, so the spelling length
    has the parity of the word length. A single factor is exactly a
    conjugate of one letter, i.e. a word whose cyclic reduction has length
    one; so a nontrivial word of abelianised length 0 needs two factors and
    one of abelianised length 1 that is not such a conjugate needs three.
    """
    g = reduce(g)
    lam = abelianized_length(g)
    if g and lam == 0:
        return 2
    if lam == 1 and len(cyclic_reduce(g)) != 1:
        return 3
    return lam


@dataclass(frozen=True)
class Word:
    """Freely reduced word over ``n`` generators (``n=None`` means unchecked)."""

    letters: Letters = ()
    n: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "letters", reduce(self.letters, self.n))

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters, self._merge_n(other))

    def inverse(self) -> "Word":
        return Word(invert(self.letters), self.n)

    def conjugated_by(self, h: "Word") -> "Word":
        return Word(conjugate(self.letters, h.letters), self._merge_n(h))

    def _merge_n(self, other: "Word") -> Optional[int]:
        if self.n is None:
            return other.n
        if other.n is None:
            return self.n
        return max(self.n, other.n)

    def __len__(self):
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return not self.letters

    def __str__(self):
        if not self.letters:
            return "e"
        return " ".join(f"c{abs(x)}" + ("^-1" if x < 0 else "") for x in self.letters)


@dataclass(frozen=True)
class SpellingResult:
    lower: int
    upper: int
    exact: bool
    # deletion steps (canonical word, position) from the search, or explicit
    # factors h c^e h^-1 when the conjugator search found a shorter spelling
    witness: tuple = field(default=(), repr=False)


def _deletions(w: Letters):
    for k in range(len(w)):
        u = w[:k]
        yield k, conjugate((w[k],), u), canonical_cyclic(u + w[k + 1:])


def deletion_search(g: Sequence[int], budget: int, max_states: int = 500_000):
    """Breadth-first search over single-letter deletions.

    Deleting letter ``x`` at position ``k`` of ``u x v`` writes
    ``u x v = (u x u^-1)(u v)``, so each deletion peels off one factor of a
    spelling. Returns ``(depth, factors)`` for the first depth reaching the
    identity, or ``None`` when the budget runs out.
    """
    start = canonical_cyclic(g)
    if not start:
        return 0, ()
    # words are stored in canonical form, so factors found along the path are
    # spellings of a conjugate of g; conjugating them back costs nothing in length
    parent = {start: None}
    frontier = deque([start])
    depth = 0
    while frontier and depth < budget:
        depth += 1
        nxt: deque = deque()
        for w in frontier:
            for k, factor, rest in _deletions(w):
                if rest in parent:
                    continue
                parent[rest] = (w, k)
                if not rest:
                    return depth, _path(parent, rest)
                nxt.append(rest)
                if len(parent) > max_states:
                    return None
        frontier = nxt
    return None


def _path(parent, end):
    steps = []
    node = end
    while parent[node] is not None:
        prev, k = parent[node]
        steps.append((prev, k))
        node = prev
    return tuple(reversed(steps))


def conjugates_of_letters(n: int, conj_len: int) -> list:
    """Distinct words ``h c_j^e h^-1`` with ``|h| <= conj_len``, shortest first."""
    seen = set()
    out = []
    for h in reduced_words(n, conj_len):
        for j in range(1, n + 1):
            for e in (j, -j):
                x = conjugate((e,), h)
                if x not in seen:
                    seen.add(x)
                    out.append(x)
    return out


def reduced_words(n: int, max_len: int, min_len: int = 0):
    """All freely reduced words over ``n`` generators, by increasing length."""
    letters = [x for j in range(1, n + 1) for x in (j, -j)]
    level = [()]
    for length in range(max_len + 1):
        if length >= min_len:
            yield from level
        level = [w + (x,) for w in level for x in letters if not w or w[-1] != -x]


def spell_with_conjugators(g: Sequence[int], r: int, n: int, conj_len: int) -> Optional[tuple]:
    """Find ``r`` factors with conjugators of length ``<= conj_len`` multiplying to ``g``."""
    g = reduce(g)
    factors = conjugates_of_letters(n, conj_len)
    members = set(factors)

    def rec(w, k):
        if k == 0:
            return () if not w else None
        if spelling_lower_bound(w) > k or (len(w) - k) % 2:
            return None
        if k == 1:
            return (w,) if w in members else None
        for x in factors:
            rest = multiply(invert(x), w)
            if abelianized_length(rest) > k - 1:
                continue
            sub = rec(rest, k - 1)
            if sub is not None:
                return (x,) + sub
        return None

    return rec(g, r)


def spelling_length(g: Sequence[int], budget: Optional[int] = None, n: Optional[int] = None,
                    conj_len: int = 0) -> SpellingResult:
    """Interval ``[lower, upper]`` containing the spelling length of ``g``.

    ``upper`` comes from :func:`deletion_search`; ``lower`` is the
    abelianised length (with the parity correction). When they differ and
    ``conj_len > 0``, shorter spellings are searched for directly with
    conjugators up to that length.
    """
    g = reduce(g, n)
    lower = spelling_lower_bound(g)
    c = cyclic_reduce(g)
    if budget is None:
        budget = len(c)
    if budget < lower:
        raise InvalidInputError(f"budget {budget} is below the abelianised bound {lower}")
    found = deletion_search(g, budget)
    if found is None:
        upper = len(c)          # delete the letters one by one
        witness: tuple = ()
    else:
        upper, witness = found
    if upper > lower and conj_len > 0:
        n_gen = n or max((abs(x) for x in g), default=1)
        for r in range(lower, upper, 2):
            sp = spell_with_conjugators(g, r, n_gen, conj_len)
            if sp is not None:
                upper, witness = r, sp
                break
    return SpellingResult(lower, upper, lower == upper, witness)


def sphere_spelling_bound(boundary: Sequence[int], c0: Sequence[int], d0: int,
                          r_max: int, conj_len: int, n: Optional[int] = None) -> int:
    """Lower bound on the summed absolute degrees of a disk map into the sphere.

    Minimises the spelling lower bound of
    ``boundary * g_1 ... g_{r+|d0|} * h_1 ... h_r`` over ``r <= r_max``,
    ``g_i`` conjugate to ``c0`` and ``h_i`` conjugate to ``c0^-1`` by words of
    length ``<= conj_len``, then adds ``|d0|``. The result is only
    certified for the searched conjugators.
    """
    boundary = reduce(boundary, n)
    c0 = reduce(c0, n)
    n_gen = n or max((abs(x) for x in boundary + c0), default=1)
    conj = list(reduced_words(n_gen, conj_len))
    gs = sorted({conjugate(c0, h) for h in conj}, key=lambda w: (len(w), w))
    hs = sorted({conjugate(invert(c0), h) for h in conj}, key=lambda w: (len(w), w))
    k = abs(d0)
    best = None
    # every candidate has the same abelianisation, hence the same floor
    floor = None
    for r in range(r_max + 1):
        seen = set()
        for combo_g in itertools.product(gs, repeat=r + k):
            for combo_h in itertools.product(hs, repeat=r):
                w = multiply(boundary, *combo_g, *combo_h)
                key = canonical_cyclic(w)
                if key in seen:
                    continue
                seen.add(key)
                res = spelling_length(w)
                if floor is None:
                    floor = abelianized_length(w)
                # the lower end keeps the result sound when the interval is open
                if best is None or res.lower < best:
                    best = res.lower
                if best <= floor:
                    return k + best
    return k + (best if best is not None else 0)
