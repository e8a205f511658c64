"""Independent brute-force references used by the unit and acceptance tests.

Nothing here imports the package under test.
"""
import itertools
from functools import lru_cache

import numpy as np

LETTERS2 = (1, -1, 2, -2)


def free_reduce(w):
    out = []
    for x in w:
        if out and out[-1] == -x:
            out.pop()
        else:
            out.append(x)
    return tuple(out)


def inverse(w):
    return tuple(-x for x in reversed(w))


def exponent_total(w):
    tot = {}
    for x in w:
        tot[abs(x)] = tot.get(abs(x), 0) + (1 if x > 0 else -1)
    return sum(abs(v) for v in tot.values())


def reduced_words(letters, max_len):
    """Every freely reduced word of length <= max_len, shortest first."""
    level = [()]
    for _ in range(max_len + 1):
        yield from level
        level = [w + (x,) for w in level for x in letters if not w or w[-1] != -x]


class ConjugatorSpeller:
    """Least number of factors ``h c^e h^-1`` (``|h| <= conj_len``) spelling a word.

    Searches by peeling one factor at a time off the front; factors of
    products of one or two are looked up in precomputed tables.
    """

    def __init__(self, letters=LETTERS2, conj_len=4):
        factors = []
        seen = set()
        for h in reduced_words(letters, conj_len):
            for e in letters:
                f = free_reduce(h + (e,) + inverse(h))
                if f not in seen:
                    seen.add(f)
                    factors.append(f)
        self.factors = factors
        self.one = set(factors)
        self.two = {free_reduce(a + b) for a in factors for b in factors}

    def can(self, w, k):
        if k == 0:
            return not w
        if exponent_total(w) > k or (len(w) - k) % 2:
            return False
        if k == 1:
            return w in self.one
        if k == 2:
            return w in self.two
        return any(self.can(free_reduce(inverse(f) + w), k - 1) for f in self.factors)

    def length(self, w):
        w = free_reduce(w)
        k = 0
        while not self.can(w, k):
            k += 1
        return k


def exhaustive_matching(pos, neg):
    """Minimum total distance over all pairings (by enumeration)."""
    pos = np.asarray(pos, float).reshape(-1, 3)
    neg = np.asarray(neg, float).reshape(-1, 3)
    m = len(pos)
    if m == 0:
        return 0.0
    C = np.linalg.norm(pos[:, None] - neg[None], axis=-1)
    rows = np.arange(m)
    return float(min(C[rows, list(p)].sum() for p in itertools.permutations(range(m))))
