"""Growable Fenwick tree over nonnegative float weights.

Slots are 0-based.  ``find`` walks down the implicit tree in O(log n) and
returns the slot whose cumulative interval contains the target.
"""

from __future__ import annotations


class FenwickTree:
    def __init__(self, capacity: int = 16):
        cap = 1
        while cap < capacity:
            cap <<= 1
        self._cap = cap
        self.weights = [0.0] * cap
        self._tree = [0.0] * (cap + 1)

    def __len__(self):
        return self._cap

    @property
    def capacity(self) -> int:
        return self._cap

    def add(self, i: int, delta: float) -> None:
        tree = self._tree
        cap = self._cap
        self.weights[i] += delta
        j = i + 1
        while j <= cap:
            tree[j] += delta
            j += j & -j

    def set(self, i: int, w: float) -> None:
        if i >= self._cap:
            self.grow(i + 1)
        d = w - self.weights[i]
        if d:
            self.add(i, d)
        self.weights[i] = w

    def prefix(self, i: int) -> float:
        """Sum of weights of slots ``0..i-1``."""
        tree = self._tree
        s = 0.0
        while i > 0:
            s += tree[i]
            i -= i & -i
        return s

    def total(self) -> float:
        return self._tree[self._cap]

    def find(self, target: float) -> int:
        """Smallest slot ``i`` with ``prefix(i + 1) > target``.

        Returns ``capacity`` when ``target`` is not below the total.
        """
        tree = self._tree
        pos = 0
        step = self._cap
        while step:
            nxt = pos + step
            if nxt <= self._cap and tree[nxt] <= target:
                pos = nxt
                target -= tree[nxt]
            step >>= 1
        return pos

    def rebuild(self) -> None:
        """Recompute internal sums from the leaf weights (drops rounding drift)."""
        cap = self._cap
        tree = [0.0] * (cap + 1)
        for i, w in enumerate(self.weights):
            tree[i + 1] += w
        for j in range(1, cap + 1):
            k = j + (j & -j)
            if k <= cap:
                tree[k] += tree[j]
        self._tree = tree

    def grow(self, needed: int) -> None:
        cap = self._cap
        while cap < needed:
            cap <<= 1
        self.weights.extend([0.0] * (cap - self._cap))
        self._cap = cap
        self.rebuild()
