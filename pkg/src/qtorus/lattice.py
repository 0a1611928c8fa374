"""Multi-index algebra on the integer lattice Z^n.

Lattice points are plain tuples of ints. A mode is a pair ``(j, k)`` where
``j`` is a zero-based component index and ``k`` a lattice point. The
canonical order scans ``k`` row-major with coordinates ascending from ``-N``
to ``N`` and, within a point, ``j`` ascending.
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from functools import cached_property

import numpy as np

DEFAULT_MODE_BUDGET = 2_000_000

MultiIndex = tuple[int, ...]
Mode = tuple[int, MultiIndex]


class CapacityError(ValueError):
    """Raised when a lattice object would exceed the configured mode budget."""


def l1(k: Iterable[int]) -> int:
    return sum(abs(int(c)) for c in k)


def sup_norm(k: Iterable[int]) -> int:
    return max((abs(int(c)) for c in k), default=0)


def unit(j: int, n: int) -> MultiIndex:
    return tuple(1 if i == j else 0 for i in range(n))


def negate(k: MultiIndex) -> MultiIndex:
    return tuple(-c for c in k)


def check_budget(count: int, budget: int = DEFAULT_MODE_BUDGET) -> None:
    if count > budget:
        raise CapacityError(f"{count} modes exceed the mode budget of {budget}")


def box_points(N: int, n: int, budget: int = DEFAULT_MODE_BUDGET) -> list[MultiIndex]:
    """All points of the box ``max_i |k_i| <= N`` in canonical order."""
    if N < 0 or n < 1:
        raise ValueError(f"need N >= 0 and n >= 1, got N={N}, n={n}")
    check_budget((2 * N + 1) ** n, budget)
    return list(itertools.product(range(-N, N + 1), repeat=n))


@dataclass(frozen=True)
class LatticeBox:
    """The truncated lattice box of half-width ``N`` in dimension ``n``."""

    N: int
    n: int

    def __post_init__(self):
        if self.N < 0 or self.n < 1:
            raise ValueError(f"invalid box N={self.N}, n={self.n}")

    def __contains__(self, k) -> bool:
        return len(k) == self.n and all(abs(c) <= self.N for c in k)

    def __len__(self) -> int:
        return (2 * self.N + 1) ** self.n

    def points(self, budget: int = DEFAULT_MODE_BUDGET) -> list[MultiIndex]:
        return box_points(self.N, self.n, budget)


def resonant_set(n: int) -> frozenset[Mode]:
    """The pairs ``(j, e_j)`` whose linear coefficient vanishes when the
    drifted frequency equals the unperturbed one."""
    if n < 1:
        raise ValueError("n must be positive")
    return frozenset((j, unit(j, n)) for j in range(n))


def is_resonant(j: int, k: MultiIndex) -> bool:
    return k[j] == 1 and all(c == 0 for i, c in enumerate(k) if i != j)


class ModeOrder:
    """Bijection between the non-resonant modes of a box and matrix rows.

    Rows run over ``box_points`` order, then ``j`` ascending, skipping the
    resonant pairs.
    """

    def __init__(self, box: LatticeBox, budget: int = DEFAULT_MODE_BUDGET):
        self.box = box
        check_budget(box.n * len(box), budget)
        n = box.n
        modes = [
            (j, k)
            for k in box.points(budget)
            for j in range(n)
            if not is_resonant(j, k)
        ]
        self.modes: list[Mode] = modes
        self._row = {m: r for r, m in enumerate(modes)}

    def __len__(self) -> int:
        return len(self.modes)

    def __iter__(self) -> Iterator[Mode]:
        return iter(self.modes)

    def __contains__(self, mode) -> bool:
        return mode in self._row

    def row(self, j: int, k: MultiIndex) -> int:
        return self._row[(j, tuple(k))]

    def mode(self, row: int) -> Mode:
        return self.modes[row]

    @cached_property
    def components(self) -> np.ndarray:
        return np.array([j for j, _ in self.modes], dtype=np.int64)

    @cached_property
    def points(self) -> np.ndarray:
        """Lattice point of every row, shape ``(rows, n)``."""
        return np.array([k for _, k in self.modes], dtype=np.int64).reshape(
            len(self.modes), self.box.n
        )


def mode_order(box: LatticeBox, budget: int = DEFAULT_MODE_BUDGET) -> ModeOrder:
    return ModeOrder(box, budget)


def _canonical_key(mode: Mode):
    j, k = mode
    return (k, j)


class FourierVector(Mapping):
    """Finitely supported real coefficients indexed by ``(j, k)``.

    Absent modes are exactly zero. Stored zeros are kept: they mark
    structural support (a coefficient that a convolution could reach).
    """

    __slots__ = ("n", "_data")

    def __init__(self, n: int, data: Mapping[Mode, float] | Iterable = ()):
        if n < 1:
            raise ValueError("n must be positive")
        items = data.items() if isinstance(data, Mapping) else data
        store = {}
        for (j, k), v in items:
            k = tuple(int(c) for c in k)
            if len(k) != n or not 0 <= j < n:
                raise ValueError(f"mode {(j, k)} does not fit dimension {n}")
            v = float(v)
            if not math.isfinite(v):
                raise ValueError(f"non-finite coefficient at {(j, k)}")
            store[(int(j), k)] = v
        self.n = n
        self._data = dict(sorted(store.items(), key=lambda kv: _canonical_key(kv[0])))

    def __getitem__(self, mode: Mode) -> float:
        j, k = mode
        return self._data[(j, tuple(k))]

    def get(self, mode, default=0.0):
        j, k = mode
        return self._data.get((j, tuple(k)), default)

    def __iter__(self):
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __eq__(self, other) -> bool:
        if not isinstance(other, FourierVector):
            return NotImplemented
        return self.n == other.n and self._data == other._data

    def __repr__(self) -> str:
        return f"FourierVector(n={self.n}, {self._data!r})"

    def support(self) -> list[Mode]:
        return list(self._data)

    def component(self, j: int) -> dict[MultiIndex, float]:
        return {k: v for (i, k), v in self._data.items() if i == j}

    def l2(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self._data.values()))

    def max_sup_index(self) -> int:
        return max((sup_norm(k) for _, k in self._data), default=0)

    def __add__(self, other: FourierVector) -> FourierVector:
        out = dict(self._data)
        for m, v in other.items():
            out[m] = out.get(m, 0.0) + v
        return FourierVector(self.n, out)

    def __sub__(self, other: FourierVector) -> FourierVector:
        return self + other.scaled(-1.0)

    def scaled(self, c: float) -> FourierVector:
        return FourierVector(self.n, {m: c * v for m, v in self._data.items()})

    def without_resonant(self) -> FourierVector:
        return FourierVector(
            self.n, {(j, k): v for (j, k), v in self._data.items() if not is_resonant(j, k)}
        )

    def pruned(self) -> FourierVector:
        """Drop stored zeros."""
        return FourierVector(self.n, {m: v for m, v in self._data.items() if v != 0.0})

    def to_vector(self, order: ModeOrder) -> np.ndarray:
        """Dense coefficient vector in row order; modes outside are ignored."""
        out = np.zeros(len(order))
        for (j, k), v in self._data.items():
            if (j, k) in order:
                out[order.row(j, k)] = v
        return out

    @classmethod
    def from_vector(cls, values: np.ndarray, order: ModeOrder) -> FourierVector:
        return cls(order.box.n, zip(order.modes, values))


def project(v: FourierVector, N: int) -> FourierVector:
    """Keep coefficients with ``max_i |k_i| <= N``; drop the rest."""
    return FourierVector(v.n, {(j, k): c for (j, k), c in v.items() if sup_norm(k) <= N})


def flip(v: FourierVector) -> FourierVector:
    """Coefficient at ``(j, k)`` becomes the coefficient at ``(j, -k)``."""
    return FourierVector(v.n, {(j, negate(k)): c for (j, k), c in v.items()})


def initial_state(n: int, amplitude: float) -> FourierVector:
    """The linear solution: amplitude ``a`` on each ``(j, e_j)``, zero elsewhere."""
    return FourierVector(n, {(j, unit(j, n)): amplitude for j in range(n)})
