"""Polynomial perturbations in complex coordinates and their lattice images.

A perturbation is ``H1 = sum h_ab (z^a zbar^b + z^b zbar^a)``, stored as one
:class:`Monomial` per ``(a, b)`` with the partner implied. On the lattice a
``z_i`` factor is the coefficient map of component ``i`` and a ``zbar_i``
factor is its flip, so every monomial becomes a convolution product.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import signal

from .lattice import (
    DEFAULT_MODE_BUDGET,
    FourierVector,
    LatticeBox,
    ModeOrder,
    check_budget,
    unit,
)

Exponents = tuple[int, ...]
# (p, q) -> coefficient of z^p zbar^q
Polynomial = dict[tuple[Exponents, Exponents], float]


class LatticeFunction:
    """A finitely supported scalar function on Z^n.

    Values live on a dense bounding box with lower corner ``lo``. ``mask``
    marks the structural support, which may contain exact zeros produced by
    cancellation.
    """

    __slots__ = ("n", "values", "lo", "mask")

    def __init__(self, n: int, values=None, lo=None, mask=None):
        self.n = n
        if values is None:
            values = np.zeros((0,) * n)
            lo = (0,) * n
        self.values = np.asarray(values, dtype=float)
        self.lo = np.asarray(lo if lo is not None else (0,) * n, dtype=np.int64)
        if mask is None:
            mask = np.ones(self.values.shape, dtype=bool)
        self.mask = np.asarray(mask, dtype=bool)

    @classmethod
    def from_dict(cls, data: Mapping[tuple[int, ...], float], n: int) -> LatticeFunction:
        if not data:
            return cls(n)
        pts = np.array(list(data.keys()), dtype=np.int64).reshape(len(data), n)
        lo = pts.min(axis=0)
        shape = tuple(pts.max(axis=0) - lo + 1)
        values = np.zeros(shape)
        mask = np.zeros(shape, dtype=bool)
        idx = tuple((pts - lo).T)
        values[idx] = list(data.values())
        mask[idx] = True
        return cls(n, values, lo, mask)

    @classmethod
    def delta(cls, n: int, value: float = 1.0) -> LatticeFunction:
        return cls(n, np.full((1,) * n, value), (0,) * n)

    @property
    def empty(self) -> bool:
        return self.values.size == 0 or not self.mask.any()

    def to_dict(self) -> dict[tuple[int, ...], float]:
        if self.values.size == 0:
            return {}
        idx = np.argwhere(self.mask)
        return {
            tuple(int(c) for c in row + self.lo): float(self.values[tuple(row)])
            for row in idx
        }

    def at(self, points) -> np.ndarray:
        """Values at integer points of shape ``(..., n)``; zero off the box."""
        pts = np.asarray(points, dtype=np.int64)
        out = np.zeros(pts.shape[:-1])
        if self.values.size == 0:
            return out
        rel = pts - self.lo
        inside = np.all((rel >= 0) & (rel < np.array(self.values.shape)), axis=-1)
        if inside.any():
            sel = rel[inside]
            out[inside] = self.values[tuple(sel.T)]
        return out

    def flip(self) -> LatticeFunction:
        if self.values.size == 0:
            return self
        axes = tuple(range(self.n))
        hi = self.lo + np.array(self.values.shape) - 1
        return LatticeFunction(
            self.n, np.flip(self.values, axes), -hi, np.flip(self.mask, axes)
        )

    def scaled(self, c: float) -> LatticeFunction:
        return LatticeFunction(self.n, c * self.values, self.lo, self.mask)

    def __add__(self, other: LatticeFunction) -> LatticeFunction:
        if self.values.size == 0:
            return other
        if other.values.size == 0:
            return self
        lo = np.minimum(self.lo, other.lo)
        hi = np.maximum(
            self.lo + np.array(self.values.shape), other.lo + np.array(other.values.shape)
        )
        shape = tuple(hi - lo)
        values = np.zeros(shape)
        mask = np.zeros(shape, dtype=bool)
        for part in (self, other):
            off = part.lo - lo
            sl = tuple(slice(o, o + s) for o, s in zip(off, part.values.shape))
            values[sl] += part.values
            mask[sl] |= part.mask
        return LatticeFunction(self.n, values, lo, mask)


def convolve(u: LatticeFunction, v: LatticeFunction, budget: int = DEFAULT_MODE_BUDGET) -> LatticeFunction:
    """``(u*v)(k) = sum_k' u(k-k') v(k')`` by direct summation."""
    if u.n != v.n:
        raise ValueError("dimension mismatch")
    if u.values.size == 0 or v.values.size == 0:
        return LatticeFunction(u.n)
    shape = [a + b - 1 for a, b in zip(u.values.shape, v.values.shape)]
    check_budget(math.prod(shape), budget)
    values = signal.convolve(u.values, v.values, mode="full", method="direct")
    hits = signal.convolve(
        u.mask.astype(float), v.mask.astype(float), mode="full", method="direct"
    )
    return LatticeFunction(u.n, values, u.lo + v.lo, hits > 0.5)


@dataclass(frozen=True)
class Monomial:
    """``coeff * (z^alpha zbar^beta + z^beta zbar^alpha)``; a single copy when
    ``alpha == beta``."""

    coeff: float
    alpha: Exponents
    beta: Exponents

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(int(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(int(b) for b in self.beta))
        if not math.isfinite(self.coeff):
            raise ValueError("monomial coefficient must be finite")
        if len(self.alpha) != len(self.beta):
            raise ValueError("alpha and beta lengths differ")
        if min(self.alpha + self.beta, default=0) < 0:
            raise ValueError("exponents must be non-negative")

    @property
    def degree(self) -> int:
        return sum(self.alpha) + sum(self.beta)


@dataclass(frozen=True)
class PolynomialHamiltonian:
    """``H = sum_j omega_j |z_j|^2 + epsilon * H1`` with polynomial ``H1``."""

    n: int
    omega0: tuple[float, ...]
    terms: tuple[Monomial, ...] = ()
    epsilon: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "omega0", tuple(float(w) for w in self.omega0))
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.n < 1 or len(self.omega0) != self.n:
            raise ValueError("omega0 must have length n")
        if not all(math.isfinite(w) for w in self.omega0):
            raise ValueError("omega0 entries must be finite")
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError("epsilon must be finite and non-negative")
        for t in self.terms:
            if len(t.alpha) != self.n:
                raise ValueError(f"monomial {t} does not match dimension {self.n}")
            if t.degree < 3:
                raise ValueError(f"monomial {t} has total degree {t.degree} < 3")

    @property
    def degree(self) -> int:
        return max((t.degree for t in self.terms), default=0)

    @cached_property
    def expanded(self) -> Polynomial:
        """H1 with symmetric partners written out and like terms merged."""
        poly: Polynomial = {}
        for t in self.terms:
            keys = [(t.alpha, t.beta)] if t.alpha == t.beta else [(t.alpha, t.beta), (t.beta, t.alpha)]
            for key in keys:
                poly[key] = poly.get(key, 0.0) + t.coeff
        return {k: c for k, c in sorted(poly.items()) if c != 0.0}

    @cached_property
    def field_polys(self) -> list[Polynomial]:
        return [d_zbar(self.expanded, j) for j in range(self.n)]

    @cached_property
    def toeplitz_polys(self) -> list[list[Polynomial]]:
        return [[d_z(fj, i) for i in range(self.n)] for fj in self.field_polys]

    @cached_property
    def hankel_polys(self) -> list[list[Polynomial]]:
        return [[d_zbar(fj, i) for i in range(self.n)] for fj in self.field_polys]

    def with_epsilon(self, epsilon: float) -> PolynomialHamiltonian:
        return PolynomialHamiltonian(self.n, self.omega0, self.terms, epsilon)


def _lower(e: Exponents, i: int) -> Exponents:
    return e[:i] + (e[i] - 1,) + e[i + 1 :]


def d_zbar(poly: Polynomial, j: int) -> Polynomial:
    out: Polynomial = {}
    for (p, q), c in poly.items():
        if q[j] > 0:
            key = (p, _lower(q, j))
            out[key] = out.get(key, 0.0) + c * q[j]
    return dict(sorted(out.items()))


def d_z(poly: Polynomial, i: int) -> Polynomial:
    out: Polynomial = {}
    for (p, q), c in poly.items():
        if p[i] > 0:
            key = (_lower(p, i), q)
            out[key] = out.get(key, 0.0) + c * p[i]
    return dict(sorted(out.items()))


class _Evaluator:
    """Evaluates polynomials in (z, zbar) on the lattice at a fixed state,
    caching powers of each factor."""

    def __init__(self, zhat: FourierVector, budget: int):
        n = zhat.n
        self.n = n
        self.budget = budget
        self.base = {}
        for j in range(n):
            zj = LatticeFunction.from_dict(zhat.component(j), n)
            self.base[(j, False)] = zj
            self.base[(j, True)] = zj.flip()
        self._powers: dict[tuple[int, bool, int], LatticeFunction] = {}

    def power(self, j: int, conj: bool, e: int) -> LatticeFunction:
        if e == 0:
            return LatticeFunction.delta(self.n)
        key = (j, conj, e)
        if key not in self._powers:
            if e == 1:
                self._powers[key] = self.base[(j, conj)]
            else:
                self._powers[key] = convolve(
                    self.power(j, conj, e - 1), self.base[(j, conj)], self.budget
                )
        return self._powers[key]

    def monomial(self, p: Exponents, q: Exponents) -> LatticeFunction:
        out = LatticeFunction.delta(self.n)
        for j in range(self.n):
            for conj, e in ((False, p[j]), (True, q[j])):
                if e:
                    out = convolve(out, self.power(j, conj, e), self.budget)
        return out

    def __call__(self, poly: Polynomial) -> LatticeFunction:
        total = LatticeFunction(self.n)
        for (p, q), c in poly.items():
            total = total + self.monomial(p, q).scaled(c)
        return total


def _check_dim(H: PolynomialHamiltonian, zhat: FourierVector) -> None:
    if zhat.n != H.n:
        raise ValueError(f"state dimension {zhat.n} does not match Hamiltonian dimension {H.n}")


def vector_field(
    H: PolynomialHamiltonian, zhat: FourierVector, budget: int = DEFAULT_MODE_BUDGET
) -> FourierVector:
    """Lattice coefficients of ``dH1/dzbar`` at ``zhat`` (epsilon not applied)."""
    _check_dim(H, zhat)
    ev = _Evaluator(zhat, budget)
    data = {}
    for j, poly in enumerate(H.field_polys):
        for k, v in ev(poly).to_dict().items():
            data[(j, k)] = v
    return FourierVector(H.n, data)


def resonant_field(X: FourierVector) -> np.ndarray:
    """``(X_1(e_1), ..., X_n(e_n))``, zero where absent."""
    return np.array([X.get((j, unit(j, X.n)), 0.0) for j in range(X.n)])


@dataclass
class HessianKernels:
    """Second-derivative kernels of H1 at a fixed state.

    ``toeplitz[j][i]`` holds ``d2 H1 / dzbar_j dz_i`` and is read at
    ``k - k'``; ``hankel[j][i]`` holds ``d2 H1 / dzbar_j dzbar_i`` and is read
    at ``k + k'``. The first index is the row (vector-field component).
    """

    n: int
    toeplitz: list[list[LatticeFunction]] = field(default_factory=list)
    hankel: list[list[LatticeFunction]] = field(default_factory=list)


def hessian_kernels(
    H: PolynomialHamiltonian, zhat: FourierVector, budget: int = DEFAULT_MODE_BUDGET
) -> HessianKernels:
    _check_dim(H, zhat)
    ev = _Evaluator(zhat, budget)
    toe = [[ev(p) for p in row] for row in H.toeplitz_polys]
    han = [[ev(p) for p in row] for row in H.hankel_polys]
    return HessianKernels(H.n, toe, han)


def q_gradient(
    H: PolynomialHamiltonian,
    zhat: FourierVector,
    box: LatticeBox,
    kernels: HessianKernels | None = None,
    order: ModeOrder | None = None,
) -> np.ndarray:
    """Derivatives of the resonant field ``X_m(e_m)`` with respect to every
    non-resonant coefficient of the box, shape ``(n, rows)``."""
    if kernels is None:
        kernels = hessian_kernels(H, zhat)
    if order is None:
        order = ModeOrder(box)
    n = H.n
    cols_j = order.components
    cols_k = order.points
    out = np.zeros((n, len(order)))
    for m in range(n):
        em = np.array(unit(m, n))
        for i in range(n):
            sel = cols_j == i
            kp = cols_k[sel]
            out[m, sel] = kernels.toeplitz[m][i].at(em - kp) + kernels.hankel[m][i].at(em + kp)
    return out


def evaluate_poly(poly: Polynomial, z: Sequence[np.ndarray], zbar: Sequence[np.ndarray]):
    """Pointwise value of a polynomial at complex arrays ``z[j]``, ``zbar[j]``."""
    total = 0.0
    for (p, q), c in poly.items():
        term = c
        for j, (a, b) in enumerate(zip(p, q)):
            if a:
                term = term * z[j] ** a
            if b:
                term = term * zbar[j] ** b
        total = total + term
    return total


def field_pointwise(H: PolynomialHamiltonian, z: Sequence[np.ndarray]) -> list:
    """``dH1/dzbar_j`` evaluated at complex states ``z`` (with ``zbar = conj z``)."""
    zbar = [np.conj(zj) for zj in z]
    return [evaluate_poly(p, z, zbar) for p in H.field_polys]


def real_gradient(H: PolynomialHamiltonian, x, y) -> tuple[np.ndarray, np.ndarray]:
    """``(dH/dx, dH/dy)`` in the real coordinates ``z = (y - i x)/sqrt 2``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.asarray(H.omega0).reshape((-1,) + (1,) * (x.ndim - 1))
    hx = w * x
    hy = w * y
    if H.terms and H.epsilon:
        z = (y - 1j * x) / math.sqrt(2.0)
        g = np.array(
            [np.broadcast_to(gj, x.shape[1:]) for gj in field_pointwise(H, list(z))],
            dtype=complex,
        )
        hx = hx - H.epsilon * math.sqrt(2.0) * g.imag
        hy = hy + H.epsilon * math.sqrt(2.0) * g.real
    return hx, hy


def power_gap(a: float, b: float, s: float) -> float:
    """``a^s + b^s - (a+b)^s``, bounded below by ``(2 - 2^s) min(a, b)^s``."""
    return a**s + b**s - (a + b) ** s


def power_gap_bound(a: float, b: float, s: float) -> float:
    return (2.0 - 2.0**s) * min(a, b) ** s
