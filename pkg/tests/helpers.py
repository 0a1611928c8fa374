"""Shared generators and independent oracles for the test suite."""

import itertools

import numpy as np

from qtorus.hamiltonian import Monomial, PolynomialHamiltonian, field_pointwise
from qtorus.lattice import FourierVector, is_resonant, unit


def random_hamiltonian(rng, n, max_degree=4, n_terms=3, epsilon=0.3):
    terms = []
    while len(terms) < n_terms:
        deg = int(rng.integers(3, max_degree + 1))
        exps = rng.multinomial(deg, np.ones(2 * n) / (2 * n))
        alpha, beta = tuple(int(e) for e in exps[:n]), tuple(int(e) for e in exps[n:])
        terms.append(Monomial(float(rng.normal()), alpha, beta))
    omega = tuple(1.0 + rng.random(n) * (np.sqrt(5) - 1))
    return PolynomialHamiltonian(n, omega, tuple(terms), epsilon)


def random_state(rng, n, N=1, extra=3, scale=0.1, amplitude=np.exp(-1)):
    """Pinned resonant modes plus a few small non-resonant coefficients in the box."""
    data = {(j, unit(j, n)): amplitude for j in range(n)}
    pts = list(itertools.product(range(-N, N + 1), repeat=n))
    for _ in range(extra):
        j = int(rng.integers(n))
        k = pts[int(rng.integers(len(pts)))]
        if not is_resonant(j, k):
            data[(j, k)] = scale * float(rng.normal())
    return FourierVector(n, data)


def fft_field(H, zhat, L=32):
    """Fourier coefficients of dH1/dzbar_j sampled on an L^n torus grid."""
    n = H.n
    theta = np.meshgrid(*[2 * np.pi * np.arange(L) / L] * n, indexing="ij")
    z = []
    for j in range(n):
        zj = np.zeros((L,) * n, dtype=complex)
        for k, v in zhat.component(j).items():
            zj += v * np.exp(1j * sum(kk * th for kk, th in zip(k, theta)))
        z.append(zj)
    out = {}
    for j, g in enumerate(field_pointwise(H, z)):
        g = np.broadcast_to(g, (L,) * n)
        c = np.fft.fftn(g) / L**n
        for idx in itertools.product(range(L), repeat=n):
            k = tuple(i if i < L // 2 else i - L for i in idx)
            out[(j, k)] = c[idx]
    return out
