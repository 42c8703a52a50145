"""One-dimensional Gauss quadrature rules and Lagrange bases on [-1, 1].

Nodes are found by Newton iteration on three-term-recurrence Legendre
polynomials; the Lagrange basis is evaluated in barycentric form, which stays
well conditioned on clustered Lobatto nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from stfr.errors import ConfigurationError

GL = "GL"
GLL = "GLL"
NODE_KINDS = (GL, GLL)

_NEWTON_TOL = 1e-15
_NEWTON_MAXITER = 100


def legendre(n: int, x):
    """Return ``(P_n(x), P_n'(x))`` using the Bonnet recurrence."""
    x = np.asarray(x, dtype=float)
    p0 = np.ones_like(x)
    if n == 0:
        return p0, np.zeros_like(x)
    p1 = x.copy()
    for k in range(2, n + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    # derivative from P_n and P_{n-1}; endpoints handled separately
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = n * (x * p1 - p0) / (x * x - 1.0)
    end = np.isclose(np.abs(x), 1.0, rtol=0.0, atol=1e-14)
    if np.any(end):
        dp = np.where(end, np.sign(x) ** (n + 1) * n * (n + 1) / 2.0, dp)
    return p1, dp


@dataclass(frozen=True)
class QuadratureRule1D:
    kind: str
    n: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    def integrate(self, values) -> float:
        return float(np.dot(self.weights, values))


def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _gauss_lobatto(n: int) -> tuple[np.ndarray, np.ndarray]:
    N = n - 1
    x = -np.cos(np.pi * np.arange(n) / N)
    if n > 2:
        # interior nodes are the roots of P_N'; Newton on (1 - x^2) P_N'
        xi = x[1:-1].copy()
        for _ in range(_NEWTON_MAXITER):
            p, dp = legendre(N, xi)
            # d/dx[(1-x^2)P_N'] = -N(N+1) P_N
            g = (1.0 - xi * xi) * dp
            dg = -N * (N + 1) * p
            dx = g / dg
            xi = xi - dx
            if np.max(np.abs(dx)) < _NEWTON_TOL:
                break
        x[1:-1] = xi
    p, _ = legendre(N, x)
    w = 2.0 / (N * (N + 1) * p * p)
    return x, w


def make_rule(kind: str, n: int) -> QuadratureRule1D:
    """Build an ``n``-point Gauss-Legendre (``"GL"``) or Lobatto (``"GLL"``) rule."""
    if kind not in NODE_KINDS:
        raise ConfigurationError(f"unknown node kind {kind!r}; expected one of {NODE_KINDS}")
    n = int(n)
    if kind == GL and n < 1:
        raise ConfigurationError("a Gauss-Legendre rule needs at least one node")
    if kind == GLL and n < 2:
        raise ConfigurationError("a Gauss-Lobatto rule needs at least two nodes")
    x, w = _gauss_legendre(n) if kind == GL else _gauss_lobatto(n)
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    x.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule1D(kind, n, x, w)


class LagrangeBasis1D:
    """Lagrange polynomials through ``nodes``, evaluated barycentrically."""

    def __init__(self, nodes):
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 1:
            raise ConfigurationError("basis needs a 1D array of at least one node")
        diff = nodes[:, None] - nodes[None, :]
        np.fill_diagonal(diff, 1.0)
        if np.any(diff == 0.0):
            raise ConfigurationError("Lagrange basis nodes must be distinct")
        self.nodes = nodes
        self.bary_weights = 1.0 / np.prod(diff, axis=1)

    @property
    def degree(self) -> int:
        return self.nodes.size - 1

    def nodal_derivative(self) -> np.ndarray:
        """Differentiation matrix on the defining nodes."""
        x, lam = self.nodes, self.bary_weights
        m = x.size
        D = np.zeros((m, m))
        for i in range(m):
            for j in range(m):
                if i != j:
                    D[i, j] = (lam[j] / lam[i]) / (x[i] - x[j])
            D[i, i] = -D[i].sum()
        return D


def eval_basis(basis: LagrangeBasis1D, points) -> np.ndarray:
    """Matrix with entry ``(i, j) = l_j(points[i])``."""
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    x, lam = basis.nodes, basis.bary_weights
    out = np.empty((pts.size, x.size))
    for i, xi in enumerate(pts):
        d = xi - x
        hit = np.flatnonzero(d == 0.0)
        if hit.size:
            out[i] = 0.0
            out[i, hit[0]] = 1.0
        else:
            t = lam / d
            out[i] = t / t.sum()
    return out


def eval_basis_derivative(basis: LagrangeBasis1D, points) -> np.ndarray:
    """Matrix with entry ``(i, j) = l_j'(points[i])``."""
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    x = basis.nodes
    D = basis.nodal_derivative()
    L = eval_basis(basis, pts)
    out = np.empty_like(L)
    for i, xi in enumerate(pts):
        d = xi - x
        hit = np.flatnonzero(d == 0.0)
        if hit.size:
            out[i] = D[hit[0]]
        else:
            # l_j' = l_j * (sum_k 1/(x - x_k) - 1/(x - x_j))
            s = np.sum(1.0 / d)
            out[i] = L[i] * (s - 1.0 / d)
    # derivative of a constant
    out -= out.sum(axis=1, keepdims=True) / x.size
    return out
