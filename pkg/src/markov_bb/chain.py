"""Finite irreducible reversible Markov chains."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ChainError, NotIrreducible, NotReversible, RowSumError

ROW_SUM_TOL = 1e-9
REVERSIBILITY_TOL = 1e-10
POSITIVE_ENTRY = 1e-14


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Validated reversible Markov kernel with its stationary distribution.

    Build instances with :func:`build_chain`; the constructor does not
    validate.
    """

    n: int
    kernel: np.ndarray
    stationary: np.ndarray
    reversibility_defect: float
    labels: Optional[tuple] = field(default=None)

    @property
    def support(self) -> np.ndarray:
        """Boolean mask of pairs with ``K(x, y) > 0``."""
        return self.kernel > POSITIVE_ENTRY

    @property
    def edge_weights(self) -> np.ndarray:
        """Symmetric matrix ``K(x, y) * stationary(x)``."""
        return self.kernel * self.stationary[:, None]


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    spectral_gap: float
    top_eigenvector_defect: float


def is_irreducible(kernel: np.ndarray) -> bool:
    """Strong connectivity of the positive-entry digraph (BFS both ways)."""
    adj = np.asarray(kernel) > POSITIVE_ENTRY
    n = adj.shape[0]

    def reach(a):
        seen = np.zeros(n, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            x = queue.popleft()
            for y in np.flatnonzero(a[x] & ~seen):
                seen[y] = True
                queue.append(y)
        return seen.all()

    return reach(adj) and reach(adj.T)


def stationary_distribution(kernel: np.ndarray) -> np.ndarray:
    """Stationary law of an irreducible kernel by GTH elimination.

    The Grassmann-Taksar-Heyman variant of Gaussian elimination uses no
    subtractions, so it stays accurate when some transition probabilities
    are tiny and the plain solve of ``[K^T - I; 1^T] w = [0; 1]`` loses
    digits. That least-squares solve remains the fallback for kernels the
    elimination cannot handle (reducible input).
    """
    kernel = np.asarray(kernel, dtype=float)
    n = kernel.shape[0]
    work = kernel.copy()
    for k in range(n - 1, 0, -1):
        s = work[k, :k].sum()
        if not s > 0:
            return _stationary_lstsq(kernel)
        work[:k, k] /= s
        work[:k, :k] += np.outer(work[:k, k], work[k, :k])
    w = np.zeros(n)
    w[0] = 1.0
    for k in range(1, n):
        w[k] = w[:k] @ work[:k, k]
    return w / w.sum()


def _stationary_lstsq(kernel: np.ndarray) -> np.ndarray:
    n = kernel.shape[0]
    system = np.vstack([kernel.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    w, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    return w / w.sum()


def reversibility_defect(kernel: np.ndarray, stationary: np.ndarray) -> float:
    flux = np.asarray(kernel) * np.asarray(stationary)[:, None]
    return float(np.max(np.abs(flux - flux.T))) if flux.size else 0.0


def build_chain(kernel, labels: Optional[Sequence[str]] = None) -> MarkovChain:
    """Validate ``kernel`` and return a :class:`MarkovChain`.

    Raises
    ------
    RowSumError
        A row sum is off from 1 by more than 1e-9.
    NotIrreducible
        The positive-entry digraph is not strongly connected.
    NotReversible
        Detailed balance fails by more than 1e-10.
    """
    kernel = np.asarray(kernel, dtype=float)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1] or kernel.shape[0] == 0:
        raise ValueError(f"kernel must be a non-empty square matrix, got shape {kernel.shape}")
    if not np.all(np.isfinite(kernel)):
        raise ChainError("kernel contains non-finite entries")
    if np.any(kernel < 0):
        i, j = np.argwhere(kernel < 0)[0]
        raise ChainError(f"kernel entry ({i}, {j}) is negative")
    sums = kernel.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        raise RowSumError(f"row {bad[0]} sums to {float(sums[bad[0]]):.12g}, expected 1")
    if not is_irreducible(kernel):
        raise NotIrreducible("kernel is not irreducible")
    pi = stationary_distribution(kernel)
    defect = reversibility_defect(kernel, pi)
    if defect > REVERSIBILITY_TOL:
        raise NotReversible(f"detailed balance violated (defect {defect:.3e})")
    if labels is not None:
        labels = tuple(str(s) for s in labels)
        if len(labels) != kernel.shape[0]:
            raise ValueError("labels length does not match kernel size")
    return MarkovChain(
        n=kernel.shape[0],
        kernel=_frozen(kernel),
        stationary=_frozen(pi),
        reversibility_defect=defect,
        labels=labels,
    )


def weighted_spectrum(chain: MarkovChain) -> SpectrumReport:
    """Eigenvalues of K via the symmetric matrix ``P^(1/2) K P^(-1/2)``."""
    root = np.sqrt(chain.stationary)
    sym = root[:, None] * chain.kernel / root[None, :]
    sym = 0.5 * (sym + sym.T)
    eig = np.sort(np.linalg.eigvalsh(sym))[::-1]
    gap = 1.0 - eig[1] if chain.n > 1 else math.inf
    defect = float(np.max(np.abs(chain.kernel.sum(axis=1) - 1.0)))
    return SpectrumReport(eigenvalues=eig, spectral_gap=float(gap), top_eigenvector_defect=defect)


def random_reversible_chain(n: int, seed: int, connectivity: float = 0.5) -> MarkovChain:
    """Random reversible chain from a symmetric weight matrix.

    A random spanning tree keeps the graph connected; every other pair
    (self-loops included) gets an edge with probability ``connectivity``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0 < connectivity <= 1:
        raise ValueError("connectivity must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    w = np.zeros((n, n))
    order = rng.permutation(n)
    for i in range(1, n):
        x, y = order[i], order[rng.integers(0, i)]
        w[x, y] = w[y, x] = rng.uniform(0.5, 1.5)
    extra = np.triu(rng.random((n, n)) < connectivity)
    weights = np.triu(rng.uniform(0.1, 1.0, size=(n, n)))
    extra &= w == 0
    if n == 2:
        extra[np.diag_indices(n)] = False
    w = w + np.where(extra, weights, 0.0) + np.where(extra, weights, 0.0).T * (1 - np.eye(n))
    kernel = w / w.sum(axis=1, keepdims=True)
    return build_chain(kernel)
