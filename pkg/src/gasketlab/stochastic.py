"""Random walks driven by form conductances: exit times, heat kernels, Monte Carlo."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .forms import QuadraticForm

__all__ = [
    "WalkOperator",
    "build_walk",
    "exit_time_exact",
    "exit_times_exact",
    "heat_kernel_matrix",
    "walk_montecarlo",
    "MonteCarloResult",
]

MAX_APPLICATIONS = 10**6
BLOCK = 4096


@dataclass
class WalkOperator:
    """Row-stochastic ``P`` with ``P(u, v) = (1 - theta) c(u, v) / c(u)`` and ``P(u, u) = theta``."""

    P: sparse.csr_matrix
    stationary: np.ndarray
    theta: float

    @property
    def size(self) -> int:
        return self.P.shape[0]

    def detailed_balance_residual(self) -> float:
        F = sparse.diags(self.stationary) @ self.P
        return float(abs(F - F.T).max())

    def row_sum_residual(self) -> float:
        return float(np.max(np.abs(np.asarray(self.P.sum(axis=1)).ravel() - 1.0)))


def build_walk(form: QuadraticForm, theta: float = 0.0) -> WalkOperator:
    if not 0 <= theta < 1:
        raise ValueError("theta must lie in [0, 1)")
    C = form.conductances().tocsr()
    c = np.asarray(C.sum(axis=1)).ravel()
    if np.any(c <= 0):
        raise ValueError(f"isolated vertices: {np.flatnonzero(c <= 0)[:10].tolist()}")
    P = sparse.diags((1 - theta) / c) @ C
    if theta > 0:
        P = P + theta * sparse.identity(len(c))
    P = sparse.csr_matrix(P)
    P.sort_indices()
    return WalkOperator(P=P, stationary=c / c.sum(), theta=theta)


def exit_times_exact(walk: WalkOperator, inside) -> np.ndarray:
    """Expected number of steps to leave ``inside`` from every start (0 outside)."""
    inside = np.asarray(inside, dtype=bool)
    if inside.all():
        raise ValueError("the domain is the whole space; the exit time is infinite")
    idx = np.flatnonzero(inside)
    tau = np.zeros(walk.size)
    if idx.size:
        Q = walk.P[idx][:, idx]
        A = (sparse.identity(idx.size) - Q).tocsc()
        tau[idx] = splinalg.splu(A).solve(np.ones(idx.size))
    return tau


def exit_time_exact(walk: WalkOperator, dist_row, x: int, r: float, tol: float = 1e-12) -> float:
    """``E_x[tau_{B(x, r)}]`` in steps for the open ball given distances from ``x``."""
    inside = np.asarray(dist_row) < r - tol
    return float(exit_times_exact(walk, inside)[x])


def heat_kernel_matrix(walk: WalkOperator, steps, sources=None, measure=None) -> dict:
    """``p_k(x, .) = P^k(x, .) / mu(.)`` for every ``k`` in ``steps``.

    ``mu`` defaults to the normalized stationary measure.  Returns
    ``{k: array (len(sources), n)}``; rows are propagated by repeated sparse
    application.
    """
    steps = sorted(int(k) for k in np.atleast_1d(steps))
    if steps[0] < 1:
        raise ValueError("steps must be >= 1")
    if steps[-1] > MAX_APPLICATIONS:
        raise ValueError(f"{steps[-1]} applications exceed the cap of {MAX_APPLICATIONS}")
    n = walk.size
    src = np.arange(n) if sources is None else np.atleast_1d(sources)
    mu = walk.stationary if measure is None else np.asarray(measure, dtype=float)
    mu = mu / mu.sum()
    X = np.zeros((len(src), n))
    X[np.arange(len(src)), src] = 1.0
    PT = walk.P.T.tocsr()
    out, done = {}, 0
    for k in steps:
        for _ in range(k - done):
            X = (PT @ X.T).T
        done = k
        out[k] = X / mu[None, :]
    return out


@dataclass
class MonteCarloResult:
    mean: float
    stderr: float
    trials: int
    censored: int
    times: np.ndarray

    def z_score(self, exact: float) -> float:
        if self.stderr == 0:
            return 0.0 if self.mean == exact else float("inf")
        return (self.mean - exact) / self.stderr


def _block_rng(seed: int, block: int) -> np.random.Generator:
    # counter-based stream per (seed, block): independent of how blocks are scheduled
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, block])))


def walk_montecarlo(
    walk: WalkOperator,
    x: int,
    inside,
    trials: int,
    seed: int = 0,
    max_steps: int = 10**7,
) -> MonteCarloResult:
    """Sample exit times of ``inside`` from ``x``; trials run in fixed blocks of independent streams."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    inside = np.asarray(inside, dtype=bool)
    P = walk.P
    indptr, indices = P.indptr, P.indices
    row_of = np.repeat(np.arange(walk.size), np.diff(indptr))
    cum = np.empty_like(P.data)
    for v in range(walk.size):
        s = slice(indptr[v], indptr[v + 1])
        cum[s] = np.cumsum(P.data[s])
    # shift each row's cumulative probabilities by its row index: one sorted array
    gcum = cum + row_of
    times = np.empty(trials, dtype=np.int64)
    censored = 0
    for b, start in enumerate(range(0, trials, BLOCK)):
        rng = _block_rng(seed, b)
        k = min(BLOCK, trials - start)
        pos = np.full(k, x, dtype=np.int64)
        t = np.zeros(k, dtype=np.int64)
        alive = inside[pos]
        step = 0
        while alive.any() and step < max_steps:
            a = np.flatnonzero(alive)
            v = pos[a]
            u = rng.random(a.size)
            j = np.searchsorted(gcum, v + u, side="right")
            j = np.minimum(j, indptr[v + 1] - 1)
            pos[a] = indices[j]
            t[a] += 1
            alive[a] = inside[pos[a]]
            step += 1
        censored += int(alive.sum())
        times[start:start + k] = t
    mean = float(times.mean())
    stderr = float(times.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return MonteCarloResult(mean=mean, stderr=stderr, trials=trials, censored=censored, times=times)
