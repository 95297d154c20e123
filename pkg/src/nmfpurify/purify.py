"""Purification: alternate a thresholded decode with a pairwise-difference update.

One iteration draws a fresh batch, decodes every sample as
``x = relu(A_pinv @ y - alpha)`` with the minimum-infinity-norm left inverse of
the current iterate, and moves the iterate to

    (1 - eta) * A + r * eta * E_hat[(y - y')(x - x')^T]

where ``E_hat`` averages over independent uniform index pairs.  Columns are
normalized only once, after the last iteration.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .analysis import IterRecord, iter_record
from .errors import BadParams, RankDeficient, ZeroColumn
from .genmodel import Batch, ModelSpec, Moments, gen_init, sample_batch
from .l1pinv import ls_pinv, min_inf_pinv
from .matcore import as_matrix, col_normalize, relu_offset
from .rng import BLOCK, Streams, blocks


@dataclass(frozen=True)
class Pairing:
    """``all_pairs`` uses the exact average over all N^2 ordered pairs."""

    kind: str = "all_pairs"
    P: int = 0

    def __post_init__(self):
        if self.kind not in ("all_pairs", "random_pairs"):
            raise BadParams(f"unknown pairing {self.kind!r}")
        if self.kind == "random_pairs" and self.P < 1:
            raise BadParams("random_pairs needs P >= 1")


@dataclass(frozen=True)
class AlgoParams:
    alpha: float
    eta: float
    r: float
    T: int = 50
    N: int = 20000
    seed: int = 0
    pairing: Pairing = field(default_factory=Pairing)

    def __post_init__(self):
        if not 0.0 < self.eta <= 1.0:
            raise BadParams("eta must lie in (0, 1]")
        if self.r <= 0:
            raise BadParams("r must be positive")
        if self.alpha < 0:
            raise BadParams("alpha must be nonnegative")
        if self.N < 2:
            raise BadParams("N must be at least 2")
        if self.T < 0:
            raise BadParams("T must be nonnegative")


def default_params(mom: Moments, ell: float, n: int, **rest) -> AlgoParams:
    """Threshold, scaling and step size used by the convergence proof.

    alpha = c2 / (80 C1), r = n / c2, eta = ell / 6; ``rest`` fills the other
    AlgoParams fields.
    """
    if not 0.0 < ell < 0.5:
        raise BadParams("ell must lie in (0, 1/2)")
    return AlgoParams(alpha=mom.c2 / (80.0 * mom.C1), r=n / mom.c2, eta=ell / 6.0, **rest)


def _blockwise(fn, N: int, threads: int):
    spans = blocks(N, BLOCK)
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, spans))
    return [fn(s) for s in spans]


def decode_batch(A, Y, alpha: float, pinv: np.ndarray | None = None,
                 threads: int = 1) -> np.ndarray:
    """Decode rows of ``Y`` (shape (N, m)); returns X with shape (N, n)."""
    Y = np.atleast_2d(Y)
    P = min_inf_pinv(A, threads=threads).pinv if pinv is None else pinv
    parts = _blockwise(lambda s: relu_offset(Y[s[0]:s[1]] @ P.T, alpha), Y.shape[0], threads)
    return np.vstack(parts)


def empirical_update(Y, X, pairing: Pairing = Pairing(), rng: np.random.Generator | None = None,
                     threads: int = 1) -> np.ndarray:
    """Average of (y - y')(x - x')^T over independent uniform index pairs."""
    Y = np.atleast_2d(Y)
    X = np.atleast_2d(X)
    N = Y.shape[0]
    if X.shape[0] != N or N < 2:
        raise BadParams("need matching batches of at least two samples")
    if pairing.kind == "random_pairs":
        i = rng.integers(0, N, size=pairing.P)
        j = rng.integers(0, N, size=pairing.P)
        return (Y[i] - Y[j]).T @ (X[i] - X[j]) / pairing.P

    # E[(y-y')(x-x')^T] = 2 (mean y x^T - mean(y) mean(x)^T); block partial
    # sums are reduced in block order so thread count never changes the bits
    parts = _blockwise(lambda s: (Y[s[0]:s[1]].T @ X[s[0]:s[1]],
                                  Y[s[0]:s[1]].sum(axis=0),
                                  X[s[0]:s[1]].sum(axis=0)), N, threads)
    cross = np.zeros((Y.shape[1], X.shape[1]))
    ysum = np.zeros(Y.shape[1])
    xsum = np.zeros(X.shape[1])
    for c, ys, xs in parts:
        cross += c
        ysum += ys
        xsum += xs
    ybar, xbar = ysum / N, xsum / N
    return 2.0 * (cross / N - np.outer(ybar, xbar))


def update_step(A, delta, eta: float, r) -> np.ndarray:
    """(1 - eta) A + r eta delta; ``r`` may be a per-column vector."""
    return (1.0 - eta) * A + eta * (np.asarray(r) * delta)


def purify_step(A, Y, params: AlgoParams, rng: np.random.Generator | None = None,
                pinv: np.ndarray | None = None, threads: int = 1) -> np.ndarray:
    A = as_matrix(A)
    X = decode_batch(A, Y, params.alpha, pinv=pinv, threads=threads)
    delta = empirical_update(Y, X, params.pairing, rng, threads=threads)
    return update_step(A, delta, params.eta, params.r)


@dataclass
class PurifyResult:
    a_final: np.ndarray
    a_normalized: np.ndarray
    trajectory: list[IterRecord] = field(default_factory=list)


def run_purification(spec: ModelSpec, params: AlgoParams, with_diagnostics: bool = True,
                     a0: np.ndarray | None = None, threads: int = 1,
                     on_record: Callable[[IterRecord], None] | None = None,
                     ground_truth: np.ndarray | None = None) -> PurifyResult:
    """Run T iterations from ``a0`` (or a warm start drawn from ``spec.init``).

    ``ground_truth`` overrides ``spec.ground_truth`` for diagnostics only,
    e.g. a column-rescaled truth after equilibration.
    """
    streams = Streams(params.seed)
    A = gen_init(spec.ground_truth, spec.init, streams.generator("init")) if a0 is None else as_matrix(a0)
    truth = spec.ground_truth if ground_truth is None else ground_truth
    truth_pinv = ls_pinv(truth) if with_diagnostics else None
    trajectory: list[IterRecord] = []

    def record(t):
        rec = iter_record(t, A, truth, truth_pinv)
        trajectory.append(rec)
        if on_record is not None:
            on_record(rec)

    if with_diagnostics:
        record(0)
    for t in range(params.T):
        batch = sample_batch(spec, params.N, streams, t, A_current=A, threads=threads)
        try:
            P = min_inf_pinv(A, threads=threads).pinv
        except RankDeficient as exc:
            raise RankDeficient(exc.rank, exc.cols, iteration=t) from exc
        A = purify_step(A, batch.Y, params, streams.generator("pairs", t), pinv=P, threads=threads)
        if with_diagnostics:
            record(t + 1)
    try:
        normalized = col_normalize(A)
    except ZeroColumn as exc:
        raise ZeroColumn(exc.index, iteration=params.T) from exc
    return PurifyResult(a_final=A, a_normalized=normalized, trajectory=trajectory)
