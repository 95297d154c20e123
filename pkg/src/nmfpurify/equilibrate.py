"""Balance per-feature second moments before purification.

Samples from ``A_star`` with weights ``x*`` are also samples from
``A_star D`` with weights ``D^{-1} x*`` for any positive diagonal ``D``.
Equilibration grows a working set S of columns whose scaled moments
``E[(x*_j)^2] / D_j^2`` are above a falling threshold, updates only those
columns, and scales them up by ``1 / (1 - epsilon)`` per pass so that their
scaled moments come down to meet the columns outside S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BadParams, MaxOuterExceeded
from .genmodel import Marginal, ModelSpec, WeightDist, sample_batch
from .l1pinv import min_inf_pinv
from .matcore import as_matrix
from .purify import Pairing, decode_batch, empirical_update
from .rng import Streams

ELL = 1.0 / 50.0
GAMMA = 1.5
KAPPA = 2.0
B_CONST = 0.75
U_CONST = 1.0 + ELL
DEFAULT_EPSILON = 1.0 / 2000.0

LOG_FIELDS = ("pass", "S_size", "lambda", "balance_ratio")


@dataclass(frozen=True)
class EquilParams:
    alpha: float
    eta: float
    T_inner: int = 5
    epsilon: float = DEFAULT_EPSILON
    lambda0: float | None = None
    N: int = 20000
    seed: int = 0
    max_outer: int | None = None
    # threshold shrinks by (1 - epsilon)**lambda_power per pass; 2 matches the
    # (1 - epsilon)^2 drop of the in-set moments, 1 is the literal pseudocode
    lambda_power: int = 2
    pairing: Pairing = field(default_factory=Pairing)

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise BadParams("epsilon must lie in (0, 1)")
        if not 0.0 < self.eta <= 1.0:
            raise BadParams("eta must lie in (0, 1]")
        if self.alpha < 0:
            raise BadParams("alpha must be nonnegative")
        if self.T_inner < 0:
            raise BadParams("T_inner must be nonnegative")
        if self.N < 2:
            raise BadParams("N must be at least 2")
        if self.lambda0 is not None and self.lambda0 <= 0:
            raise BadParams("lambda0 must be positive")
        if self.lambda_power not in (1, 2):
            raise BadParams("lambda_power must be 1 or 2")

    @property
    def decay(self) -> float:
        return (1.0 - self.epsilon) ** self.lambda_power


@dataclass
class EquilState:
    A: np.ndarray
    S: set[int]
    D: np.ndarray
    lam: float
    m_est: np.ndarray


def _sorted(S) -> np.ndarray:
    return np.array(sorted(S), dtype=np.int64)


def column_update(A, S, ratios, alpha: float, eta: float, T: int, N: int, spec: ModelSpec,
                  streams: Streams, pairing: Pairing = Pairing(), threads: int = 1) -> np.ndarray:
    """T purification steps applied only to the columns in S.

    Column i in S moves to (1 - eta) A_i + ratios[i] eta E_hat[(y - y')(x - x')^T]_i.
    Batches and pair draws use the same stream labels as ``run_purification``.
    """
    A = as_matrix(A).copy()
    idx = _sorted(S)
    if idx.size == 0 or T == 0:
        return A
    r = np.asarray(ratios, dtype=np.float64)[idx]
    if np.any(r <= 0):
        raise BadParams("ratios must be positive on S")
    for t in range(T):
        batch = sample_batch(spec, N, streams, t, A_current=A, threads=threads)
        P = min_inf_pinv(A, threads=threads).pinv
        X = decode_batch(A, batch.Y, alpha, pinv=P, threads=threads)
        delta = empirical_update(batch.Y, X, pairing, streams.generator("pairs", t), threads=threads)
        A[:, idx] = (1.0 - eta) * A[:, idx] + eta * (r * delta[:, idx])
    return A


def rescale(A, S, params: EquilParams, spec: ModelSpec, streams: Streams, ratios,
            threads: int = 1) -> np.ndarray:
    """Column update on S, then scale the columns in S by 1 / (1 - epsilon)."""
    out = column_update(A, S, ratios, params.alpha, params.eta, params.T_inner, params.N,
                        spec, streams, params.pairing, threads)
    idx = _sorted(S)
    if idx.size:
        out[:, idx] = out[:, idx] / (1.0 - params.epsilon)
    return out


def estimate_second_moments(A, spec: ModelSpec, N: int, alpha: float, streams: Streams,
                            index: int = 0, pinv=None, threads: int = 1) -> np.ndarray:
    """Mean of x_j^2 over a fresh batch decoded with ``A``."""
    batch = sample_batch(spec, N, streams, index, A_current=A, label="moments", threads=threads)
    X = decode_batch(A, batch.Y, alpha, pinv=pinv, threads=threads)
    return (X**2).mean(axis=0)


def balance_ratio(true_moments, D) -> float:
    """max_i E[x*_i^2] / D_i^2 over min_j E[x*_j^2] / D_j^2."""
    scaled = np.asarray(true_moments) / np.asarray(D) ** 2
    return float(scaled.max() / scaled.min())


def default_max_outer(true_moments, lambda0: float, params: EquilParams, n: int) -> int:
    """ceil(ln(kappa * min-moment / (b * lambda0)) / ln(1 - epsilon)) + n."""
    target = KAPPA * float(np.min(true_moments)) / (B_CONST * lambda0)
    if target >= 1.0:
        return n
    return math.ceil(math.log(target) / math.log(1.0 - params.epsilon)) + n


@dataclass
class EquilResult:
    A: np.ndarray
    D: np.ndarray
    log: list[tuple[int, int, float, float]]
    passes: int
    # per pass: (pass, in-set lower bound held, global upper bound held)
    invariant_checks: list[tuple[int, bool, bool]]

    @property
    def invariants_hold(self) -> bool:
        return all(lo and hi for _, lo, hi in self.invariant_checks)


def equilibration(A0, params: EquilParams, spec: ModelSpec, threads: int = 1,
                  on_pass: Callable[[tuple], None] | None = None) -> EquilResult:
    """Run the working-set equilibration loop until every column is in S.

    The model's true moments are used only for logging, the invariant checks
    and the default pass cap; the algorithm itself sees estimates only.
    """
    A = as_matrix(A0).copy()
    n = A.shape[1]
    streams = Streams(params.seed)
    truth = spec.weights.second_moments()
    counter = [0]

    def estimate(A_now):
        k = counter[0]
        counter[0] += 1
        return estimate_second_moments(A_now, spec, params.N, params.alpha, streams, k,
                                       threads=threads)

    m = estimate(A)
    lam = params.lambda0 if params.lambda0 is not None else float(m.max()) / B_CONST
    max_outer = (params.max_outer if params.max_outer is not None
                 else default_max_outer(truth, lam, params, n))
    state = EquilState(A=A, S=set(), D=np.ones(n), lam=lam, m_est=m.copy())
    log: list[tuple[int, int, float, float]] = []
    checks: list[tuple[int, bool, bool]] = []
    passes = 0

    def record():
        row = (passes, len(state.S), state.lam, balance_ratio(truth, state.D))
        log.append(row)
        scaled = truth / state.D**2
        idx = _sorted(state.S)
        lower = bool(np.all(scaled[idx] >= B_CONST * state.lam)) if idx.size else True
        upper = bool(np.all(scaled <= B_CONST * KAPPA * state.lam))
        checks.append((passes, lower, upper))
        if on_pass is not None:
            on_pass(row)

    def snapshot():
        return {"S": sorted(state.S), "D": state.D.tolist(), "lambda": state.lam,
                "m_est": state.m_est.tolist(), "passes": passes}

    first = True
    while len(state.S) < n:
        outside = np.array([j for j in range(n) if j not in state.S])
        if not first:
            state.m_est[outside] = estimate(state.A)[outside]
        first = False
        while state.m_est[outside].max() < state.lam:
            if passes >= max_outer:
                raise MaxOuterExceeded(passes, snapshot())
            idx = _sorted(state.S)
            ratios = np.ones(n)
            if idx.size:
                ratios[idx] = 3.0 / (5.0 * state.m_est[idx])
            sub = streams.child("rescale", passes)
            state.A = rescale(state.A, state.S, params, spec, sub, ratios, threads)
            state.lam *= params.decay
            if idx.size:
                state.D[idx] /= 1.0 - params.epsilon
                state.m_est[idx] *= (1.0 - params.epsilon) ** 2
            state.m_est[outside] = estimate(state.A)[outside]
            passes += 1
            record()
        state.S |= {int(j) for j in outside if state.m_est[j] >= state.lam}
        passes += 1
        if passes > max_outer:
            raise MaxOuterExceeded(passes, snapshot())
        record()
    return EquilResult(A=state.A, D=state.D, log=log, passes=passes, invariant_checks=checks)


def scaled_spec(spec: ModelSpec, D) -> ModelSpec:
    """The same data model written as ground truth A* D with weights D^{-1} x*.

    Uniform marginals are rescaled to [lo/D, hi/D]; Bernoulli marginals get
    scale/D, so every draw of y is unchanged.
    """
    D = np.asarray(D, dtype=np.float64)
    margs = []
    for mg, d in zip(spec.weights.coordinate_marginals(), D):
        if mg.kind == "bernoulli":
            margs.append(Marginal("bernoulli", p=mg.p, scale=mg.scale / d))
        else:
            margs.append(Marginal("uniform", lo=mg.lo / d, hi=mg.hi / d))
    weights = WeightDist.independent(margs)
    return ModelSpec(ground_truth=spec.ground_truth * D, weights=weights,
                     noise=spec.noise, init=spec.init)
