"""Synthetic worlds: ground truth, weight distributions, noise, warm starts.

Data follow ``y = A_star @ x_star + nu`` with independent weights in [0, 1]
and per-entry bounded noise.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import BadDims, BadParams
from .l1pinv import check_full_column_rank, ls_pinv
from .matcore import as_matrix, norm_row_induced, norm_sym
from .rng import BLOCK, Streams, blocks

# -- weights -----------------------------------------------------------------


@dataclass(frozen=True)
class Marginal:
    """One weight coordinate: ``scale * Bernoulli(p)`` or ``Uniform(lo, hi)``."""

    kind: Literal["bernoulli", "uniform"] = "bernoulli"
    p: float = 0.0
    scale: float = 1.0
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind == "bernoulli":
            if not (0.0 <= self.p <= 1.0 and 0.0 <= self.scale <= 1.0):
                raise BadParams(f"bad scaled Bernoulli marginal {self}")
        elif self.kind == "uniform":
            if not (0.0 <= self.lo <= self.hi <= 1.0):
                raise BadParams(f"bad uniform marginal {self}")
        else:
            raise BadParams(f"unknown marginal kind {self.kind!r}")

    @property
    def mean(self) -> float:
        if self.kind == "bernoulli":
            return self.scale * self.p
        return 0.5 * (self.lo + self.hi)

    @property
    def second_moment(self) -> float:
        if self.kind == "bernoulli":
            return self.scale**2 * self.p
        return (self.lo**2 + self.lo * self.hi + self.hi**2) / 3.0

    def support(self) -> list[tuple[float, float]]:
        """(value, probability) pairs; only defined for Bernoulli marginals."""
        if self.kind != "bernoulli":
            raise BadParams("uniform marginals have no finite support")
        return [(0.0, 1.0 - self.p), (self.scale, self.p)]


@dataclass(frozen=True)
class WeightDist:
    """Independent weights.  ``s`` set means the uniform s-sparse family."""

    n: int
    s: float | None = None
    marginals: tuple[Marginal, ...] = ()

    def __post_init__(self):
        if self.n < 1:
            raise BadParams("n must be positive")
        if self.s is not None:
            if not 0.0 <= self.s <= self.n:
                raise BadParams(f"sparsity s={self.s} outside [0, n]")
        elif len(self.marginals) != self.n:
            raise BadParams(f"need {self.n} marginals, got {len(self.marginals)}")

    @classmethod
    def bernoulli_uniform(cls, n: int, s: float) -> "WeightDist":
        return cls(n=n, s=float(s))

    @classmethod
    def independent(cls, marginals) -> "WeightDist":
        marginals = tuple(marginals)
        return cls(n=len(marginals), marginals=marginals)

    def coordinate_marginals(self) -> tuple[Marginal, ...]:
        if self.s is not None:
            return (Marginal("bernoulli", p=self.s / self.n),) * self.n
        return self.marginals

    def means(self) -> np.ndarray:
        return np.array([mg.mean for mg in self.coordinate_marginals()])

    def second_moments(self) -> np.ndarray:
        return np.array([mg.second_moment for mg in self.coordinate_marginals()])


def sample_weights(dist: WeightDist, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Draw weight vectors; shape (n,) or (size, n)."""
    count = 1 if size is None else size
    U = rng.random((count, dist.n))
    if dist.s is not None:
        X = (U < dist.s / dist.n).astype(np.float64)
    else:
        X = np.empty_like(U)
        for i, mg in enumerate(dist.marginals):
            if mg.kind == "bernoulli":
                X[:, i] = np.where(U[:, i] < mg.p, mg.scale, 0.0)
            else:
                X[:, i] = mg.lo + (mg.hi - mg.lo) * U[:, i]
    return X[0] if size is None else X


@dataclass(frozen=True)
class Moments:
    C1: float
    c2: float
    C2: float
    mu: float


def moments(dist: WeightDist) -> Moments:
    """Closed-form moment constants of the weight distribution."""
    n = dist.n
    first = dist.means()
    second = dist.second_moments()
    C1 = n * float(first.max())
    c2 = n * float(second.min())
    C2 = n * float(second.max())
    mu = C1 / c2 if c2 > 0 else float("inf")
    return Moments(C1=C1, c2=c2, C2=C2, mu=mu)


# -- noise -------------------------------------------------------------------

NOISE_KINDS = ("none", "adversarial", "unbiased")
ADVERSARIAL_STRATEGIES = ("constant_bias", "sign_aligned", "random_bounded")
UNBIASED_DISTS = ("rademacher", "uniform_sym")


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"
    level: float = 0.0
    strategy: str = "sign_aligned"
    dist: str = "rademacher"

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise BadParams(f"unknown noise kind {self.kind!r}")
        if self.level < 0:
            raise BadParams("noise level must be nonnegative")
        if self.kind == "adversarial" and self.strategy not in ADVERSARIAL_STRATEGIES:
            raise BadParams(f"unknown adversarial strategy {self.strategy!r}")
        if self.kind == "unbiased" and self.dist not in UNBIASED_DISTS:
            raise BadParams(f"unknown unbiased distribution {self.dist!r}")

    @property
    def is_finite_support(self) -> bool:
        return (self.kind == "none" or self.level == 0.0
                or (self.kind == "adversarial" and self.strategy in ("constant_bias", "sign_aligned"))
                or (self.kind == "unbiased" and self.dist == "rademacher"))


def _sign_direction(A: np.ndarray) -> np.ndarray:
    u = A.sum(axis=1)
    return np.where(u < 0, -1.0, 1.0)


def sample_noise(model: NoiseModel, x_star, A_star, A_current=None,
                 rng: np.random.Generator | None = None) -> np.ndarray:
    """Noise for a batch of weights; ``x_star`` is (n,) or (N, n)."""
    X = np.atleast_2d(x_star)
    count, m = X.shape[0], A_star.shape[0]
    c = model.level
    if model.kind == "none" or c == 0.0:
        nu = np.zeros((count, m))
    elif model.kind == "adversarial":
        if model.strategy == "constant_bias":
            nu = np.full((count, m), c)
        elif model.strategy == "sign_aligned":
            ref = A_star if A_current is None else A_current
            nu = np.broadcast_to(c * _sign_direction(ref), (count, m)).copy()
        else:
            nu = c * rng.random((count, m))
    else:
        if model.dist == "rademacher":
            nu = c * np.where(rng.random((count, m)) < 0.5, -1.0, 1.0)
        else:
            nu = c * (2.0 * rng.random((count, m)) - 1.0)
    return nu[0] if np.ndim(x_star) == 1 else nu


# -- ground truth and warm starts --------------------------------------------

GROUND_TRUTH_KINDS = ("identity", "random_nonneg_unit_l1", "overlapping")


def gen_ground_truth(kind: str, m: int, n: int, rng: np.random.Generator,
                     corr: float = 0.0, concentration: float = 0.1) -> np.ndarray:
    """Full-rank ground truth.  Random kinds have Dirichlet columns (unit l1)."""
    if m < n or n < 1:
        raise BadDims(f"need m >= n >= 1, got m={m}, n={n}")
    if kind == "identity":
        A = np.eye(m, n)
    elif kind in ("random_nonneg_unit_l1", "overlapping"):
        if not 0.0 <= corr < 1.0:
            raise BadParams("corr must lie in [0, 1)")
        for _ in range(100):
            A = rng.dirichlet(np.full(m, concentration), size=n).T
            if kind == "overlapping":
                shared = rng.dirichlet(np.full(m, concentration))
                A = (1.0 - corr) * A + corr * shared[:, None]
            A = A / A.sum(axis=0)
            try:
                check_full_column_rank(A)
                break
            except Exception:
                continue
        else:
            raise BadDims("could not draw a full-rank ground truth")
    else:
        raise BadParams(f"unknown ground truth kind {kind!r}")
    return A


@dataclass(frozen=True)
class InitSpec:
    ell: float = 0.1
    e_sign: Literal["mixed", "nonnegative"] = "mixed"
    n0_level: float = 0.0
    sigma_range: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        lo, hi = self.sigma_range
        if not 0.0 <= self.ell < 0.5:
            raise BadParams("ell must lie in [0, 1/2)")
        if self.e_sign not in ("mixed", "nonnegative"):
            raise BadParams(f"unknown e_sign {self.e_sign!r}")
        if self.n0_level < 0:
            raise BadParams("n0_level must be nonnegative")
        if not (1.0 - self.ell - 1e-12 <= lo <= hi):
            raise BadParams(f"sigma_range {self.sigma_range} must satisfy 1 - ell <= lo <= hi")


@dataclass(frozen=True)
class InitParts:
    a0: np.ndarray
    sigma: np.ndarray
    e_mat: np.ndarray
    n_mat: np.ndarray


def gen_init_parts(A_star, init: InitSpec, rng: np.random.Generator) -> InitParts:
    """Warm start A0 = A*(Sigma + E) + N with the requested sizes hit exactly."""
    A_star = as_matrix(A_star)
    m, n = A_star.shape
    if m < n:
        raise BadDims(f"need m >= n, got {A_star.shape}")
    lo, hi = init.sigma_range
    sigma = rng.uniform(lo, hi, size=n) if hi > lo else np.full(n, lo)

    E = np.zeros((n, n))
    if init.ell > 0 and n > 1:
        raw = rng.random((n, n)) if init.e_sign == "nonnegative" else rng.uniform(-1.0, 1.0, (n, n))
        np.fill_diagonal(raw, 0.0)
        E = raw * (init.ell / norm_sym(raw))

    N = np.zeros((m, n))
    if init.n0_level > 0:
        if m == n:
            raise BadDims("square ground truth leaves no room for an out-of-span component")
        G = rng.standard_normal((m, n))
        N = G - A_star @ (ls_pinv(A_star) @ G)
        N *= init.n0_level / norm_row_induced(N)

    a0 = A_star @ (np.diag(sigma) + E) + N
    return InitParts(a0=a0, sigma=sigma, e_mat=E, n_mat=N)


def gen_init(A_star, init: InitSpec, rng: np.random.Generator) -> np.ndarray:
    return gen_init_parts(A_star, init, rng).a0


# -- model and batches -------------------------------------------------------


@dataclass(frozen=True)
class ModelSpec:
    ground_truth: np.ndarray
    weights: WeightDist
    noise: NoiseModel = field(default_factory=NoiseModel)
    init: InitSpec = field(default_factory=InitSpec)

    def __post_init__(self):
        A = as_matrix(self.ground_truth, "ground_truth")
        if A.shape[1] != self.weights.n:
            raise BadDims(f"ground truth has {A.shape[1]} columns, weights have n={self.weights.n}")
        check_full_column_rank(A)

    @property
    def m(self) -> int:
        return self.ground_truth.shape[0]

    @property
    def n(self) -> int:
        return self.ground_truth.shape[1]


@dataclass(frozen=True)
class Sample:
    y: np.ndarray
    x_star: np.ndarray
    nu: np.ndarray


@dataclass(frozen=True)
class Batch:
    """N samples stored row-wise: Y (N, m), X_star (N, n), Nu (N, m)."""

    Y: np.ndarray
    X_star: np.ndarray
    Nu: np.ndarray

    def __len__(self) -> int:
        return self.Y.shape[0]

    def __getitem__(self, k: int) -> Sample:
        return Sample(y=self.Y[k], x_star=self.X_star[k], nu=self.Nu[k])

    def samples(self) -> list[Sample]:
        return [self[k] for k in range(len(self))]


def _sample_block(spec: ModelSpec, size: int, A_current, rng: np.random.Generator):
    X = sample_weights(spec.weights, rng, size=size)
    Nu = sample_noise(spec.noise, X, spec.ground_truth, A_current, rng)
    Y = X @ spec.ground_truth.T + Nu
    return Y, X, Nu


def sample_batch(spec: ModelSpec, N: int, streams: Streams, index: int = 0,
                 A_current=None, label: str = "batch", threads: int = 1) -> Batch:
    """N fresh samples; block b of batch ``index`` uses stream (label, index, b)."""
    if N < 2:
        raise BadParams("a batch needs at least two samples")
    spans = blocks(N, BLOCK)

    def work(b):
        lo, hi = spans[b]
        return _sample_block(spec, hi - lo, A_current, streams.generator(label, index, b))

    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, range(len(spans))))
    else:
        parts = [work(b) for b in range(len(spans))]
    Y, X, Nu = (np.vstack(p) for p in zip(*parts))
    return Batch(Y=Y, X_star=X, Nu=Nu)
