"""Ground-truth-aware diagnostics.

An iterate is written as ``A = A_star (Sigma + E) + N`` with Sigma diagonal,
E off-diagonal and N orthogonal to the column span of ``A_star``.  The
functions here compute that split, the coupled potential tracked by the
convergence argument, numeric audits of the per-step bounds, and closed
forms of the recurrences used to chain them.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadParams, HypothesisViolated, SingularMatrix, SupportTooLarge
from .genmodel import moments, sample_noise
from .l1pinv import ls_pinv, min_inf_pinv
from .matcore import (
    as_matrix,
    col_abs_sums,
    col_normalize,
    norm_col_induced,
    norm_row_induced,
    norm_sym,
    relu_offset,
    split_pos_neg,
)

BETA = (math.sqrt(84.0**2 + 2800.0) - 84.0) / 2.0


# -- decomposition -----------------------------------------------------------


@dataclass(frozen=True)
class Decomposition:
    sigma: np.ndarray
    e_mat: np.ndarray
    n_mat: np.ndarray

    def coefficient_matrix(self) -> np.ndarray:
        return np.diag(self.sigma) + self.e_mat

    def reconstruct(self, A_star) -> np.ndarray:
        return A_star @ self.coefficient_matrix() + self.n_mat


def decompose(A, A_star, A_star_pinv=None) -> Decomposition:
    """Split ``A`` against ``A_star`` using orthogonal projection onto its span."""
    A = as_matrix(A)
    A_star = as_matrix(A_star)
    if A.shape != A_star.shape:
        raise ValueError(f"shape mismatch {A.shape} vs {A_star.shape}")
    P = ls_pinv(A_star) if A_star_pinv is None else A_star_pinv
    B = P @ A
    sigma = np.diag(B).copy()
    E = B.copy()
    np.fill_diagonal(E, 0.0)
    N = A - A_star @ B
    return Decomposition(sigma=sigma, e_mat=E, n_mat=N)


def col_error(A, A_star) -> float:
    """max_i || A_i / ||A_i||_1 - A_star_i ||_1."""
    return float(col_abs_sums(col_normalize(A) - as_matrix(A_star)).max())


def coupled_potential(decomp: Decomposition) -> float:
    pos, neg = split_pos_neg(decomp.e_mat)
    return norm_sym(pos) + BETA * norm_sym(neg)


# -- per-iteration record ----------------------------------------------------

RECORD_FIELDS = ("t", "sigma_min", "sigma_max", "e_pos_sym", "e_neg_sym", "potential",
                 "n_inf", "n_l1", "col_err")


@dataclass(frozen=True)
class IterRecord:
    t: int
    sigma_min: float
    sigma_max: float
    e_pos_sym: float
    e_neg_sym: float
    potential: float
    n_inf: float
    n_l1: float
    col_err: float

    def as_row(self) -> list:
        return [getattr(self, f) for f in RECORD_FIELDS]


def iter_record(t: int, A, A_star, A_star_pinv=None) -> IterRecord:
    d = decompose(A, A_star, A_star_pinv)
    pos, neg = split_pos_neg(d.e_mat)
    a, b = norm_sym(pos), norm_sym(neg)
    try:
        err = col_error(A, col_normalize(A_star))
    except Exception:
        err = float("nan")
    return IterRecord(
        t=t,
        sigma_min=float(d.sigma.min()),
        sigma_max=float(d.sigma.max()),
        e_pos_sym=a,
        e_neg_sym=b,
        potential=a + BETA * b,
        n_inf=norm_row_induced(d.n_mat),
        n_l1=norm_col_induced(d.n_mat),
        col_err=err,
    )


# -- perturbation of the inverse ---------------------------------------------


def _strict_upper(x: float) -> float:
    return float(np.nextafter(x, np.inf))


def _inverse(M: np.ndarray) -> np.ndarray:
    try:
        inv = np.linalg.inv(M)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(str(exc)) from exc
    if not np.all(np.isfinite(inv)) or np.linalg.cond(M) > 1e14:
        raise SingularMatrix("matrix is numerically singular")
    return inv


def inverse_parts(sigma, e_mat) -> tuple[np.ndarray, np.ndarray]:
    """Z = (Sigma + E)^{-1} and V = Z - Sigma^{-1}."""
    sigma = np.asarray(sigma, dtype=np.float64)
    if np.any(sigma == 0.0):
        raise SingularMatrix("Sigma has a zero diagonal entry")
    Z = _inverse(np.diag(sigma) + as_matrix(e_mat))
    return Z, Z - np.diag(1.0 / sigma)


@dataclass(frozen=True)
class VBoundReport:
    """Outcome of the four inequalities on V, in order: V+, V-, V, diag(V)."""

    holds: tuple[bool, bool, bool, bool]
    slack: tuple[float, float, float, float]

    @property
    def all_hold(self) -> bool:
        return all(self.holds)


def check_v_bounds(sigma, e_mat, ell: float, ell_e: float) -> VBoundReport:
    """Evaluate the bounds on V = (Sigma + E)^{-1} - Sigma^{-1} by dense inversion.

    Hypotheses: ||E||_s < ell_e, Sigma >= (1 - ell) I and ell + ell_e < 1.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    E = as_matrix(e_mat)
    failed = []
    if not norm_sym(E) < ell_e:
        failed.append(f"||E||_s = {norm_sym(E):.6g} is not < ell_e = {ell_e}")
    if sigma.min() < 1.0 - ell:
        failed.append(f"min Sigma = {sigma.min():.6g} < 1 - ell = {1.0 - ell}")
    if not ell + ell_e < 1.0 or ell >= 1.0:
        failed.append("need ell + ell_e < 1")
    if failed:
        raise HypothesisViolated(failed)

    _, V = inverse_parts(sigma, E)
    e_pos, e_neg = split_pos_neg(E)
    v_pos, v_neg = split_pos_neg(V)
    den = 1.0 - ell_e - ell
    lead = (1.0 - ell_e) / ((1.0 - ell) * den)
    cross = ell / ((1.0 - ell) ** 2 * den)
    bounds = (
        lead * norm_sym(e_neg) + cross * norm_sym(e_pos),
        lead * norm_sym(e_pos) + cross * norm_sym(e_neg),
        ell_e * (1.0 - ell_e) / ((1.0 - ell) ** 2 * den),
        ell * ell_e / ((1.0 - ell) ** 2 * den),
    )
    values = (norm_sym(v_pos), norm_sym(v_neg), norm_sym(V), float(np.abs(np.diag(V)).max()))
    slack = tuple(float(b - v) for b, v in zip(bounds, values))
    return VBoundReport(holds=tuple(s >= 0.0 for s in slack), slack=slack)


# -- decode perturbation ------------------------------------------------------


def xi_values(pinv, decomp: Decomposition, X_star, Nu) -> np.ndarray:
    """Rows xi = -P N Z x* + P nu for each sample row of X_star / Nu."""
    Z, _ = inverse_parts(decomp.sigma, decomp.e_mat)
    X_star = np.atleast_2d(X_star)
    Nu = np.atleast_2d(Nu)
    PN = pinv @ decomp.n_mat
    return -(X_star @ (PN @ Z).T) + Nu @ pinv.T


def decoding_identity_gap(A, A_star, x_star, nu, alpha: float, pinv=None,
                          decomp: Decomposition | None = None) -> float:
    """Max gap between direct decoding and relu(Z x* + xi - alpha).

    Hypotheses: Sigma >= I/2 and ||E||_1 < 1/2.
    """
    A = as_matrix(A)
    d = decompose(A, A_star) if decomp is None else decomp
    failed = []
    if d.sigma.min() < 0.5:
        failed.append(f"min Sigma = {d.sigma.min():.6g} < 1/2")
    if not norm_col_induced(d.e_mat) < 0.5:
        failed.append(f"||E||_1 = {norm_col_induced(d.e_mat):.6g} is not < 1/2")
    if failed:
        raise HypothesisViolated(failed)
    P = min_inf_pinv(A).pinv if pinv is None else pinv
    X_star = np.atleast_2d(x_star)
    Nu = np.atleast_2d(nu)
    Y = X_star @ as_matrix(A_star).T + Nu
    direct = relu_offset(Y @ P.T, alpha)
    Z, _ = inverse_parts(d.sigma, d.e_mat)
    via = relu_offset(X_star @ Z.T + xi_values(P, d, X_star, Nu), alpha)
    return float(np.abs(direct - via).max())


@dataclass(frozen=True)
class XiBoundReport:
    gamma: float
    holds: bool
    max_abs_xi: float
    ell: float
    # second part of the lemma, evaluated only when ||N||_inf ||A*^+||_inf < 1/8
    small_residual: bool
    pinv_ratio: float
    gamma_simplified: float
    simplified_holds: bool | None


def check_xi_bound(A, A_star, decomp: Decomposition, c_nu: float, X_star, Nu,
                   ell: float | None = None, pinv=None, star_pinv=None) -> XiBoundReport:
    """Compare sampled |xi_i| against gamma = ||A^+|| ||N|| / (1 - 2 ell) + c_nu ||A^+||.

    ``ell`` defaults to the smallest value meeting the hypotheses
    ||E||_s < ell and Sigma >= (1 - ell) I.  Norms are induced l-infinity
    norms and the left inverses are the minimum-norm ones.
    """
    A = as_matrix(A)
    e_s = norm_sym(decomp.e_mat)
    if ell is None:
        ell = max(_strict_upper(e_s), 1.0 - float(decomp.sigma.min()))
    failed = []
    if not e_s < ell:
        failed.append(f"||E||_s = {e_s:.6g} is not < ell = {ell}")
    if ell > 0.125:
        failed.append(f"ell = {ell:.6g} > 1/8")
    if decomp.sigma.min() < 1.0 - ell:
        failed.append(f"min Sigma = {decomp.sigma.min():.6g} < 1 - ell")
    if failed:
        raise HypothesisViolated(failed)

    P = min_inf_pinv(A).pinv if pinv is None else pinv
    Ps = min_inf_pinv(A_star).pinv if star_pinv is None else star_pinv
    p_norm = norm_row_induced(P)
    ps_norm = norm_row_induced(Ps)
    n_norm = norm_row_induced(decomp.n_mat)
    gamma = p_norm * n_norm / (1.0 - 2.0 * ell) + c_nu * p_norm
    xi = xi_values(P, decomp, X_star, Nu)
    max_xi = float(np.abs(xi).max()) if xi.size else 0.0
    small = n_norm * ps_norm < 0.125
    simplified = 3.0 * ps_norm * (n_norm + c_nu)
    return XiBoundReport(
        gamma=gamma,
        holds=max_xi <= gamma * (1.0 + 1e-12) + 1e-15,
        max_abs_xi=max_xi,
        ell=ell,
        small_residual=small,
        pinv_ratio=p_norm / ps_norm,
        gamma_simplified=simplified,
        simplified_holds=(p_norm <= 2.0 * ps_norm and gamma <= simplified) if small else None,
    )


# -- exact expectations by enumeration ---------------------------------------

MAX_ENUM_TOPICS = 12
MAX_ENUM_OUTCOMES = 4096


@dataclass(frozen=True)
class Outcomes:
    """All joint (x*, nu) outcomes of one sample with their probabilities."""

    prob: np.ndarray
    X_star: np.ndarray
    Nu: np.ndarray
    Y: np.ndarray
    X: np.ndarray

    def mean(self, values: np.ndarray) -> np.ndarray:
        return np.tensordot(self.prob, values, axes=1)


def enumerate_outcomes(spec, A, alpha: float, pinv=None) -> Outcomes:
    """Enumerate weight and noise outcomes and decode each one with ``A``.

    Needs Bernoulli weights (support 2 per coordinate), n <= 12 and noise that
    is deterministic or Rademacher, with at most 4096 joint outcomes.
    """
    A = as_matrix(A)
    n, m = spec.n, spec.m
    if n > MAX_ENUM_TOPICS:
        raise SupportTooLarge(f"n = {n} exceeds {MAX_ENUM_TOPICS}")
    margs = spec.weights.coordinate_marginals()
    if any(mg.kind != "bernoulli" for mg in margs):
        raise SupportTooLarge("only two-point (Bernoulli) weight marginals can be enumerated")
    noise = spec.noise
    if not noise.is_finite_support:
        raise SupportTooLarge(f"noise {noise.kind}/{noise.strategy}/{noise.dist} has continuous support")
    random_noise = noise.kind == "unbiased" and noise.level > 0.0
    count = 2**n * (2**m if random_noise else 1)
    if count > MAX_ENUM_OUTCOMES:
        raise SupportTooLarge(f"{count} joint outcomes exceed {MAX_ENUM_OUTCOMES}")

    pts = np.array(list(itertools.product((0, 1), repeat=n)), dtype=np.int64)
    vals = np.array([[mg.support()[b][0] for mg, b in zip(margs, row)] for row in pts])
    probs = np.array([math.prod(mg.support()[b][1] for mg, b in zip(margs, row)) for row in pts])

    if random_noise:
        signs = np.array(list(itertools.product((-1.0, 1.0), repeat=m)))
        X_star = np.repeat(vals, len(signs), axis=0)
        Nu = np.tile(noise.level * signs, (len(vals), 1))
        prob = np.repeat(probs, len(signs)) / len(signs)
    else:
        X_star = vals
        Nu = sample_noise(noise, vals, spec.ground_truth, A_current=A)
        prob = probs
    keep = prob > 0.0
    X_star, Nu, prob = X_star[keep], Nu[keep], prob[keep]
    Y = X_star @ spec.ground_truth.T + Nu
    P = min_inf_pinv(A).pinv if pinv is None else pinv
    X = relu_offset(Y @ P.T, alpha)
    return Outcomes(prob=prob, X_star=X_star, Nu=Nu, Y=Y, X=X)


def _pair_covariance(out: Outcomes, U: np.ndarray, W: np.ndarray) -> np.ndarray:
    # E[(u - u')(w - w')^T] over independent pairs = 2 (E[u w^T] - E[u] E[w]^T)
    cross = (U * out.prob[:, None]).T @ W
    return 2.0 * (cross - np.outer(out.mean(U), out.mean(W)))


def exact_update_expectation(spec, A, alpha: float, pinv=None) -> np.ndarray:
    """Exact E[(y - y')(x - x')^T] for decoding with ``A`` (m x n)."""
    out = enumerate_outcomes(spec, A, alpha, pinv)
    return _pair_covariance(out, out.Y, out.X)


def exact_weight_update(spec, A, alpha: float, pinv=None) -> np.ndarray:
    """Exact E[(x* - x*')(x - x')^T]: the in-span coefficients Sigma~ + E~."""
    out = enumerate_outcomes(spec, A, alpha, pinv)
    return _pair_covariance(out, out.X_star, out.X)


def exact_feature_weights(spec, A, alpha: float, pinv=None) -> np.ndarray:
    """Exact E[x_i^2] of the decoded weights."""
    out = enumerate_outcomes(spec, A, alpha, pinv)
    return out.mean(out.X**2)


# -- audits of the one-step update bounds -------------------------------------


def _audit_setup(spec, A, alpha: float, rho: float, pinv, need_half: bool):
    A = as_matrix(A)
    P = min_inf_pinv(A).pinv if pinv is None else pinv
    d = decompose(A, spec.ground_truth)
    out = enumerate_outcomes(spec, A, alpha, P)
    failed = []
    if not rho < alpha:
        failed.append(f"rho = {rho} is not < alpha = {alpha}")
    if need_half and d.sigma.min() < 0.5:
        failed.append(f"min Sigma = {d.sigma.min():.6g} < 1/2")
    xi = xi_values(P, d, out.X_star, out.Nu)
    worst = float(np.abs(xi).max())
    if worst > rho:
        failed.append(f"max |xi| = {worst:.6g} exceeds rho = {rho}")
    if failed:
        raise HypothesisViolated(failed)
    Z, V = inverse_parts(d.sigma, d.e_mat)
    W = _pair_covariance(out, out.X_star, out.X)
    return d, Z, V, W, out, moments(spec.weights).C1


@dataclass(frozen=True)
class BoundEntry:
    i: int
    j: int
    case: int
    lower: float
    value: float
    upper: float

    @property
    def slack(self) -> float:
        return min(self.value - self.lower, self.upper - self.value)


@dataclass(frozen=True)
class BoundAudit:
    entries: list[BoundEntry] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(e.slack >= 0.0 for e in self.entries)

    @property
    def worst_slack(self) -> float:
        return min((e.slack for e in self.entries), default=math.inf)

    @property
    def failures(self) -> list[BoundEntry]:
        return [e for e in self.entries if e.slack < 0.0]


def audit_e_bound_lemma(spec, A, alpha: float, rho: float, pinv=None) -> BoundAudit:
    """Check the off-diagonal update bounds entrywise against the exact oracle.

    For i != j the exact value E~_{j,i} = [E(x* - x*')(x - x')^T]_{j,i} is
    compared with the case Z_{i,j} < 0 (case 1) or Z_{i,j} >= 0 (case 2)
    bounds, where Z = (Sigma + E)^{-1} and ||Z^i||_1 is the l1 norm of row i.
    Hypothesis: |xi_i| <= rho < alpha on every outcome.
    """
    d, Z, _, W, out, C1 = _audit_setup(spec, A, alpha, rho, pinv, need_half=False)
    n = spec.n
    second = spec.weights.second_moments()
    gap = alpha - rho
    entries = []
    for i in range(n):
        row_l1 = float(np.abs(Z[i]).sum())
        for j in range(n):
            if i == j:
                continue
            z = Z[i, j]
            value = float(W[j, i])
            if z < 0:
                b = 4.0 * C1**2 * row_l1 / (n**2 * gap) * (abs(z) + rho)
                entries.append(BoundEntry(i, j, 1, -b, value, b))
            else:
                core = 8.0 * C1 * rho / (n * gap) * (C1 * row_l1 / n + z)
                lo = -core - 2.0 * C1**2 / n**2 * z
                hi = core + 2.0 * second[j] * z
                entries.append(BoundEntry(i, j, 2, lo, value, hi))
    return BoundAudit(entries)


def audit_sigma_bound_lemma(spec, A, alpha: float, rho: float, pinv=None) -> BoundAudit:
    """Check the diagonal update bounds on Sigma~_{i,i} against the exact oracle.

    Hypotheses: |xi_i| <= rho < alpha on every outcome and Sigma >= I/2.
    """
    d, _, V, W, out, C1 = _audit_setup(spec, A, alpha, rho, pinv, need_half=True)
    n = spec.n
    second = spec.weights.second_moments()
    entries = []
    for i in range(n):
        s_inv = 1.0 / d.sigma[i]
        v_ii = abs(V[i, i])
        v_l1 = float(np.abs(V[i]).sum())
        lo = second[i] * (2.0 * s_inv - 2.0 * v_ii) - 2.0 * C1 / n * (
            alpha + 2.0 * rho + C1 / n * s_inv + 2.0 * C1 / n * v_l1)
        hi = second[i] * (2.0 * s_inv + 2.0 * v_ii) + 2.0 * C1 / n * (rho + C1 / n * v_l1)
        entries.append(BoundEntry(i, i, 0, lo, float(W[i, i]), hi))
    return BoundAudit(entries)


def feature_weight_bounds(sigma, V, second_moments, C1: float, alpha: float,
                          rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds on E[x_i^2] when |xi_i| <= rho < alpha and Sigma >= I/2."""
    sigma = np.asarray(sigma, dtype=np.float64)
    second = np.asarray(second_moments, dtype=np.float64)
    n = sigma.size
    s_inv = 1.0 / sigma
    v_ii = np.abs(np.diag(V))
    v_l1 = np.abs(V).sum(axis=1)
    v_l2sq = (V**2).sum(axis=1)
    top = second.max()
    cross = C1**2 / n**2 * v_l1 * (v_l1 + 2.0 * s_inv)
    lower = ((s_inv - v_ii) ** 2 * second - v_l2sq * top
             - (cross + 2.0 * (alpha + rho) * C1 / n * s_inv))
    upper = (s_inv + v_ii) ** 2 * second + v_l2sq * top + cross
    return lower, upper


# -- recurrence lemmas --------------------------------------------------------


def solve_simple_recursion(a0: float, eta: float, h: float, T: int) -> np.ndarray:
    """Bound (1 - eta)^t a0 + h for t = 0..T on a_{t+1} <= (1 - eta) a_t + eta h."""
    if a0 < 0 or h < 0 or not 0.0 <= eta <= 1.0:
        raise BadParams("need a0, h >= 0 and eta in [0, 1]")
    t = np.arange(T + 1)
    return (1.0 - eta) ** t * a0 + h


def solve_simple_coupling(a0: float, b0: float, eta: float, s: float,
                          h1: float, h2: float) -> tuple[float, float]:
    """Uniform bounds (u_a, u_b) for a driven by h1 and b driven by h2 + s a."""
    if min(a0, b0, s, h1, h2) < 0 or not 0.0 <= eta <= 1.0:
        raise BadParams("need nonnegative inputs and eta in [0, 1]")
    u_a = max(a0, h1)
    return u_a, max(b0, h2 + s * u_a)


@dataclass(frozen=True)
class RecurrenceParams:
    a0: float = 0.0
    b0: float = 0.0
    eta: float = 0.0
    r: float = 0.0
    R: float = 0.0
    s: float = 0.0
    h: float = 0.0
    h1: float = 0.0
    h2: float = 0.0

    def __post_init__(self):
        if min(self.a0, self.b0, self.r, self.R, self.s, self.h, self.h1, self.h2) < 0:
            raise BadParams("recurrence parameters must be nonnegative")
        if not 0.0 <= self.eta <= 1.0:
            raise BadParams("eta must lie in [0, 1]")


@dataclass(frozen=True)
class CouplingSolution:
    sum_bound: float
    a_level: float
    b_level: float
    c_seq: np.ndarray
    d_seq: np.ndarray
    eta: float

    def tail_bounds(self, eps: float) -> tuple[float, float, float]:
        """(a bound, b bound, iteration count after which both apply)."""
        c0, d0 = self.c_seq[0], self.d_seq[0]
        a0b0 = c0 + self.a_level + d0 + self.b_level
        t_min = max(0.0, math.log(a0b0 / (8.0 * self.eta * eps))) if a0b0 > 0 else 0.0
        return self.a_level + eps, self.b_level + eps, t_min

    @property
    def a_seq(self) -> np.ndarray:
        return self.c_seq + self.a_level

    @property
    def b_seq(self) -> np.ndarray:
        return self.d_seq + self.b_level


def solve_coupling(params: RecurrenceParams, T: int) -> CouplingSolution:
    """Closed form of a_{t+1} = (1-eta) a_t + eta r b_t + eta h,
    b_{t+1} = (1-eta) b_t + (eta/R) a_t + eta h, shifted to its fixed point."""
    r, R, eta, h = params.r, params.R, params.eta, params.h
    if not (r > 0 and R > 4 * r):
        raise BadParams(f"need R > 4r > 0, got r={r}, R={R}")
    a_level = R * (r + 1.0) / (R - r) * h
    b_level = (R + 1.0) / (R - r) * h
    c0 = params.a0 - a_level
    d0 = params.b0 - b_level
    # eigenvalues 1 - eta +- eta sqrt(r/R); the decoupled combinations are
    # c +- sqrt(r R) d (the two coincide with c +- sqrt(R/r) d only at r = 1)
    q = math.sqrt(r / R)
    w = math.sqrt(r * R)
    t = np.arange(T + 1)
    lp = (1.0 - eta + eta * q) ** t
    lm = (1.0 - eta - eta * q) ** t
    c_seq = 0.5 * (lp + lm) * c0 + 0.5 * w * (lp - lm) * d0
    d_seq = 0.5 / w * (lp - lm) * c0 + 0.5 * (lp + lm) * d0
    sum_bound = params.a0 + params.b0 + (R * r + 2.0 * R + 1.0) / (R - r) * h
    return CouplingSolution(sum_bound, a_level, b_level, c_seq, d_seq, eta)


def recurrence_h(C1: float, C2: float, alpha: float, rho: float) -> float:
    """Noise level h = 48 C1^2 rho / (C2 (alpha - rho)) of the contraction recurrence."""
    if not rho < alpha:
        raise BadParams("need rho < alpha")
    return 48.0 * C1**2 * rho / (C2 * (alpha - rho))


def default_sampling_slack(N: int) -> float:
    """Heuristic per-step allowance for sampling noise, 3 / sqrt(N)."""
    return 3.0 / math.sqrt(N)


@dataclass(frozen=True)
class TrajectoryCheck:
    holds: bool
    worst_slack: float
    failures: list[tuple[int, str, float]]
    potential_holds: bool
    potential_worst_slack: float


def verify_trajectory_recurrence(records, eta: float, h: float,
                                 sampling_slack: float = 0.0) -> TrajectoryCheck:
    """Check the per-step contraction of (a_t, b_t) = (||E+||_s, ||E-||_s).

    a_{t+1} <= (1 - 3 eta/25) a_t + 7 eta b_t + eta h and
    b_{t+1} <= (1 - 24 eta/25) b_t + eta a_t / 100 + eta h, each plus
    ``sampling_slack``; the potential a + beta b must also satisfy
    P_{t+1} <= (1 - eta/25) P_t + 9 eta h + (1 + beta) sampling_slack.
    """
    failures = []
    worst = math.inf
    pot_worst = math.inf
    for prev, cur in zip(records, records[1:]):
        a, b = prev.e_pos_sym, prev.e_neg_sym
        sa = (1 - 3 * eta / 25) * a + 7 * eta * b + eta * h + sampling_slack - cur.e_pos_sym
        sb = (1 - 24 * eta / 25) * b + eta * a / 100 + eta * h + sampling_slack - cur.e_neg_sym
        for name, s in (("a", sa), ("b", sb)):
            worst = min(worst, s)
            if s < 0:
                failures.append((cur.t, name, float(s)))
        pot_prev = a + BETA * b
        pot_cur = cur.e_pos_sym + BETA * cur.e_neg_sym
        sp = (1 - eta / 25) * pot_prev + 9 * eta * h + (1 + BETA) * sampling_slack - pot_cur
        pot_worst = min(pot_worst, sp)
        if sp < 0:
            failures.append((cur.t, "potential", float(sp)))
    return TrajectoryCheck(
        holds=not any(f[1] != "potential" for f in failures),
        worst_slack=float(worst),
        failures=failures,
        potential_holds=pot_worst >= 0,
        potential_worst_slack=float(pot_worst),
    )


def check_potential_descent(records, slack: float, start: int = 3) -> tuple[bool, float]:
    """Non-increase of the coupled potential from ``start`` on, up to ``slack`` per step.

    Returns (holds, worst margin) with margin = P_t + slack - P_{t+1}.
    """
    worst = math.inf
    for prev, cur in zip(records, records[1:]):
        if prev.t < start:
            continue
        worst = min(worst, prev.potential + slack - cur.potential)
    return worst >= 0.0, float(worst)
