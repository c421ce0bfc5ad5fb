"""Diagnostics and certificate layer: the error-coordinate algebra, good-event
monitoring, closed-form bound evaluators, and the Monte Carlo checkers that
compare them against simulated moments.

Everything here is pure: evaluators take explicit schedules, models, and
arrays, and return numbers or small report dataclasses. Monte Carlo helpers
take a seed and draw through the named generator, so every reported estimate
is reproducible from (seed, config).

One deliberate exception to the no-LAPACK rule of linalg: the Monte Carlo
helpers that reduce thousands of small matrices to singular-value power sums
go through numpy's batched svd (_batch_svdvals). The public per-matrix
operations stay on the audited Jacobi path, and the two are pinned against
each other in the test suite.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssumptionViolated,
    ConfigError,
    DimensionMismatch,
    InvalidP,
    InvalidShape,
    PreconditionFailed,
    Singular,
    TooLarge,
    UnsupportedDistribution,
    ZeroGap,
)
from .linalg import (
    TOL_EIG,
    as_matrix,
    right_solve,
    spectral_norm,
    subspace_distance,
    svd,
    symmetric_eigendecompose,
)
from .oja import C3, DEFAULT_GAMMA, StepSchedule, rho_bar
from .rng import make_generator
from .streams import FiniteSupportDistribution, noise_family

# Constants of the moment recurrences, used as stated (never fitted).
C1 = 21.0
C2 = 5.0
C4 = 6.0


# ---------------------------------------------------------------------------
# error coordinate and its decomposition


def w_matrix(Z, V, U) -> np.ndarray:
    """U^T Z (V^T Z)^{-1}: the tangent-like error coordinate of span(Z)
    against the split (V, U). Invariant under Z -> Z R for invertible R."""
    Z = as_matrix(Z, "Z")
    V = as_matrix(V, "V")
    U = as_matrix(U, "U")
    return right_solve(U.T @ Z, V.T @ Z)


def epsilon_t(eta: float, M_bound: float, gamma: float) -> float:
    """Per-step fluctuation envelope 2 eta M (1 + gamma)."""
    return 2.0 * eta * M_bound * (1.0 + gamma)


def decomposition_residual(Z_prev, A, eta: float, model):
    """Split one update into its contraction and fluctuation parts.

    With G = V^T (I + eta M) Z_prev, the pieces are

        H     = U^T (I + eta M) Z_prev G^{-1}
        Delta = eta V^T (A - M) Z_prev G^{-1}
        Dhat  = eta U^T (A - M) Z_prev G^{-1}

    and the post-step coordinate W of (I + eta A) Z_prev satisfies
    W (I - Delta^2) = H + (Dhat - H Delta) + (-Dhat Delta) exactly. Returns
    (residual, delta_norm) where residual is the defect of that identity
    scaled by max(1, ||W||), so it should sit at rounding error whenever the
    two required inverses exist.
    """
    Z_prev = as_matrix(Z_prev, "Z_prev")
    A = as_matrix(A, "A")
    V, U, M = model.V, model.U, model.M
    k = Z_prev.shape[1]
    Z_next = Z_prev + eta * (A @ Z_prev)
    W = w_matrix(Z_next, V, U)

    Zm = Z_prev + eta * (M @ Z_prev)
    G = V.T @ Zm
    H = right_solve(U.T @ Zm, G)
    F = eta * (A @ Z_prev - M @ Z_prev)
    Delta = right_solve(V.T @ F, G)
    Dhat = right_solve(U.T @ F, G)

    lhs = W @ (np.eye(k) - Delta @ Delta)
    rhs = H + (Dhat - H @ Delta) + (-Dhat @ Delta)
    resid = spectral_norm(lhs - rhs) / max(1.0, spectral_norm(W))
    return resid, spectral_norm(Delta)


# ---------------------------------------------------------------------------
# good events


@dataclass(frozen=True)
class GoodEventConfig:
    """Threshold and phase for the running conditioning event.

    Phase 1 monitors the scaled noise-direction products over the finite
    family (one row per support atom); phase 2 monitors ||W_i|| directly.
    """

    gamma: float
    phase: int
    family: np.ndarray | None = None

    def __post_init__(self):
        if not self.gamma >= 1.0:
            raise ConfigError(f"gamma must be >= 1, got {self.gamma}")
        if self.phase not in (1, 2):
            raise ConfigError(f"phase must be 1 or 2, got {self.phase}")


def good_event_monitor(w_trace, config: GoodEventConfig, dist=None) -> np.ndarray:
    """Recompute the indicator sequence from a trace of W matrices.

    w_trace holds W_0, W_1, ... ((d-k) x k arrays; None marks a step whose
    coordinate was singular). The start-of-run clause differs by phase: in
    phase 2 it is ||W_0|| <= 1; in phase 1 it is the pair of checkable
    clauses ||W_0||_F <= sqrt(d) gamma and max over the family of
    ||N W_0||_F <= gamma / (sqrt(2) e). Later steps use ||W_i|| <= gamma
    (phase 2) or max over the family of ||N W_i|| <= gamma (phase 1).
    The full branching family of the reduction argument is a proof device
    and is not monitored; only its first level is.
    """
    fam = config.family
    if config.phase == 1 and fam is None:
        if not isinstance(dist, FiniteSupportDistribution):
            raise UnsupportedDistribution(
                "phase 1 monitoring needs the finite noise family")
        fam = noise_family(dist)
    flags = np.zeros(len(w_trace), dtype=bool)
    if len(w_trace) == 0:
        return flags
    alive = True
    for i, W in enumerate(w_trace):
        if W is None or not np.all(np.isfinite(W)):
            alive = False
        elif i == 0:
            if config.phase == 1:
                d = W.shape[0] + W.shape[1]
                ok = np.linalg.norm(W) <= math.sqrt(d) * config.gamma
                if ok:
                    worst = max(float(np.linalg.norm(fam[j] @ W))
                                for j in range(fam.shape[0]))
                    ok = worst <= config.gamma / DEFAULT_GAMMA
                alive = bool(ok)
            else:
                alive = spectral_norm(W) <= 1.0
        elif alive:
            if config.phase == 1:
                worst = max(spectral_norm(fam[j] @ W) for j in range(fam.shape[0]))
                alive = worst <= config.gamma
            else:
                alive = spectral_norm(W) <= config.gamma
        flags[i] = alive
    return flags


@dataclass
class WDiagnostics:
    """Per-iterate snapshot of the error coordinate and its context."""

    t: int
    W: np.ndarray | None
    w_norm: float
    subspace_dist: float
    good_event: bool
    eta_t: float
    epsilon_t: float


def diagnose_iterate(Z, model, t: int, eta_t: float, good_event: bool,
                     gamma: float | None = None) -> WDiagnostics:
    """Build the WDiagnostics row for one iterate (sentinel on singular V^T Z)."""
    g = DEFAULT_GAMMA if gamma is None else gamma
    from .linalg import gram_schmidt_qr
    Q = gram_schmidt_qr(Z)
    dist = subspace_distance(Q, model.V)
    try:
        W = w_matrix(Z, model.V, model.U)
        w_norm = spectral_norm(W)
    except Singular:
        W, w_norm = None, math.inf
    return WDiagnostics(t=t, W=W, w_norm=w_norm, subspace_dist=dist,
                        good_event=good_event, eta_t=eta_t,
                        epsilon_t=epsilon_t(eta_t, model.noise_bound_M, g))


# ---------------------------------------------------------------------------
# assumptions and closed-form bounds


@dataclass(frozen=True)
class Violation:
    t: int
    condition: str
    value: float
    limit: float


def validate_assumptions(schedule: StepSchedule, model, gamma: float, p: float,
                         t_range, include_p_small: bool = False,
                         include_phase2: bool = False) -> list:
    """Check the step-size conditions the moment recurrences assume.

    Per step: epsilon_t <= 1/2, eta_t ||M|| <= 1/2, and the decay-ratio
    condition exp(-eta_t rho_k / 4) <= epsilon_t / epsilon_{t-1} (skipped at
    t <= 1 and under zero noise, where both sides degenerate). The
    p-smallness condition p epsilon_t^2 <= eta_t rho_k / 50 and the
    schedule-level alpha/beta couplings are opt-in: both are far out of reach
    at desk scale and would otherwise drown every report in known
    violations.
    """
    Mb = model.noise_bound_M
    nm = model.spectral_norm
    g = gamma
    out = []
    for t in t_range:
        t = int(t)
        if t < 1:
            continue
        eta = schedule.eta(t)
        eps = epsilon_t(eta, Mb, g)
        if not eps <= 0.5:
            out.append(Violation(t, "epsilon_le_half", eps, 0.5))
        if not eta * nm <= 0.5:
            out.append(Violation(t, "eta_norm_le_half", eta * nm, 0.5))
        if t >= 2:
            eps_prev = epsilon_t(schedule.eta(t - 1), Mb, g)
            if eps_prev > 0:
                ratio = eps / eps_prev
                floor = math.exp(-eta * schedule.rho_k / 4.0)
                if not floor <= ratio + 1e-15:
                    out.append(Violation(t, "ratio_decay", ratio, floor))
        if include_p_small:
            if not p * eps * eps <= eta * schedule.rho_k / 50.0:
                out.append(Violation(t, "p_small", p * eps * eps,
                                     eta * schedule.rho_k / 50.0))
    if include_phase2:
        if not schedule.alpha >= 8.0:
            out.append(Violation(-1, "alpha_ge_8", schedule.alpha, 8.0))
        beta_floor = 4.0 * (1.0 + DEFAULT_GAMMA) * schedule.alpha / rho_bar(model)
        if not schedule.beta >= beta_floor:
            out.append(Violation(-1, "beta_floor", schedule.beta, beta_floor))
    return out


_VARIANTS = ("full", "small_p", "prefix", "phase2_poly")


def recursion_bound(t: int, schedule: StepSchedule, model, p: float, k: int,
                    w0_bound: float, variant: str, gamma: float | None = None,
                    ell: int = 1, validate: bool = True) -> float:
    """Closed-form ceiling for the conditioned second moment at step t.

    Variants:
      "full"        e^{-s_t rho} w0^2 + C1 p eps_t^2 sum_{i<t} B_i
                                      + C2 p k^{2/p} eps_t^2 t,
                    with B_i the same bound evaluated at earlier steps
                    (the unrolled recurrence keeps its own partial sums);
      "small_p"     e^{-s_t rho / 2} w0^2 + C2 p k^{2/p} eps_t^2 t;
      "prefix"      ell gamma^2/(2e^2) e^{-t eta rho / 2}
                                      + C4 p gamma^2 eps^2 t (burn-in form);
      "phase2_poly" k^{2/p} ((beta+1)/(beta+t))^alpha
                                      + p k^{2/p} (C3 alpha / rho_bar)^2 t/(beta+t)^2.

    s_t is the partial step-size sum. With validate on, the per-step
    conditions are checked at t itself and AssumptionViolated carries the
    failures; the p-smallness hypothesis of the small_p variant is the
    caller's to check (it never holds at desk scale, see
    validate_assumptions).
    """
    if variant not in _VARIANTS:
        raise ConfigError(f"unknown bound variant {variant!r}")
    if t < 0:
        raise InvalidShape(f"t must be >= 0, got {t}")
    if not p >= 2:
        raise InvalidP(f"p must be >= 2, got {p}")
    g = DEFAULT_GAMMA if gamma is None else gamma
    rho = schedule.rho_k
    Mb = model.noise_bound_M

    if validate and t >= 1 and variant in ("full", "small_p"):
        bad = validate_assumptions(schedule, model, g, p, [t])
        if bad:
            raise AssumptionViolated(
                "; ".join(f"{v.condition} at t={v.t}: {v.value:.3g} vs {v.limit:.3g}"
                          for v in bad))

    k2p = float(k) ** (2.0 / p)
    if variant == "phase2_poly":
        rb = rho_bar(model)
        head = k2p * ((schedule.beta + 1.0) / (schedule.beta + t)) ** schedule.alpha
        tail = p * k2p * (C3 * schedule.alpha / rb) ** 2 * t / (schedule.beta + t) ** 2
        return head + tail
    if variant == "prefix":
        if schedule.t0 > 0:
            eta = schedule.phase1_eta
        else:
            eta = schedule.eta(max(t, 1))
        eps = epsilon_t(eta, Mb, g)
        head = ell * g * g / (2.0 * math.e ** 2) * math.exp(-t * eta * rho / 2.0)
        return head + C4 * p * g * g * eps * eps * t

    if t == 0:
        return w0_bound * w0_bound
    s = schedule.cumulative_eta(t)
    eps = epsilon_t(schedule.eta(t), Mb, g)
    if variant == "small_p":
        return math.exp(-s[t - 1] * rho / 2.0) * w0_bound ** 2 + C2 * p * k2p * eps * eps * t
    # full: unroll with stored partials
    partials = np.empty(t + 1)
    partials[0] = w0_bound * w0_bound
    run_sum = partials[0]
    for i in range(1, t + 1):
        eps_i = epsilon_t(schedule.eta(i), Mb, g)
        partials[i] = (math.exp(-s[i - 1] * rho) * w0_bound ** 2
                       + C1 * p * eps_i * eps_i * run_sum
                       + C2 * p * k2p * eps_i * eps_i * i)
        run_sum += partials[i]
    return float(partials[t])


def phase2_highprob_bound(beta: float, T: int) -> float:
    """2e sqrt((beta+1)/(beta+T)): the with-probability-(1-delta) error level
    of the decaying-step phase."""
    if T < 1:
        raise InvalidShape(f"T must be >= 1, got {T}")
    if beta < 0:
        raise InvalidShape(f"beta must be >= 0, got {beta}")
    return 2.0 * math.e * math.sqrt((beta + 1.0) / (beta + T))


def bernstein_offline_bound(M_bound: float, rho_k: float, d: int, delta: float,
                            T: int, C: float = 1.0) -> float:
    """Offline batch-eigenvector error level C (M/rho) sqrt(log(d/delta)/T)."""
    from .errors import InvalidDelta
    if not 0 < delta < 1:
        raise InvalidDelta(f"need 0 < delta < 1, got {delta}")
    if T < 1:
        raise InvalidShape(f"T must be >= 1, got {T}")
    if not C > 0:
        raise InvalidShape(f"C must be positive, got {C}")
    return C * (M_bound / rho_k) * math.sqrt(math.log(d / delta) / T)


def offline_baseline(samples, k: int, model=None):
    """Top-k eigenvectors of the empirical average of the samples.

    Returns (V_hat, dist) where dist is the subspace distance to the model's
    V when a model is given, else None. An empirical eigenvalue tie at the
    cut position is reported as ZeroGap.
    """
    if len(samples) == 0:
        raise InvalidShape("need at least one sample")
    A0 = as_matrix(samples[0], "sample")
    acc = np.zeros_like(A0)
    for i, A in enumerate(samples):
        A = as_matrix(A, "sample")
        if A.shape != A0.shape:
            raise DimensionMismatch(
                f"sample {i} has shape {A.shape}, expected {A0.shape}")
        acc += A
    Abar = acc / len(samples)
    Abar = 0.5 * (Abar + Abar.T)
    dec = symmetric_eigendecompose(Abar)
    d = Abar.shape[0]
    if not 1 <= k <= d:
        raise InvalidShape(f"need 1 <= k <= d, got k = {k}, d = {d}")
    if k < d:
        scale = max(abs(dec.eigenvalues[0]), 1e-300)
        if dec.eigenvalues[k - 1] - dec.eigenvalues[k] <= 1e-12 * scale:
            raise ZeroGap(
                f"empirical spectrum ties at position {k}: "
                f"{dec.eigenvalues[k - 1]:.6g} vs {dec.eigenvalues[k]:.6g}")
    V_hat = dec.eigenvectors[:, :k].copy()
    dist = subspace_distance(V_hat, model.V) if model is not None else None
    return V_hat, dist


# ---------------------------------------------------------------------------
# Monte Carlo norm estimation

# Batched reduction helpers. These run under the LAPACK exception documented
# in the module docstring; tests pin them against the public Jacobi path.


def _batch_svdvals(mats: np.ndarray) -> np.ndarray:
    return np.linalg.svd(mats, compute_uv=False)


def _schatten_pow_sums(sig_sq: np.ndarray, p: float) -> np.ndarray:
    """sum_i sigma_i^p from rows of squared singular values."""
    if not p >= 2:
        raise InvalidP(f"p must be >= 2, got {p}")
    return np.power(sig_sq, p / 2.0).sum(axis=-1)


def _moment_sq_from_pows(pows: np.ndarray, p: float):
    """((1/N) sum pows)^{2/p} with its delta-method standard error."""
    n = pows.shape[0]
    mu = float(np.mean(pows))
    se_mu = float(np.std(pows, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    if mu <= 0.0:
        return 0.0, 0.0
    val = mu ** (2.0 / p)
    return val, (2.0 / p) * mu ** (2.0 / p - 1.0) * se_mu


def lp_norm_estimate(matrix_sampler, p: float, trials: int, seed: int = 0):
    """Monte Carlo (E ||X||_p^p)^{1/p} with a delta-method standard error.

    matrix_sampler(rng) -> matrix is called once per trial against a
    generator derived from the seed.
    """
    if not p >= 2:
        raise InvalidP(f"p must be >= 2, got {p}")
    if trials < 1:
        raise InvalidShape(f"trials must be >= 1, got {trials}")
    rng = make_generator(seed)
    mats = np.stack([as_matrix(matrix_sampler(rng), "sample")
                     for _ in range(trials)])
    pows = _schatten_pow_sums(_batch_svdvals(mats) ** 2, p)
    mu = float(np.mean(pows))
    se_mu = float(np.std(pows, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    if mu <= 0.0:
        return 0.0, 0.0
    est = mu ** (1.0 / p)
    return est, (1.0 / p) * mu ** (1.0 / p - 1.0) * se_mu


def conditioned_moment_sq(sig_sq: np.ndarray, good: np.ndarray, p: float):
    """(E[||W||_p^p 1])^{2/p} from stacked squared singular values and flags.

    Excluded trials contribute zero, which is exactly the multiply-by-the-
    indicator convention of the moment recurrences.
    """
    pows = np.where(good, _schatten_pow_sums(np.where(good[:, None], sig_sq, 0.0), p), 0.0)
    return _moment_sq_from_pows(pows, p)


def default_p_grid(k: int, delta: float) -> list:
    """The grid the moment checks run on: small even p plus log(6k/delta)."""
    return [2.0, 4.0, 8.0, max(2.0, math.log(6.0 * k / delta))]


# ---------------------------------------------------------------------------
# certificates


@dataclass
class RecursionCertificate:
    """One bound-vs-simulation comparison at a recorded step."""

    t: int
    lhs_estimate: float
    lhs_stderr: float
    rhs: float
    p: float
    variant: str
    constants: dict = field(default_factory=dict)
    satisfied: bool = True


def certify_recursion(suite, schedule: StepSchedule, model, p: float,
                      variant: str = "small_p", gamma: float | None = None,
                      ts=None, validate: bool = True) -> list:
    """Compare the Monte Carlo conditioned moment against the chosen bound at
    each recorded step of a suite. w0 for the bound is taken from the suite's
    own step-0 moment, matching the bound's ||W_0 1_0|| anchor. A step is
    satisfied when the estimate minus two standard errors stays below the
    bound value.
    """
    consts = {"C1": C1, "C2": C2, "C4": C4, "C3": C3}
    m0, _ = conditioned_moment_sq(suite.w_sig_sq[:, 0, :], suite.good_event[:, 0], p)
    w0 = math.sqrt(m0)
    out = []
    want = None if ts is None else set(int(t) for t in ts)
    for r, t in enumerate(suite.ts):
        t = int(t)
        if want is not None and t not in want:
            continue
        lhs, se = conditioned_moment_sq(suite.w_sig_sq[:, r, :],
                                        suite.good_event[:, r], p)
        rhs = recursion_bound(t, schedule, model, p, suite.k, w0, variant,
                              gamma=gamma, validate=validate)
        out.append(RecursionCertificate(
            t=t, lhs_estimate=lhs, lhs_stderr=se, rhs=rhs, p=p,
            variant=variant, constants=consts,
            satisfied=bool(lhs - 2.0 * se <= rhs)))
    return out


BOUND_CSV_HEADER = "t,bound_variant,value,mc_estimate,mc_stderr"


def bound_curve_csv(certs) -> str:
    """Serialize certificates to the bound-curve CSV schema."""
    lines = [BOUND_CSV_HEADER]
    for c in certs:
        lines.append("%d,%s,%.17g,%.17g,%.17g"
                     % (c.t, c.variant, c.rhs, c.lhs_estimate, c.lhs_stderr))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# one-step contraction


@dataclass
class OneStepReport:
    t: int
    p: float
    K1: float
    K2: float
    prev_moment: float
    prev_stderr: float
    next_moment: float
    next_stderr: float
    slack: float
    ok: bool


def one_step_constants(eta: float, model, p: float, k: int,
                       gamma: float | None = None):
    """(K1, K2) of the single-step moment contraction at step size eta."""
    g = DEFAULT_GAMMA if gamma is None else gamma
    eps = epsilon_t(eta, model.noise_bound_M, g)
    lam_k = model.eigenvalues[k - 1]
    lam_next = model.eigenvalues[k] if k < model.d else 0.0
    contraction = ((1.0 + eta * lam_next) / (1.0 + eta * lam_k)) ** 2
    K1 = (1.0 + 5.0 * eps * eps) * (contraction + 8.0 * p * eps * eps)
    K2 = 5.0 * p * float(k) ** (2.0 / p) * eps * eps
    return K1, K2


def one_step_check(t: int, p: float, K1: float, K2: float,
                   prev_moment: float, prev_stderr: float,
                   next_moment: float, next_stderr: float,
                   sigmas: float = 2.0) -> OneStepReport:
    """next <= K1 prev + K2 with statistical slack on both estimates."""
    slack = sigmas * (next_stderr + K1 * prev_stderr)
    ok = next_moment <= K1 * prev_moment + K2 + slack
    return OneStepReport(t=t, p=p, K1=K1, K2=K2,
                         prev_moment=prev_moment, prev_stderr=prev_stderr,
                         next_moment=next_moment, next_stderr=next_stderr,
                         slack=slack, ok=bool(ok))


# ---------------------------------------------------------------------------
# uniform smoothness


@dataclass
class SmoothnessReport:
    p: float
    lam: float | None
    trials: int
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    margin: float
    stderr: float
    violation: bool


def smoothness_check(triple_sampler, p: float, lam: float | None,
                     trials: int, seed: int = 0) -> SmoothnessReport:
    """Monte Carlo check of the Schatten smoothness inequalities.

    triple_sampler(rng) -> (X, Y, Z). Conditional centering of Y is enforced
    here, not assumed: each draw contributes both sign branches
    ||X + Y + Z||_p^p and ||X - Y + Z||_p^p with equal weight, so the
    effective Y is centered given (X, Z) by construction. With lam set the
    three-term bound (1+lam)(||X||^2 + (p-1)||Y||^2 + ||Z||^2/lam) is used;
    lam = None selects the two-term bound, which requires Z == 0.

    The margin rhs - lhs is reported with a conservative combined standard
    error (sum, not quadrature: the two sides share draws); a violation is
    flagged only beyond 3 of those.
    """
    if not p >= 2:
        raise InvalidP(f"p must be >= 2, got {p}")
    if lam is not None and not lam > 0:
        raise ConfigError(f"lam must be positive (or None), got {lam}")
    if trials < 2:
        raise InvalidShape(f"trials must be >= 2, got {trials}")
    rng = make_generator(seed)
    Xs, Ys, Zs = [], [], []
    for _ in range(trials):
        X, Y, Z = triple_sampler(rng)
        Xs.append(as_matrix(X, "X"))
        Ys.append(as_matrix(Y, "Y"))
        Zs.append(as_matrix(Z, "Z"))
    X = np.stack(Xs)
    Y = np.stack(Ys)
    Z = np.stack(Zs)
    if lam is None and float(np.abs(Z).max()) != 0.0:
        raise PreconditionFailed("two-term bound (lam = None) requires Z == 0")

    def pow_sums(mats):
        return _schatten_pow_sums(_batch_svdvals(mats) ** 2, p)

    lhs_pows = 0.5 * (pow_sums(X + Y + Z) + pow_sums(X - Y + Z))
    lhs, lhs_se = _moment_sq_from_pows(lhs_pows, p)
    x_sq, x_se = _moment_sq_from_pows(pow_sums(X), p)
    y_sq, y_se = _moment_sq_from_pows(pow_sums(Y), p)
    if lam is None:
        rhs = x_sq + (p - 1.0) * y_sq
        rhs_se = x_se + (p - 1.0) * y_se
    else:
        z_sq, z_se = _moment_sq_from_pows(pow_sums(Z), p)
        rhs = (1.0 + lam) * (x_sq + (p - 1.0) * y_sq + z_sq / lam)
        rhs_se = (1.0 + lam) * (x_se + (p - 1.0) * y_se + z_se / lam)
    margin = rhs - lhs
    stderr = lhs_se + rhs_se
    # the floating-point floor keeps exact-equality cases (stderr = 0)
    # from flagging on roundoff
    floor = TOL_EIG * max(abs(lhs), abs(rhs), 1.0)
    return SmoothnessReport(p=p, lam=lam, trials=trials, lhs=lhs,
                            lhs_stderr=lhs_se, rhs=rhs, rhs_stderr=rhs_se,
                            margin=margin, stderr=stderr,
                            violation=bool(margin < -(3.0 * stderr + floor)))


# ---------------------------------------------------------------------------
# frame stability and the ghost reduction


def stability_bound_check(U, V, U_hat, V_hat, S):
    """Transfer of the error coordinate between two orthonormal splits.

    Preconditions (PreconditionFailed names the failing one): (V, U) and
    (V_hat, U_hat) are complementary orthonormal splits, the splits are
    close in the sense ||U^T V_hat|| <= 1/2, and the hat-coordinate
    gamma_hat = ||U_hat^T S (V_hat^T S)^{-1}|| is at most 1. Returns
    (lhs, rhs, ok) with lhs = ||U^T S (V^T S)^{-1}|| and
    rhs = (2 + 4 gamma_hat)/(3 - 2 gamma_hat).
    """
    U = as_matrix(U, "U")
    V = as_matrix(V, "V")
    U_hat = as_matrix(U_hat, "U_hat")
    V_hat = as_matrix(V_hat, "V_hat")
    S = as_matrix(S, "S")
    d = V.shape[0]
    eye = np.eye(d)
    if spectral_norm(U @ U.T + V @ V.T - eye) > 1e-8:
        raise PreconditionFailed("U U^T + V V^T != I for the plain frames")
    if spectral_norm(U_hat @ U_hat.T + V_hat @ V_hat.T - eye) > 1e-8:
        raise PreconditionFailed("U U^T + V V^T != I for the hat frames")
    cross = spectral_norm(U.T @ V_hat)
    if cross > 0.5:
        raise PreconditionFailed(f"||U^T V_hat|| = {cross:.3g} > 1/2")
    gamma_hat = spectral_norm(w_matrix(S, V_hat, U_hat))
    if gamma_hat > 1.0:
        raise PreconditionFailed(f"gamma_hat = {gamma_hat:.3g} > 1")
    lhs = spectral_norm(w_matrix(S, V, U))
    rhs = (2.0 + 4.0 * gamma_hat) / (3.0 - 2.0 * gamma_hat)
    return lhs, rhs, bool(lhs <= rhs + TOL_EIG)


@dataclass
class BernsteinWedinReport:
    m: int
    deviation: float
    deviation_limit: float
    rho_hat: float
    rho_limit: float
    cross: float
    cross_limit: float
    ok: bool


def bernstein_wedin_check(dist, delta: float, seed: int = 0,
                          m: int | None = None) -> BernsteinWedinReport:
    """Empirical-mean consequences at the coupling sample size.

    Draws m samples (default ceil(35 (M/rho)^2 log(2d/delta)), the size at
    which the matrix concentration argument applies), forms the empirical
    mean, and checks the three conclusions: ||Mhat - M|| <= rho/4,
    rho_hat_k >= rho/2, and ||U^T V_hat|| <= 1/3. Each holds with
    probability at least 1 - delta, so a single report can legitimately
    fail about a delta fraction of the time.
    """
    if not isinstance(dist, FiniteSupportDistribution):
        raise UnsupportedDistribution("empirical-mean check needs finite support")
    model = dist.model
    rho, Mb, d, k = model.rho_k, model.noise_bound_M, model.d, model.k
    if m is None:
        m = math.ceil(35.0 * (Mb / rho) ** 2 * math.log(2.0 * d / delta))
    rng = make_generator(seed)
    idx = np.searchsorted(dist.cum_weights, rng.random(m), side="right")
    counts = np.bincount(idx, minlength=dist.n_atoms).astype(float)
    Mhat = np.einsum("j,jde->de", counts / m, dist.atoms)
    Mhat = 0.5 * (Mhat + Mhat.T)
    dev = spectral_norm(Mhat - model.M)
    dec = symmetric_eigendecompose(Mhat)
    rho_hat = dec.eigenvalues[k - 1] - dec.eigenvalues[k] if k < d else dec.eigenvalues[k - 1]
    V_hat = dec.eigenvectors[:, :k]
    cross = spectral_norm(model.U.T @ V_hat)
    ok = dev <= rho / 4.0 and rho_hat >= rho / 2.0 and cross <= 1.0 / 3.0
    return BernsteinWedinReport(m=m, deviation=dev, deviation_limit=rho / 4.0,
                                rho_hat=rho_hat, rho_limit=rho / 2.0,
                                cross=cross, cross_limit=1.0 / 3.0, ok=bool(ok))


def iid_tuple_law(weights, T0: int) -> dict:
    """Law of T0 i.i.d. index draws as a dict over index tuples."""
    w = np.asarray(weights, dtype=float)
    if T0 < 1:
        raise InvalidShape(f"T0 must be >= 1, got {T0}")
    n = w.size
    if float(n) ** T0 > 1e6:
        raise TooLarge(f"{n}^{T0} outcomes exceed the enumeration cap")
    out = {}
    idx = np.indices((n,) * T0).reshape(T0, -1).T
    for tup in idx:
        out[tuple(int(i) for i in tup)] = float(np.prod(w[tup]))
    return out


def ghost_tuple_law(weights, m: int, T0: int) -> dict:
    """Law of T0 uniform with-replacement draws from a bag of m i.i.d. atoms,
    marginalized over the bag.

    Conditioned on the bag composition the draws are i.i.d. with the
    empirical frequencies, so the tuple law is a mixture of product laws;
    the distance to the true product law is driven by slot collisions,
    hence the T0^2/(2m) coupling cost. Enumerates bag compositions times
    tuple outcomes, so it is only for small cases (TooLarge otherwise).
    """
    from itertools import product
    from math import comb, factorial

    w = np.asarray(weights, dtype=float)
    n = w.size
    if T0 < 1 or m < 1:
        raise InvalidShape(f"need m >= 1 and T0 >= 1, got m = {m}, T0 = {T0}")
    n_comp = comb(m + n - 1, n - 1)
    if n_comp * float(n) ** T0 > 1e6:
        raise TooLarge("bag enumeration exceeds the cap")

    def compositions(total, parts):
        if parts == 1:
            yield (total,)
            return
        for head in range(total + 1):
            for rest in compositions(total - head, parts - 1):
                yield (head,) + rest

    out = {}
    for comp_counts in compositions(m, n):
        # multinomial probability of this bag composition
        p_bag = factorial(m)
        for c, wi in zip(comp_counts, w):
            p_bag = p_bag / factorial(c) * wi ** c
        if p_bag == 0.0:
            continue
        freq = [c / m for c in comp_counts]
        for tup in product(range(n), repeat=T0):
            p_draw = 1.0
            for i in tup:
                p_draw *= freq[i]
            if p_draw > 0.0:
                out[tup] = out.get(tup, 0.0) + p_bag * p_draw
    return out


def tv_exact(law_a, law_b) -> float:
    """Total variation (1/2) sum |p_a - p_b| between two enumerable laws."""
    keys = set(law_a) | set(law_b)
    if len(keys) > 10 ** 6:
        raise TooLarge(f"{len(keys)} outcomes exceed the enumeration cap")
    return 0.5 * sum(abs(law_a.get(x, 0.0) - law_b.get(x, 0.0)) for x in keys)


# ---------------------------------------------------------------------------
# initialization scaling


@dataclass
class InitScalingReport:
    d: int
    k: int
    trials: int
    w_quantiles: dict
    inv_quantiles: dict
    median_w: float
    median_band: tuple
    median_ok: bool
    tail_checks: list
    ok: bool


_PROBE_QS = (0.1, 0.25, 0.5, 0.75, 0.9)


def init_scaling_probe(d: int, k: int, trials: int, seed: int = 0) -> InitScalingReport:
    """Distribution of the initial error coordinate under Gaussian starts.

    Measures ||W_0|| and ||(V^T Z_0)^{-1}||_2 over Gaussian Z_0 against the
    canonical split (V = first k coordinates; rotation-invariant, so the
    choice is free). Checks the inverse-norm tail P[norm >= 6 sqrt(k)/delta]
    <= delta at delta in {0.1, 0.5} with 3-sigma binomial slack, and that
    the median ||W_0|| sits in the expected sqrt(dk) band.
    """
    if trials < 100:
        raise InvalidShape(f"trials must be >= 100, got {trials}")
    if not 1 <= k <= d:
        raise InvalidShape(f"need 1 <= k <= d, got d = {d}, k = {k}")
    if d == k:
        qz = {q: 0.0 for q in _PROBE_QS}
        return InitScalingReport(d=d, k=k, trials=trials, w_quantiles=dict(qz),
                                 inv_quantiles=dict(qz), median_w=0.0,
                                 median_band=(0.0, 0.0), median_ok=True,
                                 tail_checks=[], ok=True)
    rng = make_generator(seed)
    w_norms = np.empty(trials)
    inv_norms = np.empty(trials)
    for i in range(trials):
        Z0 = rng.standard_normal((d, k))
        G = Z0[:k, :]
        sig = svd(G).singular_values
        smin = sig[-1]
        if smin <= 0.0:
            inv_norms[i] = math.inf
            w_norms[i] = math.inf
            continue
        inv_norms[i] = 1.0 / smin
        w_norms[i] = spectral_norm(right_solve(Z0[k:, :], G))
    w_q = {q: float(np.quantile(w_norms, q)) for q in _PROBE_QS}
    inv_q = {q: float(np.quantile(inv_norms, q)) for q in _PROBE_QS}
    median_w = w_q[0.5]
    band = (0.2 * math.sqrt(d * k), 5.0 * math.sqrt(d * k))
    median_ok = band[0] <= median_w <= band[1]
    tail_checks = []
    all_ok = median_ok
    for delta in (0.1, 0.5):
        thresh = 6.0 * math.sqrt(k) / delta
        emp = float(np.mean(inv_norms >= thresh))
        slack = 3.0 * math.sqrt(delta * (1.0 - delta) / trials)
        ok = emp <= delta + slack
        tail_checks.append({"delta": delta, "threshold": thresh,
                            "empirical": emp, "limit": delta + slack, "ok": ok})
        all_ok = all_ok and ok
    return InitScalingReport(d=d, k=k, trials=trials, w_quantiles=w_q,
                             inv_quantiles=inv_q, median_w=median_w,
                             median_band=band, median_ok=median_ok,
                             tail_checks=tail_checks, ok=bool(all_ok))


def fit_power_slope(xs, ys):
    """Least-squares slope and intercept of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    keep = (xs > 0) & (ys > 0)
    if keep.sum() < 2:
        raise InvalidShape("need at least two positive points for a slope")
    slope, intercept = np.polyfit(np.log(xs[keep]), np.log(ys[keep]), 1)
    return float(slope), float(intercept)
