"""Distributions over symmetric matrix samples with known ground truth.

A sample stream is an i.i.d. sequence A_1, A_2, ... of symmetric d x d
matrices with mean M. Every distribution here carries its own SpectralModel:
the top-k eigenbasis V of M, the complement U, the spectral gap rho_k, and an
almost-sure bound on the Ky Fan (2,k) norm of A - M. Two families are
provided (explicit finite support, and a clipped low-rank Gaussian noise
model), plus the reduction that replaces an arbitrary distribution by the
empirical law of a pre-drawn atom pool.

Distribution values are immutable after construction (arrays are marked
read-only) and safe to share across workers; stream handles are sequential
single-owner cursors.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadWeights,
    ConfigError,
    DimensionMismatch,
    InvalidK,
    InvalidRank,
    InvalidShape,
    NotSymmetric,
    UnsupportedDistribution,
    ZeroGap,
)
from .linalg import TOL_SYM, as_matrix, gram_schmidt_qr, symmetric_eigendecompose
from .rng import derive_seed, make_generator

# Slack on exact-arithmetic identities (weights summing to one, finite-support
# means, zero gaps) where only accumulated rounding is tolerable.
EXACT_TOL = 1e-12


def _ky_fan_sym(S: np.ndarray, k: int) -> float:
    """Ky Fan (2,k) norm of a symmetric matrix via its eigenvalues.

    Fast path for construction-time clipping and exhaustive audits, where the
    sweep-based SVD would dominate the budget; equality with the public norm
    is pinned by tests.
    """
    vals = np.linalg.eigvalsh(S)
    sq = np.sort(vals * vals)[::-1]
    return float(np.sqrt(np.sum(sq[:k])))


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralModel:
    """Ground truth attached to a sample distribution.

    M is the mean matrix, eigenvalues its full spectrum (descending), V the
    top-k eigenvector frame, U the orthogonal complement frame, rho_k the gap
    lambda_k - lambda_{k+1}, and noise_bound_M an almost-sure bound on
    ky_fan_2k(A - M, k) over the support.
    """

    M: np.ndarray
    eigenvalues: np.ndarray
    V: np.ndarray
    U: np.ndarray
    k: int
    rho_k: float
    noise_bound_M: float

    @property
    def d(self) -> int:
        return self.M.shape[0]

    @property
    def spectral_norm(self) -> float:
        """Operator norm of M, read off the spectrum."""
        return float(np.max(np.abs(self.eigenvalues)))


def model_from_mean(M, k: int, noise_bound: float) -> SpectralModel:
    """Build a SpectralModel by eigendecomposing the mean matrix."""
    M = as_matrix(M, "M")
    d = M.shape[0]
    if M.shape[0] != M.shape[1]:
        raise InvalidShape(f"mean must be square, got {M.shape}")
    if not 1 <= k < d:
        raise InvalidK(f"need 1 <= k < d = {d}, got k = {k}")
    dec = symmetric_eigendecompose(M)
    vals = dec.eigenvalues
    rho = float(vals[k - 1] - vals[k])
    scale = max(float(np.max(np.abs(vals))), 1.0)
    if rho <= EXACT_TOL * scale:
        raise ZeroGap(f"lambda_{k} - lambda_{k + 1} = {rho:.3e} is not positive")
    return SpectralModel(
        M=_freeze(0.5 * (M + M.T)),
        eigenvalues=_freeze(vals),
        V=_freeze(dec.eigenvectors[:, :k]),
        U=_freeze(dec.eigenvectors[:, k:]),
        k=k,
        rho_k=rho,
        noise_bound_M=float(noise_bound),
    )


class FiniteSupportDistribution:
    """Uniform-or-weighted law over an explicit list of symmetric atoms.

    The mean and the noise bound are exact finite sums, which is what makes
    this family the workhorse for verification: every almost-sure statement
    becomes an enumerable check over the atoms.
    """

    kind = "finite_support"

    def __init__(self, atoms, weights, k: int, model: SpectralModel | None = None,
                 validate: bool = True, coupling_tv_bound: float | None = None):
        atoms = np.asarray(atoms, dtype=float)
        if atoms.ndim != 3 or atoms.shape[1] != atoms.shape[2]:
            raise InvalidShape(f"atoms must be (n, d, d), got {atoms.shape}")
        n, d, _ = atoms.shape
        if n == 0:
            raise InvalidShape("empty support")
        if not np.all(np.isfinite(atoms)):
            raise InvalidShape("atoms contain non-finite entries")
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (n,):
            raise DimensionMismatch(f"{n} atoms but weight shape {weights.shape}")
        if np.any(weights < 0) or abs(float(weights.sum()) - 1.0) > EXACT_TOL:
            raise BadWeights(f"weights must be nonnegative and sum to 1, got sum {weights.sum()!r}")
        if validate:
            for j in range(n):
                defect = float(np.linalg.norm(atoms[j] - atoms[j].T))
                if defect > TOL_SYM * max(float(np.linalg.norm(atoms[j])), 1.0):
                    raise NotSymmetric(f"atom {j} has symmetry defect {defect:.3e}")
        self.atoms = _freeze(atoms)
        self.weights = _freeze(weights)
        cum = np.cumsum(weights)
        cum[-1] = 1.0  # guard the float tail so every u < 1 lands on an atom
        self.cum_weights = _freeze(cum)
        self.n_atoms = n
        self.d = d
        if model is None:
            mean = np.einsum("j,jab->ab", weights, atoms)
            mean = 0.5 * (mean + mean.T)
            noise = max(_ky_fan_sym(atoms[j] - mean, k) for j in range(n))
            model = model_from_mean(mean, k, noise)
        self.model = model
        self.k = model.k
        self.coupling_tv_bound = coupling_tv_bound

    def draw_index(self, rng: np.random.Generator) -> int:
        return int(np.searchsorted(self.cum_weights, rng.random(), side="right"))

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return self.atoms[self.draw_index(rng)]


class BoundedNoiseDistribution:
    """A = M + s * E with E a clipped random low-rank symmetric perturbation.

    E is built from two independent d x noise_rank Gaussian factors G, P as
    (G P^T + P G^T)/2, rescaled whenever its Ky Fan (2,k) norm exceeds
    noise_scale (so the Assumption-style almost-sure bound holds exactly),
    and then multiplied by an independent sign s. Clipping happens before the
    sign draw, so the sign symmetry makes every draw mean-zero regardless of
    how often the clip engages.
    """

    kind = "bounded_noise"

    def __init__(self, model: SpectralModel, noise_scale: float, noise_rank: int):
        d = model.d
        if not 1 <= noise_rank <= d:
            raise InvalidRank(f"need 1 <= noise_rank <= {d}, got {noise_rank}")
        if noise_scale < 0:
            raise InvalidShape(f"noise_scale must be nonnegative, got {noise_scale}")
        self.model = model
        self.noise_scale = float(noise_scale)
        self.noise_rank = int(noise_rank)
        self.d = d
        self.k = model.k

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        d, r = self.d, self.noise_rank
        G = rng.standard_normal((d, r))
        P = rng.standard_normal((d, r))
        s = 1.0 if rng.random() < 0.5 else -1.0
        E = 0.5 * (G @ P.T + P @ G.T)
        kf = _ky_fan_sym(E, self.k)
        if kf > self.noise_scale:
            E *= self.noise_scale / kf if kf > 0 else 0.0
        return self.model.M + s * E


class StreamHandle:
    """Sequential cursor over a distribution: one sample per call, counted."""

    def __init__(self, dist, seed: int | None = None, rng: np.random.Generator | None = None):
        if rng is None:
            if seed is None:
                raise ConfigError("StreamHandle needs a seed or an explicit generator")
            rng = make_generator(seed)
        self.dist = dist
        self.seed = seed
        self.rng = rng
        self.draws = 0

    def next_sample(self) -> np.ndarray:
        self.draws += 1
        return self.dist.sample(self.rng)


def make_finite_support(atoms, weights, k: int) -> FiniteSupportDistribution:
    """Finite-support distribution with exact mean and exact noise bound."""
    return FiniteSupportDistribution(atoms, weights, k)


def make_bounded_noise_model(eigenvalues, k: int, noise_scale: float, noise_rank: int,
                             d: int, seed: int = 0) -> BoundedNoiseDistribution:
    """Parametric instance: M = Q diag(eigenvalues) Q^T for a seeded random
    orthogonal Q, plus clipped low-rank noise."""
    vals = np.asarray(eigenvalues, dtype=float)
    if vals.shape != (d,):
        raise InvalidShape(f"need {d} eigenvalues, got shape {vals.shape}")
    if np.any(np.diff(vals) > 0):
        raise InvalidShape("eigenvalues must be sorted descending")
    if not 1 <= k < d:
        raise InvalidK(f"need 1 <= k < d = {d}, got k = {k}")
    rho = float(vals[k - 1] - vals[k])
    if rho <= EXACT_TOL * max(float(np.max(np.abs(vals))), 1.0):
        raise ZeroGap(f"lambda_{k} - lambda_{k + 1} = {rho:.3e}")
    g = make_generator(derive_seed(seed, 0))
    Q = gram_schmidt_qr(g.standard_normal((d, d)))
    M = Q @ np.diag(vals) @ Q.T
    M = 0.5 * (M + M.T)
    model = SpectralModel(
        M=_freeze(M),
        eigenvalues=_freeze(vals),
        V=_freeze(Q[:, :k]),
        U=_freeze(Q[:, k:]),
        k=k,
        rho_k=rho,
        noise_bound_M=float(noise_scale),
    )
    return BoundedNoiseDistribution(model, noise_scale, noise_rank)


def make_spiked_support(eigenvalues, k: int, noise_scale: float, n_pairs: int = 4,
                        seed: int = 0) -> FiniteSupportDistribution:
    """Finite-support instance in the eigenbasis: M = diag(eigenvalues) and
    atoms M + E_j, M - E_j for dense random symmetric E_j rescaled so every
    ky_fan_2k(E_j, k) equals noise_scale.

    Keeping V and U as identity slices makes every diagnostic exact, and the
    pairing makes the mean exactly M with no cancellation error.
    """
    vals = np.asarray(eigenvalues, dtype=float)
    d = vals.shape[0]
    if vals.ndim != 1 or d < 2:
        raise InvalidShape(f"need a 1-d spectrum with d >= 2, got shape {vals.shape}")
    if np.any(np.diff(vals) > 0):
        raise InvalidShape("eigenvalues must be sorted descending")
    if not 1 <= k < d:
        raise InvalidK(f"need 1 <= k < d = {d}, got k = {k}")
    rho = float(vals[k - 1] - vals[k])
    if rho <= EXACT_TOL * max(float(np.max(np.abs(vals))), 1.0):
        raise ZeroGap(f"lambda_{k} - lambda_{k + 1} = {rho:.3e}")
    if n_pairs < 1:
        raise InvalidShape(f"need n_pairs >= 1, got {n_pairs}")
    M = np.diag(vals)
    eye = np.eye(d)
    if noise_scale == 0.0:
        atoms = M[None, :, :]
        weights = np.ones(1)
        bound = 0.0
    else:
        g = make_generator(derive_seed(seed, 1))
        pieces = []
        for _ in range(n_pairs):
            S = g.standard_normal((d, d))
            S = 0.5 * (S + S.T)
            S *= noise_scale / _ky_fan_sym(S, k)
            pieces.append(S)
        atoms = np.stack([M + S for S in pieces] + [M - S for S in pieces])
        weights = np.full(2 * n_pairs, 1.0 / (2 * n_pairs))
        bound = max(_ky_fan_sym(S, k) for S in pieces)
    model = SpectralModel(
        M=_freeze(M),
        eigenvalues=_freeze(vals),
        V=_freeze(eye[:, :k]),
        U=_freeze(eye[:, k:]),
        k=k,
        rho_k=rho,
        noise_bound_M=bound,
    )
    return FiniteSupportDistribution(atoms, weights, k, model=model)


def ghost_couple(dist, m: int, T0: int, seed: int = 0) -> FiniteSupportDistribution:
    """Replace a distribution by the empirical law of m pre-drawn atoms.

    Draws m i.i.d. samples once, then returns the uniform distribution over
    them (sampling with replacement). A length-T0 stream from the result has
    total variation distance at most T0^2/(2m) from a true i.i.d. stream;
    that bound is recorded on the returned distribution. The ground-truth
    model is recomputed from the empirical mean, so downstream diagnostics
    see the pool's own spectrum and gap.
    """
    if m < 1 or T0 < 1:
        raise InvalidShape(f"need m >= 1 and T0 >= 1, got m = {m}, T0 = {T0}")
    g = make_generator(derive_seed(seed, 2))
    draws = np.stack([np.array(dist.sample(g)) for _ in range(m)])
    # merge exactly repeated atoms (first-seen order) so a deterministic base
    # stays a single atom instead of m copies
    seen: dict[bytes, int] = {}
    counts: list[int] = []
    keep: list[int] = []
    for j in range(m):
        key = draws[j].tobytes()
        if key in seen:
            counts[seen[key]] += 1
        else:
            seen[key] = len(keep)
            keep.append(j)
            counts.append(1)
    atoms = draws[keep]
    weights = np.asarray(counts, dtype=float) / m
    mean = np.einsum("j,jab->ab", weights, atoms)
    mean = 0.5 * (mean + mean.T)
    k = dist.model.k
    noise = max(_ky_fan_sym(atoms[j] - mean, k) for j in range(atoms.shape[0]))
    model = model_from_mean(mean, k, noise)
    return FiniteSupportDistribution(
        atoms, weights, k, model=model, validate=False,
        coupling_tv_bound=T0 * T0 / (2.0 * m),
    )


def noise_family(dist) -> np.ndarray:
    """Per-atom scaled noise directions N_j = V^T (A_j - M) U / noise_bound.

    This is the finite family the burn-in good events range over; shape
    (n_atoms, k, d - k). Zero noise gives an all-zero family.
    """
    if not isinstance(dist, FiniteSupportDistribution):
        raise UnsupportedDistribution("noise directions need an explicit finite support")
    model = dist.model
    bound = model.noise_bound_M
    centered = dist.atoms - model.M[None, :, :]
    fam = np.einsum("av,jab,bu->jvu", model.V, centered, model.U)
    if bound > 0:
        fam /= bound
    else:
        fam[:] = 0.0
    return fam


@dataclass
class AssumptionReport:
    """Audit of a distribution against its declared model.

    max_noise_norm is the worst observed ky_fan_2k(A - M, k) and must stay
    at or below noise_bound (small slack for rounding); max_spectral_noise
    tracks the plain operator norm of A - M separately since both bounds get
    used downstream. For finite support the audit is exhaustive over atoms,
    otherwise Monte Carlo with the given draw count.
    """

    exhaustive: bool
    n_checked: int
    noise_bound: float
    max_noise_norm: float
    max_spectral_noise: float
    max_symmetry_defect: float
    mean_abs_deviation: float
    mean_deviation_sigma: float
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify_assumptions(dist, n_draws: int = 1000, seed: int = 0) -> AssumptionReport:
    model = dist.model
    M = model.M
    k = model.k
    bound = model.noise_bound_M
    violations = []
    if isinstance(dist, FiniteSupportDistribution):
        atoms = dist.atoms
        n = dist.n_atoms
        max_noise = max(_ky_fan_sym(atoms[j] - M, k) for j in range(n))
        max_spec = max(
            float(np.max(np.abs(np.linalg.eigvalsh(atoms[j] - M)))) for j in range(n)
        )
        max_defect = max(float(np.linalg.norm(atoms[j] - atoms[j].T)) for j in range(n))
        mean = np.einsum("j,jab->ab", dist.weights, atoms)
        dev = float(np.max(np.abs(mean - M)))
        sigma = 0.0
        if dev > EXACT_TOL:
            violations.append(f"finite-support mean off by {dev:.3e}")
        exhaustive, n_checked = True, n
    else:
        g = make_generator(derive_seed(seed, 3))
        d = dist.d
        acc = np.zeros((d, d))
        acc_sq = np.zeros((d, d))
        max_noise = 0.0
        max_spec = 0.0
        max_defect = 0.0
        for _ in range(n_draws):
            A = dist.sample(g)
            E = A - M
            max_noise = max(max_noise, _ky_fan_sym(E, k))
            max_spec = max(max_spec, float(np.max(np.abs(np.linalg.eigvalsh(E)))))
            max_defect = max(max_defect, float(np.linalg.norm(A - A.T)))
            acc += A
            acc_sq += A * A
        mean = acc / n_draws
        var = np.maximum(acc_sq / n_draws - mean * mean, 0.0)
        stderr = np.sqrt(var / n_draws)
        dev = float(np.max(np.abs(mean - M)))
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(stderr > 0, np.abs(mean - M) / stderr, 0.0)
        sigma = float(np.max(z))
        # entrywise multiple comparisons: flag only a clear failure
        if sigma > 4.5:
            violations.append(f"empirical mean deviates by {sigma:.2f} standard errors")
        exhaustive, n_checked = False, n_draws
    if max_noise > bound + 1e-12:
        violations.append(f"noise norm {max_noise:.6e} exceeds declared bound {bound:.6e}")
    scale = max(float(np.linalg.norm(M)), 1.0)
    if max_defect > TOL_SYM * scale:
        violations.append(f"symmetry defect {max_defect:.3e}")
    return AssumptionReport(
        exhaustive=exhaustive,
        n_checked=n_checked,
        noise_bound=bound,
        max_noise_norm=max_noise,
        max_spectral_noise=max_spec,
        max_symmetry_defect=max_defect,
        mean_abs_deviation=dev,
        mean_deviation_sigma=sigma,
        violations=violations,
    )


def distribution_from_config(cfg: dict):
    """Build a distribution from a JSON-style key/value tree.

    Recognized kinds: "finite_support" (atoms, weights, k), "bounded_noise"
    (d, k, eigenvalues, noise_scale, noise_rank, seed), "spiked_support"
    (k, eigenvalues, noise_scale, n_pairs, seed).
    """
    if not isinstance(cfg, dict):
        raise ConfigError(f"distribution config must be a mapping, got {type(cfg).__name__}")
    kind = cfg.get("kind")
    try:
        if kind == "finite_support":
            return make_finite_support(cfg["atoms"], cfg["weights"], int(cfg["k"]))
        if kind == "bounded_noise":
            return make_bounded_noise_model(
                cfg["eigenvalues"], int(cfg["k"]), float(cfg["noise_scale"]),
                int(cfg.get("noise_rank", cfg["d"])), int(cfg["d"]),
                seed=int(cfg.get("seed", 0)),
            )
        if kind == "spiked_support":
            return make_spiked_support(
                cfg["eigenvalues"], int(cfg["k"]), float(cfg["noise_scale"]),
                n_pairs=int(cfg.get("n_pairs", 4)), seed=int(cfg.get("seed", 0)),
            )
    except KeyError as exc:
        raise ConfigError(f"distribution config missing key {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad distribution config value: {exc}") from exc
    raise ConfigError(f"unknown distribution kind {kind!r}")
