"""Streaming top-k eigenspace estimation by multiplicative subspace iteration.

The iterate is Z <- (I + eta_t A_t) Z with periodic orthonormalization; the
span of Z_t is unchanged by when the orthonormalization happens, which is
what makes per-step QR both safe and equivalent to a deferred one. Step
sizes come in two phases: a constant burn-in step for t <= t0, then the
decaying rule eta_t = alpha / ((beta + t - t0) rho_k).

Runs record per-iterate diagnostics against the stream's ground-truth model:
the subspace distance of the orthonormalized iterate to V, the norm of the
error coordinate W_t = U^T Z_t (V^T Z_t)^{-1}, the step size, and a running
good-event flag (W stayed below the threshold gamma on every step so far;
during burn-in the threshold applies to the scaled noise-direction products
instead). This module is the sequential reference; the vectorized many-trial
engine lives in _batch and is tested against it.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidDelta, InvalidShape, RankDeficient, Singular
from .linalg import as_matrix, gram_schmidt_qr, right_solve, spectral_norm, subspace_distance, svd
from .rng import make_generator
from .streams import FiniteSupportDistribution, noise_family

# Good-event threshold for the decaying phase.
DEFAULT_GAMMA = float(np.sqrt(2.0) * np.e)

# Leading constant of the decaying-phase moment bound; the derived value is
# about 172.05, this is the stated ceiling.
C3 = 175.0

CSV_HEADER = "trial,t,eta,subspace_dist,w_norm,good_event,phase"


@dataclass(frozen=True)
class StepSchedule:
    """Global step-size rule: constant phase1_eta for t <= t0, then
    alpha / ((beta + t - t0) rho_k). t is the global step index, starting
    at 1 for the first sample."""

    t0: int
    phase1_eta: float
    alpha: float
    beta: float
    rho_k: float

    def __post_init__(self):
        if self.t0 < 0:
            raise ConfigError(f"t0 must be >= 0, got {self.t0}")
        if self.t0 > 0 and not self.phase1_eta > 0:
            raise ConfigError("burn-in needs phase1_eta > 0")
        if not (self.alpha > 0 and self.beta > 0 and self.rho_k > 0):
            raise ConfigError("alpha, beta, rho_k must all be positive")

    def phase(self, t: int) -> int:
        return 1 if t <= self.t0 and self.t0 > 0 else 2

    def eta(self, t: int) -> float:
        if t <= self.t0:
            return self.phase1_eta
        # subtract the (possibly enormous) burn-in length in exact integer
        # arithmetic before touching floats
        return self.alpha / (((t - self.t0) + self.beta) * self.rho_k)

    def eta_array(self, T: int) -> np.ndarray:
        """eta_t for t = 1..T."""
        if T <= self.t0:
            return np.full(T, self.phase1_eta)
        ts = np.arange(1, T + 1, dtype=np.int64)
        # the burn-in branch of the where() can hit (t - t0) + beta <= 0;
        # those lanes are discarded, so silence the spurious warning
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = self.alpha / (((ts - self.t0) + self.beta) * self.rho_k)
        return np.where(ts <= self.t0, self.phase1_eta, tail)

    def cumulative_eta(self, T: int) -> np.ndarray:
        """Partial sums s_t = eta_1 + ... + eta_t for t = 1..T."""
        return np.cumsum(self.eta_array(T))


@dataclass(frozen=True)
class ConstantProfile:
    """Constants for schedule synthesis.

    kind "theoretical" carries the conservative constants the guarantees are
    stated with (astronomical t0; useful for formula-level checks only);
    kind "practical" uses small constants with the same functional forms.
    C_T is the leading constant of the respective t0 formula in either case.
    """

    kind: str
    C_eta: float
    C_T: float
    C_gamma: float
    c_beta: float
    alpha: float = 8.0
    s: float = 1.0 / 6.0
    t0_cap: int | None = None

    def __post_init__(self):
        if self.kind not in ("theoretical", "practical"):
            raise ConfigError(f"unknown profile kind {self.kind!r}")
        if self.kind == "theoretical":
            # the burn-in analysis needs these couplings between the constants
            assert self.alpha >= 8
            assert self.C_eta >= 8 + 4 * math.log(2 * self.C_gamma) - 1e-9
            assert self.C_T >= 600 * math.e**2 * self.C_eta**2 - 1e-6

    @classmethod
    def theoretical(cls) -> "ConstantProfile":
        C_gamma = 144.0 * math.e
        C_eta = max(8 + 4 * math.log(2 * C_gamma), 8 + 2 * math.log(144 * C_gamma))
        C_T = max(
            600 * math.e**2 * C_eta**2,
            (12000 * math.e**2 * C_eta**2 * C_gamma**2) ** 1.25,
            (12000 * math.e**3 * C_eta**2 * (144 * C_gamma) ** 2) ** (5.0 / 3.0),
        )
        return cls(kind="theoretical", C_eta=C_eta, C_T=C_T, C_gamma=C_gamma, c_beta=1.0)

    @classmethod
    def practical(cls, C_eta: float = 2.0, C_T: float = 50.0, c_beta: float = 20.0,
                  t0_cap: int = 100_000) -> "ConstantProfile":
        return cls(kind="practical", C_eta=C_eta, C_T=C_T, C_gamma=144.0 * math.e,
                   c_beta=c_beta, t0_cap=t0_cap)


def rho_bar(model) -> float:
    """Dimensionless gap min(rho_k / noise bound, rho_k / ||M||, 1)."""
    r = 1.0
    if model.noise_bound_M > 0:
        r = min(r, model.rho_k / model.noise_bound_M)
    if model.spectral_norm > 0:
        r = min(r, model.rho_k / model.spectral_norm)
    return r


def compute_schedule(model, d: int, delta: float, profile: ConstantProfile) -> StepSchedule:
    """Synthesize the two-phase schedule for a model at failure budget delta."""
    if not 0 < delta < 1:
        raise InvalidDelta(f"need 0 < delta < 1, got {delta}")
    rho = model.rho_k
    rb = rho_bar(model)
    k = model.k
    if profile.kind == "theoretical":
        s = profile.s
        t0 = math.ceil(
            profile.C_T * k * math.log(12 * math.e * d / (delta * rb * s)) ** 4
            / (s * s * delta * delta * rb * rb)
        )
        eta1 = profile.C_eta * math.log(math.e * d / (s * delta)) / (rho * t0)
        q = C3 * profile.alpha / rb
        beta = max(
            2 * q * q * math.log(q * 2 * k / delta),
            4 * (1 + DEFAULT_GAMMA) * profile.alpha / rb,
            profile.c_beta,
        )
    else:
        Mb = model.noise_bound_M
        t0 = 0
        eta1 = 0.0
        if Mb > 0:
            t0 = math.ceil(profile.C_T * k * Mb * Mb * math.log(d) / (delta * delta * rho * rho))
            if profile.t0_cap is not None:
                t0 = min(t0, profile.t0_cap)
            eta1 = profile.C_eta * math.log(math.e * d / (profile.s * delta)) / (rho * t0)
            nm = model.spectral_norm
            if nm > 0:
                eta1 = min(eta1, 0.5 / nm)
        beta = max(profile.c_beta * (Mb / rho) ** 2 * math.log(2 * k / delta), 1.0)
    return StepSchedule(t0=t0, phase1_eta=eta1, alpha=profile.alpha, beta=beta, rho_k=rho)


def gaussian_init(d: int, k: int, seed: int) -> np.ndarray:
    """d x k matrix of i.i.d. standard normals from the named generator."""
    if not 1 <= k <= d:
        raise InvalidShape(f"need 1 <= k <= d, got d = {d}, k = {k}")
    return make_generator(seed).standard_normal((d, k))


def warm_start_frame(model, w_norm: float, rng: np.random.Generator) -> np.ndarray:
    """Z_0 = V + U S with the error coordinate S drawn at exact norm w_norm.

    By construction W_0 = S, so runs seeded this way start with
    ||W_0|| = w_norm exactly (up to one float multiply)."""
    if w_norm < 0:
        raise InvalidShape(f"w_norm must be nonnegative, got {w_norm}")
    d, k = model.d, model.k
    S = rng.standard_normal((d - k, k))
    nrm = spectral_norm(S)
    if nrm > 0:
        S *= w_norm / nrm
    else:
        S[:] = 0.0
    return model.V + model.U @ S


@dataclass
class OjaState:
    Z: np.ndarray
    t: int = 0
    last_orthonormalized_at: int = 0


def oja_step(state: OjaState, A, eta: float, orthonormalize: bool = True) -> OjaState:
    """One multiplicative update Z <- (I + eta A) Z, optionally followed by QR."""
    if not eta > 0:
        raise InvalidShape(f"step size must be positive, got {eta}")
    A = as_matrix(A, "A")
    Z = state.Z
    if A.shape != (Z.shape[0], Z.shape[0]):
        raise InvalidShape(f"sample shape {A.shape} does not match iterate rows {Z.shape[0]}")
    Z = Z + eta * (A @ Z)
    t = state.t + 1
    if orthonormalize:
        return OjaState(Z=gram_schmidt_qr(Z), t=t, last_orthonormalized_at=t)
    return OjaState(Z=Z, t=t, last_orthonormalized_at=state.last_orthonormalized_at)


@dataclass
class RunTrace:
    """Per-iterate diagnostics at the recorded step indices.

    w_norm is the spectral norm of W_t (+inf sentinel when V^T Z_t was too
    ill-conditioned to invert; the run itself continues). w_sigma carries the
    full singular value vector of W_t for moment estimation. good_event is
    the running indicator, monotone nonincreasing.
    """

    trial: int
    ts: np.ndarray
    eta: np.ndarray
    subspace_dist: np.ndarray
    w_norm: np.ndarray
    good_event: np.ndarray
    phase: np.ndarray
    w_sigma: np.ndarray = None
    extras: dict = field(default_factory=dict)

    @property
    def survived(self) -> bool:
        return bool(self.good_event[-1])

    def csv_rows(self):
        for i in range(len(self.ts)):
            yield format_csv_row(
                self.trial, int(self.ts[i]), float(self.eta[i]),
                float(self.subspace_dist[i]), float(self.w_norm[i]),
                bool(self.good_event[i]), int(self.phase[i]),
            )


def format_csv_row(trial, t, eta, dist, w, good, phase) -> str:
    return f"{trial},{t},{eta:.17g},{dist:.17g},{w:.17g},{int(good)},{phase}"


def default_record_grid(T: int, full_limit: int = 10_000) -> np.ndarray:
    """All of 0..T when T is small; else 0, the rounded-up powers of 1.05,
    and T itself."""
    if T <= full_limit:
        return np.arange(T + 1, dtype=np.int64)
    ts = {0, T}
    v = 1.0
    while v <= T:
        ts.add(int(math.ceil(v)))
        v *= 1.05
    return np.array(sorted(ts), dtype=np.int64)


def _w_diagnostics(Z: np.ndarray, model):
    """(W, singular values, spectral norm) of the error coordinate, or the
    +inf sentinel triple when V^T Z is numerically singular."""
    G = model.V.T @ Z
    H = model.U.T @ Z
    k = Z.shape[1]
    try:
        W = right_solve(H, G)
    except Singular:
        return None, np.full(k, np.inf), np.inf
    sig = svd(W).singular_values
    norm = float(sig[0]) if sig.size else 0.0
    return W, sig, norm


def _initial_good_flag(w_sig, w_norm, W, schedule, fam, gamma, d) -> bool:
    if not np.isfinite(w_norm):
        return False
    if schedule.t0 > 0:
        frob = float(np.sqrt(np.sum(w_sig * w_sig)))
        ok = frob <= math.sqrt(d) * gamma
        if ok and fam is not None:
            lim = gamma / DEFAULT_GAMMA
            worst = max(float(np.linalg.norm(fam[j] @ W)) for j in range(fam.shape[0]))
            ok = worst <= lim
        return ok
    return w_norm <= 1.0


def _step_good_clause(w_norm, W, phase, fam, gamma) -> bool:
    if not np.isfinite(w_norm):
        return False
    if phase == 1 and fam is not None:
        worst = max(spectral_norm(fam[j] @ W) for j in range(fam.shape[0]))
        return worst <= gamma
    return w_norm <= gamma


def run(dist, schedule: StepSchedule, T: int, Z0=None, warm_start_w: float | None = None,
        seed: int | None = None, rng: np.random.Generator | None = None,
        record=None, orthonormalize_every: int = 1, gamma: float | None = None,
        trace_hooks=None, trial: int = 0):
    """Execute T steps and return (Q_T, RunTrace).

    Draw order per trial is fixed: initialization draws first (if Z0 is not
    given), then one sample draw per step. The same order is reproduced by
    the vectorized engine, so a (seed, config) pair names one exact path.
    """
    if T < 1:
        raise InvalidShape(f"need T >= 1, got {T}")
    if orthonormalize_every < 1:
        raise InvalidShape("orthonormalize_every must be >= 1")
    model = dist.model
    d, k = model.d, model.k
    if rng is None:
        rng = make_generator(0 if seed is None else seed)
    g = DEFAULT_GAMMA if gamma is None else float(gamma)
    if Z0 is None:
        if warm_start_w is not None:
            Z0 = warm_start_frame(model, warm_start_w, rng)
        else:
            Z0 = rng.standard_normal((d, k))
    Z0 = np.asarray(Z0, dtype=float)
    if Z0.shape != (d, k):
        raise InvalidShape(f"Z0 shape {Z0.shape}, expected {(d, k)}")
    fam = noise_family(dist) if isinstance(dist, FiniteSupportDistribution) else None
    if record is None:
        record = default_record_grid(T)
    record = np.asarray(record, dtype=np.int64)
    record_set = set(int(t) for t in record)

    state = OjaState(Z=gram_schmidt_qr(Z0))
    rows = {name: [] for name in ("ts", "eta", "dist", "w", "good", "phase")}
    sig_rows = []
    extras = {}

    W, w_sig, w_norm = _w_diagnostics(state.Z, model)
    alive = _initial_good_flag(w_sig, w_norm, W, schedule, fam, g, d)

    def emit(t, eta_t, Q_for_dist):
        rows["ts"].append(t)
        rows["eta"].append(eta_t)
        rows["dist"].append(subspace_distance(Q_for_dist, model.V))
        rows["w"].append(w_norm)
        rows["good"].append(alive)
        rows["phase"].append(schedule.phase(max(t, 1)))
        sig_rows.append(w_sig.copy())
        if trace_hooks:
            for hook in trace_hooks:
                name, value = hook(t, eta_t, state.Z)
                extras.setdefault(name, []).append(value)

    if 0 in record_set:
        emit(0, 0.0, state.Z)
    for t in range(1, T + 1):
        eta_t = schedule.eta(t)
        A = dist.sample(rng)
        ortho = (t % orthonormalize_every == 0) or (t == T)
        try:
            state = oja_step(state, A, eta_t, orthonormalize=ortho)
            W, w_sig, w_norm = _w_diagnostics(state.Z, model)
            if t in record_set:
                Q_t = state.Z if ortho else gram_schmidt_qr(state.Z)
        except RankDeficient as exc:
            raise RankDeficient(f"step {t}: {exc}") from exc
        if alive:
            alive = _step_good_clause(w_norm, W, schedule.phase(t), fam, g)
        if t in record_set:
            emit(t, eta_t, Q_t)

    trace = RunTrace(
        trial=trial,
        ts=np.array(rows["ts"], dtype=np.int64),
        eta=np.array(rows["eta"], dtype=float),
        subspace_dist=np.array(rows["dist"], dtype=float),
        w_norm=np.array(rows["w"], dtype=float),
        good_event=np.array(rows["good"], dtype=bool),
        phase=np.array(rows["phase"], dtype=np.int64),
        w_sigma=np.array(sig_rows, dtype=float),
        extras={k_: np.array(v) for k_, v in extras.items()},
    )
    return state.Z, trace
