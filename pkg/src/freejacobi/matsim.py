"""Finite-dimensional Monte Carlo for the matrix Jacobi process.

Two discretizations of the same large-d limit:

* ``unitary-corner``: geometric unitary Brownian motion Y_{t+h} = exp(i dX) Y_t
  with E tr_d(dX^2) = h, corner-compressed to J = X X* where X is the top-left
  m x p block.  Unitarity is exact by construction.
* ``direct-sde``: Euler-Maruyama on the m x m Hermitian SDE
  dJ = sqrt(I-J) dB sqrt(J) + sqrt(J) dB* sqrt(I-J) + (p I - (p+q) J) dt,
  run on the rescaled clock t_matrix = t_free / d so the drift matches
  (theta I - J) dt in the free time variable.

Trials own independent counter-based RNG streams derived from (seed, trial),
so results are independent of scheduling and worker count.
"""

from __future__ import annotations

import concurrent.futures as cf
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Union

import numpy as np

from .errors import DomainError, SimulationError
from .moments import shifted_chebyshev_coefficients
from .stationary import JacobiParams

__all__ = [
    "MatrixJacobiConfig",
    "TrajectoryRecord",
    "sample_haar_unitary",
    "hermitian_increment",
    "unitary_bm_step",
    "corner_jacobi",
    "interior_start_unitary",
    "simulate_trajectory",
    "simulate_direct_sde",
    "martingale_diagnostic",
]

SPECTRUM_TOL = 1e-10
UNITARITY_TOL = 1e-8
CLAMP_EPS = 1e-9


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Counter-based stream for one trial; depends only on (seed, trial)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=(seed, trial))))


def sample_haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed d x d unitary via QR of a complex Ginibre matrix.

    The R-diagonal phase correction makes the law exactly Haar.
    """
    if d < 1:
        raise DomainError("dimension must be >= 1")
    a = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2.0)
    q, r = np.linalg.qr(a)
    diag = np.diag(r)
    if np.min(np.abs(diag)) == 0.0:  # probability zero; resample
        return sample_haar_unitary(d, rng)
    return q * (diag / np.abs(diag))


def hermitian_increment(d: int, h: float, rng: np.random.Generator) -> np.ndarray:
    """Hermitian Gaussian increment with E tr_d(dX^2) = h (entry variance h/d)."""
    if h < 0:
        raise DomainError("step must be >= 0")
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    x = (a + a.conj().T) / 2.0
    idx = np.diag_indices(d)
    x[idx] = x[idx].real * np.sqrt(2.0)
    return x * np.sqrt(h / d)


def unitary_bm_step(Y: np.ndarray, dX: np.ndarray) -> np.ndarray:
    """One geometric step exp(i dX) Y via eigendecomposition of dX.

    With the increment normalization above, E exp(i dX) = (1 - h/2) I + O(h^2),
    matching the -Y/2 dt Ito drift of the unitary SDE to weak order one.
    """
    w, v = np.linalg.eigh(dX)
    return (v * np.exp(1j * w)) @ v.conj().T @ Y


def _polar_reorthonormalize(Y: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(Y)
    return u @ vh


def corner_jacobi(Y: np.ndarray, m: int, p: int, check: bool = True) -> np.ndarray:
    """J = X X* with X the top-left m x p block of a unitary Y."""
    if not (1 <= m <= p <= Y.shape[0]):
        raise DomainError("need 1 <= m <= p <= d")
    x = Y[:m, :p]
    j = x @ x.conj().T
    j = (j + j.conj().T) / 2.0
    if check:
        ev = np.linalg.eigvalsh(j)
        if ev[0] < -SPECTRUM_TOL or ev[-1] > 1.0 + SPECTRUM_TOL:
            raise SimulationError(
                f"corner spectrum [{ev[0]:.3e}, {ev[-1]:.6f}] outside [0,1] tolerance; "
                "unitarity broken upstream"
            )
    return j


def interior_start_unitary(c: float, m: int, p: int, d: int) -> np.ndarray:
    """Unitary whose m x p corner X satisfies X X* = c I (strict-interior start)."""
    if not 0.0 < c < 1.0:
        raise DomainError("interior start requires c in (0, 1)")
    if p + m > d:
        raise DomainError("interior start needs q = d - p >= m")
    y = np.eye(d, dtype=complex)
    a = np.arange(m)
    b = p + np.arange(m)
    s, t = np.sqrt(c), np.sqrt(1.0 - c)
    y[a, a] = s
    y[a, b] = t
    y[b, a] = -t
    y[b, b] = s
    return y


# ---------------------------------------------------------------------------
# configuration / record
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MatrixJacobiConfig:
    """Simulation parameters; empirical lambda = m/p and theta = p/d."""

    m: int
    p: int
    d: int
    step: float = 0.01
    T: float = 1.0
    trials: int = 50
    seed: int = 0
    start: Union[str, float, np.ndarray] = "haar"
    scheme: str = "unitary-corner"
    n_emp: int = 4
    record_every: int = 1
    snapshot_times: tuple = ()
    noise_scale: float = 1.0

    def __post_init__(self):
        if not (1 <= self.m <= self.p <= self.d):
            raise DomainError(f"need 1 <= m <= p <= d, got m={self.m}, p={self.p}, d={self.d}")
        if self.step <= 0 or self.T < 0:
            raise DomainError("need step > 0 and T >= 0")
        if self.trials < 1:
            raise DomainError("need at least one trial")
        if self.scheme not in ("unitary-corner", "direct-sde"):
            raise DomainError(f"unknown scheme {self.scheme!r}")
        if self.n_emp < 1:
            raise DomainError("need n_emp >= 1")
        if isinstance(self.start, str):
            if self.start not in ("haar", "identity"):
                raise DomainError(f"unknown start {self.start!r}")
        elif np.isscalar(self.start):
            if not 0.0 < float(self.start) < 1.0:
                raise DomainError("interior start requires c in (0, 1)")

    @property
    def lam(self) -> Fraction:
        return Fraction(self.m, self.p)

    @property
    def theta(self) -> Fraction:
        return Fraction(self.p, self.d)

    @property
    def params(self) -> JacobiParams:
        return JacobiParams(float(self.lam), float(self.theta))

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.step))


@dataclass
class TrajectoryRecord:
    """Per-trial empirical spectral statistics on a shared time grid."""

    config: MatrixJacobiConfig
    times: np.ndarray
    per_trial_moments: np.ndarray        # (trials, len(times), n_emp)
    snapshots: dict                      # time -> (trials, m) eigenvalues
    trial_seeds: list
    clamp_steps: int = 0
    reorth_events: int = 0
    aborted_trials: list = field(default_factory=list)

    @property
    def mean_moments(self):
        return self.per_trial_moments.mean(axis=0)

    @property
    def stderr_moments(self):
        n = self.per_trial_moments.shape[0]
        return self.per_trial_moments.std(axis=0, ddof=1) / np.sqrt(n)


# ---------------------------------------------------------------------------
# trial kernels
# ---------------------------------------------------------------------------

def _record_grid(config: MatrixJacobiConfig):
    steps = sorted(set(range(0, config.n_steps + 1, config.record_every)) | {config.n_steps})
    snap_steps = {}
    for t in config.snapshot_times:
        k = int(round(t / config.step))
        if not 0 <= k <= config.n_steps:
            raise DomainError(f"snapshot time {t} outside [0, T]")
        snap_steps[k] = t
    return steps, snap_steps


def _eig_stats(ev: np.ndarray, n_emp: int):
    ev = np.clip(ev, 0.0, 1.0)
    return np.array([np.mean(ev ** n) for n in range(1, n_emp + 1)]), ev


def _corner_trial(config: MatrixJacobiConfig, trial: int):
    rng = trial_rng(config.seed, trial)
    d, m, p = config.d, config.m, config.p
    if isinstance(config.start, str) and config.start == "haar":
        y = sample_haar_unitary(d, rng)
    elif isinstance(config.start, str):
        y = np.eye(d, dtype=complex)
    elif np.isscalar(config.start):
        y = interior_start_unitary(float(config.start), m, p, d)
    else:
        y = np.asarray(config.start, dtype=complex)
        if np.max(np.abs(y.conj().T @ y - np.eye(d))) > UNITARITY_TOL:
            raise SimulationError("given start matrix is not unitary within tolerance")
    steps, snap_steps = _record_grid(config)
    moments = np.empty((len(steps), config.n_emp))
    snaps = {}
    reorth = 0
    rec = 0
    for k in range(config.n_steps + 1):
        if k in snap_steps or (rec < len(steps) and steps[rec] == k):
            j = corner_jacobi(y, m, p, check=False)
            ev = np.linalg.eigvalsh(j)
            if ev[0] < -SPECTRUM_TOL or ev[-1] > 1.0 + SPECTRUM_TOL:
                raise SimulationError(
                    f"corner spectrum outside [0,1] at step {k}: [{ev[0]:.3e}, {ev[-1]:.8f}]"
                )
            stats, ev = _eig_stats(ev, config.n_emp)
            if rec < len(steps) and steps[rec] == k:
                moments[rec] = stats
                rec += 1
            if k in snap_steps:
                snaps[snap_steps[k]] = ev
        if k < config.n_steps:
            dx = hermitian_increment(d, config.step * config.noise_scale ** 2, rng)
            y = unitary_bm_step(y, dx)
            if (k + 1) % 64 == 0:
                drift = np.max(np.abs(y.conj().T @ y - np.eye(d)))
                if drift > UNITARITY_TOL:
                    y = _polar_reorthonormalize(y)
                    reorth += 1
    return moments, snaps, {"clamp_steps": 0, "reorth_events": reorth}


def _direct_trial(config: MatrixJacobiConfig, trial: int):
    rng = trial_rng(config.seed, trial)
    m, p, d = config.m, config.p, config.d
    q = d - p
    if isinstance(config.start, str) and config.start == "haar":
        j = corner_jacobi(sample_haar_unitary(d, rng), m, p, check=False).astype(complex)
    elif np.isscalar(config.start) and not isinstance(config.start, str):
        j = float(config.start) * np.eye(m, dtype=complex)
    else:
        raise DomainError("direct-sde supports 'haar' or interior scalar starts")
    dtm = config.step / d  # rescaled clock: one free-time step is d matrix-time steps
    eye = np.eye(m)
    steps, snap_steps = _record_grid(config)
    moments = np.empty((len(steps), config.n_emp))
    snaps = {}
    clamps = 0
    rec = 0
    for k in range(config.n_steps + 1):
        if k in snap_steps or (rec < len(steps) and steps[rec] == k):
            ev = np.linalg.eigvalsh(j).real
            stats, ev = _eig_stats(ev, config.n_emp)
            if rec < len(steps) and steps[rec] == k:
                moments[rec] = stats
                rec += 1
            if k in snap_steps:
                snaps[snap_steps[k]] = ev
        if k < config.n_steps:
            w, v = np.linalg.eigh(j)
            wc = np.clip(w.real, CLAMP_EPS, 1.0 - CLAMP_EPS)
            if (w.real != wc).any():
                clamps += 1
            sq = (v * np.sqrt(wc)) @ v.conj().T
            sq1m = (v * np.sqrt(1.0 - wc)) @ v.conj().T
            db = (
                (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m)))
                * np.sqrt(dtm / 2.0)
                * config.noise_scale
            )
            j = j + sq1m @ db @ sq + sq @ db.conj().T @ sq1m + (p * eye - (p + q) * j) * dtm
            j = (j + j.conj().T) / 2.0
    return moments, snaps, {"clamp_steps": clamps, "reorth_events": 0}


def _run_trial(config: MatrixJacobiConfig, trial: int):
    try:
        if config.scheme == "unitary-corner":
            return trial, _corner_trial(config, trial)
        return trial, _direct_trial(config, trial)
    except SimulationError as exc:
        return trial, ("abort", str(exc))


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def simulate_trajectory(config: MatrixJacobiConfig, jobs: int = 1) -> TrajectoryRecord:
    """Run all trials of ``config`` and aggregate in fixed trial order.

    Results are bit-identical for any ``jobs`` since every trial owns a
    counter-based stream keyed by (seed, trial) and the reduction order is
    fixed.  The run fails if more than 1% of trials abort.
    """
    steps, snap_steps = _record_grid(config)
    times = np.asarray(steps, dtype=float) * config.step
    results = [None] * config.trials
    if jobs <= 1:
        for i in range(config.trials):
            results[i] = _run_trial(config, i)[1]
    else:
        with cf.ProcessPoolExecutor(max_workers=jobs) as ex:
            for trial, payload in ex.map(
                _run_trial, [config] * config.trials, range(config.trials), chunksize=1
            ):
                results[trial] = payload
    moments = np.empty((config.trials, len(steps), config.n_emp))
    snaps_acc = {t: [] for t in snap_steps.values()}
    aborted = []
    clamps = 0
    reorth = 0
    for i, payload in enumerate(results):
        if len(payload) == 2 and isinstance(payload[0], str):
            aborted.append(i)
            moments[i] = np.nan
            continue
        mom, snaps, counters = payload
        moments[i] = mom
        clamps += counters["clamp_steps"]
        reorth += counters["reorth_events"]
        for t, ev in snaps.items():
            snaps_acc[t].append(ev)
    if len(aborted) > 0.01 * config.trials:
        raise SimulationError(f"{len(aborted)}/{config.trials} trials aborted: {aborted}")
    snapshots = {t: np.asarray(v) for t, v in snaps_acc.items() if v}
    seeds = [f"SeedSequence(entropy=({config.seed}, {i}))" for i in range(config.trials)]
    return TrajectoryRecord(
        config=config,
        times=times,
        per_trial_moments=moments,
        snapshots=snapshots,
        trial_seeds=seeds,
        clamp_steps=clamps,
        reorth_events=reorth,
        aborted_trials=aborted,
    )


def simulate_direct_sde(config: MatrixJacobiConfig, jobs: int = 1) -> TrajectoryRecord:
    """Direct matrix SDE on the rescaled clock (see module docstring)."""
    if config.scheme != "direct-sde":
        config = replace(config, scheme="direct-sde")
    return simulate_trajectory(config, jobs=jobs)


def martingale_diagnostic(record: TrajectoryRecord, k: int):
    """Scaled Chebyshev series e^{kt} mean tr_m T_k(2 J_t - I) with its stderr.

    Only defined for the (lambda, theta) = (1, 1/2) geometry (p = m, d = 2m);
    orders above 8 are refused because trial noise dominates there.
    """
    cfg = record.config
    if not (cfg.m == cfg.p and cfg.d == 2 * cfg.m):
        raise DomainError("martingale diagnostic requires p = m and d = 2m (lambda=1, theta=1/2)")
    if k > 8:
        raise DomainError("k > 8 refused: statistical noise dominates")
    if k > cfg.n_emp:
        raise DomainError(f"record carries moments up to n_emp={cfg.n_emp} < k={k}")
    coeffs = shifted_chebyshev_coefficients(k)
    per_trial = np.full(record.per_trial_moments.shape[:2], float(coeffs[0]))
    for j, c in enumerate(coeffs[1:], start=1):
        per_trial += c * record.per_trial_moments[:, :, j - 1]
    scale = np.exp(k * record.times)
    mean = per_trial.mean(axis=0) * scale
    n = per_trial.shape[0]
    stderr = per_trial.std(axis=0, ddof=1) / np.sqrt(n) * scale if n > 1 else np.zeros_like(mean)
    return record.times, mean, stderr
