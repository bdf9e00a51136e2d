"""Primal-dual splitting for determined BSS, with and without the
consistency projection.

One iteration, with ``P`` the consistency projection (identity for the plain
variant) and ``P*`` its adjoint::

    w_hat = prox_logdet(w - mu1*mu2 * X^H P*(y), mu1)
    z     = y + P(X (2 w_hat - w))
    y_hat = z - prox_{penalty/mu2}(z)
    y     = alpha*y_hat + (1-alpha)*y
    w     = alpha*w_hat + (1-alpha)*w

``X`` is the per-bin observation operator of :mod:`consistent_bss.demixing`.
The one-sided spectrogram stands for the full Hermitian grid, so penalties
and the log-det term are weighted by bin multiplicity.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np

from .demixing import (
    adjoint_correlate,
    apply_demix,
    identity_stack,
    logdet_penalty,
    operator_norm,
    prox_logdet,
)
from .stft import WindowPair, bin_weights, istft, norm, padded_length, project_consistent, stft

__all__ = [
    "VARIANTS",
    "DEFAULT_INPUT_LEVEL",
    "SolverConfig",
    "SolverState",
    "SolverDivergence",
    "Diagnostics",
    "init_state",
    "pds_step",
    "run",
    "separate",
    "objective",
]

logger = logging.getLogger(__name__)

VARIANTS = ("consistent", "plain")
DEFAULT_INPUT_LEVEL = 1.0


class SolverDivergence(FloatingPointError):
    """Raised when an iterate stops being finite."""

    def __init__(self, iteration):
        super().__init__(f"non-finite iterate at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    """Step sizes, relaxation and iteration count.

    With ``normalize_input`` the observation is divided so that its operator
    norm equals ``input_level`` before solving; ``input_level <= 1`` keeps
    ``mu1 * mu2 * ||X||^2 <= 1`` for the default unit steps.
    """

    mu1: float = 1.0
    mu2: float = 1.0
    alpha: float = 1.75
    iters: int = 2000
    variant: str = "consistent"
    normalize_input: bool = True
    input_level: float = DEFAULT_INPUT_LEVEL
    log_every: int = 1

    def __post_init__(self):
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise ValueError("step sizes mu1, mu2 must be positive")
        if not 0 < self.alpha < 2:
            raise ValueError("alpha must lie in (0, 2)")
        if self.iters < 0:
            raise ValueError("iters must be nonnegative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if not self.input_level > 0:
            raise ValueError("input_level must be positive")
        if self.log_every < 1:
            raise ValueError("log_every must be at least 1")

    @property
    def consistent(self):
        return self.variant == "consistent"


@dataclass
class SolverState:
    w: np.ndarray  # (B, M, M)
    y: np.ndarray  # (M, T, B)
    iteration: int = 0


@dataclass
class Diagnostics:
    """Per-iteration trace.

    ``objective`` is penalty(P(Xw)) + logdet(w) with the projection applied
    regardless of variant; ``objective_plain`` drops the projection.
    """

    iteration: list = field(default_factory=list)
    objective: list = field(default_factory=list)
    objective_plain: list = field(default_factory=list)
    primal_change: list = field(default_factory=list)
    consistency_residual: list = field(default_factory=list)
    scale: float = 1.0

    def record(self, k, obj, obj_plain, change, resid):
        self.iteration.append(k)
        self.objective.append(obj)
        self.objective_plain.append(obj_plain)
        self.primal_change.append(change)
        self.consistency_residual.append(resid)

    def to_csv(self, path):
        cols = ["iteration", "objective", "objective_plain", "primal_change",
                "consistency_residual"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(cols)
            for row in zip(*(getattr(self, c) for c in cols)):
                writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])


def init_state(obs):
    """Identity demixing and zero dual variable."""
    M, T, B = obs.shape
    return SolverState(identity_stack(B, M), np.zeros((M, T, B), dtype=complex), 0)


def objective(w, obs, model, win, consistent=True):
    """Penalty of the (projected) separated spectrogram plus the log-det term.

    Returns ``(objective, separated spectrogram before projection,
    projected spectrogram)``.
    """
    c = bin_weights(win.fft_size)
    s = apply_demix(w, obs)
    ps = project_consistent(s, win) if consistent else s
    return model.value(ps, c) + logdet_penalty(w, c), s, ps


def _real_bins(win):
    F = win.fft_size
    return [0, F // 2] if F % 2 == 0 and F > 1 else [0]


def pds_step(state, obs, model, cfg, win):
    """One over-relaxed primal-dual iteration; returns a new state."""
    w, y = state.w, state.y
    c = bin_weights(win.fft_size)
    if cfg.consistent:
        py = project_consistent(y, win, adjoint=True)
    else:
        py = y
    k = state.iteration + 1
    v = w - cfg.mu1 * cfg.mu2 * adjoint_correlate(obs, py)
    edges = _real_bins(win) if cfg.consistent else []
    # the projection discards imaginary parts at DC/Nyquist, so the filters
    # there must stay real or the log-det term is unbounded below
    v[edges] = v[edges].real
    try:
        w_hat = prox_logdet(v, cfg.mu1)
    except np.linalg.LinAlgError as exc:
        raise SolverDivergence(k) from exc
    w_hat[edges] = w_hat[edges].real
    s = apply_demix(2.0 * w_hat - w, obs)
    if cfg.consistent:
        s = project_consistent(s, win)
    z = y + s
    y_hat = z - model.prox(z, cfg.mu2, c)
    a = cfg.alpha
    if a == 1.0:
        w_new, y_new = w_hat, y_hat
    else:
        w_new = a * w_hat + (1.0 - a) * w
        y_new = a * y_hat + (1.0 - a) * y
    if not (np.all(np.isfinite(w_new)) and np.all(np.isfinite(y_new))):
        raise SolverDivergence(k)
    return SolverState(w_new, y_new, k)


def _log(diag, state, prev_w, obs, model, win):
    c = bin_weights(win.fft_size)
    s = apply_demix(state.w, obs)
    ps = project_consistent(s, win)
    ld = logdet_penalty(state.w, c)
    obj = model.value(ps, c) + ld
    obj_plain = model.value(s, c) + ld
    F = win.fft_size
    resid = norm(s - ps, F) / max(norm(s, F), 1e-300)
    change = 0.0 if prev_w is None else float(np.linalg.norm(state.w - prev_w))
    diag.record(state.iteration, obj, obj_plain, change, resid)


def run(obs, model, cfg: SolverConfig, win: WindowPair, callback=None):
    """Estimate demixing filters for the mixture spectrogram ``obs``.

    Parameters
    ----------
    obs : np.ndarray, shape=(M, T, B)
        STFT of the mixture.
    model : PenaltyModel
        Anything with ``value(z, weights)`` and ``prox(z, mu2, weights)``.
    cfg : SolverConfig
    win : WindowPair
    callback : callable, optional
        Called as ``callback(state)`` after every iteration.

    Returns
    -------
    W : np.ndarray, shape=(B, M, M)
        Demixing filters for ``obs`` at its original level.
    diag : Diagnostics
        Trace on the (possibly normalized) problem actually solved.
    """
    obs = np.asarray(obs, dtype=complex)
    scale = 1.0
    if cfg.normalize_input:
        scale = operator_norm(obs) / cfg.input_level
        if scale > 0:
            obs = obs / scale
        else:
            scale = 1.0
    diag = Diagnostics(scale=scale)
    state = init_state(obs)
    _log(diag, state, None, obs, model, win)
    K = cfg.iters
    for _ in range(K):
        prev = state.w
        state = pds_step(state, obs, model, cfg, win)
        if callback is not None:
            callback(state)
        if state.iteration % cfg.log_every == 0 or state.iteration == K:
            _log(diag, state, prev, obs, model, win)
    if K:
        logger.debug("finished %d iterations, objective %.6g", K, diag.objective[-1])
    # outputs W x on the raw observation keep the input level
    return state.w, diag


def separate(mixture, model, cfg: SolverConfig, win: WindowPair, callback=None):
    """Separate a multichannel time signal.

    Parameters
    ----------
    mixture : np.ndarray, shape=(M, L)

    Returns
    -------
    sources : np.ndarray, shape=(M, L)
    W : np.ndarray, shape=(B, M, M)
    diag : Diagnostics
    """
    x = np.asarray(mixture, dtype=float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("mixture must have at least two channels")
    M, L = x.shape
    Lp = padded_length(L, win)
    xp = np.pad(x, ((0, 0), (0, Lp - L)))
    X = stft(xp, win)
    W, diag = run(X, model, cfg, win, callback=callback)
    y = istft(apply_demix(W, X), win)
    return y[:, :L], W, diag

