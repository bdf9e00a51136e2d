"""SDR / SIR / SAR with time-invariant distortion filters.

An estimate is split into a target part (the best ``filter_len``-tap
filtering of its reference), an interference part (what the other references
explain on top of that) and an artifact remainder.  Signals are extended by
``filter_len - 1`` samples so that every delayed reference copy fits; the
three parts sum to the zero-padded estimate.
"""

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.signal import fftconvolve

__all__ = [
    "CAP_DB",
    "MAX_SOURCES",
    "Decomposition",
    "MetricsReport",
    "decompose",
    "sdr_sir_sar",
    "best_permutation_align",
    "evaluate",
    "improvement",
]

CAP_DB = 200.0
MAX_SOURCES = 4
RIDGE = 1e-10


@dataclass
class Decomposition:
    target: np.ndarray
    interference: np.ndarray
    artifact: np.ndarray
    regularized: bool = False


def _gram(refs, filter_len):
    """Gram matrix of all delayed reference copies (block Toeplitz)."""
    N, L = refs.shape
    G = np.empty((N * filter_len, N * filter_len))
    for i in range(N):
        for j in range(i, N):
            # xc[k] = sum_l refs[i][l + k] * refs[j][l], lags -(L-1)..(L-1)
            xc = fftconvolve(refs[i], refs[j][::-1])
            mid = L - 1
            # <delay_d refs_i, delay_e refs_j> = xc at lag (e - d)
            first_row = xc[mid:mid + filter_len]
            first_col = xc[mid - filter_len + 1:mid + 1][::-1]
            block = scipy.linalg.toeplitz(first_col, first_row)
            G[i * filter_len:(i + 1) * filter_len, j * filter_len:(j + 1) * filter_len] = block
            G[j * filter_len:(j + 1) * filter_len, i * filter_len:(i + 1) * filter_len] = block.T
    return G


def _cross(refs, est, filter_len):
    """``<delay_d refs_j, est>`` for every reference and delay."""
    N, L = refs.shape
    out = np.empty(N * filter_len)
    for j in range(N):
        xc = fftconvolve(est, refs[j][::-1])
        out[j * filter_len:(j + 1) * filter_len] = xc[L - 1:L - 1 + filter_len]
    return out


def _solve(G, b):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            return scipy.linalg.solve(G, b, assume_a="pos"), False
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        ridge = RIDGE * np.trace(G)
        A = G + ridge * np.eye(len(G))
        return scipy.linalg.lstsq(A, b)[0], True


def _filtered(refs, coef, filter_len):
    """``sum_j coef_j * refs_j`` as a signal of length ``L + filter_len - 1``."""
    N, L = refs.shape
    out = np.zeros(L + filter_len - 1)
    for j in range(N):
        out += fftconvolve(refs[j], coef[j * filter_len:(j + 1) * filter_len])
    return out


class _Projector:
    """Caches the reference Gram matrix across estimates."""

    def __init__(self, references, filter_len):
        if filter_len < 1:
            raise ValueError("filter_len must be at least 1")
        self.refs = np.atleast_2d(np.asarray(references, dtype=float))
        self.K = filter_len
        self.G = _gram(self.refs, filter_len)

    def decompose(self, estimate, j):
        refs, K = self.refs, self.K
        est = np.asarray(estimate, dtype=float)
        L = refs.shape[1]
        if est.shape != (L,):
            raise ValueError(f"estimate of shape {est.shape} does not match references of length {L}")
        b = _cross(refs, est, K)
        blk = slice(j * K, (j + 1) * K)
        c_t, reg_t = _solve(self.G[blk, blk], b[blk])
        c_all, reg_all = _solve(self.G, b)
        target = fftconvolve(refs[j], c_t)
        full = _filtered(refs, c_all, K)
        padded = np.concatenate([est, np.zeros(K - 1)])
        return Decomposition(target, full - target, padded - full, reg_t or reg_all)


def decompose(estimate, references, j, filter_len=512):
    """Split ``estimate`` relative to reference ``j``.

    Parameters
    ----------
    estimate : np.ndarray, shape=(L,)
    references : np.ndarray, shape=(N, L)
    j : int
        Index of the reference the estimate is assigned to.
    filter_len : int
        Number of taps of the allowed distortion filter.

    Returns
    -------
    Decomposition
        ``target + interference + artifact`` equals the estimate padded with
        ``filter_len - 1`` zeros.
    """
    return _Projector(references, filter_len).decompose(estimate, j)


def _ratio_db(num, den):
    if den == 0:
        return CAP_DB
    if num == 0:
        return -CAP_DB
    return float(np.clip(10 * np.log10(num / den), -CAP_DB, CAP_DB))


def sdr_sir_sar(dec: Decomposition):
    """SDR, SIR and SAR in dB, capped at +-:data:`CAP_DB`."""
    t = np.sum(dec.target ** 2)
    i = np.sum(dec.interference ** 2)
    a = np.sum(dec.artifact ** 2)
    if t == 0:
        warnings.warn("estimate has no target component")
        return -CAP_DB, -CAP_DB, _ratio_db(i, a)
    sdr = _ratio_db(t, np.sum((dec.interference + dec.artifact) ** 2))
    sir = _ratio_db(t, i)
    sar = _ratio_db(np.sum((dec.target + dec.interference) ** 2), a)
    return sdr, sir, sar


@dataclass
class MetricsReport:
    """Metrics per reference source.

    ``assignment[j]`` is the index of the estimate matched to reference ``j``.
    """

    sdr: np.ndarray
    sir: np.ndarray
    sar: np.ndarray
    assignment: tuple
    regularized: bool = False
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "sdr_db": [float(v) for v in self.sdr],
            "sir_db": [float(v) for v in self.sir],
            "sar_db": [float(v) for v in self.sar],
            "assignment": [int(v) for v in self.assignment],
            "regularized": bool(self.regularized),
        }


def _all_pairs(estimates, references, filter_len):
    proj = _Projector(references, filter_len)
    M = len(estimates)
    N = proj.refs.shape[0]
    scores = np.empty((M, N, 3))
    reg = False
    for i in range(M):
        for j in range(N):
            dec = proj.decompose(estimates[i], j)
            reg |= dec.regularized
            scores[i, j] = sdr_sir_sar(dec)
    return scores, reg


def best_permutation_align(estimates, references, filter_len=512):
    """Assignment of estimates to references maximizing the mean SIR.

    Returns a tuple ``perm`` with ``perm[j]`` the estimate for reference ``j``.
    """
    estimates = np.atleast_2d(estimates)
    references = np.atleast_2d(references)
    scores, _ = _all_pairs(estimates, references, filter_len)
    return _best(scores)


def _best(scores):
    M, N, _ = scores.shape
    if M != N:
        raise ValueError("need as many estimates as references")
    if M > MAX_SOURCES:
        raise ValueError(f"at most {MAX_SOURCES} sources are supported, got {M}")
    best, best_val = None, -np.inf
    for perm in itertools.permutations(range(M)):
        val = np.mean([scores[perm[j], j, 1] for j in range(N)])
        if val > best_val:
            best, best_val = perm, val
    return tuple(best)


def evaluate(estimates, references, filter_len=512):
    """Metrics of the best assignment of ``estimates`` to ``references``.

    Parameters
    ----------
    estimates, references : np.ndarray, shape=(M, L)
    filter_len : int

    Returns
    -------
    MetricsReport
    """
    estimates = np.atleast_2d(np.asarray(estimates, dtype=float))
    references = np.atleast_2d(np.asarray(references, dtype=float))
    if estimates.shape != references.shape:
        raise ValueError(f"estimates {estimates.shape} and references {references.shape} differ")
    scores, reg = _all_pairs(estimates, references, filter_len)
    perm = _best(scores)
    sel = np.array([scores[perm[j], j] for j in range(len(perm))])
    return MetricsReport(sel[:, 0], sel[:, 1], sel[:, 2], perm, reg)


def improvement(report_est: MetricsReport, report_mix: MetricsReport):
    """Element-wise dB gains of an estimate over the unprocessed mixture."""
    return MetricsReport(
        report_est.sdr - report_mix.sdr,
        report_est.sir - report_mix.sir,
        report_est.sar - report_mix.sar,
        report_est.assignment,
        report_est.regularized or report_mix.regularized,
    )
