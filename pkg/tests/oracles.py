"""Independent dense reference implementations.

Everything here is built sample by sample from the defining sums, with no
FFTs and no code shared with the package, so agreement is a genuine check.
Only suitable for tiny grids.
"""

import itertools

import numpy as np
import scipy.linalg
from scipy.optimize import minimize


def dense_analysis(L, F, hop, window):
    """Full-grid STFT matrix, rows ``(t, k)`` for ``k = 0..F-1``."""
    T = L // hop
    A = np.zeros((T * F, L), dtype=complex)
    for t in range(T):
        for k in range(F):
            for m in range(F):
                n = (t * hop + m) % L
                A[t * F + k, n] += window[m] * np.exp(-2j * np.pi * k * m / F)
    return A


def dense_synthesis(L, F, hop, window):
    """Full-grid overlap-add matrix, columns ``(t, k)``."""
    T = L // hop
    S = np.zeros((L, T * F), dtype=complex)
    for t in range(T):
        for k in range(F):
            for m in range(F):
                n = (t * hop + m) % L
                S[n, t * F + k] += window[m] * np.exp(2j * np.pi * k * m / F)
    return S


def hermitian_extend(onesided, F):
    """``(..., T, F//2+1)`` -> ``(..., T, F)`` with ``X[F-k] = conj(X[k])``."""
    B = F // 2 + 1
    full = np.zeros(onesided.shape[:-1] + (F,), dtype=complex)
    full[..., :B] = onesided
    for k in range(1, F - B + 1):
        full[..., F - k] = np.conj(onesided[..., k])
    return full


def dense_stft(x, F, hop, window):
    L = len(x)
    full = (dense_analysis(L, F, hop, window) @ x).reshape(L // hop, F)
    return full[:, :F // 2 + 1]


def dense_istft(spec, F, hop, window):
    T = spec.shape[0]
    full = hermitian_extend(spec, F).reshape(-1)
    return np.real(dense_synthesis(T * hop, F, hop, window) @ full)


def dense_projection(L, F, hop, analysis, synthesis):
    """Full-grid matrix of stft(istft(.))."""
    return dense_analysis(L, F, hop, analysis) @ dense_synthesis(L, F, hop, synthesis)


def dense_observation(obs):
    """Matrix ``X`` with ``X @ vec(W) == apply_demix(W, obs).ravel()``.

    ``vec`` stacks bins, then rows, then columns; the output is indexed
    ``(n, t, f)`` as in ``(M, T, B)`` C order.
    """
    M, T, B = obs.shape
    X = np.zeros((M * T * B, B * M * M), dtype=complex)
    for n in range(M):
        for t in range(T):
            for f in range(B):
                row = (n * T + t) * B + f
                for m in range(M):
                    X[row, f * M * M + n * M + m] = obs[m, t, f]
    return X


def prox_objective(g, z, gamma, mu):
    """``g(gamma) + |z - gamma|^2 / (2 mu)``."""
    return g(gamma) + np.sum(np.abs(z - gamma) ** 2) / (2.0 * mu)


def neg_logabsdet(W):
    s = np.linalg.svd(W, compute_uv=False)
    if np.any(s <= 0):
        return np.inf
    return -np.sum(np.log(s))


def numeric_prox_logdet(W, mu):
    """Minimize ``-log|det V| + |W - V|^2/(2mu)`` over complex 2x2 ``V``
    by BFGS on the real parametrization, started at a few points."""
    shape = W.shape

    def unpack(v):
        h = v.size // 2
        return (v[:h] + 1j * v[h:]).reshape(shape)

    def f(v):
        V = unpack(v)
        sign, logabs = np.linalg.slogdet(V)
        if sign == 0:
            return 1e12
        return -logabs + np.sum(np.abs(W - V) ** 2) / (2.0 * mu)

    best = None
    starts = [W, W + np.eye(shape[0]), 2.0 * W + 0.1 * np.eye(shape[0])]
    for V0 in starts:
        v0 = np.concatenate([V0.real.ravel(), V0.imag.ravel()])
        res = minimize(f, v0, method="BFGS", options={"gtol": 1e-12, "maxiter": 10000})
        if best is None or res.fun < best.fun:
            best = res
    return unpack(best.x)


def brute_force_assignment(score):
    """Permutation maximizing ``mean_j score[perm[j], j]``."""
    M = score.shape[0]
    best, best_val = None, -np.inf
    for perm in itertools.permutations(range(M)):
        val = sum(score[perm[j], j] for j in range(M)) / M
        if val > best_val:
            best, best_val = perm, val
    return tuple(best)


def dense_pds(obs, lam, kind, iters, mu1, mu2, alpha, window=None, hop=None):
    """Reference primal-dual iterations on explicit matrices.

    ``window``/``hop`` select the consistent variant (tight window assumed);
    ``None`` gives the plain variant.  Returns the demixing stack.
    """
    M, T, B = obs.shape
    F = 2 * (B - 1)
    X = dense_observation(obs)
    c = np.full(B, 2.0)
    c[0] = c[-1] = 1.0
    if window is not None:
        L = T * hop
        A = dense_analysis(L, F, hop, window)
        S = dense_synthesis(L, F, hop, window)

        def proj(v):
            g = v.reshape(M, T, B)
            out = np.empty_like(g)
            for m in range(M):
                sig = np.real(S @ hermitian_extend(g[m], F).reshape(-1))
                out[m] = (A @ sig).reshape(T, F)[:, :B]
            return out.reshape(-1)
    else:
        proj = lambda v: v

    def prox_penalty(z):
        z = z.reshape(M, T, B)
        t = lam / mu2
        if kind == "laplace_ica":
            mag = np.abs(z)
        else:
            mag = np.repeat(np.sqrt((c * np.abs(z) ** 2).sum(-1))[..., None], B, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            f = np.where(mag > t, 1.0 - t / mag, 0.0)
        return (f * z).reshape(-1)

    def prox_ld(v):
        out = np.empty_like(v)
        for f in range(B):
            blk = slice(f * M * M, (f + 1) * M * M)
            U, s, Vh = scipy.linalg.svd(v[blk].reshape(M, M))
            s = (s + np.sqrt(s ** 2 + 4 * mu1)) / 2
            out[blk] = (U @ np.diag(s) @ Vh).reshape(-1)
        return out

    w = np.tile(np.eye(M).reshape(-1), B).astype(complex)
    y = np.zeros(M * T * B, dtype=complex)
    for _ in range(iters):
        v = w - mu1 * mu2 * (X.conj().T @ proj(y))
        if window is not None:
            # DC and Nyquist filters are real for real signals
            for f in (0, B - 1):
                blk = slice(f * M * M, (f + 1) * M * M)
                v[blk] = v[blk].real
        w_hat = prox_ld(v)
        z = y + proj(X @ (2 * w_hat - w))
        y_hat = z - prox_penalty(z)
        w = alpha * w_hat + (1 - alpha) * w
        y = alpha * y_hat + (1 - alpha) * y
    return w.reshape(B, M, M)
