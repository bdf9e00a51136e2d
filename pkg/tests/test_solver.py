import numpy as np
import pytest

from consistent_bss import mixsim
from consistent_bss.demixing import apply_demix, operator_norm
from consistent_bss.models import PenaltyModel
from consistent_bss.solver import (
    Diagnostics,
    SolverConfig,
    SolverDivergence,
    SolverState,
    init_state,
    objective,
    pds_step,
    run,
    separate,
)
from consistent_bss.stft import design_tight_window, istft, stft

from oracles import dense_pds

RNG = np.random.default_rng(31)


def laplace_sources(rng, n, T):
    return rng.laplace(size=(n, T)) * np.exp(1j * rng.uniform(0, 2 * np.pi, (n, T)))


def small_problem(seed=0, L=64, F=16, hop=8, M=2):
    rng = np.random.default_rng(seed)
    win = design_tight_window("hann", F, hop)
    x = rng.standard_normal((M, L))
    return stft(x, win), win


@pytest.mark.parametrize("variant", ["plain", "consistent"])
@pytest.mark.parametrize("kind", ["laplace_ica", "laplace_iva"])
def test_matches_dense_oracle(variant, kind):
    obs, win = small_problem()
    model = PenaltyModel(kind, 0.3)
    cfg = SolverConfig(mu1=0.7, mu2=0.9, alpha=1.5, iters=15, variant=variant,
                       normalize_input=False)
    W, _ = run(obs, model, cfg, win)
    ref = dense_pds(obs, 0.3, kind, 15, 0.7, 0.9, 1.5,
                    window=win.analysis if variant == "consistent" else None, hop=win.hop)
    np.testing.assert_allclose(W, ref, atol=1e-10 * max(1.0, np.abs(ref).max()))


def test_config_validation():
    for bad in ({"mu1": 0}, {"mu2": -1}, {"alpha": 2.0}, {"alpha": 0.0}, {"iters": -1},
                {"variant": "fast"}, {"log_every": 0}, {"input_level": 0.0}):
        with pytest.raises(ValueError):
            SolverConfig(**bad)
    cfg = SolverConfig()
    assert (cfg.mu1, cfg.mu2, cfg.alpha, cfg.iters) == (1.0, 1.0, 1.75, 2000)
    assert cfg.consistent and cfg.normalize_input


def test_zero_iterations_returns_identity():
    obs, win = small_problem()
    W, diag = run(obs, PenaltyModel(), SolverConfig(iters=0), win)
    np.testing.assert_array_equal(W, np.tile(np.eye(2), (9, 1, 1)))
    assert diag.iteration == [0]


def test_single_bin_separation():
    # one frequency bin, sparse complex sources, fixed 2x2 mixing
    rng = np.random.default_rng(2)
    s = laplace_sources(rng, 2, 400)
    A = np.array([[1.0, 0.6], [0.4, 1.0]]) + 0.3j * rng.standard_normal((2, 2))
    obs = (A @ s)[:, :, None]
    win = design_tight_window("rectangular", 1, 1)
    cfg = SolverConfig(variant="plain", iters=2000, input_level=0.1, log_every=100)
    W, diag = run(obs, PenaltyModel("laplace_ica", 0.1), cfg, win)
    G = np.abs(W[0] @ A)
    off = min(G[0, 1] ** 2 + G[1, 0] ** 2, G[0, 0] ** 2 + G[1, 1] ** 2)
    on = max(G[0, 1] ** 2 + G[1, 0] ** 2, G[0, 0] ** 2 + G[1, 1] ** 2)
    assert off / on < 1e-2
    assert diag.objective[-1] < diag.objective[0]


def test_normalization_makes_run_scale_invariant():
    obs, win = small_problem(3)
    cfg = SolverConfig(iters=20, variant="plain")
    W1, d1 = run(obs, PenaltyModel(), cfg, win)
    W2, d2 = run(5.0 * obs, PenaltyModel(), cfg, win)
    # the normalized problems coincide and outputs keep the input level
    np.testing.assert_allclose(apply_demix(W2, 5.0 * obs), 5.0 * apply_demix(W1, obs), rtol=1e-9, atol=1e-12)
    assert d2.scale == pytest.approx(5.0 * d1.scale)
    assert d1.scale == pytest.approx(operator_norm(obs))


def test_scale_covariance_diagnostic():
    """Scaling obs and lambda together: exploratory, the log-det prox uses a
    fixed step so exact covariance is not expected."""
    obs, win = small_problem(4)
    cfg = SolverConfig(iters=50, variant="plain", normalize_input=False)
    c = 3.0
    W1, _ = run(obs, PenaltyModel("laplace_ica", 0.1), cfg, win)
    W2, _ = run(c * obs, PenaltyModel("laplace_ica", 0.1 * c), cfg, win)
    s1 = apply_demix(W1, obs)
    s2 = apply_demix(W2, c * obs)
    dev = np.linalg.norm(s2 - c * s1) / np.linalg.norm(c * s1)
    assert np.isfinite(dev)
    print(f"scale covariance deviation: {dev:.3e}")


def test_diagnostics_trace_and_csv(tmp_path):
    obs, win = small_problem()
    cfg = SolverConfig(iters=7, log_every=3)
    W, diag = run(obs, PenaltyModel(), cfg, win)
    assert diag.iteration == [0, 3, 6, 7]
    assert diag.primal_change[0] == 0.0
    assert all(r >= 0 for r in diag.consistency_residual)
    obj, _, _ = objective(W, obs / diag.scale, PenaltyModel(), win)
    assert obj == pytest.approx(diag.objective[-1])
    path = tmp_path / "d.csv"
    diag.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,objective,objective_plain,primal_change,consistency_residual"
    assert len(lines) == 5


def test_callback_sees_every_iteration():
    obs, win = small_problem()
    seen = []
    run(obs, PenaltyModel(), SolverConfig(iters=5, log_every=5), win, callback=lambda s: seen.append(s.iteration))
    assert seen == [1, 2, 3, 4, 5]


def test_divergence_detected():
    obs, win = small_problem()
    obs[0, 0, 0] = np.inf
    cfg = SolverConfig(iters=3, normalize_input=False)
    with pytest.raises(SolverDivergence) as info:
        run(obs, PenaltyModel(), cfg, win)
    assert info.value.iteration == 1


def test_pds_step_pure():
    obs, win = small_problem()
    state = init_state(obs)
    cfg = SolverConfig(alpha=1.0)
    new = pds_step(state, obs, PenaltyModel(), cfg, win)
    assert isinstance(new, SolverState) and new.iteration == 1
    np.testing.assert_array_equal(state.w, np.tile(np.eye(2), (9, 1, 1)))
    assert not np.any(state.y)


def test_separate_shapes_and_errors():
    win = design_tight_window("hann", 64, 32)
    x = RNG.standard_normal((2, 300))
    y, W, diag = separate(x, PenaltyModel(), SolverConfig(iters=3), win)
    assert y.shape == x.shape and W.shape == (33, 2, 2)
    with pytest.raises(ValueError):
        separate(x[:1], PenaltyModel(), SolverConfig(iters=3), win)


def test_deterministic():
    win = design_tight_window("hann", 64, 32)
    x = RNG.standard_normal((2, 512))
    a = separate(x, PenaltyModel(), SolverConfig(iters=10), win)[0]
    b = separate(x, PenaltyModel(), SolverConfig(iters=10), win)[0]
    assert a.tobytes() == b.tobytes()


def test_instantaneous_bins_separate_up_to_permutation():
    """Per-bin ICA on an instantaneous mixture: most of the energy sits in
    bins that end up separated, whichever channel order each bin picks."""
    win = design_tight_window("hann", 1024, 512)
    s = np.stack([mixsim.speech_like(1), mixsim.speech_like(2, f0_range=(180, 260))])
    A = mixsim.random_mixing_matrix(0, 2)
    x = mixsim.mix_instantaneous(s, A)
    X = stft(np.pad(x, ((0, 0), (0, 128))), win)
    W, _ = run(X, PenaltyModel.default("laplace_ica"), SolverConfig(variant="plain", log_every=2000), win)
    G = np.abs(W @ A) ** 2
    diag, anti = G[:, 0, 0] + G[:, 1, 1], G[:, 0, 1] + G[:, 1, 0]
    ratio = np.minimum(diag, anti) / np.maximum(diag, anti)
    e = np.sum(np.abs(X) ** 2, axis=(0, 1))
    assert np.sum(e * (ratio < 0.01)) / e.sum() > 0.5


def test_single_step_by_hand_with_huge_lambda():
    # one bin, one frame, one channel: the penalty prox is zero, so y_hat = z
    x = 0.6 - 0.8j
    obs = np.array([[[x]]])
    win = design_tight_window("rectangular", 1, 1)
    mu1, mu2, alpha = 0.5, 2.0, 1.5
    cfg = SolverConfig(mu1=mu1, mu2=mu2, alpha=alpha, variant="plain")
    new = pds_step(init_state(obs), obs, PenaltyModel("laplace_ica", 1e12), cfg, win)
    w_hat = (1 + np.sqrt(1 + 4 * mu1)) / 2
    z = x * (2 * w_hat - 1)
    assert new.w[0, 0, 0] == pytest.approx(alpha * w_hat + (1 - alpha))
    assert new.y[0, 0, 0] == pytest.approx(alpha * z)


def test_first_primal_update_same_for_both_variants():
    obs, win = small_problem(5)
    model = PenaltyModel()
    a = pds_step(init_state(obs), obs, model, SolverConfig(variant="plain", alpha=1.0), win)
    b = pds_step(init_state(obs), obs, model, SolverConfig(variant="consistent", alpha=1.0), win)
    np.testing.assert_array_equal(a.w, b.w)


def test_relaxation_blends_with_alpha_one_step():
    obs, win = small_problem(6)
    state = init_state(obs)
    model = PenaltyModel()
    for _ in range(3):
        state = pds_step(state, obs, model, SolverConfig(alpha=1.0), win)
    one = pds_step(state, obs, model, SolverConfig(alpha=1.0), win)
    half = pds_step(state, obs, model, SolverConfig(alpha=0.5), win)
    np.testing.assert_allclose(half.w, 0.5 * one.w + 0.5 * state.w, atol=1e-12)
    np.testing.assert_allclose(half.y, 0.5 * one.y + 0.5 * state.y, atol=1e-12)


def test_separate_trivial_cases():
    win = design_tight_window("hann", 64, 32)
    x = RNG.standard_normal((2, 256))
    y, _, _ = separate(x, PenaltyModel(), SolverConfig(iters=0), win)
    np.testing.assert_allclose(y, x, atol=1e-12)
    y, _, _ = separate(x[::-1], PenaltyModel(), SolverConfig(iters=20), win)
    assert y.shape == (2, 256)


def test_seeded_convolutive_regression():
    """Output checksum frozen at first build (short run, rounded to 1e-9 of
    the peak so BLAS rounding noise does not flip it)."""
    import hashlib

    win = design_tight_window("hann", 1024, 512)
    s = np.stack([mixsim.speech_like(1, 1.0), mixsim.speech_like(2, 1.0, f0_range=(180, 260))])
    x = mixsim.mix_convolutive(s, mixsim.rir_grid(0, 2, taps=512))
    y, _, _ = separate(x, PenaltyModel.default("laplace_ica"), SolverConfig(iters=50, log_every=50), win)
    q = np.round(y / np.abs(y).max(), 9) + 0.0
    digest = hashlib.sha256(q.tobytes()).hexdigest()
    assert digest == FROZEN_DIGEST, digest


FROZEN_DIGEST = "24c996a23302defdf2eb543e3e56350454ceb9ffa1a1a24090425725fe76103a"
