# %% [markdown]
# # Why frequency-wise permutations are not consistent
#
# Give each time-frequency point to one source only, then swap the sources
# in some bins. The swapped arrays are no longer STFTs of anything, and the
# projection smears each source into the other channel.

# %%
import numpy as np

from consistent_bss import mixsim
from consistent_bss.io import fixture_path, read_wav
from consistent_bss.stft import design_tight_window, padded_length, stft

win = design_tight_window("hann", 1024, 512)
s = np.concatenate([read_wav(fixture_path(n))[0] for n in ("speech_a.wav", "speech_b.wav")])
s = np.pad(s, ((0, 0), (0, padded_length(s.shape[1], win) - s.shape[1])))
specs = mixsim.make_exclusive(stft(s, win))

# %%
for name, plan in [
    ("identity", mixsim.PermutationPlan.identity(win.n_bins, 2)),
    ("swap all bins", mixsim.PermutationPlan.reversal(win.n_bins, 2)),
    ("random per bin", mixsim.PermutationPlan.random(0, win.n_bins, 2)),
]:
    leak, _ = mixsim.permutation_leakage(specs, plan, win)
    print(f"{name:15s} leakage {leak:.4f}")

# %% [markdown]
# Swapping every bin is just relabelling the channels, so it leaks nothing.
# Only inconsistent orderings across frequency do. That is the handle the
# consistent solver has on the permutation problem.
