# %% [markdown]
# # What the consistency projection does
#
# A spectrogram is *consistent* when some time signal has exactly that STFT.
# Most arrays are not. Mapping through the inverse STFT and back lands on the
# nearest consistent array, and doing it a second time changes nothing.

# %%
import numpy as np

from consistent_bss import mixsim
from consistent_bss.io import fixture_path, read_wav
from consistent_bss.stft import (
    consistency_residual,
    design_tight_window,
    istft,
    norm,
    padded_length,
    project_consistent,
    stft,
)

win = design_tight_window("hann", 1024, 512)
x, fs = read_wav(fixture_path("speech_a.wav"))
x = np.pad(x[0], (0, padded_length(x.shape[1], win) - x.shape[1]))
X = stft(x, win)
print(X.shape, "frames x bins")

# %% [markdown]
# The STFT of a real signal is consistent already.

# %%
print("residual of a true STFT:", consistency_residual(X, win))

# %% [markdown]
# Dropping half of the coefficients at random breaks that. The projection
# fills the holes from the neighbours.

# %%
G = mixsim.dropout(X, 0.5, seed=0)
P1 = project_consistent(G, win)
P2 = project_consistent(P1, win)
print("residual after dropout:", consistency_residual(G, win))
print("second projection moves it by", norm(P2 - P1, 1024) / norm(P1, 1024))

# %% [markdown]
# A single isolated coefficient is spread along frequency, and a little
# along time.

# %%
pulse = np.zeros_like(X)
pulse[40, 100] = 1.0
spread = np.abs(project_consistent(pulse, win))
print("centre magnitude:", spread[40, 100].round(3))
print("neighbouring bins:", spread[40, 97:104].round(3))
print("neighbouring frames:", spread[38:43, 100].round(3))

# %% [markdown]
# The part removed by the projection is invisible in the time domain.

# %%
nu = G - P1
print("|istft(removed part)| =", np.linalg.norm(istft(nu, win)))
