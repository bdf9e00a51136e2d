# %% [markdown]
# # Consistent vs plain ICA on a reverberant mixture
#
# Same data, same steps, with and without the projection inside the solver.
# Takes about a minute.

# %%
import numpy as np

from consistent_bss import evaluation as ev
from consistent_bss import mixsim
from consistent_bss.models import PenaltyModel
from consistent_bss.solver import SolverConfig, separate
from consistent_bss.stft import design_tight_window

seed = 0
win = design_tight_window("hann", 1024, 512)
s = np.stack([mixsim.speech_like(1), mixsim.speech_like(2, f0_range=(180, 260))])
x = mixsim.mix_convolutive(s, mixsim.rir_grid(seed, 2))
base = ev.evaluate(x, s, 512)

# %%
for variant in ("plain", "consistent"):
    y, W, diag = separate(x, PenaltyModel.default("laplace_ica"), SolverConfig(variant=variant, log_every=500), win)
    gain = ev.improvement(ev.evaluate(y, s, 512), base)
    print(f"{variant:10s} SDRi {gain.sdr.round(1)}  SIRi {gain.sir.round(1)}  "
          f"final consistency residual {diag.consistency_residual[-1]:.3f}")

# %% [markdown]
# With 2048-tap room responses and 1024-sample frames neither run separates
# much. On seed 0 the consistent run gains some SIR on the first source
# (about +3 dB against +1 dB) and pays for it in SDR. Its output also ends
# further from a consistent spectrogram (residual about 0.9 against 0.4):
# the projection acts on the dual variable, not on the returned estimate.
