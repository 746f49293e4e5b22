"""Regenerates chi_sites_synthetic.txt: a two-state MMPP on [0, 20] mapped to
integer positions on a 4.6 Mb genome."""
import numpy as np

rng = np.random.default_rng(20161016)
switch = (0.5, 0.3)     # 0 -> 1, 1 -> 0
emission = (4.0, 20.0)  # events per unit time in each state
t, state, t_end = 0.0, 0, 20.0
events = []
while t < t_end:
    stay = min(rng.exponential(1.0 / switch[state]), t_end - t)
    count = rng.poisson(emission[state] * stay)
    events.extend(t + stay * rng.random(count))
    t += stay
    state = 1 - state
positions = np.round(np.sort(events) / t_end * 4_600_000).astype(int)
with open("chi_sites_synthetic.txt", "w") as f:
    f.writelines(f"{p}\n" for p in positions)
