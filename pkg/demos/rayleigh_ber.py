"""Coded BER on Rayleigh block fading with two pilot symbols.

A short sweep (few frames per point) so it runs in about a minute.  Use the
``bicmcee ber`` command for full-length runs.
"""

from bicmcee.harness import FrameConfig, StopRule, ebn0_at_ber, run_ber_sweep
from bicmcee.modem import MetricMode

modes = list(MetricMode)
grid = [6.0, 8.0, 10.0, 12.0, 14.0]
points = run_ber_sweep(FrameConfig(n_pilots=2), grid, modes, run_seed=1,
                       stop=StopRule(max_bits=400_000, max_errors=100))

print(f"{'Eb/N0':>6} " + " ".join(f"{m.value:>11}" for m in modes))
for e in grid:
    row = {p.decoder: p.ber for p in points if p.ebn0_db == e}
    print(f"{e:6.1f} " + " ".join(f"{row[m]:11.2e}" for m in modes))

for m in modes:
    curve = [p for p in points if p.decoder is m]
    x = ebn0_at_ber([p.ebn0_db for p in curve], [p.ber for p in curve])
    print(f"{m.value:>10} reaches BER 1e-3 at {x:.2f} dB")
