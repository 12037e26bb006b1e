"""Expected 1%-outage rates of the three decoders over 16 Rayleigh subcarriers.

All decoders are evaluated on the same channel and estimate draws, so the
differences between columns are much less noisy than each column alone.
"""

from bicmcee.harness import run_outage_sweep, snr_at_rate
from bicmcee.modem import MetricMode

snr = [float(s) for s in range(-8, 9, 2)]
rows = run_outage_sweep(snr, list(MetricMode), M=16, n_pilots=1, gamma=0.01, n_outer=100, n_inner=1000, run_seed=7)

table = {}
for r in rows:
    table.setdefault(r.snr_db, {})[r.decoder] = r.mean_rate_bits
print(f"{'SNR dB':>6} " + " ".join(f"{m.value:>11}" for m in MetricMode))
for s in snr:
    print(f"{s:6.1f} " + " ".join(f"{table[s][m]:11.3f}" for m in MetricMode))

for m in MetricMode:
    x = snr_at_rate(snr, [table[s][m] for s in snr], 4.0)
    print(f"{m.value:>10} needs {x:.2f} dB for 4 bits per OFDM symbol")
