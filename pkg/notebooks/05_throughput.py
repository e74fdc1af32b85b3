# %% [markdown]
# # Throughput over time
#
# Ten nodes with a lossy channel. Metrics are bucketed into fixed windows; the
# CSV is ready for any plotting tool.

# %%
from pathlib import Path

from adhocsec import parse_scenario, run
from adhocsec.cli import emit_metrics_csv

here = Path(__file__).resolve().parent if "__file__" in globals() else Path.cwd()
sc = parse_scenario((here.parent / "scenarios" / "ten_nodes.scn").read_text())

# %%
res = run(sc)
print(res.summary())
print(dict(res.metrics.drops))

# %%
print(emit_metrics_csv(res.metrics, window=500_000))

# %% [markdown]
# Changing only the seed changes which hops lose packets.

# %%
for seed in range(5):
    sc.seed = seed
    print(seed, run(sc).metrics.received_count)
