# %% [markdown]
# # Hop by hop along a chain
#
# Three nodes in a line. Node 0 sends to node 2. Node 1 unwraps the message
# key with node 0's neighborhood key and wraps it again under its own key.
# The encrypted body is passed on untouched.

# %%
from pathlib import Path

from adhocsec import parse_scenario, run
from adhocsec.protocol import decode_packet

here = Path(__file__).resolve().parent if "__file__" in globals() else Path.cwd()
sc = parse_scenario((here.parent / "scenarios" / "chain3.scn").read_text())
res = run(sc)

# %%
for line in res.trace:
    kind = line.split("\t")[1]
    if kind in ("send", "forward", "deliver"):
        print(line)

# %%
first, second = (decode_packet(bytes.fromhex(line.rsplit("packet=", 1)[1]))
                 for line in res.trace if "\ttx\t" in line)
print("wrap owners", first.header.wrap_owner, second.header.wrap_owner)
print("body unchanged", first.body == second.body)
print("wrapped key changed", first.wrapped_mkey != second.wrapped_mkey)
