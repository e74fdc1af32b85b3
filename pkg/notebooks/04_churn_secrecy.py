# %% [markdown]
# # Churn and secrecy
#
# When a node joins or leaves, only the nodes whose tree neighbors changed pick
# a fresh neighborhood key. We replay recorded packets against the keys a
# departed node kept, and against the keys a newcomer collected.

# %%
from pathlib import Path

from adhocsec import parse_scenario, run
from adhocsec.crypto import cipher_b_decrypt, derive_message_key
from adhocsec.scenario import JoinAction

here = Path(__file__).resolve().parent if "__file__" in globals() else Path.cwd()
sc = parse_scenario((here.parent / "scenarios" / "churn.scn").read_text())
res = run(sc)
macs = {n.id: n.mac for n in sc.nodes}
macs.update({a.node.id: a.node.mac for a in sc.script if isinstance(a, JoinAction)})

for rec in res.churn:
    print(rec.kind, rec.node, "rekeyed:", sorted(rec.changed))


# %%
def unwraps(tx, keys):
    h = tx.packet.header
    truth = derive_message_key(macs[h.src], h.seq).key
    return any(cipher_b_decrypt(k.key, tx.packet.wrapped_mkey) == truth for k in keys)


join, leave = res.churn
gone = list(res.departed[leave.node].key_history.values())
after_leave = [tx for tx in res.transmissions if tx.step > leave.step]
print("departed node reads", sum(unwraps(tx, gone) for tx in after_leave), "of", len(after_leave))

newcomer = list(res.nodes[join.node].key_history.values())
before_join = [tx for tx in res.transmissions if tx.step < join.step]
print("newcomer reads", sum(unwraps(tx, newcomer) for tx in before_join), "of", len(before_join))
