# %% [markdown]
# # Two layers of encryption
#
# The body is encrypted once at the source under a message key built from the
# source MAC and a sequence number. That message key is then wrapped under
# the sender's neighborhood key, and the wrap is redone at every hop.
# The ciphers here are toys and give no real security.

# %%
from adhocsec.crypto import (
    MacAddress,
    cipher_a_decrypt,
    cipher_a_encrypt,
    cipher_b_decrypt,
    cipher_b_encrypt,
    derive_message_key,
    generate_neighborhood_key,
    rsa_keypair_from_primes,
    rsa_unwrap,
    rsa_wrap,
)

mac = MacAddress.parse("3a:91:c4:07:e2:5d")
mkey = derive_message_key(mac, 7)
print(mkey.key.hex())

# %%
body = cipher_a_encrypt(mkey.key, b"supplies at dawn")
print(body.hex(), cipher_a_decrypt(mkey.key, body))

# %% [markdown]
# Wrapping the message key under a neighborhood key uses the XOR keystream cipher.

# %%
nkey = generate_neighborhood_key(owner=1, version=0, seed=42)
wrapped = cipher_b_encrypt(nkey.key, mkey.key)
assert cipher_b_decrypt(nkey.key, wrapped) == mkey.key
print(wrapped.hex())

# %% [markdown]
# Neighborhood keys travel to tree neighbors wrapped octet by octet under RSA.

# %%
kp = rsa_keypair_from_primes(61, 53)
print(kp.n, kp.e, kp.d)
residues = rsa_wrap(kp.public, nkey.key)
print(residues[:4], rsa_unwrap(kp, residues) == nkey.key)
