"""
Signatures and entropy
======================

A blob with no container signature whose 4 KiB windows are all close to
8 bits/byte is treated as encrypted. Compressed data is just as dense, so a
recognised signature always takes precedence.
"""
import gzip
import random

import numpy as np

from firmscan import classify_encryption, scan_signatures, shannon_entropy, window_entropies

noise = random.Random(1234).randbytes(64 * 1024)
text = (b"Linux version 2.6.36 (gcc 4.6) mounts squashfs and starts busybox. " * 1000)[:64 * 1024]
packed = gzip.compress(noise, mtime=0)

print("zeros   ", shannon_entropy(bytes(4096)))
print("uniform ", shannon_entropy(bytes(range(256)) * 16))

for name, blob in [("noise", noise), ("text", text), ("gzip", packed)]:
    v = classify_encryption(blob)
    hits = [(h.offset, h.format) for h in scan_signatures(blob)]
    print(f"{name:6} mean={v.mean_entropy:.3f} std={v.entropy_stddev:.3f} signatures={hits[:3]} encrypted={v.encrypted}")

# per-window profile, e.g. to spot a compressed payload after a plain header
profile = window_entropies(bytes(8192) + noise[:16384])
print(np.round(profile, 2))
