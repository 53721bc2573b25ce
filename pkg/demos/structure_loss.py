"""How the structure loss scores attention against encoded distances.

Three attention patterns are compared on one generated function: uniform
attention, attention that decays with syntax-tree distance and attention
that grows with it.  The structure encoder is then fitted by gradient
descent for each pattern.

Run: python3 demos/structure_loss.py
"""

import numpy as np

from structaware.corpus import build_toy_corpus
from structaware.model import sgd_step
from structaware.structure_loss import StructureEncoder, per_head_structure_loss, structure_loss


def softmax(x):
    e = np.exp(x - x.max(-1, keepdims=True))
    return e / e.sum(-1, keepdims=True)


ex = build_toy_corpus(10, seed=4).examples[0]
d = ex.distances.astype(float)
n = len(d)
print(ex.source)
patterns = {"uniform": np.full((n, n), 1.0 / n),
            "decays with distance": softmax(-1.0 * d),
            "grows with distance": softmax(0.3 * d)}

for name, attn in patterns.items():
    enc = StructureEncoder()
    start = structure_loss(per_head_structure_loss(attn, d, enc)).item()
    for _ in range(300):
        for t in enc.params.values():
            t.grad = None
        loss = structure_loss(per_head_structure_loss(attn, d, enc))
        loss.backward()
        sgd_step(enc.params, 0.01, clip_norm=1.0)
    print(f"{name:>22}: loss {start:9.3f} at w=1,b=0 -> {loss.item():.4f} "
          f"(w={enc.w.item():+.4f}, b={enc.b.item():+.4f})")
