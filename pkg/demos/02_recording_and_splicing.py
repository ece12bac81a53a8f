"""Recording a classifier's raw pre-activations, sampling masks over them,
and splicing external values back into the forward pass.
"""

import numpy as np

from pilot.masks import sample_mask, splice
from pilot.nets import ClassifierSpec, build_classifier

rng = np.random.default_rng(0)

spec = ClassifierSpec(kind="mlp", input_shape=(6,), num_classes=3, hidden=(8, 8))
clf = build_classifier(spec, rng)
print("record layout (units per layer, input first, logits last):", clf.layout.sizes)

x = rng.standard_normal((4, 6))
logits, record = clf.forward_record(x)
flat = record.flatten()
print("flattened record shape:", flat.shape)

# The four mask priors. Logits positions are never masked.
for mode in ("x_drop", "x_aug", "a_drop", "a_aug"):
    mask = sample_mask(mode, 0.5, clf.layout, batch=4, rng=rng)
    per_layer = [int(mask.layer(l).sum()) for l in range(clf.layout.n_layers)]
    print(f"{mode:7s} masked units per layer: {per_layer}")

# Self-splice reproduces the recorded pass bit-exactly.
mask = sample_mask("a_drop", 0.5, clf.layout, 4, rng)
self_logits, _ = clf.forward_spliced(record, mask, flat)
print("\nself-splice bit-exact:", self_logits.data.tobytes() == logits.data.tobytes())

# Replacing one hidden unit's value changes the output, but no gradient can
# flow back into the inserted value: it sits behind a stop-gradient barrier.
col = clf.layout.offsets[1]
mask.values[:] = 0.0
mask.values[:, col] = 1.0
edited = flat.copy()
edited[:, col] += 1.0
new_logits, _ = clf.forward_spliced(record, mask, edited)
print("perturbed splice changed logits:", not np.allclose(new_logits.data, logits.data))

# The flat splice utility does the same combination outside any graph.
combined = splice(flat, edited, mask)
print("flat splice equals edit at masked column:",
      np.array_equal(combined[:, col], edited[:, col]))
