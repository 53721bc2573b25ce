"""A paired SAT / baseline run on the toy role-labelling corpus.

Both runs share the corpus, initialisation and batch order; only alpha
differs.  Prints the structure-loss curve of the SAT run and the final
metrics of both.  Takes about a minute.

Run: python3 demos/paired_training.py [steps]
"""

import sys

from structaware.training import RunConfig, train

steps = int(sys.argv[1]) if len(sys.argv) > 1 else 300
config = RunConfig(steps=steps)
results = {alpha: train(config.replace(alpha=alpha)) for alpha in (0.0, 0.1)}

sat = results[0.1].records
print("step  structure_loss  task_loss")
for r in sat[:: max(1, steps // 10)] + [sat[-1]]:
    print(f"{r.step:>4}  {r.structure_loss:14.4f}  {r.task_loss:9.4f}")

for alpha, res in results.items():
    f = res.final_metrics
    print(f"alpha={alpha}: BLEU {f['bleu']:.2f}  EM {f['exact_match']:.3f}  "
          f"CAT-style {f['cat_score']:.4f}  encoder w={f['encoder']['w']:+.3f}")
