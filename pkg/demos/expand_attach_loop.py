"""
Iterative taxonomy expansion: generate new concepts, hand them to an
attachment method, repeat.
=====================================================================

The loop is agnostic about HOW concepts get attached — anything with an
``attach(taxonomy, concepts)`` method works.  Here we wrap the builtin
classifier-guided attachment in a logger so every round's offer is
visible, and seed the loop with two out-of-vocabulary concepts.
"""
from taxfill import (Concept, Dims, OptimizerConfig, RunConfig,
                     ClassifierExtraction, gentaxo_plus_plus,
                     synthetic_taxonomy, train)

t = synthetic_taxonomy(24)
cfg = RunConfig(
    dims=Dims(d_tok=16, seq_hidden=12, seq_layers=1, graph_hidden=8,
              graph_layers=2, readout_hidden=16, clf_hidden1=8,
              clf_hidden2=6, max_name_len=6),
    optimizer=OptimizerConfig(base_lr=0.03, min_lr=0.003, cycle_epochs=100,
                              momentum=0.5, dropout_rate=0.0, epochs=100),
    seed=0,
    tau=0.9,
    max_iter=3,
)
result = train(t, cfg=cfg)


class LoggingExtraction:
    def __init__(self, inner):
        self.inner = inner

    def attach(self, taxonomy, concepts):
        print(f"  offered {len(concepts)} concept(s): "
              + ", ".join(" ".join(c.name) for c in concepts))
        out = self.inner.attach(taxonomy, concepts)
        print(f"  attached {len(out.concept_ids) - len(taxonomy.concept_ids)}")
        return out


seeds = [
    Concept("x1", ("woven", "mineral", "panels")),
    Concept("x2", ("woven", "mineral", "sheets")),
]
print(f"start: {len(t.concept_ids)} concepts; seeding "
      f"{', '.join(' '.join(c.name) for c in seeds)}")

report = gentaxo_plus_plus(t, seeds, result.model,
                           LoggingExtraction(ClassifierExtraction(result.model)),
                           cfg)

print(f"\nend: {len(report.taxonomy.concept_ids)} concepts "
      f"after {len(report.iterations)} round(s)")
for i, stats in enumerate(report.iterations):
    print(f"  round {i}: offered {stats.new_concepts}, "
          f"taxonomy size {stats.taxonomy_size}")
if report.insertions:
    print("generated along the way (deduplicated; proposals that name an")
    print("existing concept are recorded but never attached):")
    for text in dict.fromkeys(ins.text for ins in report.insertions):
        print(f"  {text}")
