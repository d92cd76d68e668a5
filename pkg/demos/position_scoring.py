"""Rank every candidate position in a hand-built taxonomy.

Uses the little protein hierarchy from the dataset helpers; after a
short training run, each enumerable hole gets a validity probability
and a greedy-decoded name.
"""
from taxfill import (Dims, OptimizerConfig, RunConfig, protein_taxonomy,
                     score_position, train)
from taxfill.context import enumerate_candidate_positions

t = protein_taxonomy()
for cid in sorted(t.concept_ids):
    parents = ", ".join(sorted(" ".join(t.concept(p).name) for p in t.parents(cid))) or "(root)"
    name = " ".join(t.concept(cid).name)
    print(f"  {name:<40} under {parents}")

cfg = RunConfig(
    dims=Dims(d_tok=12, seq_hidden=10, seq_layers=1, graph_hidden=6,
              graph_layers=2, readout_hidden=12, clf_hidden1=6,
              clf_hidden2=4, max_name_len=6),
    optimizer=OptimizerConfig(base_lr=0.03, min_lr=0.003, cycle_epochs=150,
                              momentum=0.5, dropout_rate=0.0, epochs=150),
    seed=0,
)
result = train(t, cfg=cfg)

rows = []
for pos in enumerate_candidate_positions(t, k_hops=1):
    p, name = score_position(result.model, t, pos)
    rows.append((p, name, pos))

print("\ncandidate positions, most plausible first:")
for p, name, pos in sorted(rows, key=lambda r: -r[0]):
    parents = ", ".join(sorted(" ".join(t.concept(x).name) for x in pos.parents)) or "-"
    children = ", ".join(sorted(" ".join(t.concept(x).name) for x in pos.children)) or "-"
    print(f"  p={p:.3f}  '{' '.join(name)}'  parents[{parents}] "
          f"children[{children}]")
