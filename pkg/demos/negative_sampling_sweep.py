"""Sweep the negative-sampling rate and report masked regeneration accuracy.

Negatives are corrupted candidate positions (a random unrelated concept
substituted into the parent or child set).  r_neg controls how many are
drawn per valid position each epoch.
"""
from taxfill import (Dims, OptimizerConfig, RunConfig,
                     masked_generation_accuracy, synthetic_taxonomy, train)

t = synthetic_taxonomy(24)
DIMS = Dims(d_tok=16, seq_hidden=12, seq_layers=1, graph_hidden=8,
            graph_layers=2, readout_hidden=16, clf_hidden1=8, clf_hidden2=6,
            max_name_len=6)
OPT = OptimizerConfig(base_lr=0.03, min_lr=0.003, cycle_epochs=100,
                      momentum=0.5, dropout_rate=0.0, epochs=100)

print("r_neg   accuracy")
for r_neg in (0.0, 0.15, 0.5, 1.0):
    cfg = RunConfig(dims=DIMS, optimizer=OPT, seed=0, r_neg=r_neg)
    result = train(t, cfg=cfg)
    acc = masked_generation_accuracy(t, t.concept_ids, result.model, cfg)
    print(f"{r_neg:5.2f}   {acc:.3f}")
