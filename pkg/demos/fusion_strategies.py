"""Compare the four ways of combining sentence and subgraph encodings.

mean / max pool the two views, attention learns per-view weights, and
concat keeps both and lets the readout sort it out.
"""
from taxfill import (Dims, OptimizerConfig, RunConfig,
                     masked_generation_accuracy, synthetic_taxonomy, train)

t = synthetic_taxonomy(24)
DIMS = Dims(d_tok=16, seq_hidden=12, seq_layers=1, graph_hidden=8,
            graph_layers=2, readout_hidden=16, clf_hidden1=8, clf_hidden2=6,
            max_name_len=6)
OPT = OptimizerConfig(base_lr=0.03, min_lr=0.003, cycle_epochs=100,
                      momentum=0.5, dropout_rate=0.0, epochs=100)

print("fusion      final loss   regeneration acc")
for strategy in ("mean", "max", "attention", "concat"):
    cfg = RunConfig(dims=DIMS, optimizer=OPT, seed=0, fusion_strategy=strategy)
    result = train(t, cfg=cfg)
    acc = masked_generation_accuracy(t, t.concept_ids, result.model, cfg)
    print(f"{strategy:<10}  {result.train_curve[-1]:10.3f}   {acc:.3f}")
