"""Calibration A: r_neg sweep shape (seed 1) and held-out classifier AUC."""
import time

import numpy as np

from taxfill.autodiff import OptimizerConfig, no_grad
from taxfill.context import build_training_example, mask_concept, sample_negatives
from taxfill.datasets import synthetic_taxonomy
from taxfill.errors import NoContext
from taxfill.model import Dims, encode_position
from taxfill.pipeline import RunConfig, masked_generation_accuracy, train
from taxfill.taxonomy import induced_subtaxonomy, split_taxonomy

t = synthetic_taxonomy(60)
D20 = Dims(d_tok=24, seq_hidden=20, seq_layers=1, graph_hidden=12,
           graph_layers=2, readout_hidden=24, clf_hidden1=16, clf_hidden2=8,
           max_name_len=6)
OPT = OptimizerConfig(base_lr=0.035, min_lr=0.0035, cycle_epochs=200,
                      momentum=0.5, dropout_rate=0.0, epochs=200)

# --- criterion 6 shape: r_neg sweep at seed 1 (0.15 known: 0.917)
for r_neg in (0.0, 0.5, 1.0):
    cfg = RunConfig(dims=D20, optimizer=OPT, seed=1, lam=2.0, r_neg=r_neg)
    t0 = time.time()
    result = train(t, cfg=cfg)
    acc = masked_generation_accuracy(t, t.concept_ids, result.model, cfg)
    print(f"sweep r_neg={r_neg}: acc {acc:.3f} ({time.time() - t0:.0f}s)",
          flush=True)

# --- criterion 5: AUC on held-out positions, r_neg=0.15 training
def classifier_score(model, host, pos, cfg):
    ex = build_training_example(host, pos, None, cfg.relation_set, cfg.k_hops)
    with no_grad():
        fused = encode_position(model, ex)
        return float(model.classifier.probability(model.store,
                                                  fused.v_fuse).data[0])

train_ids, val_ids, test_ids = split_taxonomy(t, seed=0)
t_train = induced_subtaxonomy(t, train_ids)
cfg = RunConfig(dims=D20, optimizer=OPT, seed=1, lam=2.0, r_neg=0.15)
result = train(t_train, cfg=cfg)
held = sorted(val_ids | test_ids)
rng = np.random.default_rng(99)
pos_scores, neg_scores = [], []
for cid in held:
    gold_parents = t.parents(cid)
    if not gold_parents <= train_ids:
        continue
    pos, host = mask_concept(t, cid)
    try:
        pos_scores.append(classifier_score(result.model, host, pos, cfg))
        for neg in sample_negatives(host, pos, 1.0, rng):
            neg_scores.append(classifier_score(result.model, host, neg, cfg))
    except NoContext:
        continue
wins = sum((p > n) + 0.5 * (p == n) for p in pos_scores for n in neg_scores)
auc = wins / (len(pos_scores) * len(neg_scores))
print(f"AUC: {auc:.4f} over {len(pos_scores)} valid / {len(neg_scores)} "
      f"negative held-out positions", flush=True)
