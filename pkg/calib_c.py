"""Calibration C: classifier AUC protocol variants for the discrimination gate."""
import time

import numpy as np

from taxfill.autodiff import OptimizerConfig, no_grad
from taxfill.context import build_training_example, mask_concept, sample_negatives
from taxfill.datasets import synthetic_taxonomy
from taxfill.errors import NoContext
from taxfill.model import Dims, encode_position
from taxfill.pipeline import RunConfig, train
from taxfill.taxonomy import CandidatePosition, induced_subtaxonomy, split_taxonomy

D20 = Dims(d_tok=24, seq_hidden=20, seq_layers=1, graph_hidden=12,
           graph_layers=2, readout_hidden=24, clf_hidden1=16, clf_hidden2=8,
           max_name_len=6)
OPT = OptimizerConfig(base_lr=0.035, min_lr=0.0035, cycle_epochs=200,
                      momentum=0.5, dropout_rate=0.0, epochs=200)


def classifier_score(model, host, pos, cfg):
    ex = build_training_example(host, pos, None, cfg.relation_set, cfg.k_hops)
    with no_grad():
        fused = encode_position(model, ex)
        return float(model.classifier.probability(model.store,
                                                  fused.v_fuse).data[0])


def auc(pos_scores, neg_scores):
    wins = sum((p > n) + 0.5 * (p == n) for p in pos_scores for n in neg_scores)
    return wins / (len(pos_scores) * len(neg_scores))


# --- variant B: memorization-regime model, fresh negative draws -------------
t = synthetic_taxonomy(60)
cfg = RunConfig(dims=D20, optimizer=OPT, seed=1, lam=2.0, r_neg=0.15)
t0 = time.time()
result = train(t, cfg=cfg)
rng = np.random.default_rng(99)
ps, ns = [], []
for cid in sorted(t.concept_ids):
    try:
        pos, host = mask_concept(t, cid)
        ps.append(classifier_score(result.model, host, pos, cfg))
        for neg in sample_negatives(host, pos, 5.0, rng):
            ns.append(classifier_score(result.model, host, neg, cfg))
    except NoContext:
        continue
print(f"B memorization-60: AUC {auc(ps, ns):.4f} over {len(ps)}/{len(ns)} "
      f"({time.time() - t0:.0f}s)", flush=True)


# --- variants A: split-trained model, held-out positions vs fresh negatives -
def split_auc(n_concepts):
    t = synthetic_taxonomy(n_concepts)
    train_ids, val_ids, test_ids = split_taxonomy(t, seed=0)
    t_tr = induced_subtaxonomy(t, train_ids)
    cfg = RunConfig(dims=D20, optimizer=OPT, seed=1, lam=2.0, r_neg=0.15)
    t0 = time.time()
    result = train(t_tr, cfg=cfg)
    rng = np.random.default_rng(99)
    ps, ns = [], []
    for cid in sorted(val_ids | test_ids):
        parents = frozenset(t.parents(cid) & train_ids)
        children = frozenset(t.children(cid) & train_ids)
        if not parents:
            continue
        pos = CandidatePosition(parents=parents, children=children)
        try:
            p = classifier_score(result.model, t_tr, pos, cfg)
        except NoContext:
            continue
        ps.append(p)
        for neg in sample_negatives(t_tr, pos, 5.0, rng):
            ns.append(classifier_score(result.model, t_tr, neg, cfg))
    print(f"A split-{n_concepts}: AUC {auc(ps, ns):.4f} over {len(ps)}/{len(ns)} "
          f"({time.time() - t0:.0f}s)", flush=True)


split_auc(60)
split_auc(120)
