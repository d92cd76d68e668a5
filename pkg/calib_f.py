"""Calibration F: can the validity classifier reach high held-out AUC with
r_neg=0.15 training by reweighting its loss (lam) or changing its input?"""
import time

import numpy as np

from taxfill.autodiff import OptimizerConfig
from taxfill.context import mask_concept, sample_negatives
from taxfill.datasets import synthetic_taxonomy
from taxfill.errors import NoContext
from taxfill.model import Dims
from taxfill.pipeline import RunConfig, score_position, train
from taxfill.taxonomy import CandidatePosition, induced_subtaxonomy, split_taxonomy

D20 = Dims(d_tok=24, seq_hidden=20, seq_layers=1, graph_hidden=12,
           graph_layers=2, readout_hidden=24, clf_hidden1=16, clf_hidden2=8,
           max_name_len=6)
OPT = OptimizerConfig(base_lr=0.035, min_lr=0.0035, cycle_epochs=200,
                      momentum=0.5, dropout_rate=0.0, epochs=200)


def auc_of(ps, ns):
    wins = sum((p > n) + 0.5 * (p == n) for p in ps for n in ns)
    return wins / (len(ps) * len(ns))


def mem_auc(tag, **cfg_kw):
    t = synthetic_taxonomy(60)
    cfg = RunConfig(dims=D20, optimizer=OPT, seed=1, r_neg=0.15, **cfg_kw)
    t0 = time.time()
    result = train(t, cfg=cfg)
    rng = np.random.default_rng(99)
    ps, ns = [], []
    for cid in sorted(t.concept_ids):
        try:
            pos, host = mask_concept(t, cid)
            p, _ = score_position(result.model, host, pos, cfg)
            ps.append(p)
            for neg in sample_negatives(host, pos, 5.0, rng):
                ns.append(score_position(result.model, host, neg, cfg)[0])
        except NoContext:
            continue
    print(f"{tag}: AUC {auc_of(ps, ns):.4f} "
          f"pos {np.mean(ps):.3f}±{np.std(ps):.3f} "
          f"neg {np.mean(ns):.3f}±{np.std(ns):.3f} "
          f"({time.time() - t0:.0f}s)", flush=True)


def split_auc(tag, n_concepts, **cfg_kw):
    t = synthetic_taxonomy(n_concepts)
    train_ids, val_ids, test_ids = split_taxonomy(t, seed=0)
    t_tr = induced_subtaxonomy(t, train_ids)
    cfg = RunConfig(dims=D20, optimizer=OPT, seed=1, r_neg=0.15, **cfg_kw)
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
            p, _ = score_position(result.model, t_tr, pos, cfg)
        except NoContext:
            continue
        ps.append(p)
        for neg in sample_negatives(t_tr, pos, 5.0, rng):
            ns.append(score_position(result.model, t_tr, neg, cfg)[0])
    print(f"{tag}: AUC {auc_of(ps, ns):.4f} "
          f"pos {np.mean(ps):.3f}±{np.std(ps):.3f} "
          f"neg {np.mean(ns):.3f}±{np.std(ns):.3f} "
          f"({time.time() - t0:.0f}s)", flush=True)


mem_auc("mem-60 lam=6", lam=6.0)
mem_auc("mem-60 lam=2 clf-final", lam=2.0, classifier_on_final_state=True)
split_auc("split-120 lam=6", 120, lam=6.0)
