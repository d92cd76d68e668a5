"""Calibration H: (a) combine the classifier-AUC winners, (b) leave-out
margin with a distinct-parents held-out set, plus per-leaf diagnosis."""
import time

import numpy as np

from taxfill.autodiff import OptimizerConfig
from taxfill.context import mask_concept, sample_negatives
from taxfill.datasets import synthetic_taxonomy
from taxfill.errors import NoContext
from taxfill.metrics import score_completion
from taxfill.model import Dims
from taxfill.pipeline import RunConfig, complete, score_position, train
from taxfill.taxonomy import (CandidatePosition, induced_subtaxonomy,
                              remove_concepts, split_taxonomy)

D20 = Dims(d_tok=24, seq_hidden=20, seq_layers=1, graph_hidden=12,
           graph_layers=2, readout_hidden=24, clf_hidden1=16, clf_hidden2=8,
           max_name_len=6)
OPT = OptimizerConfig(base_lr=0.035, min_lr=0.0035, cycle_epochs=200,
                      momentum=0.5, dropout_rate=0.0, epochs=200)


def auc_of(ps, ns):
    wins = sum((p > n) + 0.5 * (p == n) for p in ps for n in ns)
    return wins / (len(ps) * len(ns))


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
            p = score_position(result.model, t_tr, pos)[0]
        except NoContext:
            continue
        ps.append(p)
        for neg in sample_negatives(t_tr, pos, 5.0, rng):
            ns.append(score_position(result.model, t_tr, neg)[0])
    print(f"{tag}: AUC {auc_of(ps, ns):.4f} over {len(ps)}/{len(ns)} "
          f"pos {np.mean(ps):.3f}±{np.std(ps):.3f} "
          f"neg {np.mean(ns):.3f}±{np.std(ns):.3f} "
          f"({time.time() - t0:.0f}s)", flush=True)


split_auc("split-120 lam=0.5 clf-final", 120, lam=0.5,
          classifier_on_final_state=True)
split_auc("split-240 lam=0.5", 240, lam=0.5)

# --- criterion 4: compare held-out choices on freshly trained recipe models
t = synthetic_taxonomy(60)
last5 = sorted(cid for cid in t.concept_ids if not t.children(cid))[-5:]
seen_parents: set[frozenset] = set()
distinct5 = []
for cid in sorted(cid for cid in t.concept_ids if not t.children(cid)):
    ps = frozenset(t.parents(cid))
    if ps and ps not in seen_parents:
        seen_parents.add(ps)
        distinct5.append(cid)
    if len(distinct5) == 5:
        break
print(f"last5 {last5} / distinct5 {distinct5}", flush=True)

for seed in (0, 1, 2):
    cfg = RunConfig(dims=D20, optimizer=OPT, seed=seed, lam=2.0, r_neg=0.15)
    t0 = time.time()
    result = train(t, cfg=cfg)
    for tag, held in (("last5", last5), ("distinct5", distinct5)):
        host = remove_concepts(t, held)
        report = complete(host, result.model, cfg)
        scored = score_completion(report, t, set(held))
        print(f"seed {seed} {tag}: {scored.correct}/5 "
              f"({len(report.insertions)} insertions)", flush=True)
        if tag == "last5":
            for cid in held:
                pos = CandidatePosition(parents=frozenset(t.parents(cid)),
                                        children=frozenset(t.children(cid)))
                try:
                    p, name = score_position(result.model, host, pos)
                except NoContext:
                    p, name = float("nan"), ()
                gold = t.concept(cid).name
                mark = "=" if name == gold else "!"
                print(f"    {cid}: p={p:.3f} got {' '.join(name) or '-'} "
                      f"{mark} want {' '.join(gold)}", flush=True)
    print(f"  ({time.time() - t0:.0f}s)", flush=True)
