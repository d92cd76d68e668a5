"""
Masked-token pretraining on a mention corpus, then weight transfer.

The encoder learns to predict hidden tokens inside concept mentions
("… the <annealed ? fibers> market …" -> "natural").  Those weights are
then copied into a fresh model before joint training.
"""
import tempfile
from dataclasses import replace

import numpy as np

from taxfill import (Dims, OptimizerConfig, RunConfig, build_model,
                     ingest_corpus, masked_generation_accuracy, mct_accuracy,
                     pretrain_encoder, synthetic_corpus, synthetic_taxonomy,
                     train)
from taxfill.datasets import write_corpus
from taxfill.pretrain import ensure_mct_parameters, mask_positions

t = synthetic_taxonomy(30)
DIMS = Dims(d_tok=16, seq_hidden=12, seq_layers=1, graph_hidden=8,
            graph_layers=2, readout_hidden=16, clf_hidden1=8, clf_hidden2=6,
            max_name_len=6)
OPT = OptimizerConfig(base_lr=0.03, min_lr=0.003, cycle_epochs=80,
                      momentum=0.5, dropout_rate=0.0, epochs=80)

with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False) as fh:
    path = fh.name
write_corpus(path, synthetic_corpus(t, mentions_per_concept=20, seed=0))
corpus, vocab = ingest_corpus(path, t)
print(f"corpus: {len(corpus)} sentences, {len(vocab)} token vocabulary")

model = build_model(vocab, sorted(t.concept_ids), DIMS, seed=0)
ensure_mct_parameters(model, seed=0)
probe = mask_positions(corpus)[::7]  # every 7th maskable token
print(f"masked-token accuracy before pretraining: "
      f"{mct_accuracy(corpus, model, probe):.3f}")

# undertrained encoders transfer nothing useful; give it real steps
losses = pretrain_encoder(corpus, model, replace(OPT, epochs=8000), seed=0)
print(f"masked-token accuracy after 8000 steps:   "
      f"{mct_accuracy(corpus, model, probe):.3f} "
      f"(loss {np.mean(losses[:50]):.2f} -> {np.mean(losses[-50:]):.2f})")

# same joint training budget, with and without the pretrained encoder
cfg = RunConfig(dims=DIMS, optimizer=OPT, seed=0)
scratch = train(t, cfg=cfg)
warm = train(t, cfg=cfg, warm_start=model)
print("\n            final loss   regeneration acc")
for tag, run in (("scratch", scratch), ("warm", warm)):
    acc = masked_generation_accuracy(t, t.concept_ids, run.model, cfg)
    print(f"  {tag:<8}  {run.train_curve[-1]:10.3f}   {acc:.3f}")
