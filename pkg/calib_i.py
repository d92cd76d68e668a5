"""Calibration I: find demo-scale pretraining settings with a real effect."""
import tempfile
import time
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
print(f"corpus {len(corpus)} sentences vocab {len(vocab)}", flush=True)

cfg = RunConfig(dims=DIMS, optimizer=OPT, seed=0)
t0 = time.time()
scratch = train(t, cfg=cfg)
acc_s = masked_generation_accuracy(t, t.concept_ids, scratch.model, cfg)
print(f"scratch: first5 {np.mean(scratch.train_curve[:5]):.2f} "
      f"final {scratch.train_curve[-1]:.2f} regen {acc_s:.3f} "
      f"({time.time() - t0:.0f}s)", flush=True)

for steps in (1500, 4000, 8000):
    model = build_model(vocab, sorted(t.concept_ids), DIMS, seed=0)
    ensure_mct_parameters(model, seed=0)
    probe = mask_positions(corpus)[::7]
    a0 = mct_accuracy(corpus, model, probe)
    t0 = time.time()
    pretrain_encoder(corpus, model, replace(OPT, epochs=steps), seed=0)
    a1 = mct_accuracy(corpus, model, probe)
    warm = train(t, cfg=cfg, warm_start=model)
    acc_w = masked_generation_accuracy(t, t.concept_ids, warm.model, cfg)
    print(f"steps {steps}: mct {a0:.3f}->{a1:.3f} "
          f"first5 {np.mean(warm.train_curve[:5]):.2f} "
          f"final {warm.train_curve[-1]:.2f} regen {acc_w:.3f} "
          f"({time.time() - t0:.0f}s)", flush=True)
