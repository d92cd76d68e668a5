"""Calibration E: is MCT pretraining learning, and what does the scratch
baseline look like over the corpus vocabulary?"""
import time
from dataclasses import replace

import numpy as np

from taxfill.autodiff import OptimizerConfig
from taxfill.datasets import synthetic_corpus, synthetic_taxonomy, write_corpus
from taxfill.model import Dims, build_model
from taxfill.pipeline import RunConfig, masked_generation_accuracy, train
from taxfill.pretrain import (ingest_corpus, mask_positions, mct_accuracy,
                              pretrain_encoder)

t = synthetic_taxonomy(60)
D20 = Dims(d_tok=24, seq_hidden=20, seq_layers=1, graph_hidden=12,
           graph_layers=2, readout_hidden=24, clf_hidden1=16, clf_hidden2=8,
           max_name_len=6)
OPT = OptimizerConfig(base_lr=0.035, min_lr=0.0035, cycle_epochs=200,
                      momentum=0.5, dropout_rate=0.0, epochs=200)

write_corpus("/tmp/calib_corpus.txt", synthetic_corpus(t, 20))
corpus, vocab = ingest_corpus("/tmp/calib_corpus.txt", t)

# --- part 1: MCT accuracy before / after pretraining ------------------------
rng = np.random.default_rng(7)
all_pos = mask_positions(corpus)
sample = [all_pos[i] for i in rng.choice(len(all_pos), 200, replace=False)]
model = build_model(vocab, sorted(t.concept_ids), D20, seed=0)
from taxfill.pretrain import ensure_mct_parameters
ensure_mct_parameters(model, seed=0)
print(f"mct acc untrained: {mct_accuracy(corpus, model, sample):.3f}",
      flush=True)
losses = pretrain_encoder(corpus, model, replace(OPT, epochs=2000), seed=0)
print(f"mct acc @2000: {mct_accuracy(corpus, model, sample):.3f} "
      f"(loss {np.mean(losses[-100:]):.3f})", flush=True)
losses = pretrain_encoder(corpus, model, replace(OPT, epochs=6000), seed=0)
print(f"mct acc @+6000: {mct_accuracy(corpus, model, sample):.3f} "
      f"(loss {np.mean(losses[-100:]):.3f})", flush=True)


# --- part 2: scratch baseline over the corpus vocabulary --------------------
def first90(trace):
    return next((e for e, a in trace if a >= 0.9), None)


for seed in (0, 1, 2):
    cfg = RunConfig(dims=D20, optimizer=OPT, seed=seed, lam=2.0, r_neg=0.15,
                    pretrain_steps=0)
    trace = []

    def probe(epoch, model, cfg=cfg, trace=trace):
        if (epoch + 1) % 10 == 0:
            acc = masked_generation_accuracy(t, t.concept_ids, model, cfg)
            trace.append((epoch + 1, round(acc, 3)))

    t0 = time.time()
    train(t, corpus=corpus, cfg=cfg, probe=probe)
    print(f"scratch@corpus-vocab seed {seed}: first90 {first90(trace)} "
          f"final {trace[-1][1]:.3f} ({time.time() - t0:.0f}s)", flush=True)
