"""Calibration G: pretrained arm with 8000 MCT steps (criterion 10)."""
import time

from taxfill.autodiff import OptimizerConfig
from taxfill.datasets import synthetic_corpus, synthetic_taxonomy, write_corpus
from taxfill.model import Dims
from taxfill.pipeline import RunConfig, masked_generation_accuracy, train
from taxfill.pretrain import ingest_corpus

t = synthetic_taxonomy(60)
D20 = Dims(d_tok=24, seq_hidden=20, seq_layers=1, graph_hidden=12,
           graph_layers=2, readout_hidden=24, clf_hidden1=16, clf_hidden2=8,
           max_name_len=6)
OPT = OptimizerConfig(base_lr=0.035, min_lr=0.0035, cycle_epochs=200,
                      momentum=0.5, dropout_rate=0.0, epochs=200)

write_corpus("/tmp/calib_corpus.txt", synthetic_corpus(t, 20))
corpus, vocab = ingest_corpus("/tmp/calib_corpus.txt", t)


def first90(trace):
    return next((e for e, a in trace if a >= 0.9), None)


for seed in (0, 1, 2):
    cfg = RunConfig(dims=D20, optimizer=OPT, seed=seed, lam=2.0, r_neg=0.15,
                    pretrain_steps=8000)
    trace = []

    def probe(epoch, model, cfg=cfg, trace=trace):
        if (epoch + 1) % 10 == 0:
            acc = masked_generation_accuracy(t, t.concept_ids, model, cfg)
            trace.append((epoch + 1, round(acc, 3)))

    t0 = time.time()
    train(t, corpus=corpus, cfg=cfg, probe=probe)
    print(f"pre8000 seed {seed}: first90 {first90(trace)} "
          f"final {trace[-1][1]:.3f} ({time.time() - t0:.0f}s)", flush=True)
