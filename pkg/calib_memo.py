"""Stability grid: does removing negative sampling or softening the lr make
memorization reliable across seeds?"""
import time

from taxfill.autodiff import OptimizerConfig
from taxfill.datasets import synthetic_taxonomy
from taxfill.model import Dims
from taxfill.pipeline import RunConfig, masked_generation_accuracy, train

t = synthetic_taxonomy(60)
D20 = Dims(d_tok=24, seq_hidden=20, seq_layers=1, graph_hidden=12,
           graph_layers=2, readout_hidden=24, clf_hidden1=16, clf_hidden2=8,
           max_name_len=6)

GRID = [
    ("rneg0 lr.05 a120", 0.0, 0.05, 120),
    ("rneg0 lr.05 a160", 0.0, 0.05, 160),
    ("rneg.15 lr.035 a200", 0.15, 0.035, 200),
]

for label, r_neg, lr, epochs in GRID:
    opt = OptimizerConfig(base_lr=lr, min_lr=lr / 10, cycle_epochs=epochs,
                          momentum=0.5, dropout_rate=0.0, epochs=epochs)
    for seed in (0, 1, 2):
        cfg = RunConfig(dims=D20, optimizer=opt, seed=seed, lam=2.0,
                        r_neg=r_neg)
        trace = []

        def probe(epoch, model, cfg=cfg, trace=trace):
            if (epoch + 1) % 10 == 0:
                acc = masked_generation_accuracy(t, t.concept_ids, model, cfg)
                trace.append((epoch + 1, round(acc, 3)))

        t0 = time.time()
        train(t, cfg=cfg, probe=probe)
        first90 = next((e for e, a in trace if a >= 0.9), None)
        print(f"{label} seed {seed}: final {trace[-1][1]:.3f} "
              f"first90 {first90} ({time.time() - t0:.0f}s)", flush=True)
