"""Calibration D: r_neg sweep at seeds 0 and 2 (seed 1 measured separately)."""
import time

from taxfill.autodiff import OptimizerConfig
from taxfill.datasets import synthetic_taxonomy
from taxfill.model import Dims
from taxfill.pipeline import RunConfig, masked_generation_accuracy, train

t = synthetic_taxonomy(60)
D20 = Dims(d_tok=24, seq_hidden=20, seq_layers=1, graph_hidden=12,
           graph_layers=2, readout_hidden=24, clf_hidden1=16, clf_hidden2=8,
           max_name_len=6)
OPT = OptimizerConfig(base_lr=0.035, min_lr=0.0035, cycle_epochs=200,
                      momentum=0.5, dropout_rate=0.0, epochs=200)

for seed in (0, 2):
    for r_neg in (0.0, 0.5, 1.0):
        cfg = RunConfig(dims=D20, optimizer=OPT, seed=seed, lam=2.0, r_neg=r_neg)
        t0 = time.time()
        result = train(t, cfg=cfg)
        acc = masked_generation_accuracy(t, t.concept_ids, result.model, cfg)
        print(f"seed {seed} r_neg={r_neg}: acc {acc:.3f} "
              f"({time.time() - t0:.0f}s)", flush=True)
