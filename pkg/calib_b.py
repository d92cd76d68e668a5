"""Calibration B: pretraining speed-up (criterion 10) and leave-out
reinsertion (criterion 4)."""
import time

from taxfill.autodiff import OptimizerConfig
from taxfill.datasets import synthetic_corpus, synthetic_taxonomy, write_corpus
from taxfill.metrics import score_completion
from taxfill.model import Dims
from taxfill.pipeline import RunConfig, complete, masked_generation_accuracy, train
from taxfill.pretrain import ingest_corpus
from taxfill.taxonomy import remove_concepts

t = synthetic_taxonomy(60)
D20 = Dims(d_tok=24, seq_hidden=20, seq_layers=1, graph_hidden=12,
           graph_layers=2, readout_hidden=24, clf_hidden1=16, clf_hidden2=8,
           max_name_len=6)
OPT = OptimizerConfig(base_lr=0.035, min_lr=0.0035, cycle_epochs=200,
                      momentum=0.5, dropout_rate=0.0, epochs=200)

write_corpus("/tmp/calib_corpus.txt", synthetic_corpus(t, 20))
corpus, vocab = ingest_corpus("/tmp/calib_corpus.txt", t)
print(f"corpus: {len(corpus)} sentences, vocab {len(vocab)}", flush=True)


def first90(trace):
    return next((e for e, a in trace if a >= 0.9), None)


# --- criterion 10: pretrained arm (scratch first90 known: 150/110/150)
for seed in (0, 1, 2):
    cfg = RunConfig(dims=D20, optimizer=OPT, seed=seed, lam=2.0, r_neg=0.15,
                    pretrain_steps=2000)
    trace = []

    def probe(epoch, model, cfg=cfg, trace=trace):
        if (epoch + 1) % 10 == 0:
            acc = masked_generation_accuracy(t, t.concept_ids, model, cfg)
            trace.append((epoch + 1, round(acc, 3)))

    t0 = time.time()
    train(t, corpus=corpus, cfg=cfg, probe=probe)
    print(f"pretrained seed {seed}: first90 {first90(trace)} "
          f"final {trace[-1][1]:.3f} ({time.time() - t0:.0f}s)", flush=True)

# --- criterion 4: leave-out reinsertion from scratch-trained models
leaves = sorted(cid for cid in t.concept_ids
                if not t.children(cid))[-5:]
print("held out:", leaves, flush=True)
for seed in (0, 1, 2):
    cfg = RunConfig(dims=D20, optimizer=OPT, seed=seed, lam=2.0, r_neg=0.15)
    t0 = time.time()
    result = train(t, cfg=cfg)
    host = remove_concepts(t, leaves)
    report = complete(host, result.model, cfg)
    scored = score_completion(report, t, set(leaves))
    print(f"leave-out seed {seed}: reinserted {scored.correct}/5, "
          f"total insertions {len(report.insertions)} "
          f"({time.time() - t0:.0f}s)", flush=True)
