"""
Device embeddings for a simulated home
======================================

A resident moves between a kitchen, a bedroom and a bathroom. Sensors in
the same room fire together, so after sessionizing the event log and
training skip-gram embeddings, devices from one room should end up close
to each other.

Run with ``python3 demos/plot_synthetic_home.py [output_dir]``.
"""

import sys
from pathlib import Path

import numpy as np

from devicevec.embedding import TrainingConfig, train_skipgram
from devicevec.event_log import FilterPolicy, extract_transitions, filter_events, parse_log
from devicevec.pipeline.evaluation import evaluate
from devicevec.pipeline.synthetic import generate_synthetic_log, ground_truth, three_room_home
from devicevec.projection import ProjectionConfig, emit_scatter, project_model
from devicevec.sessionizer import SessionizerConfig, corpus_stats, sessionize
from devicevec.similarity import similarity_matrix, top_k_neighbors

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-out")
out.mkdir(parents=True, exist_ok=True)

###############################################################################
# Simulate 30 days and parse the log back. The generator writes the same
# text format a real installation would.
spec = three_room_home(seed=0, days=30)
lines = generate_synthetic_log(spec)
print(lines[0])
print(lines[1])
events, report = parse_log(lines)
print(report.as_dict())

###############################################################################
# Keep only state changes, then cut sessions wherever nothing fires for
# more than 60 seconds.
events = extract_transitions(filter_events(events, FilterPolicy()))
corpus = sessionize(events, SessionizerConfig(gap=60.0))
stats = corpus_stats(corpus)
print(f"{stats.session_count} sessions, {stats.token_count} tokens, {stats.vocab_size} devices")
print("first session:", " ".join(corpus.sessions[0].tokens))

###############################################################################
# Train 100-dimensional embeddings.
model = train_skipgram(corpus, TrainingConfig(dim=100, seed=0))
print("mean loss per epoch:", np.round(model.loss_trace, 3))

###############################################################################
# Nearest neighbors of a kitchen door and a bathroom fan.
for token in ("D001", "F001"):
    print(top_k_neighbors(model, token, k=5).format())

###############################################################################
# How well do rooms separate? intra/inter are mean cosines of device pairs
# that do / do not share a room.
truth = ground_truth(spec)
rep = evaluate(model, truth, k=3)
print(f"intra {rep.intra_mean:.3f}  inter {rep.inter_mean:.3f}  margin {rep.margin:.3f}  "
      f"recall@3 {rep.mean_recall:.3f}")

sim = similarity_matrix(model)
rooms = sorted(set(truth.values()))
for a in rooms:
    row = []
    for b in rooms:
        ia = [i for i, t in enumerate(model.tokens) if truth[t] == a]
        ib = [i for i, t in enumerate(model.tokens) if truth[t] == b]
        block = sim[np.ix_(ia, ib)]
        row.append(block[~np.eye(len(ia), dtype=bool)].mean() if a == b else block.mean())
    print(f"{a:>9}", " ".join(f"{v:6.3f}" for v in row))

###############################################################################
# PCA + t-SNE scatter. Colors follow the sensor kind; rooms show up as
# clusters.
points, tsne = project_model(model, ProjectionConfig(perplexity=5.0, learning_rate="auto"))
emit_scatter(points, out / "synthetic_tsne.svg", "svg")
emit_scatter(points, out / "synthetic_tsne.csv", "csv")
print(f"KL {tsne.kl_trace[-1]:.3f}; plot written to {out / 'synthetic_tsne.svg'}")
