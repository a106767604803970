"""
Choosing the session gap
========================

The gap decides where one "sentence" of device firings ends. Short gaps
give many short sessions; long gaps merge consecutive room visits. This
demo runs the whole workflow for 10 s, 60 s and 600 s and compares the
room separation of the resulting embeddings.

Run with ``python3 demos/plot_gap_sweep.py [output_dir]``.
"""

import json
import sys
from pathlib import Path

from devicevec.pipeline.config import parse_config
from devicevec.pipeline.evaluation import write_labels
from devicevec.pipeline.runner import run_pipeline
from devicevec.pipeline.synthetic import generate_synthetic_log, ground_truth, three_room_home

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-out") / "gap-sweep"
out.mkdir(parents=True, exist_ok=True)

###############################################################################
# Two residents make room visits overlap, which is where the gap matters.
spec = three_room_home(seed=3, days=30, residents=2)
log = out / "home.log"
log.write_text("\n".join(generate_synthetic_log(spec)) + "\n")
truth = out / "truth.txt"
write_labels(ground_truth(spec), truth)

###############################################################################
# The same manifest the CLI reads (``devicevec run --config ...``).
manifest = f"""
input.paths = {log}
eval.ground_truth = {truth}
train.dim = 100
project.learning_rate = auto
run.gap_sweep = 10,60,600
output.dir = {out / 'runs'}
"""
results = run_pipeline(parse_config(manifest))

###############################################################################
# One row per gap. Every run directory also holds the corpus, the model,
# neighbor reports and a t-SNE plot.
sweep = json.loads((out / "runs" / "sweep.json").read_text())
print(f"{'gap':>6} {'sessions':>9} {'margin':>7} {'recall@3':>9}")
for row in sweep:
    print(f"{row['gap']:>6g} {row['sessions']:>9} {row['margin']:>7.3f} {row['mean_recall']:>9.3f}")
for gap, res in results.items():
    print(gap, "->", res.output_dir / "tsne.svg")
