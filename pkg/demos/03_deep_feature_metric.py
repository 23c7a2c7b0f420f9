"""The trained DOA network as a full-reference localization metric.

A compact moving-source model is trained on noisy synthetic arcs, then its
internal activations score pairs of renderings: the same source is placed
at a reference azimuth and at increasing offsets, and the deep-feature
distance between the two renderings is averaged per angular separation.
If the embedding has learned direction, distance grows with separation;
the Spearman rank correlation at the end quantifies that monotonicity.

Runtime is about a minute on a laptop CPU.  The acceptance-grade sweep in
tests/test_acceptance.py trains longer and checks four references.
"""

from pathlib import Path

import numpy as np

from dplm.evaluate import angular_sweep, sweep_spearman
from dplm.geometry import BinGrid, SourceLocation
from dplm.manifest import load_dataset_manifest
from dplm.metric import MetricConfig, deep_feature_distance
from dplm.model import ModelConfig, build_model
from dplm.signal import SAMPLE_RATE
from dplm.synth import make_moving_dataset, make_source
from dplm.train import TrainConfig, train

SR = SAMPLE_RATE
out = Path("demo_out/03_metric")

# ---- train a small moving-source model ---------------------------------------

manifest = make_moving_dataset(
    out / "data", n_items=32, duration_sec=0.75, seed=3,
    train_fraction=0.8, arc_deg=(30.0, 120.0), with_noise=True,
)
records = load_dataset_manifest(manifest)
mcfg = ModelConfig(
    n_inception_blocks=2,
    base_filters=8,
    lstm_layers=1,
    lstm_embedding=32,
    grid=BinGrid(n_azimuth=16, n_elevation=3),
    variant="moving",
)
model = build_model(mcfg, seed=7)
tcfg = TrainConfig(
    learning_rate=1e-3, batch_size=8, epochs=15, patience=15,
    excerpt_sec=0.75, seed=7,
)
result = train(model, records, tcfg, out / "run", manifest_path=manifest)
print(f"trained {len(records)} arcs, best epoch {result.best_epoch}")

# ---- sweep a reference against angular offsets --------------------------------

cfg = MetricConfig(model=model, alignment="strict_equal_length")


def dist(a, b):
    return deep_feature_distance(a, b, cfg)


offsets = [o * s for o in (5.0, 15.0, 30.0, 60.0, 90.0) for s in (1.0, -1.0)]
probes = [make_source(SR, np.random.default_rng(100 + p),
                      kind="pink" if p % 2 == 0 else "am") for p in range(4)]
reference = SourceLocation.from_degrees(0.0)

points = []
for probe in probes:
    points += angular_sweep(probe, reference, offsets, SR, dist)

by_sep = {}
for pt in points:
    by_sep.setdefault(round(pt.separation_deg, 3), []).append(pt.distance)

print("\nseparation   mean deep-feature distance")
for sep in sorted(by_sep):
    print(f"  {sep:5.1f} deg   {np.mean(by_sep[sep]):.3f}")

sc = sweep_spearman(points)
print(f"\nSpearman(distance, separation) = {sc:.3f}")
