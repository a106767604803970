"""
Identifying a newly installed device
====================================

A new sensor appears in the log. To guess what it is, retrain on the log
that includes its firings, then compare its vector with the stored
reference vector (centroid) of every known device type. The best match
wins if its cosine clears the threshold; otherwise the device is reported
as Unknown.

Two new devices are tried: one that fires during kitchen visits and one
that fires at random times.

Run with ``python3 demos/identify_new_device.py``.
"""

from devicevec.embedding import TrainingConfig, train_skipgram
from devicevec.event_log import FilterPolicy, extract_transitions, filter_events, parse_log
from devicevec.pipeline.synthetic import generate_synthetic_log, ground_truth, three_room_home
from devicevec.sessionizer import SessionizerConfig, sessionize
from devicevec.similarity import DeviceTypeRegistry, embed_new_device, identify_device_type

config = TrainingConfig(dim=100, seed=0)


def corpus_for(spec):
    events, _ = parse_log(generate_synthetic_log(spec))
    return sessionize(extract_transitions(filter_events(events, FilterPolicy())), SessionizerConfig(gap=60.0))


for label, spec, token in [
    ("kitchen appliance", three_room_home(seed=0, extra_kitchen=("D099",)), "D099"),
    ("faulty sensor", three_room_home(seed=0, noise_devices=("I099",)), "I099"),
]:
    corpus = corpus_for(spec)
    ###########################################################################
    # The registry is rebuilt from the retrained model so that the reference
    # vectors and the new vector live in the same space.
    model = train_skipgram(corpus, config)
    known = {d: room for d, room in ground_truth(spec).items() if d != token}
    registry = DeviceTypeRegistry.from_model(model, known)

    vector = embed_new_device(corpus, config, token)
    result = identify_device_type(registry, vector, threshold=0.3)
    print(f"{label} ({token}): {result.format()}")
    print("   scores:", {k: round(v, 3) for k, v in sorted(result.scores.items())})
