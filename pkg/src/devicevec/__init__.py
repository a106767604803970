"""Device embeddings learned from smart-home activity logs."""

__version__ = "0.1.0"

from .embedding import EmbeddingModel, TrainingConfig, build_vocab, load_model, save_model, train_skipgram
from .event_log import FilterPolicy, SensorEvent, extract_transitions, filter_events, parse_log, read_log
from .projection import ProjectionConfig, project_model
from .sessionizer import Corpus, SessionizerConfig, read_corpus, sessionize, write_corpus
from .similarity import (DeviceTypeRegistry, cosine, identify_device_type, similarity_matrix,
                         top_k_neighbors)
