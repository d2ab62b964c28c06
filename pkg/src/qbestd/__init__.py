"""Query-by-example spoken term detection: feature I/O, MFCC extraction,
windowed DTW search, term-weighted-value evaluation, and MDS analysis."""

from .dtwsearch import DetectionScore, SearchConfig, detection_score, search_corpus
from .evalkit import EvalConfig, GoldLabelSet, MtwvResult, evaluate_scores, make_gold
from .featio import AudioBuffer, DatasetManifest, FeatureMatrix

__version__ = "0.1.0"

__all__ = [
    "AudioBuffer",
    "DatasetManifest",
    "DetectionScore",
    "EvalConfig",
    "FeatureMatrix",
    "GoldLabelSet",
    "MtwvResult",
    "SearchConfig",
    "__version__",
    "detection_score",
    "evaluate_scores",
    "make_gold",
    "search_corpus",
]
