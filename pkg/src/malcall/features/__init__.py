from .counters import CounterState, OrderingError, snapshot_counters, update_counters
from .dataset import Dataset, DatasetError, build_dataset, sample_rows
from .encoding import (
    CROSSREF_FEATURES,
    STATIC_FEATURES,
    EncodedVector,
    FeatureEncoder,
    FeatureSelector,
    Schema,
    decode,
    encode,
    encode_matrix,
)
from .extract import (
    CURRENT_FEATURES,
    FEATURE_NAMES,
    HISTORIC_FEATURES,
    RAW_COLUMNS,
    ExampleTable,
    HistoryItem,
    NotAPredictionInstance,
    RawFeatures,
    StreamingExtractor,
    extract_example,
    extract_examples,
    historic_block,
    record_vector,
)

__all__ = [
    "CROSSREF_FEATURES",
    "CURRENT_FEATURES",
    "FEATURE_NAMES",
    "HISTORIC_FEATURES",
    "RAW_COLUMNS",
    "STATIC_FEATURES",
    "CounterState",
    "Dataset",
    "DatasetError",
    "EncodedVector",
    "ExampleTable",
    "FeatureEncoder",
    "FeatureSelector",
    "HistoryItem",
    "NotAPredictionInstance",
    "OrderingError",
    "RawFeatures",
    "Schema",
    "StreamingExtractor",
    "build_dataset",
    "decode",
    "encode",
    "encode_matrix",
    "extract_example",
    "extract_examples",
    "historic_block",
    "record_vector",
    "sample_rows",
    "snapshot_counters",
    "update_counters",
]
