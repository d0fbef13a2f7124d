from .batches import Batch, epoch_batches, make_batches
from .features import (
    ATYPICAL,
    TYPICAL,
    FeatureSequence,
    decode_features,
    encode_features,
    load_feature_file,
    temporal_resample,
    write_feature_file,
)
from .manifest import Manifest, ManifestEntry, load_manifest
from .synth import SynthConfig, layout_bursts, load_masks, shifted_dims, synth_dataset

__all__ = [
    "ATYPICAL",
    "TYPICAL",
    "Batch",
    "FeatureSequence",
    "Manifest",
    "ManifestEntry",
    "SynthConfig",
    "decode_features",
    "encode_features",
    "epoch_batches",
    "layout_bursts",
    "load_feature_file",
    "load_manifest",
    "load_masks",
    "make_batches",
    "shifted_dims",
    "synth_dataset",
    "temporal_resample",
    "write_feature_file",
]
