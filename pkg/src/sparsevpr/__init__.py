"""Training-free event-camera place recognition from a few high-variance pixels."""

from .errors import (
    BadSequenceLength,
    ConfigError,
    DataError,
    DegenerateVariance,
    DimensionMismatch,
    EmptyStream,
    GeometryMismatch,
    LengthMismatch,
    MalformedRecord,
    MassExhausted,
    OutOfBounds,
    SparseVPRError,
    TooFewFrames,
    TrackCoverageGap,
    UnsortedInput,
)
from .evaluate import (
    GroundTruth,
    PoseTrack,
    PRCurve,
    associate_ground_truth,
    pr_curve,
    precision_at_100_recall,
    recall_at_99_precision,
)
from .events import (
    Event,
    EventFrame,
    EventStream,
    FixedCount,
    FixedTime,
    FrameSeries,
    build_frames_fixed_count,
    build_frames_fixed_time,
    parse_event_stream,
    read_events,
    split_polarity,
    write_events,
)
from .match import (
    DistanceMatrix,
    SparseDescriptor,
    best_match,
    dense_sad_matrix,
    descriptor_matrix,
    distance_matrix,
    sad_distance,
    sequence_convolve,
    shift_pixels,
    sparse_descriptor,
)
from .preprocess import PixelMask, detect_hot_pixels, remove_bursts
from .selection import (
    PixelSet,
    SelectionPmf,
    VarianceMap,
    select_pixels,
    select_random_pixels,
    selection_pmf,
    suppression_weight,
    variance_map,
)
from .synth import SynthWorld, synth_generate

__version__ = "0.1.0"
