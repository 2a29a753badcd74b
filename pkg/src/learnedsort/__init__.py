"""In-place learned distribution sort for 64-bit keys, plus data generators
and a benchmark harness."""
from .baselines import lsd_radix_sort, std_sort
from .bench import (
    BenchmarkRecord,
    read_csv,
    read_keys_binary,
    run_benchmark,
    verify_permutation,
    verify_sorted,
    write_csv,
    write_keys_binary,
)
from .datagen import FAMILIES, INTEGER_FAMILIES, DatasetSpec, duplicate_ratio, generate
from .memory import AuxTracker
from .model import EcdfModel, TrainingSample, bucket_index, draw_sample, train_model
from .partition import (
    FragmentDescriptor,
    FragmentPool,
    PartitionResult,
    defragment,
    partition_pass,
)
from .sorter import (
    SortConfig,
    SortStats,
    counting_sort_bucket,
    insertion_sort_cleanup,
    is_homogeneous,
    learned_sort,
    learned_sort_f64,
    learned_sort_u64,
)

__all__ = [
    "AuxTracker", "BenchmarkRecord", "DatasetSpec", "EcdfModel", "FAMILIES",
    "FragmentDescriptor", "FragmentPool", "INTEGER_FAMILIES", "PartitionResult",
    "SortConfig", "SortStats", "TrainingSample", "bucket_index", "counting_sort_bucket",
    "defragment", "draw_sample", "duplicate_ratio", "generate", "insertion_sort_cleanup",
    "is_homogeneous", "learned_sort", "learned_sort_f64", "learned_sort_u64",
    "lsd_radix_sort", "partition_pass", "read_csv", "read_keys_binary", "run_benchmark",
    "std_sort", "train_model", "verify_permutation", "verify_sorted", "write_csv",
    "write_keys_binary",
]
