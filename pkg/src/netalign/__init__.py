"""Pairwise network alignment: consistency, embedding, and optimal-transport
aligners plus synthetic benchmarks and ranking metrics."""
from .consistency import ConsistencyConfig, build_prior, final_align, isorank_align
from .embedding import RWRConfig, XNetMFConfig, regal_align, rwr_align, rwr_scores, structural_features
from .errors import FormatError, InvalidInputError, NumericError, UnsupervisedNotSupported
from .evaluation import evaluate, greedy_match, hits_at_k, hungarian_oracle, mrr, rank_of_truth, run_with_telemetry
from .graph import (
    AlignmentMatrix, AlignmentTask, Graph, GroundTruth, build_graph, degree_vector, normalize_adjacency,
)
from .ot import OTConfig, gw_align, parrot_lite_align, sinkhorn
from .splits_io import RunRecord, SplitRecord, append_result, read_dataset, split_anchors, write_dataset
from .synthesis import gen_er, inject_attr_noise, inject_edge_noise, inject_supervision_noise, make_permuted_pair

__version__ = "0.1.0"
