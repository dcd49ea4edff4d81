"""Minimum Bayes risk decoding with distributional cooling on tabular sequence models."""

from .decoding import (
    CandidatePool,
    TopNResult,
    ancestral_sample,
    beam_search,
    exact_topn,
    sample_pool,
)
from .errors import BudgetExceeded, ConfigError, DcmbrError, DomainError, IngestionError
from .mbr import MbrConfig, MbrDecision, exact_mbr, expected_utility, mbr_decode
from .model import (
    ConditionalLM,
    Sequence,
    TaskSpec,
    Vocab,
    build_from_corpus,
    build_from_spec,
    gold_rank_histogram,
    mean_teacher_forcing_entropy,
    next_dist,
    seq_logprob,
    token_entropy,
)
from .smoothing import (
    apply_temperature,
    effective_smoothing,
    equivalence_temperature,
    label_smoothed_ce,
    optimal_smoothed,
    smooth_mixture,
)
from .utility import chrf, corpus_quality, diversity, exact_match, get_utility, sentence_bleu

__version__ = "0.1.0"
