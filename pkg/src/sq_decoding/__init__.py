"""Single-queue decoding, beam-search baselines and a Gaussian length predictor."""

from .core import ContractError, DecodeResult, Hypothesis, InputError, ScoreConfig, SearchConfig, SourceSentence, Vocab
from .lengthpred import LengthPredictor
from .search_beam import beam_search, greedy_decode
from .search_oracle import exhaustive_best
from .search_sqd import decode, single_queue_decode

__all__ = [
    "ContractError",
    "DecodeResult",
    "Hypothesis",
    "InputError",
    "LengthPredictor",
    "ScoreConfig",
    "SearchConfig",
    "SourceSentence",
    "Vocab",
    "__version__",
    "beam_search",
    "decode",
    "exhaustive_best",
    "greedy_decode",
    "single_queue_decode",
]

__version__ = "0.1.0"
