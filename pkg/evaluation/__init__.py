# Evaluation: perplexity variants and PPL-vs-WER correlation

from .perplexity import PplReport, SpplReport, ppl, sppl, tppl, score_pairs
from .correlation import CorrelationEntry, CorrelationReport, correlation_report

__all__ = [
    'PplReport', 'SpplReport', 'ppl', 'sppl', 'tppl', 'score_pairs',
    'CorrelationEntry', 'CorrelationReport', 'correlation_report',
]
