from .alignment import EditOp, AlignmentStep, AlignmentScript, WerReport, align, edit_distance, wer
from .confusion import ConfusionCounts, ConfusionTable, accumulate_confusions, finalize_confusion, read_table, write_table

__all__ = [
    'EditOp', 'AlignmentStep', 'AlignmentScript', 'WerReport', 'align', 'edit_distance', 'wer',
    'ConfusionCounts', 'ConfusionTable', 'accumulate_confusions', 'finalize_confusion',
    'read_table', 'write_table',
]
