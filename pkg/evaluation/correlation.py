import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import pearsonr, spearmanr

from utils.exceptions import DataError
from utils.helpers import min_max_normalize

logger = logging.getLogger(__name__)

SERIES = ('ppl', 'sppl_train', 'sppl_dev')
MIN_ENTRIES = 3


@dataclass
class CorrelationEntry:
    label: str
    ppl: float
    sppl_train: float
    sppl_dev: float
    wer: float


@dataclass
class CorrelationReport:
    entries: List[CorrelationEntry]
    normalized: Dict[str, Optional[np.ndarray]] = field(default_factory=dict)
    coefficients: Dict[str, Tuple[Optional[float], Optional[float]]] = field(default_factory=dict)
    flagged: List[str] = field(default_factory=list)

    def rows(self) -> List[dict]:
        """One row per entry plus a summary row per coefficient"""
        rows = []
        for i, e in enumerate(self.entries):
            row = {'label': e.label, 'ppl': e.ppl, 'sppl_train': e.sppl_train, 'sppl_dev': e.sppl_dev, 'wer': e.wer}
            for name in SERIES + ('wer',):
                series = self.normalized.get(name)
                row[f'{name}_norm'] = '' if series is None else float(series[i])
            rows.append(row)
        for name, (pearson, spearman) in self.coefficients.items():
            rows.append({'label': f'corr:{name}', 'pearson': '' if pearson is None else pearson,
                         'spearman': '' if spearman is None else spearman})
        return rows


def correlation_report(entries: Sequence[CorrelationEntry]) -> CorrelationReport:
    """Min-max normalize each PPL series and correlate it with WER.

    A constant series cannot be normalized; it is listed in `flagged` and
    gets no coefficients.
    """
    entries = list(entries)
    if len(entries) < MIN_ENTRIES:
        raise DataError(f"correlation needs at least {MIN_ENTRIES} entries, got {len(entries)}")
    values = {name: np.array([getattr(e, name) for e in entries], dtype=np.float64) for name in SERIES + ('wer',)}
    for name, series in values.items():
        if not np.all(np.isfinite(series)):
            raise DataError(f"series {name} contains non-finite values")

    report = CorrelationReport(entries)
    for name, series in values.items():
        report.normalized[name] = min_max_normalize(series)
        if report.normalized[name] is None:
            report.flagged.append(name)
            logger.warning(f"Series {name} is constant; min-max normalization is undefined")

    for name in SERIES:
        if name in report.flagged or 'wer' in report.flagged:
            report.coefficients[name] = (None, None)
            continue
        pearson = float(pearsonr(values[name], values['wer'])[0])
        spearman = float(spearmanr(values[name], values['wer'])[0])
        report.coefficients[name] = (pearson, spearman)
        logger.info(f"{name} vs WER: pearson={pearson:.4f} spearman={spearman:.4f}")
    return report
