import hashlib
from typing import List, Any, Sequence

import numpy as np


def tokenize(line: str) -> List[str]:
    """Whitespace tokenization; transcripts arrive already tokenized"""
    return line.split()


def generate_content_hash(items: Sequence[str]) -> str:
    """Stable hash over an ordered list of strings"""
    digest = hashlib.sha256()
    for item in items:
        digest.update(item.encode('utf-8'))
        digest.update(b'\n')
    return digest.hexdigest()


def chunk_list(lst: List[Any], chunk_size: int) -> List[List[Any]]:
    """Split list into chunks of specified size"""
    return [lst[i:i + chunk_size] for i in range(0, len(lst), chunk_size)]


def derive_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator fully determined by (seed, *keys).

    Used so that e.g. (seed, epoch, sentence index) pins down one corruption
    draw regardless of which worker performs it.
    """
    entropy = [int(seed)] + [int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def min_max_normalize(values: Sequence[float]):
    """Scale a series to [0, 1]; returns None for a constant series"""
    arr = np.asarray(values, dtype=np.float64)
    lo, hi = arr.min(), arr.max()
    if hi == lo:
        return None
    return (arr - lo) / (hi - lo)
