# Noise package: error channels and corruption procedures

from .channels import (
    ActionKind, EditAction, ErrorChannel, ZeroGramChannel, UnigramChannel, sample_edit, KEEP, DELETE
)
from .corruption import (
    TargetMode, PositionedEdit, CorruptedPair, EditStats,
    corrupt_for_input, corrupt_for_target, corrupt_words
)
from utils.exceptions import ConfigError


def create_channel(config, vocab):
    """Build a channel from its JSON config; None or {} means no augmentation"""
    if not config:
        return None
    channel_type = config.get('type')
    if channel_type == 'zerogram':
        return ZeroGramChannel(vocab, p_sub=config.get('p_sub', 0.0), p_del=config.get('p_del', 0.0),
                               p_ins=config.get('p_ins', 0.0))
    if channel_type == 'unigram':
        from align.confusion import read_table
        path = config.get('table')
        if not path:
            raise ConfigError("unigram channel needs a 'table' path")
        return UnigramChannel(vocab, read_table(path), ins_rate=config.get('ins_rate'), table_path=path)
    raise ConfigError(f"unknown channel type: {channel_type!r}")


__all__ = [
    'ActionKind', 'EditAction', 'ErrorChannel', 'ZeroGramChannel', 'UnigramChannel', 'sample_edit',
    'KEEP', 'DELETE', 'TargetMode', 'PositionedEdit', 'CorruptedPair', 'EditStats',
    'corrupt_for_input', 'corrupt_for_target', 'corrupt_words', 'create_channel',
]
