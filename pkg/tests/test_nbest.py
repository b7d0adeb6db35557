import json

import pytest

from data.nbest import NBestEntry, NBestList, group_by_session, read_nbest, read_refs, write_nbest, write_refs
from utils.exceptions import DataError


def make_list(session, utt, order, hyps):
    return NBestList(session, utt, order, tuple(NBestEntry(tuple(w.split()), ac, lm) for w, ac, lm in hyps))


def test_write_read(tmp_path):
    lists = [make_list('s1', 'u1', 0, [('a b', -1.0, -2.0), ('a c', -1.5, -2.5)]),
             make_list('s1', 'u2', 1, [('', -3.0, -1.0)])]
    path = str(tmp_path / 'x.nbest.jsonl')
    write_nbest(path, lists)
    assert read_nbest(path) == lists


def test_reserved_symbols_rejected():
    with pytest.raises(DataError):
        make_list('s', 'u', 0, [('a </s>', 0.0, 0.0)])


def test_empty_list_rejected():
    with pytest.raises(DataError):
        NBestList('s', 'u', 0, ())


def test_malformed_record(tmp_path):
    path = tmp_path / 'bad.jsonl'
    path.write_text(json.dumps({'session': 's', 'utt': 'u', 'order': 0, 'hyps': [{'words': 'a'}]}) + '\n')
    with pytest.raises(DataError):
        read_nbest(str(path))
    path.write_text('{not json\n')
    with pytest.raises(DataError):
        read_nbest(str(path))


def test_group_by_session_sorts_by_order():
    lists = [make_list('s2', 'c', 0, [('a', 0, 0)]), make_list('s1', 'b', 1, [('a', 0, 0)]),
             make_list('s1', 'a', 0, [('a', 0, 0)])]
    grouped = group_by_session(lists)
    assert list(grouped) == ['s2', 's1']
    assert [n.utterance_id for n in grouped['s1']] == ['a', 'b']


def test_refs(tmp_path):
    path = str(tmp_path / 'x.refs')
    write_refs(path, {'u1': ['a', 'b'], 'u2': []})
    assert read_refs(path) == {'u1': ['a', 'b'], 'u2': []}


def test_duplicate_ref_id(tmp_path):
    path = tmp_path / 'dup.refs'
    path.write_text('u1 a\nu1 b\n')
    with pytest.raises(DataError):
        read_refs(str(path))
