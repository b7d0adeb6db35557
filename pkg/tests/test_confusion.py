import pytest

from align.confusion import ConfusionCounts, accumulate_confusions, finalize_confusion, read_table, write_table
from conftest import make_vocab
from data.nbest import NBestEntry, NBestList
from noise.channels import UnigramChannel, ZeroGramChannel
from noise.corruption import corrupt_words
from utils.exceptions import DataError
from utils.helpers import derive_rng

EPS = '<eps>'


def nbest(utt, *hyps):
    return NBestList('s', utt, 0, tuple(NBestEntry(tuple(h.split()), 0.0, 0.0) for h in hyps))


def test_toy_tally():
    refs = {'u1': ['a', 'b', 'c']}
    lists = [nbest('u1', 'a b c', 'a x c', 'a c', 'a b y c')]
    counts = accumulate_confusions(refs, lists)
    assert counts.n_hypotheses == 4
    assert counts.n_positions == 4 * 4
    assert counts.rows['a'] == {'a': 4}
    assert counts.rows['b'] == {'b': 2, 'x': 1, EPS: 1}
    assert counts.rows['c'] == {'c': 4}
    assert counts.rows[EPS] == {'y': 1}

    table = finalize_confusion(counts)
    assert table.row('b') == {'b': 0.5, 'x': 0.25, EPS: 0.25}
    assert table.insertion_rate == pytest.approx(1 / 16)
    assert table.row('never-seen') == {}


def test_perfect_hypotheses_give_diagonal():
    refs = {'u1': ['a', 'b'], 'u2': ['b', 'c', 'a']}
    table = finalize_confusion(accumulate_confusions(refs, [nbest('u1', 'a b'), nbest('u2', 'b c a')]))
    for word, row in table.rows.items():
        assert row == {word: 1.0}
    assert table.insertion_rate == 0.0


def test_missing_reference():
    with pytest.raises(DataError):
        accumulate_confusions({}, [nbest('u1', 'a')])


def test_all_zero_counts():
    with pytest.raises(DataError):
        finalize_confusion(ConfusionCounts())


def test_workers_match_serial():
    refs = {f'u{i}': ['a', 'b', 'c'][: 1 + i % 3] for i in range(12)}
    lists = [nbest(f'u{i}', 'a c', 'b', 'a b c d') for i in range(12)]
    serial = accumulate_confusions(refs, lists, workers=1)
    parallel = accumulate_confusions(refs, lists, workers=4)
    assert serial.rows == parallel.rows
    assert serial.n_positions == parallel.n_positions


def test_recovers_channel_rates():
    words = [f'w{i}' for i in range(60)]
    vocab = make_vocab(words)
    channel = ZeroGramChannel(vocab, p_sub=0.1, p_del=0.05, p_ins=0.05)
    rng = derive_rng(7)
    refs, lists = {}, []
    for i in range(1500):
        ref = [words[j] for j in rng.integers(len(words), size=10)]
        refs[f'u{i}'] = ref
        hyp_ids = corrupt_words(vocab.encode_words(ref), channel, derive_rng(8, i))
        lists.append(nbest(f'u{i}', ' '.join(vocab.words[t] for t in hyp_ids)))
    table = finalize_confusion(accumulate_confusions(refs, lists))

    n_ref = subs = dels = 0
    for ref_word, row in table.counts.items():
        if ref_word == EPS:
            continue
        n_ref += sum(row.values())
        dels += row.get(EPS, 0)
        subs += sum(c for hyp, c in row.items() if hyp not in (ref_word, EPS))
    assert subs / n_ref == pytest.approx(0.1, abs=0.03)
    assert dels / n_ref == pytest.approx(0.05, abs=0.03)
    assert table.insertion_rate == pytest.approx(0.05, abs=0.03)


def test_table_file(tmp_path):
    refs = {'u1': ['a', 'b', 'c']}
    table = finalize_confusion(accumulate_confusions(refs, [nbest('u1', 'a x c', 'a b c z')]))
    path = str(tmp_path / 'confusion.tsv')
    write_table(path, table)
    loaded = read_table(path)
    assert loaded.counts == table.counts
    assert loaded.n_positions == table.n_positions
    assert loaded.insertion_rate == table.insertion_rate
    for ref_word in table.rows:
        assert loaded.rows[ref_word] == pytest.approx(table.rows[ref_word])


def test_table_bad_header(tmp_path):
    path = tmp_path / 'bad.tsv'
    path.write_text('ref\thyp\n')
    with pytest.raises(DataError):
        read_table(str(path))


def test_recovers_unigram_channel_rows():
    vocab = make_vocab(['a', 'b', 'c', 'x', 'y', 'z'])
    known = ConfusionCounts(n_positions=100)
    for ref_word, row in {'a': {'a': 7, 'x': 2, EPS: 1},
                          'b': {'b': 7, 'y': 3},
                          'c': {'c': 8, EPS: 2},
                          EPS: {'z': 1}}.items():
        for hyp_word, count in row.items():
            known.add(ref_word, hyp_word, count)
    channel = UnigramChannel.from_table(vocab, finalize_confusion(known), ins_rate=0.02)

    words = ['a', 'b', 'c']
    rng = derive_rng(21)
    refs, lists = {}, []
    # 2000 utterances with 5 hypotheses each
    for i in range(2000):
        ref = [words[j] for j in rng.integers(len(words), size=6)]
        refs[f'u{i}'] = ref
        hyps = []
        for k in range(5):
            hyp_ids = corrupt_words(vocab.encode_words(ref), channel, derive_rng(22, i, k))
            hyps.append(' '.join(vocab.words[t] for t in hyp_ids))
        lists.append(nbest(f'u{i}', *hyps))
    table = finalize_confusion(accumulate_confusions(refs, lists))

    expected = finalize_confusion(known)
    for ref_word in words:
        recovered = table.row(ref_word)
        for hyp_word, p in expected.row(ref_word).items():
            assert recovered.get(hyp_word, 0.0) == pytest.approx(p, abs=0.03)
        assert sum(p for h, p in recovered.items() if h not in expected.row(ref_word)) < 0.03
    assert table.insertion_rate == pytest.approx(0.02, abs=0.01)
