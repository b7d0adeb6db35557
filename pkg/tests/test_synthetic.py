import filecmp

import pytest

from config.experiment import SynthConfig
from data.corpus import build_vocab, load_corpus, read_lines
from data.nbest import read_nbest, read_refs
from data.synthetic import SPLITS, MarkovTextSource, firstpass_logprob, generate_benchmark, train_firstpass
from utils.helpers import derive_rng

TINY = SynthConfig(n_words=25, n_train=40, n_dev=12, n_eval=12, session_size=5, nbest_size=4)


def test_markov_source():
    source = MarkovTextSource(n_words=10, branching=3, mean_length=5.0, seed=1)
    sentences = source.sample(200, derive_rng(1))
    assert all(1 <= len(s) <= 30 for s in sentences)
    assert {w for s in sentences for w in s} <= set(source.words)
    # a sparse chain: each word has at most `branching` successors
    followers = {}
    for s in sentences:
        for a, b in zip(s, s[1:]):
            followers.setdefault(a, set()).add(b)
    assert all(len(f) <= 3 for f in followers.values())
    assert source.vocabulary().size == 13

    with pytest.raises(ValueError):
        MarkovTextSource(n_words=1)


def test_generate_benchmark(tmp_path):
    paths = generate_benchmark(str(tmp_path), TINY, seed=3)
    vocab = build_vocab(read_lines(paths.text('train')))
    for split, n in zip(SPLITS, (TINY.n_train, TINY.n_dev, TINY.n_eval)):
        corpus = load_corpus(paths.text(split), vocab, paths.sessions(split))
        assert len(corpus) == n
        assert len(corpus.iter_sessions()) == -(-n // TINY.session_size)

        refs = read_refs(paths.refs(split))
        lists = read_nbest(paths.nbest(split))
        assert len(lists) == n
        assert {l.utterance_id for l in lists} == set(refs)
        for nbest in lists:
            assert 1 <= len(nbest) <= TINY.nbest_size
            assert tuple(refs[nbest.utterance_id]) in {e.words for e in nbest.entries}
            scores = [e.acoustic_score + e.firstpass_lm_score for e in nbest.entries]
            assert scores == sorted(scores, reverse=True)


def test_benchmark_is_reproducible(tmp_path):
    a = generate_benchmark(str(tmp_path / 'a'), TINY, seed=9)
    b = generate_benchmark(str(tmp_path / 'b'), TINY, seed=9)
    for split in SPLITS:
        assert filecmp.cmp(a.text(split), b.text(split), shallow=False)
        assert filecmp.cmp(a.nbest(split), b.nbest(split), shallow=False)


def test_firstpass_scores_come_from_train_ngram(tmp_path):
    seed = 5
    paths = generate_benchmark(str(tmp_path), TINY, seed=seed)
    source = MarkovTextSource(TINY.n_words, TINY.branching, TINY.mean_length, seed)
    vocab = source.vocabulary()
    train = [line.split() for line in read_lines(paths.text('train'))]
    firstpass = train_firstpass(train, vocab, TINY.firstpass_order)

    same_length_scores = {}
    for nbest in read_nbest(paths.nbest('dev')):
        for entry in nbest.entries:
            expected = firstpass_logprob(firstpass, vocab, entry.words)
            assert entry.firstpass_lm_score == pytest.approx(expected)
            same_length_scores.setdefault(len(entry.words), set()).add(round(entry.firstpass_lm_score, 6))
    # not a pure length penalty
    assert any(len(scores) > 1 for scores in same_length_scores.values())
