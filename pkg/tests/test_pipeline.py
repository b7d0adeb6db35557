import os
from dataclasses import asdict

import pytest

from config.experiment import ExperimentConfig, SynthConfig
from data.storage import ExperimentStorage, load_checkpoint, read_csv
from data.synthetic import BenchmarkPaths, generate_benchmark
from pipeline.runner import ExperimentRunner

TINY_SYNTH = {'n_words': 20, 'n_train': 60, 'n_dev': 15, 'n_eval': 15, 'session_size': 5, 'nbest_size': 4}


def tiny_config(bench: BenchmarkPaths, out_dir: str, **overrides) -> ExperimentConfig:
    paths = {'out_dir': out_dir}
    for split in ('train', 'dev', 'eval'):
        paths[split] = bench.text(split)
        paths[f'{split}_sessions'] = bench.sessions(split)
        paths[f'{split}_nbest'] = bench.nbest(split)
        paths[f'{split}_refs'] = bench.refs(split)
    data = {
        'paths': paths,
        'scheme': 'i0',
        'channel': {'type': 'zerogram', 'p_sub': 0.1, 'p_del': 0.05, 'p_ins': 0.05},
        'model': {'embed_dim': 8, 'hidden_dim': 8, 'layers': 1},
        'pretrain': {'initial_lr': 1.0, 'max_epochs': 2, 'batch_size': 8},
        'finetune': {'initial_lr': 0.1, 'max_epochs': 1, 'batch_size': 1},
        'rescore': {'lambdas': [0.0, 0.5, 1.0]},
        'sppl_realizations': 3,
        'dropout_grid': [0.0, 0.2],
        'correlate_rates': [[0.0, 0.0, 0.0], [0.1, 0.05, 0.05], [0.3, 0.1, 0.1]],
        'synth': TINY_SYNTH,
    }
    data.update(overrides)
    return ExperimentConfig.from_dict(data)


@pytest.fixture
def bench(tmp_path):
    return generate_benchmark(str(tmp_path / 'synth'), SynthConfig(**TINY_SYNTH), seed=1)


def test_train_rescore_eval(tmp_path, bench):
    out = str(tmp_path / 'run')
    runner = ExperimentRunner(tiny_config(bench, out))

    outcome = runner.cmd_train()
    assert os.path.exists(outcome.checkpoints['pretrain'])
    assert os.path.exists(outcome.checkpoints['finetune'])
    epochs = read_csv(os.path.join(out, 'i0.epochs.csv'))
    assert [r['stage'] for r in epochs] == ['pretrain', 'pretrain', 'finetune']
    assert float(epochs[0]['sub_rate']) > 0
    assert len(ExperimentStorage(out).get_epoch_log('i0')) == 3

    lm, vocab = load_checkpoint(outcome.checkpoints['finetune'])
    assert vocab.words == runner.vocab().words

    rescored = runner.cmd_rescore(outcome.checkpoints['finetune'])
    assert rescored.best_lambda in (0.0, 0.5, 1.0)
    assert [lam for lam, _ in rescored.curve] == [0.0, 0.5, 1.0]
    wer_rows = read_csv(os.path.join(out, 'rescore.wer.csv'))
    assert {(r['set'], r['model']) for r in wer_rows} == {
        ('dev', 'lstm+ngram'), ('eval', 'lstm+ngram'), ('eval', 'ngram only')}
    assert os.path.exists(os.path.join(out, 'rescore.eval.selections.jsonl'))

    result = runner.cmd_eval(outcome.checkpoints['finetune'])
    assert result['ppl'] > 1.0
    assert result['sppl']['k'] == 3
    assert len(read_csv(os.path.join(out, 'eval.ppl.csv'))) == 1 + 3 + 3


def test_stats_and_corrupt(tmp_path, bench):
    out = str(tmp_path / 'run')
    runner = ExperimentRunner(tiny_config(bench, out))
    table = runner.cmd_stats(bench.nbest('train'), bench.refs('train'))
    assert 0.0 <= table.insertion_rate < 1.0
    assert os.path.exists(os.path.join(out, 'confusion.tsv'))

    corrupted = runner.cmd_corrupt()
    with open(corrupted, encoding='utf-8') as f:
        assert len(f.read().splitlines()) == 60


def test_unigram_scheme_uses_confusion_statistics(tmp_path, bench):
    runner = ExperimentRunner(tiny_config(bench, str(tmp_path / 'run'), scheme='i1',
                                          pretrain={'initial_lr': 1.0, 'max_epochs': 1, 'batch_size': 16}))
    outcome = runner.cmd_train()
    assert outcome.pretrain.epoch_log[0].sub_rate > 0


@pytest.mark.slow
def test_correlate(tmp_path, bench):
    out = str(tmp_path / 'run')
    result = ExperimentRunner(tiny_config(bench, out)).cmd_correlate()
    assert set(result['coefficients']) == {'ppl', 'sppl_train', 'sppl_dev'}
    rows = read_csv(os.path.join(out, 'correlation.csv'))
    assert len(rows) == 3 + 3


@pytest.mark.slow
def test_sweep_dropout(tmp_path, bench):
    out = str(tmp_path / 'run')
    best = ExperimentRunner(tiny_config(bench, out)).sweep_dropout()
    assert best['dropout'] in (0.0, 0.2)
    assert len(read_csv(os.path.join(out, 'dropout_sweep.csv'))) == 2


@pytest.mark.slow
def test_augmented_training_beats_baseline_on_noisy_dev(tmp_path):
    synth = SynthConfig(n_words=200, n_train=5000, n_dev=1000, n_eval=200)
    bench = generate_benchmark(str(tmp_path / 'synth'), synth, seed=2)
    noise = {'type': 'zerogram', 'p_sub': synth.p_sub, 'p_del': synth.p_del, 'p_ins': synth.p_ins}
    results = {}
    for scheme in ('baseline', 'i0'):
        runner = ExperimentRunner(tiny_config(
            bench, str(tmp_path / scheme), scheme=scheme, channel=noise,
            model={'embed_dim': 32, 'hidden_dim': 64, 'layers': 2},
            pretrain={'initial_lr': 1.0, 'max_epochs': 6, 'batch_size': 32},
            finetune={'initial_lr': 0.1, 'max_epochs': 2, 'batch_size': 1},
            rescore={'lambdas': [0.0, 0.25, 0.5, 0.75, 1.0]},
            sppl_realizations=10, synth=asdict(synth),
        ))
        checkpoint = runner.cmd_train().checkpoints['finetune']
        results[scheme] = (runner.cmd_eval(checkpoint)['sppl']['mean'], runner.cmd_rescore(checkpoint).dev_report.wer)

    baseline_sppl, baseline_wer = results['baseline']
    i0_sppl, i0_wer = results['i0']
    assert i0_sppl < baseline_sppl
    assert i0_wer <= baseline_wer
