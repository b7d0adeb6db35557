import json
import os

import pytest

import main as cli


@pytest.fixture(autouse=True)
def log_to_tmp(tmp_path, monkeypatch):
    monkeypatch.setattr(cli, 'LOG_FILE', str(tmp_path / 'logs' / 'toolkit.log'))


def write(path, text):
    path.write_text(text, encoding='utf-8')
    return str(path)


def test_wer_command(tmp_path):
    refs = write(tmp_path / 'refs', 'u1 a b c\nu2 d e\n')
    hyps = write(tmp_path / 'hyps', 'u2 d e\nu1 a x c d\n')
    out = tmp_path / 'out'
    assert cli.main(['wer', '--refs', refs, '--hyps', hyps, '--out', str(out)]) == 0
    with open(out / 'wer.json', encoding='utf-8') as f:
        report = json.load(f)
    assert report['n_ref'] == 5 and report['subs'] == 1 and report['inss'] == 1
    assert report['wer'] == pytest.approx(0.4)


def test_usage_errors_exit_1(tmp_path):
    assert cli.main(['no-such-command']) == 1
    assert cli.main([]) == 1
    assert cli.main(['wer', '--out', str(tmp_path)]) == 1
    assert cli.main(['eval-ppl', '--out', str(tmp_path)]) == 1
    assert cli.main(['train', '--config', str(tmp_path / 'missing.json'), '--out', str(tmp_path)]) == 1


def test_help_exits_0(capsys):
    assert cli.main(['--help']) == 0
    assert 'rescore' in capsys.readouterr().out


def test_mismatched_ids_exit_2(tmp_path):
    refs = write(tmp_path / 'refs', 'u1 a b\n')
    hyps = write(tmp_path / 'hyps', 'u9 a b\n')
    assert cli.main(['wer', '--refs', refs, '--hyps', hyps, '--out', str(tmp_path / 'out')]) == 2


def test_missing_input_file_exit_2(tmp_path):
    refs = write(tmp_path / 'refs', 'u1 a b\n')
    assert cli.main(['wer', '--refs', refs, '--hyps', str(tmp_path / 'absent'), '--out', str(tmp_path)]) == 2


def test_commands_are_logged(tmp_path):
    from data.storage import ExperimentStorage
    refs = write(tmp_path / 'refs', 'u1 a b\n')
    out = str(tmp_path / 'out')
    cli.main(['wer', '--refs', refs, '--hyps', refs, '--out', out])
    cli.main(['wer', '--refs', refs, '--hyps', write(tmp_path / 'bad', 'u2 a\n'), '--out', out])
    rows = ExperimentStorage(out).get_command_log()
    assert [(r['command'], r['status'], r['exit_code']) for r in rows] == [('wer', 'error', 2), ('wer', 'success', 0)]


def test_synth_then_stats(tmp_path):
    config = tmp_path / 'config.json'
    config.write_text(json.dumps({'synth': {'n_words': 15, 'n_train': 20, 'n_dev': 5, 'n_eval': 5,
                                            'session_size': 5, 'nbest_size': 3}}))
    bench = tmp_path / 'bench'
    assert cli.main(['synth', '--config', str(config), '--out', str(bench), '--seed', '3']) == 0
    assert os.path.exists(bench / 'train.nbest.jsonl')
    table = tmp_path / 'confusion.tsv'
    assert cli.main(['stats', '--nbest', str(bench / 'train.nbest.jsonl'), '--refs', str(bench / 'train.refs'),
                     '--table', str(table), '--out', str(tmp_path / 'out')]) == 0
    assert table.exists()
