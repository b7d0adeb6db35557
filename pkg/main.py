import argparse
import json
import logging
import sys

from config.experiment import ExperimentConfig
from config.settings import LOG_FILE, LOG_LEVEL
from pipeline.runner import ExperimentRunner
from utils.exceptions import ConfigError, ToolkitError
from utils.logger import StructuredLogger, setup_logging

COMMANDS = ('train', 'stats', 'rescore', 'eval-ppl', 'corrupt', 'wer', 'synth', 'correlate', 'sweep-dropout')

# commands whose inputs may not exist yet when the config is loaded
_NO_PATH_CHECK = {'synth', 'wer', 'stats'}


def build_parser():
    parser = argparse.ArgumentParser(description='Noise-aware LSTM language model training and n-best rescoring')
    parser.add_argument('command', choices=COMMANDS, help='Command to run')
    parser.add_argument('--config', type=str, help='Experiment config (JSON)')
    parser.add_argument('--seed', type=int, help='Derive every seed from this integer')
    parser.add_argument('--out', type=str, help='Output directory')
    parser.add_argument('--checkpoint', type=str, help='Model checkpoint (.npz)')
    parser.add_argument('--corpus', type=str, help='Text corpus for eval-ppl / corrupt')
    parser.add_argument('--k', type=int, help='Number of sPPL realizations')
    parser.add_argument('--nbest', type=str, help='N-best JSONL file')
    parser.add_argument('--refs', type=str, help='Reference transcripts')
    parser.add_argument('--hyps', type=str, help='Hypothesis transcripts')
    parser.add_argument('--table', type=str, help='Output confusion table (stats)')
    parser.add_argument('--log-level', type=str, default=LOG_LEVEL, help='Logging level')
    return parser


def load_config(args) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.load(args.config, check_paths=args.command not in _NO_PATH_CHECK)
    else:
        config = ExperimentConfig()
    return config.with_seed(args.seed)


def dispatch(runner: ExperimentRunner, args):
    command = args.command
    if command == 'train':
        outcome = runner.cmd_train()
        return {'checkpoints': outcome.checkpoints, 'pretrain_dev_ppl': outcome.pretrain.best_dev_ppl,
                'finetune_dev_ppl': outcome.finetune.best_dev_ppl}
    if command == 'stats':
        nbest = args.nbest or runner.config.paths.train_nbest
        refs = args.refs or runner.config.paths.train_refs
        if not nbest or not refs:
            raise ConfigError("stats needs --nbest and --refs")
        table = runner.cmd_stats(nbest, refs, args.table)
        return {'rows': len(table.rows), 'insertion_rate': table.insertion_rate}
    if command == 'rescore':
        if not args.checkpoint:
            raise ConfigError("rescore needs --checkpoint")
        outcome = runner.cmd_rescore(args.checkpoint)
        result = {'best_lambda': outcome.best_lambda, 'dev_wer': outcome.dev_report.wer}
        if outcome.eval_report is not None:
            result['eval_wer'] = outcome.eval_report.wer
            result['eval_wer_ngram_only'] = outcome.ngram_only_report.wer
        return result
    if command == 'eval-ppl':
        if not args.checkpoint:
            raise ConfigError("eval-ppl needs --checkpoint")
        return runner.cmd_eval(args.checkpoint, args.corpus, args.k)
    if command == 'corrupt':
        return {'output': runner.cmd_corrupt(args.corpus)}
    if command == 'wer':
        if not args.refs or not args.hyps:
            raise ConfigError("wer needs --refs and --hyps")
        report = runner.cmd_wer(args.refs, args.hyps)
        print(report)
        return report.to_dict()
    if command == 'synth':
        paths = runner.cmd_synth()
        return {'out_dir': paths.out_dir}
    if command == 'correlate':
        return runner.cmd_correlate()
    if command == 'sweep-dropout':
        return runner.sweep_dropout()
    raise ConfigError(f"unknown command {command}")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits with 2 on usage errors
        return 1 if e.code else 0

    setup_logging(args.log_level, LOG_FILE)
    logger = logging.getLogger(__name__)
    structured = StructuredLogger(__name__)

    try:
        config = load_config(args)
        runner = ExperimentRunner(config, args.out)
    except ToolkitError as e:
        structured.log_error(args.command, str(e))
        return e.exit_code

    try:
        result = runner.run_command(args.command, dispatch, runner, args)
    except ToolkitError as e:
        structured.log_error(args.command, str(e))
        return e.exit_code
    except (ValueError, OSError):
        logger.exception(f"{args.command} failed on its input data")
        return 2

    logger.info(f"{args.command} completed: {json.dumps(result, default=str)}")
    return 0


if __name__ == '__main__':
    sys.exit(main())
