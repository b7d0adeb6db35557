"""Experiment orchestration behind the command-line entry points."""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from align.alignment import WerReport, wer
from align.confusion import accumulate_confusions, finalize_confusion, read_table, write_table
from config.experiment import ExperimentConfig, SynthConfig
from data.corpus import Corpus, Vocabulary, build_vocab, decode, load_corpus, read_lines
from data.nbest import read_nbest, read_refs
from data.storage import ExperimentStorage, load_checkpoint, save_checkpoint
from data.synthetic import generate_benchmark
from evaluation.correlation import CorrelationEntry, correlation_report
from evaluation.perplexity import ppl, sppl, tppl
from models.lstm_lm import LstmLm, init_lstm
from models.ngram_lm import NgramLm, train_kn
from noise import create_channel
from noise.channels import ZeroGramChannel
from noise.corruption import corrupt_for_input
from rescoring.rescorer import RescoreConfig, Rescorer, score_selections, sweep_lambda
from training.schemes import build_scheme
from training.trainer import TrainResult, train_stage
from utils.exceptions import ConfigError, DataError, TrainingDivergedError
from utils.helpers import derive_rng
from utils.logger import StructuredLogger

EPOCH_LOG_FIELDS = ['stage', 'epoch', 'lr', 'train_loss', 'dev_ppl', 'halved', 'sub_rate', 'del_rate',
                    'ins_rate', 'duration']


@dataclass
class TrainOutcome:
    pretrain: TrainResult
    finetune: TrainResult
    checkpoints: Dict[str, str] = field(default_factory=dict)

    @property
    def lm(self) -> LstmLm:
        return self.finetune.lm


@dataclass
class RescoreOutcome:
    best_lambda: float
    curve: List[tuple]
    dev_report: WerReport
    eval_report: Optional[WerReport] = None
    ngram_only_report: Optional[WerReport] = None


class ExperimentRunner:
    """Runs the toolkit's commands for one ExperimentConfig"""

    def __init__(self, config: ExperimentConfig, out_dir: Optional[str] = None):
        self.config = config
        self.storage = ExperimentStorage(out_dir or config.paths.out_dir)
        self.logger = logging.getLogger(self.__class__.__name__)
        self.structured = StructuredLogger(self.__class__.__name__)
        self._vocab: Optional[Vocabulary] = None

    # data

    def vocab(self) -> Vocabulary:
        if self._vocab is None:
            if not self.config.paths.train:
                raise ConfigError("paths.train is required to build the vocabulary")
            self._vocab = build_vocab(read_lines(self.config.paths.train))
        return self._vocab

    def corpus(self, split: str, vocab: Optional[Vocabulary] = None) -> Corpus:
        paths = self.config.paths
        path = getattr(paths, split)
        if not path:
            raise ConfigError(f"paths.{split} is not set")
        return load_corpus(path, vocab or self.vocab(), getattr(paths, f"{split}_sessions"), name=split)

    def ngram(self, vocab: Vocabulary) -> NgramLm:
        return train_kn(self.corpus('train', vocab), self.config.ngram_order, vocab)

    def confusion_table(self, split: str):
        paths = self.config.paths
        if split == 'train' and paths.confusion_table:
            return read_table(paths.confusion_table)
        nbest_path, refs_path = getattr(paths, f"{split}_nbest"), getattr(paths, f"{split}_refs")
        if not nbest_path or not refs_path:
            raise ConfigError(f"paths.{split}_nbest and paths.{split}_refs are needed for confusion statistics")
        return finalize_confusion(accumulate_confusions(read_refs(refs_path), read_nbest(nbest_path),
                                                        workers=self.config.workers))

    # commands

    def cmd_stats(self, nbest_path: str, refs_path: str, out_table: Optional[str] = None):
        counts = accumulate_confusions(read_refs(refs_path), read_nbest(nbest_path), workers=self.config.workers)
        table = finalize_confusion(counts)
        out_table = out_table or self.storage.path('confusion.tsv')
        write_table(out_table, table)
        self.logger.info(f"Confusion table with {len(table.rows)} rows written to {out_table} "
                         f"(insertion rate {table.insertion_rate:.4f})")
        return table

    def cmd_train(self, scheme: Optional[str] = None, dropout_rate: Optional[float] = None,
                  tag: Optional[str] = None, channel_config: Optional[dict] = None) -> TrainOutcome:
        cfg = self.config
        scheme = scheme or cfg.scheme
        vocab = self.vocab()
        train, dev = self.corpus('train'), self.corpus('dev')

        table = None
        if scheme in ('i1', 'i1o'):
            table = self.confusion_table('train' if scheme == 'i1' else 'dev')
        plan = build_scheme(
            scheme, vocab, channel_config or cfg.channel.to_channel_dict(), confusion_table=table,
            label_smoothing_eps=cfg.model.label_smoothing_eps or 0.1,
            pretrain_lr=cfg.pretrain.initial_lr, finetune_lr=cfg.finetune.initial_lr,
            max_epochs=cfg.pretrain.max_epochs, finetune_max_epochs=cfg.finetune.max_epochs,
            batch_size=cfg.pretrain.batch_size, finetune_augment=cfg.finetune_augment, shards=cfg.pretrain.shards,
        )

        model_cfg = cfg.model.to_lstm_config(vocab.size)
        if dropout_rate is not None:
            model_cfg.dropout_rate = dropout_rate
        model_cfg.label_smoothing_eps = 0.0
        lm = init_lstm(model_cfg.validate(), derive_rng(cfg.seeds.init), vocab)

        run = tag or scheme
        log = []
        try:
            pre = train_stage(lm, train, dev, plan.pretrain, plan.channel, seed=cfg.seeds.shuffle,
                              noise_seed=cfg.seeds.noise)
            log.extend(pre.epoch_log)
            pre_path = self.storage.path(f"{run}.pretrain.npz")
            save_checkpoint(pre_path, pre.lm, vocab)

            fine = train_stage(pre.lm.copy(), train, dev, plan.finetune, plan.finetune_channel,
                               seed=cfg.seeds.shuffle + 1, noise_seed=cfg.seeds.noise + 1)
            log.extend(fine.epoch_log)
            fine_path = self.storage.path(f"{run}.finetune.npz")
            save_checkpoint(fine_path, fine.lm, vocab)
        except TrainingDivergedError as e:
            log.extend(e.epoch_log)
            self._save_epoch_log(run, log)
            raise
        self._save_epoch_log(run, log)
        self.logger.info(f"{run}: dev PPL {pre.best_dev_ppl:.3f} after pretraining, "
                         f"{fine.best_dev_ppl:.3f} after finetuning")
        return TrainOutcome(pre, fine, {'pretrain': pre_path, 'finetune': fine_path})

    def _save_epoch_log(self, run: str, records):
        self.storage.save_epoch_log(run, records)
        self.storage.write_csv(f"{run}.epochs.csv", [r.to_dict() for r in records], EPOCH_LOG_FIELDS)

    def _rescorer(self, lm: Optional[LstmLm], vocab: Vocabulary) -> Rescorer:
        return Rescorer(lm, self.ngram(vocab), vocab)

    def cmd_rescore(self, checkpoint: str, tag: str = 'rescore') -> RescoreOutcome:
        cfg, paths = self.config, self.config.paths
        if not paths.dev_nbest or not paths.dev_refs:
            raise ConfigError("paths.dev_nbest and paths.dev_refs are required for rescoring")
        lm, vocab = load_checkpoint(checkpoint)
        rescorer = self._rescorer(lm, vocab)
        grid = cfg.rescore

        dev_lists, dev_refs = read_nbest(paths.dev_nbest), read_refs(paths.dev_refs)
        sweep = sweep_lambda(dev_lists, dev_refs, rescorer, grid.lambdas, grid.lm_scale, grid.carry_state)
        self.storage.write_csv(f"{tag}.lambda_curve.csv",
                               [{'lambda': lam, **report.to_dict()} for lam, report in sweep.curve])
        outcome = RescoreOutcome(sweep.best_lambda, sweep.curve, sweep.best_report)

        rows = [{'set': 'dev', 'model': 'lstm+ngram', 'lambda': sweep.best_lambda, **sweep.best_report.to_dict()}]
        if paths.eval_nbest and paths.eval_refs:
            eval_lists, eval_refs = read_nbest(paths.eval_nbest), read_refs(paths.eval_refs)
            best_cfg = RescoreConfig(sweep.best_lambda, grid.lm_scale, grid.carry_state)
            eval_rescorer = self._rescorer(lm, vocab)
            selections = eval_rescorer.rescore_all(eval_lists, best_cfg, workers=cfg.workers)
            outcome.eval_report = score_selections(selections, eval_refs)
            self.storage.write_jsonl(f"{tag}.eval.selections.jsonl", (s.to_dict() for s in selections))
            ngram_only = eval_rescorer.rescore_all(eval_lists, RescoreConfig(0.0, grid.lm_scale, grid.carry_state))
            outcome.ngram_only_report = score_selections(ngram_only, eval_refs)
            rows.append({'set': 'eval', 'model': 'lstm+ngram', 'lambda': sweep.best_lambda,
                         **outcome.eval_report.to_dict()})
            rows.append({'set': 'eval', 'model': 'ngram only', 'lambda': 0.0,
                         **outcome.ngram_only_report.to_dict()})
            self.logger.info(f"Eval: {outcome.eval_report} at lambda={sweep.best_lambda:.2f}; "
                             f"n-gram only {outcome.ngram_only_report}")
        self.storage.write_csv(f"{tag}.wer.csv", rows)
        return outcome

    def cmd_eval(self, checkpoint: str, corpus_path: Optional[str] = None, k: Optional[int] = None,
                 with_channel: bool = True, tag: str = 'eval') -> Dict:
        cfg = self.config
        lm, vocab = load_checkpoint(checkpoint)
        if corpus_path:
            corpus = load_corpus(corpus_path, vocab)
        else:
            corpus = self.corpus('dev', vocab)
        k = k or cfg.sppl_realizations

        clean = ppl(lm, corpus)
        result = {'ppl': clean.ppl, 'tokens': clean.token_count}
        rows = [{'measure': 'ppl', 'realization': '', 'value': clean.ppl}]
        channel = create_channel(cfg.channel.to_channel_dict(), vocab) if with_channel else None
        if channel is not None:
            simulated = sppl(lm, corpus, channel, k, seed=cfg.seeds.eval, workers=cfg.workers)
            target = tppl(lm, corpus, channel, seed=cfg.seeds.eval)
            result.update({'sppl': simulated.summary(), 'tppl': target.ppl,
                           'sppl_unimodal': simulated.is_unimodal()})
            rows.extend({'measure': 'sppl', 'realization': r, 'value': v}
                        for r, v in enumerate(simulated.realizations))
            rows.append({'measure': 'sppl_mean', 'realization': '', 'value': simulated.mean})
            rows.append({'measure': 'sppl_relative_std', 'realization': '', 'value': simulated.relative_std})
            rows.append({'measure': 'tppl', 'realization': '', 'value': target.ppl})
        self.storage.write_csv(f"{tag}.ppl.csv", rows, ['measure', 'realization', 'value'])
        return result

    def cmd_corrupt(self, corpus_path: Optional[str] = None, out_path: Optional[str] = None) -> str:
        cfg = self.config
        vocab = self.vocab()
        corpus = load_corpus(corpus_path, vocab) if corpus_path else self.corpus('train')
        channel = create_channel(cfg.channel.to_channel_dict(), vocab)
        if channel is None:
            raise ConfigError("corrupt needs a channel configuration")
        out_path = out_path or self.storage.path('corrupted.txt')
        with open(out_path, 'w', encoding='utf-8') as f:
            for i, s in enumerate(corpus.sentences):
                pair = corrupt_for_input(s, channel, derive_rng(cfg.seeds.noise, 0, i))
                f.write(decode(vocab, pair.inputs) + '\n')
        self.logger.info(f"Wrote {len(corpus)} corrupted sentences to {out_path}")
        return out_path

    def cmd_wer(self, refs_path: str, hyps_path: str) -> WerReport:
        refs, hyps = read_refs(refs_path), read_refs(hyps_path)
        missing = sorted(set(refs) - set(hyps))
        if missing:
            raise DataError(f"no hypothesis for utterances {missing[:5]}")
        extra = sorted(set(hyps) - set(refs))
        if extra:
            raise DataError(f"no reference for utterances {extra[:5]}")
        ids = sorted(refs)
        report = wer([refs[u] for u in ids], [hyps[u] for u in ids])
        self.storage.write_json('wer.json', report.to_dict())
        return report

    def cmd_synth(self, out_dir: Optional[str] = None, synth: Optional[SynthConfig] = None):
        out_dir = out_dir or self.storage.out_dir
        return generate_benchmark(out_dir, synth or self.config.synth, seed=self.config.seeds.init)

    def sweep_dropout(self) -> Dict:
        """Train one model per dropout rate and keep the best dev rescoring WER"""
        rows, best = [], None
        for rate in self.config.dropout_grid:
            tag = f"{self.config.scheme}.dropout{rate:g}"
            outcome = self.cmd_train(dropout_rate=rate, tag=tag)
            rescored = self.cmd_rescore(outcome.checkpoints['finetune'], tag=tag)
            row = {'dropout': rate, 'dev_ppl': outcome.finetune.best_dev_ppl, 'lambda': rescored.best_lambda,
                   'dev_wer': rescored.dev_report.wer}
            rows.append(row)
            if best is None or row['dev_wer'] < best['dev_wer']:
                best = dict(row, checkpoint=outcome.checkpoints['finetune'])
        self.storage.write_csv('dropout_sweep.csv', rows)
        self.logger.info(f"Best dropout {best['dropout']:g} with dev WER {100 * best['dev_wer']:.2f}%")
        return best

    def cmd_correlate(self) -> Dict:
        """i0 models at several channel rates: PPL, sPPL at training and dev error rates, rescoring WER"""
        cfg, paths = self.config, self.config.paths
        if not paths.dev_nbest or not paths.dev_refs:
            raise ConfigError("paths.dev_nbest and paths.dev_refs are required for correlate")
        vocab = self.vocab()
        dev = self.corpus('dev')
        dev_lists, dev_refs = read_nbest(paths.dev_nbest), read_refs(paths.dev_refs)
        first_best = [n.entries[0].words for n in dev_lists]
        dev_errors = wer([dev_refs[n.utterance_id] for n in dev_lists], first_best)
        dev_channel = ZeroGramChannel.from_wer_report(vocab, dev_errors)
        self.logger.info(f"First-pass dev errors: {dev_errors}")

        entries = []
        for p_sub, p_del, p_ins in cfg.correlate_rates:
            label = f"i0_{p_sub:g}_{p_del:g}_{p_ins:g}"
            channel_config = {'type': 'zerogram', 'p_sub': p_sub, 'p_del': p_del, 'p_ins': p_ins}
            outcome = self.cmd_train(scheme='i0', tag=label, channel_config=channel_config)
            lm = outcome.lm
            train_channel = ZeroGramChannel(vocab, p_sub=p_sub, p_del=p_del, p_ins=p_ins)
            k = cfg.sppl_realizations
            rescored = self.cmd_rescore(outcome.checkpoints['finetune'], tag=label)
            entries.append(CorrelationEntry(
                label,
                ppl(lm, dev).ppl,
                sppl(lm, dev, train_channel, k, seed=cfg.seeds.eval, workers=cfg.workers).mean,
                sppl(lm, dev, dev_channel, k, seed=cfg.seeds.eval, workers=cfg.workers).mean,
                rescored.dev_report.wer,
            ))
        report = correlation_report(entries)
        self.storage.write_csv('correlation.csv', report.rows())
        return {'coefficients': report.coefficients, 'flagged': report.flagged}

    def run_command(self, name: str, func, *args, **kwargs):
        """Run one command, logging its outcome to the run database"""
        start = time.time()
        try:
            result = func(*args, **kwargs)
        except Exception as e:
            exit_code = getattr(e, 'exit_code', 2)
            self.storage.log_command(name, 'error', exit_code, str(e), time.time() - start)
            raise
        duration = time.time() - start
        self.storage.log_command(name, 'success', 0, None, duration)
        self.structured.log_performance(name, duration)
        return result
