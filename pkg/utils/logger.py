import logging
import os
from datetime import datetime
from config.settings import LOG_LEVEL, LOG_FILE


def setup_logging(log_level=LOG_LEVEL, log_file=LOG_FILE):
    """Route all records to the run log file and the console"""
    level = log_level if isinstance(log_level, int) else getattr(logging, str(log_level).upper(), logging.INFO)

    log_dir = os.path.dirname(log_file)
    if log_dir:
        os.makedirs(log_dir, exist_ok=True)

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%Y-%m-%d %H:%M:%S'
    )

    root_logger = logging.getLogger()
    root_logger.setLevel(level)

    # repeated calls (tests, sweeps) must not stack handlers
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    file_handler = logging.FileHandler(log_file, encoding='utf-8')
    file_handler.setLevel(level)
    file_handler.setFormatter(formatter)
    root_logger.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    return root_logger


class StructuredLogger:
    """Logger that attaches structured fields to training and rescoring events"""

    def __init__(self, name):
        self.logger = logging.getLogger(name)

    def log_stage_start(self, stage, scheme, initial_lr, n_sentences):
        """Log start of a training stage"""
        self.logger.info(f"Starting {stage} stage ({scheme}) at lr={initial_lr} on {n_sentences} sentences", extra={
            'stage': stage,
            'scheme': scheme,
            'initial_lr': initial_lr,
            'n_sentences': n_sentences,
            'operation': 'stage_start',
            'timestamp': datetime.now().isoformat()
        })

    def log_epoch(self, stage, epoch, lr, train_loss, dev_ppl, halved=False):
        """Log the outcome of one training epoch"""
        note = ' (lr halved)' if halved else ''
        self.logger.info(f"{stage} epoch {epoch}: loss={train_loss:.4f} dev_ppl={dev_ppl:.3f} lr={lr:g}{note}", extra={
            'stage': stage,
            'epoch': epoch,
            'lr': lr,
            'train_loss': train_loss,
            'dev_ppl': dev_ppl,
            'halved': halved,
            'operation': 'epoch',
            'timestamp': datetime.now().isoformat()
        })

    def log_stage_end(self, stage, epochs, best_dev_ppl, duration):
        """Log end of a training stage"""
        self.logger.info(f"{stage} finished after {epochs} epochs: best dev PPL {best_dev_ppl:.3f}", extra={
            'stage': stage,
            'epochs': epochs,
            'best_dev_ppl': best_dev_ppl,
            'duration': duration,
            'operation': 'stage_end',
            'timestamp': datetime.now().isoformat()
        })

    def log_rescore(self, lam, wer, n_utterances):
        """Log one rescoring pass"""
        self.logger.info(f"Rescoring at lambda={lam:.3f}: WER {100 * wer:.2f}% over {n_utterances} utterances", extra={
            'lambda': lam,
            'wer': wer,
            'n_utterances': n_utterances,
            'operation': 'rescore',
            'timestamp': datetime.now().isoformat()
        })

    def log_error(self, operation, error_message, details=None):
        """Log error with structured information"""
        log_data = {
            'operation': operation,
            'error': error_message,
            'timestamp': datetime.now().isoformat()
        }

        if details:
            log_data['details'] = details

        self.logger.error(f"Error in {operation}: {error_message}", extra=log_data)

    def log_performance(self, operation, duration, records_processed=None):
        """Log wall-clock time of a finished command"""
        log_data = {
            'operation': operation,
            'duration': duration,
            'timestamp': datetime.now().isoformat()
        }

        if records_processed is not None:
            log_data['records_processed'] = records_processed

        self.logger.info(f"Performance: {operation} took {duration:.2f}s", extra=log_data)
