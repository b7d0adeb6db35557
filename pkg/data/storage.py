import csv
import json
import os
import sqlite3
import logging
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from config.settings import OUTPUT_DIR, RUNS_DB_NAME
from data.corpus import Vocabulary
from utils.exceptions import DataError
from utils.helpers import generate_content_hash

CHECKPOINT_FORMAT = 'lstm-lm-npz/1'
_META_KEYS = ('__format__', '__config__', '__vocab__', '__vocab_hash__')


class ExperimentStorage:
    """Output directory of one command: run database, CSV/JSONL reports and checkpoints"""

    def __init__(self, out_dir=OUTPUT_DIR, db_name=RUNS_DB_NAME):
        self.out_dir = out_dir
        self.db_path = os.path.join(out_dir, db_name)
        self.logger = logging.getLogger(self.__class__.__name__)
        self.init_database()

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def init_database(self):
        """Initialize SQLite database"""
        os.makedirs(self.out_dir, exist_ok=True)

        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute('''
            CREATE TABLE IF NOT EXISTS epoch_log (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                run TEXT NOT NULL,
                stage TEXT NOT NULL,
                epoch INTEGER NOT NULL,
                lr REAL,
                train_loss REAL,
                dev_ppl REAL,
                halved BOOLEAN DEFAULT 0,
                sub_rate REAL,
                del_rate REAL,
                ins_rate REAL,
                duration_seconds REAL,
                created_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        ''')

        cursor.execute('''
            CREATE INDEX IF NOT EXISTS idx_epoch_run ON epoch_log(run)
        ''')

        # one row per CLI invocation for monitoring
        cursor.execute('''
            CREATE TABLE IF NOT EXISTS command_log (
                id INTEGER PRIMARY KEY AUTOINCREMENT,
                command TEXT NOT NULL,
                status TEXT NOT NULL,
                exit_code INTEGER DEFAULT 0,
                error_message TEXT,
                duration_seconds REAL,
                details TEXT,
                started_at TIMESTAMP DEFAULT CURRENT_TIMESTAMP
            )
        ''')

        conn.commit()
        conn.close()
        self.logger.debug(f"Run database ready at {self.db_path}")

    def save_epoch_log(self, run: str, records: Iterable):
        """Insert epoch records (EpochRecord objects or dicts) for one run"""
        rows = [r.to_dict() if hasattr(r, 'to_dict') else dict(r) for r in records]
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.executemany('''
            INSERT INTO epoch_log
            (run, stage, epoch, lr, train_loss, dev_ppl, halved, sub_rate, del_rate, ins_rate, duration_seconds)
            VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?, ?, ?)
        ''', [(run, r['stage'], r['epoch'], r['lr'], r['train_loss'], r['dev_ppl'], int(r.get('halved', False)),
               r.get('sub_rate', 0.0), r.get('del_rate', 0.0), r.get('ins_rate', 0.0), r.get('duration', 0.0))
              for r in rows])

        conn.commit()
        conn.close()
        self.logger.info(f"Saved {len(rows)} epoch records for run {run}")

    def get_epoch_log(self, run: Optional[str] = None) -> List[Dict]:
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        if run is None:
            cursor.execute('SELECT * FROM epoch_log ORDER BY id')
        else:
            cursor.execute('SELECT * FROM epoch_log WHERE run = ? ORDER BY id', (run,))

        columns = [desc[0] for desc in cursor.description]
        rows = [dict(zip(columns, row)) for row in cursor.fetchall()]

        conn.close()
        return rows

    def log_command(self, command, status, exit_code=0, error_message=None, duration=None, details=None):
        """Log a command invocation"""
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute('''
            INSERT INTO command_log
            (command, status, exit_code, error_message, duration_seconds, details)
            VALUES (?, ?, ?, ?, ?, ?)
        ''', (command, status, exit_code, error_message, duration, json.dumps(details) if details else None))

        conn.commit()
        conn.close()

    def get_command_log(self, limit=50) -> List[Dict]:
        conn = sqlite3.connect(self.db_path)
        cursor = conn.cursor()

        cursor.execute('SELECT * FROM command_log ORDER BY id DESC LIMIT ?', (limit,))
        columns = [desc[0] for desc in cursor.description]
        rows = [dict(zip(columns, row)) for row in cursor.fetchall()]

        conn.close()
        return rows

    def write_csv(self, name: str, rows: Sequence[Dict], fieldnames: Optional[Sequence[str]] = None) -> str:
        path = self.path(name)
        if fieldnames is None:
            fieldnames = []
            for row in rows:
                for key in row:
                    if key not in fieldnames:
                        fieldnames.append(key)
        with open(path, 'w', encoding='utf-8', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=list(fieldnames), restval='')
            writer.writeheader()
            writer.writerows(rows)
        self.logger.info(f"Wrote {len(rows)} rows to {path}")
        return path

    def write_jsonl(self, name: str, records: Iterable[Dict]) -> str:
        path = self.path(name)
        n = 0
        with open(path, 'w', encoding='utf-8') as f:
            for record in records:
                f.write(json.dumps(record, ensure_ascii=False) + '\n')
                n += 1
        self.logger.info(f"Wrote {n} records to {path}")
        return path

    def write_json(self, name: str, data) -> str:
        path = self.path(name)
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, ensure_ascii=False)
        return path


def read_csv(path: str) -> List[Dict[str, str]]:
    with open(path, 'r', encoding='utf-8', newline='') as f:
        return list(csv.DictReader(f))


def save_checkpoint(path: str, lm, vocab: Vocabulary):
    """Write named parameter tensors plus config, vocabulary and its hash to an .npz file"""
    if vocab.size != lm.cfg.vocab_size:
        raise DataError(f"vocabulary has {vocab.size} entries, model expects {lm.cfg.vocab_size}")
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    arrays = dict(lm.params)
    arrays['__format__'] = np.array(CHECKPOINT_FORMAT)
    arrays['__config__'] = np.array(json.dumps(lm.cfg.to_dict(), sort_keys=True))
    arrays['__vocab__'] = np.array(vocab.words)
    arrays['__vocab_hash__'] = np.array(generate_content_hash(vocab.words))
    with open(path, 'wb') as f:
        np.savez(f, **arrays)
    logging.getLogger(__name__).info(f"Saved checkpoint to {path}")


def load_checkpoint(path: str):
    """(LstmLm, Vocabulary) from a checkpoint; the vocabulary hash is verified"""
    from models.lstm_lm import LstmConfig, LstmLm, parameter_shapes

    with np.load(path, allow_pickle=False) as data:
        missing = [k for k in _META_KEYS if k not in data.files]
        if missing:
            raise DataError(f"{path} is not a checkpoint (missing {missing})")
        fmt = str(data['__format__'])
        if fmt != CHECKPOINT_FORMAT:
            raise DataError(f"{path}: unsupported checkpoint format {fmt!r}")
        words = [str(w) for w in data['__vocab__']]
        if generate_content_hash(words) != str(data['__vocab_hash__']):
            raise DataError(f"{path}: vocabulary hash mismatch")
        cfg = LstmConfig.from_dict(json.loads(str(data['__config__'])))
        params = {name: np.array(data[name], dtype=np.float64) for name in parameter_shapes(cfg)}
    vocab = Vocabulary(words)
    return LstmLm(cfg, params, vocab), vocab
