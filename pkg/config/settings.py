import os
from dotenv import load_dotenv

load_dotenv()

# Output
OUTPUT_DIR = os.getenv('OUTPUT_DIR', 'exp')
RUNS_DB_NAME = 'runs.db'

# Logging
LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')
LOG_FILE = os.getenv('LOG_FILE', 'logs/toolkit.log')

# Reserved symbols
BOS_SYMBOL = '<s>'
EOS_SYMBOL = '</s>'
UNK_SYMBOL = '<unk>'
EPS_SYMBOL = '<eps>'

# LSTM defaults (desk scale; the full recipe uses 650 hidden units)
EMBED_DIM = 100
HIDDEN_DIM = 64
NUM_LAYERS = 2
INIT_RANGE = 0.1

# Two-stage SGD recipe
PRETRAIN_LR = 2.0
FINETUNE_LR = 0.2
LR_FLOOR_RATIO = 1.0 / 1024
PATIENCE_K = 3
CLIP_NORM = 5.0
PRETRAIN_BATCH_SIZE = 32
MAX_EPOCHS = 20

# N-gram
DEFAULT_NGRAM_ORDER = 3
FALLBACK_DISCOUNT = 0.75

# Rescoring
DEFAULT_LM_SCALE = 1.0
DEFAULT_LAMBDA_GRID = [round(0.1 * i, 1) for i in range(11)]

# Evaluation
DEFAULT_SPPL_REALIZATIONS = 100

# Parallelism
MAX_WORKERS = int(os.getenv('MAX_WORKERS', '1'))
