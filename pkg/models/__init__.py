# Language models: the scoring contract, Kneser-Ney n-grams and the LSTM

from .base_lm import LmScorer, UniformScorer
from .ngram_lm import NgramLm, train_kn, ngram_logprob, write_arpa
from .lstm_lm import LstmConfig, LstmLm, LstmState, init_lstm, forward_step, loss_and_grads, num_parameters

__all__ = [
    'LmScorer', 'UniformScorer', 'NgramLm', 'train_kn', 'ngram_logprob', 'write_arpa',
    'LstmConfig', 'LstmLm', 'LstmState', 'init_lstm', 'forward_step', 'loss_and_grads', 'num_parameters',
]
