# Data package: corpora, n-best lists, synthetic benchmark and artifact storage
