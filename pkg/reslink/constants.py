import numpy as np


# Special tokens of BERT vocabularies
CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
UNK_TOKEN = "[UNK]"
PAD_TOKEN = "[PAD]"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN)
CONTINUATION_PREFIX = "##"

DEFAULT_MAX_LEN = 25
# Longest word WordPiece tries to split; longer words become [UNK].
MAX_CHARS_PER_WORD = 100

# Width of the PubMedBERT wordpiece embedding layer
EMBED_DIM = 768

# Binary file magics
EMBEDDING_MAGIC = b"EMB1"
INDEX_MAGIC = b"NIDX1"
CHECKPOINT_MAGIC = b"RCNN1"
CHECKPOINT_VERSION = 1

MODEL_KINDS = {"rescnn": 0, "transformer": 1}

# Storage dtype of every on-disk matrix
DISK_DTYPE = np.dtype("<f4")

# Finite-difference defaults
FD_STEP = 1e-5
FD_RTOL = 1e-4
FD_ATOL = 1e-8

# Published top-1 accuracies (%) of SapBERT before and after shuffling unigrams
# NCBI-d, BC5CDR-d, BC5CDR-c, MedMentions, COMETA
SAPBERT_BASELINE = np.array([91.1, 90.9, 98.2, 54.4, 74.9])
SAPBERT_SHUFFLE_UNIGRAMS = np.array([88.2, 90.2, 94.0, 53.2, 65.6])
# BioSyn, same probe: NCBI-d, BC5CDR-d, BC5CDR-c
BIOSYN_BASELINE = np.array([90.7, 92.9, 96.6])
BIOSYN_SHUFFLE_UNIGRAMS = np.array([67.0, 77.0, 74.8])
