"""Encoder bridge: produces the inputs the analysis pipeline cannot make
itself, strictly over file-format boundaries.

Outputs: "TACS" token-activation containers from pretrained transformer
checkpoints (optionally with per-token masked-LM losses), static
word-vector tables in the text interchange format, and 2-D neighbor
embeddings of EMB1 vector files as TSV. The bridge never post-processes
activations; demeaning, PCA, and metrics live downstream.
"""

__version__ = "0.1.0"
