"""ASTRA: institution mapping via codebook quantization, UMAP projection,
multi-algorithm clustering, NMF topics, and boundary-entropy analysis."""

__version__ = "0.1.0"
