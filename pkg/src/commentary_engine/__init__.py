"""Staged commentary generation engine.

Five sequential LLM-driven generation steps with human edit points,
argument ranking, retrieval-grounded evidence from a local BM25 index,
an LLM-as-judge evaluation harness, and SFT-dataset emission.
"""

__version__ = "0.1.0"
