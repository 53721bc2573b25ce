"""Structure-aware fine-tuning of small transformers on source code."""

__version__ = "0.1.0"
