"""Siamese deep domain adaptation for cross-session EEG classification."""
__version__ = "1.0.0"
