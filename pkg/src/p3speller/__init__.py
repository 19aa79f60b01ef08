"""Offline P300 speller pipeline.

Preprocess oddball-paradigm EEG, train a weighted ensemble of five
spatio-sequential CNNs on class-balanced subsets, decode spelled
characters by score accumulation, and simulate character accuracy
from AUC via d-prime.
"""

__version__ = "0.1.0"
