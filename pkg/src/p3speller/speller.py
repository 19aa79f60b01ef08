"""Character decoding: accumulate per-flash ensemble scores into a
12-entry scoreboard, pick the winning row and column by argmax, and sweep
accuracy over 1..15 repetitions.
"""

import csv
import json

import numpy as np

from .dataformat import (CODES_PER_REPETITION, REPETITIONS_PER_CHARACTER,
                         decode_character)
from .errors import SpellerError


class IncompleteCharacterError(SpellerError):
    """A repetition is missing one or more of the 12 stimulus codes."""


class MissingLabelsError(SpellerError):
    """Accuracy was requested on a session without target labels."""


class ScoreBoard:
    """Mean weighted scores per stimulus code over the repetitions used.

    ``raw`` keeps the per-(code, repetition) scores so sweeps can rebuild
    the board at any repetition count without re-running the models.
    """

    def __init__(self, raw_scores, repetitions):
        self.raw = np.asarray(raw_scores, dtype=float)
        if self.raw.shape[0] != CODES_PER_REPETITION:
            raise ValueError("raw scores must have 12 code rows")
        if not 1 <= repetitions <= self.raw.shape[1]:
            raise ValueError(f"repetitions {repetitions} outside "
                             f"[1, {self.raw.shape[1]}]")
        self.j = repetitions

    @property
    def scores(self):
        """F(i) for codes 1..12: mean over the first j repetitions."""
        return self.raw[:, :self.j].mean(axis=1)

    def at_repetitions(self, j):
        return ScoreBoard(self.raw, j)


def score_character(bundle, epochs, char_index):
    """Raw (12, 15) weighted-score matrix for one character's flashes.

    All of the character's epochs go through the ensemble in one batch;
    entry [code-1, repetition] is the weighted member-probability sum for
    that flash.
    """
    idx = epochs.character_slice(char_index)
    codes = epochs.codes[idx]
    reps = epochs.repetition_index[idx]
    raw = np.full((CODES_PER_REPETITION, REPETITIONS_PER_CHARACTER), np.nan)
    scores = bundle.predict(epochs.data[idx])
    raw[codes - 1, reps] = scores
    if np.isnan(raw).any():
        missing = np.argwhere(np.isnan(raw))
        code, rep = missing[0]
        raise IncompleteCharacterError(
            f"character {char_index}: no flash of code {code + 1} in "
            f"repetition {rep}")
    return raw


def accumulate_scores(bundle, epochs, char_index, repetitions):
    """ScoreBoard of one character using its first ``repetitions`` repetitions."""
    raw = score_character(bundle, epochs, char_index)
    return ScoreBoard(raw, repetitions)


def predict_character(board, matrix):
    """(row_code, col_code, symbol) with ties broken toward the lowest code."""
    f = board.scores
    col_code = int(np.argmax(f[0:6])) + 1
    row_code = int(np.argmax(f[6:12])) + 7
    return row_code, col_code, decode_character(row_code, col_code, matrix)


def accuracy_vs_repetitions(bundle, epochs, matrix=None,
                            score_fn=None):
    """Character accuracy at every repetition count 1..15.

    ``epochs`` is a labeled EpochSet grouped by character. ``score_fn``
    can replace the ensemble scoring (e.g. an oracle that scores targets
    1 and everything else 0) and receives (epochs, char_index).

    Returns (accuracies, predictions): a length-15 array and one
    per-character record {target, predicted: [symbol at each j]}.
    """
    if not epochs.labeled:
        raise MissingLabelsError("session carries no target labels")
    if matrix is None:
        matrix = epochs.matrix
    n_chars = epochs.n_characters
    if n_chars == 0:
        raise ValueError("no characters to decode")
    correct = np.zeros(REPETITIONS_PER_CHARACTER, dtype=int)
    predictions = []
    for ci in range(n_chars):
        if score_fn is not None:
            raw = score_fn(epochs, ci)
        else:
            raw = score_character(bundle, epochs, ci)
        target = epochs.character_symbols[ci]
        record = {"character": ci, "target": target, "predicted": []}
        for j in range(1, REPETITIONS_PER_CHARACTER + 1):
            _, _, symbol = predict_character(ScoreBoard(raw, j), matrix)
            record["predicted"].append(symbol)
            if symbol == target:
                correct[j - 1] += 1
        predictions.append(record)
    return correct / n_chars, predictions


def oracle_score_fn(epochs, char_index):
    """Perfect scorer: 1 on target flashes, 0 elsewhere."""
    idx = epochs.character_slice(char_index)
    raw = np.zeros((CODES_PER_REPETITION, REPETITIONS_PER_CHARACTER))
    raw[epochs.codes[idx] - 1, epochs.repetition_index[idx]] = \
        epochs.is_target[idx].astype(float)
    return raw


def write_curve_csv(accuracies, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["repetitions", "accuracy"])
        for j, acc in enumerate(accuracies, start=1):
            writer.writerow([j, f"{acc:.10g}"])


def write_predictions_json(predictions, accuracies, path, extra=None):
    doc = {"accuracy_by_repetitions": list(map(float, accuracies)),
           "characters": predictions}
    if extra:
        doc.update(extra)
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
