"""Synthetic oddball sessions with controllable separability.

Target flashes add a Gaussian bump (centered 300 ms post-stimulus,
weighted across channels with a centro-parietal-like profile) onto a
white or AR(1) noise floor, following the paradigm timing: 100 ms flash
plus 75 ms blank, 42 samples per cycle at 240 Hz, 12 codes per
repetition in random order, 15 repetitions per character.
"""

from dataclasses import dataclass, field, asdict

import numpy as np

from .dataformat import (CharacterSpan, MARKERS_PER_CHARACTER,
                         REPETITIONS_PER_CHARACTER, Session, SpellerMatrix,
                         StimulusMarker, WINDOW_SAMPLES)

#: 175 ms flash cycle at 240 Hz, rounded to the nearest sample.
FLASH_CYCLE_SAMPLES = 42


@dataclass(frozen=True)
class SynthConfig:
    n_characters: int = 10
    amplitude: float = 5.0
    template_center_s: float = 0.3
    template_width_s: float = 0.05
    channel_peak: int = 32
    channel_spread: float = 10.0
    noise_sigma: float = 1.0
    noise_model: str = "white"      # "white" or "ar1"
    ar_coefficient: float = 0.0
    inter_character_gap: int = 240
    fs_hz: float = 240.0
    n_channels: int = 64
    seed: int = 0
    text: str = ""                  # overrides random symbol choice
    matrix_rows: tuple = field(default=None)

    def __post_init__(self):
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        if not 0.0 <= self.ar_coefficient <= 0.99:
            raise ValueError("AR coefficient must be in [0, 0.99]")
        if self.noise_model not in ("white", "ar1"):
            raise ValueError(f"unknown noise model {self.noise_model!r}")
        if self.n_characters < 1:
            raise ValueError("need at least one character")


def erp_template(config):
    """(window, channel-weight) pair of the additive target response."""
    t = np.arange(WINDOW_SAMPLES) / config.fs_hz
    bump = np.exp(-0.5 * ((t - config.template_center_s)
                          / config.template_width_s) ** 2)
    ch = np.arange(config.n_channels)
    weights = np.exp(-0.5 * ((ch - config.channel_peak)
                             / config.channel_spread) ** 2)
    return config.amplitude * bump, weights


def generate_session(config):
    """Build a fully valid labeled session from the config; deterministic."""
    rng = np.random.default_rng(config.seed)
    matrix = SpellerMatrix(config.matrix_rows) if config.matrix_rows \
        else SpellerMatrix()
    symbols = "".join(matrix.rows)

    if config.text:
        targets = list(config.text)
        if len(targets) != config.n_characters:
            raise ValueError(f"text length {len(targets)} != "
                             f"{config.n_characters} characters")
        for s in targets:
            if s not in matrix:
                raise ValueError(f"symbol {s!r} not in matrix")
    else:
        targets = [symbols[i] for i in
                   rng.integers(0, 36, size=config.n_characters)]

    char_stride = MARKERS_PER_CHARACTER * FLASH_CYCLE_SAMPLES \
        + config.inter_character_gap
    n_samples = config.n_characters * char_stride + WINDOW_SAMPLES
    bump, weights = erp_template(config)
    template = np.outer(bump, weights).astype(np.float64)

    data = _noise(rng, n_samples, config)
    markers = []
    characters = []
    for ci, symbol in enumerate(targets):
        row_code, col_code = matrix.target_codes(symbol)
        base = ci * char_stride
        characters.append(CharacterSpan(symbol, ci * MARKERS_PER_CHARACTER,
                                        MARKERS_PER_CHARACTER))
        for rep in range(REPETITIONS_PER_CHARACTER):
            order = rng.permutation(12) + 1
            for slot, code in enumerate(order):
                onset = base + (rep * 12 + slot) * FLASH_CYCLE_SAMPLES
                is_target = code in (row_code, col_code)
                if is_target:
                    data[onset:onset + WINDOW_SAMPLES] += template
                markers.append(StimulusMarker(onset, int(code), bool(is_target)))

    return Session(
        subject_id=f"synth-{config.seed}",
        fs_hz=config.fs_hz,
        data=data.astype(np.float32),
        markers=markers,
        characters=characters,
        matrix=matrix,
        labeled=True,
        meta={"synth_config": asdict(config)},
    )


def _noise(rng, n_samples, config):
    white = rng.standard_normal((n_samples, config.n_channels))
    if config.noise_model == "white" or config.ar_coefficient == 0.0:
        return config.noise_sigma * white
    rho = config.ar_coefficient
    # innovations scaled so the marginal variance stays sigma^2
    out = np.empty_like(white)
    scale = config.noise_sigma * np.sqrt(1.0 - rho * rho)
    out[0] = config.noise_sigma * white[0]
    for t in range(1, n_samples):
        out[t] = rho * out[t - 1] + scale * white[t]
    return out
