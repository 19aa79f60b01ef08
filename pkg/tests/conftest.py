import numpy as np
import pytest

from p3speller import synth
from p3speller.dataformat import (CharacterSpan, Session, SpellerMatrix,
                                  StimulusMarker)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion."""
    rows = []
    for status in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(status, []):
            nodeid = getattr(rep, "nodeid", "")
            if "test_acceptance" in nodeid and "::" in nodeid:
                rows.append((nodeid.split("::")[-1], status))
    if rows:
        terminalreporter.write_sep("-", "acceptance criteria")
        for name, status in sorted(rows):
            flag = "PASS" if status == "passed" else "FAIL"
            terminalreporter.write_line(f"{flag}  {name}")


@pytest.fixture(scope="session")
def flat_session_85():
    """85-character labeled session, 2 channels, no ERP: marker arithmetic only."""
    cfg = synth.SynthConfig(n_characters=85, amplitude=0.0, n_channels=2,
                            seed=100)
    return synth.generate_session(cfg)


@pytest.fixture(scope="session")
def flat_session_100():
    """100-character labeled session, 2 channels, no ERP."""
    cfg = synth.SynthConfig(n_characters=100, amplitude=0.0, n_channels=2,
                            seed=101)
    return synth.generate_session(cfg)


def one_character_session(n_channels=3, seed=0, symbol="A", spacing=42,
                          fs_hz=240.0):
    """Minimal hand-built valid session: one character, custom marker spacing."""
    matrix = SpellerMatrix()
    row_code, col_code = matrix.target_codes(symbol)
    rng = np.random.default_rng(seed)
    markers = []
    pos = 0
    for rep in range(15):
        order = rng.permutation(12) + 1
        for code in order:
            markers.append(StimulusMarker(pos, int(code),
                                          code in (row_code, col_code)))
            pos += spacing
    n_samples = pos + 160
    data = rng.standard_normal((n_samples, n_channels)).astype(np.float32)
    return Session(subject_id="unit", fs_hz=fs_hz, data=data, markers=markers,
                   characters=[CharacterSpan(symbol, 0, 180)], matrix=matrix)
