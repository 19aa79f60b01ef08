"""Portable session format for row-column speller recordings.

A session is a continuous multichannel EEG record plus the stimulus
markers and target characters of a row-column paradigm run: 6x6 symbol
grid, codes 1-6 for columns and 7-12 for rows, 15 repetitions of the 12
codes per character (180 flashes). Sessions serialize to the EEGB
container: magic ``EEGB``, one version byte, a little-endian uint32
header length, a UTF-8 JSON header, then the raw float32 little-endian
sample-major raster.
"""

import io
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, SessionValidationError, TruncationError

EEGB_MAGIC = b"EEGB"
EEGB_VERSION = 1

#: Post-stimulus window length in samples (667 ms at 240 Hz).
WINDOW_SAMPLES = 160

#: Flashes per character: 12 codes x 15 repetitions.
CODES_PER_REPETITION = 12
REPETITIONS_PER_CHARACTER = 15
MARKERS_PER_CHARACTER = CODES_PER_REPETITION * REPETITIONS_PER_CHARACTER

DEFAULT_MATRIX_ROWS = ("ABCDEF", "GHIJKL", "MNOPQR", "STUVWX", "YZ1234", "56789_")


class SpellerMatrix:
    """The 6x6 symbol grid: 26 letters, 9 digits and one extra symbol.

    Row codes 7-12 map to rows 0-5, column codes 1-6 to columns 0-5.
    """

    def __init__(self, rows=DEFAULT_MATRIX_ROWS):
        rows = tuple(str(r) for r in rows)
        if len(rows) != 6 or any(len(r) != 6 for r in rows):
            raise ValueError("matrix must be 6 rows of 6 symbols")
        symbols = "".join(rows)
        if len(set(symbols)) != 36:
            raise ValueError("matrix symbols must be distinct")
        n_alpha = sum(c.isalpha() for c in symbols)
        n_digit = sum(c.isdigit() for c in symbols)
        if n_alpha != 26 or n_digit != 9:
            raise ValueError(
                f"matrix must hold 26 letters, 9 digits and 1 extra symbol "
                f"(got {n_alpha} letters, {n_digit} digits)")
        self.rows = rows
        self._index = {sym: (r, c) for r, row in enumerate(rows)
                       for c, sym in enumerate(row)}

    def cell(self, row, col):
        if not (0 <= row <= 5 and 0 <= col <= 5):
            raise ValueError(f"cell ({row}, {col}) outside the 6x6 grid")
        return self.rows[row][col]

    def locate(self, symbol):
        """Return the (row, col) grid position of ``symbol``."""
        try:
            return self._index[symbol]
        except KeyError:
            raise ValueError(f"symbol {symbol!r} not in matrix") from None

    def target_codes(self, symbol):
        """Return the (row_code, col_code) pair whose flashes hit ``symbol``."""
        r, c = self.locate(symbol)
        return r + 7, c + 1

    def __contains__(self, symbol):
        return symbol in self._index

    def __eq__(self, other):
        return isinstance(other, SpellerMatrix) and self.rows == other.rows


def decode_character(row_code, col_code, matrix):
    """Map a (row_code, col_code) prediction to the symbol at their intersection."""
    if not 7 <= row_code <= 12:
        raise ValueError(f"row code {row_code} outside [7, 12]")
    if not 1 <= col_code <= 6:
        raise ValueError(f"column code {col_code} outside [1, 6]")
    return matrix.cell(row_code - 7, col_code - 1)


@dataclass(frozen=True)
class StimulusMarker:
    """One flash onset: sample offset into the record, code 1-12, target flag."""
    sample_index: int
    code: int
    is_target: bool


@dataclass(frozen=True)
class CharacterSpan:
    """Target symbol and the contiguous marker range of one spelled character."""
    symbol: str
    first_marker: int
    n_markers: int


@dataclass
class Session:
    """A recorded (or synthesized) speller run.

    ``data`` is sample-major (n_samples, n_channels) float32 in microvolts.
    ``labeled`` is False for raw test-set conversions where target flags
    and symbols are unknown; target-related invariants are then skipped.
    """
    subject_id: str
    fs_hz: float
    data: np.ndarray
    markers: list
    characters: list
    matrix: SpellerMatrix = field(default_factory=SpellerMatrix)
    channel_names: list = None
    labeled: bool = True
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.ndim != 2:
            raise ValueError("data must be 2-D (n_samples, n_channels)")
        if self.channel_names is None:
            self.channel_names = [f"ch{i:02d}" for i in range(self.n_channels)]

    @property
    def n_samples(self):
        return self.data.shape[0]

    @property
    def n_channels(self):
        return self.data.shape[1]

    def character_markers(self, char_index):
        """Return the markers of one character, in recording order."""
        span = self.characters[char_index]
        return self.markers[span.first_marker:span.first_marker + span.n_markers]


def validate_session(session):
    """Check every structural invariant; return a list of violations (empty = valid)."""
    v = []
    n_samples = session.n_samples

    if session.fs_hz <= 0:
        v.append(f"non-positive sampling rate {session.fs_hz}")
    if len(session.channel_names) != session.n_channels:
        v.append(f"{len(session.channel_names)} channel names for "
                 f"{session.n_channels} channels")

    prev = -1
    for i, m in enumerate(session.markers):
        if not 1 <= m.code <= 12:
            v.append(f"marker {i}: code {m.code} outside [1, 12]")
        if m.sample_index <= prev:
            v.append(f"unsorted markers: marker {i} at sample {m.sample_index} "
                     f"not after {prev}")
        prev = m.sample_index
        if m.sample_index < 0 or m.sample_index + WINDOW_SAMPLES > n_samples:
            v.append(f"marker {i}: window [{m.sample_index}, "
                     f"{m.sample_index + WINDOW_SAMPLES}) overruns the record")

    expected_first = 0
    for ci, span in enumerate(session.characters):
        if span.first_marker != expected_first:
            v.append(f"character {ci}: marker range starts at {span.first_marker}, "
                     f"expected {expected_first}")
        if span.n_markers != MARKERS_PER_CHARACTER:
            v.append(f"character {ci}: {span.n_markers} markers, "
                     f"expected {MARKERS_PER_CHARACTER}")
        expected_first = span.first_marker + span.n_markers
    if expected_first != len(session.markers):
        v.append(f"characters cover {expected_first} markers, "
                 f"session has {len(session.markers)}")
    if v:
        return v  # code/target accounting below assumes well-formed spans

    for ci, span in enumerate(session.characters):
        markers = session.character_markers(ci)
        counts = np.zeros(13, dtype=int)
        target_codes = set()
        code_flags = {}
        for m in markers:
            counts[m.code] += 1
            if m.is_target:
                target_codes.add(m.code)
            if m.code in code_flags and code_flags[m.code] != m.is_target:
                v.append(f"character {ci}: code {m.code} has inconsistent "
                         f"target flags")
            code_flags[m.code] = m.is_target
        bad = [c for c in range(1, 13) if counts[c] != REPETITIONS_PER_CHARACTER]
        if bad:
            v.append(f"character {ci}: codes {bad} do not appear exactly "
                     f"{REPETITIONS_PER_CHARACTER} times")

        if not session.labeled:
            continue
        if len(target_codes) != 2:
            v.append(f"character {ci}: target count != 2 "
                     f"(target codes {sorted(target_codes)})")
            continue
        rows = sorted(c for c in target_codes if c >= 7)
        cols = sorted(c for c in target_codes if c <= 6)
        if len(rows) != 1 or len(cols) != 1:
            v.append(f"character {ci}: target codes {sorted(target_codes)} are "
                     f"not one row and one column")
            continue
        if span.symbol not in session.matrix:
            v.append(f"character {ci}: symbol {span.symbol!r} not in matrix")
        elif decode_character(rows[0], cols[0], session.matrix) != span.symbol:
            v.append(f"character {ci}: target codes ({rows[0]}, {cols[0]}) decode "
                     f"to {decode_character(rows[0], cols[0], session.matrix)!r}, "
                     f"not {span.symbol!r}")
    return v


def _header_dict(session):
    return {
        "subject_id": session.subject_id,
        "fs_hz": session.fs_hz,
        "n_channels": session.n_channels,
        "n_samples": session.n_samples,
        "channel_names": list(session.channel_names),
        "matrix": list(session.matrix.rows),
        "labeled": bool(session.labeled),
        "markers": [{"sample_index": int(m.sample_index), "code": int(m.code),
                     "is_target": bool(m.is_target)} for m in session.markers],
        "characters": [{"symbol": c.symbol, "first_marker": int(c.first_marker),
                        "n_markers": int(c.n_markers)} for c in session.characters],
        "meta": session.meta,
    }


def encode_header(header):
    """Canonical JSON bytes: key-sorted, no whitespace, so output is reproducible."""
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_session(session, destination):
    """Serialize a validated session to the EEGB container.

    ``destination`` is a path or a binary file object. Returns the number
    of bytes written. Raises SessionValidationError before writing anything
    if the session is invalid.
    """
    violations = validate_session(session)
    if violations:
        raise SessionValidationError(violations)
    header_bytes = encode_header(_header_dict(session))
    raster = np.ascontiguousarray(session.data, dtype="<f4").tobytes()

    def _emit(fh):
        n = fh.write(EEGB_MAGIC)
        n += fh.write(bytes([EEGB_VERSION]))
        n += fh.write(struct.pack("<I", len(header_bytes)))
        n += fh.write(header_bytes)
        n += fh.write(raster)
        return n

    if hasattr(destination, "write"):
        return _emit(destination)
    with open(destination, "wb") as fh:
        return _emit(fh)


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"short read in {what}: expected {n} bytes, "
                          f"got {len(buf)}")
    return buf


def read_session(source):
    """Parse and fully validate an EEGB container.

    ``source`` is a path or a binary file object. Distinct failure modes:
    FormatError for magic/version/header problems, TruncationError when the
    raster ends early, SessionValidationError for invariant violations.
    """
    if hasattr(source, "read"):
        return _parse_session(source)
    with open(source, "rb") as fh:
        return _parse_session(fh)


def _parse_session(fh):
    magic = fh.read(4)
    if magic != EEGB_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {EEGB_MAGIC!r}")
    version = fh.read(1)
    if len(version) != 1 or version[0] != EEGB_VERSION:
        raise FormatError(f"unsupported EEGB version {version!r}")
    header_len = struct.unpack("<I", _read_exact(fh, 4, "header length"))[0]
    try:
        header = json.loads(_read_exact(fh, header_len, "header").decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unparseable header: {exc}") from exc

    required = ("subject_id", "fs_hz", "n_channels", "n_samples",
                "channel_names", "matrix", "markers", "characters")
    missing = [k for k in required if k not in header]
    if missing:
        raise FormatError(f"header missing fields {missing}")

    n_samples = int(header["n_samples"])
    n_channels = int(header["n_channels"])
    expected = n_samples * n_channels * 4
    raster = fh.read(expected)
    if len(raster) < expected:
        raise TruncationError(expected, len(raster))
    if fh.read(1):
        raise FormatError(f"payload longer than header-declared "
                          f"{expected} raster bytes")
    data = np.frombuffer(raster, dtype="<f4").reshape(n_samples, n_channels)

    try:
        matrix = SpellerMatrix(header["matrix"])
    except ValueError as exc:
        raise FormatError(f"invalid matrix in header: {exc}") from exc
    markers = [StimulusMarker(int(m["sample_index"]), int(m["code"]),
                              bool(m["is_target"])) for m in header["markers"]]
    characters = [CharacterSpan(str(c["symbol"]), int(c["first_marker"]),
                                int(c["n_markers"])) for c in header["characters"]]
    session = Session(
        subject_id=str(header["subject_id"]),
        fs_hz=float(header["fs_hz"]),
        data=data,
        markers=markers,
        characters=characters,
        matrix=matrix,
        channel_names=[str(c) for c in header["channel_names"]],
        labeled=bool(header.get("labeled", True)),
        meta=dict(header.get("meta", {})),
    )
    violations = validate_session(session)
    if violations:
        raise SessionValidationError(violations)
    return session


def session_to_bytes(session):
    """Convenience wrapper: serialize to an in-memory EEGB byte string."""
    buf = io.BytesIO()
    write_session(session, buf)
    return buf.getvalue()
