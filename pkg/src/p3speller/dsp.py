"""Bandpass filter design, epoch extraction, decimation and averaging.

The preprocessing chain filters each channel of the continuous record
with a Chebyshev Type I bandpass (designed here from the analog lowpass
prototype via the bandpass transform and the bilinear transform), then
slices a 160-sample post-stimulus window per flash. The classifier
consumes the full 160x64 filtered epochs; the 896-value decimated
feature vector is kept for export and compatibility.
"""

import json
import math
import struct
from dataclasses import dataclass

import numpy as np

from .dataformat import (SpellerMatrix, WINDOW_SAMPLES, encode_header,
                         validate_session)
from .errors import (DimensionError, FormatError, SessionValidationError,
                     TruncationError)

EPB_MAGIC = b"EPB1"
EPB_VERSION = 1

#: Samples kept per channel by the default decimation (stride 12 on 160).
DECIMATED_SAMPLES = 14


@dataclass(frozen=True)
class SosSection:
    """One biquad, a0 normalized to 1: y = b0 x + b1 x' + b2 x'' - a1 y' - a2 y''."""
    b0: float
    b1: float
    b2: float
    a1: float
    a2: float

    def poles(self):
        return np.roots([1.0, self.a1, self.a2])


@dataclass(frozen=True)
class IirFilter:
    """A cascade of second-order sections plus the design metadata."""
    sections: tuple
    order: int
    ripple_db: float
    low_hz: float
    high_hz: float
    fs_hz: float

    def pole_magnitudes(self):
        return np.concatenate([np.abs(s.poles()) for s in self.sections])

    def is_stable(self):
        return bool(np.all(self.pole_magnitudes() < 1.0))

    def frequency_response(self, freqs_hz):
        """Complex response H(e^{jw}) of the full cascade at the given frequencies."""
        w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=float) / self.fs_hz
        z1 = np.exp(-1j * w)
        z2 = z1 * z1
        h = np.ones_like(z1, dtype=complex)
        for s in self.sections:
            h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2)
        return h

    def coefficient_array(self):
        """(n_sections, 6) array in [b0, b1, b2, 1, a1, a2] layout."""
        return np.array([[s.b0, s.b1, s.b2, 1.0, s.a1, s.a2]
                         for s in self.sections])


def _cheby1_prototype(order, ripple_db):
    """Analog Chebyshev Type I lowpass prototype as (zeros, poles, gain)."""
    eps = math.sqrt(10.0 ** (0.1 * ripple_db) - 1.0)
    mu = math.asinh(1.0 / eps) / order
    k = np.arange(1, order + 1)
    theta = np.pi * (2 * k - 1) / (2 * order)
    poles = -np.sinh(mu) * np.sin(theta) + 1j * np.cosh(mu) * np.cos(theta)
    gain = np.prod(-poles).real
    if order % 2 == 0:
        gain /= math.sqrt(1.0 + eps * eps)
    return np.array([], dtype=complex), poles, gain


def _lp2bp(zeros, poles, gain, wo, bw):
    """Lowpass-to-bandpass transform in zpk form; order doubles."""
    degree = len(poles) - len(zeros)
    z_s = zeros * bw / 2.0
    p_s = poles * bw / 2.0
    z_bp = np.concatenate([z_s + np.sqrt(z_s * z_s - wo * wo),
                           z_s - np.sqrt(z_s * z_s - wo * wo)])
    p_bp = np.concatenate([p_s + np.sqrt(p_s * p_s - wo * wo),
                           p_s - np.sqrt(p_s * p_s - wo * wo)])
    z_bp = np.append(z_bp, np.zeros(degree))
    k_bp = gain * bw ** degree
    return z_bp, p_bp, k_bp


def _bilinear(zeros, poles, gain, fs):
    """Analog-to-digital map s -> 2 fs (z-1)/(z+1); zeros at infinity land on -1."""
    degree = len(poles) - len(zeros)
    fs2 = 2.0 * fs
    z_d = (fs2 + zeros) / (fs2 - zeros)
    p_d = (fs2 + poles) / (fs2 - poles)
    z_d = np.append(z_d, -np.ones(degree))
    k_d = gain * (np.prod(fs2 - zeros) / np.prod(fs2 - poles)).real
    return z_d, p_d, k_d


def _conjugate_pairs(roots, what):
    """Group an even set of roots into conjugate (or real) pairs."""
    roots = list(roots)
    if len(roots) % 2:
        raise ValueError(f"odd number of {what}")
    complexes = sorted((r for r in roots if abs(r.imag) > 1e-12),
                       key=lambda r: (r.real, abs(r.imag), r.imag))
    reals = sorted((r.real for r in roots if abs(r.imag) <= 1e-12))
    pairs = []
    while complexes:
        r = complexes.pop(0)
        match = min(range(len(complexes)),
                    key=lambda i: abs(complexes[i] - r.conjugate()))
        mate = complexes.pop(match)
        if abs(mate - r.conjugate()) > 1e-6 * max(1.0, abs(r)):
            raise ValueError(f"numerically degenerate pairing of {what}: "
                             f"{r} has no conjugate partner")
        pairs.append((r, mate))
    while reals:
        pairs.append((complex(reals.pop(0)), complex(reals.pop())))
    return pairs


def _zpk_to_sections(zeros, poles, gain):
    """Pair conjugate pole pairs with their nearest zero pairs into biquads.

    The overall gain rides on the first section; pairing affects only the
    internal scaling of the cascade, never the product response.
    """
    pole_pairs = _conjugate_pairs(poles, "poles")
    zero_pairs = _conjugate_pairs(zeros, "zeros")
    if len(pole_pairs) != len(zero_pairs):
        raise ValueError("zero/pole pair count mismatch")
    # worst (closest to the unit circle) poles pick their zeros first
    pole_pairs.sort(key=lambda pr: -max(abs(pr[0]), abs(pr[1])))
    sections = []
    remaining = list(zero_pairs)
    for p1, p2 in pole_pairs:
        i = min(range(len(remaining)),
                key=lambda j: abs(remaining[j][0] - p1) + abs(remaining[j][1] - p2))
        z1, z2 = remaining.pop(i)
        b = np.poly([z1, z2]).real
        a = np.poly([p1, p2]).real
        sections.append((b, a))
    sections[0] = (sections[0][0] * gain, sections[0][1])
    return tuple(SosSection(b[0], b[1], b[2], a[1], a[2]) for b, a in sections)


def design_cheby1_bandpass(order=4, ripple_db=0.5, low_hz=0.1, high_hz=10.0,
                           fs_hz=240.0):
    """Design the Type I Chebyshev bandpass used by the preprocessing stage.

    ``order`` is the lowpass prototype order; the bandpass transform doubles
    it, so order 4 realizes as 4 second-order sections. Band edges are
    prewarped so the digital filter hits them exactly.
    """
    if not (0 < low_hz < high_hz < fs_hz / 2):
        raise ValueError(f"band edges ({low_hz}, {high_hz}) must satisfy "
                         f"0 < low < high < fs/2 = {fs_hz / 2}")
    if order < 1:
        raise ValueError("order must be >= 1")
    if ripple_db <= 0:
        raise ValueError("ripple must be positive")

    zeros, poles, gain = _cheby1_prototype(order, ripple_db)
    # normalized design grid: Nyquist at 1.0, bilinear sampling rate 2.0
    wn = np.array([low_hz, high_hz]) / (fs_hz / 2.0)
    fs_design = 2.0
    warped = 2.0 * fs_design * np.tan(np.pi * wn / fs_design)
    bw = warped[1] - warped[0]
    wo = math.sqrt(warped[0] * warped[1])
    zeros, poles, gain = _lp2bp(zeros, poles, gain, wo, bw)
    zeros, poles, gain = _bilinear(zeros, poles, gain, fs_design)

    if np.any(np.abs(poles) >= 1.0):
        raise ValueError("design produced an unstable pole")
    sections = _zpk_to_sections(zeros, poles, gain)
    return IirFilter(sections=sections, order=order, ripple_db=ripple_db,
                     low_hz=low_hz, high_hz=high_hz, fs_hz=fs_hz)


def filter_signal(iir, samples, zero_phase=False):
    """Apply the cascade causally (direct form II transposed, zero state).

    ``samples`` is (n,) or (n, n_channels); channels filter independently.
    ``zero_phase`` runs a forward-backward pass instead (no edge padding),
    kept behind a flag for experimentation.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty input")
    squeeze = x.ndim == 1
    if squeeze:
        x = x[:, None]
    if zero_phase:
        y = filter_signal(iir, x, zero_phase=False)
        y = filter_signal(iir, y[::-1], zero_phase=False)[::-1]
        return y[:, 0] if squeeze else y

    n, n_ch = x.shape
    coeffs = iir.coefficient_array()
    n_sec = len(coeffs)
    s1 = np.zeros((n_sec, n_ch))
    s2 = np.zeros((n_sec, n_ch))
    b0, b1, b2 = coeffs[:, 0], coeffs[:, 1], coeffs[:, 2]
    a1, a2 = coeffs[:, 4], coeffs[:, 5]
    out = np.empty_like(x)
    for t in range(n):
        v = x[t]
        for k in range(n_sec):
            y = b0[k] * v + s1[k]
            s1[k] = b1[k] * v - a1[k] * y + s2[k]
            s2[k] = b2[k] * v - a2[k] * y
            v = y
        out[t] = v
    return out[:, 0] if squeeze else out


@dataclass(frozen=True)
class Epoch:
    """One post-stimulus window: (160, n_channels) samples plus its labels."""
    samples: np.ndarray
    code: int
    is_target: bool
    character_index: int
    repetition_index: int


class EpochSet:
    """Column-oriented store of extracted epochs.

    ``data`` is (n_epochs, 160, n_channels) float32; metadata arrays run
    parallel to it. Immutable by convention after construction.
    """

    def __init__(self, data, codes, is_target, character_index,
                 repetition_index, fs_hz, matrix=None, subject_id="",
                 character_symbols=(), labeled=True, meta=None):
        self.data = np.asarray(data, dtype=np.float32)
        self.codes = np.asarray(codes, dtype=np.int16)
        self.is_target = np.asarray(is_target, dtype=bool)
        self.character_index = np.asarray(character_index, dtype=np.int32)
        self.repetition_index = np.asarray(repetition_index, dtype=np.int16)
        self.fs_hz = float(fs_hz)
        self.matrix = matrix if matrix is not None else SpellerMatrix()
        self.subject_id = subject_id
        self.character_symbols = list(character_symbols)
        self.labeled = labeled
        self.meta = dict(meta or {})
        n = len(self.data)
        if not (len(self.codes) == len(self.is_target) ==
                len(self.character_index) == len(self.repetition_index) == n):
            raise DimensionError("metadata arrays must match epoch count")

    def __len__(self):
        return len(self.data)

    def __getitem__(self, i):
        return Epoch(self.data[i], int(self.codes[i]), bool(self.is_target[i]),
                     int(self.character_index[i]), int(self.repetition_index[i]))

    @property
    def n_characters(self):
        return 0 if len(self) == 0 else int(self.character_index.max()) + 1

    def character_slice(self, char_index):
        """Indices of one character's epochs, in recording order."""
        return np.flatnonzero(self.character_index == char_index)


def extract_epochs(session, iir):
    """Filter the continuous record once, then slice one window per marker.

    Filtering the whole record before slicing keeps overlapping epochs
    consistent and avoids per-epoch edge transients.
    """
    violations = validate_session(session)
    if violations:
        raise SessionValidationError(violations)
    filtered = filter_signal(iir, session.data)

    n = len(session.markers)
    data = np.empty((n, WINDOW_SAMPLES, session.n_channels), dtype=np.float32)
    codes = np.empty(n, dtype=np.int16)
    target = np.empty(n, dtype=bool)
    char_idx = np.empty(n, dtype=np.int32)
    rep_idx = np.empty(n, dtype=np.int16)

    for ci, span in enumerate(session.characters):
        seen = np.zeros(13, dtype=np.int16)
        for k in range(span.first_marker, span.first_marker + span.n_markers):
            m = session.markers[k]
            data[k] = filtered[m.sample_index:m.sample_index + WINDOW_SAMPLES]
            codes[k] = m.code
            target[k] = m.is_target
            char_idx[k] = ci
            rep_idx[k] = seen[m.code]
            seen[m.code] += 1

    return EpochSet(data, codes, target, char_idx, rep_idx,
                    fs_hz=session.fs_hz, matrix=session.matrix,
                    subject_id=session.subject_id,
                    character_symbols=[c.symbol for c in session.characters],
                    labeled=session.labeled)


@dataclass(frozen=True)
class FeatureVector:
    """Decimated epoch: per-channel sample picks concatenated channel-block-wise."""
    values: np.ndarray
    stride: int
    samples_per_channel: int
    conforming: bool


def decimate_epoch(epoch, stride=12, strict=True):
    """Subsample one epoch at a fixed stride and concatenate channel blocks.

    The default stride 12 takes samples 0, 12, ..., 156: 14 per channel,
    896 values over 64 channels. Other strides are allowed but flagged
    non-conforming (or rejected when ``strict``).
    """
    samples = epoch.samples if isinstance(epoch, Epoch) else np.asarray(epoch)
    if stride < 1:
        raise ValueError("stride must be positive")
    picked = samples[::stride, :]
    per_channel = picked.shape[0]
    conforming = per_channel == DECIMATED_SAMPLES
    if strict and not conforming:
        raise DimensionError(
            f"stride {stride} yields {per_channel} samples per channel, "
            f"expected {DECIMATED_SAMPLES}")
    return FeatureVector(values=picked.T.ravel().copy(), stride=stride,
                         samples_per_channel=per_channel, conforming=conforming)


def average_epochs(epochs):
    """Element-wise mean of epochs sharing one stimulus code."""
    if not epochs:
        raise ValueError("no epochs to average")
    codes = {e.code for e in epochs}
    if len(codes) != 1:
        raise ValueError(f"mixed codes {sorted(codes)} cannot be averaged")
    labels = {e.is_target for e in epochs}
    if len(labels) != 1:
        raise ValueError("mixed target labels cannot be averaged")
    mean = np.mean([e.samples for e in epochs], axis=0)
    first = epochs[0]
    return Epoch(samples=mean, code=first.code, is_target=first.is_target,
                 character_index=first.character_index,
                 repetition_index=first.repetition_index)


def write_epochs(epochs, destination):
    """Serialize an EpochSet to the EPB1 container (same scheme as EEGB)."""
    header = {
        "subject_id": epochs.subject_id,
        "fs_hz": epochs.fs_hz,
        "n_epochs": len(epochs),
        "n_samples": int(epochs.data.shape[1]),
        "n_channels": int(epochs.data.shape[2]),
        "matrix": list(epochs.matrix.rows),
        "labeled": bool(epochs.labeled),
        "character_symbols": list(epochs.character_symbols),
        "epochs": [{"code": int(c), "is_target": bool(t), "character": int(ch),
                    "repetition": int(r)}
                   for c, t, ch, r in zip(epochs.codes, epochs.is_target,
                                          epochs.character_index,
                                          epochs.repetition_index)],
        "meta": epochs.meta,
    }
    header_bytes = encode_header(header)
    raster = np.ascontiguousarray(epochs.data, dtype="<f4").tobytes()

    def _emit(fh):
        n = fh.write(EPB_MAGIC)
        n += fh.write(bytes([EPB_VERSION]))
        n += fh.write(struct.pack("<I", len(header_bytes)))
        n += fh.write(header_bytes)
        n += fh.write(raster)
        return n

    if hasattr(destination, "write"):
        return _emit(destination)
    with open(destination, "wb") as fh:
        return _emit(fh)


def read_epochs(source):
    """Parse an EPB1 container back into an EpochSet."""
    if not hasattr(source, "read"):
        with open(source, "rb") as fh:
            return read_epochs(fh)
    fh = source
    magic = fh.read(4)
    if magic != EPB_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {EPB_MAGIC!r}")
    version = fh.read(1)
    if len(version) != 1 or version[0] != EPB_VERSION:
        raise FormatError(f"unsupported EPB version {version!r}")
    raw_len = fh.read(4)
    if len(raw_len) != 4:
        raise FormatError("short read in header length")
    header_len = struct.unpack("<I", raw_len)[0]
    raw = fh.read(header_len)
    if len(raw) != header_len:
        raise FormatError("short read in header")
    header = json.loads(raw.decode("utf-8"))

    n = int(header["n_epochs"])
    shape = (n, int(header["n_samples"]), int(header["n_channels"]))
    expected = shape[0] * shape[1] * shape[2] * 4
    raster = fh.read(expected)
    if len(raster) < expected:
        raise TruncationError(expected, len(raster))
    data = np.frombuffer(raster, dtype="<f4").reshape(shape)
    recs = header["epochs"]
    return EpochSet(
        data=data,
        codes=[r["code"] for r in recs],
        is_target=[r["is_target"] for r in recs],
        character_index=[r["character"] for r in recs],
        repetition_index=[r["repetition"] for r in recs],
        fs_hz=header["fs_hz"],
        matrix=SpellerMatrix(header["matrix"]),
        subject_id=header.get("subject_id", ""),
        character_symbols=header.get("character_symbols", []),
        labeled=bool(header.get("labeled", True)),
        meta=header.get("meta", {}),
    )
