"""Multichannel WAV read/write (pcm16 / IEEE float32) and resampling.

Little-endian RIFF/WAVE only, 1-8 channels.  pcm16 samples map to [-1, 1)
by division by 2**15.  The resampler is a 64-tap-per-phase Kaiser-windowed
sinc with cutoff at 0.45 times the lower of the two rates.
"""

import math
import struct

import numpy as np
from scipy import signal as sp_signal

from .core import MultichannelSignal

MAX_CHANNELS = 8
RESAMPLE_TAPS_PER_PHASE = 64
RESAMPLE_CUTOFF = 0.45
RESAMPLE_KAISER_BETA = 8.6


class MalformedWavError(ValueError):
    """File is not a parseable RIFF/WAVE container."""


class UnsupportedEncodingError(ValueError):
    """WAV encoding other than pcm16 or IEEE float32."""


class WavMetadata:
    def __init__(self, channels, sample_rate, encoding, num_samples):
        if encoding not in ("pcm16", "float32"):
            raise UnsupportedEncodingError(f"unsupported encoding {encoding!r}")
        self.channels = channels
        self.sample_rate = sample_rate
        self.encoding = encoding
        self.num_samples = num_samples

    def __repr__(self):
        return (
            f"WavMetadata(channels={self.channels}, sample_rate={self.sample_rate}, "
            f"encoding={self.encoding!r}, num_samples={self.num_samples})"
        )


def _parse_wav(raw: bytes):
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise MalformedWavError("not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(raw):
        chunk_id = raw[pos : pos + 4]
        (chunk_len,) = struct.unpack_from("<I", raw, pos + 4)
        body = raw[pos + 8 : pos + 8 + chunk_len]
        if chunk_id == b"fmt ":
            if chunk_len < 16 or len(body) < 16:
                raise MalformedWavError("truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_len:
                raise MalformedWavError("truncated data chunk")
            data = body
        pos += 8 + chunk_len + (chunk_len & 1)
    if fmt is None or data is None:
        raise MalformedWavError("missing fmt or data chunk")
    return fmt, data


def read_wav(path) -> MultichannelSignal:
    """Read a WAV file into a (channels, num_samples) signal in [-1, 1]."""
    with open(path, "rb") as fh:  # missing file -> FileNotFoundError
        raw = fh.read()
    (audio_format, channels, sample_rate, _, _, bits), data = _parse_wav(raw)
    if channels < 1 or channels > MAX_CHANNELS:
        raise MalformedWavError(f"channel count {channels} outside 1..{MAX_CHANNELS}")
    if sample_rate <= 0:
        raise MalformedWavError(f"invalid sample rate {sample_rate}")
    if audio_format == 1 and bits == 16:
        frame_bytes = 2 * channels
        usable = len(data) - len(data) % frame_bytes
        if usable == 0:
            raise MalformedWavError("empty data chunk")
        ints = np.frombuffer(data[:usable], dtype="<i2").reshape(-1, channels)
        samples = ints.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        frame_bytes = 4 * channels
        usable = len(data) - len(data) % frame_bytes
        if usable == 0:
            raise MalformedWavError("empty data chunk")
        samples = np.frombuffer(data[:usable], dtype="<f4").reshape(-1, channels).astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"unsupported WAV encoding: format tag {audio_format}, {bits} bits"
        )
    return MultichannelSignal(samples=samples.T, sample_rate=sample_rate)


def wav_metadata(path) -> WavMetadata:
    """Header-only metadata for a WAV file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    (audio_format, channels, sample_rate, _, _, bits), data = _parse_wav(raw)
    if audio_format == 1 and bits == 16:
        encoding, frame = "pcm16", 2 * channels
    elif audio_format == 3 and bits == 32:
        encoding, frame = "float32", 4 * channels
    else:
        raise UnsupportedEncodingError(
            f"unsupported WAV encoding: format tag {audio_format}, {bits} bits"
        )
    return WavMetadata(channels, sample_rate, encoding, len(data) // frame)


def write_wav(path, signal: MultichannelSignal, encoding: str = "float32") -> None:
    """Write a signal as pcm16 or float32 WAV; exact round trip for float32."""
    if signal.num_samples < 1:
        raise ValueError("cannot write an empty signal")
    if signal.channels > MAX_CHANNELS:
        raise ValueError(f"at most {MAX_CHANNELS} channels supported")
    frames = signal.samples.T  # (num_samples, channels)
    if encoding == "pcm16":
        fmt_tag, bits = 1, 16
        scaled = np.round(frames * 32768.0)
        payload = np.clip(scaled, -32768, 32767).astype("<i2").tobytes()
    elif encoding == "float32":
        fmt_tag, bits = 3, 32
        payload = frames.astype("<f4").tobytes()
    else:
        raise UnsupportedEncodingError(f"unsupported encoding {encoding!r}")
    channels = signal.channels
    byte_rate = signal.sample_rate * channels * bits // 8
    block_align = channels * bits // 8
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack(
        "<IHHIIHH", 16, fmt_tag, channels, signal.sample_rate, byte_rate, block_align, bits
    )
    header += b"data" + struct.pack("<I", len(payload))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def _design_resample_filter(up: int, down: int) -> np.ndarray:
    """FIR for the polyphase stage, designed at the up-sampled rate."""
    # cutoff 0.45 * min(rate_in, rate_out), expressed at the upsampled rate
    cutoff = RESAMPLE_CUTOFF / max(up, down)
    numtaps = 2 * (RESAMPLE_TAPS_PER_PHASE * max(up, down) // 2) + 1
    # resample_poly compensates the upsampler gain itself
    return sp_signal.firwin(numtaps, 2.0 * cutoff, window=("kaiser", RESAMPLE_KAISER_BETA))


def resample(signal: MultichannelSignal, target_rate: int) -> MultichannelSignal:
    """Polyphase sinc resampling; identity when rates already match."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == signal.sample_rate:
        return signal
    g = math.gcd(target_rate, signal.sample_rate)
    up, down = target_rate // g, signal.sample_rate // g
    taps = _design_resample_filter(up, down)
    out = sp_signal.resample_poly(signal.samples, up, down, axis=1, window=taps)
    want = round(signal.num_samples * target_rate / signal.sample_rate)
    if out.shape[1] >= want:
        out = out[:, :want]
    else:
        out = np.pad(out, ((0, 0), (0, want - out.shape[1])))
    return MultichannelSignal(samples=out, sample_rate=target_rate)
