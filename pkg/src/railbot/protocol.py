"""Controller <-> robot wire protocol.

The radio link delivers at most 20 bytes per message, so every frame is a
1-byte opcode plus a fixed little-endian payload that fits that ceiling.
Multi-byte integers are little-endian. IMU samples are quantized to i16
milli-g / deci-deg-per-second, which spans +-32 g and +-3276 deg/s.

Byte layout per opcode (sizes include the opcode byte):

    0x01 MoveTo          u16 vertex, u8 speed_code            4 bytes
    0x02 Stop            -                                    1 byte
    0x03 SetSpeed        u16 mm_s                             3 bytes
    0x04 Vibrate         u8 kind, u8 amp_mm_x10,
                         u16 period_ms, u16 duration_ms       7 bytes
    0x05 RotateTurntable u8 port                              2 bytes
    0x06 StreamImu       u8 rate_hz, u8 on                    3 bytes
    0x10 HallEvent       u16 seq, u16 vertex, u32 t_ms        9 bytes
    0x11 ImuChunk        u16 seq, u16 t_off_ms,
                         3x i16 milli-g, 3x i16 deci-deg/s    17 bytes
    0x12 Ack             u16 seq, u8 status                   4 bytes

speed_code is the commanded speed in mm/s clamped to u8 (0 means "use the
calibrated profile speed"). Vibrate kinds: 0 square, 1 sawtooth, 2 quick.
Ack status: 0 ok, 1 busy, 2 rejected.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

MTU = 20
MAX_IMU_RATE_HZ = 100

VIBRATE_KINDS = {0: "square", 1: "sawtooth", 2: "quick"}


class OversizeError(ValueError):
    pass


class RateExceededError(ValueError):
    pass


class DecodeError(ValueError):
    pass


class UnknownOpcodeError(DecodeError):
    pass


class TruncatedError(DecodeError):
    pass


class TrailingBytesError(DecodeError):
    pass


def _check_range(name, value, lo, hi):
    if not lo <= value <= hi:
        raise ValueError(f"{name}={value} outside [{lo}, {hi}]")


@dataclass(frozen=True)
class MoveTo:
    vertex: int
    speed_code: int = 0

    def __post_init__(self):
        _check_range("vertex", self.vertex, 0, 0xFFFF)
        _check_range("speed_code", self.speed_code, 0, 0xFF)


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class SetSpeed:
    mm_s: int

    def __post_init__(self):
        _check_range("mm_s", self.mm_s, 0, 0xFFFF)


@dataclass(frozen=True)
class Vibrate:
    kind: int
    amp_mm_x10: int
    period_ms: int
    duration_ms: int

    def __post_init__(self):
        if self.kind not in VIBRATE_KINDS:
            raise ValueError(f"unknown vibration kind {self.kind}")
        _check_range("amp_mm_x10", self.amp_mm_x10, 0, 100)  # amplitude cap 10 mm
        _check_range("period_ms", self.period_ms, 0, 0xFFFF)
        _check_range("duration_ms", self.duration_ms, 0, 0xFFFF)


@dataclass(frozen=True)
class RotateTurntable:
    port: int

    def __post_init__(self):
        _check_range("port", self.port, 0, 0xFF)


@dataclass(frozen=True)
class StreamImu:
    rate_hz: int
    on: bool

    def __post_init__(self):
        _check_range("rate_hz", self.rate_hz, 0, 0xFF)


@dataclass(frozen=True)
class HallEvent:
    seq: int
    vertex: int
    t_ms: int

    def __post_init__(self):
        _check_range("seq", self.seq, 0, 0xFFFF)
        _check_range("vertex", self.vertex, 0, 0xFFFF)
        _check_range("t_ms", self.t_ms, 0, 0xFFFFFFFF)


@dataclass(frozen=True)
class ImuChunk:
    seq: int
    t_off_ms: int
    accel_mg: tuple[int, int, int]
    gyro_ddps: tuple[int, int, int]

    def __post_init__(self):
        _check_range("seq", self.seq, 0, 0xFFFF)
        _check_range("t_off_ms", self.t_off_ms, 0, 0xFFFF)
        for v in (*self.accel_mg, *self.gyro_ddps):
            _check_range("imu component", v, -0x8000, 0x7FFF)


@dataclass(frozen=True)
class Ack:
    seq: int
    status: int

    def __post_init__(self):
        _check_range("seq", self.seq, 0, 0xFFFF)
        _check_range("status", self.status, 0, 0xFF)


Message = Union[MoveTo, Stop, SetSpeed, Vibrate, RotateTurntable, StreamImu,
                HallEvent, ImuChunk, Ack]

# opcode -> (type, struct format for the payload after the opcode byte)
_CODECS: dict[int, tuple[type, str]] = {
    0x01: (MoveTo, "<HB"),
    0x02: (Stop, ""),
    0x03: (SetSpeed, "<H"),
    0x04: (Vibrate, "<BBHH"),
    0x05: (RotateTurntable, "<B"),
    0x06: (StreamImu, "<BB"),
    0x10: (HallEvent, "<HHI"),
    0x11: (ImuChunk, "<HHhhhhhh"),
    0x12: (Ack, "<HB"),
}
_OPCODE_OF = {cls: op for op, (cls, _) in _CODECS.items()}


def _fields(msg: Message) -> tuple:
    if isinstance(msg, MoveTo):
        return (msg.vertex, msg.speed_code)
    if isinstance(msg, Stop):
        return ()
    if isinstance(msg, SetSpeed):
        return (msg.mm_s,)
    if isinstance(msg, Vibrate):
        return (msg.kind, msg.amp_mm_x10, msg.period_ms, msg.duration_ms)
    if isinstance(msg, RotateTurntable):
        return (msg.port,)
    if isinstance(msg, StreamImu):
        return (msg.rate_hz, 1 if msg.on else 0)
    if isinstance(msg, HallEvent):
        return (msg.seq, msg.vertex, msg.t_ms)
    if isinstance(msg, ImuChunk):
        return (msg.seq, msg.t_off_ms, *msg.accel_mg, *msg.gyro_ddps)
    if isinstance(msg, Ack):
        return (msg.seq, msg.status)
    raise TypeError(f"not a protocol message: {msg!r}")


def encode_frame(msg: Message) -> bytes:
    opcode = _OPCODE_OF[type(msg)]
    _, fmt = _CODECS[opcode]
    frame = bytes([opcode]) + struct.pack(fmt, *_fields(msg))
    if len(frame) > MTU:
        raise OversizeError(f"frame of {len(frame)} bytes exceeds the {MTU}-byte MTU")
    return frame


def decode_frame(data: bytes) -> Message:
    """Total decoder: any byte string maps to a message or a DecodeError."""
    if len(data) == 0:
        raise TruncatedError("empty frame")
    opcode = data[0]
    codec = _CODECS.get(opcode)
    if codec is None:
        raise UnknownOpcodeError(f"opcode 0x{opcode:02X}")
    cls, fmt = codec
    want = 1 + struct.calcsize(fmt)
    if len(data) < want:
        raise TruncatedError(f"{cls.__name__} frame needs {want} bytes, got {len(data)}")
    if len(data) > want:
        raise TrailingBytesError(f"{len(data) - want} bytes after {cls.__name__} frame")
    values = struct.unpack(fmt, data[1:])
    if cls is MoveTo:
        return MoveTo(*values)
    if cls is Stop:
        return Stop()
    if cls is SetSpeed:
        return SetSpeed(*values)
    if cls is Vibrate:
        try:
            return Vibrate(*values)
        except ValueError as exc:
            raise DecodeError(str(exc)) from exc
    if cls is RotateTurntable:
        return RotateTurntable(*values)
    if cls is StreamImu:
        return StreamImu(values[0], bool(values[1]))
    if cls is HallEvent:
        return HallEvent(*values)
    if cls is ImuChunk:
        return ImuChunk(values[0], values[1], tuple(values[2:5]), tuple(values[5:8]))
    return Ack(*values)


# ---------------------------------------------------------------------------
# telemetry stream chunking

def quantize_accel_mg(g_value: float) -> int:
    return max(-0x8000, min(0x7FFF, round(g_value * 1000.0)))


def quantize_gyro_ddps(dps_value: float) -> int:
    return max(-0x8000, min(0x7FFF, round(dps_value * 10.0)))


def chunk_imu_stream(samples: Iterable[tuple[float, Sequence[float], Sequence[float]]],
                     rate_hz: int, start_seq: int = 0) -> list[ImuChunk]:
    """Pack (t_s, accel_g triple, gyro_dps triple) samples one per frame.

    Sequence numbers wrap at 2^16; time offsets are ms since the first
    sample, modulo the u16 range.
    """
    if rate_hz > MAX_IMU_RATE_HZ:
        raise RateExceededError(f"{rate_hz} Hz exceeds the {MAX_IMU_RATE_HZ} Hz ceiling")
    chunks: list[ImuChunk] = []
    t0: float | None = None
    for i, (t, accel, gyro) in enumerate(samples):
        if t0 is None:
            t0 = t
        chunks.append(ImuChunk(
            seq=(start_seq + i) & 0xFFFF,
            t_off_ms=round((t - t0) * 1000.0) & 0xFFFF,
            accel_mg=tuple(quantize_accel_mg(a) for a in accel),
            gyro_ddps=tuple(quantize_gyro_ddps(g) for g in gyro),
        ))
    return chunks


def reassemble_imu_stream(chunks: Iterable[ImuChunk]) -> list[tuple[float, tuple[float, float, float], tuple[float, float, float]]]:
    """Inverse of chunking at the wire quantization: t offsets in seconds,
    accel in g, gyro in deg/s.
    """
    out = []
    for c in chunks:
        out.append((
            c.t_off_ms / 1000.0,
            tuple(v / 1000.0 for v in c.accel_mg),
            tuple(v / 10.0 for v in c.gyro_ddps),
        ))
    return out
