"""Byte-level framed serial protocol between the host and the hand.

Frame layout:  0xAA | length | command | actuator_id | payload | crc
where length is the payload size (0..32), actuator_id is 0..5 or 0xFF for
broadcast, and crc is CRC-8 (polynomial 0x07, init 0, MSB first) over
length..payload. Command values are scaled integers, never floats:
pressure targets in Pa/10, curvature targets in 0.01/m.

Commands carry no sequence numbers; every command is an absolute setting,
so retrying over a lossy link is always safe. The incremental decoder
consumes arbitrary byte streams: on a bad sync, bad length, bad id or CRC
mismatch it discards a single byte and rescans, so it can never crash or
swallow a later valid frame.
"""

from __future__ import annotations

import struct
from collections import deque
from dataclasses import dataclass
from enum import Enum

from .errors import DomainError, EncodeError
from .rand import DeterministicRng

SYNC = 0xAA
BROADCAST_ID = 0xFF
MAX_PAYLOAD = 32
MAX_ACTUATOR_ID = 5
_HEADER_LEN = 4  # sync, length, command, actuator_id
_MIN_FRAME = _HEADER_LEN + 1

CMD_SET_PRESSURE_TARGET = 0x01
CMD_SET_CURVATURE_TARGET = 0x02
CMD_STOP = 0x03
CMD_VENT = 0x04
CMD_GET_STATE = 0x05
CMD_STREAM_START = 0x06
CMD_STREAM_STOP = 0x07
CMD_RESET_FAULT = 0x08
CMD_TELEMETRY = 0x85

CRC_POLY = 0x07


def _build_crc_table(poly: int) -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFF if crc & 0x80 else (crc << 1) & 0xFF
        table.append(crc)
    return tuple(table)


_CRC_TABLE = _build_crc_table(CRC_POLY)


def crc8(data: bytes | bytearray | memoryview) -> int:
    crc = 0
    for b in data:
        crc = _CRC_TABLE[crc ^ b]
    return crc


@dataclass(frozen=True)
class Frame:
    command: int
    actuator_id: int
    payload: bytes = b""


def _check_actuator_id(actuator_id: int) -> None:
    if not (0 <= actuator_id <= MAX_ACTUATOR_ID or actuator_id == BROADCAST_ID):
        raise EncodeError(f"actuator_id must be 0..{MAX_ACTUATOR_ID} or 0xFF, got {actuator_id}")


def encode(frame: Frame) -> bytes:
    """Bit-exact serialization of a frame."""
    if len(frame.payload) > MAX_PAYLOAD:
        raise EncodeError(f"payload of {len(frame.payload)} bytes exceeds {MAX_PAYLOAD}")
    if not (0 <= frame.command <= 0xFF):
        raise EncodeError(f"command byte out of range: {frame.command}")
    _check_actuator_id(frame.actuator_id)
    body = bytes([len(frame.payload), frame.command, frame.actuator_id]) + frame.payload
    return bytes([SYNC]) + body + bytes([crc8(body)])


class DecodeStatus(Enum):
    FRAME = "frame"
    NEED_MORE = "need-more-bytes"
    RESYNC = "resync"


def try_parse(buf: bytes | bytearray, cursor: int = 0) -> tuple[DecodeStatus, Frame | None, int]:
    """One incremental parse step at ``cursor``.

    Returns (status, frame-or-None, next cursor). RESYNC means one byte was
    discarded (bad sync, implausible length, bad id, or CRC mismatch);
    NEED_MORE means the buffer ends inside a potential frame.
    """
    n = len(buf)
    if cursor >= n:
        return DecodeStatus.NEED_MORE, None, cursor
    if buf[cursor] != SYNC:
        return DecodeStatus.RESYNC, None, cursor + 1
    if n - cursor < _MIN_FRAME:
        return DecodeStatus.NEED_MORE, None, cursor
    length = buf[cursor + 1]
    if length > MAX_PAYLOAD:
        return DecodeStatus.RESYNC, None, cursor + 1
    total = _MIN_FRAME + length
    if n - cursor < total:
        return DecodeStatus.NEED_MORE, None, cursor
    body = bytes(buf[cursor + 1:cursor + _HEADER_LEN + length])
    if crc8(body) != buf[cursor + _HEADER_LEN + length]:
        return DecodeStatus.RESYNC, None, cursor + 1
    actuator_id = body[2]
    if actuator_id > MAX_ACTUATOR_ID and actuator_id != BROADCAST_ID:
        return DecodeStatus.RESYNC, None, cursor + 1
    frame = Frame(command=body[1], actuator_id=actuator_id, payload=body[3:])
    return DecodeStatus.FRAME, frame, cursor + total


class FrameDecoder:
    """Streaming decoder with diagnostics counters. Accepts any byte garbage."""

    def __init__(self):
        self._buf = bytearray()
        self.frames_decoded = 0
        self.crc_errors = 0
        self.bytes_skipped = 0

    def feed(self, data: bytes) -> list[Frame]:
        self._buf += data
        buf = self._buf
        frames: list[Frame] = []
        pos = 0
        n = len(buf)
        while pos < n:
            idx = buf.find(SYNC, pos)
            if idx < 0:
                self.bytes_skipped += n - pos
                pos = n
                break
            if idx > pos:
                self.bytes_skipped += idx - pos
                pos = idx
            if n - pos < _MIN_FRAME:
                break
            length = buf[pos + 1]
            if length > MAX_PAYLOAD:
                self.bytes_skipped += 1
                pos += 1
                continue
            total = _MIN_FRAME + length
            if n - pos < total:
                break
            body = bytes(buf[pos + 1:pos + _HEADER_LEN + length])
            if crc8(body) != buf[pos + _HEADER_LEN + length]:
                self.crc_errors += 1
                self.bytes_skipped += 1
                pos += 1
                continue
            actuator_id = body[2]
            if actuator_id > MAX_ACTUATOR_ID and actuator_id != BROADCAST_ID:
                self.bytes_skipped += 1
                pos += 1
                continue
            frames.append(Frame(command=body[1], actuator_id=actuator_id, payload=body[3:]))
            self.frames_decoded += 1
            pos += total
        del buf[:pos]
        return frames


# --- typed command layer -------------------------------------------------

@dataclass(frozen=True)
class SetPressureTarget:
    pascals: float


@dataclass(frozen=True)
class SetCurvatureTarget:
    curvature: float


@dataclass(frozen=True)
class Vent:
    pass


@dataclass(frozen=True)
class Stop:
    pass


@dataclass(frozen=True)
class GetState:
    pass


@dataclass(frozen=True)
class StreamStart:
    period_ms: int


@dataclass(frozen=True)
class StreamStop:
    pass


@dataclass(frozen=True)
class ResetFault:
    pass


Command = (SetPressureTarget | SetCurvatureTarget | Vent | Stop | GetState
           | StreamStart | StreamStop | ResetFault)


@dataclass(frozen=True)
class Telemetry:
    t_ms: int
    pressure_counts: int
    strain_counts: int
    fsm_mode: int


_PRESSURE_LSB_PA = 10.0
_CURVATURE_LSB = 0.01
_TELEMETRY_STRUCT = struct.Struct("<IHHB")


def frame_for_command(command: Command, actuator_id: int) -> Frame:
    """Build the wire frame for a typed command."""
    if isinstance(command, SetPressureTarget):
        raw = round(command.pascals / _PRESSURE_LSB_PA)
        if not (0 <= raw <= 0xFFFF):
            raise EncodeError(f"pressure target {command.pascals} Pa not encodable as u16 Pa/10")
        return Frame(CMD_SET_PRESSURE_TARGET, actuator_id, struct.pack("<H", raw))
    if isinstance(command, SetCurvatureTarget):
        raw = round(command.curvature / _CURVATURE_LSB)
        if not (0 <= raw <= 0xFFFF):
            raise EncodeError(f"curvature target {command.curvature} not encodable as u16 0.01/m")
        return Frame(CMD_SET_CURVATURE_TARGET, actuator_id, struct.pack("<H", raw))
    if isinstance(command, StreamStart):
        if not (1 <= command.period_ms <= 0xFF):
            raise EncodeError(f"stream period must be 1..255 ms, got {command.period_ms}")
        return Frame(CMD_STREAM_START, actuator_id, bytes([command.period_ms]))
    simple = {Vent: CMD_VENT, Stop: CMD_STOP, GetState: CMD_GET_STATE,
              StreamStop: CMD_STREAM_STOP, ResetFault: CMD_RESET_FAULT}
    code = simple.get(type(command))
    if code is None:
        raise EncodeError(f"unsupported command {command!r}")
    return Frame(code, actuator_id)


def encode_command(command: Command, actuator_id: int) -> bytes:
    return encode(frame_for_command(command, actuator_id))


def parse_command(frame: Frame) -> Command | None:
    """Typed command from a decoded frame; None for unknown or malformed.

    Unknown command codes are rejected, never raised on: a device must keep
    running whatever arrives.
    """
    cmd, payload = frame.command, frame.payload
    if cmd == CMD_SET_PRESSURE_TARGET:
        if len(payload) != 2:
            return None
        return SetPressureTarget(struct.unpack("<H", payload)[0] * _PRESSURE_LSB_PA)
    if cmd == CMD_SET_CURVATURE_TARGET:
        if len(payload) != 2:
            return None
        return SetCurvatureTarget(struct.unpack("<H", payload)[0] * _CURVATURE_LSB)
    if cmd == CMD_STREAM_START:
        if len(payload) != 1 or payload[0] == 0:
            return None
        return StreamStart(payload[0])
    simple = {CMD_VENT: Vent, CMD_STOP: Stop, CMD_GET_STATE: GetState,
              CMD_STREAM_STOP: StreamStop, CMD_RESET_FAULT: ResetFault}
    ctor = simple.get(cmd)
    if ctor is None or payload:
        return None
    return ctor()


def encode_telemetry(actuator_id: int, t_ms: int, pressure_counts: int,
                     strain_counts: int, fsm_mode: int) -> bytes:
    payload = _TELEMETRY_STRUCT.pack(t_ms & 0xFFFFFFFF, pressure_counts & 0xFFFF,
                                     strain_counts & 0xFFFF, fsm_mode & 0xFF)
    return encode(Frame(CMD_TELEMETRY, actuator_id, payload))


def parse_telemetry(frame: Frame) -> Telemetry | None:
    if frame.command != CMD_TELEMETRY or len(frame.payload) != _TELEMETRY_STRUCT.size:
        return None
    t_ms, pressure_counts, strain_counts, fsm_mode = _TELEMETRY_STRUCT.unpack(frame.payload)
    return Telemetry(t_ms, pressure_counts, strain_counts, fsm_mode)


# --- simulated serial bus -------------------------------------------------

class _Channel:
    def __init__(self, loss_rate: float, bit_error_rate: float, latency_s: float,
                 rng: DeterministicRng):
        self._loss = loss_rate
        self._ber = bit_error_rate
        self._latency = latency_s
        self._rng = rng
        self._queue: deque[tuple[float, int]] = deque()

    def send(self, data: bytes, t: float = 0.0) -> None:
        for byte in data:
            if self._loss > 0.0 and self._rng.random() < self._loss:
                continue
            if self._ber > 0.0:
                for bit in range(8):
                    if self._rng.random() < self._ber:
                        byte ^= 1 << bit
            self._queue.append((t + self._latency, byte))

    def recv(self, t: float | None = None) -> bytes:
        out = bytearray()
        while self._queue and (t is None or self._queue[0][0] <= t):
            out.append(self._queue.popleft()[1])
        return bytes(out)


class SimulatedBus:
    """Bidirectional lossy byte channel, deterministic for a given seed.

    Drops whole bytes with probability loss_rate, flips each bit with
    probability bit_error_rate, and delays delivery by latency_s of
    simulated time (recv with t=None drains everything).
    """

    def __init__(self, loss_rate: float = 0.0, bit_error_rate: float = 0.0,
                 latency_s: float = 0.0, seed: int = 0):
        for name, rate in (("loss_rate", loss_rate), ("bit_error_rate", bit_error_rate)):
            if not (0.0 <= rate < 1.0):
                raise DomainError(f"{name} must be in [0, 1), got {rate}")
        if latency_s < 0.0:
            raise DomainError(f"latency_s must be >= 0, got {latency_s}")
        root = DeterministicRng(seed)
        self._down = _Channel(loss_rate, bit_error_rate, latency_s, root.spawn(1))
        self._up = _Channel(loss_rate, bit_error_rate, latency_s, root.spawn(2))

    def host_send(self, data: bytes, t: float = 0.0) -> None:
        self._down.send(data, t)

    def device_recv(self, t: float | None = None) -> bytes:
        return self._down.recv(t)

    def device_send(self, data: bytes, t: float = 0.0) -> None:
        self._up.send(data, t)

    def host_recv(self, t: float | None = None) -> bytes:
        return self._up.recv(t)
