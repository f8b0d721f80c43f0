"""Bit-exact NMEA-0183 AIVDM parsing and synthesis.

Supports position reports (types 1/2/3) and the static/voyage report
(type 5), which carries the vessel dimension fields consumed by metadata
validation. Everything else raises UnsupportedType.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

MAX_PAYLOAD_CHARS = 60  # armored characters per sentence fragment

_SIXBIT_TEXT = (
    "@ABCDEFGHIJKLMNOPQRSTUVWXYZ[\\]^_ !\"#$%&'()*+,-./0123456789:;<=>?"
)

LON_NOT_AVAILABLE = 181 * 600_000  # 0x6791AC0
LAT_NOT_AVAILABLE = 91 * 600_000  # 0x3412140


class NonAsciiInput(ValueError):
    pass


class InvalidArmorChar(ValueError):
    pass


class ChecksumMismatch(ValueError):
    pass


class IncompleteFragmentGroup(ValueError):
    pass


class UnsupportedType(ValueError):
    pass


class FieldOverflow(ValueError):
    pass


def checksum(body: str) -> str:
    """NMEA checksum: uppercase hex of the byte-wise XOR over the body."""
    acc = 0
    for ch in body:
        code = ord(ch)
        if code > 0x7F:
            raise NonAsciiInput(f"non-ASCII character in NMEA body: {ch!r}")
        acc ^= code
    return f"{acc:02X}"


def decode_armoring(ch: str) -> int:
    """Map one armored payload character to its 6-bit value."""
    v = ord(ch) - 48
    # Valid raw offsets are 0..39 ('0'..'W') and 48..71 ('`'..'w').
    if v < 0 or (39 < v < 48) or v > 71:
        raise InvalidArmorChar(f"invalid armoring character: {ch!r}")
    if v > 40:
        v -= 8
    return v


def encode_armoring(value: int) -> str:
    if not 0 <= value <= 63:
        raise ValueError(f"armored value must be 6-bit, got {value}")
    return chr(value + 48) if value < 40 else chr(value + 56)


@dataclass(frozen=True)
class NmeaSentence:
    """One AIVDM sentence; ``checksum`` is computed when left empty."""

    fragment_count: int
    fragment_index: int
    sequential_id: str
    channel: str
    armored_payload: str
    fill_bits: int
    checksum: str = ""

    def __post_init__(self) -> None:
        if not 1 <= self.fragment_index <= self.fragment_count:
            raise ValueError("fragment_index must be within 1..fragment_count")
        if not 0 <= self.fill_bits <= 5:
            raise ValueError("fill_bits must be in 0..5")
        for ch in self.armored_payload:
            decode_armoring(ch)
        if not self.checksum:
            object.__setattr__(self, "checksum", checksum(self.body))

    @property
    def body(self) -> str:
        return (
            f"AIVDM,{self.fragment_count},{self.fragment_index},"
            f"{self.sequential_id},{self.channel},{self.armored_payload},{self.fill_bits}"
        )

    def render(self) -> str:
        return f"!{self.body}*{self.checksum}\r\n"


def parse_sentence(line: str) -> NmeaSentence:
    """Parse one raw AIVDM line.

    The checksum is validated against the raw body before any field is
    interpreted, so any single-byte corruption between '!' and '*' surfaces
    as ChecksumMismatch rather than a downstream parse error.
    """
    line = line.rstrip("\r\n")
    if not line.startswith("!") or "*" not in line:
        raise ValueError(f"not an NMEA sentence: {line!r}")
    body, _, claimed = line[1:].rpartition("*")
    actual = checksum(body)
    if claimed.upper() != actual:
        raise ChecksumMismatch(f"checksum {claimed!r} != computed {actual!r}")
    fields = body.split(",")
    if len(fields) != 7 or fields[0] != "AIVDM":
        raise ValueError(f"malformed AIVDM body: {body!r}")
    return NmeaSentence(
        fragment_count=int(fields[1]),
        fragment_index=int(fields[2]),
        sequential_id=fields[3],
        channel=fields[4],
        armored_payload=fields[5],
        fill_bits=int(fields[6]),
        checksum=claimed.upper(),
    )


@dataclass(frozen=True)
class AisMessage:
    """Decoded AIS payload; only fields meaningful for the message type are set."""

    msg_type: int
    mmsi: int
    # Types 1/2/3
    longitude: float | None = None  # degrees, +east
    latitude: float | None = None  # degrees, +north
    speed_over_ground: float | None = None  # knots
    course_over_ground: float | None = None  # degrees
    # Type 5
    ship_type: int | None = None
    dim_to_bow: int | None = None
    dim_to_stern: int | None = None
    dim_to_port: int | None = None
    dim_to_starboard: int | None = None
    name: str | None = None

    @property
    def reported_length(self) -> int | None:
        if self.dim_to_bow is None or self.dim_to_stern is None:
            return None
        return self.dim_to_bow + self.dim_to_stern

    @property
    def reported_width(self) -> int | None:
        if self.dim_to_port is None or self.dim_to_starboard is None:
            return None
        return self.dim_to_port + self.dim_to_starboard


# -- bitstream helpers ------------------------------------------------------


def _bits_from_payload(payload: str, fill_bits: int) -> str:
    bits = "".join(f"{decode_armoring(ch):06b}" for ch in payload)
    if fill_bits:
        bits = bits[:-fill_bits]
    return bits


def _payload_from_bits(bits: str) -> tuple[str, int]:
    fill = (6 - len(bits) % 6) % 6
    padded = bits + "0" * fill
    chars = "".join(
        encode_armoring(int(padded[i : i + 6], 2)) for i in range(0, len(padded), 6)
    )
    return chars, fill


def _unsigned(bits: str, start: int, width: int) -> int:
    return int(bits[start : start + width], 2)


def _signed(bits: str, start: int, width: int) -> int:
    raw = _unsigned(bits, start, width)
    if raw >= 1 << (width - 1):
        raw -= 1 << width
    return raw


def _sixbit_text(bits: str, start: int, width: int) -> str:
    chars = []
    for i in range(start, start + width, 6):
        chars.append(_SIXBIT_TEXT[_unsigned(bits, i, 6)])
    return "".join(chars).rstrip("@ ").rstrip()


def _field(value: int, width: int, name: str) -> str:
    if value < 0 or value >= 1 << width:
        raise FieldOverflow(f"{name} does not fit in {width} bits: {value}")
    return f"{value:0{width}b}"


def _signed_field(value: int, width: int, name: str) -> str:
    lo, hi = -(1 << (width - 1)), (1 << (width - 1)) - 1
    if not lo <= value <= hi:
        raise FieldOverflow(f"{name} does not fit in signed {width} bits: {value}")
    return f"{value & ((1 << width) - 1):0{width}b}"


def _sixbit_field(text: str, n_chars: int, name: str) -> str:
    text = text.upper()
    if len(text) > n_chars:
        raise FieldOverflow(f"{name} longer than {n_chars} characters: {text!r}")
    text = text.ljust(n_chars, "@")
    out = []
    for ch in text:
        idx = _SIXBIT_TEXT.find(ch)
        if idx < 0:
            raise FieldOverflow(f"{name} contains unencodable character {ch!r}")
        out.append(f"{idx:06b}")
    return "".join(out)


# -- decode -----------------------------------------------------------------


def parse_aivdm(sentences: Sequence[NmeaSentence]) -> AisMessage:
    """Reassemble one fragment group and extract the message fields.

    All sentences must belong to a single group: same fragment count, indices
    covering 1..count exactly once. Checksums are re-validated on the
    rendered bodies before any bit is trusted.
    """
    if not sentences:
        raise IncompleteFragmentGroup("no sentences supplied")
    count = sentences[0].fragment_count
    by_index: dict[int, NmeaSentence] = {}
    for s in sentences:
        if s.fragment_count != count:
            raise IncompleteFragmentGroup("mixed fragment groups")
        if s.checksum != checksum(s.body):
            raise ChecksumMismatch("sentence checksum invalid")
        if s.fragment_index in by_index:
            raise IncompleteFragmentGroup(f"duplicate fragment {s.fragment_index}")
        by_index[s.fragment_index] = s
    if sorted(by_index) != list(range(1, count + 1)):
        raise IncompleteFragmentGroup(
            f"fragments {sorted(by_index)} do not cover 1..{count}"
        )
    bits = "".join(
        _bits_from_payload(by_index[i].armored_payload, by_index[i].fill_bits)
        for i in range(1, count + 1)
    )
    if len(bits) < 38:
        raise IncompleteFragmentGroup("payload too short for a message header")
    msg_type = _unsigned(bits, 0, 6)
    mmsi = _unsigned(bits, 8, 30)
    if msg_type in (1, 2, 3):
        if len(bits) < 168:
            raise IncompleteFragmentGroup("position report shorter than 168 bits")
        sog_raw = _unsigned(bits, 50, 10)
        lon_raw = _signed(bits, 61, 28)
        lat_raw = _signed(bits, 89, 27)
        cog_raw = _unsigned(bits, 116, 12)
        return AisMessage(
            msg_type=msg_type,
            mmsi=mmsi,
            longitude=lon_raw / 600_000.0,
            latitude=lat_raw / 600_000.0,
            speed_over_ground=sog_raw / 10.0,
            course_over_ground=cog_raw / 10.0,
        )
    if msg_type == 5:
        if len(bits) < 424:
            raise IncompleteFragmentGroup("static report shorter than 424 bits")
        return AisMessage(
            msg_type=5,
            mmsi=mmsi,
            ship_type=_unsigned(bits, 232, 8),
            dim_to_bow=_unsigned(bits, 240, 9),
            dim_to_stern=_unsigned(bits, 249, 9),
            dim_to_port=_unsigned(bits, 258, 6),
            dim_to_starboard=_unsigned(bits, 264, 6),
            name=_sixbit_text(bits, 112, 120),
        )
    raise UnsupportedType(f"message type {msg_type} not supported")


# -- encode -----------------------------------------------------------------


def _position_report_bits(msg_type: int, mmsi: int, latitude: float, longitude: float,
                          speed_over_ground: float, course_over_ground: float) -> str:
    if not -90.0 <= latitude <= 90.0:
        raise FieldOverflow(f"latitude out of range: {latitude}")
    if not -180.0 <= longitude <= 180.0:
        raise FieldOverflow(f"longitude out of range: {longitude}")
    lon_raw = int(round(longitude * 600_000.0))
    lat_raw = int(round(latitude * 600_000.0))
    sog_raw = int(round(speed_over_ground * 10.0))
    cog_raw = int(round(course_over_ground * 10.0)) % 3600
    parts = [
        _field(msg_type, 6, "msg_type"),
        _field(0, 2, "repeat"),
        _field(mmsi, 30, "mmsi"),
        _field(0, 4, "nav_status"),
        _signed_field(-128, 8, "rate_of_turn"),  # not available
        _field(min(sog_raw, 1022), 10, "speed_over_ground"),
        _field(1, 1, "position_accuracy"),
        _signed_field(lon_raw, 28, "longitude"),
        _signed_field(lat_raw, 27, "latitude"),
        _field(cog_raw, 12, "course_over_ground"),
        _field(511, 9, "true_heading"),  # not available
        _field(0, 6, "timestamp"),
        _field(0, 2, "maneuver"),
        _field(0, 3, "spare"),
        _field(0, 1, "raim"),
        _field(0, 19, "radio_status"),
    ]
    bits = "".join(parts)
    assert len(bits) == 168
    return bits


def _static_report_bits(mmsi: int, ship_type: int, dim_to_bow: int, dim_to_stern: int,
                        dim_to_port: int, dim_to_starboard: int, name: str) -> str:
    parts = [
        _field(5, 6, "msg_type"),
        _field(0, 2, "repeat"),
        _field(mmsi, 30, "mmsi"),
        _field(0, 2, "ais_version"),
        _field(0, 30, "imo_number"),
        _sixbit_field("", 7, "callsign"),
        _sixbit_field(name, 20, "name"),
        _field(ship_type, 8, "ship_type"),
        _field(dim_to_bow, 9, "dim_to_bow"),
        _field(dim_to_stern, 9, "dim_to_stern"),
        _field(dim_to_port, 6, "dim_to_port"),
        _field(dim_to_starboard, 6, "dim_to_starboard"),
        _field(1, 4, "epfd"),
        _field(0, 4, "eta_month"),
        _field(0, 5, "eta_day"),
        _field(0, 5, "eta_hour"),
        _field(0, 6, "eta_minute"),
        _field(0, 8, "draught"),
        _sixbit_field("", 20, "destination"),
        _field(0, 1, "dte"),
        _field(0, 1, "spare"),
    ]
    bits = "".join(parts)
    assert len(bits) == 424
    return bits


def synthesize_spoof(
    msg_type: int,
    mmsi: int,
    latitude: float | None = None,
    longitude: float | None = None,
    speed_over_ground: float = 0.0,
    course_over_ground: float = 0.0,
    ship_type: int | None = None,
    dim_to_bow: int | None = None,
    dim_to_stern: int | None = None,
    dim_to_port: int | None = None,
    dim_to_starboard: int | None = None,
    name: str = "",
    channel: str = "A",
    sequential_id: str = "",
) -> list[NmeaSentence]:
    """Build a checksum-correct AIVDM sentence group for a fabricated message.

    parse_aivdm inverts the result exactly, up to the wire quantization
    (1/10000 arc-minute positions, 0.1-knot speeds, 0.1-degree courses).
    """
    if not 0 <= mmsi < 10**9:
        raise FieldOverflow(f"mmsi must be a 9-digit integer, got {mmsi}")
    if msg_type in (1, 2, 3):
        if latitude is None or longitude is None:
            raise ValueError("position reports need latitude and longitude")
        bits = _position_report_bits(
            msg_type, mmsi, latitude, longitude, speed_over_ground, course_over_ground
        )
    elif msg_type == 5:
        if None in (dim_to_bow, dim_to_stern, dim_to_port, dim_to_starboard):
            raise ValueError("static reports need all four dimension fields")
        bits = _static_report_bits(
            mmsi, ship_type or 0, dim_to_bow, dim_to_stern,
            dim_to_port, dim_to_starboard, name,
        )
    else:
        raise UnsupportedType(f"cannot synthesize message type {msg_type}")

    payload, fill = _payload_from_bits(bits)
    chunks = [
        payload[i : i + MAX_PAYLOAD_CHARS]
        for i in range(0, len(payload), MAX_PAYLOAD_CHARS)
    ]
    count = len(chunks)
    seq = sequential_id if count == 1 else (sequential_id or "0")
    return [
        NmeaSentence(
            fragment_count=count,
            fragment_index=i + 1,
            sequential_id=seq,
            channel=channel,
            armored_payload=chunk,
            fill_bits=fill if i == count - 1 else 0,
        )
        for i, chunk in enumerate(chunks)
    ]


def render_sentences(sentences: Sequence[NmeaSentence]) -> str:
    """Newline-delimited sentence file content for a spoof script."""
    return "".join(s.render() for s in sentences)


def parse_sentence_file(text: str) -> list[list[NmeaSentence]]:
    """Split a sentence file into complete fragment groups, in order."""
    groups: list[list[NmeaSentence]] = []
    pending: list[NmeaSentence] = []
    for line in text.splitlines():
        if not line.strip():
            continue
        s = parse_sentence(line)
        pending.append(s)
        if s.fragment_index == s.fragment_count:
            groups.append(pending)
            pending = []
    if pending:
        raise IncompleteFragmentGroup("trailing incomplete fragment group")
    return groups
