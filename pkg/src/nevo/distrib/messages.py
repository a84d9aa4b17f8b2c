"""Wire messages and their binary frames.

A frame is ``u32 big-endian length | u8 tag | payload`` where the length
counts the tag and payload.  The payload is the message's fields in declared
order, each written as a tagged value (see :func:`pack_value`).  Every message
carries the generation it belongs to.
"""

from __future__ import annotations

import io
import struct
from dataclasses import astuple, dataclass, fields

import numpy as np

from ..errors import ProtocolError

# ----------------------------------------------------------------------
# tagged values

_NONE, _FALSE, _TRUE, _INT, _UINT, _FLOAT, _STR, _BYTES, _LIST = range(9)


def pack_value(v, out: list):
    if v is None:
        out.append(bytes([_NONE]))
    elif v is True or v is False:
        out.append(bytes([_TRUE if v else _FALSE]))
    elif isinstance(v, (int, np.integer)):
        v = int(v)
        if -(1 << 63) <= v < (1 << 63):
            out.append(struct.pack(">Bq", _INT, v))
        elif 0 <= v < (1 << 64):
            out.append(struct.pack(">BQ", _UINT, v))
        else:
            raise ProtocolError(f"integer out of wire range: {v}")
    elif isinstance(v, (float, np.floating)):
        out.append(struct.pack(">Bd", _FLOAT, float(v)))
    elif isinstance(v, str):
        b = v.encode()
        out.append(struct.pack(">BI", _STR, len(b)) + b)
    elif isinstance(v, (bytes, bytearray)):
        out.append(struct.pack(">BI", _BYTES, len(v)) + bytes(v))
    elif isinstance(v, (list, tuple)):
        out.append(struct.pack(">BI", _LIST, len(v)))
        for x in v:
            pack_value(x, out)
    else:
        raise ProtocolError(f"cannot put {type(v).__name__} on the wire")


def unpack_value(buf: memoryview, pos: int):
    try:
        tag = buf[pos]
        pos += 1
        if tag == _NONE:
            return None, pos
        if tag in (_FALSE, _TRUE):
            return tag == _TRUE, pos
        if tag == _INT:
            return struct.unpack_from(">q", buf, pos)[0], pos + 8
        if tag == _UINT:
            return struct.unpack_from(">Q", buf, pos)[0], pos + 8
        if tag == _FLOAT:
            return struct.unpack_from(">d", buf, pos)[0], pos + 8
        if tag in (_STR, _BYTES, _LIST):
            (n,) = struct.unpack_from(">I", buf, pos)
            pos += 4
            if tag == _LIST:
                items = []
                for _ in range(n):
                    x, pos = unpack_value(buf, pos)
                    items.append(x)
                return items, pos
            if pos + n > len(buf):
                raise ProtocolError("truncated value")
            raw = bytes(buf[pos:pos + n])
            return (raw.decode() if tag == _STR else raw), pos + n
    except (IndexError, struct.error) as e:
        raise ProtocolError(f"truncated value: {e}") from e
    raise ProtocolError(f"unknown value tag {tag}")


# ----------------------------------------------------------------------
# messages


@dataclass
class Hello:
    generation: int
    worker: int
    host: str = ""
    port: int = 0


@dataclass
class PeerTable:
    generation: int
    addresses: list  # [(host, port)] indexed by worker id


@dataclass
class Setup:
    """Everything a worker needs before generation 0."""

    generation: int
    worker: int
    role: str  # actor | gen | disc
    mode: str  # rebuild | p2p
    task: str  # a task id, or "null" for fixed fitness
    T: int
    genome: str
    data: bytes = b""  # real trajectories (discriminators) or probe set (generators)


@dataclass
class SeedScatter:
    generation: int
    worker: int
    seed: int | None  # None at generation 0: evaluate only
    episode_seed: int


@dataclass
class MatchOrder:
    generation: int
    worker: int
    role: str  # gen | disc
    partner: int
    real_index: int


@dataclass
class TrajectoryTransfer:
    generation: int
    sender: int
    obs: bytes
    shape: list
    actions: list


@dataclass
class FitnessReport:
    generation: int
    worker: int
    fitness: float | None
    variation_ops: int
    variation_ms: float
    nodes: int
    connections: int
    partner: int = -1
    partner_fitness: float | None = None


@dataclass
class SelectionVerdict:
    generation: int
    worker: int
    selected: bool
    partner: int  # -1: keep the current agent, no transfer
    probe: bool = False


@dataclass
class GenomeAssign:
    generation: int
    worker: int
    genome: str


@dataclass
class AgentTransfer:
    generation: int
    sender: int
    frame: bytes  # codec frame, genome included


@dataclass
class GenerationDone:
    generation: int
    worker: int
    comm_ms: float
    probe: float | None = None


@dataclass
class Shutdown:
    generation: int


MESSAGES = [Hello, PeerTable, Setup, SeedScatter, MatchOrder, TrajectoryTransfer, FitnessReport,
            SelectionVerdict, GenomeAssign, AgentTransfer, GenerationDone, Shutdown]
TAG = {cls: i + 1 for i, cls in enumerate(MESSAGES)}
BY_TAG = {i: cls for cls, i in TAG.items()}

MAX_FRAME = 1 << 30


def encode(msg) -> bytes:
    out: list[bytes] = []
    pack_value(list(astuple(msg)), out)
    body = bytes([TAG[type(msg)]]) + b"".join(out)
    return struct.pack(">I", len(body)) + body


def decode_body(body: bytes):
    if not body:
        raise ProtocolError("empty frame")
    cls = BY_TAG.get(body[0])
    if cls is None:
        raise ProtocolError(f"unknown message tag {body[0]}")
    values, pos = unpack_value(memoryview(body), 1)
    if pos != len(body):
        raise ProtocolError("trailing bytes in frame")
    if not isinstance(values, list) or len(values) != len(fields(cls)):
        raise ProtocolError(f"bad field count for {cls.__name__}")
    return cls(*values)


def decode(frame: bytes):
    if len(frame) < 5:
        raise ProtocolError("short frame")
    (n,) = struct.unpack(">I", frame[:4])
    if n != len(frame) - 4:
        raise ProtocolError("frame length mismatch")
    return decode_body(frame[4:])


def check_generation(msg, current: int):
    """Reject messages from generations that have already finished."""
    if msg.generation < current:
        raise ProtocolError(f"stale {type(msg).__name__} for generation {msg.generation} "
                            f"(now at {current})")


# ----------------------------------------------------------------------
# payload helpers


def pack_trajectory(generation: int, sender: int, traj) -> TrajectoryTransfer:
    obs = np.ascontiguousarray(traj.obs, dtype=">f8")
    return TrajectoryTransfer(generation, sender, obs.tobytes(), list(obs.shape),
                              [int(a) for a in traj.actions])


def unpack_trajectory(msg: TrajectoryTransfer):
    from ..envs import Trajectory
    obs = np.frombuffer(msg.obs, dtype=">f8").astype(float).reshape(msg.shape)
    return Trajectory(obs, np.asarray(msg.actions, dtype=int))


def pack_dataset(ds) -> bytes:
    buf = io.BytesIO()
    obs = np.stack([t.obs for t in ds.trajectories])
    acts = np.stack([t.actions for t in ds.trajectories])
    np.savez(buf, obs=obs, actions=acts, shape=np.asarray(ds.obs_shape), meta=np.asarray([ds.n_actions, ds.T]))
    return buf.getvalue()


def unpack_dataset(blob: bytes):
    from ..envs import Dataset, Trajectory
    with np.load(io.BytesIO(blob)) as z:
        obs, acts = z["obs"], z["actions"]
        shape = tuple(int(s) for s in z["shape"])
        n_actions, T = (int(v) for v in z["meta"])
    return Dataset(shape, n_actions, T, [Trajectory(o, a) for o, a in zip(obs, acts)])
