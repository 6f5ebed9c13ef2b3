"""In-process message passing between simulated parties, with accounting.

Channels are FIFO queues keyed by (src, dst).  Every send is counted and
sized; every value that some party learns in the clear is appended to the
transcript with a kind so the privacy tests can audit it.
"""
from collections import defaultdict
from dataclasses import dataclass, field
import json
import queue

import numpy as np

from ..errors import TransportTimeout
from .counters import OpCounters

# transcript kinds
BEAVER = "beaver"          # masked Beaver openings (uniform in Z_q)
MASKED = "masked"          # statistically masked openings (truncation, bit conversion, resharing)
CONVERSION = "conversion"  # decryptions of r-masked ciphertexts inside enc_to_shares
REVEAL = "reveal"          # values the protocol intends to make public


def payload_bytes(obj):
    if obj is None:
        return 0
    if isinstance(obj, (bool, np.bool_)):
        return 1
    if isinstance(obj, int):
        return max(1, (obj.bit_length() + 7) // 8)
    if isinstance(obj, np.ndarray):
        if obj.dtype == object:
            return sum(payload_bytes(int(v)) for v in obj.ravel())
        return int(obj.nbytes)
    if hasattr(obj, "value") and hasattr(obj, "scale"):
        return payload_bytes(obj.value) + 1
    if hasattr(obj, "ciphertext") and hasattr(obj, "party"):
        return payload_bytes(obj.value)
    if isinstance(obj, (list, tuple)):
        return sum(payload_bytes(v) for v in obj)
    if isinstance(obj, dict):
        return sum(payload_bytes(v) for v in obj.values())
    return len(repr(obj))


@dataclass
class TranscriptEntry:
    seq: int
    kind: str
    tag: str
    count: int
    values: list = None


@dataclass
class Transcript:
    """Log of every opened plaintext.

    level="full" keeps every value; level="reveals" keeps values only for
    REVEAL entries and records counts for the rest (large statistical runs).
    """
    level: str = "full"
    entries: list = field(default_factory=list)

    def record(self, kind, tag, values):
        arr = np.asarray(values, dtype=object).ravel() if values is not None else np.empty(0, dtype=object)
        keep = self.level == "full" or kind == REVEAL
        vals = [int(v) for v in arr] if keep else None
        self.entries.append(TranscriptEntry(len(self.entries), kind, tag, int(arr.size), vals))

    def of_kind(self, kind):
        return [e for e in self.entries if e.kind == kind]

    def reveals(self):
        return self.of_kind(REVEAL)

    def dump(self, path):
        with open(path, "w") as fh:
            for e in self.entries:
                fh.write(json.dumps({"seq": e.seq, "kind": e.kind, "tag": e.tag, "count": e.count,
                                     "values": None if e.values is None else [str(v) for v in e.values]}) + "\n")


class Transport:
    def __init__(self, parties, counters=None, timeout=5.0):
        self.parties = parties
        self.counters = counters if counters is not None else OpCounters()
        self.timeout = timeout
        self._queues = defaultdict(queue.Queue)
        self.traffic = defaultdict(int)

    def send(self, src, dst, payload, tag=""):
        if src == dst:
            return
        size = payload_bytes(payload)
        self.counters.messages += 1
        self.counters.bytes_sent += size
        self.traffic[(src, dst)] += size
        self._queues[(src, dst)].put((tag, payload))

    def recv(self, src, dst, tag=None):
        try:
            got_tag, payload = self._queues[(src, dst)].get(timeout=self.timeout)
        except queue.Empty:
            raise TransportTimeout(f"party {dst} timed out waiting for party {src}") from None
        if tag is not None and got_tag != tag:
            raise TransportTimeout(f"party {dst} expected {tag!r} from {src}, got {got_tag!r}")
        return payload

    def account(self, src, dst, nbytes):
        """Count a message whose payload is exchanged out of band (MPC openings)."""
        if src == dst:
            return
        self.counters.messages += 1
        self.counters.bytes_sent += nbytes
        self.traffic[(src, dst)] += nbytes

    def broadcast(self, src, payload, tag=""):
        """Lock-step broadcast: every receiver reads the same object, only accounting happens."""
        size = payload_bytes(payload)
        for dst in range(self.parties):
            self.account(src, dst, size)
        return payload

    def exchange(self, src, dst, payload, tag=""):
        """Send and immediately deliver (lock-step simulation)."""
        if src == dst:
            return payload
        self.send(src, dst, payload, tag)
        return self.recv(src, dst, tag)

    def pending(self):
        return sum(q.qsize() for q in self._queues.values())
