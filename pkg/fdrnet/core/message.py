from __future__ import annotations
import json
from typing import Final, Any, Optional

HEADER_BYTES: Final[int] = 8


class JsonRecord:
  """A JSON object that knows how to frame itself.

  Records are written either as JSON lines (`to_line`) or as length-prefixed
  frames (`serialize`). Keys are always sorted so both forms are byte-stable.
  """

  def __init__(self, record: Optional[dict] = None) -> None:
    self._record_d: Final[dict] = {} if record is None else record

  @staticmethod
  def deserialize(body: bytes) -> JsonRecord:
    body_str = body.decode("utf-8")
    body_json: dict = json.loads(body_str)
    return JsonRecord(record=body_json)

  @staticmethod
  def from_line(line: str) -> JsonRecord:
    return JsonRecord(record=json.loads(line))

  @property
  def body_bytes(self) -> bytes:
    return str(self).encode("utf-8")

  @property
  def body_len(self) -> int:
    return len(self.body_bytes)

  def serialize(self) -> bytes:
    """
    ---------------------------------------------------------
    | body-length (8-bytes) | body (body-length bytes)      |
    ---------------------------------------------------------
    length:- is an unsigned big-endian integer.
    body:- is utf-8 encoded JSON with sorted keys.
    """
    return self.body_len.to_bytes(HEADER_BYTES, "big") + self.body_bytes

  def to_line(self) -> str:
    return str(self) + "\n"

  def __str__(self) -> str:
    return json.dumps(self._record_d, sort_keys=True, separators=(",", ":"))

  def __getitem__(self, key: str) -> Any:
    return self._record_d[key]

  def __contains__(self, key: str) -> bool:
    return key in self._record_d

  def __eq__(self, other: object) -> bool:
    return isinstance(other, JsonRecord) and self._record_d == other._record_d

  def get(self, key: str, default: Any = None) -> Any:
    return self._record_d.get(key, default)
