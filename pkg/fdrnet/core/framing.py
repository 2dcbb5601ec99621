import json
import struct
from typing import BinaryIO, Optional

from fdrnet.core.message import HEADER_BYTES, JsonRecord
from fdrnet.core.logger import data_logger

RECORD_VALID = 0
RECORD_HEADER_INVALID = 1
RECORD_BODY_INVALID = 2
RECORD_BODY_NOT_JSON = 3

STATUS_CODE = {
  RECORD_VALID: "Record valid",
  RECORD_HEADER_INVALID: f"Invalid record: first {HEADER_BYTES} bytes should be the body length",
  RECORD_BODY_INVALID: "Invalid record: stream ended before the announced body length",
  RECORD_BODY_NOT_JSON: "Invalid record: body is not utf-8 JSON",
}


def read_exact(stream: BinaryIO, n: int) -> Optional[bytes]:
  """
  Helper function to read n bytes or return None if EOF is hit.
  """
  data = b""

  while len(data) < n:
    chunk = stream.read(n - len(data))
    if not chunk:
      return None
    data += chunk

  return data


def read_record(stream: BinaryIO) -> tuple[int, Optional[JsonRecord]]:
  raw_len = read_exact(stream, HEADER_BYTES)
  if not raw_len:
    return RECORD_HEADER_INVALID, None

  body_len = struct.unpack(">Q", raw_len)[0]
  data = read_exact(stream, body_len) if body_len > 0 else b""

  if data is None:
    data_logger.critical(f"{STATUS_CODE[RECORD_BODY_INVALID]} (wanted {body_len} bytes)")
    return RECORD_BODY_INVALID, None

  try:
    return RECORD_VALID, JsonRecord.deserialize(data)
  except (UnicodeDecodeError, json.JSONDecodeError):
    return RECORD_BODY_NOT_JSON, None


def write_record(stream: BinaryIO, record: JsonRecord) -> int:
  frame = record.serialize()
  stream.write(frame)
  return len(frame)
