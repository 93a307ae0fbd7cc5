""" The **federation.checkpoint** module writes and reads snapshots of a ParamVector.

File layout::

    b"FLSN1"                      magic string and format version
    uint32 (little endian)        length H of the header
    H bytes                       UTF-8 JSON header: {"layout": [[layer_id, name, shape], ...], "round": r}
    8·n bytes                     parameter data, little-endian float64
"""

# Import python libraries
import json
import struct

# Import third-party libraries
import numpy as np

# Import internal libraries
from fedlec_simulator.federation import exceptions as custom_exception
from fedlec_simulator.nn import exceptions as nn_exception
from fedlec_simulator.nn.layers import ParamVector

CHECKPOINT_MAGIC = b"FLSN1"


def save_checkpoint(path, params, round_index=None):
    """
    Writes ``params`` to ``path``. Identical parameters always produce identical bytes.

    Parameters:
        path (str): destination file.
        params (ParamVector): the snapshot to write.
        round_index (int): optional round number stored in the header.
    """
    header = {
        "layout": [[layer_id, name, list(shape)] for layer_id, name, shape in params.layout],
        "round": round_index,
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as checkpoint_file:
        checkpoint_file.write(CHECKPOINT_MAGIC)
        checkpoint_file.write(struct.pack("<I", len(header_bytes)))
        checkpoint_file.write(header_bytes)
        checkpoint_file.write(np.ascontiguousarray(params.data, dtype="<f8").tobytes())


def load_checkpoint(path):
    """
    Reads a snapshot written by ``save_checkpoint()``.

    Returns:
        (tuple): ``(params, round_index)``.

    Raises:
        CheckpointFormatError: on a wrong magic string, a damaged header or a data size that does not match the
            layout.
    """
    with open(path, "rb") as checkpoint_file:
        raw = checkpoint_file.read()

    prefix_size = len(CHECKPOINT_MAGIC) + 4
    if len(raw) < prefix_size or raw[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise custom_exception.CheckpointFormatError(path, "missing FLSN1 magic string")
    header_size = struct.unpack("<I", raw[len(CHECKPOINT_MAGIC):prefix_size])[0]
    if len(raw) < prefix_size + header_size:
        raise custom_exception.CheckpointFormatError(path, "truncated header")
    try:
        header = json.loads(raw[prefix_size:prefix_size + header_size].decode("utf-8"))
        layout = [(layer_id, name, tuple(shape)) for layer_id, name, shape in header["layout"]]
    except (ValueError, KeyError, TypeError) as error:
        raise custom_exception.CheckpointFormatError(path, "damaged header ({0})".format(error))

    payload = raw[prefix_size + header_size:]
    if len(payload) % 8:
        raise custom_exception.CheckpointFormatError(path, "data is not a whole number of float64 values")
    data = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    try:
        params = ParamVector(data, layout)
    except nn_exception.ShapeMismatch:
        raise custom_exception.CheckpointFormatError(path, "data size does not match the layout")
    return params, header.get("round")
