"""Protocol v1 server: newline-delimited JSON over one TCP connection.

Handshake {"hello":1,"protocol":1} -> {"ready":true,"protocol":1}; each
request carries a batch of graphs and receives argmax schedules in order.
Malformed requests get an error response when an id is recoverable,
otherwise the connection closes.
"""

from __future__ import annotations

import json
import socket

from .model import FEATURE_DIM, GraphBatch, ShiftPredictor

PROTOCOL_VERSION = 1


def _respond(fh, obj: dict) -> None:
    fh.write(json.dumps(obj, separators=(",", ":")).encode() + b"\n")
    fh.flush()


def handle_request(model: ShiftPredictor, request: dict) -> dict:
    rid = request.get("id")
    if rid is None:
        return {"id": None, "error": "request carries no id"}
    meta = request.get("meta")
    graphs = request.get("graphs")
    if not isinstance(meta, dict) or not isinstance(graphs, list) or not graphs:
        return {"id": rid, "error": "request needs meta and a nonempty graphs list"}
    if meta.get("feature_dim") != FEATURE_DIM:
        return {
            "id": rid,
            "error": f"feature_dim {meta.get('feature_dim')} != expected {FEATURE_DIM}",
        }
    try:
        batch = GraphBatch(graphs, [meta] * len(graphs))
        schedules = model.predict_schedules(batch)
    except (ValueError, KeyError, TypeError) as exc:
        return {"id": rid, "error": f"bad graph payload: {exc}"}
    return {"id": rid, "schedules": schedules}


def serve_connection(model: ShiftPredictor, conn) -> None:
    with conn, conn.makefile("rwb") as fh:
        line = fh.readline()
        if not line:
            return
        try:
            hello = json.loads(line)
        except json.JSONDecodeError:
            return
        if hello.get("protocol") != PROTOCOL_VERSION:
            _respond(fh, {"ready": False, "error": "unsupported protocol"})
            return
        _respond(fh, {"ready": True, "protocol": PROTOCOL_VERSION})
        while True:
            line = fh.readline()
            if not line:
                return
            try:
                request = json.loads(line)
            except json.JSONDecodeError:
                return  # no id recoverable: close
            _respond(fh, handle_request(model, request))


def serve(model: ShiftPredictor, host: str, port: int, ready_callback=None):
    """Accept connections forever (one at a time, requests serialized)."""
    model.eval()
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as sock:
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        sock.bind((host, port))
        sock.listen(1)
        if ready_callback is not None:
            ready_callback(sock.getsockname()[1])
        while True:
            conn, _ = sock.accept()
            try:
                serve_connection(model, conn)
            except (OSError, BrokenPipeError):
                continue
