"""Helper functions for FV2ES."""

import json
import os

from src.errors import ReportError


def ensure_parent(path: str):
    """Create the directory that will hold path."""
    directory = os.path.dirname(path)
    if directory and not os.path.exists(directory):
        os.makedirs(directory)


def write_json(path: str, payload):
    ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def write_text(path: str, text: str):
    ensure_parent(path)
    with open(path, "w", encoding="utf-8") as f:
        f.write(text.rstrip("\n") + "\n")


def read_json(path: str):
    with open(path, encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as error:
            raise ReportError(f"{path} is not valid JSON: {error}") from error


def label_rows(payload, source: str) -> dict[int, list[int]]:
    """Map segment_index to its six labels; video-level rows are skipped.

    Accepts both the predictions file layout and the labels file layout.
    """
    if not isinstance(payload, list):
        raise ReportError(f"{source}: expected a JSON array")
    rows = {}
    for row in payload:
        if not isinstance(row, dict):
            raise ReportError(f"{source}: every entry must be an object")
        if row.get("scope") == "video":
            continue
        index, labels = row.get("segment_index"), row.get("labels")
        if not isinstance(index, int) or not isinstance(labels, list) \
                or any(value not in (0, 1) for value in labels):
            raise ReportError(f"{source}: entries need an integer segment_index and 0/1 labels")
        if index in rows:
            raise ReportError(f"{source}: segment {index} appears twice")
        rows[index] = [int(value) for value in labels]
    return rows
