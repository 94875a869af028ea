"""Book body segmentation into overlapping chunks."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import EmptyInput


@dataclass(frozen=True)
class ChunkingConfig:
    max_chunk_chars: int = 512
    overlap: int = 64
    snap_to_paragraph: bool = True

    def __post_init__(self):
        if self.max_chunk_chars < 2:
            raise ValueError("max_chunk_chars must be >= 2")
        if not 0 <= self.overlap <= self.max_chunk_chars // 2:
            raise ValueError("overlap must be within [0, max_chunk_chars/2]")


def _snap_end(body: str, start: int, target: int, max_chars: int) -> int:
    """Pull the chunk end back to the paragraph boundary nearest the target.

    A boundary is the position just after a newline. Only positions within 10%
    of max_chunk_chars below the target are considered, so the chunk-size cap
    still holds.
    """
    window = max_chars // 10
    lo = max(start + 1, target - window)
    best = None
    for pos in range(target, lo - 1, -1):
        if body[pos - 1] == "\n":
            best = pos
            break  # scanning downward from target: first hit is the nearest
    return best if best is not None else target


def split_chunks(body: str, cfg: ChunkingConfig | None = None) -> list[str]:
    """Cut body into chunks of at most max_chunk_chars, each starting `overlap`
    characters before the previous chunk's end. Stitching the pieces back with
    stitch_chunks reproduces the body exactly."""
    if not body:
        raise EmptyInput("book body is empty")
    cfg = cfg or ChunkingConfig()
    n = len(body)
    chunks: list[str] = []
    start = 0
    while True:
        end = min(start + cfg.max_chunk_chars, n)
        if cfg.snap_to_paragraph and end < n:
            end = _snap_end(body, start, end, cfg.max_chunk_chars)
        chunks.append(body[start:end])
        if end >= n:
            break
        start = end - cfg.overlap
    return chunks


def stitch_chunks(chunks: list[str], overlap: int) -> str:
    """Inverse of split_chunks for a known overlap."""
    if not chunks:
        return ""
    parts = [chunks[0]]
    parts.extend(chunk[overlap:] for chunk in chunks[1:])
    return "".join(parts)
