"""Token geometry of the concatenated ``[text | motion | video]`` sequence.

Video tokens are ordered frame-major, then row-major within a frame, so each
frame's tokens form one contiguous slice. Motion tokens of all objects are
contiguous and ordered by object index.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

Span = tuple[int, int]


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class TokenLayout:
    n_text: int
    n_motion_per_object: int
    n_objects: int
    frames: int
    grid_h: int
    grid_w: int
    text_motion_spans: tuple[Span, ...]

    @property
    def d_m(self) -> int:
        return self.n_motion_per_object

    @property
    def n_motion(self) -> int:
        return self.n_objects * self.n_motion_per_object

    @property
    def cells(self) -> int:
        return self.grid_h * self.grid_w

    @property
    def n_video(self) -> int:
        return self.frames * self.cells

    @property
    def total(self) -> int:
        return self.n_text + self.n_motion + self.n_video

    @property
    def motion_offset(self) -> int:
        return self.n_text

    @property
    def video_offset(self) -> int:
        return self.n_text + self.n_motion

    @property
    def motion_spans(self) -> tuple[Span, ...]:
        d = self.n_motion_per_object
        return tuple((k * d, (k + 1) * d) for k in range(self.n_objects))

    def segment(self, index: int) -> str:
        if not 0 <= index < self.total:
            raise IndexError(f"token index {index} outside [0, {self.total})")
        if index < self.n_text:
            return "text"
        if index < self.video_offset:
            return "motion"
        return "video"

    def is_text(self, index: int) -> bool:
        return self.segment(index) == "text"

    def is_motion(self, index: int) -> bool:
        return self.segment(index) == "motion"

    def is_video(self, index: int) -> bool:
        return self.segment(index) == "video"

    def motion_text_indices(self, k: int) -> np.ndarray:
        start, stop = self.text_motion_spans[k]
        return np.arange(start, stop)

    def motion_indices(self, k: int, global_index: bool = True) -> np.ndarray:
        start, stop = self.motion_spans[k]
        offset = self.motion_offset if global_index else 0
        return np.arange(start + offset, stop + offset)

    def to_dict(self) -> dict:
        return {
            "n_text": self.n_text,
            "n_motion_per_object": self.n_motion_per_object,
            "n_objects": self.n_objects,
            "frames": self.frames,
            "grid_h": self.grid_h,
            "grid_w": self.grid_w,
            "text_motion_spans": [list(s) for s in self.text_motion_spans],
            "motion_spans": [list(s) for s in self.motion_spans],
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TokenLayout":
        layout = build_layout(
            doc["n_text"],
            doc["n_motion_per_object"],
            doc["n_objects"],
            doc["frames"],
            doc["grid_h"],
            doc["grid_w"],
            doc["text_motion_spans"],
        )
        if "motion_spans" in doc and [list(s) for s in layout.motion_spans] != [
            list(s) for s in doc["motion_spans"]
        ]:
            raise LayoutError("motion_spans in document disagree with derived spans")
        if "total" in doc and doc["total"] != layout.total:
            raise LayoutError("total in document disagrees with derived length")
        return layout


@dataclass(frozen=True)
class SpatialMask:
    """Binary mask over the latent grid of one frame."""

    frame: int
    grid: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid)
        if grid.ndim != 2:
            raise LayoutError(f"spatial mask must be 2-d, got shape {grid.shape}")
        if grid.dtype != bool:
            if not np.all((grid == 0) | (grid == 1)):
                raise LayoutError("spatial mask entries must be 0 or 1")
            grid = grid.astype(bool)
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)


def build_layout(n_text, d_m, K, L, grid_h, grid_w, text_motion_spans) -> TokenLayout:
    for name, value in [("n_text", n_text), ("d_m", d_m), ("K", K), ("L", L),
                        ("grid_h", grid_h), ("grid_w", grid_w)]:
        if int(value) != value or value < 1:
            raise LayoutError(f"{name} must be a positive integer, got {value!r}")
    spans = tuple((int(a), int(b)) for a, b in text_motion_spans)
    if len(spans) != K:
        raise LayoutError(f"expected {K} motion-text spans, got {len(spans)}")
    for a, b in spans:
        if not 0 <= a < b <= n_text:
            raise LayoutError(f"span [{a}, {b}) out of range for n_text={n_text}")
    ordered = sorted(spans)
    for (a0, b0), (a1, b1) in zip(ordered, ordered[1:]):
        if a1 < b0:
            raise LayoutError(f"spans [{a0}, {b0}) and [{a1}, {b1}) overlap")
    return TokenLayout(int(n_text), int(d_m), int(K), int(L), int(grid_h), int(grid_w), spans)


def video_token_index(layout: TokenLayout, frame: int, row: int, col: int) -> int:
    if not (0 <= frame < layout.frames and 0 <= row < layout.grid_h and 0 <= col < layout.grid_w):
        raise IndexError(f"video coordinate ({frame}, {row}, {col}) out of range")
    return layout.video_offset + frame * layout.cells + row * layout.grid_w + col


def video_coordinate(layout: TokenLayout, index: int) -> tuple[int, int, int]:
    """Inverse of :func:`video_token_index`."""
    if layout.segment(index) != "video":
        raise IndexError(f"token {index} is not a video token")
    rel = index - layout.video_offset
    frame, cell = divmod(rel, layout.cells)
    row, col = divmod(cell, layout.grid_w)
    return frame, row, col


def stack_masks(layout: TokenLayout, spatial_masks) -> np.ndarray:
    """Per-frame masks of one object as a bool array of shape (L, H, W)."""
    grids = [m.grid if isinstance(m, SpatialMask) else np.asarray(m, dtype=bool)
             for m in spatial_masks]
    if len(grids) != layout.frames:
        raise LayoutError(f"expected {layout.frames} frame masks, got {len(grids)}")
    for g in grids:
        if g.shape != (layout.grid_h, layout.grid_w):
            raise LayoutError(
                f"mask shape {g.shape} does not match grid {(layout.grid_h, layout.grid_w)}"
            )
    return np.stack(grids).astype(bool)


def object_video_tokens(layout: TokenLayout, spatial_masks) -> set[int]:
    """Global indices of the video tokens covered by one object's masks."""
    flat = stack_masks(layout, spatial_masks).reshape(-1)
    return {layout.video_offset + int(i) for i in np.flatnonzero(flat)}


def save_layout(path, layout: TokenLayout) -> None:
    Path(path).write_text(json.dumps(layout.to_dict(), indent=2) + "\n")


def load_layout(path) -> TokenLayout:
    return TokenLayout.from_dict(json.loads(Path(path).read_text()))
