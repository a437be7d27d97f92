"""Synthetic multi-object scenes with analytic masks and flows.

Positions and velocities are ``(x, y)`` = ``(column, row)`` on the latent
grid, matching the ``(dx, dy)`` order of flow vectors.

Cell features are ``embedding[owner] + texture``. Owners are the background
(id 0) or object k (id k + 1); embeddings are orthonormal basis vectors in
the first K + 1 channels and texture lives in the remaining channels. Object
texture is drawn once per blob-local cell and
travels with the object, background texture is fixed per grid cell, so every
cell signature is distinct. Each denoising step adds Gaussian noise whose
amplitude falls linearly from ``noise`` at step 1 to zero at
``converge_step`` and stays zero after it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..layout import TokenLayout, build_layout
from ..tensor_io import seeded_rng

MOTION_KINDS = ("translate", "rotate", "static")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class MotionSpec:
    kind: str
    x: int
    y: int
    width: int
    height: int
    velocity: tuple[int, int] = (0, 0)
    omega: float = 0.0  # radians per frame, rotate only

    def __post_init__(self):
        if self.kind not in MOTION_KINDS:
            raise ScenarioError(f"unknown motion kind {self.kind!r}")
        if self.width < 1 or self.height < 1:
            raise ScenarioError("blob size must be positive")

    @property
    def label(self) -> str:
        if self.kind == "translate":
            return f"translate({self.velocity[0]:+d},{self.velocity[1]:+d})"
        if self.kind == "rotate":
            return f"rotate({self.omega:.4f}rad/frame)"
        return "static"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "x": self.x, "y": self.y, "width": self.width,
                "height": self.height, "velocity": list(self.velocity), "omega": self.omega}

    @classmethod
    def from_dict(cls, doc: dict) -> "MotionSpec":
        return cls(doc["kind"], int(doc["x"]), int(doc["y"]), int(doc["width"]),
                   int(doc["height"]), tuple(int(v) for v in doc.get("velocity", (0, 0))),
                   float(doc.get("omega", 0.0)))


@dataclass
class Scenario:
    seed: int
    layout: TokenLayout
    specs: list[MotionSpec]
    clean_features: np.ndarray  # (L, cells, C)
    features_per_step: list[np.ndarray] = field(repr=False)
    gt_masks: np.ndarray = field(repr=False)  # (K, L, H, W) bool
    flows: np.ndarray = field(repr=False)  # (L - 1, H, W, 2)
    motion_labels: list[str] = field(default_factory=list)
    noise_schedule: list[float] = field(default_factory=list)

    @property
    def first_masks(self) -> np.ndarray:
        return self.gt_masks[:, 0]


def _blob_positions(spec: MotionSpec, frame: int) -> list[tuple[tuple[int, int], tuple[float, float]]]:
    """Map each blob-local cell (i, j) to its continuous (x, y) centre at ``frame``."""
    out = []
    cx = spec.x + (spec.width - 1) / 2
    cy = spec.y + (spec.height - 1) / 2
    for j in range(spec.height):
        for i in range(spec.width):
            if spec.kind == "translate":
                px = spec.x + i + spec.velocity[0] * frame
                py = spec.y + j + spec.velocity[1] * frame
            elif spec.kind == "rotate":
                ox, oy = spec.x + i - cx, spec.y + j - cy
                a = spec.omega * frame
                px = cx + math.cos(a) * ox - math.sin(a) * oy
                py = cy + math.sin(a) * ox + math.cos(a) * oy
            else:
                px, py = spec.x + i, spec.y + j
            out.append(((i, j), (float(px), float(py))))
    return out


def _cell(p: tuple[float, float]) -> tuple[int, int]:
    # half-up rounding, not round()'s half-to-even
    return int(math.floor(p[0] + 0.5)), int(math.floor(p[1] + 0.5))


def default_specs(K: int, L: int, grid: tuple[int, int], rng: np.random.Generator) -> list[MotionSpec]:
    """Horizontally translating square blobs, one per horizontal band."""
    H, W = grid
    band = H // K
    if band < 2:
        raise ScenarioError(f"grid height {H} too small for {K} objects")
    size = max(1, min(band - 1, W // 4, 4))
    specs = []
    for k in range(K):
        y = k * band + (band - size) // 2
        travel = L - 1
        if travel + size <= W:
            direction = int(rng.choice([-1, 1]))
            slack = W - size - travel
            offset = int(rng.integers(0, slack + 1))
            x = offset if direction > 0 else W - size - offset
            specs.append(MotionSpec("translate", x, y, size, size, (direction, 0)))
        else:
            x = int(rng.integers(0, W - size + 1))
            specs.append(MotionSpec("static", x, y, size, size))
    return specs


def noise_amplitude(step: int, noise: float, converge_step: int) -> float:
    """Noise scale at 1-based denoising ``step``; zero from ``converge_step`` on."""
    if converge_step <= 1 or step >= converge_step:
        return 0.0
    return noise * (converge_step - step) / (converge_step - 1)


def generate_scenario(
    seed: int,
    K: int = 2,
    L: int = 8,
    grid: tuple[int, int] = (16, 16),
    steps: int = 10,
    specs: list[MotionSpec] | None = None,
    *,
    channels: int = 8,
    texture: float = 0.15,
    noise: float = 1.0,
    converge_step: int = 3,
    disjoint: bool = True,
    n_motion_per_object: int = 2,
) -> Scenario:
    H, W = grid
    if K < 1 or L < 1 or steps < 1:
        raise ScenarioError("K, L and steps must be >= 1")
    if channels < K + 1:
        raise ScenarioError(f"need at least K + 1 = {K + 1} feature channels")
    rng = seeded_rng(seed)
    if specs is None:
        specs = default_specs(K, L, grid, rng)
    if len(specs) != K:
        raise ScenarioError(f"expected {K} motion specs, got {len(specs)}")

    gt = np.zeros((K, L, H, W), dtype=bool)
    flows = np.zeros((max(L - 1, 0), H, W, 2), dtype=np.float64)
    owner = np.zeros((L, H, W), dtype=np.int64)
    local = np.full((L, H, W, 2), -1, dtype=np.int64)
    for k, spec in enumerate(specs):
        for l in range(L):
            for (i, j), p in _blob_positions(spec, l):
                cx, cy = _cell(p)
                if not (0 <= cx < W and 0 <= cy < H):
                    raise ScenarioError(f"object {k} leaves the grid at frame {l}")
                gt[k, l, cy, cx] = True
                owner[l, cy, cx] = k + 1
                local[l, cy, cx] = (i, j)
            if l + 1 < L:
                nxt = dict(_blob_positions(spec, l + 1))
                for (i, j), p in _blob_positions(spec, l):
                    cx, cy = _cell(p)
                    q = nxt[(i, j)]
                    flows[l, cy, cx] = (q[0] - p[0], q[1] - p[1])
    if disjoint and K > 1:
        initial = gt[:, 0].sum(axis=0)
        if (initial > 1).any():
            raise ScenarioError("initial object blobs overlap")

    basis = np.eye(channels)
    bg_texture = texture * rng.standard_normal((H, W, channels))
    obj_texture = [texture * rng.standard_normal((s.height, s.width, channels)) for s in specs]
    bg_texture[..., :K + 1] = 0.0
    for tex in obj_texture:
        tex[..., :K + 1] = 0.0
    clean = np.empty((L, H, W, channels))
    for l in range(L):
        for r in range(H):
            for c in range(W):
                o = owner[l, r, c]
                if o == 0:
                    clean[l, r, c] = basis[0] + bg_texture[r, c]
                else:
                    i, j = local[l, r, c]
                    clean[l, r, c] = basis[o] + obj_texture[o - 1][j, i]
    clean = clean.reshape(L, H * W, channels)

    schedule = [noise_amplitude(s, noise, converge_step) for s in range(1, steps + 1)]
    per_step = []
    for amp in schedule:
        eps = rng.standard_normal(clean.shape)
        per_step.append(clean + amp * eps if amp > 0 else clean.copy())

    spans = [(2 * k + 1, 2 * k + 2) for k in range(K)]
    layout = build_layout(2 * K + 2, n_motion_per_object, K, L, H, W, spans)
    gt.setflags(write=False)
    return Scenario(seed, layout, list(specs), clean, per_step, gt, flows,
                    [s.label for s in specs], schedule)
