"""Rigid Procrustes alignment of a fresh layout to the previous frame.

Rotation plus optional reflection plus translation, never scaling:
scaling would distort the distances the layout just optimized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from streammap.layout import ComponentLayout


@dataclass(frozen=True)
class RigidTransform:
    """Orthogonal 2x2 matrix (det +/-1) plus translation."""

    rotation: tuple[tuple[float, float], tuple[float, float]]
    translation: tuple[float, float]

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(((1.0, 0.0), (0.0, 1.0)), (0.0, 0.0))

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.rotation, dtype=np.float64)

    @property
    def offset(self) -> np.ndarray:
        return np.array(self.translation, dtype=np.float64)

    def apply(self, points: np.ndarray) -> np.ndarray:
        return points @ self.matrix.T + self.offset


def procrustes_align(
    new_pos: Mapping[str, tuple[float, float]],
    old_pos: Mapping[str, tuple[float, float]],
) -> tuple[RigidTransform, float]:
    """Least-squares rigid fit of new onto old over the shared node ids.

    Returns the transform minimizing sum ||T(new_i) - old_i||^2 and the
    minimized RMS error. Solved by SVD of the centered cross-covariance;
    reflections are permitted. Requires at least 2 shared nodes (callers
    with fewer must skip alignment); if all shared nodes coincide the
    rotation degenerates to identity and only the centroids are matched.
    Identical inputs short-circuit to the exact identity transform.
    """
    shared = sorted(set(new_pos) & set(old_pos))
    if len(shared) < 2:
        raise ValueError("procrustes alignment needs at least 2 shared nodes")
    a = np.array([new_pos[n] for n in shared], dtype=np.float64)
    b = np.array([old_pos[n] for n in shared], dtype=np.float64)
    if np.array_equal(a, b):
        return RigidTransform.identity(), 0.0
    ca = a.mean(axis=0)
    cb = b.mean(axis=0)
    a0 = a - ca
    b0 = b - cb
    h = a0.T @ b0
    if not h.any():
        # all shared nodes coincident (or fully degenerate cross-covariance)
        t = cb - ca
        tf = RigidTransform(((1.0, 0.0), (0.0, 1.0)), (float(t[0]), float(t[1])))
    else:
        u, _, vt = np.linalg.svd(h)
        r = vt.T @ u.T
        t = cb - r @ ca
        tf = RigidTransform(
            ((float(r[0, 0]), float(r[0, 1])), (float(r[1, 0]), float(r[1, 1]))),
            (float(t[0]), float(t[1])),
        )
    resid = tf.apply(a) - b
    rmse = float(np.sqrt((resid * resid).sum(axis=1).mean()))
    return tf, rmse


def apply_transform(layout: ComponentLayout, tf: RigidTransform) -> ComponentLayout:
    """Map every position through tf; pairwise distances are preserved."""
    if not layout.positions:
        return layout
    ids = sorted(layout.positions)
    pts = np.array([layout.positions[n] for n in ids], dtype=np.float64)
    moved = tf.apply(pts)
    positions = {n: (float(moved[i, 0]), float(moved[i, 1])) for i, n in enumerate(ids)}
    return ComponentLayout(layout.component_id, positions, layout.stress, layout.history)
