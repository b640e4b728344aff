from __future__ import annotations

import math
import random

import numpy as np
import pytest

from streammap.layout import ComponentLayout
from streammap.stability import RigidTransform, apply_transform, procrustes_align


def angle_scan_oracle(new_pts, old_pts, steps=3600):
    """Best rigid RMS over `steps` rotation angles x reflection, each with
    its optimal translation (centroid match)."""
    a = np.asarray(new_pts, dtype=float)
    b = np.asarray(old_pts, dtype=float)
    ca, cb = a.mean(axis=0), b.mean(axis=0)
    a0, b0 = a - ca, b - cb
    best = math.inf
    for k in range(steps):
        t = 2.0 * math.pi * k / steps
        c, s = math.cos(t), math.sin(t)
        for refl in (1.0, -1.0):
            rot = np.array([[c, -s * refl], [s, c * refl]])
            resid = a0 @ rot.T - b0
            rms = math.sqrt(float((resid**2).sum(axis=1).mean()))
            best = min(best, rms)
    return best


def rand_points(rng, n, scale=1.0):
    return {f"p{i}": (rng.uniform(-scale, scale), rng.uniform(-scale, scale))
            for i in range(n)}


class TestProcrustesAlign:
    def test_identity_when_equal(self):
        pts = {"a": (0.0, 0.0), "b": (1.0, 2.0), "c": (-1.0, 0.5)}
        tf, resid = procrustes_align(pts, pts)
        assert tf == RigidTransform.identity()
        assert resid == 0.0

    def test_recovers_quarter_turn(self):
        old = {"a": (1.0, 0.0), "b": (0.0, 1.0), "c": (-1.0, -1.0)}
        rot90 = {k: (-y, x) for k, (x, y) in old.items()}
        tf, resid = procrustes_align(rot90, old)
        assert resid <= 1e-9
        moved = tf.apply(np.array([rot90[k] for k in sorted(rot90)]))
        want = np.array([old[k] for k in sorted(old)])
        assert np.allclose(moved, want, atol=1e-9)

    def test_recovers_rigid_motion_with_reflection(self):
        rng = random.Random(4)
        old = rand_points(rng, 8)
        theta = 1.234
        c, s = math.cos(theta), math.sin(theta)
        new = {k: (c * x + s * y + 3.0, s * x - c * y - 1.0)  # det -1 motion
               for k, (x, y) in old.items()}
        tf, resid = procrustes_align(new, old)
        assert resid <= 1e-9
        det = np.linalg.det(tf.matrix)
        assert det == pytest.approx(-1.0, abs=1e-9)

    def test_noisy_instance_beats_angle_scan(self):
        rng = random.Random(17)
        old = rand_points(rng, 10)
        new = {k: (x + rng.gauss(0, 0.05), y + rng.gauss(0, 0.05))
               for k, (x, y) in old.items()}
        tf, resid = procrustes_align(new, old)
        scan = angle_scan_oracle([new[k] for k in sorted(new)],
                                 [old[k] for k in sorted(old)])
        assert resid <= scan + 1e-6

    def test_requires_two_shared_nodes(self):
        with pytest.raises(ValueError):
            procrustes_align({"a": (0, 0)}, {"a": (1, 1)})
        with pytest.raises(ValueError):
            procrustes_align({"a": (0, 0)}, {"b": (1, 1)})

    def test_coincident_points_translate_to_centroid(self):
        new = {"a": (2.0, 2.0), "b": (2.0, 2.0)}
        old = {"a": (5.0, -1.0), "b": (5.0, -1.0)}
        tf, resid = procrustes_align(new, old)
        assert tf.rotation == ((1.0, 0.0), (0.0, 1.0))
        assert tf.translation == (3.0, -3.0)
        assert resid == pytest.approx(0.0, abs=1e-12)

    def test_rotation_is_orthogonal(self):
        rng = random.Random(31)
        for trial in range(20):
            new = rand_points(rng, 6)
            old = rand_points(rng, 6)
            tf, _ = procrustes_align(new, old)
            r = tf.matrix
            assert np.allclose(r.T @ r, np.eye(2), atol=1e-9)
            assert abs(abs(np.linalg.det(r)) - 1.0) <= 1e-9

    def test_alignment_never_increases_rms(self):
        rng = random.Random(8)
        for trial in range(50):
            old = rand_points(rng, rng.randrange(2, 12))
            new = {k: (x + rng.gauss(0, 0.3), y + rng.gauss(0, 0.3))
                   for k, (x, y) in old.items()}
            tf, resid = procrustes_align(new, old)
            before = math.sqrt(
                sum(math.dist(new[k], old[k]) ** 2 for k in old) / len(old))
            assert resid <= before + 1e-12

    def test_alignment_reduces_mean_displacement_on_random_instances(self):
        rng = random.Random(12)
        for trial in range(50):
            old = rand_points(rng, rng.randrange(3, 12))
            new = {k: (x + rng.gauss(0, 0.2) + 1.0, y + rng.gauss(0, 0.2))
                   for k, (x, y) in old.items()}
            tf, _ = procrustes_align(new, old)
            keys = sorted(old)
            moved = tf.apply(np.array([new[k] for k in keys]))
            after = float(np.mean(np.linalg.norm(
                moved - np.array([old[k] for k in keys]), axis=1)))
            before = sum(math.dist(new[k], old[k]) for k in keys) / len(keys)
            assert after <= before + 1e-12


class TestApplyTransform:
    def lay(self, positions):
        return ComponentLayout("c", dict(positions), 0.0)

    def test_identity_unchanged(self):
        lay = self.lay({"a": (1.0, 2.0), "b": (-0.5, 0.25)})
        out = apply_transform(lay, RigidTransform.identity())
        assert out.positions == lay.positions

    def test_pure_translation(self):
        lay = self.lay({"a": (1.0, 2.0), "b": (-0.5, 0.25)})
        tf = RigidTransform(((1.0, 0.0), (0.0, 1.0)), (1.0, 2.0))
        out = apply_transform(lay, tf)
        assert out.positions["a"] == (2.0, 4.0)
        assert out.positions["b"] == (0.5, 2.25)

    def test_random_rigid_preserves_pairwise_distances(self):
        rng = random.Random(23)
        for trial in range(20):
            pts = rand_points(rng, 7, scale=3.0)
            theta = rng.uniform(0, 2 * math.pi)
            c, s = math.cos(theta), math.sin(theta)
            refl = rng.choice([1.0, -1.0])
            tf = RigidTransform(((c, -s * refl), (s, c * refl)),
                                (rng.uniform(-5, 5), rng.uniform(-5, 5)))
            out = apply_transform(self.lay(pts), tf)
            keys = sorted(pts)
            for i, u in enumerate(keys):
                for v in keys[i + 1:]:
                    before = math.dist(pts[u], pts[v])
                    after = math.dist(out.positions[u], out.positions[v])
                    assert after == pytest.approx(before, abs=1e-9)
