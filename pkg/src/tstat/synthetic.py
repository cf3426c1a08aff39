"""Synthetic trajectory collections for tests, demos and smoke benchmarks."""

import numpy as np

from .geometry import Trajectory

__all__ = ["random_walks", "clustered_trajectories", "perturb"]


def random_walks(n, m_range=(1, 20), d=2, step=1.0, extent=100.0, seed=None) -> list:
    """Independent Gaussian random walks with uniform random starts."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        m = int(rng.integers(m_range[0], m_range[1] + 1))
        start = rng.uniform(0, extent, size=d)
        steps = rng.normal(0, step, size=(m, d))
        steps[0] = 0
        out.append(Trajectory(i, start + np.cumsum(steps, axis=0)))
    return out


def perturb(P: Trajectory, noise: float, rng, new_id=None, resample=True) -> Trajectory:
    """Jitter every point of *P*; optionally drop or repeat a few points."""
    pts = P.points + rng.normal(0, noise, size=P.points.shape)
    if resample and P.m > 2:
        keep = rng.random(P.m) > 0.1
        keep[0] = keep[-1] = True
        pts = pts[keep]
        if rng.random() < 0.5:
            j = int(rng.integers(0, pts.shape[0]))
            pts = np.insert(pts, j, pts[j], axis=0)
    return Trajectory(P.id if new_id is None else new_id, pts)


def clustered_trajectories(n, n_clusters=None, m_range=(4, 24), d=2, step=5.0,
                           extent=1000.0, noise=0.5, seed=None) -> list:
    """Noisy copies of a few template routes.

    Each trajectory picks a template, jitters it with Gaussian noise of
    scale *noise* and randomly drops or repeats points, so near neighbours
    under Fréchet distance are plentiful.
    """
    rng = np.random.default_rng(seed)
    if n_clusters is None:
        n_clusters = max(1, n // 50)
    templates = random_walks(n_clusters, m_range, d, step, extent, seed=rng)
    which = rng.integers(0, n_clusters, size=n)
    return [perturb(templates[c], noise, rng, new_id=i) for i, c in enumerate(which)]
