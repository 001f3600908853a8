"""Pure-Python kernels.  Same contract and arithmetic order as ``_ckernels``.

Both backends consume pre-drawn random numbers, so a chain or trajectory
is a deterministic function of its inputs and the two backends agree bit
for bit (the compiled one is built with ``-ffp-contract=off``).
"""
import math

import numpy as np

from brownliq.geometry import NeighborGrid

RECOMPUTE_EVERY = 10_000


def _inside(x, r, w):
    if not x[0] > r:
        return False
    lim = w - r
    if lim <= 0:
        return False
    if len(x) == 2:
        return abs(x[1]) < lim
    s = 0.0
    for i in range(1, len(x)):
        s += x[i] * x[i]
    return s < lim * lim


def mh_run(centers, radii, drifts, weights, steps, half_width, cell_size,
           ks, noise, logu, acc, prop, rec_every, rec_centers, rec_wcm,
           best_centers, stats):
    """Run ``len(ks)`` single-ball Metropolis steps in place.

    ``stats`` holds ``[wcm, best_wcm]`` on entry and exit.  Every
    ``rec_every`` steps the configuration and running wcm are written to the
    next row of ``rec_centers`` / ``rec_wcm``.  Returns the number of rows
    written.
    """
    n, d = centers.shape
    grid = NeighborGrid.build(centers, radii, cell_size)
    gc = grid.centers
    wcm = float(stats[0])
    best = float(stats[1])
    nrec = 0
    new = [0.0] * d
    for t in range(ks.shape[0]):
        k = int(ks[t])
        prop[k] += 1
        r = radii[k]
        s = steps[k]
        for i in range(d):
            new[i] = gc[k, i] + s * noise[t, i]
        ok = _inside(new, r, half_width)
        if ok:
            for j in grid.query(new, r):
                if j == k:
                    continue
                reach = r + radii[j]
                d2 = 0.0
                for i in range(d):
                    diff = new[i] - gc[j, i]
                    d2 += diff * diff
                if d2 < reach * reach:
                    ok = False
                    break
        if ok:
            dx1 = new[0] - gc[k, 0]
            lr = -2.0 * drifts[k] * dx1
            if lr >= 0.0 or logu[t] < lr:
                grid.move(k, new)
                acc[k] += 1
                wcm += weights[k] * dx1
                if wcm < best:
                    best = wcm
                    best_centers[:, :] = gc
        if (t + 1) % RECOMPUTE_EVERY == 0:
            wcm = 0.0
            for i in range(n):
                wcm += weights[i] * gc[i, 0]
        if rec_every > 0 and (t + 1) % rec_every == 0:
            rec_centers[nrec] = gc
            rec_wcm[nrec] = wcm
            nrec += 1
    centers[:, :] = gc
    stats[0] = wcm
    stats[1] = best
    return nrec


def _violations(x, radii, w, grid_cut):
    n, d = x.shape
    pairs = []
    if n > grid_cut:
        grid = NeighborGrid.build(x, radii)
        cand = lambda i: [j for j in grid.query(x[i], radii[i]) if j > i]  # noqa: E731
    else:
        cand = lambda i: range(i + 1, n)  # noqa: E731
    for i in range(n):
        for j in cand(i):
            reach = radii[i] + radii[j]
            d2 = 0.0
            for c in range(d):
                diff = x[i, c] - x[j, c]
                d2 += diff * diff
            if d2 < reach * reach:
                pairs.append((reach - math.sqrt(d2), i, j))
    worst = max((p[0] for p in pairs), default=0.0)
    for k in range(n):
        r = radii[k]
        v = r - x[k, 0]
        if v > worst:
            worst = v
        lim = w - r
        if d == 2:
            v = abs(x[k, 1]) - lim
        else:
            s = 0.0
            for c in range(1, d):
                s += x[k, c] * x[k, c]
            v = math.sqrt(s) - lim
        if v > worst:
            worst = v
    return pairs, worst


def project(x, radii, mob, half_width, tol, max_iters, grid_cut=64):
    """Iterative projection onto the valid set.  Returns passes used, or -1."""
    n, d = x.shape
    for it in range(max_iters + 1):
        pairs, worst = _violations(x, radii, half_width, grid_cut)
        if worst <= tol:
            return it
        if it == max_iters:
            break
        pairs.sort(key=lambda p: (-p[0], p[1], p[2]))
        for _, i, j in pairs:
            reach = radii[i] + radii[j]
            d2 = 0.0
            for c in range(d):
                diff = x[i, c] - x[j, c]
                d2 += diff * diff
            if not d2 < reach * reach:
                continue
            dist = math.sqrt(d2)
            depth = reach - dist
            sh = depth / (mob[i] + mob[j])
            for c in range(d):
                u = (x[i, c] - x[j, c]) / dist if dist > 0 else (1.0 if c == 0 else 0.0)
                x[i, c] += u * sh * mob[i]
                x[j, c] -= u * sh * mob[j]
        for k in range(n):
            r = radii[k]
            if x[k, 0] < r:
                x[k, 0] = r
            lim = half_width - r
            if d == 2:
                if x[k, 1] > lim:
                    x[k, 1] = lim
                elif x[k, 1] < -lim:
                    x[k, 1] = -lim
            else:
                s = 0.0
                for c in range(1, d):
                    s += x[k, c] * x[k, c]
                if s > lim * lim:
                    f = lim / math.sqrt(s)
                    for c in range(1, d):
                        x[k, c] *= f
    return -1


def em_run(x, radii, drifts, mob, sig, dt, noise, half_width, tol, max_iters,
           rec_every, rec_x, info):
    """Euler-Maruyama steps with projection, in place on ``x``.

    ``noise`` has shape ``(steps, n, d)``.  ``info`` receives
    ``[failed_step or -1, max passes used]``.  Returns rows recorded.
    """
    n, d = x.shape
    sq = math.sqrt(dt)
    nrec = 0
    info[0] = -1
    for t in range(noise.shape[0]):
        for k in range(n):
            for c in range(d):
                x[k, c] += sig[k] * sq * noise[t, k, c]
            x[k, 0] -= drifts[k] * dt
        used = project(x, radii, mob, half_width, tol, max_iters)
        if used < 0:
            info[0] = t
            return nrec
        if used > info[1]:
            info[1] = used
        if rec_every > 0 and (t + 1) % rec_every == 0:
            rec_x[nrec] = x
            nrec += 1
    return nrec


def any_overlap(centers, radii, tol):
    n = centers.shape[0]
    grid = NeighborGrid.build(centers, radii)
    for i in range(n):
        for j in grid.query(centers[i], radii[i]):
            if j <= i:
                continue
            reach = radii[i] + radii[j] - tol
            diff = centers[i] - centers[j]
            if reach > 0 and float(diff @ diff) < reach * reach:
                return True
    return False
