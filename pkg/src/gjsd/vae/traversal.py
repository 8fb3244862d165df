"""Latent traversals: decode grids that vary one latent coordinate at a time.

Rows traverse a latent dimension across equi-spaced values while the other
coordinates stay at the posterior mean of the probe input. Grids export to
an 8-bit grayscale PNG (square images tiled row-major) or a raw CSV.
"""

import csv
import math
import pathlib

import numpy as np
from PIL import Image

from ..errors import InputError


def latent_traversal(model, x, dims, n_points, value_range):
    """Decode a traversal grid around the posterior mean of one input.

    Args:
        model: VaeModel.
        x: one input example, shape (input_dim,) or (1, input_dim).
        dims: latent indices to traverse, one grid row each.
        n_points: column count; 1 keeps the traversed coordinate at its
            posterior-mean value, so the single column is the plain
            reconstruction.
        value_range: (lo, hi) traversal interval, lo <= hi.

    Returns:
        (len(dims), n_points, input_dim) array of decoded images.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape != (1, model.arch.input_dim):
        raise InputError(
            f"expected one example of dim {model.arch.input_dim}, got shape {x.shape}"
        )
    dims = [int(d) for d in dims]
    if not dims:
        raise InputError("dims is empty")
    for d in dims:
        if not 0 <= d < model.arch.latent_dim:
            raise InputError(
                f"latent index {d} out of range [0, {model.arch.latent_dim})"
            )
    n_points = int(n_points)
    if n_points < 1:
        raise InputError(f"n_points must be >= 1, got {n_points}")
    lo, hi = (float(v) for v in value_range)
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo > hi:
        raise InputError(f"bad traversal range [{lo}, {hi}]")

    mu, _ = model.encode(x)
    mu = mu[0]
    grid = np.empty((len(dims), n_points, model.arch.input_dim))
    for r, d in enumerate(dims):
        latents = np.tile(mu, (n_points, 1))
        if n_points > 1:
            latents[:, d] = np.linspace(lo, hi, n_points)
        grid[r] = model.decode(latents)
    return grid


def _cell_shape(input_dim):
    """Square image side if input_dim is a perfect square, else a 1-row strip."""
    side = math.isqrt(input_dim)
    if side * side == input_dim:
        return side, side
    return 1, input_dim


def traversal_png(grid, path):
    """Write a traversal grid as one tiled 8-bit grayscale PNG.

    Cells are laid out row-major: grid row -> tile row, grid column -> tile
    column. Values are clipped to [0,1] and scaled to 0..255.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 3:
        raise InputError(f"expected a (dims, points, input_dim) grid, got {grid.shape}")
    n_rows, n_cols, input_dim = grid.shape
    h, w = _cell_shape(input_dim)
    canvas = np.empty((n_rows * h, n_cols * w))
    for r in range(n_rows):
        for c in range(n_cols):
            canvas[r * h : (r + 1) * h, c * w : (c + 1) * w] = grid[r, c].reshape(h, w)
    pixels = np.clip(np.round(255.0 * np.clip(canvas, 0.0, 1.0)), 0, 255).astype(np.uint8)
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(pixels, mode="L").save(path)


def traversal_csv(grid, path):
    """Write a traversal grid as CSV rows (dim, point, x0, x1, ...)."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 3:
        raise InputError(f"expected a (dims, points, input_dim) grid, got {grid.shape}")
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dim", "point"] + [f"x{j}" for j in range(grid.shape[2])])
        for r in range(grid.shape[0]):
            for c in range(grid.shape[1]):
                writer.writerow([r, c] + [repr(v) for v in grid[r, c]])
