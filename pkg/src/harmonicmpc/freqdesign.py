"""Discrete-time frequency response and base-frequency selection.

Helper for picking the harmonic base frequency: evaluate the gain of a
single input-to-output channel of the discrete transfer function and find
where it crosses the ratio between the output and input bounds.  The
suggested frequency is capped at half the Nyquist frequency because the
inputs are applied through a zero-order hold.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NoCrossingWarning, PoleOnGrid
from .model import ConstraintSet, LtiModel

# Hard cap: half the Nyquist frequency (rad/sample).
W_MAX = np.pi / 2
# Bisection tolerance on the crossing frequency.
_BISECT_TOL = 1e-6


@dataclass(frozen=True)
class FrequencyResponse:
    """Gain samples of one channel over a strictly increasing grid."""

    frequencies: np.ndarray
    gains: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.frequencies, dtype=float)
        g = np.asarray(self.gains, dtype=float)
        if np.any(np.diff(w) <= 0):
            raise ValueError("frequency grid must be strictly increasing")
        if w.min() <= 0 or w.max() > np.pi:
            raise ValueError("grid must lie in (0, pi]")
        if not np.all(np.isfinite(g)):
            raise ValueError("gains must be finite (grid hits a pole?)")
        object.__setattr__(self, "frequencies", w)
        object.__setattr__(self, "gains", g)


def transfer_gain(model: LtiModel, w: float) -> np.ndarray:
    """Full gain matrix |C (e^{jw} I - A)^{-1} B + D| at frequency w."""
    if not 0 < w <= np.pi:
        raise ValueError("w must lie in (0, pi] (below the Nyquist frequency)")
    z = np.exp(1j * w)
    M = z * np.eye(model.n) - model.A
    if np.linalg.cond(M) > 1e12:
        raise PoleOnGrid(f"e^(jw) is (numerically) a pole at w={w}")
    G = model.C @ np.linalg.solve(M, model.B) + model.D
    return np.abs(G)


def gain_at(model: LtiModel, w: float, out_index: int, in_index: int) -> float:
    """Channel gain |C (e^{jw} I - A)^{-1} B + D| at frequency w."""
    return float(transfer_gain(model, w)[out_index, in_index])


def frequency_response(model: LtiModel, out_index: int, in_index: int,
                       grid: np.ndarray | None = None) -> FrequencyResponse:
    """Sampled channel gain over a log grid in (0, pi]."""
    if grid is None:
        grid = np.logspace(-3, np.log10(np.pi), 400)
        grid[-1] = np.pi
    gains = np.array([gain_at(model, w, out_index, in_index) for w in grid])
    return FrequencyResponse(frequencies=grid, gains=gains)


def suggest_w(model: LtiModel, constraints: ConstraintSet,
              out_index: int, in_index: int,
              ratio: float | None = None) -> float:
    """Base frequency where the channel gain meets the bound ratio.

    The target gain is |output bound| / |input bound| for the selected
    channel; the returned frequency is the smallest crossing, found by
    bisection on a log grid, and never exceeds pi/2.  If the gain never
    reaches the ratio, pi/2 is returned with a warning; if the ratio is
    above the gain everywhere, the smallest grid frequency is returned
    with a warning.
    """
    if ratio is None:
        # Input bounds live in the trailing m constrained components.
        z_bound = min(abs(constraints.z_min[out_index]),
                      abs(constraints.z_max[out_index]))
        u_bound = min(abs(constraints.z_min[constraints.n_z - model.m + in_index]),
                      abs(constraints.z_max[constraints.n_z - model.m + in_index]))
        ratio = z_bound / u_bound

    def safe_gain(w):
        # A pole on the unit circle near w means unbounded gain there.
        try:
            return gain_at(model, w, out_index, in_index)
        except PoleOnGrid:
            return np.inf

    grid = np.logspace(-4, np.log10(W_MAX), 200)
    grid[-1] = W_MAX
    gains = np.array([safe_gain(w) for w in grid])
    above = gains >= ratio
    if not above.any():
        warnings.warn("channel gain never reaches the bound ratio; "
                      "returning pi/2", NoCrossingWarning, stacklevel=2)
        return W_MAX
    if above.all():
        warnings.warn("bound ratio is below the gain over the whole grid; "
                      "returning the smallest grid frequency",
                      NoCrossingWarning, stacklevel=2)
        return float(grid[0])
    # First sign change from above to below the ratio.
    idx = int(np.argmax(~above[np.argmax(above):])) + int(np.argmax(above))
    lo, hi = grid[idx - 1], grid[idx]
    while hi - lo > _BISECT_TOL:
        mid = 0.5 * (lo + hi)
        if safe_gain(mid) >= ratio:
            lo = mid
        else:
            hi = mid
    return float(min(0.5 * (lo + hi), W_MAX))


def gain_grid_csv(model: LtiModel, out_index: int, in_index: int, path) -> None:
    """Dump the sampled channel gain as CSV for external plotting."""
    fr = frequency_response(model, out_index, in_index)
    import csv

    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["w_rad_per_sample", "gain"])
        for w, g in zip(fr.frequencies, fr.gains):
            wr.writerow([f"{w:.12g}", f"{g:.12g}"])
