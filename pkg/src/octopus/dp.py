"""Dynamic-programming path solvers on (step, state) score grids.

Both boundary searches in this package reduce to the same problem: pick one
state per step maximizing the summed score subject to a per-step jump bound.
States are radial indices (linear axis) for lumen boundaries and A-line
indices (circular axis) for guidewire edges.
"""

from __future__ import annotations

import numpy as np

NEG = -np.inf


def _shift_linear(values: np.ndarray, d: int) -> np.ndarray:
    """Values reachable at state s from state s-d; out-of-range is -inf."""
    if d == 0:
        return values
    out = np.full_like(values, NEG)
    if d > 0:
        out[d:] = values[:-d]
    else:
        out[:d] = values[-d:]
    return out


def viterbi_chain(
    score: np.ndarray,
    jump: int,
    *,
    circular_states: bool = False,
    start: int | None = None,
    end_near: int | None = None,
) -> tuple[np.ndarray, float]:
    """Best path through `score` (n_steps, n_states) with |Δstate| <= jump.

    `circular_states` wraps the state axis (angular positions). `start` pins
    the first state; `end_near` restricts the final state to within `jump`
    of the given state (used for cyclic closure).
    Returns (path, total score).
    """
    n_steps, n_states = score.shape
    shifts = np.arange(-jump, jump + 1)
    value = np.full(n_states, NEG)
    if start is None:
        value[:] = score[0]
    else:
        value[start] = score[0, start]
    back = np.zeros((n_steps, n_states), dtype=np.int8)
    # predecessor gather: row k holds the state reachable via shift d_k
    src = np.arange(n_states)[None, :] - shifts[:, None]
    if circular_states:
        gather = np.mod(src, n_states)
        invalid = None
    else:
        gather = np.clip(src, 0, n_states - 1)
        invalid = (src < 0) | (src >= n_states)
    cols = np.arange(n_states)
    for t in range(1, n_steps):
        stacked = value[gather]
        if invalid is not None:
            stacked[invalid] = NEG
        best_k = np.argmax(stacked, axis=0)
        value = stacked[best_k, cols] + score[t]
        back[t] = shifts[best_k]
    if end_near is not None:
        mask = np.full(n_states, NEG)
        if circular_states:
            idx = (end_near + shifts) % n_states
        else:
            idx = np.clip(end_near + shifts, 0, n_states - 1)
        mask[idx] = 0.0
        value = value + mask
    end = int(np.argmax(value))
    total = float(value[end])
    path = np.empty(n_steps, dtype=np.int64)
    path[-1] = end
    for t in range(n_steps - 1, 0, -1):
        prev = path[t] - back[t, path[t]]
        if circular_states:
            prev %= n_states
        path[t - 1] = prev
    return path, total


def cyclic_totals_by_start(score: np.ndarray, jump: int) -> np.ndarray:
    """Exact best total of a cyclic path (|first-last| <= jump) per start state."""
    n_steps, n_states = score.shape
    value = np.full((n_states, n_states), NEG, dtype=np.float64)
    idx = np.arange(n_states)
    value[idx, idx] = score[0]
    for t in range(1, n_steps):
        best = np.full_like(value, NEG)
        for d in range(-jump, jump + 1):
            if d == 0:
                cand = value
            elif d > 0:
                cand = np.full_like(value, NEG)
                cand[:, d:] = value[:, :-d]
            else:
                cand = np.full_like(value, NEG)
                cand[:, :d] = value[:, -d:]
            np.maximum(best, cand, out=best)
        value = best + score[t][None, :]
    # closure: end state within jump of the start state
    totals = np.full(n_states, NEG)
    for d in range(-jump, jump + 1):
        end = idx + d
        ok = (end >= 0) & (end < n_states)
        np.maximum(totals, np.where(ok, value[idx, np.clip(end, 0, n_states - 1)], NEG),
                   out=totals)
    return totals


def best_cyclic_path(score: np.ndarray, jump: int) -> tuple[np.ndarray, float]:
    """Optimal path with the cyclic closure constraint |path[0]-path[-1]| <= jump.

    The unconstrained chain optimum is returned directly whenever it already
    closes (it then provably equals the cyclic optimum); otherwise every
    start state is evaluated exactly.
    """
    path, total = viterbi_chain(score, jump)
    if abs(int(path[0]) - int(path[-1])) <= jump:
        return path, total
    totals = cyclic_totals_by_start(score, jump)
    s0 = int(np.argmax(totals))
    return viterbi_chain(score, jump, start=s0, end_near=s0)
