"""Monte Carlo over the coin randomness.

Every estimator samples full coin sequences, evolves the walk exactly per
sequence, and averages; estimates therefore carry plain i.i.d. standard
errors.  Sample s always draws from stream.child(s), so results are
bit-reproducible for a fixed (seed, stream index) regardless of worker
count, and the reduction over samples runs in fixed order.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .ensembles import FiniteCoinEnsemble, SeededStream, sample_sequence
from .errors import ValidationError
from .walk import JumpFunction, WalkState, evolve, position_distribution


def _configure_threads():
    import numba
    cap = os.environ.get("RTQW_THREADS")
    if cap:
        numba.set_num_threads(max(1, min(int(cap), numba.config.NUMBA_NUM_THREADS)))


@dataclass
class McEstimate:
    """Point estimate with its i.i.d. standard error."""

    value: np.ndarray
    stderr: np.ndarray
    samples: int
    seed: int
    stream_index: int


def _index_matrix(model, n: int, samples: int, stream: SeededStream) -> np.ndarray:
    if samples < 1:
        raise ValidationError("need at least one sample")
    out = np.empty((samples, n), dtype=np.int64)
    for s in range(samples):
        out[s] = sample_sequence(model, n, stream.child(s))
    return out


def _estimate(values: np.ndarray, stream: SeededStream) -> McEstimate:
    values = np.asarray(values)
    mean = values.mean(axis=0)
    stderr = values.std(axis=0, ddof=1) / np.sqrt(values.shape[0])
    return McEstimate(mean, stderr, values.shape[0], stream.seed, stream.index)


def _kernel_inputs(ensemble: FiniteCoinEnsemble, jump: JumpFunction, phi0):
    mats = np.stack([c.matrix for c in ensemble.coins]).astype(np.complex128)
    jumps = jump.displacements[:, 0].astype(np.int64)
    phi0 = np.asarray(phi0, dtype=np.complex128)
    return mats, jumps, phi0


def _per_sample_weights(ensemble, phi0, jump, n, samples, stream):
    """(S, 2*rho*n + 1) weight rows for d = 1 via the compiled kernel."""
    from . import _kernels
    _configure_threads()
    idx = _index_matrix(ensemble, n, samples, stream)
    mats, jumps, phi0 = _kernel_inputs(ensemble, jump, phi0)
    out = np.zeros((samples, 2 * jump.range_bound * n + 1))
    _kernels.weights_1d(idx, mats, jumps, phi0, out)
    dev = np.abs(out.sum(axis=1) - 1.0).max()
    if dev > 1e-10:
        raise ValidationError(f"per-sample normalization violated ({dev:.3e})")
    return out


def mc_averaged_distribution(ensemble: FiniteCoinEnsemble, phi0, jump: JumpFunction,
                             n: int, samples: int, stream: SeededStream):
    """Unbiased estimate of the averaged position law at time n.

    Returns (sites, McEstimate) where value/stderr are per-site arrays.
    """
    d = jump.dimension
    if d == 1:
        rows = _per_sample_weights(ensemble, phi0, jump, n, samples, stream)
        sites = np.arange(-jump.range_bound * n, jump.range_bound * n + 1)
        return sites, _estimate(rows, stream)
    idx = _index_matrix(ensemble, n, samples, stream)
    state0 = WalkState.point(phi0, d=d)
    rho = jump.range_bound
    side = 2 * rho * n + 1
    rows = np.zeros((samples,) + (side,) * d)
    lo = np.full(d, -rho * n)
    for s in range(samples):
        dist = position_distribution(
            evolve(state0, [ensemble.coins[i] for i in idx[s]], jump)
        )
        off = dist.origin - lo
        sl = tuple(slice(int(o), int(o + w)) for o, w in zip(off, dist.weights.shape))
        rows[(s,) + sl] = dist.weights
    sites = np.stack(np.meshgrid(*[np.arange(side) - rho * n] * d, indexing="ij"), axis=-1)
    return sites, _estimate(rows, stream)


def _per_sample_moments(ensemble, phi0, jump, n, samples, stream):
    """(S, d + d*d + 1) rows: first moments, raw second moments, norm^2."""
    d = jump.dimension
    if d == 1:
        from . import _kernels
        _configure_threads()
        idx = _index_matrix(ensemble, n, samples, stream)
        mats, jumps, phi0v = _kernel_inputs(ensemble, jump, phi0)
        out = np.zeros((samples, 3))
        _kernels.moments_1d(idx, mats, jumps, phi0v, out)
        return out[:, :1], out[:, 1:2].reshape(samples, 1, 1), out[:, 2]
    idx = _index_matrix(ensemble, n, samples, stream)
    state0 = WalkState.point(phi0, d=d)
    first = np.zeros((samples, d))
    second = np.zeros((samples, d, d))
    norms = np.zeros(samples)
    for s in range(samples):
        dist = position_distribution(
            evolve(state0, [ensemble.coins[i] for i in idx[s]], jump)
        )
        grid = dist.site_grid().astype(float)
        w = dist.weights
        norms[s] = w.sum()
        first[s] = np.tensordot(w, grid, axes=(tuple(range(d)), tuple(range(d))))
        second[s] = np.einsum("...,...i,...j->ij", w, grid, grid)
    return first, second, norms


def mc_moment_scaling(ensemble: FiniteCoinEnsemble, phi0, jump: JumpFunction,
                      n_list, samples: int, stream: SeededStream):
    """Centered moment estimates E<(X - n r_bar)_i (X - n r_bar)_j> / n per n.

    Returns a list of dicts with first/second-moment McEstimates; sample
    sets for different n come from disjoint child streams.
    """
    rbar = jump.drift
    d = jump.dimension
    rows = []
    for pos, n in enumerate(n_list):
        n = int(n)
        sub = stream.child(1_000_000 + pos)
        first, second, norms = _per_sample_moments(ensemble, phi0, jump, n, samples, sub)
        dev = np.abs(norms - 1.0).max()
        if dev > 1e-10:
            raise ValidationError(f"per-sample normalization violated ({dev:.3e})")
        shift = n * rbar
        centered = (second
                    - np.einsum("i,sj->sij", shift, first)
                    - np.einsum("si,j->sij", first, shift)
                    + np.outer(shift, shift)[None, :, :])
        rows.append({
            "n": n,
            "first_over_n": _estimate(first / n, sub),
            "centered_second_over_n": _estimate(centered / n, sub),
        })
    return rows


def mc_char_function(ensemble: FiniteCoinEnsemble, phi0, jump: JumpFunction,
                     y, n: int, samples: int, stream: SeededStream) -> McEstimate:
    """Mean of per-sequence characteristic functions at y."""
    d = jump.dimension
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if d == 1:
        rows = _per_sample_weights(ensemble, phi0, jump, n, samples, stream)
        sites = np.arange(-jump.range_bound * n, jump.range_bound * n + 1)
        vals = rows @ np.exp(1j * y[0] * sites)
    else:
        idx = _index_matrix(ensemble, n, samples, stream)
        state0 = WalkState.point(phi0, d=d)
        vals = np.zeros(samples, dtype=np.complex128)
        for s in range(samples):
            dist = position_distribution(
                evolve(state0, [ensemble.coins[i] for i in idx[s]], jump)
            )
            grid = dist.site_grid().astype(float)
            vals[s] = (dist.weights * np.exp(1j * (grid @ y))).sum()
    return _estimate(vals, stream)
