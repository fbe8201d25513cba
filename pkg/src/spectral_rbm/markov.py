"""Finite-state Markov chain utilities and seeded stochastic primitives.

Transition matrices and state distributions are validated once, at
construction, and treated as immutable afterwards; the operations on them
assume validity instead of re-checking per call.

Randomness is threaded explicitly through SeededRng so every caller owns
its stream. Two instances built from the same seed produce identical draw
sequences, which is what the reproducibility guarantees elsewhere in the
package are built on.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError, ValidationError

# Construction-time tolerance on row-stochasticity.
ROW_SUM_TOL = 1e-12


class SeededRng:
    """Deterministic random stream with an explicit 64-bit unsigned seed.

    Backed by numpy's PCG64 bit generator. The generator algorithm is part
    of this package's reproducibility contract: equal seeds give equal
    sequences across runs and machines, so seeds recorded in manifests and
    model files replay exactly.
    """

    __slots__ = ("seed", "_gen")

    def __init__(self, seed):
        if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
            raise ValidationError(f"seed must be an integer, got {type(seed).__name__}")
        seed = int(seed)
        if not 0 <= seed < 2**64:
            raise ValidationError(f"seed must fit in 64 unsigned bits, got {seed}")
        self.seed = seed
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def uniform(self):
        """One uniform draw from [0, 1)."""
        return float(self._gen.random())

    def uniforms(self, n):
        """Vector of n uniform draws from [0, 1)."""
        return self._gen.random(int(n))

    def normals(self, shape):
        """Array of standard-normal draws, filled in C order."""
        return self._gen.standard_normal(shape)

    def permutation(self, n):
        """Random permutation of range(n)."""
        return self._gen.permutation(int(n))

    def __repr__(self):
        return f"SeededRng(seed={self.seed})"


class TransitionMatrix:
    """Square row-stochastic matrix of transition probabilities."""

    __slots__ = ("entries",)

    def __init__(self, entries):
        m = np.array(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"transition matrix must be square, got shape {m.shape}")
        if m.shape[0] == 0:
            raise ValidationError("transition matrix needs at least one state")
        if not np.all(np.isfinite(m)):
            raise ValidationError("transition matrix entries must be finite")
        if np.any(m < 0.0) or np.any(m > 1.0):
            raise ValidationError("transition probabilities must lie in [0, 1]")
        worst = float(np.abs(m.sum(axis=1) - 1.0).max())
        if worst > ROW_SUM_TOL:
            raise ValidationError(
                f"rows must each sum to 1 within {ROW_SUM_TOL:g}, worst deviation {worst:.3e}"
            )
        self.entries = m

    @property
    def n_states(self):
        return self.entries.shape[0]

    def __repr__(self):
        return f"TransitionMatrix(n_states={self.n_states})"


class StateDistribution:
    """Probability vector over the states of a chain."""

    __slots__ = ("probs",)

    def __init__(self, probs):
        p = np.array(probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValidationError(f"state distribution must be a nonempty vector, got shape {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ValidationError("state probabilities must be finite")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValidationError("state probabilities must lie in [0, 1]")
        dev = abs(float(p.sum()) - 1.0)
        if dev > ROW_SUM_TOL:
            raise ValidationError(f"state probabilities must sum to 1 within {ROW_SUM_TOL:g}, off by {dev:.3e}")
        self.probs = p

    def __repr__(self):
        return f"StateDistribution({self.probs!r})"


def transition_power(t, n):
    """n-step transition matrix T^n for integer n >= 1."""
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ValidationError(f"power must be an integer, got {type(n).__name__}")
    if n < 1:
        raise ValidationError(f"power must be >= 1, got {n}")
    return TransitionMatrix(np.linalg.matrix_power(t.entries, int(n)))


def is_regular(t, max_power):
    """True iff some T^k with k <= max_power has all entries strictly positive."""
    if isinstance(max_power, bool) or not isinstance(max_power, (int, np.integer)):
        raise ValidationError(f"max_power must be an integer, got {type(max_power).__name__}")
    if max_power < 1:
        raise ValidationError(f"max_power must be >= 1, got {max_power}")
    power = t.entries
    for _ in range(int(max_power)):
        if np.all(power > 0.0):
            return True
        power = power @ t.entries
    return False


def equilibrium_vector(t, tol=1e-12, max_iters=200_000):
    """Stationary distribution of a regular chain by power iteration.

    Starts from the uniform distribution and iterates V <- V.T until the
    residual max|V.T - V| drops to tol; the returned vector satisfies that
    bound. Chains for which uniform is already stationary (the identity
    matrix being the degenerate extreme) converge in zero steps.

    Raises ConvergenceError, carrying the last iterate, if max_iters passes
    without the residual reaching tol.
    """
    if not (isinstance(tol, (int, float)) and tol > 0.0):
        raise ValidationError(f"tol must be a positive real, got {tol!r}")
    if isinstance(max_iters, bool) or not isinstance(max_iters, (int, np.integer)) or max_iters < 1:
        raise ValidationError(f"max_iters must be a positive integer, got {max_iters!r}")
    matrix = t.entries
    v = np.full(t.n_states, 1.0 / t.n_states)
    for _ in range(int(max_iters)):
        nxt = v @ matrix
        if float(np.abs(nxt - v).max()) <= tol:
            return StateDistribution(v)
        # renormalize so float drift cannot accumulate over long runs
        v = nxt / nxt.sum()
    residual = float(np.abs(v @ matrix - v).max())
    raise ConvergenceError(
        f"power iteration did not reach tol={tol:g} in {max_iters} iterations (residual {residual:.3e})",
        last_iterate=v,
    )


def bernoulli(p, rng):
    """One draw from Bernoulli(p): 1 iff the next uniform is strictly below p.

    p = 0 can never fire and p = 1 always does, since uniforms live in [0, 1).
    """
    p = float(p)
    if not 0.0 <= p <= 1.0:  # NaN fails every comparison and lands here too
        raise ValidationError(f"probability must lie in [0, 1], got {p}")
    return 1 if rng.uniform() < p else 0
