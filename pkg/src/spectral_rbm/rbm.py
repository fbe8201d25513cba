"""Binary restricted Boltzmann machine: energy model, CD-1 training, exact oracles.

Conventions used throughout:

* ``weights`` has shape (m, n): entry [i, j] couples visible unit i to
  hidden unit j. ``visible_bias`` has length m, ``hidden_bias`` length n.
* binary vectors are float64 arrays whose entries are exactly 0.0 or 1.0,
  so they drop straight into matrix arithmetic.
* the joint energy is
  E(v, h) = -v.W.h - v.visible_bias - h.hidden_bias,
  and both conditionals factor into independent logistic units.

Training is plain online CD-1 with momentum and L2 weight decay; one
update per data row, rows visited in order. All stochastic choices flow
through a SeededRng created from TrainConfig.seed, so a config determines
the trained model bit for bit.

The exact_* functions brute-force the state space and exist to keep the
fast paths honest; they refuse models with more than 24 total units.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, FormatError, SizeLimitError, ValidationError
from .markov import SeededRng

# Exact enumeration walks 2**(m+n) states; past this it is no longer a desk check.
ENUMERATION_LIMIT = 24

# Above this the linear-domain exp would overflow; switch to the shifted form.
_LOG1P_EXP_CUTOFF = 30.0


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for CD-1 training.

    The defaults are the reference operating point for the full-scale
    task: learning rate 0.1, momentum 0.5, 50 epochs, 100 hidden units,
    weight decay 2e-4, weights initialized from a standard normal.
    init_weight_scale multiplies that initial normal draw; small synthetic
    problems often want 0.01 instead of 1.0.
    """

    learning_rate: float = 0.1
    momentum: float = 0.5
    epochs: int = 50
    hidden_units: int = 100
    weight_decay: float = 2e-4
    seed: int = 0
    init_weight_scale: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.learning_rate) and self.learning_rate > 0.0):
            raise ValidationError(f"learning_rate must be positive, got {self.learning_rate!r}")
        if not (np.isfinite(self.momentum) and 0.0 <= self.momentum < 1.0):
            raise ValidationError(f"momentum must lie in [0, 1), got {self.momentum!r}")
        if isinstance(self.epochs, bool) or not isinstance(self.epochs, (int, np.integer)) or self.epochs < 1:
            raise ValidationError(f"epochs must be a positive integer, got {self.epochs!r}")
        if (
            isinstance(self.hidden_units, bool)
            or not isinstance(self.hidden_units, (int, np.integer))
            or self.hidden_units < 1
        ):
            raise ValidationError(f"hidden_units must be a positive integer, got {self.hidden_units!r}")
        if not (np.isfinite(self.weight_decay) and self.weight_decay >= 0.0):
            raise ValidationError(f"weight_decay must be >= 0, got {self.weight_decay!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ValidationError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        if not (np.isfinite(self.init_weight_scale) and self.init_weight_scale > 0.0):
            raise ValidationError(f"init_weight_scale must be positive, got {self.init_weight_scale!r}")


@dataclass
class RbmParams:
    """Weights and biases of one binary RBM."""

    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.visible_bias = np.asarray(self.visible_bias, dtype=float)
        self.hidden_bias = np.asarray(self.hidden_bias, dtype=float)
        if self.weights.ndim != 2:
            raise ValidationError(f"weights must be 2-d, got shape {self.weights.shape}")
        m, n = self.weights.shape
        if m < 1:
            raise ValidationError("need at least one visible unit")
        if self.visible_bias.shape != (m,):
            raise ValidationError(
                f"visible_bias shape {self.visible_bias.shape} does not match {m} visible units"
            )
        if self.hidden_bias.shape != (n,):
            raise ValidationError(
                f"hidden_bias shape {self.hidden_bias.shape} does not match {n} hidden units"
            )
        for name, arr in (("weights", self.weights), ("visible_bias", self.visible_bias), ("hidden_bias", self.hidden_bias)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise ValidationError(f"{name} contains non-finite entries")

    @property
    def num_visible(self):
        return self.weights.shape[0]

    @property
    def num_hidden(self):
        return self.weights.shape[1]


@dataclass
class GradientEstimate:
    """One CD-1 gradient estimate, shaped like the parameters it updates."""

    d_weights: np.ndarray
    d_visible_bias: np.ndarray
    d_hidden_bias: np.ndarray


def _as_vector(x, length, name):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.shape[0] != length:
        raise ValidationError(f"{name} must be a vector of length {length}, got shape {v.shape}")
    return v


def _is_binary(arr):
    return bool(np.all((arr == 0.0) | (arr == 1.0)))


def sigmoid(x):
    """Logistic function 1 / (1 + exp(-x)), overflow-safe across float64.

    Scalars in, float out; arrays in, array out. The two-branch form never
    exponentiates a positive argument, so |x| in the hundreds is fine.
    """
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(arr)
    pos = arr >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-arr[pos]))
    ex = np.exp(arr[~pos])
    out[~pos] = ex / (1.0 + ex)
    if np.ndim(x) == 0:
        return float(out[0])
    return out


def _log1p_exp(x):
    """log(1 + exp(x)) elementwise without overflow.

    For x above the cutoff, uses x + log1p(exp(-x)); below it the direct
    form is already safe (exp underflows harmlessly for very negative x).
    """
    x = np.asarray(x, dtype=float)
    big = x > _LOG1P_EXP_CUTOFF
    out = np.empty_like(x)
    out[big] = x[big] + np.log1p(np.exp(-x[big]))
    out[~big] = np.log1p(np.exp(x[~big]))
    return out


def _logsumexp(values):
    a = np.asarray(values, dtype=float).ravel()
    hi = float(a.max())
    if not np.isfinite(hi):
        return hi
    return hi + float(np.log(np.exp(a - hi).sum()))


def energy(v, h, params):
    """Joint energy E(v, h) = -v.W.h - v.visible_bias - h.hidden_bias."""
    v = _as_vector(v, params.num_visible, "visible vector")
    h = _as_vector(h, params.num_hidden, "hidden vector")
    return float(-(v @ params.weights @ h) - v @ params.visible_bias - h @ params.hidden_bias)


def hidden_probs(v, params):
    """p(h_j = 1 | v) for every hidden unit j."""
    v = _as_vector(v, params.num_visible, "visible vector")
    return sigmoid(params.hidden_bias + v @ params.weights)


def visible_probs(h, params):
    """p(v_i = 1 | h) for every visible unit i."""
    h = _as_vector(h, params.num_hidden, "hidden vector")
    return sigmoid(params.visible_bias + params.weights @ h)


def sample_bits(probs, rng):
    """Independent Bernoulli draw per component: bit i is 1 iff u_i < probs[i].

    Consumes exactly len(probs) uniforms from rng, in order, regardless of
    the probabilities. Returns a float64 0/1 vector.
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1:
        raise ValidationError(f"probabilities must form a vector, got shape {p.shape}")
    if p.size and (not np.all(np.isfinite(p)) or float(p.min()) < 0.0 or float(p.max()) > 1.0):
        raise ValidationError("probabilities must lie in [0, 1]")
    return (rng.uniforms(p.size) < p).astype(float)


def cd1(v1, params, rng):
    """Single-step contrastive divergence gradient estimate at one data row.

    Chain: p1 = p(h|v1), h1 ~ p1, v2 ~ p(v|h1), p2 = p(h|v2). The weight
    gradient pairs the data term outer(v1, p1) against the reconstruction
    term outer(v2, p2); bias gradients are v1 - v2 and p1 - p2. The caller
    applies the learning rate. Consumes n then m uniforms from rng.
    """
    v1 = _as_vector(v1, params.num_visible, "visible vector")
    p1 = hidden_probs(v1, params)
    h1 = sample_bits(p1, rng)
    v2 = sample_bits(visible_probs(h1, params), rng)
    p2 = hidden_probs(v2, params)
    return GradientEstimate(
        d_weights=np.outer(v1, p1) - np.outer(v2, p2),
        d_visible_bias=v1 - v2,
        d_hidden_bias=p1 - p2,
    )


def train_rbm(data, config):
    """Train one RBM on binary rows with online CD-1.

    Weights start from scaled standard-normal draws, biases from zero, and
    each row triggers one momentum update:

        velocity = momentum * velocity + learning_rate * gradient
        params  += velocity

    with L2 weight decay folded into the weight gradient only. The RNG is
    seeded from config.seed and consumed in a fixed order (the init draw,
    then per row n + m uniforms), so identical inputs give bit-identical
    parameters.
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0 or data.shape[1] == 0:
        raise ValidationError(f"training data must be a nonempty 2-d array, got shape {data.shape}")
    if not _is_binary(data):
        raise ValidationError("training data entries must all be 0 or 1")

    m = data.shape[1]
    n = config.hidden_units
    rng = SeededRng(config.seed)
    params = RbmParams(
        weights=rng.normals((m, n)) * config.init_weight_scale,
        visible_bias=np.zeros(m),
        hidden_bias=np.zeros(n),
    )
    vel_w = np.zeros((m, n))
    vel_c = np.zeros(m)
    vel_b = np.zeros(n)

    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(config.epochs):
            for row in data:
                grad = cd1(row, params, rng)
                vel_w = config.momentum * vel_w + config.learning_rate * (
                    grad.d_weights - config.weight_decay * params.weights
                )
                vel_c = config.momentum * vel_c + config.learning_rate * grad.d_visible_bias
                vel_b = config.momentum * vel_b + config.learning_rate * grad.d_hidden_bias
                params.weights += vel_w
                params.visible_bias += vel_c
                params.hidden_bias += vel_b
                # parameters must stay finite after every update step
                if not (
                    np.all(np.isfinite(params.weights))
                    and np.all(np.isfinite(params.visible_bias))
                    and np.all(np.isfinite(params.hidden_bias))
                ):
                    raise ConvergenceError(
                        "training diverged to non-finite parameters", last_iterate=params
                    )
    return params


def free_energy(v, params):
    """Free energy F(v) = -v.visible_bias - sum_j log(1 + exp(x_j)).

    x_j = hidden_bias[j] + v.W[:, j]. Equals -log sum_h exp(-E(v, h)) with
    the hidden units marginalized analytically; the log1p branch keeps it
    finite for arbitrarily large x_j.
    """
    v = _as_vector(v, params.num_visible, "visible vector")
    x = params.hidden_bias + v @ params.weights
    return float(-(v @ params.visible_bias) - _log1p_exp(x).sum())


def free_energy_batch(rows, params):
    """free_energy applied to every row of a 2-d array, vectorized."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] != params.num_visible:
        raise ValidationError(
            f"rows must be 2-d with {params.num_visible} columns, got shape {rows.shape}"
        )
    x = params.hidden_bias + rows @ params.weights
    return -(rows @ params.visible_bias) - _log1p_exp(x).sum(axis=1)


def _enumerate_bits(k):
    """All 2**k binary vectors of length k, rows in ascending binary order."""
    ints = np.arange(2**k, dtype=np.int64)
    return ((ints[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(float)


def _check_enumerable(params):
    total = params.num_visible + params.num_hidden
    if total > ENUMERATION_LIMIT:
        raise SizeLimitError(
            f"exact enumeration needs m + n <= {ENUMERATION_LIMIT}, got {total} units"
        )


def exact_log_partition_function(params):
    """log of the partition function by brute force over every (v, h) pair.

    Enumerates all 2**m visible times 2**n hidden configurations, forms
    -E(v, h) for each pair, and log-sum-exps the lot. Deliberately does not
    reuse free_energy, so the two routes stay independent cross-checks.
    """
    _check_enumerable(params)
    vis = _enumerate_bits(params.num_visible)
    hid = _enumerate_bits(params.num_hidden)
    neg_energy = (
        vis @ params.weights @ hid.T
        + (vis @ params.visible_bias)[:, None]
        + (hid @ params.hidden_bias)[None, :]
    )
    return _logsumexp(neg_energy)


def exact_partition_function(params):
    """Partition function sum_{v,h} exp(-E(v, h)), via the log-domain form."""
    return float(np.exp(exact_log_partition_function(params)))


def exact_log_likelihood(data, params):
    """Exact log-likelihood of binary rows: sum_rows [-F(row) - log Z]."""
    data = np.asarray(data, dtype=float)
    if data.ndim != 2 or data.shape[0] == 0:
        raise ValidationError(f"data must be a nonempty 2-d array, got shape {data.shape}")
    if not _is_binary(data):
        raise ValidationError("data entries must all be 0 or 1")
    log_z = exact_log_partition_function(params)
    return float(-free_energy_batch(data, params).sum() - data.shape[0] * log_z)


def reconstruction_error(v, params, rng):
    """Squared distance from v to its one-step mean reconstruction.

    Samples h from p(h|v), then compares v with the mean-field visible
    probabilities p(v|h). Stochastic through the single hidden draw.
    """
    v = _as_vector(v, params.num_visible, "visible vector")
    h = sample_bits(hidden_probs(v, params), rng)
    recon = visible_probs(h, params)
    diff = v - recon
    return float(diff @ diff)


# --- serialization ---------------------------------------------------------
#
# RBM1 layout, little-endian throughout:
#   magic "RBM1"
#   uint32 m, uint32 n
#   float64 learning_rate, momentum, weight_decay, init_weight_scale
#   uint32 epochs, uint32 hidden_units, uint64 seed
#   float64[m*n] weights row-major, float64[m] visible_bias, float64[n] hidden_bias
#
# Round trips are bit-exact: arrays are dumped and restored as raw float64.

RBM_MAGIC = b"RBM1"
_DIMS = struct.Struct("<II")
_CONFIG = struct.Struct("<ddddIIQ")


def rbm_to_bytes(params, config):
    """Serialize parameters plus their training config to an RBM1 block."""
    if not isinstance(config, TrainConfig):
        raise ValidationError(f"config must be a TrainConfig, got {type(config).__name__}")
    parts = [
        RBM_MAGIC,
        _DIMS.pack(params.num_visible, params.num_hidden),
        _CONFIG.pack(
            config.learning_rate,
            config.momentum,
            config.weight_decay,
            config.init_weight_scale,
            config.epochs,
            config.hidden_units,
            config.seed,
        ),
        np.ascontiguousarray(params.weights, dtype="<f8").tobytes(),
        np.ascontiguousarray(params.visible_bias, dtype="<f8").tobytes(),
        np.ascontiguousarray(params.hidden_bias, dtype="<f8").tobytes(),
    ]
    return b"".join(parts)


def rbm_from_bytes(buf):
    """Parse an RBM1 block back into (RbmParams, TrainConfig)."""
    if len(buf) < len(RBM_MAGIC) or buf[: len(RBM_MAGIC)] != RBM_MAGIC:
        raise FormatError(f"bad magic: expected {RBM_MAGIC!r}")
    offset = len(RBM_MAGIC)

    def take(size, what):
        nonlocal offset
        if offset + size > len(buf):
            raise FormatError(f"truncated RBM1 block while reading {what}")
        piece = buf[offset : offset + size]
        offset += size
        return piece

    m, n = _DIMS.unpack(take(_DIMS.size, "dimensions"))
    lr, momentum, weight_decay, init_scale, epochs, hidden_units, seed = _CONFIG.unpack(
        take(_CONFIG.size, "training config")
    )
    weights = np.frombuffer(take(8 * m * n, "weights"), dtype="<f8").reshape(m, n).copy()
    visible_bias = np.frombuffer(take(8 * m, "visible bias"), dtype="<f8").copy()
    hidden_bias = np.frombuffer(take(8 * n, "hidden bias"), dtype="<f8").copy()
    if offset != len(buf):
        raise FormatError(f"{len(buf) - offset} trailing bytes after RBM1 block")
    config = TrainConfig(
        learning_rate=lr,
        momentum=momentum,
        epochs=int(epochs),
        hidden_units=int(hidden_units),
        weight_decay=weight_decay,
        seed=int(seed),
        init_weight_scale=init_scale,
    )
    return RbmParams(weights=weights, visible_bias=visible_bias, hidden_bias=hidden_bias), config


def save_rbm(path, params, config):
    """Write an RBM1 file."""
    with open(path, "wb") as fh:
        fh.write(rbm_to_bytes(params, config))


def load_rbm(path):
    """Read an RBM1 file back into (RbmParams, TrainConfig)."""
    with open(path, "rb") as fh:
        return rbm_from_bytes(fh.read())
