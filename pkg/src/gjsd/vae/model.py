"""MLP variational autoencoder: architecture, parameters, forward passes.

The model is a plain dict of float64 arrays so that the optimizer, the
finite-difference gradient checker, and serialization all see the same flat
parameter space. Encoder and decoder are tanh MLPs; the decoder output layer
is a sigmoid so reconstructions live in [0,1] like the data. The variational
posterior is diagonal-Gaussian: two linear heads produce mu(x) and
log sigma^2(x).
"""

import dataclasses
import enum

import numpy as np

from ..errors import InputError


class DecoderOutput(enum.Enum):
    """Reconstruction likelihood attached to the decoder output."""

    MSE = "mse"
    BERNOULLI = "bernoulli"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InputError(
                f"unknown decoder output {value!r}; expected 'mse' or 'bernoulli'"
            ) from None


@dataclasses.dataclass(frozen=True)
class VaeArch:
    """Network shape: input_dim -> hidden_dims -> latent_dim and back.

    The decoder mirrors the encoder (hidden_dims reversed). The latent
    space cannot be wider than the input.
    """

    input_dim: int
    hidden_dims: tuple
    latent_dim: int
    decoder_output: DecoderOutput = DecoderOutput.MSE

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        object.__setattr__(self, "decoder_output", DecoderOutput.coerce(self.decoder_output))
        if int(self.input_dim) <= 0:
            raise InputError(f"input_dim must be positive, got {self.input_dim}")
        if int(self.latent_dim) <= 0:
            raise InputError(f"latent_dim must be positive, got {self.latent_dim}")
        if any(h <= 0 for h in self.hidden_dims):
            raise InputError(f"hidden_dims must be positive, got {self.hidden_dims}")
        if int(self.latent_dim) > int(self.input_dim):
            raise InputError(
                f"latent_dim {self.latent_dim} exceeds input_dim {self.input_dim}"
            )
        object.__setattr__(self, "input_dim", int(self.input_dim))
        object.__setattr__(self, "latent_dim", int(self.latent_dim))

    def layer_shapes(self):
        """Ordered (name, (out_dim, in_dim)) pairs for every weight matrix.

        Bias names replace the trailing _W with _b and have shape (out_dim,).
        The fixed order makes initialization and optimizer state deterministic.
        """
        shapes = []
        prev = self.input_dim
        for i, h in enumerate(self.hidden_dims):
            shapes.append((f"enc{i}_W", (h, prev)))
            prev = h
        shapes.append(("mu_W", (self.latent_dim, prev)))
        shapes.append(("lv_W", (self.latent_dim, prev)))
        prev = self.latent_dim
        for i, h in enumerate(reversed(self.hidden_dims)):
            shapes.append((f"dec{i}_W", (h, prev)))
            prev = h
        shapes.append(("out_W", (self.input_dim, prev)))
        return shapes


class VaeModel:
    """Parameter container plus forward passes.

    Parameters live in `params`, a name -> float64 array dict in the fixed
    order of VaeArch.layer_shapes(). Mutated only by the trainer; everything
    returned to callers is freshly allocated.
    """

    def __init__(self, arch: VaeArch, params: dict):
        self.arch = arch
        self.params = params

    @classmethod
    def init(cls, arch: VaeArch, seed: int) -> "VaeModel":
        """Fresh model: weights uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.

        Draw order follows layer_shapes(), so a seed pins every parameter.
        """
        rng = np.random.default_rng(seed)
        params = {}
        for name, (out_dim, in_dim) in arch.layer_shapes():
            bound = 1.0 / np.sqrt(in_dim)
            params[name] = rng.uniform(-bound, bound, size=(out_dim, in_dim))
            params[name[:-2] + "_b"] = np.zeros(out_dim)
        return cls(arch, params)

    def copy(self) -> "VaeModel":
        return VaeModel(self.arch, {k: v.copy() for k, v in self.params.items()})

    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())

    def _check_input(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.arch.input_dim:
            raise InputError(
                f"expected a (batch, {self.arch.input_dim}) matrix, got shape {x.shape}"
            )
        return x

    def encode(self, x):
        """Variational posterior parameters for a batch.

        Args:
            x: (batch, input_dim) matrix.

        Returns:
            (mu, log_var), each (batch, latent_dim).
        """
        x = self._check_input(x)
        p = self.params
        h = x
        for i in range(len(self.arch.hidden_dims)):
            h = np.tanh(h @ p[f"enc{i}_W"].T + p[f"enc{i}_b"])
        mu = h @ p["mu_W"].T + p["mu_b"]
        lv = h @ p["lv_W"].T + p["lv_b"]
        return mu, lv

    def decode_logits(self, z):
        """Pre-sigmoid decoder outputs, (batch, input_dim)."""
        z = np.asarray(z, dtype=np.float64)
        if z.ndim != 2 or z.shape[1] != self.arch.latent_dim:
            raise InputError(
                f"expected a (batch, {self.arch.latent_dim}) latent matrix, got shape {z.shape}"
            )
        p = self.params
        d = z
        for i in range(len(self.arch.hidden_dims)):
            d = np.tanh(d @ p[f"dec{i}_W"].T + p[f"dec{i}_b"])
        return d @ p["out_W"].T + p["out_b"]

    def decode(self, z):
        """Decoded reconstructions in (0,1), shape (batch, input_dim)."""
        return _sigmoid(self.decode_logits(z))

    def reconstruct(self, x):
        """Deterministic reconstruction through the posterior mean."""
        mu, _ = self.encode(x)
        return self.decode(mu)


def _sigmoid(u):
    # Branch on sign to avoid overflow in exp for large |u|.
    out = np.empty_like(u)
    pos = u >= 0.0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    eu = np.exp(u[~pos])
    out[~pos] = eu / (1.0 + eu)
    return out


def reparam_sample(mu, log_var, seed):
    """Reparameterized posterior draw z = mu + sigma * eps, eps ~ N(0, I).

    Args:
        mu: (batch, latent_dim) posterior means.
        log_var: matching log-variances.
        seed: integer; fixes eps.

    Returns:
        (batch, latent_dim) latent samples.
    """
    mu = np.asarray(mu, dtype=np.float64)
    log_var = np.asarray(log_var, dtype=np.float64)
    if mu.shape != log_var.shape:
        raise InputError(f"mu shape {mu.shape} != log_var shape {log_var.shape}")
    eps = np.random.default_rng(seed).standard_normal(mu.shape)
    return mu + np.exp(0.5 * log_var) * eps
