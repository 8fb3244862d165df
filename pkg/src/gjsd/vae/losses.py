"""VAE training loss: reconstruction + weighted divergence, with analytic gradients.

The loss is total = recon + weight * div. recon is the per-example sum of
squared errors (MSE head) or Bernoulli negative log-likelihood, averaged over
the batch. div is the batch mean of the per-example diagonal closed form
against the N(0, I) prior (KL both directions, gjs_diag, gjs_dual_diag), or
the unbiased squared MMD between reparameterized latents and prior draws.

Backpropagation is hand-written. The divergence values are computed by the
divergence module itself, so the training-loop term matches the standalone
closed forms bitwise; only the gradients are local. grad_check validates the
whole analytic gradient against central finite differences.
"""

import numpy as np

from ..backend import get_kernels
from ..divergence import (
    DivergenceSpec,
    Family,
    gjs_diag,
    gjs_dual_diag,
    kl_diag_forward,
    kl_diag_reverse,
)
from ..errors import InputError
from ..gaussian import effective_skew
from .model import DecoderOutput, _sigmoid

_SUPPORTED = (
    Family.KL_FORWARD,
    Family.KL_REVERSE,
    Family.GJS,
    Family.GJS_DUAL,
    Family.MMD,
)


def _check_family(reg: DivergenceSpec):
    if reg.family not in _SUPPORTED:
        raise InputError(
            f"family {reg.family.value} is not a supported VAE regularizer; "
            f"expected one of {[f.value for f in _SUPPORTED]}"
        )


def _forward_state(model, x, eps):
    """Forward pass with per-layer caches for backprop.

    eps None means mean-latent evaluation: z = mu, no noise path.

    Returns:
        dict with hs (encoder activations, hs[0] = x), mu, lv, sig_eps, z,
        ds (decoder activations, ds[0] = z), logits, out.
    """
    p = model.params
    n_hidden = len(model.arch.hidden_dims)
    hs = [x]
    for i in range(n_hidden):
        hs.append(np.tanh(hs[-1] @ p[f"enc{i}_W"].T + p[f"enc{i}_b"]))
    mu = hs[-1] @ p["mu_W"].T + p["mu_b"]
    lv = hs[-1] @ p["lv_W"].T + p["lv_b"]
    if eps is None:
        sig_eps = None
        z = mu
    else:
        eps = np.asarray(eps, dtype=np.float64)
        if eps.shape != mu.shape:
            raise InputError(f"eps shape {eps.shape} != posterior shape {mu.shape}")
        sig_eps = np.exp(0.5 * lv) * eps
        z = mu + sig_eps
    ds = [z]
    for i in range(n_hidden):
        ds.append(np.tanh(ds[-1] @ p[f"dec{i}_W"].T + p[f"dec{i}_b"]))
    logits = ds[-1] @ p["out_W"].T + p["out_b"]
    return {
        "hs": hs,
        "mu": mu,
        "lv": lv,
        "sig_eps": sig_eps,
        "z": z,
        "ds": ds,
        "logits": logits,
        "out": _sigmoid(logits),
    }


def _recon_value(arch, x, state):
    """Batch-mean reconstruction loss for the decoder's likelihood."""
    b = x.shape[0]
    if arch.decoder_output is DecoderOutput.MSE:
        diff = state["out"] - x
        return float(np.sum(diff * diff)) / b
    # Bernoulli NLL per element: softplus(u) - x u, stable in the logits.
    logits = state["logits"]
    return float(np.sum(np.logaddexp(0.0, logits) - x * logits)) / b


def _div_value(reg, state, prior_draws):
    """Batch-mean divergence value, reusing the divergence module's forms."""
    if reg.family is Family.MMD:
        if prior_draws is None:
            raise InputError("MMD regularizer needs prior_draws")
        y = np.asarray(prior_draws, dtype=np.float64)
        return get_kernels().mmd2_unbiased(state["z"], y, reg.mmd_bandwidth)
    mu, lv = state["mu"], state["lv"]
    if reg.family is Family.KL_REVERSE:
        return float(np.mean(kl_diag_reverse(mu, lv)))
    if reg.family is Family.KL_FORWARD:
        return float(np.mean(kl_diag_forward(mu, lv)))
    if reg.family is Family.GJS:
        return float(np.mean(gjs_diag(mu, reg.alpha, reg.convention, lv)))
    return float(np.mean(gjs_dual_diag(mu, reg.alpha, reg.convention, lv)))


def _div_closed_form_grads(reg, mu, lv):
    """(mu, log_var) gradients of the batch-mean diagonal closed forms.

    Per-element derivatives of the same expressions the divergence module
    evaluates, divided by the batch size to match the mean. Notation per
    element: s = exp(lv), a = alpha, t = effective skew, d = (1-t) + t s.
    """
    b = mu.shape[0]
    s = np.exp(lv)
    if reg.family is Family.KL_REVERSE:
        return mu / b, 0.5 * (s - 1.0) / b
    if reg.family is Family.KL_FORWARD:
        return mu / (s * b), 0.5 * (1.0 - (1.0 + mu * mu) / s) / b
    a = reg.alpha
    t = effective_skew(a, reg.convention)
    d = (1.0 - t) + t * s
    if reg.family is Family.GJS:
        dmu = mu * ((1.0 - a) * t * t * s / d + a * (1.0 - t) ** 2 / (d * s)) / b
        dfds = 0.5 * (
            (1.0 - a) * t
            - a * (1.0 - t) / (s * s)
            + a / s
            - t / d
            + mu
            * mu
            * (
                (1.0 - a) * t * t * (1.0 - t) / (d * d)
                - a * (1.0 - t) ** 2 * (t * s + d) / (d * d * s * s)
            )
        )
        return dmu, s * dfds / b
    # GJS_DUAL
    num = (1.0 - a) * t * t * s + a * (1.0 - t) ** 2
    dmu = mu * num / (d * d) / b
    dhds = 0.5 * (
        (a - t) / (d * d)
        + t / d
        - a / s
        + mu * mu * ((1.0 - a) * t * t / (d * d) - 2.0 * t * num / (d ** 3))
    )
    return dmu, s * dhds / b


def loss_values(model, x, reg: DivergenceSpec, *, eps=None, prior_draws=None):
    """Loss terms without gradients: (recon, div, total).

    Args:
        model: VaeModel.
        x: (batch, input_dim) data matrix.
        reg: divergence regularizer spec.
        eps: (batch, latent_dim) reparameterization noise, or None for
            mean-latent evaluation (z = mu).
        prior_draws: (n, latent_dim) prior samples; required for MMD.
    """
    _check_family(reg)
    x = model._check_input(x)
    state = _forward_state(model, x, eps)
    recon = _recon_value(model.arch, x, state)
    div = _div_value(reg, state, prior_draws)
    return recon, div, recon + reg.weight * div


def loss_and_grads(model, x, reg: DivergenceSpec, *, eps=None, prior_draws=None):
    """Loss terms and the full analytic parameter gradient of the total.

    Args:
        model: VaeModel.
        x: (batch, input_dim) data matrix.
        reg: divergence regularizer spec.
        eps: (batch, latent_dim) reparameterization noise, or None for
            mean-latent evaluation (z = mu, no noise gradient).
        prior_draws: (n, latent_dim) prior samples; required for MMD.

    Returns:
        (recon, div, total, grads) with grads a name -> array dict matching
        model.params.
    """
    _check_family(reg)
    x = model._check_input(x)
    p = model.params
    arch = model.arch
    b = x.shape[0]
    n_hidden = len(arch.hidden_dims)
    state = _forward_state(model, x, eps)
    hs, ds = state["hs"], state["ds"]
    mu, lv, sig_eps = state["mu"], state["lv"], state["sig_eps"]
    out = state["out"]
    recon = _recon_value(arch, x, state)

    if arch.decoder_output is DecoderOutput.MSE:
        # d recon / d logits through the sigmoid.
        dlogits = (2.0 / b) * (out - x) * out * (1.0 - out)
    else:
        dlogits = (out - x) / b

    grads = {}
    grads["out_W"] = dlogits.T @ ds[-1]
    grads["out_b"] = dlogits.sum(axis=0)
    dd = dlogits @ p["out_W"]
    for i in range(n_hidden - 1, -1, -1):
        dc = dd * (1.0 - ds[i + 1] * ds[i + 1])
        grads[f"dec{i}_W"] = dc.T @ ds[i]
        grads[f"dec{i}_b"] = dc.sum(axis=0)
        dd = dc @ p[f"dec{i}_W"]
    dz = dd

    if reg.family is Family.MMD:
        if prior_draws is None:
            raise InputError("MMD regularizer needs prior_draws")
        y = np.asarray(prior_draws, dtype=np.float64)
        div, dz_div = get_kernels().mmd2_unbiased_grad_x(state["z"], y, reg.mmd_bandwidth)
        dz = dz + reg.weight * dz_div
        dmu_div = 0.0
        dlv_div = 0.0
    else:
        div = _div_value(reg, state, None)
        dmu_div, dlv_div = _div_closed_form_grads(reg, mu, lv)

    dmu = dz + reg.weight * dmu_div
    if sig_eps is None:
        dlv = np.zeros_like(lv) + reg.weight * dlv_div
    else:
        # z = mu + exp(lv/2) eps, so dz/dlv = sig_eps / 2.
        dlv = dz * 0.5 * sig_eps + reg.weight * dlv_div

    grads["mu_W"] = dmu.T @ hs[-1]
    grads["mu_b"] = dmu.sum(axis=0)
    grads["lv_W"] = dlv.T @ hs[-1]
    grads["lv_b"] = dlv.sum(axis=0)
    dh = dmu @ p["mu_W"] + dlv @ p["lv_W"]
    for i in range(n_hidden - 1, -1, -1):
        da = dh * (1.0 - hs[i + 1] * hs[i + 1])
        grads[f"enc{i}_W"] = da.T @ hs[i]
        grads[f"enc{i}_b"] = da.sum(axis=0)
        dh = da @ p[f"enc{i}_W"]

    total = recon + reg.weight * div
    return recon, div, total, grads


def _draw_noise(model, x, reg, seed):
    """Reparameterization noise and (for MMD) prior draws from one seed."""
    rng = np.random.default_rng(seed)
    eps = rng.standard_normal((x.shape[0], model.arch.latent_dim))
    prior = None
    if reg.family is Family.MMD:
        prior = rng.standard_normal((x.shape[0], model.arch.latent_dim))
    return eps, prior


def loss(model, x, reg: DivergenceSpec, seed, *, mean_latent=False):
    """Loss terms for a batch: (recon, div, total), total = recon + weight * div.

    Args:
        model: VaeModel.
        x: (batch, input_dim) data matrix.
        reg: divergence regularizer spec.
        seed: fixes the reparameterization noise (and MMD prior draws).
        mean_latent: evaluate with z = mu ("sampling the mean with no
            variance"); MMD prior draws still come from the seed.

    Returns:
        (recon, div, total) floats.
    """
    x = model._check_input(x)
    eps, prior = _draw_noise(model, x, reg, seed)
    if mean_latent:
        eps = None
    return loss_values(model, x, reg, eps=eps, prior_draws=prior)


def grad_check(model, x, reg: DivergenceSpec, seed, eps=1e-5, n_checks=50):
    """Worst relative error between analytic and central-FD gradients.

    Perturbs n_checks randomly chosen scalar parameters by +/- eps with the
    reparameterization noise held fixed, so the total loss is a deterministic
    function of the parameters.

    Args:
        model: VaeModel (small; every FD probe costs two forward passes).
        x: (batch, input_dim) data matrix.
        reg: divergence regularizer spec.
        seed: fixes both the noise draws and the parameter choice.
        eps: central-difference step.
        n_checks: number of scalar parameters to probe.

    Returns:
        max over probed parameters of |analytic - numeric| /
        (|analytic| + |numeric| + 1e-8).
    """
    work = model.copy()
    x = work._check_input(x)
    noise, prior = _draw_noise(work, x, reg, seed)
    _, _, _, grads = loss_and_grads(work, x, reg, eps=noise, prior_draws=prior)

    names = list(work.params)
    sizes = np.array([work.params[k].size for k in names])
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    rng = np.random.default_rng(seed + 1)
    picks = rng.choice(offsets[-1], size=min(n_checks, int(offsets[-1])), replace=False)

    worst = 0.0
    for flat in np.sort(picks):
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[k]
        idx = np.unravel_index(int(flat - offsets[k]), work.params[name].shape)
        theta = work.params[name][idx]
        work.params[name][idx] = theta + eps
        _, _, up = loss_values(work, x, reg, eps=noise, prior_draws=prior)
        work.params[name][idx] = theta - eps
        _, _, down = loss_values(work, x, reg, eps=noise, prior_draws=prior)
        work.params[name][idx] = theta
        numeric = (up - down) / (2.0 * eps)
        analytic = grads[name][idx]
        rel = abs(analytic - numeric) / (abs(analytic) + abs(numeric) + 1e-8)
        worst = max(worst, rel)
    return worst
