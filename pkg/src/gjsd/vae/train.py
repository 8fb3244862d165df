"""Training loop: Adam over minibatches, per-epoch eval, JSONL records.

Deterministic by construction: a single RNG seeded from the config drives
the shuffles and the reparameterization noise in a fixed order, and the
evaluation passes use the posterior mean ("sampling the mean with no
variance") unless the config asks for sampled evaluation.
"""

import dataclasses
import enum
import hashlib
import json
import pathlib
import time

import numpy as np

from ..divergence import DivergenceSpec, Family
from ..errors import InputError, TrainDivergedError
from .losses import loss_and_grads, loss_values

_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8


class EvalMode(enum.Enum):
    """How the per-epoch evaluation passes draw latents."""

    SAMPLE_LATENT = "sample-latent"
    MEAN_LATENT = "mean-latent"

    @classmethod
    def coerce(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InputError(
                f"unknown eval mode {value!r}; expected 'sample-latent' or 'mean-latent'"
            ) from None


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Everything a training run depends on; hashable to a config digest."""

    reg: DivergenceSpec
    batch_size: int = 64
    epochs: int = 20
    lr: float = 1e-3
    seed: int = 0
    dataset_path: str = ""
    eval_mode: EvalMode = EvalMode.MEAN_LATENT

    def __post_init__(self):
        object.__setattr__(self, "eval_mode", EvalMode.coerce(self.eval_mode))
        if int(self.batch_size) <= 0:
            raise InputError(f"batch_size must be positive, got {self.batch_size}")
        if int(self.epochs) <= 0:
            raise InputError(f"epochs must be positive, got {self.epochs}")
        if not (np.isfinite(self.lr) and self.lr > 0.0):
            raise InputError(f"lr must be a positive real, got {self.lr}")
        object.__setattr__(self, "batch_size", int(self.batch_size))
        object.__setattr__(self, "epochs", int(self.epochs))
        object.__setattr__(self, "lr", float(self.lr))
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self):
        reg = self.reg
        return {
            "reg": {
                "family": reg.family.value,
                "alpha": reg.alpha,
                "lambda_skew": reg.lambda_skew,
                "convention": reg.convention.value if reg.convention else None,
                "weight": reg.weight,
                "mmd_bandwidth": reg.mmd_bandwidth,
            },
            "batch_size": self.batch_size,
            "epochs": self.epochs,
            "lr": self.lr,
            "seed": self.seed,
            "dataset_path": str(self.dataset_path),
            "eval_mode": self.eval_mode.value,
        }


def config_hash(payload) -> str:
    """sha256 hex digest of a canonical-JSON rendering.

    Accepts a TrainConfig or any JSON-serializable object; used both for
    TrainRecord tagging and for CLI output manifests.
    """
    if isinstance(payload, TrainConfig):
        payload = payload.to_dict()
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclasses.dataclass
class TrainRecord:
    """Per-epoch loss curves plus the config digest and wall time."""

    train_recon: list
    train_div: list
    test_recon: list
    test_div: list
    config_hash: str
    wall_time_s: float

    @property
    def n_epochs(self):
        return len(self.train_recon)

    def final(self):
        """Last-epoch metrics as a dict; InputError if no epoch completed."""
        if not self.train_recon:
            raise InputError("record holds no completed epochs")
        return {
            "train_recon": self.train_recon[-1],
            "train_div": self.train_div[-1],
            "test_recon": self.test_recon[-1],
            "test_div": self.test_div[-1],
        }

    def save_jsonl(self, path):
        """One epoch per line, then a trailer line with hash and wall time."""
        path = pathlib.Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            for i in range(self.n_epochs):
                fh.write(
                    json.dumps(
                        {
                            "epoch": i,
                            "train_recon": self.train_recon[i],
                            "train_div": self.train_div[i],
                            "test_recon": self.test_recon[i],
                            "test_div": self.test_div[i],
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
            fh.write(
                json.dumps(
                    {"config_hash": self.config_hash, "wall_time_s": self.wall_time_s},
                    sort_keys=True,
                )
                + "\n"
            )

    @classmethod
    def load_jsonl(cls, path):
        path = pathlib.Path(path)
        if not path.is_file():
            raise InputError(f"record file not found: {path}")
        epochs = []
        trailer = None
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                if "config_hash" in row:
                    trailer = row
                else:
                    epochs.append(row)
        if trailer is None:
            raise InputError(f"{path} has no trailer line with the config hash")
        epochs.sort(key=lambda r: r["epoch"])
        return cls(
            train_recon=[r["train_recon"] for r in epochs],
            train_div=[r["train_div"] for r in epochs],
            test_recon=[r["test_recon"] for r in epochs],
            test_div=[r["test_div"] for r in epochs],
            config_hash=trailer["config_hash"],
            wall_time_s=trailer["wall_time_s"],
        )


def _check_dataset(model, rows, name):
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != model.arch.input_dim:
        raise InputError(
            f"{name} rows must be (n, {model.arch.input_dim}), got shape {rows.shape}"
        )
    if rows.size == 0:
        raise InputError(f"{name} dataset is empty")
    if not np.all(np.isfinite(rows)) or rows.min() < 0.0 or rows.max() > 1.0:
        raise InputError(f"{name} rows must lie in [0,1]")
    return rows


def _eval_pass(model, rows, reg, mode, seed_entropy):
    """Full-set (recon, div) under the eval mode, deterministic per entropy."""
    rng = np.random.default_rng(seed_entropy)
    eps = None
    if mode is EvalMode.SAMPLE_LATENT:
        eps = rng.standard_normal((rows.shape[0], model.arch.latent_dim))
    prior = None
    if reg.family is Family.MMD:
        prior = rng.standard_normal((rows.shape[0], model.arch.latent_dim))
    recon, div, _ = loss_values(model, rows, reg, eps=eps, prior_draws=prior)
    return recon, div


def train(model, data, cfg: TrainConfig):
    """Train a copy of the model; the input model is left untouched.

    Args:
        model: initialized VaeModel.
        data: (train_rows, test_rows) matrices with values in [0,1].
        cfg: TrainConfig; cfg.seed pins shuffles and noise.

    Returns:
        (trained VaeModel, TrainRecord).

    Raises:
        TrainDivergedError: non-finite loss; carries the partial record
            (epochs completed before the failing batch).
    """
    train_rows, test_rows = data
    train_rows = _check_dataset(model, train_rows, "train")
    test_rows = _check_dataset(model, test_rows, "test")
    work = model.copy()
    rng = np.random.default_rng(cfg.seed)
    digest = config_hash(cfg)
    adam_m = {k: np.zeros_like(v) for k, v in work.params.items()}
    adam_v = {k: np.zeros_like(v) for k, v in work.params.items()}
    step = 0
    curves = {"train_recon": [], "train_div": [], "test_recon": [], "test_div": []}
    start = time.perf_counter()

    def partial_record():
        return TrainRecord(
            train_recon=curves["train_recon"],
            train_div=curves["train_div"],
            test_recon=curves["test_recon"],
            test_div=curves["test_div"],
            config_hash=digest,
            wall_time_s=time.perf_counter() - start,
        )

    n = train_rows.shape[0]
    latent = work.arch.latent_dim
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            xb = train_rows[perm[lo : lo + cfg.batch_size]]
            eps = rng.standard_normal((xb.shape[0], latent))
            prior = None
            if cfg.reg.family is Family.MMD:
                prior = rng.standard_normal((xb.shape[0], latent))
            # Divergence is detected by the finite check, not by warnings.
            with np.errstate(all="ignore"):
                _, _, total, grads = loss_and_grads(
                    work, xb, cfg.reg, eps=eps, prior_draws=prior
                )
                if not np.isfinite(total):
                    raise TrainDivergedError(
                        f"non-finite loss at epoch {epoch}, batch offset {lo}",
                        partial_record(),
                    )
                step += 1
                bc1 = 1.0 - _ADAM_B1 ** step
                bc2 = 1.0 - _ADAM_B2 ** step
                for name, g in grads.items():
                    m = adam_m[name]
                    v = adam_v[name]
                    m *= _ADAM_B1
                    m += (1.0 - _ADAM_B1) * g
                    v *= _ADAM_B2
                    v += (1.0 - _ADAM_B2) * g * g
                    work.params[name] -= cfg.lr * (m / bc1) / (np.sqrt(v / bc2) + _ADAM_EPS)
        tr_recon, tr_div = _eval_pass(
            work, train_rows, cfg.reg, cfg.eval_mode, [cfg.seed, 1_000_000 + epoch]
        )
        te_recon, te_div = _eval_pass(
            work, test_rows, cfg.reg, cfg.eval_mode, [cfg.seed, 3_000_000 + epoch]
        )
        if not all(np.isfinite([tr_recon, tr_div, te_recon, te_div])):
            raise TrainDivergedError(
                f"non-finite evaluation loss after epoch {epoch}", partial_record()
            )
        curves["train_recon"].append(tr_recon)
        curves["train_div"].append(tr_div)
        curves["test_recon"].append(te_recon)
        curves["test_div"].append(te_div)
    return work, partial_record()
