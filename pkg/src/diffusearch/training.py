"""Training loops: conditional discrete-diffusion denoising with frozen state
tokens, plus the autoregressive and direct-prediction baselines.

All losses are reported per supervised position (non-pad future tokens), so an
untrained uniform model sits at ln(K_data) for the baselines and at
sum_t lambda_t (1 - alpha_t) / T * ln(K_data) for absorbing diffusion.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
import torch

from .codec import Vocabulary, sequence_length
from .diffusion import DiffusionSchedule
from .model import Denoiser, ModelConfig, save_checkpoint

STATE_LEN = 77


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainConfig:
    paradigm: str = "s-asa"
    h: int = 4
    kind: str = "diffusion"  # "diffusion" | "autoregressive" | "direct"
    T: int = 20
    noise_kind: str = "absorbing"
    lambda_variant: str = "linear"
    lr: float = 3e-4
    batch_size: int = 64
    max_epochs: int = 50
    patience: int = 5
    seed: int = 0
    val_fraction: float = 0.0
    layers: int = 8
    width: int = 256
    heads: int = 8
    ff_mult: int = 4

    def model_config(self, vocab: Vocabulary) -> ModelConfig:
        causal = self.kind == "autoregressive"
        return ModelConfig(
            vocab_size=vocab.size,
            max_seq_len=sequence_length(self.paradigm, self.h),
            mask_id=vocab.mask_id,
            layers=self.layers,
            width=self.width,
            heads=self.heads,
            ff_mult=self.ff_mult,
            attention_mode="causal" if causal else "bidirectional",
            timestep_conditioning="embedding" if self.kind == "diffusion" else "none",
            max_timesteps=self.T,
        )

    def schedule(self, vocab: Vocabulary) -> DiffusionSchedule:
        return DiffusionSchedule.linear(
            T=self.T,
            num_categories=vocab.size,
            noise_kind=self.noise_kind,
            lambda_variant=self.lambda_variant,
            mask_id=vocab.mask_id,
        )


def corrupt_batch(
    batch: np.ndarray,
    state_len: int,
    schedule: DiffusionSchedule,
    rng: np.random.Generator,
    pad_id: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample per-sequence timesteps and corrupt future (non-pad) positions.

    Returns (x_t, t, future_mask). State tokens and pads are never touched.
    """
    b, n = batch.shape
    t = rng.integers(1, schedule.T + 1, size=b)
    future = np.zeros((b, n), dtype=bool)
    future[:, state_len:] = batch[:, state_len:] != pad_id
    keep = rng.random((b, n)) < schedule.alpha[t][:, None]
    if schedule.noise_kind == "absorbing":
        noise = np.full((b, n), schedule.mask_id, dtype=batch.dtype)
    else:
        noise = rng.integers(0, schedule.num_categories, size=(b, n)).astype(batch.dtype)
    x_t = np.where(future & ~keep, noise, batch)
    return x_t, t, future


def diffusion_loss(
    model: Denoiser,
    x0: torch.Tensor,
    x_t: torch.Tensor,
    t: torch.Tensor,
    future_mask: torch.Tensor,
    lam: torch.Tensor,
    state_len: int = STATE_LEN,
) -> torch.Tensor:
    """Reweighted masked cross-entropy, averaged over all supervised positions.

    The head only runs over the future span; state positions carry no loss.
    """
    hidden = model.hidden(x_t, t)
    logits = model.logits_from_hidden(hidden[:, state_len:])
    log_probs = torch.log_softmax(logits, dim=-1)
    targets = x0[:, state_len:]
    nll = -log_probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    corrupted = future_mask[:, state_len:] & (x_t[:, state_len:] != targets)
    weighted = torch.where(corrupted, nll * lam[:, None], torch.zeros_like(nll))
    denom = future_mask.sum().clamp(min=1)
    return weighted.sum() / denom


def train_step(
    model: Denoiser,
    optimizer: torch.optim.Optimizer,
    batch: np.ndarray,
    state_len: int,
    schedule: DiffusionSchedule,
    rng: np.random.Generator,
    pad_id: int,
) -> float:
    """One optimizer update of the conditional diffusion objective."""
    x_t_np, t_np, future_np = corrupt_batch(batch, state_len, schedule, rng, pad_id)
    x0 = torch.from_numpy(np.ascontiguousarray(batch)).long()
    x_t = torch.from_numpy(x_t_np).long()
    t = torch.from_numpy(t_np).long()
    future = torch.from_numpy(future_np)
    lam = torch.from_numpy(schedule.lam[t_np]).float()

    model.train()
    loss = diffusion_loss(model, x0, x_t, t, future, lam)
    if not torch.isfinite(loss):
        raise TrainingDiverged(f"non-finite diffusion loss at t={t_np.tolist()}")
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def autoregressive_loss(
    model: Denoiser, x0: torch.Tensor, state_len: int, pad_id: int
) -> torch.Tensor:
    """Next-token cross-entropy over the future span, conditioning on the state prefix."""
    hidden = model.hidden(x0[:, :-1])
    # Position n-1 predicts token n; only future targets (n >= state_len) count.
    logits = model.logits_from_hidden(hidden[:, state_len - 1 :])
    log_probs = torch.log_softmax(logits, dim=-1)
    targets = x0[:, state_len:]
    nll = -log_probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    supervised = targets != pad_id
    denom = supervised.sum().clamp(min=1)
    return torch.where(supervised, nll, torch.zeros_like(nll)).sum() / denom


def train_autoregressive(
    model: Denoiser,
    optimizer: torch.optim.Optimizer,
    batch: np.ndarray,
    state_len: int,
    pad_id: int,
) -> float:
    x0 = torch.from_numpy(np.ascontiguousarray(batch)).long()
    model.train()
    loss = autoregressive_loss(model, x0, state_len, pad_id)
    if not torch.isfinite(loss):
        raise TrainingDiverged("non-finite autoregressive loss")
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def direct_loss(
    model: Denoiser, x0: torch.Tensor, state_len: int, mask_id: int, pad_id: int
) -> torch.Tensor:
    """Predict all future tokens at once from a fully-masked future."""
    future = torch.zeros_like(x0, dtype=torch.bool)
    future[:, state_len:] = x0[:, state_len:] != pad_id
    x_in = torch.where(future, torch.full_like(x0, mask_id), x0)
    hidden = model.hidden(x_in)
    logits = model.logits_from_hidden(hidden[:, state_len:])
    log_probs = torch.log_softmax(logits, dim=-1)
    targets = x0[:, state_len:]
    nll = -log_probs.gather(-1, targets.unsqueeze(-1)).squeeze(-1)
    supervised = future[:, state_len:]
    denom = supervised.sum().clamp(min=1)
    return torch.where(supervised, nll, torch.zeros_like(nll)).sum() / denom


def train_direct(
    model: Denoiser,
    optimizer: torch.optim.Optimizer,
    batch: np.ndarray,
    state_len: int,
    mask_id: int,
    pad_id: int,
) -> float:
    x0 = torch.from_numpy(np.ascontiguousarray(batch)).long()
    model.train()
    loss = direct_loss(model, x0, state_len, mask_id, pad_id)
    if not torch.isfinite(loss):
        raise TrainingDiverged("non-finite direct loss")
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    return float(loss.detach())


def expected_uniform_loss(schedule: DiffusionSchedule, k_data: int) -> float:
    """Analytic per-position diffusion loss of a uniform model under absorbing
    corruption: sum_t lambda_t (1 - alpha_t) / T * ln(K_data)."""
    lam = schedule.lam[1:]
    frac = 1.0 - schedule.alpha[1:]
    return float((lam * frac).mean() * math.log(k_data))


@dataclass
class EpochStats:
    epoch: int
    loss: float
    val_accuracy: Optional[float] = None
    seconds: float = 0.0


class Trainer:
    """Drives epochs over a token matrix, emits JSONL metrics, checkpoints each
    epoch plus the best validation action accuracy, and early-stops baselines
    after `patience` epochs without improvement.
    """

    def __init__(
        self,
        config: TrainConfig,
        vocab: Optional[Vocabulary] = None,
        out_dir: Optional[str | Path] = None,
        log_fn: Optional[Callable[[dict], None]] = None,
    ):
        self.config = config
        self.vocab = vocab or Vocabulary.default()
        self.out_dir = Path(out_dir) if out_dir else None
        if self.out_dir:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        self._log_fn = log_fn
        torch.manual_seed(config.seed)
        self.model = Denoiser(config.model_config(self.vocab))
        self.schedule = (
            self.config.schedule(self.vocab) if config.kind == "diffusion" else None
        )
        self.optimizer = torch.optim.Adam(self.model.parameters(), lr=config.lr)
        self.rng = np.random.default_rng(config.seed)
        self.history: list[EpochStats] = []
        self._metrics_fp = None
        if self.out_dir:
            self._metrics_fp = open(self.out_dir / "metrics.jsonl", "a")

    def _emit(self, event: dict) -> None:
        if self._metrics_fp:
            self._metrics_fp.write(json.dumps(event) + "\n")
            self._metrics_fp.flush()
        if self._log_fn:
            self._log_fn(event)

    def _step(self, batch: np.ndarray) -> float:
        cfg = self.config
        if cfg.kind == "diffusion":
            return train_step(
                self.model, self.optimizer, batch, STATE_LEN, self.schedule, self.rng,
                self.vocab.pad_id,
            )
        if cfg.kind == "autoregressive":
            return train_autoregressive(
                self.model, self.optimizer, batch, STATE_LEN, self.vocab.pad_id
            )
        return train_direct(
            self.model, self.optimizer, batch, STATE_LEN, self.vocab.mask_id, self.vocab.pad_id
        )

    def quick_action_accuracy(self, tokens: np.ndarray, limit: int = 256) -> float:
        """Cheap model-selection proxy: argmax at the first action position.

        Diffusion/direct models see a fully-masked future; the causal baseline
        predicts the action from the state prefix.
        """
        if len(tokens) == 0:
            return 0.0
        rows = tokens[:limit]
        x0 = torch.from_numpy(np.ascontiguousarray(rows)).long()
        action_pos = STATE_LEN
        with torch.no_grad():
            if self.config.kind == "autoregressive":
                logits = self.model.predict(x0[:, :action_pos]).logits
                pred = logits[:, -1].argmax(dim=-1)
            else:
                future = torch.zeros_like(x0, dtype=torch.bool)
                future[:, STATE_LEN:] = x0[:, STATE_LEN:] != self.vocab.pad_id
                x_in = torch.where(future, torch.full_like(x0, self.vocab.mask_id), x0)
                t = self.config.T if self.config.kind == "diffusion" else None
                logits = self.model.predict(x_in, t).logits
                pred = logits[:, action_pos].argmax(dim=-1)
        return float((pred == x0[:, action_pos]).float().mean())

    def fit(
        self, tokens: np.ndarray, val_tokens: Optional[np.ndarray] = None, max_steps: Optional[int] = None
    ) -> list[EpochStats]:
        cfg = self.config
        best_acc = -1.0
        since_best = 0
        step = 0
        for epoch in range(cfg.max_epochs):
            started = time.monotonic()
            order = self.rng.permutation(len(tokens))
            losses = []
            for lo in range(0, len(tokens), cfg.batch_size):
                batch = tokens[order[lo : lo + cfg.batch_size]]
                loss = self._step(batch)
                losses.append(loss)
                step += 1
                self._emit(
                    {"event": "step", "step": step, "epoch": epoch, "loss": loss, "lr": cfg.lr}
                )
                if max_steps is not None and step >= max_steps:
                    break
            stats = EpochStats(
                epoch=epoch,
                loss=float(np.mean(losses)) if losses else float("nan"),
                seconds=time.monotonic() - started,
            )
            if val_tokens is not None and len(val_tokens):
                stats.val_accuracy = self.quick_action_accuracy(val_tokens)
            self.history.append(stats)
            self._emit(
                {
                    "event": "epoch",
                    "epoch": epoch,
                    "loss": stats.loss,
                    "val_accuracy": stats.val_accuracy,
                    "seconds": stats.seconds,
                }
            )
            if self.out_dir:
                self._save(self.out_dir / "last.ckpt")
            if stats.val_accuracy is not None:
                if stats.val_accuracy > best_acc:
                    best_acc = stats.val_accuracy
                    since_best = 0
                    if self.out_dir:
                        self._save(self.out_dir / "best.ckpt")
                else:
                    since_best += 1
                    if cfg.kind != "diffusion" and since_best >= cfg.patience:
                        break
            if max_steps is not None and step >= max_steps:
                break
        return self.history

    def _save(self, path: Path) -> None:
        save_checkpoint(
            path,
            self.model,
            self.schedule,
            self.config.paradigm,
            self.config.h,
            self.vocab.hash,
            kind=self.config.kind,
            meta={
                "train_config": asdict(self.config),
                # Not configurable on purpose; recorded for reproducibility.
                "optimizer": "adam",
                "lr_schedule": "constant",
                "dropout": 0.0,
                "weight_decay": 0.0,
                "grad_clip": None,
                "warmup": None,
            },
        )

    def save(self, path: str | Path) -> None:
        self._save(Path(path))

    def close(self) -> None:
        if self._metrics_fp:
            self._metrics_fp.close()
