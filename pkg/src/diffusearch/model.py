"""The parametric denoiser: a GPT-2-style transformer whose causal mask can be
switched off (full attention) for diffusion denoising, or kept for the
autoregressive baselines. One trunk, one vocabulary head; value paradigms read
the value-bin slice of the same head.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional

import torch
import torch.nn as nn
import torch.nn.functional as F

from .diffusion import DiffusionSchedule

NEG_INF = float("-inf")


class ShapeError(ValueError):
    pass


class ConfigError(ValueError):
    """Checkpoint / vocabulary / schedule mismatch."""


@dataclass
class ModelConfig:
    vocab_size: int
    max_seq_len: int
    mask_id: int
    layers: int = 8
    width: int = 256
    heads: int = 8
    ff_mult: int = 4
    attention_mode: str = "bidirectional"  # "bidirectional" | "causal"
    timestep_conditioning: str = "embedding"  # "embedding" | "none"
    max_timesteps: int = 20

    def __post_init__(self) -> None:
        if self.width % self.heads != 0:
            raise ConfigError("width must be divisible by heads")
        if self.attention_mode not in ("bidirectional", "causal"):
            raise ConfigError(f"bad attention mode {self.attention_mode!r}")
        if self.timestep_conditioning not in ("embedding", "none"):
            raise ConfigError(f"bad timestep conditioning {self.timestep_conditioning!r}")


def parameter_count(config: ModelConfig) -> int:
    """Analytic parameter count; must equal the instantiated model's count."""
    w, v = config.width, config.vocab_size
    ff = config.ff_mult * w
    embeddings = v * w + config.max_seq_len * w
    if config.timestep_conditioning == "embedding":
        embeddings += (config.max_timesteps + 1) * w
    per_block = (
        2 * w  # ln1
        + w * 3 * w + 3 * w  # qkv
        + w * w + w  # attn out
        + 2 * w  # ln2
        + w * ff + ff  # mlp in
        + ff * w + w  # mlp out
    )
    head = w * v + v
    return embeddings + config.layers * per_block + 2 * w + head


@dataclass
class DenoiserOutput:
    """Per-position logits (mask category at -inf) plus derived quantities."""

    logits: torch.Tensor  # (..., L, K)

    def log_probs(self) -> torch.Tensor:
        return F.log_softmax(self.logits, dim=-1)

    def argmax_tokens(self) -> torch.Tensor:
        return self.logits.argmax(dim=-1)

    def argmax_logprob(self) -> torch.Tensor:
        """Log-probability of the argmax token at each position."""
        lp = self.log_probs()
        return lp.gather(-1, lp.argmax(dim=-1, keepdim=True)).squeeze(-1)


class _Block(nn.Module):
    def __init__(self, width: int, heads: int, ff_mult: int):
        super().__init__()
        self.ln1 = nn.LayerNorm(width)
        self.attn = nn.MultiheadAttention(width, heads, batch_first=True)
        self.ln2 = nn.LayerNorm(width)
        self.mlp = nn.Sequential(
            nn.Linear(width, ff_mult * width),
            nn.GELU(),
            nn.Linear(ff_mult * width, width),
        )

    def forward(self, x: torch.Tensor, attn_mask: Optional[torch.Tensor]) -> torch.Tensor:
        h = self.ln1(x)
        attn_out, _ = self.attn(h, h, h, attn_mask=attn_mask, need_weights=False)
        x = x + attn_out
        return x + self.mlp(self.ln2(x))


class Denoiser(nn.Module):
    """f(x_t, t; theta): tokens + timestep -> per-position categorical logits."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.token_emb = nn.Embedding(config.vocab_size, config.width)
        self.pos_emb = nn.Embedding(config.max_seq_len, config.width)
        if config.timestep_conditioning == "embedding":
            self.time_emb = nn.Embedding(config.max_timesteps + 1, config.width)
        else:
            self.time_emb = None
        self.blocks = nn.ModuleList(
            [_Block(config.width, config.heads, config.ff_mult) for _ in range(config.layers)]
        )
        self.ln_f = nn.LayerNorm(config.width)
        self.head = nn.Linear(config.width, config.vocab_size)
        self.apply(self._init_weights)

    @staticmethod
    def _init_weights(module: nn.Module) -> None:
        if isinstance(module, (nn.Linear, nn.Embedding)):
            nn.init.normal_(module.weight, mean=0.0, std=0.02)
            if isinstance(module, nn.Linear) and module.bias is not None:
                nn.init.zeros_(module.bias)

    def num_parameters(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def hidden(self, tokens: torch.Tensor, t: Optional[torch.Tensor | int] = None) -> torch.Tensor:
        """Trunk output after the final layer norm, shape (B, L, width)."""
        if tokens.dim() == 1:
            tokens = tokens.unsqueeze(0)
        batch, length = tokens.shape
        if length > self.config.max_seq_len:
            raise ShapeError(
                f"sequence length {length} exceeds max_seq_len {self.config.max_seq_len}"
            )
        pos = torch.arange(length, device=tokens.device)
        x = self.token_emb(tokens) + self.pos_emb(pos)[None, :, :]
        if self.time_emb is not None:
            if t is None:
                t = 0
            if isinstance(t, int):
                t = torch.full((batch,), t, device=tokens.device, dtype=torch.long)
            x = x + self.time_emb(t)[:, None, :]

        attn_mask = None
        if self.config.attention_mode == "causal":
            attn_mask = torch.triu(
                torch.ones(length, length, dtype=torch.bool, device=tokens.device), diagonal=1
            )
        for block in self.blocks:
            x = block(x, attn_mask)
        return self.ln_f(x)

    def logits_from_hidden(self, hidden: torch.Tensor) -> torch.Tensor:
        """Vocabulary logits with the absorbing category excluded from support."""
        logits = self.head(hidden)
        logits[..., self.config.mask_id] = NEG_INF
        return logits

    def forward(self, tokens: torch.Tensor, t: Optional[torch.Tensor | int] = None) -> torch.Tensor:
        return self.logits_from_hidden(self.hidden(tokens, t))

    @torch.no_grad()
    def predict(self, tokens: torch.Tensor, t: Optional[torch.Tensor | int] = None) -> DenoiserOutput:
        was_training = self.training
        self.eval()
        try:
            return DenoiserOutput(logits=self.forward(tokens, t))
        finally:
            self.train(was_training)


def gradient_check(
    model: Denoiser,
    loss_fn: Callable[[Denoiser], torch.Tensor],
    num_coords: int = 64,
    eps: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between autograd and central finite differences.

    Runs on a float64 copy of the model; `loss_fn` must be deterministic in
    the model parameters (fix data, timesteps and corruption outside).
    """
    ref = Denoiser(model.config).double()
    ref.load_state_dict({k: v.double() for k, v in model.state_dict().items()})
    ref.train(False)

    loss = loss_fn(ref)
    grads = torch.autograd.grad(loss, [p for p in ref.parameters() if p.requires_grad])
    params = [p for p in ref.parameters() if p.requires_grad]

    gen = torch.Generator().manual_seed(seed)
    worst = 0.0
    for _ in range(num_coords):
        p_idx = int(torch.randint(len(params), (1,), generator=gen))
        param = params[p_idx]
        flat_idx = int(torch.randint(param.numel(), (1,), generator=gen))
        with torch.no_grad():
            original = param.view(-1)[flat_idx].item()
            param.view(-1)[flat_idx] = original + eps
            up = loss_fn(ref).item()
            param.view(-1)[flat_idx] = original - eps
            down = loss_fn(ref).item()
            param.view(-1)[flat_idx] = original
        numeric = (up - down) / (2 * eps)
        analytic = grads[p_idx].view(-1)[flat_idx].item()
        scale = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / scale)
    return worst


CHECKPOINT_VERSION = 1


def save_checkpoint(
    path: str | Path,
    model: Denoiser,
    schedule: Optional[DiffusionSchedule],
    paradigm: str,
    h: int,
    vocab_hash: str,
    kind: str,
    meta: Optional[dict] = None,
) -> None:
    """Versioned checkpoint: config + schedule + vocabulary hash + weights."""
    payload = {
        "version": CHECKPOINT_VERSION,
        "kind": kind,
        "model_config": asdict(model.config),
        "schedule": schedule.to_config() if schedule is not None else None,
        "paradigm": paradigm,
        "h": h,
        "vocab_hash": vocab_hash,
        "meta": meta or {},
        "state_dict": model.state_dict(),
    }
    torch.save(payload, str(path))


def load_checkpoint(path: str | Path, vocab_hash: str) -> dict:
    """Load and validate a checkpoint. Returns the payload with a live model
    under 'model' and a schedule object under 'schedule' (None for baselines).
    """
    payload = torch.load(str(path), map_location="cpu", weights_only=False)
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"unsupported checkpoint version {payload.get('version')}")
    if payload["vocab_hash"] != vocab_hash:
        raise ConfigError("checkpoint was built against a different vocabulary")
    config = ModelConfig(**payload["model_config"])
    model = Denoiser(config)
    try:
        model.load_state_dict(payload["state_dict"], strict=True)
    except RuntimeError as exc:
        raise ConfigError(f"weights do not match the stored config: {exc}") from exc
    model.eval()
    payload["model"] = model
    payload["schedule"] = (
        DiffusionSchedule.from_config(payload["schedule"]) if payload["schedule"] else None
    )
    return payload
