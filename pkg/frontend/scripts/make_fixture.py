"""Train (once) a small diffusion checkpoint for the frontend e2e test.

The model memorizes a few hundred toy-oracle records; what the test needs is
an agent that reliably emits a full 3-step future line on arbitrary positions,
so after training we gate on that property before writing the checkpoint.
"""

import sys
import time
from pathlib import Path

import numpy as np
import torch

from diffusearch import codec, data, training
from diffusearch.chessboard import BoardState
from diffusearch.codec import Vocabulary
from diffusearch.oracle import ToyOracle
from diffusearch.sampler import SampleConfig, Sampler

OUT = Path(__file__).resolve().parents[1] / ".fixtures" / "diffusearch-tiny.ckpt"


def full_future_rate(trainer, vocab, positions) -> float:
    sampler = Sampler(trainer.model, trainer.schedule, vocab, "s-asa", 4)
    good = 0
    for state in positions:
        result = sampler.sample(state, SampleConfig(seed=0))
        good += len(result.future) == 3
    return good / len(positions)


def main() -> int:
    if OUT.exists():
        print(f"fixture already present: {OUT}")
        return 0
    OUT.parent.mkdir(parents=True, exist_ok=True)
    vocab = Vocabulary.default()
    oracle = ToyOracle()
    positions = data.sample_positions(192, seed=5)
    records = []
    for state in positions:
        record = data.rollout_future(state, 4, oracle, paradigm="s-asa")
        if all(a is not None for a in record.actions):
            records.append(record)
    tokens = np.stack([codec.assemble_sequence(r, vocab).tokens for r in records])
    print(f"training fixture on {len(records)} records")

    torch.manual_seed(0)
    config = training.TrainConfig(
        paradigm="s-asa", h=4, T=20, batch_size=32,
        layers=2, width=64, heads=4, lr=1.5e-3, seed=0,
    )
    trainer = training.Trainer(config, vocab=vocab)
    started = time.time()
    probes = data.sample_positions(24, seed=6)
    rng = np.random.default_rng(0)
    step = 0
    while True:
        order = rng.permutation(len(tokens))
        for lo in range(0, len(tokens), 32):
            trainer._step(tokens[order[lo : lo + 32]])
            step += 1
        if step >= 300 and step % 100 < len(tokens) // 32:
            rate = full_future_rate(trainer, vocab, probes)
            print(f"step {step}: full-future rate {rate:.2f} ({time.time() - started:.0f}s)")
            if rate == 1.0:
                trainer.save(OUT)
                print(f"wrote {OUT}")
                return 0
        if step > 3000:
            print("fixture training did not stabilize", file=sys.stderr)
            return 1


if __name__ == "__main__":
    sys.exit(main())
