import numpy as np
import pytest

from diffusearch import codec, data, training
from diffusearch.chessboard import BoardState
from diffusearch.codec import Vocabulary
from diffusearch.oracle import ToyOracle


@pytest.fixture(scope="session")
def vocab() -> Vocabulary:
    return Vocabulary.default()


@pytest.fixture(scope="session")
def toy_oracle() -> ToyOracle:
    return ToyOracle()


@pytest.fixture(scope="session")
def playout_positions() -> list[BoardState]:
    return data.sample_positions(60, seed=7)


@pytest.fixture(scope="session")
def single_record(vocab, toy_oracle):
    """One s-asa record from the initial position, with its token sequence."""
    record = data.rollout_future(BoardState.initial(), 4, toy_oracle, paradigm="s-asa")
    return record, codec.assemble_sequence(record, vocab)


@pytest.fixture(scope="session")
def memorized_trainer(vocab, single_record):
    """A model overfit on one s-asa record (the 'overfit oracle' for sampler,
    training and evaluation tests). Batch replicates the record so each step
    sees several corruption draws; training runs until greedy sampling
    reproduces the record exactly."""
    from diffusearch.sampler import SampleConfig, Sampler

    record, seq = single_record
    tokens = np.stack([seq.tokens] * 16)
    config = training.TrainConfig(
        paradigm="s-asa", h=4, T=20, batch_size=16,
        layers=2, width=256, heads=4, lr=1e-3, seed=0,
    )
    trainer = training.Trainer(config, vocab=vocab)
    for step in range(1, 901):
        loss = trainer._step(tokens)
        if step >= 200 and step % 50 == 0:
            sampler = Sampler(trainer.model, trainer.schedule, vocab, "s-asa", 4)
            result = sampler.sample(record.s0, SampleConfig(seed=0))
            if (result.tokens == seq.tokens).all():
                return trainer
    raise AssertionError(f"memorization failed to converge: loss={loss}")
