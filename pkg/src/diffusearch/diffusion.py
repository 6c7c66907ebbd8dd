"""Discrete-diffusion mathematics: schedules, transition kernels, forward
corruption, the exact two-case posterior, and the reweighted cross-entropy loss.

Everything here is plain float64 numpy over K categories; the chess vocabulary
is just one choice of K. Noise kinds: 'absorbing' (point-mass q_noise on the
mask category) and 'multinomial' (uniform q_noise over all K categories).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

NOISE_KINDS = ("absorbing", "multinomial")
LAMBDA_VARIANTS = ("constant", "reciprocal", "linear")


class ScheduleError(ValueError):
    pass


@dataclass(frozen=True)
class DiffusionSchedule:
    """Linear corruption schedule alpha_t = 1 - t/T with per-step beta and
    per-timestep loss weights lambda_t.

    alpha has T+1 entries indexed 0..T with alpha[0] = 1 and alpha[T] = 0;
    beta[t] satisfies alpha[t] = alpha[t-1] * (1 - beta[t]).
    """

    T: int
    noise_kind: str
    lambda_variant: str
    num_categories: int
    mask_id: Optional[int]
    alpha: np.ndarray
    beta: np.ndarray
    lam: np.ndarray

    @classmethod
    def linear(
        cls,
        T: int,
        num_categories: int,
        noise_kind: str = "absorbing",
        lambda_variant: str = "linear",
        mask_id: Optional[int] = None,
    ) -> "DiffusionSchedule":
        if T < 1:
            raise ScheduleError("T must be >= 1")
        if noise_kind not in NOISE_KINDS:
            raise ScheduleError(f"unknown noise kind {noise_kind!r}")
        if lambda_variant not in LAMBDA_VARIANTS:
            raise ScheduleError(f"unknown lambda variant {lambda_variant!r}")
        if noise_kind == "absorbing" and mask_id is None:
            raise ScheduleError("absorbing noise needs a mask category")
        alpha = 1.0 - np.arange(T + 1, dtype=np.float64) / T
        beta = np.zeros(T + 1, dtype=np.float64)
        beta[1:] = 1.0 - alpha[1:] / alpha[:-1]
        t = np.arange(T + 1, dtype=np.float64)
        if lambda_variant == "constant":
            lam = np.ones(T + 1)
        elif lambda_variant == "reciprocal":
            lam = np.ones(T + 1)
            lam[1:] = 1.0 / t[1:]
        else:
            lam = 1.0 - (t - 1.0) / T
        lam[0] = 1.0
        return cls(
            T=T,
            noise_kind=noise_kind,
            lambda_variant=lambda_variant,
            num_categories=num_categories,
            mask_id=mask_id,
            alpha=alpha,
            beta=beta,
            lam=lam,
        )

    def _check_t(self, t: int) -> None:
        if not 1 <= t <= self.T:
            raise ScheduleError(f"timestep {t} outside [1, {self.T}]")

    def q_noise(self) -> np.ndarray:
        """The stationary noise distribution over the K categories."""
        k = self.num_categories
        if self.noise_kind == "absorbing":
            dist = np.zeros(k)
            dist[self.mask_id] = 1.0
            return dist
        return np.full(k, 1.0 / k)

    def noise_prob(self, token: int) -> float:
        """q_noise evaluated at a single category."""
        if self.noise_kind == "absorbing":
            return 1.0 if token == self.mask_id else 0.0
        return 1.0 / self.num_categories

    def posterior_lambda(self, t: int) -> float:
        """lambda_t = (alpha_{t-1} - alpha_t) / (1 - alpha_t)."""
        self._check_t(t)
        return float((self.alpha[t - 1] - self.alpha[t]) / (1.0 - self.alpha[t]))

    def posterior_eta(self, t: int, x_t: int) -> float:
        """eta_t = 1 - beta_t (1 - alpha_{t-1}) q_noise(x_t) / (alpha_t + (1 - alpha_t) q_noise(x_t))."""
        self._check_t(t)
        sigma = self.noise_prob(x_t)
        denom = self.alpha[t] + (1.0 - self.alpha[t]) * sigma
        return float(1.0 - self.beta[t] * (1.0 - self.alpha[t - 1]) * sigma / denom)

    def to_config(self) -> dict:
        return {
            "T": self.T,
            "noise_kind": self.noise_kind,
            "lambda_variant": self.lambda_variant,
            "num_categories": self.num_categories,
            "mask_id": self.mask_id,
        }

    @classmethod
    def from_config(cls, config: dict) -> "DiffusionSchedule":
        return cls.linear(
            T=config["T"],
            num_categories=config["num_categories"],
            noise_kind=config["noise_kind"],
            lambda_variant=config["lambda_variant"],
            mask_id=config["mask_id"],
        )


def step_transition(schedule: DiffusionSchedule, t: int) -> np.ndarray:
    """Per-step K x K matrix Q_t = (1 - beta_t) I + beta_t 1 q_noise^T."""
    schedule._check_t(t)
    k = schedule.num_categories
    beta = schedule.beta[t]
    return (1.0 - beta) * np.eye(k) + beta * np.outer(np.ones(k), schedule.q_noise())


def cumulative_transition(schedule: DiffusionSchedule, t: int) -> np.ndarray:
    """Closed-form t-step matrix Q̄_t = alpha_t I + (1 - alpha_t) 1 q_noise^T."""
    schedule._check_t(t)
    k = schedule.num_categories
    alpha = schedule.alpha[t]
    return alpha * np.eye(k) + (1.0 - alpha) * np.outer(np.ones(k), schedule.q_noise())


def corrupt(
    x0: np.ndarray | int, schedule: DiffusionSchedule, t: int, rng: np.random.Generator
) -> np.ndarray | int:
    """Sample x_t ~ q(x_t | x_0): keep x_0 w.p. alpha_t, else draw from q_noise."""
    schedule._check_t(t)
    scalar = np.isscalar(x0)
    x0_arr = np.atleast_1d(np.asarray(x0, dtype=np.int64))
    keep = rng.random(x0_arr.shape) < schedule.alpha[t]
    if schedule.noise_kind == "absorbing":
        noise = np.full_like(x0_arr, schedule.mask_id)
    else:
        noise = rng.integers(0, schedule.num_categories, size=x0_arr.shape)
    out = np.where(keep, x0_arr, noise)
    return int(out[0]) if scalar else out


def posterior(x_t: int, x0_hat: int, schedule: DiffusionSchedule, t: int) -> np.ndarray:
    """Exact q(x_{t-1} | x_t, x0_hat) as a length-K distribution.

    Two cases: if x_t == x0_hat the mass interpolates between x_t and q_noise
    with weight eta_t; otherwise it puts lambda_t on x0_hat and spreads the
    rest over (1 - beta_t) delta(x_t) + beta_t q_noise.
    """
    schedule._check_t(t)
    k = schedule.num_categories
    out = np.zeros(k, dtype=np.float64)
    if x_t == x0_hat:
        eta = schedule.posterior_eta(t, x_t)
        out += (1.0 - eta) * schedule.q_noise()
        out[x_t] += eta
    else:
        lam = schedule.posterior_lambda(t)
        beta = schedule.beta[t]
        out += (1.0 - lam) * beta * schedule.q_noise()
        out[x_t] += (1.0 - lam) * (1.0 - beta)
        out[x0_hat] += lam
    return out


def posterior_sample(
    x_t: np.ndarray,
    x0_hat: np.ndarray,
    schedule: DiffusionSchedule,
    t: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Vectorized draw x_{t-1} ~ q(x_{t-1} | x_t, x0_hat) per position."""
    schedule._check_t(t)
    x_t = np.asarray(x_t, dtype=np.int64)
    x0_hat = np.asarray(x0_hat, dtype=np.int64)
    n = x_t.shape[0]
    out = np.empty(n, dtype=np.int64)
    lam = schedule.posterior_lambda(t)
    beta = schedule.beta[t]
    u = rng.random(n)
    noise = (
        np.full(n, schedule.mask_id, dtype=np.int64)
        if schedule.noise_kind == "absorbing"
        else rng.integers(0, schedule.num_categories, size=n)
    )
    same = x_t == x0_hat
    if same.any():
        etas = np.array([schedule.posterior_eta(t, int(x)) for x in x_t[same]])
        out[same] = np.where(u[same] < etas, x_t[same], noise[same])
    diff = ~same
    if diff.any():
        ud = u[diff]
        # lam -> x0, then (1-lam)(1-beta) -> x_t, remainder -> q_noise.
        stay_cut = lam + (1.0 - lam) * (1.0 - beta)
        out[diff] = np.where(
            ud < lam, x0_hat[diff], np.where(ud < stay_cut, x_t[diff], noise[diff])
        )
    return out


def brute_force_posterior(
    x_t: int, x0: int, schedule: DiffusionSchedule, t: int
) -> np.ndarray:
    """Direct Bayes evaluation Q_t[:, x_t] * Q̄_{t-1}^T x0 / (x_t^T Q̄_t^T x0).

    Independent oracle for `posterior`; builds the matrices explicitly.
    """
    schedule._check_t(t)
    q_t = step_transition(schedule, t)
    if t == 1:
        qbar_prev = np.eye(schedule.num_categories)
    else:
        qbar_prev = cumulative_transition(schedule, t - 1)
    numer = q_t[:, x_t] * qbar_prev[x0, :]
    denom = cumulative_transition(schedule, t)[x0, x_t]
    return numer / denom


def loss_term(
    x0_token: int,
    x_t_token: int,
    log_probs: np.ndarray,
    schedule: DiffusionSchedule,
    t: int,
) -> float:
    """Reweighted cross-entropy for one position:
    0 if x_t == x0, else -lambda_t * log f(x_t)[x0].
    """
    schedule._check_t(t)
    if np.isnan(log_probs).any():
        raise FloatingPointError("NaN log-probabilities")
    if x_t_token == x0_token:
        return 0.0
    value = -schedule.lam[t] * float(log_probs[x0_token])
    if not np.isfinite(value):
        raise FloatingPointError("non-finite loss")
    return value
