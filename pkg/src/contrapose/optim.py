"""Momentum SGD and the two learning-rate schedules used by training."""

from __future__ import annotations

import math

import numpy as np

from .params import ParamStore


class MomentumSGD:
    """Classic momentum SGD: v <- mu*v + (grad + wd*p), p <- p - lr*v.

    Velocities exist only for trainable parameters; frozen parameters are
    never read or written, keeping their bytes untouched for any trajectory.
    """

    def __init__(self, params: ParamStore, momentum: float = 0.9,
                 weight_decay: float = 1e-4):
        self.params = params
        self.momentum = float(momentum)
        self.weight_decay = float(weight_decay)
        self._velocity: dict[str, np.ndarray] = {}

    def step(self, lr: float):
        for name, p in self.params.trainable_items():
            if p.grad is None:
                raise ValueError(f"sgd step: missing gradient for trainable parameter {name}")
            g = p.grad
            if self.weight_decay:
                g = g + self.weight_decay * p.data
            v = self._velocity.get(name)
            if v is None:
                v = np.array(g, dtype=p.data.dtype)
            else:
                v = self.momentum * v + g
            self._velocity[name] = v
            p.data = p.data - p.data.dtype.type(lr) * v


def sgd_step(params: ParamStore, lr: float, momentum: float = 0.9,
             weight_decay: float = 1e-4, velocity: dict | None = None) -> dict:
    """One functional momentum-SGD update; returns the velocity state."""
    opt = MomentumSGD(params, momentum, weight_decay)
    if velocity is not None:
        opt._velocity = velocity
    opt.step(lr)
    return opt._velocity


def lr_schedule(kind: str, step_index: int, total_steps: int, base_lr: float,
                milestones_frac=(0.44, 0.68), factor: float = 0.5) -> float:
    """Learning rate at ``step_index`` of ``total_steps``.

    cosine: half-cosine anneal from base_lr to 0.
    step:   base_lr * factor**(number of milestone fractions already passed).
    """
    if step_index < 0 or step_index > total_steps:
        raise ValueError(f"step_index {step_index} outside [0, {total_steps}]")
    if kind == "cosine":
        if total_steps == 0:
            return base_lr
        return base_lr * 0.5 * (1.0 + math.cos(math.pi * step_index / total_steps))
    if kind == "step":
        passed = sum(1 for m in milestones_frac if step_index >= m * total_steps)
        return base_lr * factor ** passed
    raise ValueError(f"unknown schedule kind: {kind}")
