"""Deterministic random-stream derivation.

Every random draw in the toolkit comes from a generator derived from one
root seed and a tuple of labels, e.g. ``stream(seed, "decay", m, rep)``.
The labels are hashed with SHA-256 so that a task's stream depends only on
what the task is, never on the order or thread in which it runs.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _label_words(labels: tuple) -> list[int]:
    text = "\x1f".join(str(lab) for lab in labels).encode("utf-8")
    digest = hashlib.sha256(text).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 32, 4)]


def stream(seed: int, *labels) -> np.random.Generator:
    """Return a generator for the task identified by ``labels`` under ``seed``."""
    if seed is None:
        raise ValueError("an explicit integer seed is required")
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence([seed & 0xFFFFFFFF, seed >> 32, *_label_words(labels)])
    return np.random.default_rng(ss)


def child_seed(seed: int, *labels) -> int:
    """Integer seed for a sub-task, for APIs that take a seed rather than a generator."""
    return int(stream(seed, "child-seed", *labels).integers(0, 2**62))
