"""Request-sequence generators.

Generation is oblivious: a spec plus its own seed fully determines the
sequence before any algorithm randomness is drawn, and the generator stream
is a separate Random instance from every algorithm stream.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Optional

from .metric import HstSpace, PointId

KINDS = ("uniform_random", "block_sweep", "phase_stress", "file")


@dataclass
class GeneratorSpec:
    kind: str
    length: int
    seed: int = 0
    params: dict = field(default_factory=dict)


def _leaf_blocks(space: HstSpace) -> list[tuple[PointId, ...]]:
    if space.height == 1:
        return [space.subtree_leaf_points(0)]
    return [space.subtree_leaf_points(c) for c in space.children[0]]


def generate(spec: GeneratorSpec, space: HstSpace) -> list[PointId]:
    if spec.length < 0:
        raise ValueError("length must be >= 0")
    if spec.kind == "uniform_random":
        rng = random.Random(spec.seed)
        n = space.n_leaves
        return [rng.randrange(n) for _ in range(spec.length)]

    if spec.kind == "block_sweep":
        # bursts sweep a few distinct points of one block several times over,
        # driving that block's demand up while starving the others, then move
        # to the next block; built to provoke jumps and phase turnover
        blocks = _leaf_blocks(space)
        width = int(spec.params.get("width", 0))
        passes = int(spec.params.get("passes", 4))
        out: list[PointId] = []
        burst = 0
        while len(out) < spec.length:
            blk = blocks[burst % len(blocks)]
            w = min(len(blk), width) if width > 0 else len(blk)
            for _ in range(passes):
                for p in blk[:w]:
                    out.append(p)
                    if len(out) == spec.length:
                        return out
            burst += 1
        return out

    if spec.kind == "phase_stress":
        # cycle over a fixed set of distinct leaves under one node; with one
        # more leaf than servers this forces a fault per round of marking
        blocks = _leaf_blocks(space)
        blk = blocks[int(spec.params.get("block", 0)) % len(blocks)]
        width = int(spec.params.get("width", len(blk)))
        width = max(1, min(width, len(blk)))
        return [blk[i % width] for i in range(spec.length)]

    if spec.kind == "file":
        path = spec.params.get("path")
        if not path:
            raise ValueError("file generator needs params['path']")
        from .files import load_requests
        reqs = load_requests(path, space.n_leaves)
        return reqs[: spec.length] if spec.length else reqs

    raise ValueError(f"unknown generator kind {spec.kind!r}")


def parse_generator(text: str, length: Optional[int] = None,
                    seed: Optional[int] = None) -> GeneratorSpec:
    """Parse 'kind[:key=value,...]' as used by the command line."""
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind not in KINDS:
        raise ValueError(f"unknown generator kind {kind!r}; expected one of {KINDS}")
    params: dict = {}
    if rest:
        for item in rest.split(","):
            if not item:
                continue
            key, eq, value = item.partition("=")
            if not eq:
                raise ValueError(f"bad generator parameter {item!r}, expected key=value")
            params[key.strip()] = value.strip()
    spec = GeneratorSpec(kind=kind, length=int(params.pop("length", length or 0)),
                         seed=int(params.pop("seed", seed or 0)), params=params)
    return spec
