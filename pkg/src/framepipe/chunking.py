"""Chunk-shape selection from a dataset's current and next access patterns.

Every dimension is classified by the pair of roles it plays under the two
patterns (core, first slice dim, or other). That class fixes a start value,
an upper bound and a step. Starting from those values the chunk is either
grown greedily or shrunk until it fits the byte budget ``M``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import DimClass, Pattern, check_pattern, classify_dims, frame_coord_table
from .errors import ShapeMismatch, TooLarge

DEFAULT_BUDGET = 1_000_000

# increase visit order; decrease visits the reverse
CLASS_ORDER = (
    DimClass.CoreCore,
    DimClass.CoreSlice,
    DimClass.SliceSlice,
    DimClass.CoreOther,
    DimClass.SliceOther,
)


@dataclass(frozen=True)
class OptimizerInputs:
    """Everything the optimizer needs to know about one dataset.

    ``f_p_now`` and ``f_p_next`` are the per-worker frame counts under each
    pattern (``ceil(frame_count / workers)``).
    """

    shape: tuple[int, ...]
    element_bytes: int
    now: Pattern
    next: Pattern
    f: int = 1
    f_p_now: int = 1
    f_p_next: int = 1
    M: int = DEFAULT_BUDGET

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        if self.f < 1 or self.f_p_now < 1 or self.f_p_next < 1:
            raise ValueError("f and f_p must be >= 1")
        if self.M < self.element_bytes:
            raise ValueError(f"budget {self.M} smaller than one element ({self.element_bytes} bytes)")
        check_pattern(len(self.shape), self.now)
        check_pattern(len(self.shape), self.next)


@dataclass(frozen=True)
class DimPlan:
    dim: int
    cls: DimClass
    c0: int
    beta_u: int
    beta_l: int
    adjustable: bool
    step: int


@dataclass(frozen=True)
class ChunkPlan:
    chunk_shape: tuple[int, ...]
    chunk_bytes: int
    direction: str = "none"  # "increase" | "decrease" | "none"


def initial_values(inputs: OptimizerInputs) -> list[DimPlan]:
    classes = classify_dims(inputs.now, inputs.next)
    f = inputs.f
    plans = []
    for dim, (cls, d) in enumerate(zip(classes, inputs.shape)):
        if cls is DimClass.OtherOther:
            plans.append(DimPlan(dim, cls, 1, 1, 1, False, 1))
            continue
        if cls is DimClass.CoreCore:
            c0, beta_u, step = d, d, 1
        elif cls is DimClass.CoreSlice:
            # the bound comes from whichever pattern slices along this dim
            f_p = inputs.f_p_now if inputs.now.role(dim) == "slice" else inputs.f_p_next
            c0, beta_u, step = min(f, d), f_p, f
        elif cls is DimClass.SliceSlice:
            c0, beta_u, step = min(f, d), inputs.f_p_now, f
        else:  # CoreOther, SliceOther
            c0, beta_u, step = 1, d, 1
        beta_u = max(1, min(beta_u, d))
        plans.append(DimPlan(dim, cls, min(c0, beta_u), beta_u, 1, True, step))
    return plans


def visit_order(plans: Sequence[DimPlan], now: Pattern) -> list[DimPlan]:
    """Adjustable dims in increase order.

    Class first; inside a class, dims that are core under ``now`` precede
    the rest; ties go to the lower dimension index.
    """
    rank = {cls: i for i, cls in enumerate(CLASS_ORDER)}
    adjustable = [p for p in plans if p.adjustable]
    return sorted(adjustable, key=lambda p: (rank[p.cls], now.role(p.dim) != "core", p.dim))


def _nbytes(chunk: Sequence[int], element_bytes: int) -> int:
    return math.prod(chunk) * element_bytes


def optimize_chunks(inputs: OptimizerInputs) -> ChunkPlan:
    plans = initial_values(inputs)
    chunk = [p.c0 for p in plans]
    eb, budget = inputs.element_bytes, inputs.M
    order = visit_order(plans, inputs.now)

    if _nbytes(chunk, eb) <= budget:
        direction = "increase"
        for p in order:
            rest = _nbytes(chunk, eb) // chunk[p.dim]
            limit = min(p.beta_u, budget // rest)
            if limit > chunk[p.dim]:
                chunk[p.dim] += (limit - chunk[p.dim]) // p.step * p.step
    else:
        direction = "decrease"
        for p in reversed(order):
            if _nbytes(chunk, eb) <= budget:
                break
            rest = _nbytes(chunk, eb) // chunk[p.dim]
            if p.cls is DimClass.CoreCore:
                while chunk[p.dim] > p.beta_l and chunk[p.dim] * rest > budget:
                    chunk[p.dim] = -(-chunk[p.dim] // 2)
                continue
            target = budget // rest
            b = -(-(chunk[p.dim] - target) // p.step)
            if chunk[p.dim] - b * p.step < p.beta_l:
                b = (chunk[p.dim] - p.beta_l) // p.step
            chunk[p.dim] -= b * p.step
        if _nbytes(chunk, eb) > budget:
            chunk = [1] * len(chunk)

    chunk = [min(max(c, 1), d) for c, d in zip(chunk, inputs.shape)]
    return ChunkPlan(tuple(chunk), _nbytes(chunk, eb), direction)


def chunk_cost(shape: Sequence[int], chunk_shape: Sequence[int], pattern: Pattern, m: int) -> int:
    """Chunks touched reading every frame in batches of ``m`` frames."""
    shape, chunk_shape = tuple(shape), tuple(chunk_shape)
    if len(shape) != len(chunk_shape) or any(not 1 <= c <= s for c, s in zip(chunk_shape, shape)):
        raise ShapeMismatch(f"chunk {chunk_shape} incompatible with shape {shape}")
    check_pattern(len(shape), pattern)
    core_cells = math.prod(-(-shape[d] // chunk_shape[d]) for d in pattern.core_dims)
    n = math.prod(shape[d] for d in pattern.slice_dims)
    if not pattern.slice_dims:
        return core_cells
    ordinals = np.arange(n)
    keys = frame_coord_table(shape, pattern, ordinals) // np.array(
        [chunk_shape[d] for d in pattern.slice_dims]
    )
    batch = ordinals // m
    grid = [-(-shape[d] // chunk_shape[d]) for d in pattern.slice_dims]
    flat = np.ravel_multi_index(tuple(keys.T), grid)
    pairs = batch * math.prod(grid) + flat
    return int(np.unique(pairs).size) * core_cells


def brute_force_best(inputs: OptimizerInputs, candidate_limit: int = 50_000) -> ChunkPlan:
    """Exhaustive search over every chunk shape within the byte budget.

    Minimises the chunks touched reading the data under both patterns with
    ``f`` frames per call. Ties prefer bigger chunks, then the
    lexicographically smallest shape.
    """
    total = math.prod(inputs.shape)
    if total > candidate_limit:
        raise TooLarge(f"{total} candidate shapes exceed limit {candidate_limit}")
    best_key, best = None, None
    for chunk in itertools.product(*(range(1, d + 1) for d in inputs.shape)):
        nbytes = _nbytes(chunk, inputs.element_bytes)
        if nbytes > inputs.M:
            continue
        cost = chunk_cost(inputs.shape, chunk, inputs.now, inputs.f) + chunk_cost(
            inputs.shape, chunk, inputs.next, inputs.f
        )
        key = (cost, -nbytes, chunk)
        if best_key is None or key < best_key:
            best_key, best = key, chunk
    return ChunkPlan(tuple(best), _nbytes(best, inputs.element_bytes), "exhaustive")


def explain(inputs: OptimizerInputs) -> str:
    """Human-readable table of classes, start values, bounds and the result."""
    plans = initial_values(inputs)
    plan = optimize_chunks(inputs)
    order = {p.dim: i for i, p in enumerate(visit_order(plans, inputs.now))}
    lines = [
        f"shape {inputs.shape}  element {inputs.element_bytes} B  budget M={inputs.M} B",
        f"now {inputs.now.name} core={inputs.now.core_dims} slice={inputs.now.slice_dims}  "
        f"f_p={inputs.f_p_now}",
        f"next {inputs.next.name} core={inputs.next.core_dims} slice={inputs.next.slice_dims}  "
        f"f_p={inputs.f_p_next}",
        f"frames per call f={inputs.f}",
        "",
        f"{'dim':>3}  {'extent':>6}  {'class':<10}  {'c0':>6}  {'beta_u':>6}  {'step':>4}  {'visit':>5}  {'chunk':>6}",
    ]
    for p in plans:
        visit = str(order[p.dim]) if p.dim in order else "-"
        lines.append(
            f"{p.dim:>3}  {inputs.shape[p.dim]:>6}  {p.cls.name:<10}  {p.c0:>6}  "
            f"{p.beta_u:>6}  {p.step:>4}  {visit:>5}  {plan.chunk_shape[p.dim]:>6}"
        )
    lines.append("")
    start = _nbytes([p.c0 for p in plans], inputs.element_bytes)
    lines.append(f"start bytes {start}  direction {plan.direction}")
    lines.append(f"chunk {plan.chunk_shape}  bytes {plan.chunk_bytes}")
    return "\n".join(lines)
