"""Distillation round sizing and box placement schedulers.

Round sizing is exact: the smallest batch whose binomial success tail
clears the requested confidence.  Placement comes in three flavours:

* ``spiral``  - boxes wind counter-clockwise around the channel that
  encloses the circuit and the connection pool, probing each candidate
  against the spatial index; rings grow outward only when the current
  one is full.
* ``asap``    - the whole demand is stacked in a block before the
  circuit starts.
* ``alap``    - one batch per demand event, ending just before the
  event's timestep, stacked in a wall beside the channel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .geom import Box3, LayoutConfig, PlacedBox, Point3, box_from_extents
from .route import World


class PlacementError(Exception):
    """The scheduler ran out of collision-free positions."""


def required_round_size(k_needed: int, p_fail: float, confidence: float) -> int:
    """Smallest n with P[Binomial(n, 1 - p_fail) >= k_needed] >= confidence."""
    if k_needed < 1:
        raise ValueError("k_needed must be at least 1")
    if not (0.0 <= p_fail < 1.0):
        raise ValueError("p_fail must lie in [0, 1)")
    if not (0.0 < confidence < 1.0):
        raise ValueError("confidence must lie in (0, 1)")
    p = 1.0 - p_fail
    n = k_needed
    while True:
        tail = sum(
            math.comb(n, i) * p**i * (1.0 - p) ** (n - i) for i in range(k_needed, n + 1)
        )
        if tail >= confidence:
            return n
        n += 1


@dataclass(frozen=True)
class SchedulerPolicy:
    """When rounds fire and how large they are.

    ``condition`` is one of ``("after-round",)``, ``("temporal", period)``
    or ``("pool", threshold)``.  The delay is fixed at zero: this
    scheduler type never pushes circuit geometry back in time.
    """

    kind: str = "spiral"  # spiral | asap | alap
    condition: tuple = ("after-round",)
    p_fail: float = 0.5
    confidence: float = 0.999
    delay: int = 0
    completion_lag: int = 6  # settle time after the deepest box of a round

    def __post_init__(self):
        if self.kind not in ("spiral", "asap", "alap"):
            raise ValueError(f"unknown scheduler kind {self.kind!r}")
        if not (0.0 <= self.p_fail < 1.0):
            raise ValueError("p_fail must lie in [0, 1)")
        if not (0.0 < self.confidence < 1.0):
            raise ValueError("confidence must lie in (0, 1)")
        if self.delay != 0:
            raise ValueError("delaying schedulers are not supported")


@dataclass
class DistillationLayer:
    """One scheduling round's placed boxes and their schedule."""

    round_id: int
    trigger_time: int
    boxes: list[PlacedBox] = field(default_factory=list)

    @property
    def schedule(self) -> list[Point3]:
        return [b.footprint.lo for b in self.boxes]


def _mk_box(box_id: str, kind: str, lo: Point3, layout: LayoutConfig) -> PlacedBox:
    footprint = box_from_extents(lo, layout.box_extents(kind))
    dt, dx, dy = footprint.extents
    port = Point3(footprint.hi.t, footprint.lo.x + dx // 2, footprint.lo.y + dy // 2)
    return PlacedBox(box_id, kind, footprint, port)


def _ring_positions(channel: Box3, ring: int, step: int):
    """Anchor centres along ring ``ring`` of the channel, counter-clockwise.

    Starts at the lower-right corner, walks up the right edge, across the
    top, down the left edge and back along the bottom (x right, y up).
    """
    pad = ring * step
    x0, x1 = channel.lo.x - pad, channel.hi.x + pad
    y0, y1 = channel.lo.y - pad, channel.hi.y + pad
    for y in range(y0, y1 + 1):
        yield (x1, y)
    for x in range(x1 - 1, x0 - 1, -1):
        yield (x, y1)
    for y in range(y1 - 1, y0 - 1, -1):
        yield (x0, y)
    for x in range(x0 + 1, x1):
        yield (x, y0)


class _SpiralWalk:
    """Stateful counter-clockwise walk used for one round's placements."""

    def __init__(self, channel: Box3, layout: LayoutConfig):
        self.channel = channel
        self.layout = layout
        self.step = max(layout.a_box_extents[1], layout.a_box_extents[2]) + layout.spiral_gap
        self.ring = 1
        self._positions = list(_ring_positions(channel, 1, self.step))
        self._cursor = 0

    def advance(self) -> tuple[int, int]:
        if self._cursor >= len(self._positions):
            self.ring += 1
            if self.ring > self.layout.max_rings:
                raise PlacementError(
                    f"spiral exhausted {self.layout.max_rings} rings around {self.channel}"
                )
            self._positions = list(_ring_positions(self.channel, self.ring, self.step))
            self._cursor = 0
        pos = self._positions[self._cursor]
        self._cursor += 1
        return pos


def place_spiral_layer(
    n_a: int,
    n_y: int,
    trigger_time: int,
    world: World,
    layout: LayoutConfig,
    channel: Box3,
    round_id: int = 0,
) -> DistillationLayer:
    """Place one round's boxes in a spiral around the channel.

    Calibration walks the innermost ring until the first collision-free
    position; every further box continues the same walk from where the
    previous one stopped, so the layout densifies counter-clockwise.
    """
    layer = DistillationLayer(round_id, trigger_time)
    walk = _SpiralWalk(channel, layout)
    kinds = ["A"] * n_a + ["Y"] * n_y
    for i, kind in enumerate(kinds):
        dt, dx, dy = layout.box_extents(kind)
        while True:
            cx, cy = walk.advance()
            lo = Point3(trigger_time, cx - dx // 2, cy - dy // 2)
            footprint = box_from_extents(lo, (dt, dx, dy))
            probe = footprint.inflated(0, layout.spiral_gap, layout.spiral_gap)
            if world.is_free(probe):
                break
        box = _mk_box(f"r{round_id}.{kind}{i}", kind, lo, layout)
        world.claim(box.box_id, box.footprint, "box")
        layer.boxes.append(box)
    return layer


def place_asap_stack(
    n_a: int,
    n_y: int,
    world: World,
    layout: LayoutConfig,
    stack_width: int,
    round_id: int = 0,
) -> DistillationLayer:
    """Stack the whole demand in a block that ends before the circuit starts.

    Rows pack along x within ``stack_width`` and pile downward along -y,
    producing the tall stack characteristic of placing everything up
    front.  Every box ends at t <= 0.
    """
    depth = max(layout.a_box_extents[0], layout.y_box_extents[0])
    t0 = -(depth + 1)
    layer = DistillationLayer(round_id, t0)
    kinds = ["A"] * n_a + ["Y"] * n_y
    x = 0
    y_row = -4  # below the wire plane, clear of the circuit rows
    row_depth = 0
    for i, kind in enumerate(kinds):
        dt, dx, dy = layout.box_extents(kind)
        placed = None
        while placed is None:
            if x + dx > stack_width:
                x = 0
                y_row -= row_depth + 1
                row_depth = 0
            lo = Point3(t0, x, y_row - dy)
            footprint = box_from_extents(lo, (dt, dx, dy))
            if world.is_free(footprint):
                placed = footprint
            x += dx + 1
            row_depth = max(row_depth, dy)
        box = _mk_box(f"r{round_id}.{kind}{i}", kind, placed.lo, layout)
        world.claim(box.box_id, box.footprint, "box")
        layer.boxes.append(box)
    return layer


def place_alap_layer(
    n_a: int,
    n_y: int,
    demand_time: int,
    world: World,
    layout: LayoutConfig,
    channel: Box3,
    round_id: int = 0,
) -> DistillationLayer:
    """Place one just-in-time batch ending before ``demand_time``.

    Boxes stack upward in a wall beside the channel; when slabs of
    consecutive events overlap in time the wall marches away from the
    circuit, which is what stretches these assemblies sideways.
    """
    depth = max(layout.a_box_extents[0], layout.y_box_extents[0])
    t0 = demand_time - depth - 1
    layer = DistillationLayer(round_id, t0)
    kinds = ["A"] * n_a + ["Y"] * n_y
    base_x = channel.lo.x - 1
    floor_y = layout.alap_wall_floor
    top_y = floor_y + layout.alap_wall_height
    y = floor_y
    col_width = 0
    x_col = base_x
    for i, kind in enumerate(kinds):
        dt, dx, dy = layout.box_extents(kind)
        placed = None
        while placed is None:
            if y + dy > top_y:
                y = floor_y
                x_col -= (col_width + 1) if col_width else (dx + 1)
                col_width = 0
                if x_col < base_x - 96 * (dx + 1):
                    raise PlacementError("alap wall ran away from the channel")
            lo = Point3(t0, x_col - dx, y)
            footprint = box_from_extents(lo, (dt, dx, dy))
            if world.is_free(footprint):
                placed = footprint
                y += dy + 1
                col_width = max(col_width, dx)
            else:
                y += 1
        box = _mk_box(f"r{round_id}.{kind}{i}", kind, placed.lo, layout)
        world.claim(box.box_id, box.footprint, "box")
        layer.boxes.append(box)
    return layer


def place_baseline_layer(kind, n_a, n_y, world, layout, channel, demand_time=0,
                         stack_width=20, round_id=0) -> DistillationLayer:
    if kind == "asap":
        return place_asap_stack(n_a, n_y, world, layout, stack_width, round_id)
    if kind == "alap":
        return place_alap_layer(n_a, n_y, demand_time, world, layout, channel, round_id)
    raise ValueError(f"unknown baseline {kind!r}")
