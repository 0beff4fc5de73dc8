"""The online synthesis loop.

One iteration per traversal event, plus standalone iterations whenever
the proactive scheduling condition fires between events:

1. if the manager lacks distilled states or the condition is due, fire
   a round: place boxes, simulate outcomes, reserve connections;
2. emit circuit geometry up to the earliest future magic input;
3. assign reserved connections to the pending inputs;
4. determine the segment specs (pool-to-pin drops, rail extensions,
   box-to-rail links), add their obstacles, compute the paths;
5. sweep stale connections back to available and record the step.

Everything is deterministic for a fixed config: box outcomes come from
a seeded generator or a scripted bitmap list, and all iteration orders
are explicit.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from .geom import (
    Box3,
    GeometryBuilder,
    GeometrySet,
    LayoutConfig,
    Point3,
    TemplateCollisionError,
    global_bounding_box,
    merge_boxes,
    plumbing_volume,
    polyline_from_cells,
)
from .icm import ICMCircuit, new_traversal_state, next_traversal_event, recycle_wires
from .pool import ConnectionPool, PoolConfig
from .route import (
    GUIDE,
    OCCUPY,
    SEG_B,
    SEG_C,
    SEG_E,
    NoPathError,
    SegmentSpec,
    TaskSet,
    World,
    compute_taskset,
    describe_spec,
)
from .sched import (
    DistillationLayer,
    PlacementError,
    SchedulerPolicy,
    place_alap_layer,
    place_asap_stack,
    place_spiral_layer,
    required_round_size,
)


class EngineError(Exception):
    pass


class SynthesisFailure(EngineError):
    """Synthesis could not complete; carries the diagnosis journal."""

    def __init__(self, message: str, journal: "Journal"):
        super().__init__(message)
        self.journal = journal


class Journal:
    """Append-only diagnosis log of `<step> <op> <args...>` lines."""

    def __init__(self):
        self.lines: list[str] = []
        self.step = 0

    def log(self, op: str, *args) -> None:
        tail = " ".join(str(a) for a in args)
        self.lines.append(f"{self.step} {op} {tail}".rstrip())

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def ops_for_step(self, step: int) -> list[str]:
        prefix = f"{step} "
        return [ln.split(" ", 2)[1] for ln in self.lines if ln.startswith(prefix)]


@dataclass(frozen=True)
class SynthesisConfig:
    policy: SchedulerPolicy = field(default_factory=SchedulerPolicy)
    layout: LayoutConfig = field(default_factory=LayoutConfig)
    pool: PoolConfig = field(default_factory=PoolConfig)
    seed: int = 0
    outcome_script: tuple | None = None  # one 0/1 bitmap string per round
    max_rounds: int = 64
    strict: bool = False
    optimize_wires: bool = True
    segment_order: str = "cbe"  # compute order of the segment classes

    def __post_init__(self):
        if self.segment_order not in ("cbe", "ceb"):
            raise ValueError("segment_order must be 'cbe' or 'ceb'")


@dataclass
class StepRecord:
    step: int
    nr_a: int
    nr_y: int
    a_pool: int
    y_pool: int
    sched_round: int


@dataclass
class Assembly:
    geometry: GeometrySet
    layers: list[DistillationLayer]
    records: list[StepRecord]
    volume: int
    journal: Journal
    deliveries: dict = field(default_factory=dict)  # input key -> (conn id, path)


def trace_table(assembly: Assembly) -> list[StepRecord]:
    """One record per traversal step, in step order."""
    return list(assembly.records)


class OutcomeSource:
    """Per-box success bits, either seeded-random or scripted."""

    def __init__(self, p_fail: float, seed: int, script=None):
        self.p_fail = p_fail
        self.script = list(script) if script is not None else None
        self.rng = random.Random(seed)
        self.round_no = 0

    def draw(self, n: int) -> list[bool]:
        self.round_no += 1
        if self.script is None:
            return [self.rng.random() >= self.p_fail for _ in range(n)]
        if self.round_no > len(self.script):
            raise EngineError(f"outcome script exhausted at round {self.round_no}")
        bits = self.script[self.round_no - 1].replace(" ", "").strip()
        if len(bits) != n or set(bits) - {"0", "1"}:
            raise EngineError(
                f"outcome script round {self.round_no}: need {n} bits, got {bits!r}"
            )
        return [b == "1" for b in bits]


def simulate_round(layer: DistillationLayer, source: OutcomeSource):
    """Success list [(box_id, kind, port)] in box-id order."""
    bits = source.draw(len(layer.boxes))
    return [(box.box_id, box.kind, box.port) for box, ok in zip(layer.boxes, bits) if ok]


class Synthesizer:
    """Single-use orchestrator for one synthesis run."""

    def __init__(self, circuit: ICMCircuit, config: SynthesisConfig):
        self.config = config
        self.circuit = recycle_wires(circuit) if config.optimize_wires else circuit
        self.journal = Journal()
        self.world = World(self.journal)
        self.geometry = GeometrySet()
        self.builder = GeometryBuilder(
            self.circuit, config.layout, self.geometry, claim=self.world.claim
        )
        pool_cfg = config.pool
        if config.policy.kind == "asap":
            # The whole demand parks in the pool at once, so the cap must
            # admit it; the stated cap still applies to the other modes.
            totals = self._demand_totals()
            pool_cfg = replace(
                pool_cfg, cap_per_type=max(pool_cfg.cap_per_type, totals["A"], totals["Y"])
            )
        self.pool = ConnectionPool(pool_cfg, self.journal)
        self.outcomes = OutcomeSource(config.policy.p_fail, config.seed, config.outcome_script)
        self.layers: list[DistillationLayer] = []
        self.records: list[StepRecord] = []
        self.deliveries: dict = {}
        self.demand_max = {"A": 0, "Y": 0}
        self.next_round_at: int | None = None
        self.rail_line_guards: dict[int, str] = {}  # rail index -> y=pool_gap guide
        self.rail_under_guards: dict[int, str] = {}  # rail index -> y=pool_gap-1 guide
        self.conn_fwd_guards: dict[str, str] = {}  # conn id -> forward-stretch guide
        self.pin_guards: dict[str, str] = {}  # input key -> guide obstacle id
        self._pending_links: list[str] = []  # reservations awaiting their box link
        self._rail_polylines: dict[str, object] = {}
        depth = max(config.layout.a_box_extents[0], config.layout.y_box_extents[0])
        self._box_depth = depth
        self.t_floor = -(depth + 12)
        self.t_ceiling = self.circuit.last_timestep + 24
        self._reserve_circuit_footprint()

    def _reserve_circuit_footprint(self) -> None:
        """Fence off everything the circuit will claim later.

        All circuit coordinates are computable before execution; only box
        placement and connections are online.  Permanent guides over the
        future wire corridors, CNOT templates and delivery pins keep
        connection paths from squatting cells the emitter needs later.
        """
        lay = self.config.layout
        for m in self.circuit.magic_inputs:
            row = lay.wire_row(m.wire)
            cell = Box3(
                Point3(m.timestep, row, 0), Point3(m.timestep + 1, row + 1, 1)
            )
            obs = self.world.obstacles.add(cell, GUIDE, 0, f"pin:{m.key}")
            self.pin_guards[m.key] = obs.oid
        for lt in self.circuit.lifetimes():
            row = lay.wire_row(lt.wire)
            start = lt.start + 1 if lt.magic else lt.start
            end = lt.end if lt.end is not None else self.t_ceiling
            if end > start:
                self.world.obstacles.add(
                    Box3(Point3(start, row, 0), Point3(end, row + 1, 1)),
                    GUIDE, 0, "circuit",
                )
        for op in self.circuit.cnots():
            xl = min(lay.wire_row(op.control), lay.wire_row(op.target))
            xr = max(lay.wire_row(op.control), lay.wire_row(op.target))
            self.world.obstacles.add(
                Box3(
                    Point3(op.timestep, xl, 1),
                    Point3(op.timestep + lay.braid_depth, xr + 1, 2),
                ),
                GUIDE, 0, "circuit",
            )

    # -- demand and channel -------------------------------------------------

    def _demand_totals(self) -> dict:
        totals = {"A": 0, "Y": 0}
        for m in self.circuit.magic_inputs:
            totals[m.basis] += 1
        return totals

    def channel(self) -> Box3:
        """Clearance region around circuit and pool; grows with the rails."""
        lay = self.config.layout
        pc = self.pool.config
        top_row = lay.wire_row(self.circuit.wire_count - 1)
        circuit_box = Box3(
            Point3(self.t_floor, -1, -1), Point3(self.t_ceiling, top_row + 2, 3)
        )
        rails = max(len(self.pool.rails), pc.budgeted_rails)
        rail_hi_x = rails * pc.rail_pitch + 2
        pool_box = Box3(
            Point3(self.t_floor, 0, pc.pool_gap),
            Point3(self.t_ceiling, rail_hi_x, pc.pool_gap + 1),
        )
        c = pc.channel_clearance
        return merge_boxes(circuit_box, pool_box).inflated(0, c, c)

    # -- scheduling ----------------------------------------------------------

    def _round_sizes(self, event_counts) -> tuple[int, int]:
        pol = self.config.policy
        if pol.kind == "asap":
            k = self._demand_totals()
        elif pol.kind == "alap":
            k = dict(event_counts)
        else:
            k = dict(self.demand_max)
        n_a = required_round_size(k["A"], pol.p_fail, pol.confidence) if k["A"] else 0
        n_y = required_round_size(k["Y"], pol.p_fail, pol.confidence) if k["Y"] else 0
        return n_a, n_y

    def _fire_round(self, trigger_time: int, event_counts) -> None:
        pol = self.config.policy
        n_a, n_y = self._round_sizes(event_counts)
        round_id = len(self.layers) + 1
        if round_id > self.config.max_rounds:
            raise SynthesisFailure(
                f"exceeded max_rounds={self.config.max_rounds}", self.journal
            )
        self.journal.log("round", round_id, trigger_time, n_a, n_y)
        try:
            if pol.kind == "asap":
                layer = place_asap_stack(
                    n_a, n_y, self.world, self.config.layout,
                    stack_width=self.config.layout.wire_row(self.circuit.wire_count - 1) + 4,
                    round_id=round_id,
                )
            elif pol.kind == "alap":
                layer = place_alap_layer(
                    n_a, n_y, trigger_time, self.world, self.config.layout,
                    self.channel(), round_id=round_id,
                )
            else:
                layer = place_spiral_layer(
                    n_a, n_y, trigger_time, self.world, self.config.layout,
                    self.channel(), round_id=round_id,
                )
        except PlacementError as exc:
            raise SynthesisFailure(f"placement failed: {exc}", self.journal) from exc
        self.layers.append(layer)
        self.geometry.boxes.extend(layer.boxes)
        successes = simulate_round(layer, self.outcomes)
        won = {box_id for box_id, _, _ in successes}
        self.journal.log(
            "simulate", round_id,
            "".join("1" if box.box_id in won else "0" for box in layer.boxes),
        )
        self._pending_links.extend(self.pool.reserve_connections(successes))
        if pol.kind == "spiral":
            if pol.condition[0] == "after-round":
                self.next_round_at = trigger_time + self._box_depth + pol.completion_lag
            elif pol.condition[0] == "temporal":
                self.next_round_at = trigger_time + pol.condition[1]

    def _ensure_rail_guards(self, rail_index: int) -> None:
        if rail_index in self.rail_line_guards:
            return
        rail = self.pool.rails[rail_index]
        line = Box3(
            Point3(self.t_floor, rail.x, rail.y),
            Point3(self.t_ceiling, rail.x + 1, rail.y + 1),
        )
        under = Box3(
            Point3(self.t_floor, rail.x, rail.y - 1),
            Point3(self.t_ceiling, rail.x + 1, rail.y),
        )
        self.rail_line_guards[rail_index] = self.world.obstacles.add(
            line, GUIDE, 0, f"rail{rail_index}"
        ).oid
        self.rail_under_guards[rail_index] = self.world.obstacles.add(
            under, GUIDE, 0, f"rail{rail_index}"
        ).oid

    def _add_fwd_guard(self, conn) -> None:
        # Fences the connection's forward rail stretch (line and under-strip)
        # against everything except its own extensions and final drop.
        rail = self.pool.rails[conn.rail]
        region = Box3(
            Point3(conn.anchor_t + 1, rail.x, rail.y - 1),
            Point3(self.t_ceiling, rail.x + 1, rail.y + 1),
        )
        obs = self.world.obstacles.add(region, GUIDE, 0, conn.id)
        self.conn_fwd_guards[conn.id] = obs.oid

    def _insufficient(self, counts) -> bool:
        return (
            counts["A"] > self.pool.reserved_count("A")
            or counts["Y"] > self.pool.reserved_count("Y")
        )

    def _proactive_due(self, step_time: int) -> bool:
        cond = self.config.policy.condition
        if cond[0] in ("after-round", "temporal"):
            return self.next_round_at is not None and step_time >= self.next_round_at
        if cond[0] == "pool":
            return (
                self.pool.reserved_count("A") < cond[1]
                or self.pool.reserved_count("Y") < cond[1]
            )
        return False

    def _schedule_phase(self, step_time: int, counts) -> int:
        """Work-flow lines 8-12 for one iteration; returns rounds fired."""
        cfg = self.config
        fired = 0
        if cfg.policy.kind == "asap":
            if self._insufficient(counts):
                raise SynthesisFailure("asap pool exhausted mid-circuit", self.journal)
            return 0
        if cfg.policy.kind == "alap":
            if counts["A"] or counts["Y"]:
                self._fire_round(step_time, counts)
                fired += 1
                while self._insufficient(counts):
                    self._fire_round(step_time, counts)
                    fired += 1
            return fired
        # spiral: proactive condition first, reactive backstop second
        while self._proactive_due(step_time):
            self._fire_round(step_time, counts)
            fired += 1
            if self.config.policy.condition[0] == "pool" and not self._insufficient(counts):
                break
        if self._insufficient(counts):
            if cfg.strict:
                raise SynthesisFailure(
                    "insufficient distilled states in strict mode", self.journal
                )
            while self._insufficient(counts):
                self._fire_round(step_time, counts)
                fired += 1
        return fired

    # -- the main loop --------------------------------------------------------

    def run(self) -> Assembly:
        cfg = self.config
        state = new_traversal_state(self.circuit)
        self.journal.log("begin", cfg.policy.kind, cfg.seed)

        if cfg.policy.kind == "asap":
            totals = self._demand_totals()
            guard = 0
            while (
                self.pool.reserved_count("A") < totals["A"]
                or self.pool.reserved_count("Y") < totals["Y"]
            ):
                self._fire_round(-(self._box_depth + 1), totals)
                guard += 1
                if guard > cfg.max_rounds:
                    raise SynthesisFailure("asap could not cover the demand", self.journal)

        event = next_traversal_event(self.circuit, state)
        step = 0
        while True:
            standalone = (
                cfg.policy.kind == "spiral"
                and cfg.policy.condition[0] in ("after-round", "temporal")
                and self.next_round_at is not None
                and not event.is_end
                and self.next_round_at < event.time
            )
            if event.is_end and not standalone:
                break

            step += 1
            self.journal.step = step
            if standalone:
                step_time = self.next_round_at
                inputs = ()
            else:
                step_time = event.time
                inputs = event.inputs

            counts = {
                "A": sum(1 for m in inputs if m.basis == "A"),
                "Y": sum(1 for m in inputs if m.basis == "Y"),
            }
            self.journal.log("step-begin", step_time, counts["A"], counts["Y"])
            for kind in ("A", "Y"):
                self.demand_max[kind] = max(self.demand_max[kind], counts[kind])

            fired = self._schedule_phase(step_time, counts)

            # lines 13-14: geometry up to the earliest unscheduled input
            frontier = state.next_pending_time()
            if frontier is None:
                frontier = self.circuit.last_timestep + 1
            self.journal.log("geometry", frontier)
            self._emit(frontier)

            # line 15: assign connections to this step's inputs
            assigned = []
            for m in sorted(inputs, key=lambda m: m.wire):
                cid = self.pool.assign_to_input(m.key, m.basis)
                if cid is None:
                    raise SynthesisFailure(
                        f"no reserved {m.basis} connection for {m.key}", self.journal
                    )
                assigned.append((m, self.pool.connections[cid]))
            state.mark_assigned([m for m, _ in assigned])

            # lines 16-22
            self._connect_step(frontier, assigned, state)

            self.records.append(
                StepRecord(
                    step, counts["A"], counts["Y"],
                    self.pool.reserved_count("A"), self.pool.reserved_count("Y"),
                    1 if fired else 0,
                )
            )
            self.journal.log(
                "record", counts["A"], counts["Y"],
                self.pool.reserved_count("A"), self.pool.reserved_count("Y"),
                1 if fired else 0,
            )

            if not standalone:
                event = next_traversal_event(self.circuit, state)

        # final flush: emit the tail of the circuit and settle the pool
        self.journal.step = step + 1
        final_frontier = self.circuit.last_timestep + 1
        self.journal.log("geometry", final_frontier)
        self._emit(final_frontier)
        self._connect_step(final_frontier, [], state)

        if len(state.in_a) != len(self.circuit.magic_inputs):
            raise SynthesisFailure(
                f"only {len(state.in_a)} of {len(self.circuit.magic_inputs)} inputs connected",
                self.journal,
            )
        volume = plumbing_volume(global_bounding_box(self.geometry))
        self.journal.log("volume", volume)
        return Assembly(
            geometry=self.geometry,
            layers=self.layers,
            records=self.records,
            volume=volume,
            journal=self.journal,
            deliveries=self.deliveries,
        )

    def _emit(self, frontier: int) -> None:
        try:
            self.builder.emit_until(frontier)
        except TemplateCollisionError as exc:
            self.journal.log("template-collision", str(exc))
            raise SynthesisFailure(str(exc), self.journal) from exc

    # -- segment determination and computation --------------------------------

    def _connect_step(self, frontier: int, assigned, state) -> None:
        pool_y = self.pool.config.pool_gap
        taskset = TaskSet()
        spec_meta = []

        # line 16: pool -> circuit drops for the assigned inputs
        for m, conn in assigned:
            rail_x, rail_y = self.pool.rail_position(conn.rail)
            pin = Point3(m.timestep, self.config.layout.wire_row(m.wire), 0)
            start = Point3(m.timestep, rail_x, rail_y - 1)
            spec_meta.append(("c", m, conn, start, pin))
            self.journal.log("spec-c", conn.id, m.key)

        # line 17: delivered connections leave the pool
        self.pool.mark_tobeavailable([conn.id for _, conn in assigned])

        # line 18: rail extensions; delivered ones get their final stretch
        extensions = []
        for m, conn in assigned:
            if conn.extended_to is not None and m.timestep > conn.extended_to:
                extensions.append((conn, conn.extended_to + 1, m.timestep))
        extensions.extend(self.pool.extension_targets(frontier))
        extensions.sort(key=lambda e: e[0].rail)
        for conn, first, last in extensions:
            spec_meta.append(("e", conn, first, last))
            self.journal.log("spec-e", conn.id, first, last)

        # line 19: box -> pool links for this step's reservations, whether
        # or not they were already consumed by this step's inputs
        fresh = sorted(
            (self.pool.connections[cid] for cid in self._pending_links),
            key=lambda c: c.rail,
        )
        self._pending_links.clear()
        for conn in fresh:
            spec_meta.append(("b", conn))
            self.journal.log("spec-b", conn.id, conn.source_box)

        # line 20 starts here: every connection touched this step gets its
        # rail guides before the per-spec occupies are minted
        for meta in spec_meta:
            conn = meta[2] if meta[0] == "c" else meta[1]
            self._ensure_rail_guards(conn.rail)
            if conn.id not in self.conn_fwd_guards:
                self._add_fwd_guard(conn)

        # line 20: obstacles; priorities descend along the compute order
        class_rank = (
            {"c": 0, "b": 1, "e": 2}
            if self.config.segment_order == "cbe"
            else {"c": 0, "e": 1, "b": 2}
        )
        spec_meta.sort(key=lambda meta: class_rank[meta[0]])
        n = len(spec_meta)
        built = []
        for i, meta in enumerate(spec_meta):
            prio = n - i
            if meta[0] == "c":
                _, m, conn, start, pin = meta
                shaft_top = max(1, pool_y - 1)
                shaft = Box3(
                    Point3(pin.t, pin.x, 0), Point3(pin.t + 1, pin.x + 1, shaft_top)
                )
                obs = self.world.obstacles.add(shaft, OCCUPY, prio, conn.id)
                own = [obs.oid, self.pin_guards[m.key], self.rail_under_guards[conn.rail]]
                if conn.id in self.conn_fwd_guards:
                    own.append(self.conn_fwd_guards[conn.id])
                spec = SegmentSpec(start, pin, tuple(own), prio, SEG_C, conn.id)
            elif meta[0] == "e":
                _, conn, first, last = meta
                rail_x, rail_y = self.pool.rail_position(conn.rail)
                spec = SegmentSpec(
                    Point3(first, rail_x, rail_y),
                    Point3(last, rail_x, rail_y),
                    (self.rail_line_guards[conn.rail], self.conn_fwd_guards[conn.id]),
                    prio, SEG_E, conn.id,
                )
            else:
                _, conn = meta
                rail_x, rail_y = self.pool.rail_position(conn.rail)
                anchor = Point3(conn.anchor_t, rail_x, rail_y)
                port_guard = self.world.obstacles.add(
                    Box3(conn.port, conn.port.shifted(1, 1, 1)), OCCUPY, prio, conn.id
                )
                spec = SegmentSpec(
                    conn.port, anchor,
                    (port_guard.oid, self.rail_line_guards[conn.rail]),
                    prio, SEG_B, conn.id,
                )
            built.append((spec, meta))
            taskset.add(spec)

        # line 21: compute in descending priority
        try:
            paths = compute_taskset(taskset, self.world, margin=self.config.layout.route_margin)
        except NoPathError as exc:
            self.journal.log("no-path", describe_spec(exc.spec))
            raise SynthesisFailure(str(exc), self.journal) from exc

        for (spec, meta), path in zip(built, paths):
            self.journal.log("path", spec.segment_class, spec.owner, len(path))
            if meta[0] == "c":
                _, m, conn, _, _ = meta
                self.geometry.defects.append(
                    polyline_from_cells(path.cells, "primal", SEG_C)
                )
                self.deliveries[m.key] = (conn.id, path)
                state.mark_connected([m])
            elif meta[0] == "e":
                _, conn, first, last = meta
                self._extend_rail_polyline(conn, path)
                self.pool.apply_extension(conn, last)
            else:
                _, conn = meta
                self.geometry.defects.append(
                    polyline_from_cells(path.cells, "primal", SEG_B)
                )

        # line 22: sweep; freed rails shed their forward guards so new
        # occupants can land beyond the old stretch
        for cid in self.pool.sweep(frontier):
            oid = self.conn_fwd_guards.pop(cid, None)
            if oid is not None:
                self.world.obstacles.remove(oid)

    def _extend_rail_polyline(self, conn, path) -> None:
        poly = self._rail_polylines.get(conn.id)
        if poly is None:
            poly = polyline_from_cells(path.cells, "primal", SEG_E)
            self.geometry.defects.append(poly)
            self._rail_polylines[conn.id] = poly
        else:
            poly.extend_last(Point3(*path.cells[-1]))


def synthesize(circuit: ICMCircuit, config: SynthesisConfig) -> Assembly:
    """Run the full work flow and return the finished assembly."""
    return Synthesizer(circuit, config).run()
