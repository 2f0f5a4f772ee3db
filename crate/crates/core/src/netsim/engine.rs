use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BinaryHeap, HashMap};

use serde::{Deserialize, Serialize};

use super::cost::{compute_ns, OperatorCost};
use super::network::{ms_to_ns, NetworkCondition};
use super::report::{LinkStats, OperatorStats, QueueStats, SimReport, SinkOutput, SinkRecord, Snapshot};
use super::workload::source_items;
use super::SimError;
use crate::dynamic::{self, DurableQueue, InstanceShape, PlanDelta, QueueRecord, UpdateCommand, UpdateError, UpdateKind};
use crate::functions::{Accumulator, AggregateFn, FilterFn, FlatMapFn, KeyFn, MapFn};
use crate::graph::{LogicalOperator, OperatorKind};
use crate::planner::{self, BoundaryMode, ExecutionGraph, JobSpec, OperatorInstance, Routing};
use crate::topology::ZoneTopology;
use crate::value::{fnv1a64, DataItem, Key};

/// What an operator instance does to each item.
#[derive(Debug)]
enum Logic {
    Source,
    Map(MapFn),
    Filter(FilterFn),
    FlatMap(FlatMapFn),
    KeyBy(KeyFn),
    Window { size: Option<u64>, agg: AggregateFn, open: BTreeMap<Key, (Accumulator, u32)> },
    Sink,
}

impl Logic {
    fn of(op: &LogicalOperator) -> Logic {
        let f = || op.function().expect("function params");
        match op.kind {
            OperatorKind::Source => Logic::Source,
            OperatorKind::Map => Logic::Map(MapFn::lookup(f()).expect("validated")),
            OperatorKind::Filter => Logic::Filter(FilterFn::lookup(f()).expect("validated")),
            OperatorKind::FlatMap => Logic::FlatMap(FlatMapFn::lookup(f()).expect("validated")),
            OperatorKind::KeyBy => Logic::KeyBy(KeyFn::lookup(f()).expect("validated")),
            OperatorKind::WindowAggregate => {
                let (size, agg) = op.window().expect("window params");
                Logic::Window { size, agg: AggregateFn::lookup(agg).expect("validated"), open: BTreeMap::new() }
            }
            OperatorKind::Sink => Logic::Sink,
        }
    }

    /// Swaps in new parameters, keeping open windows.
    fn replace(&mut self, op: &LogicalOperator) {
        match (Logic::of(op), self) {
            (Logic::Window { size, agg, .. }, Logic::Window { size: s, agg: a, .. }) => {
                *s = size;
                *a = agg;
            }
            (fresh, this) => *this = fresh,
        }
    }

    /// Output items and units of work for one input item.
    fn apply(&mut self, item: DataItem) -> (Vec<DataItem>, u64) {
        match self {
            Logic::Source | Logic::Sink => (Vec::new(), 0),
            Logic::Map(f) => {
                let (out, work) = f.apply(item);
                (vec![out], work)
            }
            Logic::Filter(f) => (if f.keep(&item) { vec![item] } else { Vec::new() }, 0),
            Logic::FlatMap(f) => (f.apply(item), 0),
            Logic::KeyBy(f) => (vec![f.apply(item)], 0),
            Logic::Window { size, agg, open } => {
                let (acc, origin) = open.entry(item.key.clone()).or_insert_with(|| (Accumulator::default(), item.origin));
                acc.push(&item.value);
                *origin = (*origin).min(item.origin);
                if size.is_some_and(|s| acc.count >= s) {
                    let (acc, origin) = open.remove(&item.key).expect("just inserted");
                    (vec![DataItem { key: item.key, value: acc.finish(*agg), origin }], 0)
                } else {
                    (Vec::new(), 0)
                }
            }
        }
    }

    /// Partial windows at end of stream, in key order.
    fn flush(&mut self) -> Vec<DataItem> {
        match self {
            Logic::Window { agg, open, .. } => std::mem::take(open)
                .into_iter()
                .map(|(key, (acc, origin))| DataItem { key, value: acc.finish(*agg), origin })
                .collect(),
            _ => Vec::new(),
        }
    }
}

/// Channels from one producer to the instances of one downstream operator.
#[derive(Debug)]
struct OutGroup {
    to_operator: usize,
    routing: Routing,
    /// Channel ids ordered by consumer instance index.
    channels: Vec<usize>,
    /// Round-robin: channel each key was first sent to.
    sticky: HashMap<Key, usize>,
    next: usize,
}

impl OutGroup {
    fn pick(&mut self, key: &Key) -> usize {
        let n = self.channels.len();
        match self.routing {
            Routing::KeyHash => self.channels[(key.route_hash() % n as u64) as usize],
            Routing::RoundRobin => {
                if let Some(&c) = self.sticky.get(key) {
                    return c;
                }
                let c = self.channels[self.next % n];
                self.next = (self.next + 1) % n;
                self.sticky.insert(key.clone(), c);
                c
            }
        }
    }
}

#[derive(Debug)]
struct SourceState {
    items: std::vec::IntoIter<DataItem>,
    stopped: bool,
}

#[derive(Debug)]
struct Slot {
    shape: InstanceShape,
    operator: usize,
    unit: usize,
    label: String,
    core: usize,
    speed: f64,
    cost: OperatorCost,
    logic: Logic,
    outputs: Vec<OutGroup>,
    /// All channel ids leaving this instance, in creation order.
    out_channels: Vec<usize>,
    inputs: usize,
    eos_seen: usize,
    finishing: bool,
    finished: bool,
    last_done: u64,
    pending_done: u32,
    items_in: u64,
    items_out: u64,
    /// Completion time of every item handled, non-decreasing.
    done_times: Vec<u64>,
    source: Option<SourceState>,
}

#[derive(Debug)]
struct ChannelState {
    to: usize,
    local: bool,
    links: Vec<usize>,
    buffer: Vec<DataItem>,
    queue: Option<(usize, usize)>,
}

#[derive(Debug)]
struct LinkState {
    name: String,
    transmit: super::Bandwidth,
    latency_ns: u64,
    free_at: u64,
    stats: LinkStats,
}

#[derive(Debug)]
struct QueueState {
    queue: DurableQueue,
    consumer_unit: usize,
    /// Consumer slot of each partition.
    partition_slots: Vec<usize>,
    paused: bool,
}

#[derive(Debug)]
struct Message {
    channel: usize,
    items: Vec<DataItem>,
    eos: bool,
    bytes: u64,
}

#[derive(Debug)]
enum Event {
    SourceStep(usize),
    Arrive { slot: usize, item: DataItem },
    Eos(usize),
    Done { slot: usize, items: Vec<DataItem> },
    Finish(usize),
    Hop { msg: Message, hop: usize },
    Deliver(Message),
    Commit { queue: usize, partition: usize, offset: u64 },
    Update(usize),
    Resume(usize),
    Snapshot(String),
}

impl Event {
    /// Bookkeeping events run before data events at the same instant and are
    /// not counted.
    fn is_control(&self) -> bool {
        matches!(self, Event::Commit { .. } | Event::Update(_) | Event::Resume(_) | Event::Snapshot(_))
    }
}

struct Scheduled {
    time: u64,
    class: u8,
    seq: u64,
    event: Event,
}

impl Scheduled {
    fn order(&self) -> (u64, u8, u64) {
        (self.time, self.class, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.order() == other.order()
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.order().cmp(&other.order())
    }
}

/// A unit replacement waiting for its downtime to end.
#[derive(Debug)]
struct PendingReplace {
    command: usize,
    unit: usize,
    queues: Vec<usize>,
    graph: crate::graph::LogicalGraph,
}

/// One applied update.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at_ns: u64,
    pub command: UpdateCommand,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<PlanDelta>,
}

/// Everything a finished run produced.
#[derive(Clone, Debug)]
pub struct SimOutcome {
    pub report: SimReport,
    pub output: SinkOutput,
    pub audit: Vec<AuditEntry>,
    pub snapshots: Vec<Snapshot>,
    /// The plan in force at the end of the run.
    pub plan: ExecutionGraph,
}

/// A running discrete-event simulation of one execution graph.
pub struct Simulation {
    topology: ZoneTopology,
    condition: NetworkCondition,
    job: JobSpec,
    plan: ExecutionGraph,
    now: u64,
    seq: u64,
    agenda: BinaryHeap<Reverse<Scheduled>>,
    slots: Vec<Slot>,
    slot_of: BTreeMap<InstanceShape, usize>,
    cores: Vec<u64>,
    core_of: BTreeMap<(String, u32), usize>,
    channels: Vec<ChannelState>,
    channel_of: BTreeMap<(usize, usize), usize>,
    links: Vec<LinkState>,
    link_of: BTreeMap<(String, String), usize>,
    queues: Vec<QueueState>,
    queue_of: BTreeMap<String, usize>,
    collected: Vec<SinkRecord>,
    events: u64,
    makespan: u64,
    updates: Vec<UpdateCommand>,
    replacements: Vec<PendingReplace>,
    audit: Vec<AuditEntry>,
    snapshots: Vec<Snapshot>,
}

impl Simulation {
    pub fn new(
        plan: &ExecutionGraph,
        topology: &ZoneTopology,
        condition: &NetworkCondition,
        job: &JobSpec,
    ) -> Result<Self, SimError> {
        if plan.topology != topology.fingerprint() {
            return Err(SimError::Mismatch("plan was made for a different topology".into()));
        }
        condition.validate().map_err(SimError::Config)?;
        job.cost.validate().map_err(SimError::Config)?;
        let mut job = job.clone();
        job.graph = plan.graph.clone();
        job.strategy = plan.strategy;
        job.boundary = plan.boundary;
        job.locations = plan.locations.iter().cloned().collect();

        let mut links = Vec::new();
        let mut link_of = BTreeMap::new();
        for z in topology.zones() {
            let Some(parent) = &z.parent else { continue };
            let spec = condition.link(&z.id);
            for (a, b) in [(z.id.clone(), parent.clone()), (parent.clone(), z.id.clone())] {
                link_of.insert((a.clone(), b.clone()), links.len());
                links.push(LinkState {
                    name: format!("{a}->{b}"),
                    transmit: spec.bandwidth,
                    latency_ns: ms_to_ns(spec.latency_ms),
                    free_at: 0,
                    stats: LinkStats::default(),
                });
            }
        }
        let mut sim = Simulation {
            topology: topology.clone(),
            condition: condition.clone(),
            job,
            plan: ExecutionGraph { instances: Vec::new(), channels: Vec::new(), queues: Vec::new(), ..plan.clone() },
            now: 0,
            seq: 0,
            agenda: BinaryHeap::new(),
            slots: Vec::new(),
            slot_of: BTreeMap::new(),
            cores: Vec::new(),
            core_of: BTreeMap::new(),
            channels: Vec::new(),
            channel_of: BTreeMap::new(),
            links,
            link_of,
            queues: Vec::new(),
            queue_of: BTreeMap::new(),
            collected: Vec::new(),
            events: 0,
            makespan: 0,
            updates: Vec::new(),
            replacements: Vec::new(),
            audit: Vec::new(),
            snapshots: Vec::new(),
        };
        sim.install(plan.clone())?;
        Ok(sim)
    }

    pub fn now_ns(&self) -> u64 {
        self.now
    }

    pub fn plan(&self) -> &ExecutionGraph {
        &self.plan
    }

    /// Schedules `command` at its effective time.
    pub fn apply_update(&mut self, command: UpdateCommand) -> Result<(), SimError> {
        if self.plan.boundary != BoundaryMode::Queued {
            return Err(UpdateError::NotQueued.into());
        }
        let at = command.at_ns()?;
        if at < self.now {
            return Err(UpdateError::InThePast { at_ns: at, now_ns: self.now }.into());
        }
        if let UpdateKind::ReplaceUnit { unit, downtime_ms, .. } = &command.kind {
            if self.plan.find_unit(unit).is_none() {
                return Err(UpdateError::UnknownUnit(unit.clone()).into());
            }
            if !(downtime_ms.is_finite() && *downtime_ms >= 0.0) {
                return Err(UpdateError::BadTime.into());
            }
        }
        self.updates.push(command);
        self.push(at, Event::Update(self.updates.len() - 1));
        Ok(())
    }

    /// Records per-operator counters at `at_ns`.
    pub fn snapshot_at(&mut self, at_ns: u64, tag: &str) {
        self.push(at_ns.max(self.now), Event::Snapshot(tag.to_string()));
    }

    /// Processes every event up to and including `until_ns`.
    pub fn run_until(&mut self, until_ns: u64) -> Result<(), SimError> {
        while self.agenda.peek().is_some_and(|Reverse(s)| s.time <= until_ns) {
            self.step()?;
        }
        self.now = self.now.max(until_ns);
        Ok(())
    }

    /// Runs to quiescence.
    pub fn run(mut self) -> Result<SimOutcome, SimError> {
        while !self.agenda.is_empty() {
            self.step()?;
        }
        for s in &self.slots {
            if !s.finished {
                return Err(SimError::Stalled(s.label.clone()));
            }
        }
        Ok(self.finish())
    }

    fn push(&mut self, time: u64, event: Event) {
        let class = u8::from(!event.is_control());
        self.agenda.push(Reverse(Scheduled { time, class, seq: self.seq, event }));
        self.seq += 1;
    }

    fn step(&mut self) -> Result<(), SimError> {
        let Reverse(s) = self.agenda.pop().expect("caller checked");
        self.now = s.time;
        if !s.event.is_control() {
            self.events += 1;
            self.makespan = self.makespan.max(s.time);
        }
        match s.event {
            Event::SourceStep(slot) => self.source_step(slot)?,
            Event::Arrive { slot, item } => self.process(slot, item)?,
            Event::Eos(slot) => self.eos(slot),
            Event::Done { slot, items } => {
                self.slots[slot].pending_done -= 1;
                self.emit(slot, items)?;
            }
            Event::Finish(slot) => self.finish_slot(slot)?,
            Event::Hop { msg, hop } => self.hop(msg, hop)?,
            Event::Deliver(msg) => self.deliver(msg)?,
            Event::Commit { queue, partition, offset } => self.queues[queue].queue.commit(partition, offset),
            Event::Update(i) => self.update(i)?,
            Event::Resume(i) => self.resume(i)?,
            Event::Snapshot(tag) => self.take_snapshot(tag),
        }
        Ok(())
    }

    fn at(&self, delay: u64) -> Result<u64, SimError> {
        self.now.checked_add(delay).ok_or(SimError::ClockOverflow)
    }

    fn source_step(&mut self, slot: usize) -> Result<(), SimError> {
        let cost = self.job.cost.source_us;
        let cost_ns = compute_ns(OperatorCost::flat(cost), 0, self.slots[slot].speed);
        loop {
            let s = &mut self.slots[slot];
            let src = s.source.as_mut().expect("source slot");
            if src.stopped || s.finishing {
                return Ok(());
            }
            let Some(item) = src.items.next() else {
                s.finishing = true;
                let t = self.now.max(s.last_done);
                self.push(t, Event::Finish(slot));
                return Ok(());
            };
            let start = self.cores[s.core].max(self.now);
            let done = start.checked_add(cost_ns).ok_or(SimError::ClockOverflow)?;
            self.cores[s.core] = done;
            s.last_done = done;
            s.done_times.push(done);
            s.items_out += 1;
            if done == self.now && s.pending_done == 0 {
                self.emit(slot, vec![item])?;
            } else {
                s.pending_done += 1;
                self.push(done, Event::Done { slot, items: vec![item] });
                self.push(done, Event::SourceStep(slot));
                return Ok(());
            }
        }
    }

    fn process(&mut self, slot: usize, item: DataItem) -> Result<(), SimError> {
        let s = &mut self.slots[slot];
        s.items_in += 1;
        if matches!(s.logic, Logic::Sink) {
            s.done_times.push(self.now);
            self.collected.push(SinkRecord { sink: s.operator, item });
            return Ok(());
        }
        let (out, work) = s.logic.apply(item);
        let start = self.cores[s.core].max(self.now);
        let done = start.checked_add(compute_ns(s.cost, work, s.speed)).ok_or(SimError::ClockOverflow)?;
        self.cores[s.core] = done;
        s.last_done = done;
        s.done_times.push(done);
        s.items_out += out.len() as u64;
        if out.is_empty() {
            return Ok(());
        }
        if done == self.now && s.pending_done == 0 {
            self.emit(slot, out)
        } else {
            s.pending_done += 1;
            self.push(done, Event::Done { slot, items: out });
            Ok(())
        }
    }

    fn emit(&mut self, slot: usize, items: Vec<DataItem>) -> Result<(), SimError> {
        let groups = self.slots[slot].outputs.len();
        for item in items {
            for g in 0..groups {
                let ch = self.slots[slot].outputs[g].pick(&item.key);
                self.send_item(ch, item.clone())?;
            }
        }
        Ok(())
    }

    fn send_item(&mut self, ch: usize, item: DataItem) -> Result<(), SimError> {
        let c = &mut self.channels[ch];
        if c.local {
            let to = c.to;
            self.push(self.now, Event::Arrive { slot: to, item });
            return Ok(());
        }
        c.buffer.push(item);
        if c.buffer.len() as u64 >= self.job.cost.batch_items {
            self.send_message(ch, false)?;
        }
        Ok(())
    }

    fn send_message(&mut self, ch: usize, eos: bool) -> Result<(), SimError> {
        let items = std::mem::take(&mut self.channels[ch].buffer);
        let bytes = self.job.cost.message_bytes(items.len());
        let msg = Message { channel: ch, items, eos, bytes };
        if self.channels[ch].links.is_empty() {
            self.push(self.now, Event::Deliver(msg));
            Ok(())
        } else {
            self.hop(msg, 0)
        }
    }

    /// Puts `msg` on the `hop`-th link of its channel's path.
    fn hop(&mut self, msg: Message, hop: usize) -> Result<(), SimError> {
        let c = &self.channels[msg.channel];
        let last = hop + 1 == c.links.len();
        let link = &mut self.links[c.links[hop]];
        let start = link.free_at.max(self.now);
        let sent = start.checked_add(link.transmit.transmit_ns(msg.bytes)).ok_or(SimError::ClockOverflow)?;
        link.free_at = sent;
        link.stats.bytes += msg.bytes;
        link.stats.messages += 1;
        let arrival = sent.checked_add(link.latency_ns).ok_or(SimError::ClockOverflow)?;
        if last {
            self.push(arrival, Event::Deliver(msg));
        } else {
            self.push(arrival, Event::Hop { msg, hop: hop + 1 });
        }
        Ok(())
    }

    fn deliver(&mut self, msg: Message) -> Result<(), SimError> {
        let c = &self.channels[msg.channel];
        let to = c.to;
        match c.queue {
            None => self.consume(to, msg.items, msg.eos),
            Some((q, p)) => {
                self.queues[q].queue.append(p, QueueRecord { items: msg.items, eos: msg.eos });
                self.drain_partition(q, p)
            }
        }
    }

    fn drain_partition(&mut self, q: usize, p: usize) -> Result<(), SimError> {
        while !self.queues[q].paused {
            let slot = self.queues[q].partition_slots[p];
            let Some((offset, record)) = self.queues[q].queue.poll(p) else { break };
            let (items, eos) = (record.items.clone(), record.eos);
            let empty = items.is_empty();
            self.consume(slot, items, eos)?;
            let done = if empty { self.now } else { self.slots[slot].last_done.max(self.now) };
            self.push(done, Event::Commit { queue: q, partition: p, offset });
        }
        Ok(())
    }

    fn consume(&mut self, slot: usize, items: Vec<DataItem>, eos: bool) -> Result<(), SimError> {
        for item in items {
            self.process(slot, item)?;
        }
        if eos {
            self.eos(slot);
        }
        Ok(())
    }

    fn eos(&mut self, slot: usize) {
        let s = &mut self.slots[slot];
        s.eos_seen += 1;
        if s.eos_seen == s.inputs {
            s.finishing = true;
            let t = self.now.max(s.last_done);
            self.push(t, Event::Finish(slot));
        }
    }

    fn finish_slot(&mut self, slot: usize) -> Result<(), SimError> {
        let flushed = self.slots[slot].logic.flush();
        self.slots[slot].items_out += flushed.len() as u64;
        self.emit(slot, flushed)?;
        for i in 0..self.slots[slot].out_channels.len() {
            let ch = self.slots[slot].out_channels[i];
            if self.channels[ch].local {
                self.push(self.now, Event::Eos(self.channels[ch].to));
            } else {
                self.send_message(ch, true)?;
            }
        }
        self.slots[slot].finished = true;
        Ok(())
    }

    fn take_snapshot(&mut self, tag: String) {
        let mut operators = BTreeMap::new();
        let mut instances = BTreeMap::new();
        for s in &self.slots {
            let processed = s.done_times.partition_point(|&t| t <= self.now) as u64;
            *operators.entry(s.label.clone()).or_insert(0) += processed;
            let name = match &s.shape.location {
                Some(l) => format!("{}@{}", s.label, l),
                None => format!("{}@{}/{}", s.label, s.shape.host, s.shape.core),
            };
            instances.insert(name, processed);
        }
        self.snapshots.push(Snapshot { at_ns: self.now, tag, operators, instances });
    }

    fn update(&mut self, i: usize) -> Result<(), SimError> {
        let command = self.updates[i].clone();
        let entry = match &command.kind {
            UpdateKind::AddLocation { location } => {
                if self.job.locations.contains(location) {
                    return Err(UpdateError::AlreadyActive(location.clone()).into());
                }
                let mut job = self.job.clone();
                job.locations.insert(location.clone());
                let new_plan = planner::plan(&job, &self.topology)?;
                let delta = dynamic::diff_plans(&self.plan, &new_plan)?;
                self.job = job;
                self.install(new_plan)?;
                AuditEntry { at_ns: self.now, summary: delta.summary(), command, delta: Some(delta) }
            }
            UpdateKind::RemoveLocation { location } => {
                if !self.job.locations.contains(location) {
                    return Err(UpdateError::NotActive(location.clone()).into());
                }
                let mut job = self.job.clone();
                job.locations.remove(location);
                let new_plan = planner::plan(&job, &self.topology)?;
                let delta = dynamic::diff_plans(&self.plan, &new_plan)?;
                for slot in 0..self.slots.len() {
                    let s = &mut self.slots[slot];
                    if s.shape.location.as_deref() != Some(location.as_str()) {
                        continue;
                    }
                    if let Some(src) = &mut s.source {
                        src.stopped = true;
                    }
                    if !s.finishing {
                        s.finishing = true;
                        let t = self.now.max(s.last_done);
                        self.push(t, Event::Finish(slot));
                    }
                }
                self.job = job;
                self.plan = new_plan;
                AuditEntry { at_ns: self.now, summary: delta.summary(), command, delta: Some(delta) }
            }
            UpdateKind::ReplaceUnit { unit, downtime_ms, chain } => {
                let u = self.plan.find_unit(unit).ok_or_else(|| UpdateError::UnknownUnit(unit.clone()))?.clone();
                let queues: Vec<usize> = (0..self.queues.len()).filter(|&q| self.queues[q].consumer_unit == u.id).collect();
                if queues.is_empty() {
                    return Err(UpdateError::NoInputQueue(u.id).into());
                }
                let graph = match chain {
                    Some(chain) => dynamic::replace_chain(&self.plan.graph, &u, chain)?,
                    None => self.plan.graph.clone(),
                };
                for &q in &queues {
                    self.queues[q].paused = true;
                }
                let resume_at = self.at(ms_to_ns(*downtime_ms))?;
                let tag = format!("replace {} ", u.label());
                self.take_snapshot(format!("{tag}start"));
                self.push(resume_at, Event::Snapshot(format!("{tag}end")));
                self.replacements.push(PendingReplace { command: i, unit: u.id, queues, graph });
                self.push(resume_at, Event::Resume(self.replacements.len() - 1));
                let summary = format!("pause {} input queues of {} until {resume_at} ns", self.replacements.last().unwrap().queues.len(), u.label());
                AuditEntry { at_ns: self.now, summary, command, delta: None }
            }
        };
        self.audit.push(entry);
        Ok(())
    }

    /// Restarts a replaced unit once its downtime is over and everything it
    /// had already dequeued has been processed.
    fn resume(&mut self, i: usize) -> Result<(), SimError> {
        let unit = self.replacements[i].unit;
        let drained = self.slots.iter().filter(|s| s.unit == unit).map(|s| s.last_done).max().unwrap_or(0);
        if drained > self.now {
            self.push(drained, Event::Resume(i));
            return Ok(());
        }
        let graph = self.replacements[i].graph.clone();
        for s in self.slots.iter_mut().filter(|s| s.unit == unit) {
            s.logic.replace(graph.operator(s.operator));
            s.cost = self.job.cost.cost_of(graph.operator(s.operator));
        }
        self.plan.graph = graph.clone();
        self.job.graph = graph;
        for q in self.replacements[i].queues.clone() {
            self.queues[q].paused = false;
            for p in 0..self.queues[q].queue.partitions() {
                self.queues[q].queue.rewind(p);
                self.drain_partition(q, p)?;
            }
        }
        let entry = AuditEntry {
            at_ns: self.now,
            command: self.updates[self.replacements[i].command].clone(),
            summary: format!("resume u{unit} from committed offsets"),
            delta: None,
        };
        self.audit.push(entry);
        Ok(())
    }

    /// Brings the engine in line with `plan`: creates slots, channels and
    /// queues that do not exist yet and starts new sources. Existing state is
    /// kept, so this serves both the initial plan and location additions.
    fn install(&mut self, plan: ExecutionGraph) -> Result<(), SimError> {
        let mut new_slots = Vec::new();
        for inst in &plan.instances {
            let shape = InstanceShape::of(inst);
            if let Some(&slot) = self.slot_of.get(&shape) {
                if self.slots[slot].source.as_ref().is_some_and(|s| s.stopped) {
                    return Err(UpdateError::Readded(inst.location.clone().unwrap_or_default()).into());
                }
                continue;
            }
            let slot = self.create_slot(&plan, inst)?;
            self.slot_of.insert(shape, slot);
            new_slots.push(slot);
        }
        let slot_for = |sim: &Self, r| sim.slot_of[&InstanceShape::of(plan.instance(r).expect("channel endpoint"))];
        let mut partition_of: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        for binding in &plan.queues {
            let q = match self.queue_of.get(&binding.id) {
                Some(&q) => q,
                None => {
                    self.queue_of.insert(binding.id.clone(), self.queues.len());
                    self.queues.push(QueueState {
                        queue: DurableQueue::new(binding.id.clone(), 0),
                        consumer_unit: binding.consumer_unit,
                        partition_slots: Vec::new(),
                        paused: false,
                    });
                    self.queues.len() - 1
                }
            };
            for &r in &binding.partitions {
                let slot = slot_for(self, r);
                let existing = self.queues[q].partition_slots.iter().position(|&s| s == slot);
                let p = existing.unwrap_or_else(|| {
                    self.queues[q].partition_slots.push(slot);
                    self.queues[q].queue.add_partition()
                });
                partition_of.insert((q, slot), p);
            }
        }
        let mut touched = Vec::new();
        for c in &plan.channels {
            let (from, to) = (slot_for(self, c.from), slot_for(self, c.to));
            if self.channel_of.contains_key(&(from, to)) {
                continue;
            }
            let consumer = &mut self.slots[to];
            if consumer.finishing {
                return Err(UpdateError::ConsumerFinished(consumer.label.clone()).into());
            }
            consumer.inputs += 1;
            let links = c
                .path
                .windows(2)
                .map(|w| {
                    self.link_of
                        .get(&(w[0].clone(), w[1].clone()))
                        .copied()
                        .ok_or_else(|| SimError::Mismatch(format!("path hop {}->{} is not a tree edge", w[0], w[1])))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let local = self.slots[from].shape.host == self.slots[to].shape.host && c.queue.is_none();
            let queue = c.queue.as_ref().map(|id| {
                let q = self.queue_of[id];
                (q, partition_of[&(q, to)])
            });
            let ch = self.channels.len();
            self.channels.push(ChannelState { to, local, links, buffer: Vec::new(), queue });
            self.channel_of.insert((from, to), ch);
            let producer = &mut self.slots[from];
            producer.out_channels.push(ch);
            let to_operator = c.to.0;
            let group = match producer.outputs.iter().position(|g| g.to_operator == to_operator) {
                Some(g) => g,
                None => {
                    producer.outputs.push(OutGroup {
                        to_operator,
                        routing: c.routing,
                        channels: Vec::new(),
                        sticky: HashMap::new(),
                        next: 0,
                    });
                    producer.outputs.len() - 1
                }
            };
            producer.outputs[group].channels.push(ch);
            touched.push((from, group));
        }
        // keep group members in consumer-index order of the new plan
        let index_of: HashMap<usize, (usize, usize)> = plan
            .instances
            .iter()
            .map(|i| (self.slot_of[&InstanceShape::of(i)], (i.operator, i.index)))
            .collect();
        touched.sort_unstable();
        touched.dedup();
        for (slot, g) in touched {
            let channels = &self.channels;
            let group = &mut self.slots[slot].outputs[g];
            group.channels.sort_by_key(|&ch| index_of[&channels[ch].to]);
            if group.sticky.is_empty() {
                // round-robin starts at a position derived from the producer's identity
                let s = &self.slots[slot].shape;
                let seed = format!("{}/{}/{}/{}", s.operator, s.host, s.core, s.location.as_deref().unwrap_or(""));
                let group = &mut self.slots[slot].outputs[g];
                group.next = (fnv1a64(seed.as_bytes()) % group.channels.len() as u64) as usize;
            }
        }
        for &slot in &new_slots {
            if self.slots[slot].source.is_some() {
                self.push(self.now, Event::SourceStep(slot));
            } else if self.slots[slot].inputs == 0 {
                self.slots[slot].finishing = true;
                self.push(self.now, Event::Finish(slot));
            }
        }
        self.plan = plan;
        Ok(())
    }

    fn create_slot(&mut self, plan: &ExecutionGraph, inst: &OperatorInstance) -> Result<usize, SimError> {
        let host = self
            .topology
            .host(&inst.host)
            .ok_or_else(|| SimError::Mismatch(format!("plan uses unknown host {}", inst.host)))?;
        if host.zone != inst.zone || inst.core >= host.cores {
            return Err(SimError::Mismatch(format!("instance on {}/{} does not match the topology", inst.host, inst.core)));
        }
        let speed = host.speed;
        let op = plan.graph.operator(inst.operator);
        let core = match self.core_of.get(&(inst.host.clone(), inst.core)) {
            Some(&c) => c,
            None => {
                self.core_of.insert((inst.host.clone(), inst.core), self.cores.len());
                self.cores.push(0);
                self.cores.len() - 1
            }
        };
        let source = match (op.source(), &inst.location) {
            (Some(spec), Some(location)) => Some(SourceState {
                items: source_items(spec, location, self.job.workload.events_per_location, self.job.workload.seed)
                    .into_iter(),
                stopped: false,
            }),
            (Some(_), None) => return Err(SimError::Mismatch(format!("source {} has no location", op.label()))),
            _ => None,
        };
        self.slots.push(Slot {
            shape: InstanceShape::of(inst),
            operator: inst.operator,
            unit: plan.unit_of(inst.operator).map_or(0, |u| u.id),
            label: op.label(),
            core,
            speed,
            cost: self.job.cost.cost_of(op),
            logic: Logic::of(op),
            outputs: Vec::new(),
            out_channels: Vec::new(),
            inputs: 0,
            eos_seen: 0,
            finishing: false,
            finished: false,
            last_done: 0,
            pending_done: 0,
            items_in: 0,
            items_out: 0,
            done_times: Vec::new(),
            source,
        });
        Ok(self.slots.len() - 1)
    }

    fn finish(self) -> SimOutcome {
        let output = SinkOutput::new(self.collected);
        let operators = self
            .plan
            .graph
            .operators()
            .iter()
            .map(|op| {
                let slots = self.slots.iter().filter(|s| s.operator == op.id);
                let (mut instances, mut items_in, mut items_out) = (0, 0, 0);
                for s in slots {
                    instances += 1;
                    items_in += s.items_in;
                    items_out += s.items_out;
                }
                OperatorStats { id: op.id, label: op.label(), instances, items_in, items_out }
            })
            .collect();
        let queues = self
            .queues
            .iter()
            .map(|q| {
                let appended = q.queue.appended_items();
                let committed = q.queue.committed_items();
                QueueStats {
                    id: q.queue.id().to_string(),
                    appended_messages: q.queue.appended_messages(),
                    appended_items: appended,
                    committed_items: committed,
                    residue_items: appended - committed,
                }
            })
            .collect::<Vec<_>>();
        let mut queues = queues;
        queues.sort_by(|a, b| a.id.cmp(&b.id));
        let report = SimReport {
            strategy: self.plan.strategy,
            boundary: self.plan.boundary,
            locations: self.plan.locations.clone(),
            network: self.condition,
            makespan_ns: self.makespan,
            makespan_s: self.makespan as f64 / 1e9,
            events: self.events,
            links: self.links.iter().map(|l| (l.name.clone(), l.stats)).collect(),
            operators,
            queues,
            sink_items: output.len() as u64,
            sink_digest: output.digest(),
        };
        SimOutcome { report, output, audit: self.audit, snapshots: self.snapshots, plan: self.plan }
    }
}
