//! One simulation run: nodes, MAC, medium and application traffic driven by
//! the event scheduler.
//!
//! The MAC is a simplified CSMA with link-layer ACKs. Each frame attempt is
//! preceded by a uniform backoff and a clear-channel assessment; a busy
//! channel re-draws the backoff, and too many busy assessments consume the
//! attempt without air time. Control frames (DIO, DIS) are broadcast once
//! and take priority over queued data.

use std::collections::{HashMap, VecDeque};

use crate::engine::{derive_stream, NodeId, RandomStream, Scheduler, SimTime, StreamPurpose};
use crate::medium::{deliver, Medium, Position, RxOutcome, TxId};
use crate::rpl::{forward_decision, DioMessage, ForwardDecision, NodeState, Transition};
use crate::scenario::{
    next_send_time, ConfigError, Layout, ScenarioConfig, TrafficClass, TrafficClassName,
};
use crate::telemetry::{
    average_power, DropCause, EnergyLedger, MetricsReport, PacketOutcome, RadioMeter,
};
use crate::trace::{ControlKind, RadioMode, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DataPacket {
    pub uid: u64,
    pub origin: NodeId,
    pub class: TrafficClassName,
    pub generated: SimTime,
    /// Links traversed so far.
    pub hops: u8,
    /// Generated inside the measurement window.
    pub measured: bool,
}

#[derive(Debug, Clone)]
enum Frame {
    Dio(DioMessage),
    Dis,
    Data(DataPacket),
    Ack { uid: u64 },
}

#[derive(Debug, Clone, Copy)]
enum Outgoing {
    Control(ControlKind),
    Data(DataPacket),
}

#[derive(Debug, Clone, Copy)]
struct Attempt {
    frame: Outgoing,
    /// Attempts consumed, on air or abandoned after busy assessments.
    tries: u8,
    busy: u8,
    last_dest: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    Backoff,
    Cca,
    OnAir,
    AwaitAck { uid: u64, dest: NodeId, acked: bool },
}

struct Mac {
    control: VecDeque<ControlKind>,
    data: VecDeque<DataPacket>,
    current: Option<Attempt>,
    phase: Phase,
    last_uid_from: HashMap<NodeId, u64>,
}

impl Mac {
    fn new() -> Self {
        Mac {
            control: VecDeque::new(),
            data: VecDeque::new(),
            current: None,
            phase: Phase::Idle,
            last_uid_from: HashMap::new(),
        }
    }

    fn data_len(&self) -> usize {
        self.data.len()
            + usize::from(matches!(
                self.current,
                Some(Attempt {
                    frame: Outgoing::Data(_),
                    ..
                })
            ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    AppSend(NodeId),
    TrickleFire(NodeId, u32),
    TrickleEnd(NodeId, u32),
    DisTimer(NodeId, u32),
    BackoffEnd(NodeId),
    TxStart(NodeId),
    TxEnd(TxId),
    AckStart { from: NodeId, to: NodeId, uid: u64 },
    AckTimeout(NodeId),
}

#[derive(Debug, Clone, Copy)]
struct Fate {
    class: TrafficClassName,
    origin: NodeId,
    generated: SimTime,
    outcome: Option<PacketOutcome>,
    hops: u8,
    latency: SimTime,
}

/// Options that do not affect simulation results.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub record_trace: bool,
}

/// Everything a finished run produces. Node states and ledgers are taken at
/// the end of the configured duration, before the drain period.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub config: ScenarioConfig,
    pub positions: Vec<Position>,
    pub report: MetricsReport,
    pub nodes: Vec<NodeState>,
    pub ledgers: Vec<EnergyLedger>,
    pub trace: Vec<TraceRecord>,
    pub events_processed: u64,
    /// Virtual time at which the run (including drain) stopped.
    pub end_time: SimTime,
}

impl RunOutcome {
    pub fn preferred_parents(&self) -> Vec<Option<NodeId>> {
        self.nodes.iter().map(|n| n.preferred_parent).collect()
    }
}

/// Builds the layout from `cfg` and runs it to completion.
pub fn run_scenario(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunOutcome, ConfigError> {
    cfg.validate()?;
    let layout = Layout::build(cfg)?;
    Ok(Network::new(cfg, layout, opts).run())
}

struct Network {
    cfg: ScenarioConfig,
    positions: Vec<Position>,
    sched: Scheduler<Event>,
    medium: Medium<Frame>,
    nodes: Vec<NodeState>,
    macs: Vec<Mac>,
    meters: Vec<RadioMeter>,
    traffic: Vec<RandomStream>,
    jitter: Vec<RandomStream>,
    rx: Vec<RandomStream>,
    trickle_epoch: Vec<u32>,
    dis_epoch: Vec<u32>,
    fates: Vec<Option<Fate>>,
    unresolved: usize,
    next_uid: u64,
    joined_sensors: usize,
    report: MetricsReport,
    trace: Option<Vec<TraceRecord>>,
    duration: SimTime,
    warmup: SimTime,
    airtime_control: SimTime,
    airtime_data: SimTime,
    airtime_ack: SimTime,
    ack_timeout: SimTime,
    turnaround: SimTime,
    cca: SimTime,
    backoff: SimTime,
}

impl Network {
    fn new(cfg: &ScenarioConfig, layout: Layout, opts: RunOptions) -> Self {
        let mcfg = cfg.medium();
        let n = layout.positions.len();
        let medium = Medium::new(mcfg.clone(), &layout.positions);
        let nodes = (0..n)
            .map(|i| {
                NodeState::new(
                    NodeId::from(i),
                    cfg.objective,
                    layout.classes[i],
                    &cfg.protocol,
                    mcfg.max_transmissions,
                )
            })
            .collect();
        let streams = |p| -> Vec<RandomStream> {
            (0..n)
                .map(|i| derive_stream(cfg.seed, p, Some(NodeId::from(i))))
                .collect()
        };
        Network {
            positions: layout.positions.clone(),
            sched: Scheduler::new(),
            nodes,
            macs: (0..n).map(|_| Mac::new()).collect(),
            meters: vec![RadioMeter::new(); n],
            traffic: streams(StreamPurpose::Traffic),
            jitter: streams(StreamPurpose::ProtocolJitter),
            rx: streams(StreamPurpose::Medium),
            trickle_epoch: vec![0; n],
            dis_epoch: vec![0; n],
            fates: Vec::new(),
            unresolved: 0,
            next_uid: 0,
            joined_sensors: 0,
            report: MetricsReport::default(),
            trace: opts.record_trace.then(Vec::new),
            duration: cfg.duration_time(),
            warmup: cfg.warmup_time(),
            airtime_control: mcfg.airtime(mcfg.control_frame_bytes),
            airtime_data: mcfg.airtime(mcfg.data_frame_bytes()),
            airtime_ack: mcfg.airtime(mcfg.ack_frame_bytes),
            ack_timeout: SimTime::from_secs_f64(mcfg.ack_timeout),
            turnaround: SimTime::from_secs_f64(mcfg.turnaround),
            cca: SimTime::from_secs_f64(mcfg.cca_duration),
            backoff: SimTime::from_secs_f64(mcfg.backoff_window),
            medium,
            cfg: cfg.clone(),
        }
    }

    fn sensor_count(&self) -> usize {
        self.nodes.len() - 1
    }

    fn run(mut self) -> RunOutcome {
        self.boot();
        let last_measured = self.duration.saturating_sub(SimTime::from_micros(1));
        while let Some(ev) = self.sched.pop_until(last_measured) {
            self.dispatch(ev.event);
        }
        let ledgers: Vec<EnergyLedger> = self
            .meters
            .iter()
            .map(|m| m.snapshot(self.duration))
            .collect();
        let nodes = self.nodes.clone();

        let drain_end = self.duration + SimTime::from_secs_f64(self.cfg.protocol.drain);
        while self.unresolved > 0 {
            match self.sched.pop_until(drain_end) {
                Some(ev) => self.dispatch(ev.event),
                None => break,
            }
        }
        let end_time = self.sched.now().max(self.duration);
        self.finish(ledgers, nodes, end_time)
    }

    fn boot(&mut self) {
        let now = SimTime::ZERO;
        self.record_route(NodeId::SINK, now);
        self.reset_trickle(NodeId::SINK);
        for i in 1..self.nodes.len() {
            let id = NodeId::from(i);
            self.schedule_dis(id);
            if let Some(class) = self.nodes[i].traffic_class {
                let first =
                    next_send_time(&TrafficClass::of(class), self.warmup, &mut self.traffic[i]);
                self.sched
                    .schedule(first, Event::AppSend(id))
                    .expect("boot schedules in the future");
            }
        }
        if self.sensor_count() == 0 {
            self.report.convergence_time = Some(now);
        }
    }

    fn dispatch(&mut self, ev: Event) {
        match ev {
            Event::AppSend(n) => self.on_app_send(n),
            Event::TrickleFire(n, e) => {
                if e == self.trickle_epoch[n.index()]
                    && self.nodes[n.index()].is_joined()
                    && self.nodes[n.index()].trickle.should_transmit()
                {
                    self.queue_control(n, ControlKind::Dio);
                }
            }
            Event::TrickleEnd(n, e) => {
                if e == self.trickle_epoch[n.index()] {
                    let now = self.sched.now();
                    self.nodes[n.index()]
                        .trickle
                        .next_interval(now, &mut self.jitter[n.index()]);
                    self.schedule_trickle(n);
                }
            }
            Event::DisTimer(n, e) => {
                if e == self.dis_epoch[n.index()] && !self.nodes[n.index()].is_joined() {
                    self.queue_control(n, ControlKind::Dis);
                    self.schedule_dis(n);
                }
            }
            Event::BackoffEnd(n) => self.on_backoff_end(n),
            Event::TxStart(n) => self.on_tx_start(n),
            Event::TxEnd(id) => self.on_tx_end(id),
            Event::AckStart { from, to, uid } => self.on_ack_start(from, to, uid),
            Event::AckTimeout(n) => self.on_ack_timeout(n),
        }
    }

    // ---- application ----

    fn on_app_send(&mut self, n: NodeId) {
        let now = self.sched.now();
        if now >= self.duration {
            return;
        }
        let class = self.nodes[n.index()]
            .traffic_class
            .expect("only sensors with a class generate traffic");
        let measured = now >= self.warmup;
        let pkt = DataPacket {
            uid: self.next_uid,
            origin: n,
            class,
            generated: now,
            hops: 0,
            measured,
        };
        self.next_uid += 1;
        self.fates.push(measured.then_some(Fate {
            class,
            origin: n,
            generated: now,
            outcome: None,
            hops: 0,
            latency: SimTime::ZERO,
        }));
        if measured {
            self.unresolved += 1;
        }
        self.enqueue_data(n, pkt);
        let next = next_send_time(&TrafficClass::of(class), now, &mut self.traffic[n.index()]);
        self.sched
            .schedule(next, Event::AppSend(n))
            .expect("send times move forward");
    }

    fn enqueue_data(&mut self, n: NodeId, pkt: DataPacket) {
        match forward_decision(&self.nodes[n.index()], pkt.hops, self.cfg.protocol.ttl) {
            ForwardDecision::NoRoute => self.drop_packet(&pkt, DropCause::NoRoute),
            ForwardDecision::TtlExceeded => self.drop_packet(&pkt, DropCause::Ttl),
            ForwardDecision::NextHop(_) => {
                let mac = &mut self.macs[n.index()];
                if mac.data_len() >= self.cfg.protocol.queue_capacity {
                    self.drop_packet(&pkt, DropCause::QueueOverflow);
                } else {
                    mac.data.push_back(pkt);
                    self.mac_kick(n);
                }
            }
        }
    }

    fn drop_packet(&mut self, pkt: &DataPacket, cause: DropCause) {
        if !pkt.measured {
            return;
        }
        let fate = self.fates[pkt.uid as usize]
            .as_mut()
            .expect("measured packets have a fate entry");
        match fate.outcome {
            Some(PacketOutcome::Delivered) => {}
            None => {
                fate.outcome = Some(PacketOutcome::Dropped(cause));
                self.unresolved -= 1;
            }
            Some(PacketOutcome::Dropped(_)) => fate.outcome = Some(PacketOutcome::Dropped(cause)),
        }
    }

    fn deliver_to_sink(&mut self, pkt: &DataPacket) {
        if !pkt.measured {
            return;
        }
        let now = self.sched.now();
        let fate = self.fates[pkt.uid as usize]
            .as_mut()
            .expect("measured packets have a fate entry");
        match fate.outcome {
            Some(PacketOutcome::Delivered) => {}
            prev => {
                if prev.is_none() {
                    self.unresolved -= 1;
                }
                fate.outcome = Some(PacketOutcome::Delivered);
                fate.hops = pkt.hops;
                fate.latency = now - pkt.generated;
            }
        }
    }

    // ---- routing timers ----

    fn reset_trickle(&mut self, n: NodeId) {
        let now = self.sched.now();
        self.nodes[n.index()]
            .trickle
            .reset(now, &mut self.jitter[n.index()]);
        self.schedule_trickle(n);
    }

    fn schedule_trickle(&mut self, n: NodeId) {
        let i = n.index();
        self.trickle_epoch[i] = self.trickle_epoch[i].wrapping_add(1);
        let e = self.trickle_epoch[i];
        let (fire, end) = (
            self.nodes[i].trickle.fire_at(),
            self.nodes[i].trickle.interval_end(),
        );
        self.sched
            .schedule(fire, Event::TrickleFire(n, e))
            .expect("fire point lies ahead");
        self.sched
            .schedule(end, Event::TrickleEnd(n, e))
            .expect("interval end lies ahead");
    }

    fn stop_trickle(&mut self, n: NodeId) {
        let i = n.index();
        self.trickle_epoch[i] = self.trickle_epoch[i].wrapping_add(1);
    }

    /// Next DIS after one solicitation period plus up to half a period of
    /// jitter.
    fn schedule_dis(&mut self, n: NodeId) {
        let i = n.index();
        self.dis_epoch[i] = self.dis_epoch[i].wrapping_add(1);
        let period = SimTime::from_secs_f64(self.cfg.protocol.dis_period);
        let jitter = self.jitter[i].uniform_u64(0, period.as_micros() / 2);
        let delay = period + SimTime::from_micros(jitter);
        self.sched
            .schedule_in(delay, Event::DisTimer(n, self.dis_epoch[i]));
    }

    fn apply_transition(&mut self, n: NodeId, tr: Transition) {
        let now = self.sched.now();
        if tr.joined {
            self.dis_epoch[n.index()] = self.dis_epoch[n.index()].wrapping_add(1);
            self.joined_sensors += 1;
            if self.joined_sensors == self.sensor_count() && self.report.convergence_time.is_none()
            {
                self.report.convergence_time = Some(now);
            }
        }
        if tr.detached {
            self.joined_sensors -= 1;
            self.stop_trickle(n);
            self.queue_control(n, ControlKind::Dio);
            self.schedule_dis(n);
        } else if tr.inconsistent() {
            self.reset_trickle(n);
        }
        if tr.joined || tr.detached || tr.parent_changed || tr.rank_before != tr.rank_after {
            self.record_route(n, now);
        }
    }

    fn record_route(&mut self, n: NodeId, now: SimTime) {
        if let Some(t) = self.trace.as_mut() {
            let node = &self.nodes[n.index()];
            t.push(TraceRecord::Route {
                time: now,
                node: n,
                rank: node.rank,
                parent: node.preferred_parent,
            });
        }
    }

    fn on_control_rx(&mut self, r: NodeId, frame: &Frame) {
        let now = self.sched.now();
        match frame {
            Frame::Dio(dio) => {
                let tr = self.nodes[r.index()].on_dio_received(dio, now);
                if !tr.inconsistent() {
                    self.nodes[r.index()].trickle.hear_consistent();
                }
                self.apply_transition(r, tr);
            }
            Frame::Dis => {
                if self.nodes[r.index()].is_joined() {
                    self.reset_trickle(r);
                }
            }
            _ => unreachable!("not a control frame"),
        }
    }

    // ---- MAC ----

    fn queue_control(&mut self, n: NodeId, kind: ControlKind) {
        let mac = &mut self.macs[n.index()];
        if !mac.control.contains(&kind) {
            mac.control.push_back(kind);
        }
        self.mac_kick(n);
    }

    fn mac_kick(&mut self, n: NodeId) {
        let mac = &mut self.macs[n.index()];
        if mac.phase != Phase::Idle || mac.current.is_some() {
            return;
        }
        let frame = if let Some(c) = mac.control.pop_front() {
            Outgoing::Control(c)
        } else if let Some(p) = mac.data.pop_front() {
            Outgoing::Data(p)
        } else {
            return;
        };
        mac.current = Some(Attempt {
            frame,
            tries: 0,
            busy: 0,
            last_dest: None,
        });
        self.start_backoff(n);
    }

    fn start_backoff(&mut self, n: NodeId) {
        self.macs[n.index()].phase = Phase::Backoff;
        let d = self.jitter[n.index()].uniform_u64(0, self.backoff.as_micros() + 1);
        self.sched
            .schedule_in(SimTime::from_micros(d), Event::BackoffEnd(n));
    }

    fn finish_attempt(&mut self, n: NodeId) {
        let mac = &mut self.macs[n.index()];
        mac.current = None;
        mac.phase = Phase::Idle;
        self.mac_kick(n);
    }

    fn channel_busy(&mut self, n: NodeId) {
        let max_cca = self.medium.config().max_cca_attempts;
        let max_tx = self.medium.config().max_transmissions;
        let att = self.macs[n.index()]
            .current
            .as_mut()
            .expect("attempt in progress");
        att.busy += 1;
        if att.busy < max_cca {
            self.start_backoff(n);
            return;
        }
        att.busy = 0;
        match att.frame {
            Outgoing::Control(_) => self.finish_attempt(n),
            Outgoing::Data(pkt) => {
                att.tries += 1;
                if att.tries < max_tx {
                    self.start_backoff(n);
                } else {
                    let (tries, dest) = (att.tries, att.last_dest);
                    self.drop_packet(&pkt, DropCause::MacFailure);
                    if let Some(d) = dest {
                        self.unicast_result(n, d, tries, false);
                    }
                    self.finish_attempt(n);
                }
            }
        }
    }

    fn on_backoff_end(&mut self, n: NodeId) {
        let now = self.sched.now();
        if self.medium.carrier_busy(n, now) {
            self.channel_busy(n);
            return;
        }
        self.macs[n.index()].phase = Phase::Cca;
        self.radio_listen(n, now, now + self.cca);
        self.sched.schedule_in(self.cca, Event::TxStart(n));
    }

    fn on_tx_start(&mut self, n: NodeId) {
        let now = self.sched.now();
        if self.medium.is_transmitting(n, now) {
            self.channel_busy(n);
            return;
        }
        let att = self.macs[n.index()].current.expect("attempt in progress");
        let (frame, dest, airtime) = match att.frame {
            Outgoing::Control(kind) => {
                if now < self.duration {
                    match kind {
                        ControlKind::Dio => self.report.dio_count += 1,
                        ControlKind::Dis => self.report.dis_count += 1,
                    }
                }
                if let Some(t) = self.trace.as_mut() {
                    t.push(TraceRecord::Control {
                        time: now,
                        node: n,
                        message: kind,
                    });
                }
                let frame = match kind {
                    ControlKind::Dio => Frame::Dio(self.nodes[n.index()].dio()),
                    ControlKind::Dis => Frame::Dis,
                };
                (frame, None, self.airtime_control)
            }
            Outgoing::Data(pkt) => {
                match forward_decision(&self.nodes[n.index()], pkt.hops, self.cfg.protocol.ttl) {
                    ForwardDecision::NextHop(parent) => {
                        let a = self.macs[n.index()].current.as_mut().unwrap();
                        a.tries += 1;
                        a.last_dest = Some(parent);
                        (Frame::Data(pkt), Some(parent), self.airtime_data)
                    }
                    other => {
                        let cause = if other == ForwardDecision::TtlExceeded {
                            DropCause::Ttl
                        } else {
                            DropCause::NoRoute
                        };
                        self.drop_packet(&pkt, cause);
                        self.finish_attempt(n);
                        return;
                    }
                }
            }
        };
        self.macs[n.index()].phase = Phase::OnAir;
        self.transmit(n, dest, airtime, frame);
    }

    fn transmit(&mut self, n: NodeId, dest: Option<NodeId>, airtime: SimTime, frame: Frame) {
        let now = self.sched.now();
        let end = now + airtime;
        let id = self.medium.begin(n, dest, airtime, now, frame);
        self.radio_transmit(n, now, end);
        let receivers = self
            .medium
            .active()
            .last()
            .expect("just started")
            .receivers
            .clone();
        for r in receivers {
            self.radio_listen(r, now, end);
        }
        self.sched
            .schedule(end, Event::TxEnd(id))
            .expect("frame ends after it starts");
    }

    fn on_tx_end(&mut self, id: TxId) {
        let now = self.sched.now();
        let tx = self.medium.finish(id);
        let sender = tx.sender;
        let outcomes: Vec<(NodeId, RxOutcome)> = tx
            .receivers
            .iter()
            .map(|&r| (r, deliver(&tx, r, &mut self.rx[r.index()])))
            .collect();
        match &tx.payload {
            Frame::Ack { uid } => {
                for (r, o) in outcomes {
                    if o != RxOutcome::Delivered {
                        continue;
                    }
                    if let Phase::AwaitAck {
                        uid: want,
                        dest,
                        acked,
                    } = &mut self.macs[r.index()].phase
                    {
                        if *want == *uid && *dest == sender {
                            *acked = true;
                        }
                    }
                }
            }
            Frame::Dio(_) | Frame::Dis => {
                for (r, o) in outcomes {
                    if o == RxOutcome::Delivered {
                        self.on_control_rx(r, &tx.payload);
                    }
                }
                self.finish_attempt(sender);
            }
            Frame::Data(pkt) => {
                for (r, o) in outcomes {
                    if o == RxOutcome::Delivered {
                        self.on_data_rx(r, sender, *pkt);
                    }
                }
                let dest = tx.dest.expect("data frames are unicast");
                self.macs[sender.index()].phase = Phase::AwaitAck {
                    uid: pkt.uid,
                    dest,
                    acked: false,
                };
                self.radio_listen(sender, now, now + self.ack_timeout);
                self.sched
                    .schedule_in(self.ack_timeout, Event::AckTimeout(sender));
            }
        }
    }

    fn on_data_rx(&mut self, r: NodeId, from: NodeId, mut pkt: DataPacket) {
        self.sched.schedule_in(
            self.turnaround,
            Event::AckStart {
                from: r,
                to: from,
                uid: pkt.uid,
            },
        );
        let mac = &mut self.macs[r.index()];
        if mac.last_uid_from.insert(from, pkt.uid) == Some(pkt.uid) {
            return;
        }
        pkt.hops = pkt.hops.saturating_add(1);
        if self.nodes[r.index()].is_sink() {
            self.deliver_to_sink(&pkt);
        } else {
            self.enqueue_data(r, pkt);
        }
    }

    fn on_ack_start(&mut self, from: NodeId, to: NodeId, uid: u64) {
        let now = self.sched.now();
        if self.medium.is_transmitting(from, now) {
            return;
        }
        self.transmit(from, Some(to), self.airtime_ack, Frame::Ack { uid });
    }

    fn on_ack_timeout(&mut self, n: NodeId) {
        let Phase::AwaitAck { dest, acked, .. } = self.macs[n.index()].phase else {
            unreachable!("ACK timeout outside of an ACK wait");
        };
        let att = self.macs[n.index()].current.expect("attempt in progress");
        let Outgoing::Data(pkt) = att.frame else {
            unreachable!("only data frames wait for ACKs");
        };
        if acked {
            self.unicast_result(n, dest, att.tries, true);
            self.finish_attempt(n);
        } else if att.tries < self.medium.config().max_transmissions {
            self.macs[n.index()].current.as_mut().unwrap().busy = 0;
            self.start_backoff(n);
        } else {
            self.drop_packet(&pkt, DropCause::MacFailure);
            self.unicast_result(n, dest, att.tries, false);
            self.finish_attempt(n);
        }
    }

    fn unicast_result(&mut self, n: NodeId, dest: NodeId, tries: u8, success: bool) {
        let now = self.sched.now();
        let tr = self.nodes[n.index()].record_unicast(dest, tries, success, now);
        self.apply_transition(n, tr);
    }

    // ---- energy ----

    fn radio_transmit(&mut self, n: NodeId, start: SimTime, end: SimTime) {
        self.meters[n.index()].transmit(start, end);
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceRecord::Radio {
                node: n,
                mode: RadioMode::Tx,
                start,
                end,
            });
        }
    }

    fn radio_listen(&mut self, n: NodeId, start: SimTime, end: SimTime) {
        self.meters[n.index()].listen(start, end);
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceRecord::Radio {
                node: n,
                mode: RadioMode::Rx,
                start,
                end,
            });
        }
    }

    // ---- results ----

    fn finish(
        mut self,
        ledgers: Vec<EnergyLedger>,
        nodes: Vec<NodeState>,
        end_time: SimTime,
    ) -> RunOutcome {
        let mut report = std::mem::take(&mut self.report);
        for (uid, fate) in self.fates.iter().enumerate() {
            let Some(f) = fate else { continue };
            let outcome = f
                .outcome
                .unwrap_or(PacketOutcome::Dropped(DropCause::QueueOverflow));
            report.record_packet(f.class, outcome, f.hops, f.latency);
            if let Some(t) = self.trace.as_mut() {
                t.push(TraceRecord::Packet {
                    uid: uid as u64,
                    origin: f.origin,
                    class: f.class,
                    generated: f.generated,
                    outcome,
                    hops: f.hops,
                    latency: f.latency,
                });
            }
        }
        let energy = &self.cfg.energy;
        report.node_power_mw = ledgers
            .iter()
            .map(|l| average_power(l, self.duration, energy).expect("duration is positive"))
            .collect();
        let sensors = &report.node_power_mw[1..];
        report.avg_power_mw = if sensors.is_empty() {
            0.0
        } else {
            sensors.iter().sum::<f64>() / sensors.len() as f64
        };
        report.total_energy_mj = ledgers[1..].iter().map(|l| l.energy_mj(energy)).sum();
        RunOutcome {
            config: self.cfg,
            positions: self.positions,
            report,
            nodes,
            ledgers,
            trace: self.trace.unwrap_or_default(),
            events_processed: self.sched.processed(),
            end_time,
        }
    }
}
