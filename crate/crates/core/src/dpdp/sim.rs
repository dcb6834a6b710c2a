use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, VecDeque};

use rand_distr::{Distribution, Exp};

use super::trace::{EventKind, SimDemand, SimTrace, TraceEvent};
use super::{DpdpConfig, Policy};
use crate::error::{CraneError, Result};
use crate::geometry::Point;
use crate::instance::{Demand, Instance};
use crate::scp::splice;

#[derive(Debug, Clone, PartialEq)]
pub struct ScriptedArrival {
    pub time: f64,
    pub pickup: Point,
    pub delivery: Point,
}

// Same-time order: deliveries, then pickups, then arrivals; dispatch runs
// once every event at that time has been handled.
const DELIVERY: u8 = 0;
const PICKUP: u8 = 1;

#[derive(Debug)]
struct Scheduled {
    time: f64,
    class: u8,
    seq: u64,
    vehicle: usize,
    demand: usize,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
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
        self.time
            .total_cmp(&other.time)
            .then(self.class.cmp(&other.class))
            .then(self.seq.cmp(&other.seq))
    }
}

struct Vehicle {
    pos: Point,
    busy: bool,
    tasks: VecDeque<usize>,
}

struct Sim<'a> {
    cfg: &'a DpdpConfig,
    demands: Vec<SimDemand>,
    vehicles: Vec<Vehicle>,
    heap: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
    /// Arrived, not yet handed to a vehicle; kept in id order.
    unclaimed: Vec<usize>,
    outstanding: usize,
    events: Vec<TraceEvent>,
    waits: Vec<(usize, f64)>,
}

/// Run the simulation with Poisson arrivals and vehicles starting at
/// independent pickup-density draws.
pub fn simulate(cfg: &DpdpConfig) -> Result<SimTrace> {
    cfg.validate()?;
    let mut rng = cfg.seed.derive(0).rng();
    let starts = cfg.phi_p.sample_n(cfg.m, &mut rng);
    let mut rng = cfg.seed.derive(1).rng();
    let gap = Exp::new(cfg.lambda).map_err(|e| CraneError::Config(e.to_string()))?;
    let mut arrivals = Vec::new();
    let mut t = 0.0;
    loop {
        t += gap.sample(&mut rng);
        if t > cfg.horizon {
            break;
        }
        let pickup = cfg.phi_p.sample(&mut rng);
        let delivery = cfg.phi_d.sample(&mut rng);
        arrivals.push(ScriptedArrival { time: t, pickup, delivery });
    }
    simulate_scripted(cfg, starts, arrivals)
}

/// Run the policy on a fixed arrival sequence (sorted by time) from given
/// starting positions. Arrivals after the horizon are ignored.
pub fn simulate_scripted(cfg: &DpdpConfig, starts: Vec<Point>, arrivals: Vec<ScriptedArrival>) -> Result<SimTrace> {
    cfg.validate()?;
    if starts.len() != cfg.m {
        return Err(CraneError::Argument(format!("{} start positions for {} vehicles", starts.len(), cfg.m)));
    }
    if arrivals.windows(2).any(|w| w[1].time < w[0].time) || arrivals.iter().any(|a| !(a.time >= 0.0)) {
        return Err(CraneError::Argument("arrival times must be nonnegative and sorted".into()));
    }
    let demands: Vec<SimDemand> = arrivals
        .into_iter()
        .filter(|a| a.time <= cfg.horizon)
        .map(|a| SimDemand {
            arrival: a.time,
            pickup: a.pickup,
            delivery: a.delivery,
        })
        .collect();
    let mut sim = Sim {
        cfg,
        demands,
        vehicles: starts
            .into_iter()
            .map(|pos| Vehicle {
                pos,
                busy: false,
                tasks: VecDeque::new(),
            })
            .collect(),
        heap: BinaryHeap::new(),
        seq: 0,
        unclaimed: Vec::new(),
        outstanding: 0,
        events: Vec::new(),
        waits: Vec::new(),
    };
    let queue_samples = sim.run()?;
    Ok(SimTrace {
        events: sim.events,
        queue_samples,
        waits: sim.waits,
        demands: sim.demands,
        vehicles: cfg.m,
        speed: cfg.v,
        horizon: cfg.horizon,
        warmup: cfg.warmup,
    })
}

impl Sim<'_> {
    fn run(&mut self) -> Result<Vec<(f64, usize)>> {
        let horizon = self.cfg.horizon;
        let step = self.cfg.sample_interval;
        let mut samples = Vec::new();
        let mut k = 0usize;
        let mut next_arrival = 0usize;
        loop {
            let arrival_time = self.demands.get(next_arrival).map(|d| d.arrival);
            let scheduled_time = self.heap.peek().map(|s| s.0.time);
            // scheduled events win ties: deliveries and pickups go first
            let t = match (scheduled_time, arrival_time) {
                (None, None) => break,
                (Some(s), None) => s,
                (None, Some(a)) => a,
                (Some(s), Some(a)) => s.min(a),
            };
            if t > horizon {
                break;
            }
            while (k as f64) * step < t && (k as f64) * step <= horizon {
                samples.push(((k as f64) * step, self.outstanding));
                k += 1;
            }
            if scheduled_time == Some(t) {
                let Reverse(ev) = self.heap.pop().expect("peeked");
                self.handle(ev);
            } else {
                self.arrive(next_arrival);
                next_arrival += 1;
            }
            let more_now = self.heap.peek().is_some_and(|s| s.0.time == t)
                || self.demands.get(next_arrival).is_some_and(|d| d.arrival == t);
            if !more_now {
                self.dispatch(t)?;
            }
        }
        while (k as f64) * step <= horizon * (1.0 + 1e-12) {
            samples.push((((k as f64) * step).min(horizon), self.outstanding));
            k += 1;
        }
        Ok(samples)
    }

    fn push(&mut self, time: f64, class: u8, vehicle: usize, demand: usize) {
        self.seq += 1;
        self.heap.push(Reverse(Scheduled {
            time,
            class,
            seq: self.seq,
            vehicle,
            demand,
        }));
    }

    fn log(&mut self, time: f64, kind: EventKind, demand: usize, vehicle: Option<usize>) {
        self.events.push(TraceEvent {
            time,
            kind,
            demand,
            vehicle,
        });
    }

    fn arrive(&mut self, id: usize) {
        let t = self.demands[id].arrival;
        self.outstanding += 1;
        self.unclaimed.push(id);
        self.log(t, EventKind::Arrival, id, None);
    }

    fn handle(&mut self, ev: Scheduled) {
        let (t, v, d) = (ev.time, ev.vehicle, ev.demand);
        if ev.class == PICKUP {
            self.log(t, EventKind::Pickup, d, Some(v));
            self.vehicles[v].pos = self.demands[d].pickup.clone();
            let dt = self.demands[d].pickup.distance(&self.demands[d].delivery) / self.cfg.v;
            self.push(t + dt, DELIVERY, v, d);
        } else {
            self.log(t, EventKind::Delivery, d, Some(v));
            self.vehicles[v].pos = self.demands[d].delivery.clone();
            self.outstanding -= 1;
            self.waits.push((d, t - self.demands[d].arrival));
            match self.vehicles[v].tasks.pop_front() {
                Some(next) => self.start(t, v, next),
                None => self.vehicles[v].busy = false,
            }
        }
    }

    fn start(&mut self, t: f64, v: usize, d: usize) {
        self.vehicles[v].busy = true;
        self.log(t, EventKind::PickupStart, d, Some(v));
        let dt = self.vehicles[v].pos.distance(&self.demands[d].pickup) / self.cfg.v;
        self.push(t + dt, PICKUP, v, d);
    }

    fn dispatch(&mut self, t: f64) -> Result<()> {
        match self.cfg.policy {
            Policy::NearestNeighbor => {
                self.dispatch_nearest(t);
                Ok(())
            }
            Policy::GatedSplice => self.dispatch_gated(t),
        }
    }

    /// Repeatedly pair the closest idle vehicle and unclaimed pickup; ties
    /// go to the smaller demand id, then the smaller vehicle id.
    fn dispatch_nearest(&mut self, t: f64) {
        loop {
            let mut best: Option<(f64, usize, usize, usize)> = None;
            for (v, veh) in self.vehicles.iter().enumerate() {
                if veh.busy {
                    continue;
                }
                for (slot, &d) in self.unclaimed.iter().enumerate() {
                    let dist = veh.pos.distance(&self.demands[d].pickup);
                    let better = match best {
                        None => true,
                        Some((bd, bid, bv, _)) => (dist, d, v) < (bd, bid, bv),
                    };
                    if better {
                        best = Some((dist, d, v, slot));
                    }
                }
            }
            let Some((_, d, v, slot)) = best else { return };
            self.unclaimed.remove(slot);
            self.start(t, v, d);
        }
    }

    fn dispatch_gated(&mut self, t: f64) -> Result<()> {
        if self.unclaimed.is_empty() || self.vehicles.iter().any(|v| v.busy) {
            return Ok(());
        }
        let batch = std::mem::take(&mut self.unclaimed);
        let inst = Instance::from_demands(
            batch
                .iter()
                .map(|&d| Demand::new(self.demands[d].pickup.clone(), self.demands[d].delivery.clone()))
                .collect(),
        )?;
        let (tour, _) = splice(&inst)?;
        let n = tour.order.len();
        let pd: Vec<f64> = tour.order.iter().map(|&k| inst.demands[k].length()).collect();
        let link: Vec<f64> = (0..n)
            .map(|k| {
                let a = &inst.demands[tour.order[k]];
                let b = &inst.demands[tour.order[(k + 1) % n]];
                a.delivery.distance(&b.pickup)
            })
            .collect();
        let fragments = split_tour(&pd, &link, self.vehicles.len());
        let mut free: Vec<usize> = (0..self.vehicles.len()).collect();
        for frag in fragments {
            let ids: Vec<usize> = frag.iter().map(|&pos| batch[tour.order[pos]]).collect();
            let first = &self.demands[ids[0]].pickup;
            let (slot, _) = free
                .iter()
                .enumerate()
                .map(|(slot, &v)| (slot, self.vehicles[v].pos.distance(first)))
                .fold((usize::MAX, f64::INFINITY), |acc, c| if c.1 < acc.1 { c } else { acc });
            let v = free.remove(slot);
            self.vehicles[v].tasks = ids[1..].iter().copied().collect();
            self.start(t, v, ids[0]);
        }
        Ok(())
    }
}

/// Cut a closed tour into at most `m` contiguous fragments, only at
/// delivery→pickup links, so that the longest fragment is as short as
/// possible. `pd[k]` is the carry length of the k-th demand in tour order
/// and `link[k]` the link from its delivery to the next demand's pickup.
/// Fragments are returned as lists of tour positions.
pub fn split_tour(pd: &[f64], link: &[f64], m: usize) -> Vec<Vec<usize>> {
    let n = pd.len();
    assert_eq!(link.len(), n, "one link per demand");
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let k = m.min(n);
    // prefix sums over the tour traversed twice
    let mut prefix = vec![0.0; 2 * n + 1];
    for i in 0..2 * n {
        prefix[i + 1] = prefix[i] + pd[i % n] + link[i % n];
    }
    let frag = |i: usize, j: usize| prefix[j] - prefix[i] - link[(j - 1) % n];
    let plan = |limit: f64| -> Option<usize> {
        // next[i]: one past the furthest position reachable from i
        let mut next = vec![0usize; 2 * n];
        let mut j = 0;
        for (i, slot) in next.iter_mut().enumerate() {
            j = j.max(i);
            while j < 2 * n && frag(i, j + 1) <= limit {
                j += 1;
            }
            *slot = j;
        }
        (0..n).find(|&s| {
            let mut pos = s;
            for _ in 0..k {
                if pos >= s + n {
                    break;
                }
                pos = next[pos];
            }
            pos >= s + n
        })
    };
    let mut lo = pd.iter().cloned().fold(0.0, f64::max);
    // one fragment cut at the longest link is always feasible
    let mut hi = frag(0, n) + link[n - 1] - link.iter().cloned().fold(0.0, f64::max);
    hi = hi.max(lo) * (1.0 + 1e-12) + 1e-12;
    if plan(lo).is_some() {
        hi = lo;
    }
    for _ in 0..200 {
        if hi - lo <= 1e-12 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if plan(mid).is_some() {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let s = plan(hi).expect("upper limit is feasible");
    let mut out = Vec::new();
    let mut pos = s;
    while pos < s + n {
        let mut end = pos + 1;
        while end < s + n && frag(pos, end + 1) <= hi {
            end += 1;
        }
        out.push((pos..end).map(|p| p % n).collect());
        pos = end;
    }
    out
}
