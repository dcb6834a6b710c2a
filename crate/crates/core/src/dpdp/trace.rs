use std::fmt;
use std::io::Write;

use serde::Serialize;

use crate::error::{CraneError, Result};
use crate::geometry::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Arrival,
    /// A vehicle leaves for the demand's pickup site.
    PickupStart,
    Pickup,
    Delivery,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::Arrival => "arrival",
            EventKind::PickupStart => "pickup_start",
            EventKind::Pickup => "pickup",
            EventKind::Delivery => "delivery",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub time: f64,
    pub kind: EventKind,
    pub demand: usize,
    /// `None` for arrivals.
    pub vehicle: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimDemand {
    pub arrival: f64,
    pub pickup: Point,
    pub delivery: Point,
}

/// Record of one simulation run. Demand ids index `demands` in arrival
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub events: Vec<TraceEvent>,
    /// `(t, outstanding demands at t)` at a fixed spacing from 0 to the horizon.
    pub queue_samples: Vec<(f64, usize)>,
    /// `(demand id, delivery time − arrival time)` in delivery order.
    pub waits: Vec<(usize, f64)>,
    pub demands: Vec<SimDemand>,
    pub vehicles: usize,
    pub speed: f64,
    pub horizon: f64,
    pub warmup: f64,
}

#[derive(Serialize)]
struct EventRow<'a> {
    time: f64,
    kind: &'a str,
    demand_id: usize,
    vehicle_id: Option<usize>,
}

impl SimTrace {
    fn count_until(&self, t: f64, kind: EventKind) -> usize {
        let end = self.events.partition_point(|e| e.time <= t);
        self.events[..end].iter().filter(|e| e.kind == kind).count()
    }

    pub fn arrivals_until(&self, t: f64) -> usize {
        self.count_until(t, EventKind::Arrival)
    }

    pub fn deliveries_until(&self, t: f64) -> usize {
        self.count_until(t, EventKind::Delivery)
    }

    /// Demands arrived but not yet delivered at time `t`.
    pub fn outstanding_at(&self, t: f64) -> usize {
        self.arrivals_until(t) - self.deliveries_until(t)
    }

    pub fn served(&self) -> usize {
        self.waits.len()
    }

    pub fn mean_wait(&self) -> Option<f64> {
        if self.waits.is_empty() {
            None
        } else {
            Some(self.waits.iter().map(|w| w.1).sum::<f64>() / self.waits.len() as f64)
        }
    }

    /// Check time ordering, service feasibility, unit capacity and queue
    /// conservation.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CraneError::Numeric(msg));
        let n = self.demands.len();
        let mut arrived = vec![false; n];
        let mut started = vec![0usize; n];
        let mut picked = vec![0usize; n];
        let mut delivered = vec![0usize; n];
        let mut carrying: Vec<Option<usize>> = vec![None; self.vehicles];
        let mut last = f64::NEG_INFINITY;
        for e in &self.events {
            if e.time < last {
                return bad(format!("event times decrease at t = {}", e.time));
            }
            last = e.time;
            if e.demand >= n {
                return bad(format!("unknown demand {}", e.demand));
            }
            let d = e.demand;
            match (e.kind, e.vehicle) {
                (EventKind::Arrival, None) => {
                    if arrived[d] {
                        return bad(format!("demand {d} arrives twice"));
                    }
                    arrived[d] = true;
                }
                (EventKind::PickupStart, Some(v)) if v < self.vehicles => {
                    if !arrived[d] || carrying[v].is_some() {
                        return bad(format!("vehicle {v} cannot head for demand {d}"));
                    }
                    started[d] += 1;
                }
                (EventKind::Pickup, Some(v)) if v < self.vehicles => {
                    if started[d] != 1 || carrying[v].is_some() {
                        return bad(format!("vehicle {v} cannot pick up demand {d}"));
                    }
                    picked[d] += 1;
                    carrying[v] = Some(d);
                }
                (EventKind::Delivery, Some(v)) if v < self.vehicles => {
                    if carrying[v] != Some(d) {
                        return bad(format!("vehicle {v} delivers demand {d} it does not carry"));
                    }
                    delivered[d] += 1;
                    carrying[v] = None;
                }
                _ => return bad(format!("malformed event {e:?}")),
            }
        }
        for d in 0..n {
            if picked[d] > 1 || delivered[d] > 1 || started[d] > 1 {
                return bad(format!("demand {d} served more than once"));
            }
        }
        if self.waits.len() != delivered.iter().sum::<usize>() {
            return bad("wait records do not match deliveries".into());
        }
        for &(t, q) in &self.queue_samples {
            let a = self.arrivals_until(t);
            let s = self.deliveries_until(t);
            if a != s + q {
                return bad(format!("conservation fails at t = {t}: {a} arrivals, {s} served, {q} outstanding"));
            }
        }
        Ok(())
    }

    /// CSV with columns `time,kind,demand_id,vehicle_id`.
    pub fn write_events_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for e in &self.events {
            w.serialize(EventRow {
                time: e.time,
                kind: &e.kind.to_string(),
                demand_id: e.demand,
                vehicle_id: e.vehicle,
            })?;
        }
        if self.events.is_empty() {
            w.write_record(["time", "kind", "demand_id", "vehicle_id"])?;
        }
        w.flush()?;
        Ok(())
    }

    /// CSV with columns `time,outstanding`.
    pub fn write_queue_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["time", "outstanding"])?;
        for &(t, q) in &self.queue_samples {
            w.write_record([t.to_string(), q.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}
