use std::fmt;

use super::PayloadRequest;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EventKind {
    /// A request entered a depot queue.
    Arrive,
    /// A vehicle chose a depot.
    Decide,
    Pickup,
    Dropoff,
    /// A vehicle reached a depot that had nothing for it.
    Penalty,
    /// A request was discarded because the queue was full.
    DropRequest,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Arrive => "ARRIVE",
            EventKind::Decide => "DECIDE",
            EventKind::Pickup => "PICKUP",
            EventKind::Dropoff => "DROPOFF",
            EventKind::Penalty => "PENALTY",
            EventKind::DropRequest => "DROP_REQUEST",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Event {
    pub tick: u64,
    pub kind: EventKind,
    pub vehicle: Option<usize>,
    pub depot: Option<usize>,
    pub payload: Option<PayloadRequest>,
    pub reward: Option<f64>,
}

/// Column names of the tab-separated event log.
pub const EVENT_LOG_HEADER: &str =
    "tick\tevent\tvehicle\tdepot\tpayload\tdestination\tcapacity\tpayoff\treward";

/// One tab-separated line; absent fields are written as `-`.
impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn opt<T: fmt::Display>(v: Option<T>) -> String {
            v.map_or_else(|| "-".to_string(), |v| v.to_string())
        }
        let p = self.payload.as_ref();
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.tick,
            self.kind.as_str(),
            opt(self.vehicle),
            opt(self.depot),
            opt(p.map(|p| p.id)),
            opt(p.map(|p| p.destination)),
            opt(p.map(|p| p.capacity)),
            opt(p.map(|p| format!("{:.6}", p.payoff))),
            opt(self.reward.map(|r| format!("{r:.6}"))),
        )
    }
}

/// Renders a full log, one event per line, without a header.
pub fn format_log(events: &[Event]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&e.to_string());
        out.push('\n');
    }
    out
}
