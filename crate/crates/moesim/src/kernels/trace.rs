use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hardware unit class a trace event belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum UnitKind {
    /// Attention processing element.
    Pe,
    /// Linear-kernel compute unit.
    Cu,
    /// Weight tile loader.
    Loader,
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UnitKind::Pe => "pe",
            UnitKind::Cu => "cu",
            UnitKind::Loader => "loader",
        })
    }
}

/// What happened at a unit during one cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    /// One tile-wide partial dot-product step.
    DotStep,
    /// Fused exp/weighted-sum completion for one (row, head).
    FusedRow,
    /// The single end-of-row division.
    Division,
    /// A weight tile broadcast to the compute units.
    TileLoad,
    /// One token wave processed against the resident tile.
    Wave,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EventKind::DotStep => "dot_step",
            EventKind::FusedRow => "fused_row",
            EventKind::Division => "div",
            EventKind::TileLoad => "tile_load",
            EventKind::Wave => "wave",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub cycle: u64,
    pub unit_kind: UnitKind,
    pub unit_id: u32,
    pub kind: EventKind,
}

/// Ordered event log of a kernel run. Events are appended in emulation order;
/// per unit the cycle indices never decrease.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StreamTrace {
    events: Vec<TraceEvent>,
}

impl StreamTrace {
    pub fn new() -> Self {
        StreamTrace::default()
    }

    pub fn push(&mut self, cycle: u64, unit_kind: UnitKind, unit_id: u32, kind: EventKind) {
        self.events.push(TraceEvent {
            cycle,
            unit_kind,
            unit_id,
            kind,
        });
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn count(&self, kind: EventKind) -> u64 {
        self.events.iter().filter(|e| e.kind == kind).count() as u64
    }

    /// Cycles covered by the trace: last event cycle + 1, or 0 when empty.
    pub fn cycle_count(&self) -> u64 {
        self.events.iter().map(|e| e.cycle + 1).max().unwrap_or(0)
    }

    pub fn extend_offset(&mut self, other: StreamTrace, cycle_offset: u64) {
        self.events.extend(other.events.into_iter().map(|mut e| {
            e.cycle += cycle_offset;
            e
        }));
    }

    /// Line-oriented dump, one event per line: `cycle unit_kind unit_id event_kind`.
    /// Emission order is preserved, so dumps are stable for golden files.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&format!("{} {} {} {}\n", e.cycle, e.unit_kind, e.unit_id, e.kind));
        }
        out
    }

    /// Verifies the per-unit non-decreasing cycle invariant.
    pub fn check_unit_monotonic(&self) -> Result<()> {
        let mut last: std::collections::BTreeMap<(u8, u32), u64> = Default::default();
        for e in &self.events {
            let key = (e.unit_kind as u8, e.unit_id);
            if let Some(&prev) = last.get(&key) {
                if e.cycle < prev {
                    return Err(Error::contract(format!(
                        "unit {} {} went back in time: cycle {} after {}",
                        e.unit_kind, e.unit_id, e.cycle, prev
                    )));
                }
            }
            last.insert(key, e.cycle);
        }
        Ok(())
    }
}
