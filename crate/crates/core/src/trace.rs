//! Instrumented memory.
//!
//! A [`TracedStore`] is a fixed-capacity array whose every read and write
//! appends one [`AccessEvent`] to an append-only [`AccessTrace`]. Events carry
//! only the operation kind and the logical cell index; values are never
//! recorded, which models encrypted memory. Local variables of an algorithm
//! play the role of the CPU's private cache and emit nothing.

use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AccessKind {
    Read,
    Write,
}

impl fmt::Display for AccessKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AccessKind::Read => "R",
            AccessKind::Write => "W",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AccessEvent {
    pub step: u64,
    pub kind: AccessKind,
    pub address: usize,
}

/// Ordered access sequence. Steps are `0, 1, 2, ...` with no gaps.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct AccessTrace {
    events: Vec<AccessEvent>,
}

impl AccessTrace {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, kind: AccessKind, address: usize) {
        let step = self.events.len() as u64;
        self.events.push(AccessEvent { step, kind, address });
    }

    pub fn events(&self) -> &[AccessEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn reads(&self) -> usize {
        self.events.iter().filter(|e| e.kind == AccessKind::Read).count()
    }

    pub fn writes(&self) -> usize {
        self.len() - self.reads()
    }

    /// Appends `other` after `self`, renumbering its steps so the result is
    /// again gap-free. Used when an experiment spans several stores.
    pub fn append(&mut self, other: &AccessTrace) {
        for e in &other.events {
            self.push(e.kind, e.address);
        }
    }

    /// One `step,kind,address` line per event.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "step,kind,address")?;
        for e in &self.events {
            writeln!(out, "{},{},{}", e.step, e.kind, e.address)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::with_capacity(self.events.len() * 12);
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

/// Fixed-capacity memory whose accesses are recorded.
#[derive(Debug, Clone)]
pub struct TracedStore<T> {
    cells: Vec<T>,
    trace: AccessTrace,
}

impl<T: Clone> TracedStore<T> {
    /// Loads initial contents without emitting events (the input is assumed
    /// to already reside in memory when an algorithm starts).
    pub fn from_vec(cells: Vec<T>) -> Self {
        Self {
            cells,
            trace: AccessTrace::new(),
        }
    }

    pub fn filled(capacity: usize, value: T) -> Self {
        Self::from_vec(vec![value; capacity])
    }

    pub fn capacity(&self) -> usize {
        self.cells.len()
    }

    pub fn try_read(&mut self, address: usize) -> Result<T> {
        let value = self
            .cells
            .get(address)
            .cloned()
            .ok_or(Error::OutOfBounds {
                address,
                capacity: self.cells.len(),
            })?;
        self.trace.push(AccessKind::Read, address);
        Ok(value)
    }

    /// Panics on an out-of-bounds address, like slice indexing.
    pub fn read(&mut self, address: usize) -> T {
        match self.try_read(address) {
            Ok(v) => v,
            Err(e) => panic!("{e}"),
        }
    }

    pub fn try_write(&mut self, address: usize, value: T) -> Result<()> {
        let capacity = self.cells.len();
        let cell = self
            .cells
            .get_mut(address)
            .ok_or(Error::OutOfBounds { address, capacity })?;
        *cell = value;
        self.trace.push(AccessKind::Write, address);
        Ok(())
    }

    pub fn write(&mut self, address: usize, value: T) {
        if let Err(e) = self.try_write(address, value) {
            panic!("{e}");
        }
    }

    /// Contents without touching the trace. For constructing inputs, test
    /// oracles and the experiment harness; algorithms must not use it.
    pub fn untraced(&self) -> &[T] {
        &self.cells
    }

    pub fn trace(&self) -> &AccessTrace {
        &self.trace
    }

    pub fn take_trace(&mut self) -> AccessTrace {
        std::mem::take(&mut self.trace)
    }

    pub fn clear_trace(&mut self) {
        self.trace = AccessTrace::new();
    }
}

/// How much of a trace the auditor gets to compare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Projection {
    Full,
    AddressesOnly,
    LengthOnly,
    /// Splits the read events into consecutive blocks of `block` reads and
    /// keeps the smallest and largest address of each block (the last block
    /// may be short). For chunked search with `block = k` every loop
    /// iteration is one block and the final window scan is the tail.
    IntervalSummary { block: usize },
}

impl Projection {
    pub fn name(&self) -> &'static str {
        match self {
            Projection::Full => "full",
            Projection::AddressesOnly => "addresses",
            Projection::LengthOnly => "length",
            Projection::IntervalSummary { .. } => "intervals",
        }
    }
}

/// Canonical, hashable image of a trace under a [`Projection`].
/// Serializes as a JSON array (or a bare count for `Length`).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Projected {
    Full(Vec<(AccessKind, usize)>),
    Addresses(Vec<usize>),
    Length(usize),
    Intervals(Vec<(usize, usize)>),
}

pub fn project_trace(trace: &AccessTrace, projection: Projection) -> Projected {
    let events = trace.events();
    match projection {
        Projection::Full => Projected::Full(events.iter().map(|e| (e.kind, e.address)).collect()),
        Projection::AddressesOnly => Projected::Addresses(events.iter().map(|e| e.address).collect()),
        Projection::LengthOnly => Projected::Length(events.len()),
        Projection::IntervalSummary { block } => {
            let block = block.max(1);
            let reads: Vec<usize> = events
                .iter()
                .filter(|e| e.kind == AccessKind::Read)
                .map(|e| e.address)
                .collect();
            Projected::Intervals(
                reads
                    .chunks(block)
                    .map(|chunk| {
                        let lo = *chunk.iter().min().expect("chunks are non-empty");
                        let hi = *chunk.iter().max().expect("chunks are non-empty");
                        (lo, hi)
                    })
                    .collect(),
            )
        }
    }
}
