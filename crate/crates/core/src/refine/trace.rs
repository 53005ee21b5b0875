use std::fmt;
use std::io::{self, Write};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Outcome {
    Initial,
    Improved,
    NoImprovement,
    Aborted,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Initial => "initial",
            Outcome::Improved => "improved",
            Outcome::NoImprovement => "no_improvement",
            Outcome::Aborted => "aborted",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One line of the progress log. `elapsed_ms` holds the iteration index in
/// deterministic mode.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub elapsed_ms: u64,
    pub iteration: u64,
    pub sum_of_costs: u64,
    pub rule: String,
    pub set_size: usize,
    pub outcome: Outcome,
}

impl TraceRow {
    pub const HEADER: &'static str = "elapsed_ms,iteration,sum_of_costs,rule,set_size,outcome";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.elapsed_ms, self.iteration, self.sum_of_costs, self.rule, self.set_size, self.outcome
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    rows: Vec<TraceRow>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if the cost goes up.
    pub fn push(&mut self, row: TraceRow) {
        if let Some(prev) = self.rows.last() {
            assert!(row.sum_of_costs <= prev.sum_of_costs, "trace cost increased");
        }
        self.rows.push(row);
    }

    pub fn rows(&self) -> &[TraceRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].sum_of_costs <= w[0].sum_of_costs)
    }

    pub fn improvements(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome == Outcome::Improved).count()
    }

    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{}", TraceRow::HEADER)?;
        for r in &self.rows {
            writeln!(out, "{}", r.csv())?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }
}
