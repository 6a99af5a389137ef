use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ModelCall,
    CacheHit,
    Expansion,
    SolutionFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub wall_time_s: f64,
    pub unique_calls: u64,
    /// Graph expansion count after the event.
    pub step: usize,
    pub molecule: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstSolution {
    pub wall_time_s: f64,
    pub unique_calls: u64,
    pub step: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchTrace {
    pub events: Vec<TraceEvent>,
    pub first_solution: Option<FirstSolution>,
}

impl SearchTrace {
    pub fn push(&mut self, kind: EventKind, wall_time_s: f64, unique_calls: u64, step: usize, molecule: &str) {
        // Keep timestamps non-decreasing even if the clock is coarse.
        let t = self.events.last().map_or(wall_time_s, |e| e.wall_time_s.max(wall_time_s));
        if kind == EventKind::SolutionFound && self.first_solution.is_none() {
            self.first_solution = Some(FirstSolution {
                wall_time_s: t,
                unique_calls,
                step,
            });
        }
        self.events.push(TraceEvent {
            kind,
            wall_time_s: t,
            unique_calls,
            step,
            molecule: molecule.to_string(),
        });
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a trace from JSONL, ignoring blank and `#` lines.
    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let mut t = SearchTrace::default();
        for line in text.lines() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let e: TraceEvent = serde_json::from_str(line)?;
            t.push(e.kind, e.wall_time_s, e.unique_calls, e.step, &e.molecule);
        }
        Ok(t)
    }
}
