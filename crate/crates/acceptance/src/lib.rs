//! Runner for the acceptance suite.
//!
//! Each criterion is a closure returning a one-line verdict detail; a panic
//! inside a criterion counts as a failure. Every criterion runs regardless of
//! earlier failures and prints exactly one `PASS`/`FAIL` line.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

/// Outcome of a single criterion: `Ok(detail)` or `Err(detail)`.
pub type Verdict = Result<String, String>;

#[derive(Default)]
pub struct Suite {
    failures: Vec<String>,
    total: usize,
}

impl Suite {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `check` and prints its verdict line.
    pub fn criterion(&mut self, id: &str, title: &str, check: impl FnOnce() -> Verdict) {
        self.total += 1;
        let started = Instant::now();
        let verdict = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string());
            Err(format!("panic: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match verdict {
            Ok(detail) => println!("PASS  [{id}] {title}: {detail} [{secs:.2} s]"),
            Err(detail) => {
                println!("FAIL  [{id}] {title}: {detail} [{secs:.2} s]");
                self.failures.push(id.to_string());
            }
        }
    }

    /// Prints the tally and returns the process exit code.
    pub fn finish(self) -> i32 {
        let passed = self.total - self.failures.len();
        println!("\n{passed}/{} criteria passed", self.total);
        if self.failures.is_empty() {
            0
        } else {
            println!("failed: {}", self.failures.join(", "));
            1
        }
    }
}

/// Turns a condition into a verdict carrying the same detail either way.
pub fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}
