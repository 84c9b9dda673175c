use serde::{Deserialize, Serialize};

/// One studentized check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRecord {
    pub test_id: String,
    pub s: f64,
    pub t: f64,
    pub witness: String,
    pub estimate: f64,
    pub stderr: f64,
    pub z: f64,
    pub pass: bool,
}

/// A family of studentized checks sharing one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub suite: String,
    pub threshold: f64,
    pub note: String,
    pub records: Vec<TestRecord>,
}

impl TestReport {
    pub fn new(suite: impl Into<String>, threshold: f64) -> Self {
        Self { suite: suite.into(), threshold, note: String::new(), records: Vec::new() }
    }

    /// Appends a record; `pass` is decided by `|z| <= threshold`.
    #[allow(clippy::too_many_arguments)]
    pub fn push(
        &mut self,
        test_id: impl Into<String>,
        s: f64,
        t: f64,
        witness: impl Into<String>,
        estimate: f64,
        stderr: f64,
        z: f64,
    ) {
        let pass = z.abs() <= self.threshold;
        self.records.push(TestRecord {
            test_id: test_id.into(),
            s,
            t,
            witness: witness.into(),
            estimate,
            stderr,
            z,
            pass,
        });
    }

    pub fn push_record(&mut self, record: TestRecord) {
        self.records.push(record);
    }

    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &TestRecord> {
        self.records.iter().filter(|r| !r.pass)
    }

    pub fn max_abs_z(&self) -> f64 {
        self.records.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }

    /// Fills `note` with the family-wise false-alarm bound for Gaussian statistics.
    pub fn add_bonferroni_note(&mut self) {
        let m = self.records.len();
        let per_test = two_sided_tail(self.threshold);
        self.note = format!(
            "{m} statistics at |z| <= {}; per-test false alarm {:.2e}, Bonferroni family-wise bound {:.2e}",
            self.threshold,
            per_test,
            (m as f64 * per_test).min(1.0)
        );
    }
}

/// `P(|Z| > z)` for standard normal `Z` (Abramowitz–Stegun 7.1.26, error < 1.5e-7).
fn two_sided_tail(z: f64) -> f64 {
    let x = z.abs() / std::f64::consts::SQRT_2;
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly =
        t * (0.254_829_592 + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    poly * (-x * x).exp()
}
