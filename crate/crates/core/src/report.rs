//! Machine-readable solve reports. JSON output writes every float with 17
//! significant digits so reports replay bit-for-bit.

use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::error::Result;
use crate::optimize::{OptTrace, StopReason};
use crate::problem::Task;
use crate::verify::VerificationReport;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub steps: usize,
    pub evaluations: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<StopReason>,
    pub initial_energy: f64,
    pub final_energy: f64,
}

impl TraceSummary {
    pub fn from_trace(trace: &OptTrace) -> Self {
        TraceSummary {
            steps: trace.steps(),
            evaluations: trace.evaluations,
            stop: trace.stop,
            initial_energy: trace.records.first().map_or(f64::NAN, |r| r.energy),
            final_energy: trace.records.last().map_or(f64::NAN, |r| r.energy),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: u32,
    pub task: Task,
    pub optimizer: String,
    pub depth: usize,
    pub theta: Vec<f64>,
    pub energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fidelity_lower_bound: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual_ratio: Option<f64>,
    pub verification: VerificationReport,
    pub trace: TraceSummary,
    pub seed: u64,
    pub config: serde_json::Value,
    pub wall_seconds: f64,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        to_json_17(self)
    }

    pub fn from_json(text: &str) -> Result<SolveReport> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Pretty printer that writes floats as `{:.16e}`.
struct Digits17<'a>(PrettyFormatter<'a>);

impl Formatter for Digits17<'_> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, value as f64)
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Pretty JSON with 17 significant digits per float; non-finite floats
/// become `null`.
pub fn to_json_17<T: Serialize + ?Sized>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Digits17(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("report serializes");
    String::from_utf8(buf).expect("JSON is UTF-8")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::DEFAULT_FIDELITY_MIN;
    use proptest::prelude::*;

    fn sample(energy: f64, theta: Vec<f64>) -> SolveReport {
        SolveReport {
            schema: SCHEMA_VERSION,
            task: Task::Solve,
            optimizer: "vqe".into(),
            depth: 0,
            theta,
            energy,
            fidelity: None,
            fidelity_lower_bound: Some(0.99975),
            residual_ratio: Some(1.0 - 1e-9),
            verification: VerificationReport {
                task: Task::Solve,
                energy,
                fidelity: None,
                fidelity_lower_bound: Some(0.99975),
                fidelity_lower_bound_raw: Some(0.99975),
                kappa: Some(1.0),
                residual_ratio: Some(1.0 - 1e-9),
                oracle_fidelity: Some(0.9999999),
                threshold: DEFAULT_FIDELITY_MIN,
                pass: true,
            },
            trace: TraceSummary {
                steps: 12,
                evaluations: 13,
                stop: Some(StopReason::Converged),
                initial_energy: 0.1,
                final_energy: energy,
            },
            seed: 7,
            config: serde_json::json!({"mode": "exact", "learning_rate": 0.1}),
            wall_seconds: 0.25,
        }
    }

    #[test]
    fn floats_use_17_digits() {
        let s = to_json_17(&vec![0.1f64, 1.0, -2.5e-300]);
        assert!(s.contains("1.0000000000000001e-1"), "{s}");
        assert!(s.contains("1.0000000000000000e0"));
        assert!(s.contains("-2.5000000000000000e-300"));
        assert_eq!(to_json_17(&f64::NAN), "null");
    }

    #[test]
    fn schema_is_versioned() {
        let v: serde_json::Value = serde_json::from_str(&sample(1e-12, vec![0.5]).to_json()).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["task"], "solve");
        assert_eq!(v["verification"]["pass"], true);
    }

    proptest! {
        #[test]
        fn report_round_trips(energy in 0.0f64..10.0, theta in prop::collection::vec(-10.0f64..10.0, 0..6)) {
            let r = sample(energy, theta);
            let text = r.to_json();
            let back = SolveReport::from_json(&text).unwrap();
            prop_assert_eq!(&back, &r);
            prop_assert_eq!(back.to_json(), text);
        }
    }
}
