//! Scenario files: JSON descriptions of evolution runs.

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use tvflow_core::radial::Dimension;
use tvflow_core::stack::Stack;

/// A JSON scenario:
///
/// ```json
/// {
///   "n": 3,
///   "kind": "ball",
///   "radii": [1.0],
///   "values": [1.0],
///   "t_end": 0.12,
///   "dt": 1e-5,
///   "outputs": [0.0, 0.04, 0.08, 0.12]
/// }
/// ```
///
/// `kind = "ball"` takes one radius and one height; `kind = "stack"` takes
/// `N` radii and `N + 1` heights whose last entry is `0`.  `outputs` lists
/// the times at which profile snapshots are written.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub n: u32,
    pub kind: String,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default)]
    pub outputs: Vec<f64>,
}

impl ScenarioFile {
    pub fn load(path: &std::path::Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)
            .with_context(|| format!("reading scenario {}", path.display()))?;
        let scenario: ScenarioFile = serde_json::from_str(&raw).context("parsing scenario JSON")?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) {
            bail!("t_end must be positive, got {}", self.t_end);
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                bail!("dt must be positive, got {dt}");
            }
        }
        for &t in &self.outputs {
            if !(0.0..=self.t_end).contains(&t) {
                bail!("output time {t} outside [0, {}]", self.t_end);
            }
        }
        match self.kind.as_str() {
            "ball" => {
                if self.radii.len() != 1 || self.values.len() != 1 {
                    bail!("ball scenarios take one radius and one height");
                }
            }
            "stack" => {
                if self.values.len() != self.radii.len() + 1 {
                    bail!(
                        "stack scenarios take N radii and N+1 heights, got {} and {}",
                        self.radii.len(),
                        self.values.len()
                    );
                }
            }
            other => bail!("unknown scenario kind {other:?} (expected \"ball\" or \"stack\")"),
        }
        // constructing the stack checks the remaining invariants
        self.stack()?;
        Ok(())
    }

    pub fn dimension(&self) -> Result<Dimension> {
        Ok(Dimension::new(self.n)?)
    }

    /// The initial datum as a stack (a ball is the one-jump stack).
    pub fn stack(&self) -> Result<Stack> {
        let n = self.dimension()?;
        let (radii, values) = if self.kind == "ball" {
            (self.radii.clone(), vec![self.values[0], 0.0])
        } else {
            (self.radii.clone(), self.values.clone())
        };
        Ok(Stack::new(n, radii, values)?)
    }

    pub fn is_ball(&self) -> bool {
        self.kind == "ball"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let json = r#"{"n":3,"kind":"ball","radii":[1.0],"values":[1.0],"t_end":0.1,"outputs":[0.0,0.05]}"#;
        let s: ScenarioFile = serde_json::from_str(json).unwrap();
        s.validate().unwrap();
        assert!(s.is_ball());
        assert_eq!(s.stack().unwrap().jumps(), 1);
    }

    #[test]
    fn rejects_bad_scenarios() {
        let bad = [
            r#"{"n":3,"kind":"ball","radii":[1.0],"values":[1.0],"t_end":-1.0}"#,
            r#"{"n":3,"kind":"ball","radii":[1.0,2.0],"values":[1.0],"t_end":1.0}"#,
            r#"{"n":3,"kind":"stack","radii":[1.0],"values":[1.0,0.5],"t_end":1.0}"#,
            r#"{"n":3,"kind":"pyramid","radii":[1.0],"values":[1.0],"t_end":1.0}"#,
            r#"{"n":3,"kind":"ball","radii":[1.0],"values":[1.0],"t_end":1.0,"outputs":[2.0]}"#,
            r#"{"n":0,"kind":"ball","radii":[1.0],"values":[1.0],"t_end":1.0}"#,
        ];
        for json in bad {
            let s: ScenarioFile = serde_json::from_str(json).unwrap();
            assert!(s.validate().is_err(), "accepted: {json}");
        }
    }
}
