//! Named observable sets: the JSON model file format and built-in models.
//!
//! ```json
//! {"dim": 2, "observables": {"sz": {"re": [[1, 0], [0, -1]], "im": [[0, 0], [0, 0]]}}}
//! ```

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::algebra::{pauli_x, pauli_y, pauli_z, ComplexRows, Observable};
use crate::context::{context_of, MeasurementContext};
use crate::ensemble::{quantum_state, QuantumState};
use crate::error::{Error, Result};
use crate::experiments::{build_oscillator_model, local_spin, singlet_state, swap_matrix};

pub const DEFAULT_OSCILLATOR_LEVELS: usize = 8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub dim: usize,
    pub observables: BTreeMap<String, ComplexRows>,
}

#[derive(Clone, Debug)]
pub struct Model {
    name: String,
    dim: usize,
    observables: BTreeMap<String, Observable>,
}

impl Model {
    pub fn new(name: impl Into<String>, dim: usize, observables: BTreeMap<String, Observable>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension(0));
        }
        for (obs_name, obs) in &observables {
            if obs.dim() != dim {
                return Err(Error::Model(format!(
                    "observable `{obs_name}` has dimension {} in a model of dimension {dim}",
                    obs.dim()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            dim,
            observables,
        })
    }

    /// Parses and validates a model file; every observable must be hermitian
    /// within tolerance.
    pub fn from_json_str(name: &str, json: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(json)?;
        let mut observables = BTreeMap::new();
        for (obs_name, rows) in file.observables {
            let element = rows.to_element()?;
            let defect = element.hermiticity_defect();
            let obs = Observable::new(element).map_err(|_| Error::NonHermitianNamed {
                name: obs_name.clone(),
                defect,
            })?;
            observables.insert(obs_name, obs);
        }
        Self::new(name, file.dim, observables)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "model".into());
        Self::from_json_str(&name, &text)
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            dim: self.dim,
            observables: self
                .observables
                .iter()
                .map(|(k, v)| (k.clone(), ComplexRows::from_matrix(v.matrix())))
                .collect(),
        }
    }

    /// Built-in models: `qubit`, `singlet`, `oscillator` (default levels).
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "qubit" => Self::qubit(),
            "singlet" => Self::singlet(),
            "oscillator" => Self::oscillator(DEFAULT_OSCILLATOR_LEVELS),
            _ => Err(Error::UnknownName {
                kind: "model",
                name: name.to_string(),
            }),
        }
    }

    pub fn qubit() -> Result<Self> {
        let observables = BTreeMap::from([
            ("id".to_string(), Observable::unity(2)?),
            ("sx".to_string(), pauli_x()),
            ("sy".to_string(), pauli_y()),
            ("sz".to_string(), pauli_z()),
        ]);
        Self::new("qubit", 2, observables)
    }

    pub fn singlet() -> Result<Self> {
        let mut observables = BTreeMap::new();
        for (axis, op) in [("x", pauli_x()), ("y", pauli_y()), ("z", pauli_z())] {
            observables.insert(format!("s{axis}_a"), local_spin(&op, 0));
            observables.insert(format!("s{axis}_b"), local_spin(&op, 1));
        }
        let sz_total = observables["sz_a"].combine(1.0, &observables["sz_b"], 1.0)?;
        observables.insert("sz_total".into(), sz_total);
        observables.insert("swap".into(), Observable::from_matrix(swap_matrix())?);
        observables.insert("id".into(), Observable::unity(4)?);
        Self::new("singlet", 4, observables)
    }

    pub fn oscillator(levels: usize) -> Result<Self> {
        let osc = build_oscillator_model(levels)?;
        let observables = BTreeMap::from([
            ("n".to_string(), osc.number),
            ("x".to_string(), osc.position),
            ("p".to_string(), osc.momentum),
            ("h".to_string(), osc.hamiltonian),
            ("id".to_string(), Observable::unity(levels)?),
        ]);
        Self::new("oscillator", levels, observables)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn observables(&self) -> &BTreeMap<String, Observable> {
        &self.observables
    }

    pub fn observable(&self, name: &str) -> Result<&Observable> {
        self.observables.get(name).ok_or_else(|| Error::UnknownName {
            kind: "observable",
            name: name.to_string(),
        })
    }

    /// Context generated by one named observable.
    pub fn context(&self, name: &str) -> Result<Arc<MeasurementContext>> {
        context_of(name, self.observable(name)?)
    }

    /// Resolves a state name.
    ///
    /// `<obs>+` and `<obs>-` pick the top and bottom eigenvalue of `<obs>`,
    /// `<obs>=<value>` a given eigenvalue; the first matching character of the
    /// context generated by `<obs>` is used. `singlet` and `ground` are
    /// aliases in the spin-pair and oscillator models.
    pub fn state(&self, spec: &str) -> Result<QuantumState> {
        let unknown = || Error::UnknownName {
            kind: "state",
            name: spec.to_string(),
        };
        match (self.name.as_str(), spec) {
            ("singlet", "singlet") => return singlet_state(),
            ("oscillator", "ground") => return self.state("n=0"),
            _ => {}
        }
        enum Pick {
            Top,
            Bottom,
            Value(f64),
        }
        let (obs_name, pick) = if let Some((name, value)) = spec.split_once('=') {
            let v: f64 = value.trim().parse().map_err(|_| unknown())?;
            (name, Pick::Value(v))
        } else if let Some(name) = spec.strip_suffix('+') {
            (name, Pick::Top)
        } else if let Some(name) = spec.strip_suffix('-') {
            (name, Pick::Bottom)
        } else {
            return Err(unknown());
        };
        if !self.observables.contains_key(obs_name) {
            return Err(unknown());
        }
        let ctx = self.context(obs_name)?;
        let values = ctx.generators()[0].spectrum();
        let pick = match pick {
            Pick::Top => argbest(values, |a, b| a > b),
            Pick::Bottom => argbest(values, |a, b| a < b),
            Pick::Value(v) => values
                .iter()
                .position(|x| (x - v).abs() <= 1e-8)
                .ok_or_else(unknown)?,
        };
        quantum_state(&ctx, pick)
    }
}

/// First index whose value is within tolerance of the extremum.
fn argbest(values: &[f64], better: impl Fn(f64, f64) -> bool) -> usize {
    let best = values
        .iter()
        .copied()
        .fold(values[0], |acc, v| if better(v, acc) { v } else { acc });
    values
        .iter()
        .position(|v| (v - best).abs() <= 1e-8)
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::c;

    #[test]
    fn builtin_models() {
        let q = Model::builtin("qubit").unwrap();
        assert_eq!(q.dim(), 2);
        assert!(q.observable("sx").is_ok());
        assert!(matches!(
            q.observable("foo"),
            Err(Error::UnknownName { kind: "observable", .. })
        ));
        assert!(Model::builtin("nope").is_err());
        assert_eq!(Model::builtin("singlet").unwrap().dim(), 4);
        assert_eq!(Model::builtin("oscillator").unwrap().dim(), DEFAULT_OSCILLATOR_LEVELS);
    }

    #[test]
    fn named_states() {
        let q = Model::qubit().unwrap();
        let up = q.state("sz+").unwrap();
        assert_eq!(up.vector()[0], c(1.0, 0.0));
        let down = q.state("sz-").unwrap();
        assert_eq!(down.vector()[1], c(1.0, 0.0));
        let xp = q.state("sx=1").unwrap();
        assert!((xp.expectation_real(&pauli_x()).unwrap() - 1.0).abs() < 1e-12);
        assert!(q.state("sz=0.5").is_err());
        assert!(q.state("bogus").is_err());
        assert!(q.state("foo+").is_err());
        let osc = Model::oscillator(4).unwrap();
        let ground = osc.state("ground").unwrap();
        assert_eq!(ground.label()[0].1, 0.0);
        let s = Model::singlet().unwrap();
        let singlet = s.state("singlet").unwrap();
        let sz_total = s.observable("sz_total").unwrap();
        assert!(singlet.expectation_real(sz_total).unwrap().abs() < 1e-12);
    }

    #[test]
    fn model_file_round_trip() {
        let q = Model::qubit().unwrap();
        let json = serde_json::to_string(&q.to_file()).unwrap();
        let back = Model::from_json_str("qubit", &json).unwrap();
        assert_eq!(back.observables().len(), 4);
        assert_eq!(back.observable("sy").unwrap(), q.observable("sy").unwrap());
    }

    #[test]
    fn non_hermitian_model_reports_defect() {
        let json = r#"{"dim": 2, "observables": {"up": {"re": [[0, 1], [0, 0]], "im": [[0, 0], [0, 0]]}}}"#;
        match Model::from_json_str("bad", json) {
            Err(Error::NonHermitianNamed { name, defect }) => {
                assert_eq!(name, "up");
                assert!((defect - 2f64.sqrt()).abs() < 1e-14);
            }
            other => panic!("unexpected {other:?}"),
        }
        let wrong_dim = r#"{"dim": 3, "observables": {"z": {"re": [[1, 0], [0, -1]], "im": [[0, 0], [0, 0]]}}}"#;
        assert!(Model::from_json_str("bad", wrong_dim).is_err());
    }
}
