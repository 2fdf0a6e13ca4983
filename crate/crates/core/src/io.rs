//! JSON model files and ground-truth sidecars.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{Environment, GroundTruth};
use crate::error::{Error, Result};
use crate::mdp::{FeatureMap, StochasticPolicy, TabularMdp, VectorQTable};

/// On-disk form of a model: dense transitions indexed `[x][a][x']`, features
/// indexed `[x][a][k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub initial_dist: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<Vec<Vec<f64>>>>,
    /// States after which expert episodes end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Vec<bool>>,
}

impl ModelFile {
    pub fn from_parts(mdp: &TabularMdp, features: Option<&FeatureMap>, terminal: Option<&[bool]>) -> Self {
        ModelFile {
            n_states: mdp.n_states(),
            n_actions: mdp.n_actions(),
            gamma: mdp.gamma(),
            transitions: mdp.dense_transitions(),
            initial_dist: mdp.initial_dist().to_vec(),
            features: features.map(VectorQTable::to_nested),
            terminal: terminal.filter(|t| t.iter().any(|&b| b)).map(<[bool]>::to_vec),
        }
    }

    pub fn mdp(&self) -> Result<TabularMdp> {
        if self.transitions.len() != self.n_states || self.transitions.iter().any(|r| r.len() != self.n_actions) {
            return Err(Error::model("transition table does not match n_states x n_actions"));
        }
        TabularMdp::from_dense(self.gamma, &self.transitions, self.initial_dist.clone())
    }

    pub fn features(&self) -> Result<Option<FeatureMap>> {
        let Some(nested) = &self.features else { return Ok(None) };
        let f = VectorQTable::from_nested(nested)?;
        if f.n_states() != self.n_states || f.n_actions() != self.n_actions {
            return Err(Error::model("feature table does not match the model shape"));
        }
        Ok(Some(f))
    }

    pub fn terminal(&self) -> Result<Vec<bool>> {
        match &self.terminal {
            Some(t) if t.len() != self.n_states => Err(Error::model("terminal mask does not match n_states")),
            Some(t) => Ok(t.clone()),
            None => Ok(vec![false; self.n_states]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub theta_star: Vec<f64>,
    /// Dense `[x][a]` table.
    pub optimal_policy: Vec<Vec<f64>>,
}

impl TruthFile {
    pub fn from_truth(truth: &GroundTruth) -> Self {
        TruthFile { theta_star: truth.theta_star.clone(), optimal_policy: truth.optimal_policy.to_nested() }
    }

    pub fn truth(&self) -> Result<GroundTruth> {
        let ns = self.optimal_policy.len();
        let na = self.optimal_policy.first().map_or(0, Vec::len);
        if self.optimal_policy.iter().any(|r| r.len() != na) {
            return Err(Error::model("ragged policy table"));
        }
        let probs = self.optimal_policy.concat();
        let optimal_policy = StochasticPolicy::from_probs(ns, na, probs, vec![true; ns])?;
        Ok(GroundTruth { theta_star: self.theta_star.clone(), optimal_policy })
    }
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

/// Sidecar path next to a model file: `lake.json` → `lake.truth.json`.
pub fn truth_path(model_path: &Path) -> std::path::PathBuf {
    let stem = model_path.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    model_path.with_file_name(format!("{stem}.truth.json"))
}

/// Writes the model file and its ground-truth sidecar.
pub fn save_environment(env: &Environment, path: &Path) -> Result<()> {
    write_json(&ModelFile::from_parts(&env.mdp, Some(&env.features), Some(&env.terminal)), path)?;
    write_json(&TruthFile::from_truth(&env.truth), &truth_path(path))
}

/// Loads a model file that carries features, plus its ground-truth sidecar.
pub fn load_environment(path: &Path) -> Result<Environment> {
    let model: ModelFile = read_json(path)?;
    let mdp = model.mdp()?;
    let features = model.features()?.ok_or_else(|| Error::model("model file has no features"))?;
    let terminal = model.terminal()?;
    let sidecar = truth_path(path);
    if !sidecar.exists() {
        return Err(Error::Config(format!("missing ground-truth sidecar {}", sidecar.display())));
    }
    let truth = read_json::<TruthFile>(&sidecar)?.truth()?;
    if truth.optimal_policy.n_states() != mdp.n_states() || truth.theta_star.len() != features.dim() {
        return Err(Error::model("ground truth does not match the model"));
    }
    Ok(Environment { mdp, features, truth, terminal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_gridworld, make_sailing, GridworldSpec, SailingSpec};

    #[test]
    fn environment_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        for env in [
            make_gridworld(&GridworldSpec { size: 3, seed: 5, ..Default::default() }).unwrap(),
            make_sailing(&SailingSpec::with_size(3)).unwrap(),
        ] {
            let path = dir.path().join("m.json");
            save_environment(&env, &path).unwrap();
            let back = load_environment(&path).unwrap();
            assert_eq!(back.mdp, env.mdp);
            assert_eq!(back.features, env.features);
            assert_eq!(back.truth, env.truth);
            assert_eq!(back.terminal, env.terminal);
        }
    }

    #[test]
    fn bare_model_without_features() {
        let mdp = TabularMdp::random(3, 2, 0.5, 1).unwrap();
        let file = ModelFile::from_parts(&mdp, None, None);
        let text = serde_json::to_string(&file).unwrap();
        assert!(!text.contains("features"));
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.mdp().unwrap(), mdp);
        assert!(back.features().unwrap().is_none());
    }

    #[test]
    fn shape_errors() {
        let mdp = TabularMdp::random(2, 2, 0.5, 1).unwrap();
        let mut file = ModelFile::from_parts(&mdp, None, None);
        file.n_actions = 3;
        assert!(file.mdp().is_err());
        assert_eq!(truth_path(Path::new("/a/lake.json")), Path::new("/a/lake.truth.json"));
    }
}
