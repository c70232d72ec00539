use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dsp::{Colormap, DspConfig};
use crate::encoder::BackendSpec;
use crate::eval::{ExperimentConfig, TrainConfig};
use crate::fusion::{FusionInput, FusionStrategy};
use crate::ingest::{Task, CANONICAL_RATE_HZ, CANONICAL_SECONDS, DEFAULT_FLATLINE_EPS_MV, DEFAULT_RANGE_LIMIT_MV};
use crate::model::ModelMode;

use super::PipelineError;

/// JSON with object keys sorted and no insignificant whitespace.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    // serde_json's Map is a BTreeMap, so going through Value sorts keys
    let v = serde_json::to_value(value).expect("serializable");
    serde_json::to_string(&v).expect("serializable")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestOptions {
    pub rate_hz: u32,
    pub seconds: f64,
    pub flatline_eps_mv: f64,
    pub range_limit_mv: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            rate_hz: CANONICAL_RATE_HZ,
            seconds: CANONICAL_SECONDS,
            flatline_eps_mv: DEFAULT_FLATLINE_EPS_MV,
            range_limit_mv: DEFAULT_RANGE_LIMIT_MV,
        }
    }
}

impl IngestOptions {
    pub fn hash(&self) -> String {
        sha256_hex(canonical_json(self).as_bytes())
    }
}

/// Everything that determines the feature cache contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpstreamConfig {
    pub ingest: IngestOptions,
    pub dsp: DspConfig,
    pub colormap: Colormap,
    pub backend: BackendSpec,
    pub fusion_input: FusionInput,
}

impl UpstreamConfig {
    pub fn hash(&self) -> String {
        sha256_hex(canonical_json(self).as_bytes())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub ingest: IngestOptions,
    pub dsp: DspConfig,
    pub colormap: Colormap,
    pub backend: BackendSpec,
    pub fusion_input: FusionInput,
    pub fusion: FusionStrategy,
    pub model: ModelMode,
    pub task: Task,
    pub folds: usize,
    pub inner_folds: usize,
    pub seed: u64,
    pub kappa: usize,
    pub nu: usize,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            ingest: IngestOptions::default(),
            dsp: DspConfig::default(),
            colormap: Colormap::Viridis,
            backend: BackendSpec::Fallback { tau: 64, seed: 0 },
            fusion_input: FusionInput::PerLead,
            fusion: FusionStrategy::FeatureConcat,
            model: ModelMode::Joint,
            task: Task::Onset,
            folds: 10,
            inner_folds: 5,
            seed: 0,
            kappa: 16,
            nu: 16,
            train: TrainConfig::default(),
        }
    }
}

/// Recursively overlays `top` onto `base`.
fn merge(base: &mut serde_json::Value, top: serde_json::Value) {
    match (base, top) {
        (serde_json::Value::Object(b), serde_json::Value::Object(t)) => {
            for (k, v) in t {
                merge(b.entry(k).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, t) => *b = t,
    }
}

impl PipelineConfig {
    pub fn hash(&self) -> String {
        sha256_hex(canonical_json(self).as_bytes())
    }

    pub fn upstream(&self) -> UpstreamConfig {
        UpstreamConfig {
            ingest: self.ingest.clone(),
            dsp: self.dsp.clone(),
            colormap: self.colormap,
            backend: self.backend.clone(),
            fusion_input: self.fusion_input,
        }
    }

    pub fn set_upstream(&mut self, u: UpstreamConfig) {
        self.ingest = u.ingest;
        self.dsp = u.dsp;
        self.colormap = u.colormap;
        self.backend = u.backend;
        self.fusion_input = u.fusion_input;
    }

    /// Applies a (possibly partial) JSON document on top of `self`; keys
    /// present in the document win.
    pub fn overlay_json(&self, text: &str) -> Result<Self, PipelineError> {
        let top: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        if !top.is_object() {
            return Err(PipelineError::Config("configuration must be a JSON object".into()));
        }
        let mut base = serde_json::to_value(self).expect("serializable");
        merge(&mut base, top);
        let cfg: Self = serde_json::from_value(base).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if self.ingest.rate_hz == 0 || !(self.ingest.seconds > 0.0) {
            return bad("ingest rate and duration must be positive".into());
        }
        let d = &self.dsp;
        if !(d.window_s > 0.0) || !(0.0..1.0).contains(&d.overlap) {
            return bad(format!("window {} s / overlap {} out of range", d.window_s, d.overlap));
        }
        if !(d.chunk_s > 0.0) || !(0.0..1.0).contains(&d.chunk_overlap) {
            return bad(format!("chunk {} s / overlap {} out of range", d.chunk_s, d.chunk_overlap));
        }
        if !(d.floor_eps > 0.0) {
            return bad("floor_eps must be positive".into());
        }
        if self.folds < 2 {
            return bad(format!("folds must be at least 2, got {}", self.folds));
        }
        if self.kappa == 0 || self.nu == 0 {
            return bad("kappa and nu must be positive".into());
        }
        let t = &self.train;
        if t.epochs == 0 || t.batch_size < self.task.n_classes() || !(t.lr > 0.0) {
            return bad("train: epochs ≥ 1, batch_size ≥ class count and lr > 0 required".into());
        }
        Ok(())
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            fusion: self.fusion,
            mode: self.model,
            class_names: self.task.class_names().iter().map(|s| s.to_string()).collect(),
            kappa: self.kappa,
            nu: self.nu,
            folds: self.folds,
            inner_folds: self.inner_folds,
            seed: self.seed,
            train: self.train,
            config_hash: self.hash(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_json_sorts_keys() {
        let v: serde_json::Value = serde_json::from_str(r#"{"b":1,"a":{"d":2,"c":3}}"#).unwrap();
        assert_eq!(canonical_json(&v), r#"{"a":{"c":3,"d":2},"b":1}"#);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = PipelineConfig::default();
        assert_eq!(a.hash(), PipelineConfig::default().hash());
        assert_eq!(a.hash().len(), 64);
        let mut b = a.clone();
        b.dsp.window_s = 2.0;
        assert_ne!(a.hash(), b.hash());
        assert_ne!(a.upstream().hash(), b.upstream().hash());
        let mut c = a.clone();
        c.model = ModelMode::Spectral;
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.upstream().hash(), c.upstream().hash());
    }

    #[test]
    fn overlay() {
        let a = PipelineConfig::default();
        let b = a.overlay_json(r#"{"folds": 4, "dsp": {"overlap": 0.25}, "backend": "fallback:32:1"}"#).unwrap();
        assert_eq!(b.folds, 4);
        assert_eq!(b.dsp.overlap, 0.25);
        assert_eq!(b.dsp.window_s, 1.0);
        assert_eq!(b.backend, BackendSpec::Fallback { tau: 32, seed: 1 });
        assert!(matches!(a.overlay_json(r#"{"nope": 1}"#), Err(PipelineError::Config(_))));
        assert!(matches!(a.overlay_json(r#"{"folds": 1}"#), Err(PipelineError::Config(_))));
        assert!(matches!(a.overlay_json("[1]"), Err(PipelineError::Config(_))));
    }
}
