use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{
    align_none, AlignmentMethod, AlignmentOutcome, CaGrad, GradVac, GradientAligner, PcGrad, DEFAULT_CAGRAD_C,
    DEFAULT_GRADVAC_BETA,
};
use crate::error::{DpdaError, Result};
use crate::numkit::ParamVector;

/// Plain averaging; the dual-path baseline.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoAlign;

impl GradientAligner for NoAlign {
    fn name(&self) -> &'static str {
        "none"
    }

    fn method(&self) -> AlignmentMethod {
        AlignmentMethod::NoAlign
    }

    fn align(&mut self, g_x: &ParamVector, g_xt: &ParamVector) -> Result<AlignmentOutcome> {
        align_none(g_x, g_xt)
    }
}

/// Hyperparameters that any registered strategy may read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignmentParams {
    pub gradvac_beta: f64,
    pub gradvac_phi_init: f64,
    pub cagrad_c: f64,
}

impl Default for AlignmentParams {
    fn default() -> Self {
        AlignmentParams { gradvac_beta: DEFAULT_GRADVAC_BETA, gradvac_phi_init: 0.0, cagrad_c: DEFAULT_CAGRAD_C }
    }
}

pub type AlignerFactory = fn(&AlignmentParams) -> Result<Box<dyn GradientAligner>>;

/// Name → strategy table.
pub struct AlignerRegistry {
    entries: BTreeMap<String, AlignerFactory>,
}

impl Default for AlignerRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl AlignerRegistry {
    pub fn empty() -> Self {
        AlignerRegistry { entries: BTreeMap::new() }
    }

    /// Registry with `none`, `pcgrad`, `gradvac` and `cagrad`.
    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register("none", |_| Ok(Box::new(NoAlign)));
        r.register("pcgrad", |_| Ok(Box::new(PcGrad)));
        r.register("gradvac", |p| Ok(Box::new(GradVac::new(p.gradvac_beta, p.gradvac_phi_init)?)));
        r.register("cagrad", |p| Ok(Box::new(CaGrad::new(p.cagrad_c)?)));
        r
    }

    /// Adds or replaces a strategy. Names are case-insensitive.
    pub fn register(&mut self, name: &str, factory: AlignerFactory) {
        self.entries.insert(name.to_ascii_lowercase(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(&name.to_ascii_lowercase())
    }

    pub fn create(&self, name: &str, params: &AlignmentParams) -> Result<Box<dyn GradientAligner>> {
        let factory = self.entries.get(&name.to_ascii_lowercase()).ok_or_else(|| {
            DpdaError::Config(format!("unknown alignment method '{name}' (known: {})", self.names().join(", ")))
        })?;
        factory(params)
    }

    /// Resolves `name` and `params` to a validated method description.
    pub fn resolve(&self, name: &str, params: &AlignmentParams) -> Result<AlignmentMethod> {
        Ok(self.create(name, params)?.method())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_resolve_by_name() {
        let reg = AlignerRegistry::with_builtins();
        assert_eq!(reg.names(), vec!["cagrad", "gradvac", "none", "pcgrad"]);
        let p = AlignmentParams::default();
        for name in reg.names() {
            let a = reg.create(name, &p).unwrap();
            assert_eq!(a.name(), name);
            assert_eq!(a.method().name(), name);
        }
        assert!(reg.contains("PCGrad"));
        assert_eq!(reg.resolve("gradvac", &p).unwrap(), AlignmentMethod::GradVac { beta: 0.01, phi_init: 0.0 });
    }

    #[test]
    fn unknown_name_is_config_error() {
        let reg = AlignerRegistry::with_builtins();
        assert!(matches!(reg.create("mgda", &AlignmentParams::default()), Err(DpdaError::Config(_))));
    }

    #[test]
    fn invalid_hyperparameters_rejected_at_create() {
        let reg = AlignerRegistry::with_builtins();
        let p = AlignmentParams { cagrad_c: 1.5, ..Default::default() };
        assert!(reg.create("cagrad", &p).is_err());
        let p = AlignmentParams { gradvac_beta: 0.0, ..Default::default() };
        assert!(reg.create("gradvac", &p).is_err());
    }

    #[test]
    fn custom_strategy_can_be_registered() {
        let mut reg = AlignerRegistry::empty();
        reg.register("baseline", |_| Ok(Box::new(NoAlign)));
        assert!(reg.contains("baseline"));
        assert!(!reg.contains("pcgrad"));
    }
}
