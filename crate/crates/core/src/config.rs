//! Key/value run configuration.
//!
//! Keys follow the argument names of the reference programs:
//!
//! ```toml
//! problem = "mbb"      # mbb | cantilever | lbracket
//! method = "ptoc"      # ptos | ptoc | oc
//! nelx = 120
//! nely = 40
//! E0 = 1.0
//! Emin = 1e-9
//! nu = 0.3
//! penal = 3.0
//! L = 1.0
//! lv = 1.0
//! ld = 3
//! rmin = 1.5
//! vlim = 0.35          # volume fraction (ptoc, oc)
//! vmslim = 1.08        # stress limit (ptos)
//! xlim = [0.0, 1.0]
//! q = 1.0
//! alpha = 0.5
//! max_iterations = 2000
//! ```
//!
//! Every key is optional. Missing values fall back to the defaults of
//! [`ProblemSpec::new`] and the chosen method; a file can be layered under
//! command-line overrides with [`RunConfig::overridden_by`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::{Method, RunRequest, Tuning};
use crate::error::{Error, Result};
use crate::problem::{ProblemKind, ProblemSpec};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: Option<ProblemKind>,
    pub method: Option<Method>,
    pub nelx: Option<usize>,
    pub nely: Option<usize>,
    #[serde(rename = "E0")]
    pub e0: Option<f64>,
    #[serde(rename = "Emin")]
    pub e_min: Option<f64>,
    pub nu: Option<f64>,
    pub penal: Option<f64>,
    #[serde(rename = "L")]
    pub edge_length: Option<f64>,
    pub lv: Option<f64>,
    pub ld: Option<usize>,
    pub rmin: Option<f64>,
    pub vlim: Option<f64>,
    pub vmslim: Option<f64>,
    pub xlim: Option<[f64; 2]>,
    pub q: Option<f64>,
    pub alpha: Option<f64>,
    pub max_iterations: Option<usize>,
}

/// Default volume fraction for the compliance methods.
pub const DEFAULT_VLIM: f64 = 0.35;

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    /// Values set in `other` replace those in `self`.
    pub fn overridden_by(self, other: RunConfig) -> RunConfig {
        macro_rules! pick {
            ($($f:ident),*) => {
                RunConfig { $($f: other.$f.or(self.$f)),* }
            };
        }
        pick!(
            problem,
            method,
            nelx,
            nely,
            e0,
            e_min,
            nu,
            penal,
            edge_length,
            lv,
            ld,
            rmin,
            vlim,
            vmslim,
            xlim,
            q,
            alpha,
            max_iterations
        )
    }

    pub fn problem_spec(&self) -> ProblemSpec {
        let mut spec = ProblemSpec::new(self.problem.unwrap_or(ProblemKind::Mbb));
        spec.nelx = self.nelx.unwrap_or(spec.nelx);
        spec.nely = self.nely.unwrap_or(spec.nely);
        spec.edge_length = self.edge_length.unwrap_or(spec.edge_length);
        spec.lv = self.lv.unwrap_or(spec.lv);
        spec.ld = self.ld.unwrap_or(spec.ld);
        spec.rmin = self.rmin.unwrap_or(spec.rmin);
        if let Some([lo, hi]) = self.xlim {
            spec.bounds = (lo, hi);
        }
        let m = &mut spec.material;
        m.e0 = self.e0.unwrap_or(m.e0);
        m.e_min = self.e_min.unwrap_or(m.e_min);
        m.nu = self.nu.unwrap_or(m.nu);
        m.penal = self.penal.unwrap_or(m.penal);
        spec
    }

    pub fn tuning(&self) -> Tuning {
        Tuning {
            q: self.q,
            alpha: self.alpha,
            max_iterations: self.max_iterations,
        }
    }

    /// The run described by this configuration. The stress method needs
    /// `vmslim`; the compliance methods use `vlim` (default 0.35).
    pub fn request(&self) -> Result<RunRequest> {
        let method = self.method.unwrap_or(Method::Ptoc);
        let limit = match method {
            Method::Ptos => self
                .vmslim
                .ok_or_else(|| Error::InvalidConfig("the ptos method needs a stress limit (vmslim)".into()))?,
            Method::Ptoc | Method::Oc => self.vlim.unwrap_or(DEFAULT_VLIM),
        };
        Ok(RunRequest::new(method, limit).with_tuning(self.tuning()))
    }
}
