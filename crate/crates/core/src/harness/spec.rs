use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dims::ProblemDims;
use crate::error::{Error, Result};
use crate::operators::BackendKind;
use crate::solvers::{Algorithm, StepRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    #[default]
    Armijo,
    Constant,
}

/// One solver column of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub step: StepKind,
    /// Constant step size (default 1).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Iteration cap; defaults to 3000 for iht/riht and 20000 for rpg.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

impl SolverSpec {
    pub fn new(algorithm: Algorithm, step: StepKind) -> Self {
        SolverSpec {
            algorithm,
            step,
            alpha: None,
            max_iter: None,
        }
    }

    pub fn with_max_iter(mut self, n: usize) -> Self {
        self.max_iter = Some(n);
        self
    }

    /// `riht-armijo`, `iht-const`, …
    pub fn label(&self) -> String {
        match self.step {
            StepKind::Armijo => format!("{}-armijo", self.algorithm),
            StepKind::Constant => match self.alpha {
                Some(a) if a != 1.0 => format!("{}-const{a}", self.algorithm),
                _ => format!("{}-const", self.algorithm),
            },
        }
    }

    pub fn step_rule(&self) -> StepRule {
        match self.step {
            StepKind::Armijo => StepRule::armijo(),
            StepKind::Constant => StepRule::Constant {
                alpha: self.alpha.unwrap_or(1.0),
            },
        }
    }

    pub fn iteration_cap(&self) -> usize {
        self.max_iter.unwrap_or(match self.algorithm {
            Algorithm::Rpg => 20_000,
            _ => 3_000,
        })
    }
}

fn default_threshold() -> f64 {
    1e-4
}

fn default_decay() -> f64 {
    0.99
}

fn default_trials() -> usize {
    10
}

/// A grid of `(m, s, N)` cells at fixed `M` and `k`.
///
/// ```toml
/// name = "fig4-desk"
/// backend = "fourier"
/// rows = 150
/// rank = 1
/// m_values = [100, 200, 300]
/// s_values = [2, 4, 8]
/// n_values = [50]
/// trials = 10
/// seed_base = 7
///
/// [[solvers]]
/// algorithm = "riht"
/// step = "armijo"
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    pub backend: BackendKind,
    /// `M`.
    pub rows: usize,
    /// `k`.
    pub rank: usize,
    pub m_values: Vec<usize>,
    pub s_values: Vec<usize>,
    /// `N` axis; ignored when `cols_equal_sparsity` is set.
    #[serde(default)]
    pub n_values: Vec<usize>,
    /// Use `N = s` in every cell.
    #[serde(default)]
    pub cols_equal_sparsity: bool,
    #[serde(default = "default_trials")]
    pub trials: usize,
    pub solvers: Vec<SolverSpec>,
    /// A trial succeeds when the final relative Frobenius error is at most this.
    #[serde(default = "default_threshold")]
    pub success_threshold: f64,
    #[serde(default)]
    pub seed_base: u64,
    /// Stop a run once its relative error reaches this value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_tol: Option<f64>,
    #[serde(default = "default_decay")]
    pub rpg_decay: f64,
    /// Measure wall-clock time. Off by default so that outputs replay
    /// byte-for-byte.
    #[serde(default)]
    pub record_timing: bool,
}

pub const PRESET_NAMES: &[&str] = &[
    "fig1-desk",
    "fig1-paper",
    "fig3-desk",
    "fig4-desk",
    "fig4-rankone-desk",
    "table2-fourier",
    "table2-rankone",
];

fn adaptive(alg: Algorithm) -> SolverSpec {
    SolverSpec::new(alg, StepKind::Armijo)
}

fn constant(alg: Algorithm) -> SolverSpec {
    SolverSpec::new(alg, StepKind::Constant)
}

impl ExperimentSpec {
    pub fn preset(name: &str) -> Option<ExperimentSpec> {
        use Algorithm::*;
        let gaussian_grid = |name: &str, rows, rank, s_values: Vec<usize>, m_values| ExperimentSpec {
            name: name.into(),
            backend: BackendKind::Gaussian,
            rows,
            rank,
            m_values,
            s_values,
            n_values: Vec::new(),
            cols_equal_sparsity: true,
            trials: 10,
            solvers: vec![constant(Iht), adaptive(Iht), constant(Riht), adaptive(Riht)],
            success_threshold: 1e-4,
            seed_base: 1,
            error_tol: None,
            rpg_decay: 0.99,
            record_timing: false,
        };
        let table2 = |name: &str, backend| ExperimentSpec {
            name: name.into(),
            backend,
            rows: 150,
            rank: 1,
            m_values: vec![200],
            s_values: vec![3],
            n_values: vec![50],
            cols_equal_sparsity: false,
            trials: 20,
            solvers: vec![
                adaptive(Iht).with_max_iter(5000),
                adaptive(Riht).with_max_iter(5000),
                adaptive(Rpg).with_max_iter(40_000),
            ],
            success_threshold: 1e-5,
            seed_base: 2,
            error_tol: Some(1e-5),
            rpg_decay: 0.999,
            record_timing: false,
        };
        let fig4 = |name: &str, backend| ExperimentSpec {
            name: name.into(),
            backend,
            rows: 150,
            rank: 1,
            m_values: vec![50, 75, 100, 150, 200, 300],
            s_values: vec![2, 4, 8, 16],
            n_values: vec![50],
            cols_equal_sparsity: false,
            trials: 20,
            solvers: vec![adaptive(Iht), adaptive(Riht), adaptive(Rpg)],
            success_threshold: 1e-4,
            seed_base: 4,
            error_tol: None,
            rpg_decay: 0.999,
            record_timing: false,
        };
        Some(match name {
            "fig1-desk" => gaussian_grid(
                name,
                200,
                2,
                vec![8, 16, 32],
                vec![40, 57, 80, 113, 160, 226, 320, 453, 640],
            ),
            "fig1-paper" => gaussian_grid(
                name,
                1000,
                3,
                vec![10, 20, 40, 80],
                vec![100, 141, 200, 283, 400, 566, 800, 1131, 1600],
            ),
            "fig3-desk" => ExperimentSpec {
                trials: 1,
                m_values: vec![520],
                s_values: vec![20],
                n_values: vec![10],
                cols_equal_sparsity: false,
                solvers: vec![
                    constant(Iht),
                    adaptive(Iht),
                    constant(Riht),
                    adaptive(Riht),
                    adaptive(Rpg),
                ],
                seed_base: 3,
                ..gaussian_grid(name, 1000, 3, vec![], vec![])
            },
            "fig4-desk" => fig4(name, BackendKind::Fourier),
            "fig4-rankone-desk" => fig4(name, BackendKind::RankOne),
            "table2-fourier" => table2(name, BackendKind::Fourier),
            "table2-rankone" => table2(name, BackendKind::RankOne),
            _ => return None,
        })
    }

    pub fn from_toml_str(text: &str) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            Error::Spec {
                line,
                message: e.message().to_string(),
            }
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<ExperimentSpec> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ExperimentSpec::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("experiment spec serializes")
    }

    /// Column counts used with sparsity `s`.
    pub fn cols_for(&self, s: usize) -> Vec<usize> {
        if self.cols_equal_sparsity {
            vec![s]
        } else {
            self.n_values.clone()
        }
    }

    /// Every `(m, s, N)` cell in grid order.
    pub fn cells(&self) -> Vec<ProblemDims> {
        let mut out = Vec::new();
        for &m in &self.m_values {
            for &s in &self.s_values {
                for n in self.cols_for(s) {
                    out.push(ProblemDims {
                        rows: self.rows,
                        cols: n,
                        rank: self.rank,
                        sparsity: s,
                        measurements: m,
                    });
                }
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(format!("experiment '{}': {msg}", self.name)));
        if self.m_values.is_empty() || self.s_values.is_empty() {
            return bad("m_values and s_values must be nonempty".into());
        }
        if !self.cols_equal_sparsity && self.n_values.is_empty() {
            return bad("n_values must be nonempty unless cols_equal_sparsity is set".into());
        }
        if self.trials < 1 {
            return bad("trials must be at least 1".into());
        }
        if self.solvers.is_empty() {
            return bad("at least one solver is required".into());
        }
        if self.backend == BackendKind::Dense {
            return bad("the dense backend cannot be generated from a seed".into());
        }
        if !(self.success_threshold > 0.0) {
            return bad("success_threshold must be positive".into());
        }
        if !(self.rpg_decay > 0.0 && self.rpg_decay < 1.0) {
            return bad(format!("rpg_decay must lie in (0,1), got {}", self.rpg_decay));
        }
        for s in &self.solvers {
            s.step_rule().validate()?;
        }
        for d in self.cells() {
            d.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for name in PRESET_NAMES {
            let spec = ExperimentSpec::preset(name).unwrap();
            spec.validate().unwrap();
            let back = ExperimentSpec::from_toml_str(&spec.to_toml_string()).unwrap();
            assert_eq!(back, spec);
        }
    }

    #[test]
    fn parse_errors_carry_line() {
        let text = "name = \"x\"\nbackend = \"gaussian\"\nrows = \"many\"\n";
        match ExperimentSpec::from_toml_str(text) {
            Err(Error::Spec { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys_and_bad_cells() {
        let base = "name = \"x\"\nbackend = \"gaussian\"\nrows = 20\nrank = 2\n\
                    m_values = [50]\ns_values = [4]\nn_values = [5]\n\
                    [[solvers]]\nalgorithm = \"riht\"\n";
        assert!(ExperimentSpec::from_toml_str(base).is_ok());
        assert!(matches!(
            ExperimentSpec::from_toml_str(&format!("colour = 1\n{base}")),
            Err(Error::Spec { line: 1, .. })
        ));
        let bad = base.replace("s_values = [4]", "s_values = [2]");
        assert!(matches!(ExperimentSpec::from_toml_str(&bad), Err(Error::Parameter(_))));
    }

    #[test]
    fn grid_enumeration() {
        let spec = ExperimentSpec::preset("fig1-desk").unwrap();
        let cells = spec.cells();
        assert_eq!(cells.len(), spec.m_values.len() * spec.s_values.len());
        assert!(cells.iter().all(|d| d.cols == d.sparsity));
    }
}
