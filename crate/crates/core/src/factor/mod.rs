//! Discrete factor analysis with a beta-process prior on the binary
//! loadings, `X = (W ∘ Z) Φ + E`, and its Gibbs sampler.

mod gibbs;
mod sticks;
mod synthetic;
mod trace;

use nalgebra::DMatrix;

use crate::bep::FeatureMatrix;
use crate::bp::BPParams;
use crate::error::{Error, Result};

pub use gibbs::{
    alpha_grid, collapsed_row_loglik, initial_state, phi_posterior, round_prior, run_mcmc, sample_alpha,
    sample_gamma_mass, sample_phi, sample_round_indicators, sample_theta, sample_w, sample_z, sample_z_fixed,
    theta_grid, w_posterior, z_log_odds,
};
pub use sticks::{stick_mc_prob, StickBank};
pub use synthetic::{generate_synthetic, generate_synthetic_with_k};
pub use trace::{autocorrelation, Autocorrelation, Trace, TraceRecord};

/// Fixed variances: noise `η`, weights `ζ` and factor rows `ρ_p`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorHyper {
    pub eta: f64,
    pub zeta: f64,
    pub rho: Vec<f64>,
}

impl FactorHyper {
    pub fn new(eta: f64, zeta: f64, rho: Vec<f64>) -> Result<Self> {
        let h = FactorHyper { eta, zeta, rho };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if !ok(self.eta) || !ok(self.zeta) || self.rho.is_empty() || !self.rho.iter().all(|&r| ok(r)) {
            return Err(Error::domain(format!(
                "factor variances must be positive and finite (eta = {}, zeta = {}, rho = {:?})",
                self.eta, self.zeta, self.rho
            )));
        }
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.rho.len()
    }
}

/// The full sampler state.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorState {
    pub z: FeatureMatrix,
    /// N×K weights; entries where `Z` is zero are never read.
    pub w: DMatrix<f64>,
    /// K×P factors.
    pub phi: DMatrix<f64>,
    /// Round indicator of each column, nondecreasing.
    pub r: Vec<u32>,
    pub params: BPParams,
}

impl FactorState {
    pub fn k(&self) -> usize {
        self.z.n_cols()
    }

    pub fn n(&self) -> usize {
        self.z.n_rows()
    }

    /// `W ∘ Z`.
    pub fn masked_weights(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n(), self.k(), |n, k| if self.z.get(n, k) { self.w[(n, k)] } else { 0.0 })
    }

    /// `(W ∘ Z) Φ`.
    pub fn reconstruction(&self) -> DMatrix<f64> {
        if self.k() == 0 {
            return DMatrix::zeros(self.n(), self.phi.ncols());
        }
        self.masked_weights() * &self.phi
    }

    /// Per-element root-mean-square of `X - (W ∘ Z) Φ`.
    pub fn rmse(&self, x: &DMatrix<f64>) -> f64 {
        let d = x - self.reconstruction();
        (d.norm_squared() / d.len() as f64).sqrt()
    }

    /// Gaussian log-likelihood of `X` given every latent.
    pub fn data_loglik(&self, x: &DMatrix<f64>, eta: f64) -> f64 {
        let d = x - self.reconstruction();
        -0.5 * (d.len() as f64 * (2.0 * std::f64::consts::PI * eta).ln() + d.norm_squared() / eta)
    }

    /// Checks shapes, round order and that every column is represented.
    pub fn check_consistency(&self) -> Result<()> {
        let k = self.k();
        if self.w.nrows() != self.n() || self.w.ncols() != k || self.phi.nrows() != k || self.r.len() != k {
            return Err(Error::domain("factor state dimensions disagree"));
        }
        if self.r.windows(2).any(|w| w[0] > w[1]) || self.r.first().is_some_and(|&r| r == 0) {
            return Err(Error::domain("round indicators must be positive and nondecreasing"));
        }
        if self.z.column_counts().iter().any(|&m| m == 0) {
            return Err(Error::domain("every stored column must be used by at least one row"));
        }
        Ok(())
    }

    /// Drops columns no row uses. Returns how many were removed.
    pub fn prune(&mut self) -> usize {
        let dead = self.z.empty_columns();
        if dead.is_empty() {
            return 0;
        }
        self.z.remove_columns(&dead);
        self.w = self.w.clone().remove_columns_at(&dead);
        self.phi = self.phi.clone().remove_rows_at(&dead);
        let mut keep = vec![true; self.r.len()];
        for &c in &dead {
            keep[c] = false;
        }
        self.r = self.r.iter().zip(&keep).filter(|(_, &k)| k).map(|(&r, _)| r).collect();
        dead.len()
    }

    /// Writes `Z`, `W` and `Φ` as three CSV tables.
    pub fn write_snapshots<W1: std::io::Write, W2: std::io::Write, W3: std::io::Write>(
        &self,
        z: W1,
        w: W2,
        phi: W3,
    ) -> std::io::Result<()> {
        self.z.write_csv(z)?;
        write_matrix_csv(&self.w, "w", w)?;
        write_matrix_csv(&self.phi, "p", phi)
    }
}

pub(crate) fn write_matrix_csv<W: std::io::Write>(m: &DMatrix<f64>, prefix: &str, mut out: W) -> std::io::Result<()> {
    let header: Vec<String> = (1..=m.ncols()).map(|c| format!("{prefix}{c}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Sampler settings.
#[derive(Clone, Debug, PartialEq)]
pub struct MCMCConfig {
    pub iterations: usize,
    pub burn_in: usize,
    /// Stick paths per Monte-Carlo integral.
    pub sticks: usize,
    /// θ grid spacing as a fraction of the current θ.
    pub delta_theta: f64,
    pub delta_theta_min: f64,
    pub theta_grid_points: usize,
    pub theta_max: f64,
    pub delta_alpha: f64,
    /// Candidate rounds are enumerated until their mass drops below this
    /// fraction of the largest seen.
    pub round_tail_threshold: f64,
    pub max_rounds: usize,
    pub k_init: usize,
    pub init_z_prob: f64,
    pub gamma_init: f64,
    pub theta_init: f64,
    pub alpha_init: f64,
    pub thin: usize,
    pub seed: u64,
}

impl Default for MCMCConfig {
    fn default() -> Self {
        MCMCConfig {
            iterations: 2000,
            burn_in: 500,
            sticks: 256,
            delta_theta: 0.05,
            delta_theta_min: 0.01,
            theta_grid_points: 41,
            theta_max: 100.0,
            delta_alpha: 0.01,
            round_tail_threshold: 1e-8,
            max_rounds: 1000,
            k_init: 20,
            init_z_prob: 0.1,
            gamma_init: 1.0,
            theta_init: 1.0,
            alpha_init: 0.2,
            thin: 1,
            seed: 1,
        }
    }
}

impl MCMCConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::domain(m.to_string()));
        if self.burn_in >= self.iterations && !(self.iterations == 0 && self.burn_in == 0) {
            return fail("burn_in must be smaller than iterations");
        }
        if self.sticks == 0 || self.thin == 0 || self.theta_grid_points == 0 || self.max_rounds == 0 {
            return fail("sticks, thin, theta_grid_points and max_rounds must be positive");
        }
        if !(self.delta_theta > 0.0 && self.delta_theta_min > 0.0 && self.theta_max > 0.0) {
            return fail("theta grid settings must be positive");
        }
        let cells = 1.0 / self.delta_alpha;
        if !(self.delta_alpha > 0.0 && self.delta_alpha < 1.0) || (cells - cells.round()).abs() > 1e-9 || cells.round() < 2.0 {
            return fail("delta_alpha must split [0, 1] into at least two equal cells");
        }
        if !(self.round_tail_threshold > 0.0 && self.round_tail_threshold < 1.0) {
            return fail("round_tail_threshold must lie in (0, 1)");
        }
        if !(0.0..=1.0).contains(&self.init_z_prob) {
            return fail("init_z_prob must lie in [0, 1]");
        }
        BPParams::new(self.gamma_init, self.theta_init, self.alpha_init)?;
        Ok(())
    }

    /// Sets one field from its textual key and value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
            v.parse().map_err(|_| format!("cannot parse {v:?}"))
        }
        match key {
            "iterations" => self.iterations = num(value)?,
            "burn_in" => self.burn_in = num(value)?,
            "sticks" => self.sticks = num(value)?,
            "delta_theta" => self.delta_theta = num(value)?,
            "delta_theta_min" => self.delta_theta_min = num(value)?,
            "theta_grid_points" => self.theta_grid_points = num(value)?,
            "theta_max" => self.theta_max = num(value)?,
            "delta_alpha" => self.delta_alpha = num(value)?,
            "round_tail_threshold" => self.round_tail_threshold = num(value)?,
            "max_rounds" => self.max_rounds = num(value)?,
            "k_init" => self.k_init = num(value)?,
            "init_z_prob" => self.init_z_prob = num(value)?,
            "gamma_init" => self.gamma_init = num(value)?,
            "theta_init" => self.theta_init = num(value)?,
            "alpha_init" => self.alpha_init = num(value)?,
            "thin" => self.thin = num(value)?,
            "seed" => self.seed = num(value)?,
            _ => return Err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Every field as `key=value` lines, in a fixed order.
    pub fn to_key_values(&self) -> Vec<(String, String)> {
        let kv = |k: &str, v: String| (k.to_string(), v);
        vec![
            kv("iterations", self.iterations.to_string()),
            kv("burn_in", self.burn_in.to_string()),
            kv("sticks", self.sticks.to_string()),
            kv("delta_theta", self.delta_theta.to_string()),
            kv("delta_theta_min", self.delta_theta_min.to_string()),
            kv("theta_grid_points", self.theta_grid_points.to_string()),
            kv("theta_max", self.theta_max.to_string()),
            kv("delta_alpha", self.delta_alpha.to_string()),
            kv("round_tail_threshold", self.round_tail_threshold.to_string()),
            kv("max_rounds", self.max_rounds.to_string()),
            kv("k_init", self.k_init.to_string()),
            kv("init_z_prob", self.init_z_prob.to_string()),
            kv("gamma_init", self.gamma_init.to_string()),
            kv("theta_init", self.theta_init.to_string()),
            kv("alpha_init", self.alpha_init.to_string()),
            kv("thin", self.thin.to_string()),
            kv("seed", self.seed.to_string()),
        ]
    }
}

/// One `key=value` entry with its 1-based line and the column where the
/// value starts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyValue {
    pub row: usize,
    pub column: usize,
    pub key: String,
    pub value: String,
}

/// Parses flat `key=value` text. Blank lines and `#` comments are skipped.
pub fn parse_key_values(text: &str) -> Result<Vec<KeyValue>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(eq) = raw.find('=') else {
            return Err(Error::Parse { row: i + 1, column: 1, message: format!("expected key=value, got {line:?}") });
        };
        let key = raw[..eq].trim();
        if key.is_empty() {
            return Err(Error::Parse { row: i + 1, column: 1, message: "empty key".into() });
        }
        let rest = &raw[eq + 1..];
        let column = eq + 2 + (rest.len() - rest.trim_start().len());
        out.push(KeyValue { row: i + 1, column, key: key.to_string(), value: rest.trim().to_string() });
    }
    Ok(out)
}

/// Applies `key=value` text on top of `config` and `hyper`. Hyper keys are
/// `eta`, `zeta` and `rho` (one value for every column, or a
/// comma-separated list).
pub fn apply_config_text(text: &str, config: &mut MCMCConfig, hyper: &mut FactorHyper) -> Result<()> {
    for kv in parse_key_values(text)? {
        let err = |message: String| Error::Parse { row: kv.row, column: kv.column, message };
        let value = kv.value.as_str();
        let real = |v: &str| v.trim().parse::<f64>().map_err(|_| err(format!("cannot parse {v:?}")));
        match kv.key.as_str() {
            "eta" => hyper.eta = real(value)?,
            "zeta" => hyper.zeta = real(value)?,
            "rho" => {
                let vals = value.split(',').map(real).collect::<Result<Vec<f64>>>()?;
                hyper.rho = if vals.len() == 1 { vec![vals[0]; hyper.rho.len().max(1)] } else { vals };
            }
            key => config.set(key, value).map_err(err)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyper_validation() {
        assert!(FactorHyper::new(0.1, 1.0, vec![1.0; 3]).is_ok());
        assert!(FactorHyper::new(0.0, 1.0, vec![1.0]).is_err());
        assert!(FactorHyper::new(0.1, 1.0, vec![]).is_err());
    }

    #[test]
    fn config_defaults_are_valid() {
        assert!(MCMCConfig::default().validate().is_ok());
        let zero = MCMCConfig { iterations: 0, burn_in: 0, ..Default::default() };
        assert!(zero.validate().is_ok());
        let bad = MCMCConfig { burn_in: 2000, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MCMCConfig { delta_alpha: 0.3, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = MCMCConfig { delta_alpha: 0.5, ..Default::default() };
        assert!(bad.validate().is_ok());
    }

    #[test]
    fn key_value_round_trip() {
        let mut c = MCMCConfig::default();
        let mut h = FactorHyper::new(1.0, 1.0, vec![1.0; 4]).unwrap();
        let text = "# run\niterations = 50\nburn_in=10\n\neta=0.1\nrho=2\nseed=7\n";
        apply_config_text(text, &mut c, &mut h).unwrap();
        assert_eq!((c.iterations, c.burn_in, c.seed), (50, 10, 7));
        assert_eq!(h.eta, 0.1);
        assert_eq!(h.rho, vec![2.0; 4]);
        let dumped: String = c.to_key_values().iter().map(|(k, v)| format!("{k}={v}\n")).collect();
        let mut c2 = MCMCConfig::default();
        apply_config_text(&dumped, &mut c2, &mut h).unwrap();
        assert_eq!(c, c2);
    }

    #[test]
    fn key_value_errors_carry_position() {
        let mut c = MCMCConfig::default();
        let mut h = FactorHyper::new(1.0, 1.0, vec![1.0]).unwrap();
        match apply_config_text("iterations=5\nnonsense\n", &mut c, &mut h) {
            Err(Error::Parse { row: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
        match apply_config_text("sticks=many", &mut c, &mut h) {
            Err(Error::Parse { row: 1, column: 8, .. }) => {}
            other => panic!("{other:?}"),
        }
        assert!(apply_config_text("wat=1", &mut c, &mut h).is_err());
    }
}
