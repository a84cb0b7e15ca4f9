use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::stream;

/// One additive component `m_j` of `m(x) = sum_j m_j(x_j)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Component {
    Zero,
    Linear { slope: f64 },
    /// `amp * sin(2 pi freq x)`.
    Sine { freq: f64, amp: f64 },
    /// `coef * x^2`.
    Quadratic { coef: f64 },
}

impl Component {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Component::Zero => 0.0,
            Component::Linear { slope } => slope * x,
            Component::Sine { freq, amp } => amp * (2.0 * std::f64::consts::PI * freq * x).sin(),
            Component::Quadratic { coef } => coef * x * x,
        }
    }
}

/// Additive regression model with uniform covariates on `[0,1]^p` and
/// centred Gaussian noise of standard deviation `sigma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationModel {
    pub name: String,
    pub components: Vec<Component>,
    pub sigma: f64,
}

impl SimulationModel {
    pub fn new(name: impl Into<String>, components: Vec<Component>, sigma: f64) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::config("model needs at least one component"));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::config(format!("noise sd must be finite and non-negative, got {sigma}")));
        }
        Ok(Self { name: name.into(), components, sigma })
    }

    /// `4 sin(2 pi x1) + 2 x2^2 + x3` with two pure-noise covariates, `sigma = 1`.
    pub fn canonical() -> Self {
        Self {
            name: "canonical".into(),
            components: vec![
                Component::Sine { freq: 1.0, amp: 4.0 },
                Component::Quadratic { coef: 2.0 },
                Component::Linear { slope: 1.0 },
                Component::Zero,
                Component::Zero,
            ],
            sigma: 1.0,
        }
    }

    /// `m = 0` in `p` dimensions: `Y` is pure noise.
    pub fn zero(p: usize, sigma: f64) -> Result<Self> {
        Self::new("zero", vec![Component::Zero; p], sigma)
    }

    pub fn p(&self) -> usize {
        self.components.len()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma * self.sigma
    }

    pub fn regression(&self, x: &[f64]) -> f64 {
        self.components.iter().zip(x).map(|(c, &v)| c.eval(v)).sum()
    }
}

/// A simulated dataset with the noiseless regression values kept alongside.
#[derive(Debug, Clone)]
pub struct SimData {
    pub dataset: Dataset,
    /// `m(X_i)`.
    pub truth: Vec<f64>,
}

/// Draws `n` rows: covariates first (row-major), then the noise.
pub fn generate_dataset(model: &SimulationModel, n: usize, seed: u64) -> Result<SimData> {
    if n < 2 {
        return Err(Error::config(format!("need n >= 2, got {n}")));
    }
    let mut rng = stream(seed);
    let p = model.p();
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>()).collect()).collect();
    let truth: Vec<f64> = rows.iter().map(|r| model.regression(r)).collect();
    let response = if model.sigma > 0.0 {
        let noise = Normal::new(0.0, model.sigma).map_err(|e| Error::config(e.to_string()))?;
        truth.iter().map(|m| m + noise.sample(&mut rng)).collect()
    } else {
        truth.clone()
    };
    let dataset = Dataset::from_rows(rows, response)?;
    Ok(SimData { dataset, truth })
}
