use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ColumnKind, ColumnSpec, FeatureSchema, RawTable, TabularError};
use crate::seed;

pub const SYNTH_TREATMENT: &str = "T";
pub const SYNTH_LABEL: &str = "y";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    pub n: usize,
    pub d_cont: usize,
    pub effect: f64,
    pub noise: f64,
    pub seed: u64,
}

impl SyntheticParams {
    pub fn new(n: usize, d_cont: usize, effect: f64, noise: f64, seed: u64) -> Self {
        SyntheticParams { n, d_cont, effect, noise, seed }
    }

    fn validate(&self) -> Result<(), TabularError> {
        if self.n < 10 {
            return Err(TabularError::InvalidArgument(format!("n = {} is below 10", self.n)));
        }
        if self.d_cont < 1 {
            return Err(TabularError::InvalidArgument("need at least one continuous column".into()));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) || !self.effect.is_finite() {
            return Err(TabularError::InvalidArgument(format!(
                "effect {} / noise {} must be finite with noise >= 0",
                self.effect, self.noise
            )));
        }
        Ok(())
    }
}

/// Latent draws behind a synthetic table.
///
/// The label of row `i` is `1` iff
/// `direction · x_i + effect · t_i · sign(x_i1) + noise_i > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDraw {
    pub params: SyntheticParams,
    /// Unit vector of length `d_cont`.
    pub direction: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub t: Vec<u8>,
    pub noise: Vec<f64>,
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl SyntheticDraw {
    pub fn sample(params: SyntheticParams) -> Result<Self, TabularError> {
        params.validate()?;
        let SyntheticParams { n, d_cont, noise, seed: master, .. } = params;

        let mut dir_rng = seed::rng_for(master, seed::purpose::SYNTH_DIRECTION, 0);
        let raw: Vec<f64> = (0..d_cont).map(|_| StandardNormal.sample(&mut dir_rng)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let direction = raw.iter().map(|v| v / norm).collect();

        let mut feat_rng = seed::rng_for(master, seed::purpose::SYNTH_FEATURES, 0);
        let mut x = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        for _ in 0..n {
            x.push((0..d_cont).map(|_| feat_rng.random_range(-1.0..1.0)).collect());
            t.push(u8::from(feat_rng.random_bool(0.5)));
        }

        let mut noise_rng = seed::rng_for(master, seed::purpose::SYNTH_NOISE, 0);
        let dist = Normal::new(0.0, noise).expect("validated noise scale");
        let noise = (0..n).map(|_| dist.sample(&mut noise_rng)).collect();

        Ok(SyntheticDraw { params, direction, x, t, noise })
    }

    /// Label of row `i` had its treatment been `treatment`.
    pub fn label_with_treatment(&self, i: usize, treatment: u8) -> u8 {
        let xi = &self.x[i];
        let linear: f64 = self.direction.iter().zip(xi).map(|(w, v)| w * v).sum();
        let score = linear + self.params.effect * f64::from(treatment) * sign(xi[0]) + self.noise[i];
        u8::from(score > 0.0)
    }

    pub fn label(&self, i: usize) -> u8 {
        self.label_with_treatment(i, self.t[i])
    }

    pub fn to_table(&self) -> RawTable {
        let d = self.params.d_cont;
        let mut header: Vec<String> = (1..=d).map(|j| format!("x{j}")).collect();
        header.push(SYNTH_TREATMENT.into());
        header.push(SYNTH_LABEL.into());
        let rows = (0..self.x.len())
            .map(|i| {
                let mut row: Vec<String> = self.x[i].iter().map(|v| v.to_string()).collect();
                row.push(self.t[i].to_string());
                row.push(self.label(i).to_string());
                row
            })
            .collect();
        RawTable::new(header, rows)
    }
}

/// Draws a synthetic table whose treatment interacts with `x1`.
///
/// Columns `x1..x{d_cont}` are Uniform(-1, 1), `T` is Bernoulli(0.5) and `y`
/// follows [`SyntheticDraw`]'s rule with Normal(0, noise) label noise.
pub fn generate_synthetic(
    n: usize,
    d_cont: usize,
    effect: f64,
    noise: f64,
    seed: u64,
) -> Result<RawTable, TabularError> {
    SyntheticDraw::sample(SyntheticParams::new(n, d_cont, effect, noise, seed)).map(|d| d.to_table())
}

/// Schema matching [`generate_synthetic`]'s columns; independent of `effect`.
pub fn synthetic_schema(d_cont: usize) -> FeatureSchema {
    let mut columns: Vec<ColumnSpec> = (1..=d_cont)
        .map(|j| ColumnSpec { name: format!("x{j}"), kind: ColumnKind::Continuous, levels: None })
        .collect();
    for name in [SYNTH_TREATMENT, SYNTH_LABEL] {
        columns.push(ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Binary,
            levels: Some(vec!["0".into(), "1".into()]),
        });
    }
    FeatureSchema {
        name: Some(format!("synthetic-{d_cont}")),
        columns,
        treatment: SYNTH_TREATMENT.into(),
        treatment_one: "1".into(),
        label: SYNTH_LABEL.into(),
        positive_label: "1".into(),
    }
}
