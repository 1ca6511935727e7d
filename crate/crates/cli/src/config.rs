use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use nikishin::asymptotics::{decreasing_ladder, default_probes, diagonal_ladder};
use nikishin::hermite_pade::MultiIndex;
use nikishin::measures::{MeasureSpec, NikishinGenerator};
use nikishin::{Error, PrecisionPolicy, Result};

fn default_bits() -> u32 {
    256
}

/// Ladder of multi-indices for the experiment commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LadderSpec {
    /// `(k, ..., k)`.
    Diagonal { k: Vec<usize> },
    /// `(k+m-1, ..., k)`.
    Decreasing { k: Vec<usize> },
    Explicit { indices: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    /// Report JSON; stdout when absent.
    pub json: Option<String>,
    pub csv: Option<String>,
    pub plot: Option<String>,
}

/// One JSON file describing the generator, precision and command inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub measures: Vec<MeasureSpec>,
    #[serde(default = "default_bits")]
    pub precision_bits: u32,
    pub escalation_factor: Option<u32>,
    pub max_escalations: Option<u32>,
    pub degree_budget: Option<usize>,
    pub eps_dist: Option<f64>,
    pub index: Option<Vec<usize>>,
    pub level: Option<usize>,
    pub ladder: Option<LadderSpec>,
    /// `[re, im]` pairs.
    pub probes: Option<Vec<[f64; 2]>>,
    pub pole_sheet: Option<usize>,
    /// Samples per interval for the boundary value residuals.
    pub samples: Option<usize>,
    #[serde(default)]
    pub outputs: Outputs,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn generator(&self) -> Result<NikishinGenerator> {
        NikishinGenerator::new(self.measures.clone())
    }

    pub fn m(&self) -> usize {
        self.measures.len()
    }

    pub fn policy(&self) -> Result<PrecisionPolicy> {
        let d = PrecisionPolicy::default();
        let p = PrecisionPolicy {
            bits: self.precision_bits,
            escalation_factor: self.escalation_factor.unwrap_or(d.escalation_factor),
            max_escalations: self.max_escalations.unwrap_or(d.max_escalations),
        };
        p.validate()?;
        Ok(p)
    }

    /// The configured index; a single value is repeated over all components.
    pub fn multi_index(&self) -> Result<MultiIndex> {
        let v = self
            .index
            .clone()
            .ok_or_else(|| Error::Config("an index is required (config \"index\" or --index)".into()))?;
        let m = self.m();
        let v = if v.len() == 1 && m > 1 { vec![v[0]; m] } else { v };
        if v.len() != m {
            return Err(Error::InvalidIndex(format!("index has {} components but there are {m} measures", v.len())));
        }
        MultiIndex::new(v)
    }

    pub fn ladder(&self) -> Result<Vec<MultiIndex>> {
        let m = self.m();
        let spec = self.ladder.clone().unwrap_or(LadderSpec::Diagonal { k: (1..=8).collect() });
        let out = match spec {
            LadderSpec::Diagonal { k } => diagonal_ladder(m, k),
            LadderSpec::Decreasing { k } => decreasing_ladder(m, k),
            LadderSpec::Explicit { indices } => indices.into_iter().map(MultiIndex::new).collect::<Result<Vec<_>>>()?,
        };
        if out.is_empty() {
            return Err(Error::Config("ladder is empty".into()));
        }
        if let Some(n) = out.iter().find(|n| n.m() != m) {
            return Err(Error::InvalidIndex(format!("ladder entry {n} does not have {m} components")));
        }
        Ok(out)
    }

    pub fn probes(&self, gen: &NikishinGenerator) -> Vec<Complex64> {
        match &self.probes {
            Some(p) => p.iter().map(|z| Complex64::new(z[0], z[1])).collect(),
            None => default_probes(gen),
        }
    }

    /// Pole sheet in `1..=m`.
    pub fn pole_sheet(&self) -> Result<usize> {
        let m = self.m();
        let l = self
            .pole_sheet
            .ok_or_else(|| Error::Config("a pole sheet is required (config \"pole_sheet\" or --pole-sheet)".into()))?;
        if l == 0 || l > m {
            return Err(Error::Argument(format!("pole sheet {l} is out of range 1..={m}")));
        }
        Ok(l)
    }

    /// Level `j` in `1..=m`, defaulting to `m`.
    pub fn level(&self) -> Result<usize> {
        let m = self.m();
        let j = self.level.unwrap_or(m);
        if j == 0 || j > m {
            return Err(Error::Argument(format!("level {j} is out of range 1..={m}")));
        }
        Ok(j)
    }
}
