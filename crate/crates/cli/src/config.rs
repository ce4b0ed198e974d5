//! Run configuration: JSON in, strictly validated (unknown keys rejected).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialSpec,
    pub m: usize,
    pub hbar: String,
    #[serde(default)]
    pub backend: BackendSpec,
    pub newton: NewtonSpec,
    #[serde(default)]
    pub targets: Vec<(u32, u32)>,
    #[serde(default)]
    pub energies: Vec<u32>,
    #[serde(default)]
    pub verify: VerifySpec,
    #[serde(default)]
    pub oracle: Option<OracleSpec>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub inject: Option<InjectSpec>,
}

fn default_seed() -> u64 {
    0
}

fn default_threads() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    /// Coefficients t_0..t_d of the polynomial part of V'.
    pub vprime_poly: Vec<String>,
    /// Simple poles of V': pairs (alpha_p, S_p).
    #[serde(default)]
    pub poles: Vec<(String, String)>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum BackendSpec {
    Rational,
    Double,
    Bigfloat { bits: usize },
}

impl Default for BackendSpec {
    fn default() -> Self {
        BackendSpec::Rational
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSpec {
    pub seeds: Vec<String>,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
}

fn default_max_iter() -> usize {
    200
}

fn default_tol() -> f64 {
    1e-12
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(untagged)]
pub enum VerifySpec {
    All(String),
    List(Vec<String>),
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec::List(vec![])
    }
}

impl VerifySpec {
    pub fn names(&self) -> Result<Vec<String>, String> {
        match self {
            VerifySpec::All(s) if s == "all" => Ok(vec![
                "symmetry".into(),
                "loop_equation".into(),
                "kernel_independence".into(),
                "w30".into(),
                "moments".into(),
                "asymptotics".into(),
                "variational".into(),
                "dilaton".into(),
            ]),
            VerifySpec::All(other) => Err(format!("unknown verify selector {other:?}")),
            VerifySpec::List(v) => Ok(v.clone()),
        }
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, VerifySpec::List(v) if v.is_empty())
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSpec {
    pub beta: f64,
    pub n_values: Vec<u32>,
}

/// Negative-control hook: corrupt one computed quantity before verification.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "target", rename_all = "lowercase", deny_unknown_fields)]
pub enum InjectSpec {
    /// Scale one coefficient of a memoized tensor by (1 + rel).
    Tensor { g: u32, n: u32, rel: f64 },
    /// Scale A[i][j] by (1 + rel) before the kernel is built.
    A { i: usize, j: usize, rel: f64 },
}

/// Parse an exact scalar string: "p/q", integer, or decimal/scientific
/// notation (decimals are converted exactly).
pub fn parse_rational(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num
            .trim()
            .parse()
            .map_err(|e| format!("bad numerator {num:?}: {e}"))?;
        let d: BigInt = den
            .trim()
            .parse()
            .map_err(|e| format!("bad denominator {den:?}: {e}"))?;
        if d.is_zero() {
            return Err("zero denominator".into());
        }
        return Ok(BigRational::new(n, d));
    }
    // decimal / scientific
    let (mantissa, exp) = match s.split_once(['e', 'E']) {
        Some((m, e)) => (
            m,
            e.parse::<i64>()
                .map_err(|err| format!("bad exponent {e:?}: {err}"))?,
        ),
        None => (s, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let digits = format!("{int_part}{frac_part}");
    let n: BigInt = digits
        .parse()
        .map_err(|e| format!("bad number {s:?}: {e}"))?;
    let shift = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let mut num = n;
    let mut den = BigInt::one();
    if shift >= 0 {
        num *= ten.pow(shift as u32);
    } else {
        den = ten.pow((-shift) as u32);
    }
    Ok(BigRational::new(num, den))
}
