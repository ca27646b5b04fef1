//! Four-level engine parameters and the counting-field dressed generator.
//!
//! The density vector is ordered `{rho_11, rho_22, rho_bb, rho_aa, Re(rho_12)}`.
//! Only the two cavity transitions between `|b>` and `|a>` carry the counting
//! field: `a -> b` at entry (2,3) with `exp(-lambda)` and `b -> a` at entry
//! (3,2) with `exp(+lambda)` (zero-based indices).

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat5 = SMatrix<f64, 5, 5>;
pub type Vec5 = nalgebra::SVector<f64, 5>;

/// Row/column of the `a -> b` counted entry.
pub const EMISSION_ENTRY: (usize, usize) = (2, 3);
/// Row/column of the `b -> a` counted entry.
pub const ABSORPTION_ENTRY: (usize, usize) = (3, 2);

/// Left null vector of the trace-fixed generator: the population trace.
pub const TRACE: [f64; 5] = [1.0, 1.0, 1.0, 1.0, 0.0];

/// Physical constants of the engine and its three baths (hbar = k_B = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub e1: f64,
    pub e_a: f64,
    pub e_b: f64,
    pub g: f64,
    pub r: f64,
    pub tau: f64,
    pub t_c: f64,
    pub t_h: f64,
    pub t_l: f64,
    pub p_c: f64,
    pub p_h: f64,
}

impl Default for EngineParams {
    fn default() -> Self {
        Self {
            e1: 0.5,
            e_a: 3.0,
            e_b: 2.0,
            g: 1.0,
            r: 0.1,
            tau: 0.1,
            t_c: 1.0,
            t_h: 3.5,
            t_l: 2.0,
            p_c: 0.0,
            p_h: 0.0,
        }
    }
}

impl EngineParams {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.e1, self.e_a, self.e_b, self.g, self.r, self.tau, self.t_c, self.t_h, self.t_l,
            self.p_c, self.p_h,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("engine parameters must be finite"));
        }
        if !(self.e_a > self.e_b && self.e_b > self.e1) {
            return Err(Error::domain(format!(
                "level ordering e_a > e_b > e1 violated: e_a={}, e_b={}, e1={}",
                self.e_a, self.e_b, self.e1
            )));
        }
        for (name, v) in [
            ("t_c", self.t_c),
            ("t_h", self.t_h),
            ("t_l", self.t_l),
            ("g", self.g),
            ("r", self.r),
        ] {
            if v <= 0.0 {
                return Err(Error::domain(format!("{name} must be positive, got {v}")));
            }
        }
        if self.tau < 0.0 {
            return Err(Error::domain(format!("tau must be non-negative, got {}", self.tau)));
        }
        check_unit("p_c", self.p_c)?;
        check_unit("p_h", self.p_h)?;
        Ok(())
    }

    /// Same engine with both coherence strengths switched off.
    pub fn classical(&self) -> Self {
        Self {
            p_c: 0.0,
            p_h: 0.0,
            ..*self
        }
    }

    /// Gap of the hot transition `|1>,|2> <-> |a>`.
    pub fn hot_gap(&self) -> f64 {
        self.e_a - self.e1
    }

    /// Gap of the cold transition `|1>,|2> <-> |b>`.
    pub fn cold_gap(&self) -> f64 {
        self.e_b - self.e1
    }

    /// Gap of the cavity transition `|a> <-> |b>`.
    pub fn cavity_gap(&self) -> f64 {
        self.e_a - self.e_b
    }

    /// Returns a copy whose cavity temperature cancels the net cavity flux at
    /// `p_c = p_h = 0`.
    ///
    /// The classical jump process has zero net current when the cycle
    /// `1 -> a -> b -> 1` and its reverse have equal rate products, i.e. when
    /// `n_h (1+n_h) n_l = n_c (1+n_c) (1+n_l)`. That fixes `exp(-cavity_gap/t_l)`,
    /// which is solvable for `t_l > 0` only if the cold transition is "colder"
    /// than the hot one (`cold_gap/t_c > hot_gap/t_h`).
    pub fn with_zero_bias_cavity(&self) -> Result<Self> {
        let p = self.classical();
        p.validate()?;
        let n_h = bose_occupation(p.hot_gap(), p.t_h)?;
        let n_c = bose_occupation(p.cold_gap(), p.t_c)?;
        let ratio = n_c * (1.0 + n_c) / (n_h * (1.0 + n_h));
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::domain(
                "no positive cavity temperature balances this bath configuration",
            ));
        }
        Ok(Self {
            t_l: -p.cavity_gap() / ratio.ln(),
            ..p
        })
    }
}

fn check_unit(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {p}")))
    }
}

/// Mean Bose-Einstein occupation `1/(exp(gap/T) - 1)`.
///
/// Returns exactly 0 once `gap/T` overflows the exponential (frozen bath).
pub fn bose_occupation(gap: f64, temperature: f64) -> Result<f64> {
    if !(gap > 0.0) || !(temperature > 0.0) {
        return Err(Error::domain(format!(
            "bose occupation needs positive gap and temperature, got gap={gap}, T={temperature}"
        )));
    }
    let n = 1.0 / (gap / temperature).exp_m1();
    if n.is_finite() {
        Ok(n)
    } else {
        Err(Error::domain("bose occupation overflow"))
    }
}

/// Mixed coupling `Gamma_12x = r * p_x` for symmetric dipoles.
pub fn coherence_coupling(r: f64, p: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("rate must be positive, got {r}")));
    }
    check_unit("coherence strength", p)?;
    Ok(r * p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occupations {
    pub n_h: f64,
    pub n_c: f64,
    pub n_l: f64,
    pub nt_h: f64,
    pub nt_c: f64,
    pub nt_l: f64,
}

impl Occupations {
    pub fn new(params: &EngineParams) -> Result<Self> {
        let n_h = bose_occupation(params.hot_gap(), params.t_h)?;
        let n_c = bose_occupation(params.cold_gap(), params.t_c)?;
        let n_l = bose_occupation(params.cavity_gap(), params.t_l)?;
        for (name, n) in [("n_h", n_h), ("n_c", n_c), ("n_l", n_l)] {
            if !(n > 0.0) {
                return Err(Error::domain(format!("{name} underflowed to zero")));
            }
        }
        Ok(Self {
            n_h,
            n_c,
            n_l,
            nt_h: 1.0 + n_h,
            nt_c: 1.0 + n_c,
            nt_l: 1.0 + n_l,
        })
    }
}

/// Which reading of the printed generator to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorForm {
    /// Entry (2,4) doubled so that the population trace is conserved.
    #[default]
    TraceFixed,
    /// The matrix exactly as printed; not trace preserving when `p_c > 0`.
    Verbatim,
}

/// `L(lambda)` in its Taylor form around `lambda = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistedGenerator {
    pub l0: Mat5,
    /// `l_deriv[k-1]` is the k-th lambda derivative at zero, k = 1..=4.
    pub l_deriv: [Mat5; 4],
    pub params: EngineParams,
    pub occupations: Occupations,
    pub form: GeneratorForm,
    emission: f64,
    absorption: f64,
}

impl TwistedGenerator {
    /// `L(lambda)` for arbitrary real lambda.
    pub fn eval(&self, lambda: f64) -> Mat5 {
        let mut m = self.l0;
        m[EMISSION_ENTRY] = self.emission * (-lambda).exp();
        m[ABSORPTION_ENTRY] = self.absorption * lambda.exp();
        m
    }

    /// Rate of the counted `a -> b` transition (weight -1).
    pub fn emission_rate(&self) -> f64 {
        self.emission
    }

    /// Rate of the counted `b -> a` transition (weight +1).
    pub fn absorption_rate(&self) -> f64 {
        self.absorption
    }

    /// `u^T L(0)` for the population trace `u`.
    pub fn trace_residual(&self) -> [f64; 5] {
        let mut out = [0.0; 5];
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..5).map(|i| TRACE[i] * self.l0[(i, j)]).sum();
        }
        out
    }
}

pub fn build_generator(params: &EngineParams) -> Result<TwistedGenerator> {
    build_generator_with(params, GeneratorForm::TraceFixed)
}

pub fn build_generator_with(params: &EngineParams, form: GeneratorForm) -> Result<TwistedGenerator> {
    params.validate()?;
    let occ = Occupations::new(params)?;
    let r = params.r;
    let g2 = params.g * params.g;
    // symmetric coupling: Gamma_1x = Gamma_2x = r, Gamma_x = 2r
    let (g1h, g2h, g1c, g2c) = (r, r, r, r);
    let gamma_h = g1h + g2h;
    let gamma_c = g1c + g2c;
    let g12c = coherence_coupling(r, params.p_c)?;
    let g12h = coherence_coupling(r, params.p_h)?;
    let g12 = (g12c * occ.n_c + g12h * occ.n_h) / 2.0;
    let gbar = -occ.n_h * (g1h + g2h) / 2.0 - occ.n_c * (g1c + g2c) / 2.0;
    let emission = g2 * occ.n_l;
    let absorption = g2 * occ.nt_l;
    let e24 = match form {
        GeneratorForm::TraceFixed => 2.0 * g12c * occ.n_c,
        GeneratorForm::Verbatim => g12c * occ.n_c,
    };

    #[rustfmt::skip]
    let l0 = Mat5::from_row_slice(&[
        -(g1h * occ.n_h + g1c * occ.n_c), 0.0, g1h * occ.nt_h, g1c * occ.nt_c, -2.0 * g12,
        0.0, -(g2h * occ.n_h + g2c * occ.n_c), g2h * occ.nt_h, g2c * occ.nt_c, -2.0 * g12,
        g1c * occ.n_c, g2c * occ.n_c, -gamma_h * occ.nt_h - g2 * occ.nt_l, emission, e24,
        g1h * occ.n_h, g2h * occ.n_h, absorption, -g2 * occ.n_l - gamma_c * occ.nt_c, 2.0 * g12h * occ.n_h,
        -g12, -g12, g12h * occ.nt_h, 2.0 * g12c * occ.nt_c, gbar - params.tau,
    ]);

    let l_deriv = std::array::from_fn(|i| {
        let k = i + 1;
        let mut d = Mat5::zeros();
        d[EMISSION_ENTRY] = if k % 2 == 0 { emission } else { -emission };
        d[ABSORPTION_ENTRY] = absorption;
        d
    });

    Ok(TwistedGenerator {
        l0,
        l_deriv,
        params: *params,
        occupations: occ,
        form,
        emission,
        absorption,
    })
}
