//! Full counting statistics of cavity photon exchange.
//!
//! The scaled cumulant generating function `S(lambda)` is the eigenvalue branch
//! of `L(lambda)` that passes through zero at `lambda = 0`. Its Taylor
//! coefficients are obtained by Rayleigh-Schrodinger perturbation theory around
//! the steady state: with right null vector `rho` and left null vector
//! `u = (1,1,1,1,0)` normalised to `u.rho = 1`,
//!
//! ```text
//! s_n     = sum_{k=1..n} C(n,k) u . L_k rho_{n-k}
//! L0 rho_n = sum_{k=1..n} C(n,k) (s_k - L_k) rho_{n-k},   u . rho_n = 0
//! ```
//!
//! and `j[n] = s_n`. The singular systems are solved through the bordered
//! matrix `[[L0, rho], [u, 0]]`, which is regular whenever the null space is
//! one-dimensional.

use nalgebra::{Complex, SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::engine::{build_generator, EngineParams, Mat5, TwistedGenerator, Vec5, TRACE};
use crate::error::{Error, Result};

type Mat6 = SMatrix<f64, 6, 6>;
type Vec6 = SVector<f64, 6>;

/// Largest condition number accepted for a bordered solve.
pub const MAX_CONDITION: f64 = 1e12;
/// Smallest admissible separation between the CGF branch and the rest of the spectrum.
pub const MIN_BRANCH_GAP: f64 = 1e-8;
/// Baseline cumulants below this magnitude make the ratio undefined.
pub const DEGENERATE_BASELINE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// `{rho_11, rho_22, rho_bb, rho_aa, Re(rho_12)}`
    pub rho: [f64; 5],
}

impl SteadyState {
    pub fn populations(&self) -> [f64; 4] {
        [self.rho[0], self.rho[1], self.rho[2], self.rho[3]]
    }

    pub fn coherence(&self) -> f64 {
        self.rho[4]
    }

    /// `max_i |(L0 rho)_i|`
    pub fn residual(&self, gen: &TwistedGenerator) -> f64 {
        (gen.l0 * Vec5::from(self.rho)).amax()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    /// Mean, variance, third and fourth cumulant rates of the net photon count.
    pub j: [f64; 4],
    /// The same at `p_c = p_h = 0`.
    pub j0: [f64; 4],
    /// `j[i] / j0[i]`
    pub c: [f64; 4],
}

fn trace_row() -> SVector<f64, 5> {
    SVector::<f64, 5>::from(TRACE)
}

fn bordered(l0: &Mat5, column: &Vec5) -> Mat6 {
    let mut m = Mat6::zeros();
    m.fixed_view_mut::<5, 5>(0, 0).copy_from(l0);
    m.fixed_view_mut::<5, 1>(0, 5).copy_from(column);
    m.fixed_view_mut::<1, 5>(5, 0).copy_from(&trace_row().transpose());
    m
}

fn condition_number(m: &Mat6) -> f64 {
    let sv = m.singular_values();
    let max = sv.max();
    let min = sv.min();
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Null vector of `L(0)` normalised so the populations sum to one.
pub fn steady_state(gen: &TwistedGenerator) -> Result<SteadyState> {
    // Any border column w with u.w != 0 works, since range(L0) is orthogonal to u.
    let m = bordered(&gen.l0, &trace_row());
    let cond = condition_number(&m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Singular(format!(
            "bordered steady-state system has condition number {cond:.3e}"
        )));
    }
    let mut rhs = Vec6::zeros();
    rhs[5] = 1.0;
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Singular("bordered steady-state system is singular".into()))?;
    let rho: [f64; 5] = std::array::from_fn(|i| x[i]);
    Ok(SteadyState { rho })
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// First four cumulant rates `j[k] = d^k S / d lambda^k` at zero.
pub fn cumulants(gen: &TwistedGenerator) -> Result<[f64; 4]> {
    let ss = steady_state(gen)?;
    let rho0 = Vec5::from(ss.rho);
    let m = bordered(&gen.l0, &rho0);
    let cond = condition_number(&m);
    if !(cond <= MAX_CONDITION) {
        return Err(Error::Conditioning { cond });
    }
    let lu = m.lu();
    let u = trace_row();

    let mut rhos: Vec<Vec5> = vec![rho0];
    let mut s = [0.0f64; 5]; // s[0] = 0
    for n in 1..=4 {
        let mut sn = 0.0;
        for k in 1..=n {
            sn += binomial(n, k) * u.dot(&(gen.l_deriv[k - 1] * rhos[n - k]));
        }
        s[n] = sn;
        if n == 4 {
            break;
        }
        let mut b = Vec5::zeros();
        for k in 1..=n {
            b += binomial(n, k) * (s[k] * rhos[n - k] - gen.l_deriv[k - 1] * rhos[n - k]);
        }
        let mut rhs = Vec6::zeros();
        rhs.fixed_rows_mut::<5>(0).copy_from(&b);
        let x = lu.solve(&rhs).ok_or(Error::Conditioning { cond })?;
        rhos.push(x.fixed_rows::<5>(0).into_owned());
    }
    Ok([s[1], s[2], s[3], s[4]])
}

/// Closed form of the first cumulant, `u . L'(0) rho`.
pub fn mean_current(gen: &TwistedGenerator) -> Result<f64> {
    let ss = steady_state(gen)?;
    Ok(trace_row().dot(&(gen.l_deriv[0] * Vec5::from(ss.rho))))
}

/// Eigenvalues of `L(lambda)` sorted by descending real part.
pub fn spectrum(m: &Mat5) -> Vec<Complex<f64>> {
    let mut ev: Vec<Complex<f64>> = m.complex_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.re.total_cmp(&a.re));
    ev
}

/// `S(lambda)`: the eigenvalue of `L(lambda)` with the largest real part.
///
/// Fails if the runner-up is within [`MIN_BRANCH_GAP`] (the caller must shrink lambda).
pub fn cgf(gen: &TwistedGenerator, lambda: f64) -> Result<f64> {
    let ev = spectrum(&gen.eval(lambda));
    let gap = ev[0].re - ev[1].re;
    if !(gap > MIN_BRANCH_GAP) {
        return Err(Error::BranchAmbiguity { lambda, gap });
    }
    Ok(ev[0].re)
}

/// Photon-exchange cumulants with and without coherence, and their ratios.
pub fn cumulant_ratios(params: &EngineParams) -> Result<CumulantSet> {
    let j = cumulants(&build_generator(params)?)?;
    let j0 = cumulants(&build_generator(&params.classical())?)?;
    if let Some((index, &value)) = j0
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.abs() >= DEGENERATE_BASELINE))
    {
        return Err(Error::DegenerateSample { index, value });
    }
    let c = std::array::from_fn(|i| j[i] / j0[i]);
    Ok(CumulantSet { j, j0, c })
}

/// `max |S(lambda) - S(-lambda - shift)|` over the given lambdas.
///
/// A fluctuation-theorem symmetry would make this vanish for some shift; nothing
/// here asserts that it does.
pub fn symmetry_defect(gen: &TwistedGenerator, shift: f64, lambdas: &[f64]) -> Result<f64> {
    let mut worst = 0.0f64;
    for &l in lambdas {
        let d = (cgf(gen, l)? - cgf(gen, -l - shift)?).abs();
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Scans candidate shifts and returns `(shift, defect)` pairs.
pub fn symmetry_scan(
    gen: &TwistedGenerator,
    shifts: &[f64],
    lambdas: &[f64],
) -> Result<Vec<(f64, f64)>> {
    shifts
        .iter()
        .map(|&a| symmetry_defect(gen, a, lambdas).map(|d| (a, d)))
        .collect()
}
