//! Finite-difference cumulants of the CGF branch, independent of the
//! perturbative recursion.
//!
//! `L(lambda)` differs from `L(0)` only in the two counted entries, so the
//! characteristic polynomial coefficients are bilinear in
//! `a = exp(-lambda) - 1` and `b = exp(lambda) - 1`. They are built once by
//! Faddeev-LeVerrier at the four corners `(a, b) in {0, 1}^2`, evaluated in
//! double-double arithmetic, and the leading root is Newton-polished from the
//! f64 eigenvalue. Central differences on dyadic steps `h, h/2, h/4` are then
//! Richardson-extrapolated twice.

use coherence_lab::engine::{TwistedGenerator, ABSORPTION_ENTRY, EMISSION_ENTRY};
use nalgebra::SMatrix;

use super::dd::DD;

type M5 = [[DD; 5]; 5];

/// Default base step, exactly representable so every stencil point is exact.
pub const BASE_STEP: f64 = 1.0 / 128.0;

fn char_poly(m: &M5) -> [DD; 6] {
    // det(xI - M) = sum_k c[k] x^k
    let mut c = [DD::ZERO; 6];
    c[5] = DD::ONE;
    let mut mk = [[DD::ZERO; 5]; 5];
    for k in 1..=5 {
        // mk <- M * mk + c[6-k] I
        let mut next = [[DD::ZERO; 5]; 5];
        for i in 0..5 {
            for j in 0..5 {
                let mut s = DD::ZERO;
                for l in 0..5 {
                    s = s + m[i][l] * mk[l][j];
                }
                next[i][j] = s;
            }
            next[i][i] = next[i][i] + c[6 - k];
        }
        mk = next;
        let mut tr = DD::ZERO;
        for i in 0..5 {
            for l in 0..5 {
                tr = tr + m[i][l] * mk[l][i];
            }
        }
        c[5 - k] = -(tr / DD::new(k as f64));
    }
    c
}

pub struct CgfOracle {
    /// Bilinear coefficient blocks: constant, a, b, ab.
    blocks: [[DD; 6]; 4],
    gen: TwistedGenerator,
}

impl CgfOracle {
    pub fn new(gen: &TwistedGenerator) -> Self {
        let base: M5 = std::array::from_fn(|i| std::array::from_fn(|j| DD::new(gen.l0[(i, j)])));
        let corner = |a: bool, b: bool| {
            let mut m = base;
            if a {
                let (i, j) = EMISSION_ENTRY;
                m[i][j] = m[i][j] + DD::new(gen.emission_rate());
            }
            if b {
                let (i, j) = ABSORPTION_ENTRY;
                m[i][j] = m[i][j] + DD::new(gen.absorption_rate());
            }
            char_poly(&m)
        };
        let mut c00 = corner(false, false);
        // L(0) is singular by construction; keep S(0) = 0 exact.
        c00[0] = DD::ZERO;
        let c10 = corner(true, false);
        let c01 = corner(false, true);
        let c11 = corner(true, true);
        let blocks = [
            c00,
            std::array::from_fn(|k| c10[k] - c00[k]),
            std::array::from_fn(|k| c01[k] - c00[k]),
            std::array::from_fn(|k| c11[k] - c10[k] - c01[k] + c00[k]),
        ];
        Self {
            blocks,
            gen: gen.clone(),
        }
    }

    fn coeffs(&self, lambda: f64) -> [DD; 6] {
        let a = DD::expm1_small(-lambda);
        let b = DD::expm1_small(lambda);
        let ab = a * b;
        std::array::from_fn(|k| {
            self.blocks[0][k] + a * self.blocks[1][k] + b * self.blocks[2][k] + ab * self.blocks[3][k]
        })
    }

    /// Leading eigenvalue of `L(lambda)` to roughly double-double accuracy.
    pub fn cgf(&self, lambda: f64) -> DD {
        let m: SMatrix<f64, 5, 5> = self.gen.eval(lambda);
        let ev = m.complex_eigenvalues();
        let mut re: Vec<f64> = ev.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| b.total_cmp(a));
        assert!(re[0] - re[1] > 1e-8, "leading branch not isolated at {lambda}");
        let c = self.coeffs(lambda);
        let mut x = DD::new(re[0]);
        for _ in 0..12 {
            let mut p = c[5];
            let mut dp = DD::ZERO;
            for k in (0..5).rev() {
                dp = dp * x + p;
                p = p * x + c[k];
            }
            let step = p / dp;
            x = x - step;
            if step.to_f64().abs() <= 1e-31 * x.to_f64().abs().max(1e-300) || step.hi == 0.0 {
                break;
            }
        }
        x
    }

    /// Central-difference estimates of the first four derivatives at zero with step `h`.
    fn stencil(&self, h: f64) -> [DD; 4] {
        let f = |m: f64| self.cgf(m * h);
        let (fm2, fm1, f0, f1, f2) = (f(-2.0), f(-1.0), f(0.0), f(1.0), f(2.0));
        let hh = DD::new(h);
        let two = DD::new(2.0);
        let d1 = (f1 - fm1) / (two * hh);
        let d2 = (f1 - two * f0 + fm1) / (hh * hh);
        let d3 = (f2 - two * f1 + two * fm1 - fm2) / (two * hh * hh * hh);
        let d4 = (f2 - DD::new(4.0) * f1 + DD::new(6.0) * f0 - DD::new(4.0) * fm1 + fm2)
            / (hh * hh * hh * hh);
        [d1, d2, d3, d4]
    }

    /// Richardson-extrapolated derivatives from steps `h, h/2, h/4`.
    pub fn cumulants_with_step(&self, h: f64) -> [f64; 4] {
        let d = [self.stencil(h), self.stencil(h / 2.0), self.stencil(h / 4.0)];
        std::array::from_fn(|n| {
            let r1a = (DD::new(4.0) * d[1][n] - d[0][n]) / DD::new(3.0);
            let r1b = (DD::new(4.0) * d[2][n] - d[1][n]) / DD::new(3.0);
            ((DD::new(16.0) * r1b - r1a) / DD::new(15.0)).to_f64()
        })
    }

    pub fn cumulants(&self) -> [f64; 4] {
        self.cumulants_with_step(BASE_STEP)
    }
}

pub fn fd_cumulants(gen: &TwistedGenerator) -> [f64; 4] {
    CgfOracle::new(gen).cumulants()
}
