//! Gillespie simulation of the classical (coherence-free) engine.
//!
//! At `p_c = p_h = 0` the population block of `L(0)` is an ordinary Markov
//! generator, so the photon counting statistics can be sampled directly and
//! compared against the cumulants of [`crate::counting`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::counting::steady_state;
use crate::engine::{build_generator, EngineParams, ABSORPTION_ENTRY, EMISSION_ENTRY};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Four-state jump process `{1, 2, b, a}` with net counting on the cavity edges.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpProcess {
    /// `rates[from][to]`, zero on the diagonal.
    pub rates: [[f64; 4]; 4],
    /// `(from, to, weight)` for each counted transition.
    pub counted_edges: [(usize, usize, i64); 2],
    /// Stationary distribution, used to draw initial states.
    pub stationary: [f64; 4],
}

impl JumpProcess {
    pub fn from_params(params: &EngineParams) -> Result<Self> {
        if params.p_c != 0.0 || params.p_h != 0.0 {
            return Err(Error::domain(
                "the jump-process oracle is only defined at p_c = p_h = 0",
            ));
        }
        let gen = build_generator(params)?;
        let mut rates = [[0.0; 4]; 4];
        for (from, row) in rates.iter_mut().enumerate() {
            for (to, r) in row.iter_mut().enumerate() {
                if from != to {
                    *r = gen.l0[(to, from)];
                }
            }
        }
        let ss = steady_state(&gen)?;
        let mut stationary = ss.populations();
        for p in &mut stationary {
            *p = p.max(0.0);
        }
        // b -> a carries exp(+lambda), a -> b carries exp(-lambda)
        let (a, b) = (ABSORPTION_ENTRY.0, EMISSION_ENTRY.0);
        let proc = Self {
            rates,
            counted_edges: [(b, a, 1), (a, b, -1)],
            stationary,
        };
        proc.check()?;
        Ok(proc)
    }

    fn check(&self) -> Result<()> {
        for (i, row) in self.rates.iter().enumerate() {
            if row.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
                return Err(Error::domain(format!("negative or non-finite rate out of state {i}")));
            }
        }
        Ok(())
    }

    pub fn escape_rate(&self, state: usize) -> f64 {
        self.rates[state].iter().sum()
    }

    fn weight(&self, from: usize, to: usize) -> i64 {
        self.counted_edges
            .iter()
            .find(|(f, t, _)| *f == from && *t == to)
            .map_or(0, |e| e.2)
    }

    /// Largest inverse escape rate, a crude relaxation time scale.
    pub fn slowest_time(&self) -> f64 {
        (0..4)
            .map(|s| 1.0 / self.escape_rate(s))
            .fold(0.0, f64::max)
    }

    /// States reachable from the support of the stationary distribution.
    fn reachable(&self) -> [bool; 4] {
        let mut seen = [false; 4];
        let mut stack: Vec<usize> = (0..4).filter(|&s| self.stationary[s] > 0.0).collect();
        while let Some(s) = stack.pop() {
            if seen[s] {
                continue;
            }
            seen[s] = true;
            for (t, &r) in self.rates[s].iter().enumerate() {
                if r > 0.0 && !seen[t] {
                    stack.push(t);
                }
            }
        }
        seen
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryStats {
    pub t_final: f64,
    pub n_traj: usize,
    pub mean_rate: f64,
    pub mean_rate_se: f64,
    pub var_rate: f64,
    pub var_rate_se: f64,
    pub seed: u64,
}

fn run_one(proc: &JumpProcess, t_final: f64, rng: &mut ChaCha8Rng) -> i64 {
    let mut u: f64 = rng.random();
    let mut state = 3;
    for (s, &p) in proc.stationary.iter().enumerate() {
        if u < p {
            state = s;
            break;
        }
        u -= p;
    }
    let escape: [f64; 4] = std::array::from_fn(|s| proc.escape_rate(s));
    let mut t = 0.0;
    let mut count = 0i64;
    loop {
        let total = escape[state];
        let dt = -(1.0 - rng.random::<f64>()).ln() / total;
        t += dt;
        if t > t_final {
            return count;
        }
        let mut pick = rng.random::<f64>() * total;
        let mut next = state;
        for (to, &r) in proc.rates[state].iter().enumerate() {
            if r > 0.0 {
                next = to;
                if pick < r {
                    break;
                }
                pick -= r;
            }
        }
        count += proc.weight(state, next);
        state = next;
    }
}

/// Net counted jumps of `n_traj` independent trajectories.
///
/// Trajectory `i` uses ChaCha stream `i` of `seed`, so the result does not
/// depend on the execution strategy.
pub fn simulate_counts(
    proc: &JumpProcess,
    t_final: f64,
    n_traj: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<i64>> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(Error::domain(format!("t_final must be positive, got {t_final}")));
    }
    if n_traj < 2 {
        return Err(Error::domain("at least two trajectories are required"));
    }
    let reach = proc.reachable();
    if let Some(s) = (0..4).find(|&s| reach[s] && !(proc.escape_rate(s) > 0.0)) {
        return Err(Error::AbsorbingState(s));
    }
    Ok(exec.map(n_traj, |i| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        run_one(proc, t_final, &mut rng)
    }))
}

pub fn simulate(proc: &JumpProcess, t_final: f64, n_traj: usize, seed: u64) -> Result<TrajectoryStats> {
    simulate_with(proc, t_final, n_traj, seed, Exec::default())
}

pub fn simulate_with(
    proc: &JumpProcess,
    t_final: f64,
    n_traj: usize,
    seed: u64,
    exec: Exec,
) -> Result<TrajectoryStats> {
    let counts = simulate_counts(proc, t_final, n_traj, seed, exec)?;
    let x: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let (mean, mean_se) = jackknife(&x, mean_of);
    let (var, var_se) = jackknife(&x, sample_variance);
    Ok(TrajectoryStats {
        t_final,
        n_traj,
        mean_rate: mean / t_final,
        mean_rate_se: mean_se / t_final,
        var_rate: var / t_final,
        var_rate_se: var_se / t_final,
        seed,
    })
}

fn mean_of(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = mean_of(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

/// Full-sample estimate and leave-one-out jackknife standard error.
pub fn jackknife(x: &[f64], stat: impl Fn(&[f64]) -> f64) -> (f64, f64) {
    let n = x.len();
    let full = stat(x);
    let mut buf = Vec::with_capacity(n - 1);
    let loo: Vec<f64> = (0..n)
        .map(|i| {
            buf.clear();
            buf.extend(x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| *v));
            stat(&buf)
        })
        .collect();
    let m = mean_of(&loo);
    let var = loo.iter().map(|v| (v - m) * (v - m)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (full, var.sqrt())
}
