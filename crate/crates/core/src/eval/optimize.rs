//! Multistart projected descent over products of balls and spheres.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Block {
    pub dim: usize,
    pub radius: f64,
    pub sphere: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    pub starts: usize,
    pub max_evals: usize,
    /// Local search stops once the step falls below this.
    pub min_step: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            starts: 32,
            max_evals: 40_000,
            min_step: 1e-9,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    /// True when the evaluation budget ran out before every start converged.
    pub exhausted: bool,
}

pub fn project(blocks: &[Block], x: &mut [f64]) {
    let mut off = 0;
    for b in blocks {
        let v = &mut x[off..off + b.dim];
        let n = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if b.sphere {
            if n < 1e-300 {
                v.iter_mut().for_each(|t| *t = 0.0);
                v[0] = b.radius;
            } else {
                v.iter_mut().for_each(|t| *t *= b.radius / n);
            }
        } else if n > b.radius {
            v.iter_mut().for_each(|t| *t *= b.radius / n);
        }
        off += b.dim;
    }
}

pub(crate) fn random_point(blocks: &[Block], rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut x = Vec::new();
    for b in blocks {
        let mut v: Vec<f64> = (0..b.dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = v.iter().map(|t| t * t).sum::<f64>().sqrt().max(1e-300);
        let r = if b.sphere {
            b.radius
        } else {
            b.radius * rng.random::<f64>().powf(1.0 / b.dim as f64)
        };
        v.iter_mut().for_each(|t| *t *= r / n);
        x.extend(v);
    }
    x
}

/// First start: the origin of every ball, `e_1` on every sphere.
fn canonical_point(blocks: &[Block]) -> Vec<f64> {
    let total: usize = blocks.iter().map(|b| b.dim).sum();
    let mut x = vec![0.0; total];
    project(blocks, &mut x);
    x
}

/// Minimizes `f` over the product of `blocks`.
pub fn minimize(blocks: &[Block], f: &mut dyn FnMut(&[f64]) -> f64, cfg: &OptimizerConfig) -> Minimum {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n: usize = blocks.iter().map(|b| b.dim).sum();
    let scale = blocks.iter().map(|b| b.radius).fold(0.0, f64::max).max(1e-12);
    let mut evals = 0usize;
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut exhausted = false;
    let per_start = (cfg.max_evals / cfg.starts.max(1)).max(4 * n + 8);
    for s in 0..cfg.starts.max(1) {
        let mut x = if s == 0 {
            canonical_point(blocks)
        } else {
            random_point(blocks, &mut rng)
        };
        project(blocks, &mut x);
        let budget = evals + per_start;
        let mut fx = f(&x);
        evals += 1;
        let mut h = 0.5 * scale;
        let delta = 1e-7 * scale;
        while h > cfg.min_step {
            if evals >= budget {
                exhausted = true;
                break;
            }
            let mut grad = vec![0.0; n];
            let mut y = x.clone();
            for i in 0..n {
                let xi = x[i];
                y[i] = xi + delta;
                let up = f(&y);
                y[i] = xi - delta;
                let down = f(&y);
                y[i] = xi;
                grad[i] = (up - down) / (2.0 * delta);
            }
            evals += 2 * n;
            let gnorm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            let mut moved = false;
            if gnorm > 1e-14 {
                let mut y: Vec<f64> = x.iter().zip(&grad).map(|(a, g)| a - h * g / gnorm).collect();
                project(blocks, &mut y);
                let fy = f(&y);
                evals += 1;
                if fy < fx - 1e-15 {
                    x = y;
                    fx = fy;
                    moved = true;
                    h *= 1.5;
                }
            }
            if !moved {
                'compass: for i in 0..n {
                    for sign in [1.0, -1.0] {
                        let mut y = x.clone();
                        y[i] += sign * h;
                        project(blocks, &mut y);
                        let fy = f(&y);
                        evals += 1;
                        if fy < fx - 1e-15 {
                            x = y;
                            fx = fy;
                            moved = true;
                            break 'compass;
                        }
                    }
                }
            }
            if !moved {
                h *= 0.5;
            }
        }
        if best.as_ref().is_none_or(|(_, b)| fx < *b) {
            best = Some((x, fx));
        }
    }
    let (x, value) = best.expect("at least one start");
    Minimum {
        x,
        value,
        evals,
        exhausted,
    }
}
