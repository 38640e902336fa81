//! Sticky-particle coalescence on ℝ^d.

use bconf::{AmbientSpace, ConfigError, Configuration};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy)]
pub struct SimParams {
    pub n: usize,
    pub dim: usize,
    pub steps: usize,
    pub dt: f64,
    /// Rate of the linear pull towards the origin.
    pub pull: f64,
    pub jitter: f64,
    pub radius: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct SimRun {
    pub frames: Vec<(f64, Configuration)>,
    /// Largest particle speed seen during the run.
    pub max_speed: f64,
}

struct Particle {
    x: Vec<f64>,
    v: Vec<f64>,
    mass: f64,
}

/// Two particles at `±(1 − t)` meeting at the origin, sampled at `t = 0, ½, 1`.
pub fn two_particle_merge() -> Result<SimRun, ConfigError> {
    let space = AmbientSpace::euclidean(1);
    let frames = [0.0, 0.5, 1.0]
        .into_iter()
        .map(|t: f64| {
            let a = 1.0 - t;
            let rows: Vec<[f64; 1]> = if a == 0.0 {
                vec![[0.0]]
            } else {
                vec![[-a], [a]]
            };
            Ok((t, Configuration::from_rows(&space, rows)?))
        })
        .collect::<Result<_, ConfigError>>()?;
    Ok(SimRun {
        frames,
        max_speed: 1.0,
    })
}

/// Particles start uniformly in `[-1, 1]^d` with velocity `-pull·x` plus
/// uniform jitter; any two closer than `radius` after a step fuse into one
/// particle at their centre of mass, keeping total momentum.
pub fn simulate(space: &AmbientSpace, p: &SimParams) -> Result<SimRun, ConfigError> {
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut parts: Vec<Particle> = (0..p.n)
        .map(|_| {
            let x: Vec<f64> = (0..p.dim).map(|_| rng.gen_range(-1.0..=1.0)).collect();
            let v = x
                .iter()
                .map(|xi| -p.pull * xi + p.jitter * rng.gen_range(-1.0..=1.0))
                .collect();
            Particle { x, v, mass: 1.0 }
        })
        .collect();
    let speed = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>().sqrt();
    let mut max_speed = parts.iter().map(|q| speed(&q.v)).fold(0.0, f64::max);
    coalesce(space, &mut parts, p.radius);
    let mut frames = vec![(0.0, snapshot(space, &parts)?)];
    for k in 1..=p.steps {
        for q in &mut parts {
            for (x, v) in q.x.iter_mut().zip(&q.v) {
                *x += v * p.dt;
            }
        }
        coalesce(space, &mut parts, p.radius);
        max_speed = parts.iter().map(|q| speed(&q.v)).fold(max_speed, f64::max);
        frames.push((k as f64 * p.dt, snapshot(space, &parts)?));
    }
    Ok(SimRun { frames, max_speed })
}

fn snapshot(space: &AmbientSpace, parts: &[Particle]) -> Result<Configuration, ConfigError> {
    Configuration::from_rows(space, parts.iter().map(|q| q.x.as_slice()))
}

fn coalesce(space: &AmbientSpace, parts: &mut Vec<Particle>, radius: f64) {
    loop {
        let mut pair = None;
        'scan: for i in 0..parts.len() {
            for j in i + 1..parts.len() {
                if space.distance(&parts[i].x, &parts[j].x) <= radius {
                    pair = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((i, j)) = pair else { return };
        let b = parts.swap_remove(j);
        let a = &mut parts[i];
        let m = a.mass + b.mass;
        for k in 0..a.x.len() {
            a.x[k] = (a.mass * a.x[k] + b.mass * b.x[k]) / m;
            a.v[k] = (a.mass * a.v[k] + b.mass * b.v[k]) / m;
        }
        a.mass = m;
    }
}
