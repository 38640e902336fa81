//! The logistic map `φ_A(x) = A x (1 − x)`: attracting periodic orbits and
//! the period-doubling cascade.

use thiserror::Error;

/// Largest period searched for.
pub const MAX_PERIOD_LIMIT: usize = 64;
pub const DEFAULT_ORBIT_TOL: f64 = 1e-10;
pub const DEFAULT_BURN_IN: usize = 10_000;
/// Iteration budget after the burn-in before giving up on a lock.
pub const DEFAULT_MAX_ITERATIONS: usize = 1_000_000;
/// Deepest cascade level [`bifurcation_points`] will locate.
pub const MAX_CASCADE_DEPTH: usize = 6;

/// Slack on `|multiplier| ≤ 1` when accepting a neutral orbit.
const NEUTRAL_SLACK: f64 = 1e-9;
/// Distance from the final iterate within which a polished orbit counts as
/// the one being approached.
const CAPTURE_RADIUS: f64 = 1e-2;
/// Search radius when following an orbit between nearby parameters.
const TRACKING_RADIUS: f64 = 0.1;
const BISECTION_WIDTH: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LogisticError {
    #[error("parameter A = {0} is outside (0, 4]")]
    ParameterOutOfRange(f64),
    #[error("max_period {0} must be a power of two no larger than {MAX_PERIOD_LIMIT}")]
    InvalidMaxPeriod(usize),
    #[error("cascade depth {0} is outside 1..={MAX_CASCADE_DEPTH}")]
    InvalidCascadeDepth(usize),
    #[error("orbit tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("lost track of the period-{period} orbit near A = {parameter}")]
    TrackingFailed { period: usize, parameter: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticMap {
    pub a: f64,
}

impl LogisticMap {
    pub fn new(a: f64) -> Result<Self, LogisticError> {
        if !(a > 0.0 && a <= 4.0) {
            return Err(LogisticError::ParameterOutOfRange(a));
        }
        Ok(LogisticMap { a })
    }

    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        self.a * x * (1.0 - x)
    }

    #[inline]
    pub fn derivative(&self, x: f64) -> f64 {
        self.a * (1.0 - 2.0 * x)
    }

    pub fn iterate(&self, x: f64, n: usize) -> f64 {
        (0..n).fold(x, |x, _| self.apply(x))
    }

    /// `(φ^p(x), (φ^p)'(x))`, the derivative by the chain rule.
    pub fn composite(&self, x: f64, p: usize) -> (f64, f64) {
        let mut y = x;
        let mut d = 1.0;
        for _ in 0..p {
            d *= self.derivative(y);
            y = self.apply(y);
        }
        (y, d)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicOrbit {
    pub parameter: f64,
    pub period: usize,
    /// Orbit in dynamical order, `points[i + 1] = φ(points[i])`, starting
    /// from its smallest point.
    pub points: Vec<f64>,
    /// `Π φ'_A(x_i)` around the orbit.
    pub multiplier: f64,
}

impl PeriodicOrbit {
    pub fn is_stable(&self) -> bool {
        self.multiplier.abs() < 1.0
    }

    pub fn sorted_points(&self) -> Vec<f64> {
        let mut pts = self.points.clone();
        pts.sort_by(f64::total_cmp);
        pts
    }

    /// Largest `|φ^p(x_i) − x_i|` over the orbit.
    pub fn closure_error(&self) -> f64 {
        let map = LogisticMap { a: self.parameter };
        self.points
            .iter()
            .map(|&x| (map.iterate(x, self.period) - x).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|φ(x_i) − x_{i+1 mod p}|`.
    pub fn shift_error(&self) -> f64 {
        let map = LogisticMap { a: self.parameter };
        let p = self.points.len();
        (0..p)
            .map(|i| (map.apply(self.points[i]) - self.points[(i + 1) % p]).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attractor {
    Periodic(PeriodicOrbit),
    /// No periodic attractor with period ≤ `max_period` was found.
    Chaotic {
        parameter: f64,
    },
}

impl Attractor {
    pub fn period(&self) -> Option<usize> {
        match self {
            Attractor::Periodic(o) => Some(o.period),
            Attractor::Chaotic { .. } => None,
        }
    }

    pub fn orbit(&self) -> Option<&PeriodicOrbit> {
        match self {
            Attractor::Periodic(o) => Some(o),
            Attractor::Chaotic { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttractorOptions {
    pub max_period: usize,
    pub orbit_tol: f64,
    pub burn_in: usize,
    pub max_iterations: usize,
}

impl Default for AttractorOptions {
    fn default() -> Self {
        AttractorOptions {
            max_period: MAX_PERIOD_LIMIT,
            orbit_tol: DEFAULT_ORBIT_TOL,
            burn_in: DEFAULT_BURN_IN,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

impl AttractorOptions {
    fn check(&self) -> Result<(), LogisticError> {
        let p = self.max_period;
        if p == 0 || !p.is_power_of_two() || p > MAX_PERIOD_LIMIT {
            return Err(LogisticError::InvalidMaxPeriod(p));
        }
        if !(self.orbit_tol > 0.0 && self.orbit_tol.is_finite()) {
            return Err(LogisticError::InvalidTolerance(self.orbit_tol));
        }
        Ok(())
    }
}

fn periods(max_period: usize) -> impl Iterator<Item = usize> {
    std::iter::successors(Some(1usize), |p| Some(p * 2)).take_while(move |&p| p <= max_period)
}

/// Smallest period `p` whose lag-`p` differences stay within `tol` across
/// a window of `2 * max_period` iterates starting at `x`.
fn detect_lock(map: &LogisticMap, x: f64, max_period: usize, tol: f64) -> Option<usize> {
    let len = 2 * max_period + 1;
    let mut xs = Vec::with_capacity(len);
    let mut y = x;
    for _ in 0..len {
        xs.push(y);
        y = map.apply(y);
    }
    periods(max_period).find(|&p| (0..max_period).all(|n| (xs[n + p] - xs[n]).abs() <= tol))
}

/// Refines a root of `φ^p(x) − x` within `radius` of `x0`: Newton steps,
/// falling back to bisection on a bracket around `x0` when Newton misbehaves.
pub fn polish_orbit_point(map: &LogisticMap, p: usize, x0: f64, radius: f64) -> Option<f64> {
    let g = |x: f64| map.composite(x, p).0 - x;
    let mut x = x0;
    for _ in 0..100 {
        let (y, d) = map.composite(x, p);
        let gx = y - x;
        if gx == 0.0 {
            return Some(x);
        }
        let step = gx / (d - 1.0);
        if !step.is_finite() || step.abs() > radius || (x - step - x0).abs() > radius {
            break;
        }
        x -= step;
        if step.abs() <= 1e-15 * x.abs().max(1.0) {
            return (g(x).abs() <= 1e-12).then_some(x);
        }
    }
    if g(x).abs() <= 1e-12 && (x - x0).abs() <= radius {
        return Some(x);
    }
    // bisection fallback
    let mut width = 1e-9_f64.min(radius);
    while width <= radius {
        let (mut lo, mut hi) = (x0 - width, x0 + width);
        let (glo, ghi) = (g(lo), g(hi));
        if glo == 0.0 {
            return Some(lo);
        }
        if ghi == 0.0 {
            return Some(hi);
        }
        if glo.signum() != ghi.signum() {
            let sign_lo = glo.signum();
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid).signum() == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return Some(0.5 * (lo + hi));
        }
        width *= 4.0;
    }
    None
}

/// Builds the orbit through `x` with period `p`, reduced to its primitive
/// period.
fn make_orbit(map: &LogisticMap, x: f64, p: usize, tol: f64) -> PeriodicOrbit {
    let mut period = p;
    for q in periods(p).filter(|&q| q < p) {
        if (map.iterate(x, q) - x).abs() <= tol {
            period = q;
            break;
        }
    }
    let mut points = Vec::with_capacity(period);
    let mut y = x;
    let mut multiplier = 1.0;
    for _ in 0..period {
        points.push(y);
        multiplier *= map.derivative(y);
        y = map.apply(y);
    }
    let start = points
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    points.rotate_left(start);
    PeriodicOrbit {
        parameter: map.a,
        period,
        points,
        multiplier,
    }
}

/// Attractor of `φ_A` reached from the critical point `x₀ = 1/2`.
pub fn logistic_attractor(a: f64, opts: AttractorOptions) -> Result<Attractor, LogisticError> {
    let map = LogisticMap::new(a)?;
    opts.check()?;
    let mut x = map.iterate(0.5, opts.burn_in);
    let mut spent = 0usize;
    let chunk = opts.burn_in.max(1_000);
    loop {
        if let Some(p) = detect_lock(&map, x, opts.max_period, opts.orbit_tol) {
            let root = polish_orbit_point(&map, p, x, CAPTURE_RADIUS).unwrap_or(x);
            let orbit = make_orbit(&map, root, p, opts.orbit_tol);
            // the critical orbit can land exactly on a repelling cycle (A = 4)
            if orbit.multiplier.abs() > 1.0 + NEUTRAL_SLACK {
                return Ok(Attractor::Chaotic { parameter: a });
            }
            return Ok(Attractor::Periodic(orbit));
        }
        if spent >= opts.max_iterations {
            break;
        }
        x = map.iterate(x, chunk);
        spent += chunk;
    }
    // slow convergence: accept a neutral orbit close to the last iterate
    for p in periods(opts.max_period) {
        let Some(root) = polish_orbit_point(&map, p, x, CAPTURE_RADIUS) else {
            continue;
        };
        if (root - x).abs() > CAPTURE_RADIUS {
            continue;
        }
        let orbit = make_orbit(&map, root, p, opts.orbit_tol);
        if orbit.period == p && orbit.multiplier.abs() <= 1.0 + NEUTRAL_SLACK {
            return Ok(Attractor::Periodic(orbit));
        }
    }
    Ok(Attractor::Chaotic { parameter: a })
}

/// Multiplier of the period-`p` orbit through a polished point near `guess`.
fn tracked_multiplier(a: f64, p: usize, guess: f64) -> Option<(f64, f64)> {
    let map = LogisticMap { a };
    let x = polish_orbit_point(&map, p, guess, TRACKING_RADIUS)?;
    let (_, d) = map.composite(x, p);
    Some((x, d))
}

/// Parameters `A_1 < … < A_{k_max}` at which the period-`2^{k−1}` orbit's
/// multiplier crosses −1.
///
/// Each orbit is followed by Newton continuation from inside its stability
/// window, bracketed by a forward scan, then bisected on `multiplier + 1`.
pub fn bifurcation_points(k_max: usize) -> Result<Vec<f64>, LogisticError> {
    if k_max == 0 || k_max > MAX_CASCADE_DEPTH {
        return Err(LogisticError::InvalidCascadeDepth(k_max));
    }
    let mut found: Vec<f64> = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let p = 1usize << (k - 1);
        let (start, step) = if k == 1 {
            (2.0, 0.01)
        } else {
            let last = found[k - 2];
            let before = if k >= 3 { found[k - 3] } else { 1.0 };
            let gap = last - before;
            (last + 0.06 * gap, 0.02 * gap)
        };
        let lost = |parameter| LogisticError::TrackingFailed {
            period: p,
            parameter,
        };
        let orbit = match logistic_attractor(start, AttractorOptions::default())? {
            Attractor::Periodic(o) if o.period == p => o,
            _ => return Err(lost(start)),
        };
        let (mut lo, mut x_lo) = (start, orbit.points[0]);
        let mut hi;
        loop {
            hi = lo + step;
            if hi > 4.0 {
                return Err(lost(hi));
            }
            let (x_hi, m_hi) = tracked_multiplier(hi, p, x_lo).ok_or_else(|| lost(hi))?;
            if m_hi < -1.0 {
                break;
            }
            lo = hi;
            x_lo = x_hi;
        }
        while hi - lo > BISECTION_WIDTH {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let (x_mid, m_mid) = tracked_multiplier(mid, p, x_lo).ok_or_else(|| lost(mid))?;
            if m_mid < -1.0 {
                hi = mid;
            } else {
                lo = mid;
                x_lo = x_mid;
            }
        }
        found.push(0.5 * (lo + hi));
    }
    Ok(found)
}

/// Rows `(A, x)` of a bifurcation diagram over `steps + 1` evenly spaced
/// parameters. Chaotic parameters contribute the last `max_period` iterates.
pub fn bifurcation_diagram(
    a_min: f64,
    a_max: f64,
    steps: usize,
    opts: AttractorOptions,
) -> Result<Vec<(f64, f64)>, LogisticError> {
    LogisticMap::new(a_min)?;
    LogisticMap::new(a_max)?;
    let mut rows = Vec::new();
    for i in 0..=steps {
        let a = if steps == 0 {
            a_min
        } else {
            a_min + (a_max - a_min) * i as f64 / steps as f64
        };
        match logistic_attractor(a, opts)? {
            Attractor::Periodic(o) => rows.extend(o.sorted_points().into_iter().map(|x| (a, x))),
            Attractor::Chaotic { .. } => {
                let map = LogisticMap { a };
                let mut x = map.iterate(0.5, opts.burn_in);
                for _ in 0..opts.max_period {
                    rows.push((a, x));
                    x = map.apply(x);
                }
            }
        }
    }
    Ok(rows)
}
