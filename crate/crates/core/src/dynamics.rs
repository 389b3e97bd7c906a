//! Phase-space grid, the controlled noisy map and its bounded disturbance.
//!
//! The dynamics are `q_{n+1} = f(q_n) + xi_n + u_n` on a closed interval
//! `Q = [lower, upper]`, with `|xi_n| <= xi0`. Images are never clamped to
//! `Q`; leaving `Q` is how an uncontrolled orbit escapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Uniform discretization of `Q`, endpoints included.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    lower: T,
    upper: T,
    points: Vec<T>,
    spacing: T,
}

impl<T: Scalar> Grid<T> {
    pub fn new(lower: T, upper: T, count: usize) -> Result<Self> {
        if !lower.is_finite() || !upper.is_finite() {
            return Err(Error::InvalidConfig("grid bounds must be finite".into()));
        }
        if upper <= lower {
            return Err(Error::InvalidConfig(format!(
                "grid upper bound {upper} must exceed lower bound {lower}"
            )));
        }
        if count < 2 {
            return Err(Error::InvalidConfig(format!(
                "grid needs at least 2 points, got {count}"
            )));
        }
        let last = T::from_usize_lossy(count - 1);
        // Convex combination hits both endpoints exactly.
        let points: Vec<T> = (0..count)
            .map(|i| {
                let t = T::from_usize_lossy(i) / last;
                lower * (T::one() - t) + upper * t
            })
            .collect();
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig(format!(
                "grid of {count} points on [{lower}, {upper}] is not strictly increasing at this precision"
            )));
        }
        Ok(Self {
            lower,
            upper,
            spacing: (upper - lower) / last,
            points,
        })
    }

    pub fn lower(&self) -> T {
        self.lower
    }

    pub fn upper(&self) -> T {
        self.upper
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn point(&self, i: usize) -> T {
        self.points[i]
    }

    pub fn contains(&self, x: T) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Index `i` minimizing `|q[i] - x|`; ties go to the lower index.
    ///
    /// Points outside `Q` map to the nearest endpoint. NaN maps to 0.
    pub fn nearest_index(&self, x: T) -> usize {
        let n = self.points.len();
        let guess = ((x - self.lower) / self.spacing).round();
        let guess = if guess.is_nan() || guess <= T::zero() {
            0
        } else {
            guess.to_usize().unwrap_or(n - 1).min(n - 1)
        };
        let lo = guess.saturating_sub(1);
        let hi = (guess + 1).min(n - 1);
        let mut best = lo;
        let mut best_dist = (self.points[lo] - x).abs();
        for i in lo + 1..=hi {
            let dist = (self.points[i] - x).abs();
            if dist < best_dist {
                best = i;
                best_dist = dist;
            }
        }
        best
    }
}

/// Map family of the unperturbed dynamics `f`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum MapSpec<T> {
    /// `mu * x` for `x <= 1/2`, `mu * (1 - x)` otherwise.
    Tent { mu: T },
    /// `c` everywhere.
    Constant { c: T },
}

impl<T: Scalar> MapSpec<T> {
    pub fn tent(mu: T) -> Self {
        MapSpec::Tent { mu }
    }

    pub fn constant(c: T) -> Self {
        MapSpec::Constant { c }
    }

    /// `f(x)` without input validation.
    #[inline]
    pub fn apply(&self, x: T) -> T {
        match *self {
            MapSpec::Tent { mu } => {
                if x <= T::lit(0.5) {
                    mu * x
                } else {
                    mu * (T::one() - x)
                }
            }
            MapSpec::Constant { c } => c,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let p = match *self {
            MapSpec::Tent { mu } => mu,
            MapSpec::Constant { c } => c,
        };
        if p.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!(
                "map parameter {p} is not finite"
            )))
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MapSpec::Tent { .. } => "tent",
            MapSpec::Constant { .. } => "constant",
        }
    }

    /// The single parameter of the map (`mu` or `c`).
    pub fn parameter(&self) -> T {
        match *self {
            MapSpec::Tent { mu } => mu,
            MapSpec::Constant { c } => c,
        }
    }
}

/// Evaluates `f(x)`; images are not clamped to `Q`.
pub fn map_eval<T: Scalar>(m: &MapSpec<T>, x: T) -> Result<T> {
    if !x.is_finite() {
        return Err(Error::InvalidInput(format!(
            "map argument {x} is not finite"
        )));
    }
    Ok(m.apply(x))
}

/// Bounded disturbance `|xi| <= bound`, with `support_count` points for the worst case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DisturbanceModel<T> {
    bound: T,
    support_count: usize,
}

impl<T: Scalar> DisturbanceModel<T> {
    pub fn new(bound: T, support_count: usize) -> Result<Self> {
        if !bound.is_finite() || bound < T::zero() {
            return Err(Error::InvalidConfig(format!(
                "disturbance bound must be finite and >= 0, got {bound}"
            )));
        }
        if support_count == 0 || support_count.is_multiple_of(2) {
            return Err(Error::InvalidConfig(format!(
                "disturbance support count must be odd, got {support_count}"
            )));
        }
        if support_count == 1 && bound > T::zero() {
            return Err(Error::InvalidConfig(
                "a single support point cannot represent a nonzero disturbance bound".into(),
            ));
        }
        Ok(Self {
            bound,
            support_count,
        })
    }

    pub fn bound(&self) -> T {
        self.bound
    }

    pub fn support_count(&self) -> usize {
        self.support_count
    }

    /// Spacing of the worst-case support, `2 xi0 / (M - 1)` (0 when M = 1).
    pub fn support_spacing(&self) -> T {
        if self.support_count == 1 {
            T::zero()
        } else {
            T::lit(2.0) * self.bound / T::from_usize_lossy(self.support_count - 1)
        }
    }
}

/// `M` evenly spaced values on `[-xi0, +xi0]`, endpoints and 0 included.
///
/// The list is exactly symmetric: entry `s` is the negation of entry `M-1-s`.
pub fn disturbance_support<T: Scalar>(d: &DisturbanceModel<T>) -> Vec<T> {
    let m = d.support_count;
    if m == 1 {
        return vec![T::zero()];
    }
    let half = (m - 1) / 2;
    let denom = T::from_usize_lossy(half);
    (0..m)
        .map(|s| {
            if s < half {
                -(d.bound * (T::from_usize_lossy(half - s) / denom))
            } else {
                d.bound * (T::from_usize_lossy(s - half) / denom)
            }
        })
        .collect()
}

/// Draws `xi` uniformly on `[-xi0, +xi0]`. Always consumes one draw.
pub fn sample_disturbance<T: Scalar>(d: &DisturbanceModel<T>, r: &mut RngStream) -> T {
    let u = T::lit(r.unit());
    let xi = d.bound * (T::lit(2.0) * u - T::one());
    xi.max(-d.bound).min(d.bound)
}

/// Deterministic random substream keyed by `(master_seed, stream_index)`.
///
/// Draw `k` of a stream depends only on the seed, the stream index and `k`,
/// so ensembles can be consumed in any order or in parallel.
#[derive(Clone, Debug)]
pub struct RngStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Uniform on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

/// A complete problem instance: region, map and disturbance.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem<T> {
    pub grid: Grid<T>,
    pub map: MapSpec<T>,
    pub disturbance: DisturbanceModel<T>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(grid: Grid<T>, map: MapSpec<T>, disturbance: DisturbanceModel<T>) -> Result<Self> {
        map.validate()?;
        Ok(Self {
            grid,
            map,
            disturbance,
        })
    }

    /// Tent map with slope `mu` on `Q = [0, 1]`.
    pub fn tent(mu: T, xi0: T, grid_count: usize, support_count: usize) -> Result<Self> {
        Self::new(
            Grid::new(T::zero(), T::one(), grid_count)?,
            MapSpec::tent(mu),
            DisturbanceModel::new(xi0, support_count)?,
        )
    }
}
