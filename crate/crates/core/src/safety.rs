//! Safety function, safe sets and their piece structure.
//!
//! The safety function `U(q)` is the smallest per-step control bound that
//! keeps an orbit starting at `q` inside `Q` forever against the worst
//! admissible disturbance. On the grid it is the least fixed point of
//!
//! ```text
//! U_{k+1}[i] = max_s min_j max(|f(q[i]) + xi[s] - q[j]|, U_k[j]),   U_0 = 0
//! ```
//!
//! The operator is monotone and every iterate takes values in the finite set
//! `{0} ∪ {|f(q[i]) + xi[s] - q[j]|}`, so the iteration reaches an exact fixed
//! point after finitely many sweeps.
//!
//! The inner `min_j` is a lower-envelope query against the sorted grid. The
//! naive strategy scans all `N` points; the envelope strategy scans outward
//! from the nearest grid point and stops once the distance alone exceeds the
//! best cost found. Both take the minimum over the same floating-point
//! values, so they agree bit for bit.

use rayon::prelude::*;

use crate::dynamics::{disturbance_support, Grid, Problem};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Relative sup-norm tolerance of the fixed-point test.
pub const CONVERGENCE_TOL: f64 = 1e-15;

/// Default bound on the number of Bellman sweeps.
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

/// Absolute part of the safe-set membership band.
pub const MEMBERSHIP_ABS_TOL: f64 = 1e-9;

/// Relative part of the safe-set membership band.
pub const MEMBERSHIP_REL_TOL: f64 = 1e-9;

/// How the inner minimum over target grid points is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum UpdateStrategy {
    /// Scan every grid point. Reference implementation.
    Naive,
    /// Outward scan with early termination.
    #[default]
    Envelope,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolverOptions {
    pub max_sweeps: usize,
    pub strategy: UpdateStrategy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_sweeps: DEFAULT_MAX_SWEEPS,
            strategy: UpdateStrategy::default(),
        }
    }
}

/// Best grid target for a point `x`: lexicographic minimum of
/// `(max(|q[j] - x|, U[j]), |q[j] - x|, j)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Target<T> {
    pub index: usize,
    pub cost: T,
    pub distance: T,
}

impl<T: Scalar> Target<T> {
    #[inline]
    fn beats(&self, other: &Target<T>) -> bool {
        (self.cost, self.distance, self.index) < (other.cost, other.distance, other.index)
    }
}

/// Lower-envelope query over every grid point.
pub fn best_target_naive<T: Scalar>(grid: &Grid<T>, values: &[T], x: T) -> Target<T> {
    let mut best = Target {
        index: usize::MAX,
        cost: T::infinity(),
        distance: T::infinity(),
    };
    for (j, (&q, &v)) in grid.points().iter().zip(values).enumerate() {
        let distance = (q - x).abs();
        let cand = Target {
            index: j,
            cost: distance.max(v),
            distance,
        };
        if cand.beats(&best) {
            best = cand;
        }
    }
    best
}

/// Lower-envelope query scanning outward from the grid point nearest `x`.
///
/// Distances grow monotonically on each side of the nearest point, and the
/// cost is at least the distance, so a side is abandoned once its distance
/// strictly exceeds the best cost. Returns the same target as
/// [`best_target_naive`].
pub fn best_target<T: Scalar>(grid: &Grid<T>, values: &[T], x: T) -> Target<T> {
    let points = grid.points();
    let centre = grid.nearest_index(x);
    let mut best = Target {
        index: usize::MAX,
        cost: T::infinity(),
        distance: T::infinity(),
    };
    let visit = |j: usize, best: &mut Target<T>| -> bool {
        let distance = (points[j] - x).abs();
        if distance > best.cost {
            return false;
        }
        let cand = Target {
            index: j,
            cost: distance.max(values[j]),
            distance,
        };
        if cand.beats(best) {
            *best = cand;
        }
        true
    };
    for j in (0..=centre).rev() {
        if !visit(j, &mut best) {
            break;
        }
    }
    for j in centre + 1..points.len() {
        if !visit(j, &mut best) {
            break;
        }
    }
    best
}

/// The min-max Bellman operator of a problem, with the images `f(q[i])`
/// and the disturbance support precomputed.
#[derive(Clone, Debug)]
pub struct BellmanOperator<'a, T> {
    problem: &'a Problem<T>,
    images: Vec<T>,
    support: Vec<T>,
}

impl<'a, T: Scalar> BellmanOperator<'a, T> {
    pub fn new(problem: &'a Problem<T>) -> Self {
        let images = problem
            .grid
            .points()
            .iter()
            .map(|&q| problem.map.apply(q))
            .collect();
        Self {
            problem,
            images,
            support: disturbance_support(&problem.disturbance),
        }
    }

    pub fn problem(&self) -> &Problem<T> {
        self.problem
    }

    /// Worst case over the disturbance support of the best achievable cost from `q[i]`.
    pub fn value_at(&self, values: &[T], i: usize, strategy: UpdateStrategy) -> T {
        let grid = &self.problem.grid;
        let image = self.images[i];
        self.support
            .iter()
            .map(|&xi| {
                let x = image + xi;
                match strategy {
                    UpdateStrategy::Naive => best_target_naive(grid, values, x).cost,
                    UpdateStrategy::Envelope => best_target(grid, values, x).cost,
                }
            })
            .fold(T::zero(), T::max)
    }

    /// One sweep over all grid points. Parallel over `i`; each entry is
    /// computed sequentially, so the result does not depend on scheduling.
    pub fn apply(&self, values: &[T], strategy: UpdateStrategy) -> Vec<T> {
        (0..values.len())
            .into_par_iter()
            .map(|i| self.value_at(values, i, strategy))
            .collect()
    }
}

fn check_values<T: Scalar>(values: &[T], n: usize) -> Result<()> {
    if values.len() != n {
        return Err(Error::InvalidInput(format!(
            "value array has length {}, grid has {n} points",
            values.len()
        )));
    }
    if let Some((i, v)) = values
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < T::zero())
    {
        return Err(Error::InvalidInput(format!(
            "value[{i}] = {v} must be finite and >= 0"
        )));
    }
    Ok(())
}

/// One application of the min-max operator to `values`.
pub fn bellman_update<T: Scalar>(values: &[T], problem: &Problem<T>) -> Result<Vec<T>> {
    check_values(values, problem.grid.len())?;
    Ok(BellmanOperator::new(problem).apply(values, UpdateStrategy::default()))
}

fn sup_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .map(|(x, y)| (*x - *y).abs())
        .fold(T::zero(), T::max)
}

fn sup_norm<T: Scalar>(a: &[T]) -> T {
    a.iter().map(|x| x.abs()).fold(T::zero(), T::max)
}

/// Converged safety function over a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SafetyFunction<T> {
    problem: Problem<T>,
    values: Vec<T>,
    iterations: usize,
    tolerance: T,
}

impl<T: Scalar> SafetyFunction<T> {
    /// Assembles a safety function from stored parts, checking that the
    /// values are admissible. Does not re-verify the fixed point.
    pub fn from_parts(
        problem: Problem<T>,
        values: Vec<T>,
        iterations: usize,
        tolerance: T,
    ) -> Result<Self> {
        check_values(&values, problem.grid.len())?;
        Ok(Self {
            problem,
            values,
            iterations,
            tolerance,
        })
    }

    pub fn problem(&self) -> &Problem<T> {
        &self.problem
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.problem.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn value(&self, i: usize) -> T {
        self.values[i]
    }

    /// `U` at the grid point nearest `x`.
    pub fn value_near(&self, x: T) -> T {
        self.values[self.problem.grid.nearest_index(x)]
    }

    /// Index `k` of the returned iterate `U_k`.
    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn tolerance(&self) -> T {
        self.tolerance
    }

    /// Sup-norm change produced by one more sweep.
    pub fn fixed_point_residual(&self) -> T {
        let next = BellmanOperator::new(&self.problem).apply(&self.values, UpdateStrategy::Naive);
        sup_distance(&next, &self.values)
    }
}

/// Iterates the operator from `U_0 = 0` to its fixed point.
///
/// Stops when the sup-norm change is at most
/// `CONVERGENCE_TOL * max(1, |U|_inf)`. Every sweep is checked for
/// pointwise monotonicity.
pub fn compute_safety_function<T: Scalar>(
    problem: &Problem<T>,
    options: SolverOptions,
) -> Result<SafetyFunction<T>> {
    if options.max_sweeps == 0 {
        return Err(Error::InvalidConfig("max sweeps must be at least 1".into()));
    }
    let op = BellmanOperator::new(problem);
    let tol = T::lit(CONVERGENCE_TOL);
    let mut values = vec![T::zero(); problem.grid.len()];
    let mut residual = T::infinity();
    for sweep in 1..=options.max_sweeps {
        let next = op.apply(&values, options.strategy);
        if let Some(i) = (0..next.len()).find(|&i| next[i] < values[i]) {
            return Err(Error::Invariant(format!(
                "sweep {sweep} decreased U[{i}] from {} to {}",
                values[i], next[i]
            )));
        }
        residual = sup_distance(&next, &values);
        let scale = sup_norm(&next).max(T::one());
        if residual <= tol * scale {
            return Ok(SafetyFunction {
                problem: problem.clone(),
                values: next,
                iterations: sweep - 1,
                tolerance: tol,
            });
        }
        values = next;
    }
    Err(Error::NonConvergence {
        sweeps: options.max_sweeps,
        residual: residual.to_f64_lossy(),
        last: values.iter().map(|v| v.to_f64_lossy()).collect(),
    })
}

/// Smallest control bound for which a safe set exists.
pub fn min_control_bound<T: Scalar>(sf: &SafetyFunction<T>) -> T {
    sf.values.iter().copied().fold(T::infinity(), T::min)
}

/// Which grid points count as attaining a threshold.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MembershipRule {
    /// `U <= u0 + 1e-9 + 1e-9 |u0|`.
    Exact,
    /// The exact band widened by half a grid spacing. On a grid the minimum
    /// plateaus of `U` jitter at the scale of `h`, and this band keeps each
    /// plateau in one piece.
    #[default]
    GridResolution,
}

impl MembershipRule {
    pub fn band<T: Scalar>(self, u0: T, grid: &Grid<T>) -> T {
        let float = float_band(u0);
        match self {
            MembershipRule::Exact => float,
            MembershipRule::GridResolution => float + grid.spacing() / T::lit(2.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MembershipRule::Exact => "exact",
            MembershipRule::GridResolution => "grid",
        }
    }
}

impl std::str::FromStr for MembershipRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(MembershipRule::Exact),
            "grid" => Ok(MembershipRule::GridResolution),
            other => Err(Error::InvalidConfig(format!(
                "unknown membership rule {other:?} (expected exact|grid)"
            ))),
        }
    }
}

fn float_band<T: Scalar>(u0: T) -> T {
    T::lit(MEMBERSHIP_ABS_TOL) + T::lit(MEMBERSHIP_REL_TOL) * u0.abs()
}

/// Inclusive run `[start, end]` of grid indices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Piece {
    pub start: usize,
    pub end: usize,
}

impl Piece {
    pub fn point_count(&self) -> usize {
        self.end - self.start + 1
    }
}

/// Grid points whose safety value is within the membership band of `u0`.
#[derive(Clone, Debug, PartialEq)]
pub struct SafeSet<T> {
    threshold: T,
    band: T,
    mask: Vec<bool>,
    pieces: Vec<Piece>,
}

impl<T: Scalar> SafeSet<T> {
    pub fn from_mask(threshold: T, band: T, mask: Vec<bool>) -> Self {
        let mut pieces = Vec::new();
        let mut start = None;
        for (i, &m) in mask.iter().enumerate() {
            match (m, start) {
                (true, None) => start = Some(i),
                (false, Some(s)) => {
                    pieces.push(Piece {
                        start: s,
                        end: i - 1,
                    });
                    start = None;
                }
                _ => {}
            }
        }
        if let Some(s) = start {
            pieces.push(Piece {
                start: s,
                end: mask.len() - 1,
            });
        }
        Self {
            threshold,
            band,
            mask,
            pieces,
        }
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }

    /// Tolerance added to the threshold for membership.
    pub fn band(&self) -> T {
        self.band
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Member indices in increasing order.
    pub fn indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    /// Phase-space intervals `[q[start], q[end]]` of the pieces.
    pub fn intervals(&self, grid: &Grid<T>) -> Vec<(T, T)> {
        self.pieces
            .iter()
            .map(|p| (grid.point(p.start), grid.point(p.end)))
            .collect()
    }
}

/// Grid points with `U <= u0` (within the band of `rule`).
pub fn extract_safe_set<T: Scalar>(
    sf: &SafetyFunction<T>,
    u0: T,
    rule: MembershipRule,
) -> Result<SafeSet<T>> {
    if !u0.is_finite() {
        return Err(Error::InvalidInput(format!("threshold {u0} is not finite")));
    }
    let min = min_control_bound(sf);
    if u0 < min - float_band(min) {
        return Err(Error::NoSafeSet {
            u0: u0.to_f64_lossy(),
            min: min.to_f64_lossy(),
        });
    }
    let band = rule.band(u0, sf.grid());
    let limit = u0 + band;
    let mask = sf.values.iter().map(|&v| v <= limit).collect();
    Ok(SafeSet::from_mask(u0, band, mask))
}

/// Safe set at the minimum control bound.
pub fn minimal_safe_set<T: Scalar>(sf: &SafetyFunction<T>, rule: MembershipRule) -> SafeSet<T> {
    extract_safe_set(sf, min_control_bound(sf), rule).expect("minimum is always admissible")
}

/// Size and spacing of the pieces of a safe set.
#[derive(Clone, Debug, PartialEq)]
pub struct PieceStats<T> {
    pub piece_count: usize,
    /// Run length times `h`, so a single point has width `h`.
    pub widths: Vec<T>,
    pub centers: Vec<T>,
    /// Center-to-center distances of adjacent pieces.
    pub gaps: Vec<T>,
    /// Mean gap `d`; absent with fewer than two pieces.
    pub mean_gap: Option<T>,
    pub min_gap: Option<T>,
    pub max_gap: Option<T>,
}

pub fn piece_stats<T: Scalar>(ss: &SafeSet<T>, grid: &Grid<T>) -> PieceStats<T> {
    let h = grid.spacing();
    let widths = ss
        .pieces
        .iter()
        .map(|p| T::from_usize_lossy(p.point_count()) * h)
        .collect();
    let centers: Vec<T> = ss
        .pieces
        .iter()
        .map(|p| (grid.point(p.start) + grid.point(p.end)) / T::lit(2.0))
        .collect();
    let gaps: Vec<T> = centers.windows(2).map(|w| w[1] - w[0]).collect();
    let (mean_gap, min_gap, max_gap) = if gaps.is_empty() {
        (None, None, None)
    } else {
        let mean = gaps.iter().copied().sum::<T>() / T::from_usize_lossy(gaps.len());
        (
            Some(mean),
            gaps.iter().copied().reduce(T::min),
            gaps.iter().copied().reduce(T::max),
        )
    };
    PieceStats {
        piece_count: ss.pieces.len(),
        widths,
        centers,
        gaps,
        mean_gap,
        min_gap,
        max_gap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DisturbanceModel, MapSpec};
    use crate::oracle;

    fn two_point_problem(n: usize, m: usize) -> Problem<f64> {
        Problem::new(
            Grid::<f64>::new(-0.5, 0.5, n).unwrap(),
            MapSpec::constant(0.0),
            DisturbanceModel::new(1.0, m).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn constant_map_first_sweep_is_one_half() {
        let p = two_point_problem(11, 3);
        let u1 = bellman_update(&[0.0; 11], &p).unwrap();
        assert!(u1.iter().all(|&v| v == 0.5), "{u1:?}");
    }

    #[test]
    fn constant_map_fixed_point_is_one_half() {
        let sf =
            compute_safety_function(&two_point_problem(21, 5), SolverOptions::default()).unwrap();
        assert!(sf.values().iter().all(|&v| (v - 0.5).abs() <= 1e-12));
        assert_eq!(min_control_bound(&sf), 0.5);
    }

    #[test]
    fn first_sweep_is_nonnegative() {
        let p = Problem::<f64>::tent(3.0, 0.05, 41, 5).unwrap();
        let u1 = bellman_update(&vec![0.0; 41], &p).unwrap();
        assert!(u1.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn update_matches_literal_triple_loop() {
        let p = Problem::<f64>::tent(3.0, 0.05, 21, 5).unwrap();
        let mut u = vec![0.0; 21];
        for _ in 0..6 {
            let expected = oracle::literal_sweep(&p, &u);
            let got = bellman_update(&u, &p).unwrap();
            assert_eq!(got, expected);
            u = got;
        }
    }

    #[test]
    fn update_validates_input() {
        let p = Problem::<f64>::tent(3.0, 0.05, 21, 5).unwrap();
        assert!(bellman_update(&[0.0; 20], &p).is_err());
        let mut bad = vec![0.0; 21];
        bad[3] = -1.0;
        assert!(bellman_update(&bad, &p).is_err());
        bad[3] = f64::NAN;
        assert!(bellman_update(&bad, &p).is_err());
    }

    #[test]
    fn invariant_interval_needs_no_control() {
        let p = Problem::<f64>::tent(1.5, 0.0, 101, 1).unwrap();
        let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
        let h = p.grid.spacing();
        assert!(sf.values().iter().all(|&v| v <= h / 2.0 + 1e-15));
        assert_eq!(sf.value(0), 0.0);
        assert_eq!(min_control_bound(&sf), 0.0);
    }

    #[test]
    fn envelope_and_naive_agree_on_tent() {
        let p = Problem::<f64>::tent(3.0, 0.05, 301, 21).unwrap();
        let a = compute_safety_function(
            &p,
            SolverOptions {
                strategy: UpdateStrategy::Naive,
                ..Default::default()
            },
        )
        .unwrap();
        let b = compute_safety_function(&p, SolverOptions::default()).unwrap();
        assert_eq!(a.values(), b.values());
        assert_eq!(a.iterations(), b.iterations());
    }

    #[test]
    fn non_convergence_is_reported() {
        let p = Problem::<f64>::tent(3.0, 0.05, 101, 11).unwrap();
        match compute_safety_function(
            &p,
            SolverOptions {
                max_sweeps: 1,
                ..Default::default()
            },
        ) {
            Err(Error::NonConvergence {
                sweeps,
                last,
                residual,
            }) => {
                assert_eq!(sweeps, 1);
                assert_eq!(last.len(), 101);
                assert!(residual > 0.0);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
        assert!(compute_safety_function(
            &p,
            SolverOptions {
                max_sweeps: 0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn converged_function_is_a_fixed_point() {
        let p = Problem::<f64>::tent(3.0, 0.05, 201, 11).unwrap();
        let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
        assert!(sf.fixed_point_residual() <= CONVERGENCE_TOL);
    }

    #[test]
    fn tent_safety_function_is_symmetric() {
        let p = Problem::<f64>::tent(3.0, 0.05, 401, 21).unwrap();
        let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
        let u = sf.values();
        for i in 0..u.len() {
            assert!((u[i] - u[u.len() - 1 - i]).abs() <= 1e-12);
        }
    }

    fn sf_from(values: Vec<f64>) -> SafetyFunction<f64> {
        let n = values.len();
        let p = Problem::<f64>::tent(3.0, 0.05, n, 3).unwrap();
        SafetyFunction::from_parts(p, values, 0, CONVERGENCE_TOL).unwrap()
    }

    #[test]
    fn constant_function_gives_one_piece() {
        let sf = sf_from(vec![0.2; 11]);
        let ss = extract_safe_set(&sf, 0.2, MembershipRule::Exact).unwrap();
        assert!(ss.mask().iter().all(|&m| m));
        assert_eq!(ss.pieces(), &[Piece { start: 0, end: 10 }]);
    }

    #[test]
    fn threshold_below_minimum_is_rejected() {
        let sf = sf_from(vec![0.3, 0.03, 0.3, 0.04, 0.3]);
        let err = extract_safe_set(&sf, 0.03 * (1.0 - 1e-3), MembershipRule::GridResolution);
        assert!(matches!(err, Err(Error::NoSafeSet { .. })));
        assert!(extract_safe_set(&sf, 0.03, MembershipRule::Exact).is_ok());
    }

    #[test]
    fn pieces_are_maximal_runs() {
        let mask = vec![true, true, false, true, false, false, true];
        let ss = SafeSet::<f64>::from_mask(0.0, 0.0, mask);
        assert_eq!(
            ss.pieces(),
            &[
                Piece { start: 0, end: 1 },
                Piece { start: 3, end: 3 },
                Piece { start: 6, end: 6 }
            ]
        );
        assert_eq!(ss.indices(), vec![0, 1, 3, 6]);
    }

    #[test]
    fn membership_rules_differ_by_half_spacing() {
        let sf = sf_from(vec![0.5, 0.1, 0.1 + 0.04, 0.1 + 0.06, 0.5]);
        // h = 0.25 on this 5-point grid
        let exact = extract_safe_set(&sf, 0.1, MembershipRule::Exact).unwrap();
        let grid = extract_safe_set(&sf, 0.1, MembershipRule::GridResolution).unwrap();
        assert_eq!(exact.indices(), vec![1]);
        assert_eq!(grid.indices(), vec![1, 2, 3]);
    }

    #[test]
    fn piece_stats_two_runs() {
        let g = Grid::<f64>::new(0.0, 1.0, 101).unwrap();
        let mut mask = vec![false; 101];
        for i in (10..=12).chain(20..=22) {
            mask[i] = true;
        }
        let ss = SafeSet::<f64>::from_mask(0.0, 0.0, mask);
        let st = piece_stats(&ss, &g);
        assert_eq!(st.piece_count, 2);
        assert!((st.mean_gap.unwrap() - 0.10).abs() < 1e-12);
        assert!((st.widths[0] - 0.03).abs() < 1e-12);
        assert_eq!(st.min_gap, st.max_gap);
    }

    #[test]
    fn piece_stats_single_run_has_no_gap() {
        let g = Grid::<f64>::new(0.0, 1.0, 11).unwrap();
        let mut mask = vec![false; 11];
        mask[4] = true;
        mask[5] = true;
        let st = piece_stats(&SafeSet::<f64>::from_mask(0.0, 0.0, mask), &g);
        assert_eq!(st.piece_count, 1);
        assert_eq!(st.mean_gap, None);
        assert!(st.gaps.is_empty());
    }

    #[test]
    fn best_target_tie_breaks() {
        let g = Grid::<f64>::new(0.0, 1.0, 3).unwrap();
        let u = [0.5, 0.1, 0.5];
        let t = best_target(&g, &u, 0.4);
        assert_eq!((t.index, t.cost), (1, 0.1));
        // equal cost 0.25 at j=0 and j=1; distances 0.25 and 0.25 -> lower index
        let flat = [0.0, 0.0, 0.0];
        assert_eq!(best_target(&g, &flat, 0.25).index, 0);
        assert_eq!(best_target_naive(&g, &flat, 0.25).index, 0);
    }

    #[test]
    fn f32_solver_runs() {
        let p = Problem::<f32>::tent(3.0, 0.05, 201, 11).unwrap();
        let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
        let u0 = min_control_bound(&sf);
        assert!(u0 > 0.0 && u0 < 0.05);
    }
}
