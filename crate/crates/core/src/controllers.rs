//! Orbit simulation under three strategies: no control, partial control
//! (snap the noisy image onto the nearest safe point) and descent control
//! (pick the grid target minimizing `max(|u|, U(target))`).
//!
//! Both controllers act after the disturbance is realized: each step draws
//! `xi_n`, forms `q* = f(q_n) + xi_n`, then chooses a grid point
//! `q_{n+1}` and reports `u_n = q_{n+1} - q*`.

use crate::dynamics::{sample_disturbance, Problem, RngStream};
use crate::error::{Error, Result};
use crate::safety::{best_target, minimal_safe_set, MembershipRule, SafeSet, SafetyFunction};
use crate::scalar::Scalar;

/// One recorded iteration of an orbit.
#[derive(Clone, Debug, PartialEq)]
pub struct Step<T> {
    pub n: usize,
    pub q: T,
    pub xi: T,
    pub u: T,
    pub q_next: T,
    /// `U(q_{n+1})`, absent when no safety function is attached or `q_{n+1}` left `Q`.
    pub value_next: Option<T>,
    pub in_safe: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrbitRecord<T> {
    pub steps: Vec<Step<T>>,
    /// Index of the first state outside `Q`.
    pub escaped_at: Option<usize>,
    /// Index of the first state inside the safe set (0 if `q0` is already safe).
    pub entered_safe_set_at: Option<usize>,
}

impl<T> Default for OrbitRecord<T> {
    fn default() -> Self {
        Self {
            steps: Vec::new(),
            escaped_at: None,
            entered_safe_set_at: None,
        }
    }
}

/// Result of a single controlled step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ControlStep<T> {
    pub xi: T,
    pub image: T,
    pub index: usize,
    pub next: T,
    pub control: T,
}

/// Partial control: move the noisy image to the nearest safe grid point.
#[derive(Clone, Debug)]
pub struct PartialController<T> {
    /// Safe grid points `(q, index)`, increasing in `q`.
    safe_points: Vec<(T, usize)>,
}

impl<T: Scalar> PartialController<T> {
    pub fn new(problem: &Problem<T>, safe_set: &SafeSet<T>) -> Result<Self> {
        if safe_set.mask().len() != problem.grid.len() {
            return Err(Error::InvalidInput(format!(
                "safe set covers {} points, grid has {}",
                safe_set.mask().len(),
                problem.grid.len()
            )));
        }
        let safe_points: Vec<(T, usize)> = safe_set
            .indices()
            .into_iter()
            .map(|i| (problem.grid.point(i), i))
            .collect();
        if safe_points.is_empty() {
            return Err(Error::InvalidInput(
                "partial control needs a nonempty safe set".into(),
            ));
        }
        Ok(Self { safe_points })
    }

    /// Nearest safe grid point to `x` as `(index, point)`; ties go to the lower index.
    pub fn snap(&self, x: T) -> (usize, T) {
        let k = self.safe_points.partition_point(|&(q, _)| q < x);
        let mut best: Option<(T, T, usize)> = None;
        for &(q, i) in &self.safe_points[k.saturating_sub(1)..(k + 1).min(self.safe_points.len())] {
            let d = (q - x).abs();
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, q, i));
            }
        }
        let (_, q, i) = best.expect("nonempty safe set");
        (i, q)
    }

    pub fn step(&self, problem: &Problem<T>, q_n: T, rng: &mut RngStream) -> ControlStep<T> {
        let xi = sample_disturbance(&problem.disturbance, rng);
        let image = problem.map.apply(q_n) + xi;
        let (index, next) = self.snap(image);
        ControlStep {
            xi,
            image,
            index,
            next,
            control: next - image,
        }
    }
}

/// Descent control over a converged safety function.
#[derive(Clone, Copy, Debug)]
pub struct DescentController<'a, T> {
    sf: &'a SafetyFunction<T>,
}

impl<'a, T: Scalar> DescentController<'a, T> {
    pub fn new(sf: &'a SafetyFunction<T>) -> Self {
        Self { sf }
    }

    /// Grid target minimizing `max(|q_i - x|, U(q_i))`, ties to smaller
    /// `|q_i - x|` and then to the lower index.
    pub fn steer(&self, x: T) -> (usize, T) {
        let t = best_target(self.sf.grid(), self.sf.values(), x);
        (t.index, self.sf.grid().point(t.index))
    }

    pub fn step(&self, problem: &Problem<T>, q_n: T, rng: &mut RngStream) -> ControlStep<T> {
        let xi = sample_disturbance(&problem.disturbance, rng);
        let image = problem.map.apply(q_n) + xi;
        let (index, next) = self.steer(image);
        ControlStep {
            xi,
            image,
            index,
            next,
            control: next - image,
        }
    }
}

/// One partial-control step from `q_n`. Returns `(q_{n+1}, u_n)`.
pub fn partial_control_step<T: Scalar>(
    problem: &Problem<T>,
    safe_set: &SafeSet<T>,
    q_n: T,
    rng: &mut RngStream,
) -> Result<(T, T)> {
    let s = PartialController::new(problem, safe_set)?.step(problem, q_n, rng);
    Ok((s.next, s.control))
}

/// One descent-control step from `q_n`. Returns `(q_{n+1}, u_n)`.
pub fn descent_control_step<T: Scalar>(
    problem: &Problem<T>,
    sf: &SafetyFunction<T>,
    q_n: T,
    rng: &mut RngStream,
) -> (T, T) {
    let s = DescentController::new(sf).step(problem, q_n, rng);
    (s.next, s.control)
}

/// First `n` whose uncontrolled state `q_n` lies outside `Q`, or `None`
/// if the orbit survives `max_steps` iterations.
pub fn uncontrolled_escape_time<T: Scalar>(
    problem: &Problem<T>,
    q0: T,
    rng: &mut RngStream,
    max_steps: usize,
) -> Option<usize> {
    let mut q = q0;
    for n in 0..max_steps {
        q = problem.map.apply(q) + sample_disturbance(&problem.disturbance, rng);
        if !problem.grid.contains(q) {
            return Some(n + 1);
        }
    }
    None
}

/// Strategy used by [`simulate_orbit`].
#[derive(Clone, Copy, Debug)]
pub enum ControllerKind<'a, T> {
    None,
    Partial(&'a SafeSet<T>),
    Descent(&'a SafetyFunction<T>),
}

impl<T> ControllerKind<'_, T> {
    pub fn name(&self) -> &'static str {
        match self {
            ControllerKind::None => "none",
            ControllerKind::Partial(_) => "partial",
            ControllerKind::Descent(_) => "descent",
        }
    }
}

/// What an orbit is annotated against: `U` for `value_next` and the safe
/// set for `in_safe` / `entered_safe_set_at`.
///
/// Missing pieces are filled from the controller: a partial controller
/// supplies its safe set, a descent controller its safety function and the
/// minimal safe set under the default membership rule.
#[derive(Clone, Copy, Debug)]
pub struct Monitor<'a, T> {
    pub values: Option<&'a SafetyFunction<T>>,
    pub safe_set: Option<&'a SafeSet<T>>,
}

impl<'a, T> Monitor<'a, T> {
    pub fn none() -> Self {
        Self {
            values: None,
            safe_set: None,
        }
    }

    pub fn new(values: &'a SafetyFunction<T>, safe_set: &'a SafeSet<T>) -> Self {
        Self {
            values: Some(values),
            safe_set: Some(safe_set),
        }
    }
}

/// Runs `steps` iterations of the chosen strategy from `q0`.
///
/// The uncontrolled orbit stops at the first state outside `Q`; the
/// escaping step is still recorded. Off-grid states are looked up at their
/// nearest grid point.
pub fn simulate_orbit<T: Scalar>(
    kind: &ControllerKind<'_, T>,
    problem: &Problem<T>,
    q0: T,
    steps: usize,
    rng: &mut RngStream,
    monitor: &Monitor<'_, T>,
) -> Result<OrbitRecord<T>> {
    if !q0.is_finite() {
        return Err(Error::InvalidInput(format!(
            "initial condition {q0} is not finite"
        )));
    }
    if !matches!(kind, ControllerKind::None) && !problem.grid.contains(q0) {
        return Err(Error::InvalidInput(format!(
            "initial condition {q0} lies outside [{}, {}]",
            problem.grid.lower(),
            problem.grid.upper()
        )));
    }

    let owned_safe_set;
    let values = monitor.values.or(match kind {
        ControllerKind::Descent(sf) => Some(*sf),
        _ => None,
    });
    let safe_set = match (monitor.safe_set, kind) {
        (Some(ss), _) => Some(ss),
        (None, ControllerKind::Partial(ss)) => Some(*ss),
        (None, ControllerKind::Descent(sf)) => {
            owned_safe_set = minimal_safe_set(sf, MembershipRule::default());
            Some(&owned_safe_set)
        }
        (None, ControllerKind::None) => None,
    };

    let partial = match kind {
        ControllerKind::Partial(ss) => Some(PartialController::new(problem, ss)?),
        _ => None,
    };
    let grid = &problem.grid;
    let is_safe =
        |x: T| grid.contains(x) && safe_set.is_some_and(|s| s.contains(grid.nearest_index(x)));

    let mut record = OrbitRecord::default();
    if is_safe(q0) {
        record.entered_safe_set_at = Some(0);
    }
    let mut q = q0;
    for n in 0..steps {
        let (xi, u, q_next) = match kind {
            ControllerKind::None => {
                let xi = sample_disturbance(&problem.disturbance, rng);
                (xi, T::zero(), problem.map.apply(q) + xi)
            }
            ControllerKind::Partial(_) => {
                let s = partial.as_ref().expect("built above").step(problem, q, rng);
                (s.xi, s.control, s.next)
            }
            ControllerKind::Descent(sf) => {
                let s = DescentController::new(sf).step(problem, q, rng);
                (s.xi, s.control, s.next)
            }
        };
        let inside = grid.contains(q_next);
        let in_safe = is_safe(q_next);
        record.steps.push(Step {
            n,
            q,
            xi,
            u,
            q_next,
            value_next: values.filter(|_| inside).map(|sf| sf.value_near(q_next)),
            in_safe,
        });
        if in_safe && record.entered_safe_set_at.is_none() {
            record.entered_safe_set_at = Some(n + 1);
        }
        if !inside {
            record.escaped_at = Some(n + 1);
            break;
        }
        q = q_next;
    }
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{DisturbanceModel, Grid, MapSpec};
    use crate::safety::{compute_safety_function, SolverOptions};

    fn unit_problem(n: usize, xi0: f64) -> Problem<f64> {
        Problem::<f64>::tent(3.0, xi0, n, if xi0 == 0.0 { 1 } else { 11 }).unwrap()
    }

    fn mask_at(n: usize, idx: &[usize]) -> SafeSet<f64> {
        let mut mask = vec![false; n];
        for &i in idx {
            mask[i] = true;
        }
        SafeSet::<f64>::from_mask(0.0, 0.0, mask)
    }

    #[test]
    fn snap_to_single_safe_point() {
        let p = unit_problem(11, 0.05);
        let ss = mask_at(11, &[3]);
        let c = PartialController::new(&p, &ss).unwrap();
        let (i, q) = c.snap(0.28);
        assert_eq!((i, q), (3, 0.3));
        assert!((q - 0.28 - 0.02).abs() < 1e-15);
    }

    #[test]
    fn snap_ties_go_low() {
        let g = Grid::<f64>::new(0.0, 1.0, 5).unwrap(); // 0, 0.25, 0.5, 0.75, 1
        let p = Problem::new(
            g,
            MapSpec::<f64>::tent(3.0),
            DisturbanceModel::new(0.0, 1).unwrap(),
        )
        .unwrap();
        let ss = mask_at(5, &[1, 2]);
        let c = PartialController::new(&p, &ss).unwrap();
        let mid = (p.grid.point(1) + p.grid.point(2)) / 2.0;
        assert_eq!(c.snap(mid).0, 1);
        assert_eq!(c.snap(-3.0).0, 1);
        assert_eq!(c.snap(7.0).0, 2);
    }

    #[test]
    fn partial_requires_nonempty_set() {
        let p = unit_problem(11, 0.05);
        assert!(PartialController::new(&p, &mask_at(11, &[])).is_err());
        assert!(PartialController::new(&p, &mask_at(10, &[1])).is_err());
    }

    #[test]
    fn descent_picks_cheapest_target() {
        let p = Problem::<f64>::tent(3.0, 0.05, 3, 3).unwrap();
        let sf = SafetyFunction::from_parts(p.clone(), vec![0.5, 0.1, 0.5], 0, 1e-15).unwrap();
        let (i, q) = DescentController::new(&sf).steer(0.4);
        assert_eq!((i, q), (1, 0.5));
        assert!((q - 0.4 - 0.1).abs() < 1e-15);
    }

    #[test]
    fn descent_with_flat_values_is_nearest_point() {
        let p = Problem::<f64>::tent(3.0, 0.05, 101, 3).unwrap();
        let sf = SafetyFunction::from_parts(p.clone(), vec![0.2; 101], 0, 1e-15).unwrap();
        let c = DescentController::new(&sf);
        for k in 0..200 {
            let x = -0.3 + 1.6 * k as f64 / 199.0;
            let (i, q) = c.steer(x);
            // flat U: cost is max(d, 0.2); among points within 0.2 the nearest wins
            assert_eq!(i, p.grid.nearest_index(x), "x={x}");
            if p.grid.contains(x) {
                assert!((q - x).abs() <= p.grid.spacing() / 2.0 + 1e-15);
            }
        }
    }

    #[test]
    fn escape_examples() {
        let p = unit_problem(11, 0.0);
        let mut r = RngStream::new(0, 0);
        assert_eq!(uncontrolled_escape_time(&p, 0.5, &mut r, 10), Some(1));
        let calm = Problem::<f64>::tent(1.5, 0.0, 11, 1).unwrap();
        for k in 0..=20 {
            let q0 = k as f64 / 20.0;
            assert_eq!(uncontrolled_escape_time(&calm, q0, &mut r, 1000), None);
        }
    }

    #[test]
    fn uncontrolled_orbit_records_escape() {
        let p = unit_problem(101, 0.0);
        let mut r = RngStream::new(0, 0);
        let rec =
            simulate_orbit(&ControllerKind::None, &p, 0.5, 50, &mut r, &Monitor::none()).unwrap();
        assert_eq!(rec.escaped_at, Some(1));
        assert_eq!(rec.steps.len(), 1);
        assert_eq!(rec.steps[0].q_next, 1.5);
        assert_eq!(rec.steps[0].value_next, None);
    }

    #[test]
    fn controlled_orbit_requires_initial_condition_in_q() {
        let p = unit_problem(101, 0.05);
        let ss = mask_at(101, &[30]);
        let mut r = RngStream::new(0, 0);
        assert!(simulate_orbit(
            &ControllerKind::Partial(&ss),
            &p,
            1.3,
            5,
            &mut r,
            &Monitor::none()
        )
        .is_err());
    }

    #[test]
    fn partial_orbit_stays_in_safe_set() {
        let p = Problem::<f64>::tent(3.0, 0.05, 401, 21).unwrap();
        let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
        let ss = minimal_safe_set(&sf, MembershipRule::GridResolution);
        let q0 = p.grid.point(ss.indices()[0]);
        let mut r = RngStream::new(11, 0);
        let rec = simulate_orbit(
            &ControllerKind::Partial(&ss),
            &p,
            q0,
            2000,
            &mut r,
            &Monitor::new(&sf, &ss),
        )
        .unwrap();
        assert_eq!(rec.escaped_at, None);
        assert_eq!(rec.entered_safe_set_at, Some(0));
        assert!(rec.steps.iter().all(|s| s.in_safe));
        let slack = ss.band() + p.disturbance.support_spacing() / 2.0 + 1e-12;
        for s in &rec.steps {
            assert!(s.u.abs() <= ss.threshold() + slack, "{s:?}");
            assert!(s.xi.abs() <= 0.05);
        }
    }

    #[test]
    fn control_accounting_holds() {
        let p = Problem::<f64>::tent(3.0, 0.05, 301, 11).unwrap();
        let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
        let mut r = RngStream::new(5, 9);
        let rec = simulate_orbit(
            &ControllerKind::Descent(&sf),
            &p,
            0.16,
            300,
            &mut r,
            &Monitor::none(),
        )
        .unwrap();
        for s in &rec.steps {
            let lhs = s.q_next - p.map.apply(s.q) - s.xi;
            assert!((lhs - s.u).abs() <= 4.0 * f64::EPSILON, "{s:?}");
        }
    }

    #[test]
    fn orbits_replay_bit_exactly() {
        let p = Problem::<f64>::tent(3.0, 0.05, 201, 11).unwrap();
        let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
        let run = |seed| {
            let mut r = RngStream::new(seed, 2);
            simulate_orbit(
                &ControllerKind::Descent(&sf),
                &p,
                0.61,
                500,
                &mut r,
                &Monitor::none(),
            )
            .unwrap()
        };
        assert_eq!(run(9), run(9));
        assert_ne!(run(9), run(10));
    }
}
