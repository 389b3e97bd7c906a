//! Ensemble statistics of the descent controller and parameter sweeps of
//! the safe set.

use rayon::prelude::*;

use crate::controllers::DescentController;
use crate::dynamics::{DisturbanceModel, Grid, MapSpec, Problem, RngStream};
use crate::error::{Error, Result};
use crate::safety::{
    compute_safety_function, min_control_bound, minimal_safe_set, piece_stats, MembershipRule,
    SafeSet, SafetyFunction, SolverOptions,
};
use crate::scalar::Scalar;

/// Descent-control statistics for one initial condition.
#[derive(Clone, Debug, PartialEq)]
pub struct IcStats<T> {
    pub q0: T,
    /// Mean number of map applications before the state is in the safe set.
    pub mean_iterations: T,
    /// Mean over runs of `sum |u_n| / iterations` before entry (0 if already safe).
    pub mean_control: T,
    pub max_iterations: usize,
    pub runs: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceStats<T> {
    pub per_ic: Vec<IcStats<T>>,
    pub global_max_iterations: usize,
    /// `entry_histogram[k]` counts orbits that entered after exactly `k` steps.
    pub entry_histogram: Vec<u64>,
}

impl<T: Scalar> ConvergenceStats<T> {
    pub fn total_runs(&self) -> u64 {
        self.entry_histogram.iter().sum()
    }

    /// Fraction of orbits that entered within `steps` steps.
    pub fn fraction_within(&self, steps: usize) -> f64 {
        let within: u64 = self.entry_histogram.iter().take(steps + 1).sum();
        within as f64 / self.total_runs() as f64
    }
}

/// Entry time and control cost of one descent-controlled orbit.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Descent<T> {
    pub steps: usize,
    pub total_control: T,
    /// Grid index of the first safe state.
    pub entry_index: usize,
}

/// Runs the descent controller from `q0` until the state lies in `safe_set`.
pub fn descend<T: Scalar>(
    sf: &SafetyFunction<T>,
    safe_set: &SafeSet<T>,
    q0: T,
    max_steps: usize,
    rng: &mut RngStream,
) -> Result<Descent<T>> {
    let problem = sf.problem();
    let ctrl = DescentController::new(sf);
    let mut index = problem.grid.nearest_index(q0);
    let mut q = q0;
    let mut steps = 0;
    let mut total_control = T::zero();
    while !(safe_set.contains(index) && problem.grid.contains(q)) {
        if steps == max_steps {
            return Err(Error::Invariant(format!(
                "orbit from q0={q0} (stream {}) did not reach the safe set within {max_steps} steps",
                rng.stream_index()
            )));
        }
        let s = ctrl.step(problem, q, rng);
        total_control = total_control + s.control.abs();
        steps += 1;
        q = s.next;
        index = s.index;
    }
    Ok(Descent {
        steps,
        total_control,
        entry_index: index,
    })
}

/// `count` evenly spaced points on `[lo, hi]`, endpoints included.
pub fn linspace<T: Scalar>(lo: T, hi: T, count: usize) -> Vec<T> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let last = T::from_usize_lossy(count - 1);
            (0..count)
                .map(|i| {
                    let t = T::from_usize_lossy(i) / last;
                    lo * (T::one() - t) + hi * t
                })
                .collect()
        }
    }
}

/// `count` logarithmically spaced points on `[lo, hi]`, endpoints included.
pub fn logspace<T: Scalar>(lo: T, hi: T, count: usize) -> Vec<T> {
    let mut v: Vec<T> = linspace(lo.ln(), hi.ln(), count)
        .into_iter()
        .map(T::exp)
        .collect();
    if count >= 2 {
        v[0] = lo;
        v[count - 1] = hi;
    }
    v
}

/// Descent-control ensemble over `ic_count` evenly spaced initial
/// conditions in `Q`, `runs_per_ic` orbits each.
///
/// Orbit `r` of initial condition `a` draws from substream
/// `a * runs_per_ic + r` of `seed`. An orbit that fails to enter within
/// `max_steps` is an error.
pub fn convergence_stats<T: Scalar>(
    sf: &SafetyFunction<T>,
    safe_set: &SafeSet<T>,
    ic_count: usize,
    runs_per_ic: usize,
    max_steps: usize,
    seed: u64,
) -> Result<ConvergenceStats<T>> {
    if runs_per_ic == 0 || ic_count == 0 {
        return Err(Error::InvalidConfig(
            "convergence statistics need at least one initial condition and one run".into(),
        ));
    }
    if safe_set.is_empty() {
        return Err(Error::InvalidInput("safe set is empty".into()));
    }
    let grid = sf.grid();
    let ics = linspace(grid.lower(), grid.upper(), ic_count);
    let per_ic: Vec<(IcStats<T>, Vec<u64>)> = ics
        .par_iter()
        .enumerate()
        .map(|(a, &q0)| {
            let mut hist = vec![0u64; max_steps + 1];
            let mut sum_steps = 0usize;
            let mut sum_control = T::zero();
            let mut max_iterations = 0;
            for r in 0..runs_per_ic {
                let mut rng = RngStream::new(seed, (a * runs_per_ic + r) as u64);
                let d = descend(sf, safe_set, q0, max_steps, &mut rng)?;
                hist[d.steps] += 1;
                sum_steps += d.steps;
                max_iterations = max_iterations.max(d.steps);
                if d.steps > 0 {
                    sum_control = sum_control + d.total_control / T::from_usize_lossy(d.steps);
                }
            }
            let runs = T::from_usize_lossy(runs_per_ic);
            Ok((
                IcStats {
                    q0,
                    mean_iterations: T::from_usize_lossy(sum_steps) / runs,
                    mean_control: sum_control / runs,
                    max_iterations,
                    runs: runs_per_ic,
                },
                hist,
            ))
        })
        .collect::<Result<_>>()?;

    let mut entry_histogram = vec![0u64; max_steps + 1];
    for (_, h) in &per_ic {
        for (acc, x) in entry_histogram.iter_mut().zip(h) {
            *acc += x;
        }
    }
    let last = entry_histogram.iter().rposition(|&c| c > 0).unwrap_or(0);
    entry_histogram.truncate(last + 1);
    let per_ic: Vec<IcStats<T>> = per_ic.into_iter().map(|(s, _)| s).collect();
    Ok(ConvergenceStats {
        global_max_iterations: per_ic.iter().map(|s| s.max_iterations).max().unwrap_or(0),
        per_ic,
        entry_histogram,
    })
}

/// `(q0, mean control per step before entry)` for every initial condition.
pub fn average_control_map<T: Scalar>(stats: &ConvergenceStats<T>) -> Vec<(T, T)> {
    stats
        .per_ic
        .iter()
        .map(|s| (s.q0, s.mean_control))
        .collect()
}

/// Controls applied after an orbit has entered the safe set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PostEntry<T> {
    pub entry_steps: usize,
    pub max_control: T,
    /// Steps after entry whose successor was outside the safe set.
    pub exits: usize,
    pub escaped: bool,
}

/// Descends from `q0`, then keeps applying the descent controller for
/// `extra_steps` more steps and records the largest `|u_n|`.
pub fn post_entry_controls<T: Scalar>(
    sf: &SafetyFunction<T>,
    safe_set: &SafeSet<T>,
    q0: T,
    max_entry_steps: usize,
    extra_steps: usize,
    rng: &mut RngStream,
) -> Result<PostEntry<T>> {
    let d = descend(sf, safe_set, q0, max_entry_steps, rng)?;
    let problem = sf.problem();
    let ctrl = DescentController::new(sf);
    let mut q = problem.grid.point(d.entry_index);
    let mut max_control = T::zero();
    let mut exits = 0;
    let mut escaped = false;
    for _ in 0..extra_steps {
        let s = ctrl.step(problem, q, rng);
        max_control = max_control.max(s.control.abs());
        if !safe_set.contains(s.index) {
            exits += 1;
        }
        if !problem.grid.contains(s.next) {
            escaped = true;
        }
        q = s.next;
    }
    Ok(PostEntry {
        entry_steps: d.steps,
        max_control,
        exits,
        escaped,
    })
}

/// Spearman rank correlation with average ranks for ties. `None` if either
/// sample is constant or the lengths differ.
pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    fn ranks(x: &[f64]) -> Vec<f64> {
        let mut order: Vec<usize> = (0..x.len()).collect();
        order.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
        let mut r = vec![0.0; x.len()];
        let mut k = 0;
        while k < order.len() {
            let mut e = k;
            while e + 1 < order.len() && x[order[e + 1]] == x[order[k]] {
                e += 1;
            }
            let avg = (k + e) as f64 / 2.0 + 1.0;
            for &i in &order[k..=e] {
                r[i] = avg;
            }
            k = e + 1;
        }
        r
    }
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Safe-set summary for one parameter value of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow<T> {
    pub param: T,
    pub xi0: T,
    pub u0: T,
    /// `u0 / xi0`, absent when `xi0 = 0`.
    pub ratio: Option<T>,
    pub piece_count: usize,
    pub mean_gap: Option<T>,
    pub pieces: Vec<(T, T)>,
    /// Index `k` of the converged iterate; absent if the solver did not converge.
    pub iterations: Option<usize>,
    /// Solver error for this row, if any. Other fields then describe the last iterate.
    pub error: Option<String>,
}

fn sweep_row<T: Scalar>(
    param: T,
    problem: Problem<T>,
    options: SolverOptions,
    rule: MembershipRule,
) -> Result<SweepRow<T>> {
    let xi0 = problem.disturbance.bound();
    let (sf, iterations, error) = match compute_safety_function(&problem, options) {
        Ok(sf) => {
            let k = sf.iterations();
            (sf, Some(k), None)
        }
        Err(e @ Error::NonConvergence { .. }) => {
            let Error::NonConvergence {
                ref last, sweeps, ..
            } = e
            else {
                unreachable!()
            };
            let values = last.iter().map(|&v| T::lit(v)).collect();
            let sf = SafetyFunction::from_parts(problem, values, sweeps, T::zero())?;
            (sf, None, Some(e.to_string()))
        }
        Err(e) => return Err(e),
    };
    let u0 = min_control_bound(&sf);
    let ss = minimal_safe_set(&sf, rule);
    let stats = piece_stats(&ss, sf.grid());
    Ok(SweepRow {
        param,
        xi0,
        u0,
        ratio: (xi0 > T::zero()).then(|| u0 / xi0),
        piece_count: stats.piece_count,
        mean_gap: stats.mean_gap,
        pieces: ss.intervals(sf.grid()),
        iterations,
        error,
    })
}

/// Safe sets of `map` over a range of disturbance bounds. Rows are ordered
/// by `xi0` and are computed in parallel.
pub fn sweep_xi<T: Scalar>(
    map: MapSpec<T>,
    xi_values: &[T],
    grid: &Grid<T>,
    support_count: usize,
    options: SolverOptions,
    rule: MembershipRule,
) -> Result<Vec<SweepRow<T>>> {
    if let Some(bad) = xi_values.iter().find(|&&x| x.is_nan() || x <= T::zero()) {
        return Err(Error::InvalidConfig(format!(
            "sweep disturbance bounds must be > 0, got {bad}"
        )));
    }
    let mut xs = xi_values.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    xs.par_iter()
        .map(|&xi0| {
            let p = Problem::new(
                grid.clone(),
                map,
                DisturbanceModel::new(xi0, support_count)?,
            )?;
            sweep_row(xi0, p, options, rule)
        })
        .collect()
}

/// Safe sets of the tent map over a range of slopes at fixed `xi0`.
pub fn sweep_mu<T: Scalar>(
    xi0: T,
    mu_values: &[T],
    grid: &Grid<T>,
    support_count: usize,
    options: SolverOptions,
    rule: MembershipRule,
) -> Result<Vec<SweepRow<T>>> {
    let d = DisturbanceModel::new(xi0, support_count)?;
    let mut mus = mu_values.to_vec();
    if mus.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidConfig("sweep slopes must be finite".into()));
    }
    mus.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    mus.par_iter()
        .map(|&mu| {
            let p = Problem::new(grid.clone(), MapSpec::tent(mu), d)?;
            sweep_row(mu, p, options, rule)
        })
        .collect()
}

/// Midpoints between consecutive rows whose piece counts differ.
pub fn piece_count_changes<T: Scalar>(rows: &[SweepRow<T>]) -> Vec<T> {
    rows.windows(2)
        .filter(|w| w[0].piece_count != w[1].piece_count)
        .map(|w| (w[0].param + w[1].param) / T::lit(2.0))
        .collect()
}

/// `(M, u0, k)` for several disturbance resolutions of the same problem.
pub fn noise_resolution_study<T: Scalar>(
    grid: &Grid<T>,
    map: MapSpec<T>,
    xi0: T,
    support_counts: &[usize],
    options: SolverOptions,
) -> Result<Vec<(usize, T, usize)>> {
    support_counts
        .iter()
        .map(|&m| {
            let p = Problem::new(grid.clone(), map, DisturbanceModel::new(xi0, m)?)?;
            let sf = compute_safety_function(&p, options)?;
            Ok((m, min_control_bound(&sf), sf.iterations()))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (SafetyFunction<f64>, SafeSet<f64>) {
        let p = Problem::<f64>::tent(3.0, 0.05, 401, 21).unwrap();
        let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
        let ss = minimal_safe_set(&sf, MembershipRule::GridResolution);
        (sf, ss)
    }

    #[test]
    fn spaces() {
        assert_eq!(linspace(0.0, 1.0, 5), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let l = logspace::<f64>(0.005, 0.25, 50);
        assert_eq!((l[0], l[49]), (0.005, 0.25));
        assert!(l.windows(2).all(|w| w[1] > w[0]));
        assert!(((l[1] / l[0]) - (l[49] / l[48])).abs() < 1e-12);
    }

    #[test]
    fn ic_inside_safe_set_counts_zero() {
        let (sf, ss) = small();
        let i = ss.indices()[0];
        let mut r = RngStream::new(1, 0);
        let d = descend(&sf, &ss, sf.grid().point(i), 10, &mut r).unwrap();
        assert_eq!(d.steps, 0);
        assert_eq!(d.total_control, 0.0);
    }

    #[test]
    fn stats_are_finite_and_nonnegative() {
        let (sf, ss) = small();
        let st = convergence_stats(&sf, &ss, 41, 20, 50, 3).unwrap();
        assert_eq!(st.per_ic.len(), 41);
        assert_eq!(st.total_runs(), 41 * 20);
        for s in &st.per_ic {
            assert!(
                s.mean_iterations >= 0.0 && s.mean_control >= 0.0 && s.mean_control.is_finite()
            );
        }
        for (q0, c) in average_control_map(&st) {
            assert!(c.is_finite() && c >= 0.0, "{q0} {c}");
        }
        // every IC in the safe set reports zero
        for s in &st.per_ic {
            if ss.contains(sf.grid().nearest_index(s.q0)) {
                assert_eq!((s.mean_iterations, s.mean_control), (0.0, 0.0));
            }
        }
        assert!(
            st.per_ic.iter().map(|s| s.mean_control).fold(0.0, f64::max) >= min_control_bound(&sf)
        );
    }

    #[test]
    fn stats_do_not_depend_on_thread_schedule() {
        let (sf, ss) = small();
        let a = convergence_stats(&sf, &ss, 17, 5, 50, 99).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| convergence_stats(&sf, &ss, 17, 5, 50, 99).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn exceeding_max_steps_is_an_error() {
        let (sf, ss) = small();
        assert!(matches!(
            convergence_stats(&sf, &ss, 11, 2, 0, 1),
            Err(Error::Invariant(_))
        ));
    }

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), None);
        let r = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!(r > 0.9 && r < 1.0);
    }

    #[test]
    fn sweep_rows_are_consistent() {
        let g = Grid::<f64>::new(0.0, 1.0, 201).unwrap();
        let rows = sweep_xi(
            MapSpec::<f64>::tent(3.0),
            &[0.1, 0.02, 0.05],
            &g,
            11,
            SolverOptions::default(),
            MembershipRule::default(),
        )
        .unwrap();
        let params: Vec<f64> = rows.iter().map(|r| r.param).collect();
        assert_eq!(params, vec![0.02, 0.05, 0.1]);
        for r in &rows {
            let p = Problem::<f64>::tent(3.0, r.xi0, 201, 11).unwrap();
            let sf = compute_safety_function(&p, SolverOptions::default()).unwrap();
            assert_eq!(r.u0, min_control_bound(&sf));
            assert_eq!(r.ratio, Some(r.u0 / r.xi0));
            assert_eq!(r.pieces.len(), r.piece_count);
            assert!(r
                .pieces
                .iter()
                .all(|&(lo, hi)| (0.0..=1.0).contains(&lo) && lo <= hi && hi <= 1.0));
        }
        assert!(sweep_xi(
            MapSpec::<f64>::tent(3.0),
            &[0.0],
            &g,
            11,
            SolverOptions::default(),
            MembershipRule::default()
        )
        .is_err());
    }

    #[test]
    fn sweep_records_non_convergence() {
        let g = Grid::<f64>::new(0.0, 1.0, 101).unwrap();
        let opts = SolverOptions {
            max_sweeps: 1,
            ..Default::default()
        };
        let rows = sweep_mu(0.05, &[3.0, 4.0], &g, 11, opts, MembershipRule::default()).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.iterations.is_none() && r.error.is_some()));
    }

    #[test]
    fn changes_are_midpoints() {
        let row = |param, piece_count| SweepRow {
            param,
            xi0: 0.05,
            u0: 0.0,
            ratio: None,
            piece_count,
            mean_gap: None,
            pieces: vec![],
            iterations: Some(1),
            error: None,
        };
        let rows = vec![row(1.0, 4), row(2.0, 4), row(3.0, 2), row(4.0, 2)];
        assert_eq!(piece_count_changes(&rows), vec![2.5]);
    }

    #[test]
    fn resolution_study_reports_each_m() {
        let g = Grid::<f64>::new(0.0, 1.0, 201).unwrap();
        let rows = noise_resolution_study(
            &g,
            MapSpec::<f64>::tent(3.0),
            0.05,
            &[3, 11, 21],
            SolverOptions::default(),
        )
        .unwrap();
        assert_eq!(
            rows.iter().map(|r| r.0).collect::<Vec<_>>(),
            vec![3, 11, 21]
        );
        assert!(rows.iter().all(|r| r.1 > 0.0 && r.1 < 0.05));
    }
}
