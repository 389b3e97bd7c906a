//! Self-check suite behind `safeset verify`: oracle equivalence,
//! monotone convergence, tent symmetry, fixed-point stability and
//! replay determinism on randomly drawn small problems.

use crate::controllers::{simulate_orbit, ControllerKind, Monitor};
use crate::dynamics::{DisturbanceModel, Grid, MapSpec, Problem, RngStream};
use crate::error::Result;
use crate::oracle;
use crate::safety::{
    compute_safety_function, BellmanOperator, SolverOptions, UpdateStrategy, CONVERGENCE_TOL,
};

/// Entry-wise agreement required between solver and oracle.
pub const ORACLE_TOL: f64 = 1e-12;

/// Symmetry tolerance for tent maps on `[0, 1]`.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check {
            name,
            passed,
            detail,
        });
    }
}

/// Random small tent problem: `N <= 25`, `M <= 5`, `mu in [2, 6]`, `xi0 in [0.01, 0.2]`.
pub fn random_small_problem(rng: &mut RngStream) -> Result<Problem<f64>> {
    let n = 5 + (rng.unit() * 21.0) as usize; // 5..=25
    let m = if rng.unit() < 0.5 { 3 } else { 5 };
    let mu = 2.0 + 4.0 * rng.unit();
    let xi0 = 0.01 + 0.19 * rng.unit();
    Problem::new(
        Grid::new(0.0, 1.0, n)?,
        MapSpec::tent(mu),
        DisturbanceModel::new(xi0, m)?,
    )
}

/// Runs every check on `cases` random problems drawn from `seed`.
pub fn run_suite(cases: usize, seed: u64) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let mut oracle_worst = 0.0f64;
    let mut oracle_fail = None;
    let mut monotone_ok = true;
    let mut symmetry_worst = 0.0f64;
    let mut fixed_worst = 0.0f64;
    let mut max_k = 0;
    let mut determinism_ok = true;

    for case in 0..cases {
        let mut rng = RngStream::new(seed, case as u64);
        let p = random_small_problem(&mut rng)?;
        let sf = compute_safety_function(&p, SolverOptions::default())?;
        max_k = max_k.max(sf.iterations());

        match oracle::literal_fixed_point(&p, 10_000) {
            Some((reference, _)) => {
                let err = reference
                    .iter()
                    .zip(sf.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                oracle_worst = oracle_worst.max(err);
            }
            None => oracle_fail = Some(case),
        }

        let op = BellmanOperator::new(&p);
        let mut u = vec![0.0; p.grid.len()];
        for _ in 0..=sf.iterations() {
            let next = op.apply(&u, UpdateStrategy::Naive);
            monotone_ok &= next.iter().zip(&u).all(|(a, b)| a >= b);
            u = next;
        }

        let v = sf.values();
        for i in 0..v.len() {
            symmetry_worst = symmetry_worst.max((v[i] - v[v.len() - 1 - i]).abs());
        }
        fixed_worst = fixed_worst.max(sf.fixed_point_residual());

        let again = compute_safety_function(&p, SolverOptions::default())?;
        determinism_ok &= again == sf;
        let orbit = |s| {
            let mut r = RngStream::new(s, 0);
            simulate_orbit(
                &ControllerKind::Descent(&sf),
                &p,
                0.5,
                200,
                &mut r,
                &Monitor::none(),
            )
        };
        determinism_ok &= orbit(seed)? == orbit(seed)?;
    }

    report.push(
        "oracle_equivalence",
        oracle_fail.is_none() && oracle_worst <= ORACLE_TOL,
        match oracle_fail {
            Some(c) => format!("oracle did not terminate on case {c}"),
            None => format!("cases={cases} max_abs_diff={oracle_worst:e}"),
        },
    );
    report.push(
        "monotone_convergence",
        monotone_ok,
        format!("cases={cases}"),
    );
    report.push(
        "finite_termination",
        max_k < SolverOptions::default().max_sweeps,
        format!("max_k={max_k}"),
    );
    report.push(
        "tent_symmetry",
        symmetry_worst <= SYMMETRY_TOL,
        format!("max_abs_diff={symmetry_worst:e}"),
    );
    report.push(
        "fixed_point",
        fixed_worst <= CONVERGENCE_TOL,
        format!("max_residual={fixed_worst:e}"),
    );
    report.push("determinism", determinism_ok, format!("cases={cases}"));
    Ok(report)
}
