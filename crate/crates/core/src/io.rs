//! CSV formats: safety functions (with a `#` metadata header), orbits,
//! sweeps and convergence statistics. Reals are written with enough
//! significant digits for a lossless round trip (17 for `f64`).

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::controllers::OrbitRecord;
use crate::dynamics::{DisturbanceModel, Grid, MapSpec, Problem};
use crate::error::{Error, Result};
use crate::experiments::{ConvergenceStats, SweepRow};
use crate::safety::{min_control_bound, SafetyFunction};
use crate::scalar::{format_round_trip, Scalar};

pub const SAFETY_FORMAT: &str = "safeset-safety-function";
pub const SAFETY_FORMAT_VERSION: u32 = 1;
pub const SAFETY_COLUMNS: &str = "i,q,U";
pub const ORBIT_COLUMNS: &str = "n,q,xi,u,q_next,U_next,in_safe";
pub const SWEEP_COLUMNS: &str = "param,u0,ratio,k,n_pieces,mean_gap,pieces";
pub const STATS_COLUMNS: &str = "q0,mean_iters,mean_control,runs";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn fmt<T: Scalar>(x: T) -> String {
    format_round_trip(x)
}

fn fmt_opt<T: Scalar>(x: Option<T>) -> String {
    x.map(fmt).unwrap_or_default()
}

pub fn write_safety_function<T: Scalar, W: Write>(
    sf: &SafetyFunction<T>,
    mut w: W,
) -> std::io::Result<()> {
    let p = sf.problem();
    writeln!(w, "# format={SAFETY_FORMAT}")?;
    writeln!(w, "# format_version={SAFETY_FORMAT_VERSION}")?;
    writeln!(w, "# map={}", p.map.name())?;
    match p.map {
        MapSpec::Tent { mu } => writeln!(w, "# mu={}", fmt(mu))?,
        MapSpec::Constant { c } => writeln!(w, "# c={}", fmt(c))?,
    }
    writeln!(w, "# q_lo={}", fmt(p.grid.lower()))?;
    writeln!(w, "# q_hi={}", fmt(p.grid.upper()))?;
    writeln!(w, "# xi0={}", fmt(p.disturbance.bound()))?;
    writeln!(w, "# n={}", p.grid.len())?;
    writeln!(w, "# m={}", p.disturbance.support_count())?;
    writeln!(w, "# k={}", sf.iterations())?;
    writeln!(w, "# tolerance={}", fmt(sf.tolerance()))?;
    writeln!(w, "# u_min={}", fmt(min_control_bound(sf)))?;
    writeln!(w, "{SAFETY_COLUMNS}")?;
    for (i, (&q, &u)) in p.grid.points().iter().zip(sf.values()).enumerate() {
        writeln!(w, "{i},{},{}", fmt(q), fmt(u))?;
    }
    w.flush()
}

pub fn store_safety_function<T: Scalar>(sf: &SafetyFunction<T>, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    write_safety_function(sf, BufWriter::new(f)).map_err(io_err(path))
}

pub fn load_safety_function<T: Scalar>(path: &Path) -> Result<SafetyFunction<T>> {
    let f = File::open(path).map_err(io_err(path))?;
    read_safety_function(BufReader::new(f), &path.display().to_string())
}

/// Parses the safety-function CSV. `source` names the input in errors.
pub fn read_safety_function<T: Scalar, R: BufRead>(
    r: R,
    source: &str,
) -> Result<SafetyFunction<T>> {
    let fail = |line: usize, msg: String| Error::Format {
        path: source.to_string(),
        line,
        msg,
    };
    let mut lines = r.lines().enumerate().map(|(i, l)| (i + 1, l));
    let mut meta: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut header_line = 0;
    let mut line_count = 0;
    for (no, line) in lines.by_ref() {
        line_count = no;
        let line = line.map_err(|e| fail(no, e.to_string()))?;
        let line = line.trim_end();
        if let Some(kv) = line.strip_prefix('#') {
            let (k, v) = kv
                .trim()
                .split_once('=')
                .ok_or_else(|| fail(no, format!("malformed metadata line {line:?}")))?;
            meta.insert(k.trim().to_string(), (no, v.trim().to_string()));
            continue;
        }
        if line != SAFETY_COLUMNS {
            return Err(fail(
                no,
                format!("expected column header {SAFETY_COLUMNS:?}, found {line:?}"),
            ));
        }
        header_line = no;
        break;
    }
    if header_line == 0 {
        return Err(fail(line_count + 1, "missing column header".into()));
    }
    let get = |key: &str| -> Result<(usize, &str)> {
        meta.get(key)
            .map(|(l, v)| (*l, v.as_str()))
            .ok_or_else(|| fail(header_line, format!("missing metadata key {key:?}")))
    };
    fn parse<X: std::str::FromStr>(v: &str, key: &str, line: usize, source: &str) -> Result<X> {
        v.parse().map_err(|_| Error::Format {
            path: source.to_string(),
            line,
            msg: format!("cannot parse {key}={v:?}"),
        })
    }
    let num = |key: &str| -> Result<T> {
        let (l, v) = get(key)?;
        parse(v, key, l, source)
    };
    let int = |key: &str| -> Result<usize> {
        let (l, v) = get(key)?;
        parse(v, key, l, source)
    };

    let (l, fmt_name) = get("format")?;
    if fmt_name != SAFETY_FORMAT {
        return Err(fail(l, format!("unknown format {fmt_name:?}")));
    }
    let (l, version) = get("format_version")?;
    if version != SAFETY_FORMAT_VERSION.to_string() {
        return Err(fail(l, format!("unsupported format_version {version}")));
    }
    let (l, kind) = get("map")?;
    let map = match kind {
        "tent" => MapSpec::tent(num("mu")?),
        "constant" => MapSpec::constant(num("c")?),
        other => return Err(fail(l, format!("unknown map kind {other:?}"))),
    };
    let n = int("n")?;
    let n_line = get("n")?.0;
    let m_line = get("m")?.0;
    let problem = Problem::new(
        Grid::new(num("q_lo")?, num("q_hi")?, n).map_err(|e| fail(n_line, e.to_string()))?,
        map,
        DisturbanceModel::new(num("xi0")?, int("m")?).map_err(|e| fail(m_line, e.to_string()))?,
    )
    .map_err(|e| fail(l, e.to_string()))?;
    let k = int("k")?;
    let tolerance = num("tolerance")?;

    let mut values = Vec::with_capacity(n);
    let mut last_line = header_line;
    for (no, line) in lines {
        last_line = no;
        let line = line.map_err(|e| fail(no, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let i = values.len();
        if i == n {
            return Err(fail(no, format!("more rows than n={n}")));
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(fail(
                no,
                format!("expected 3 columns, found {}", cols.len()),
            ));
        }
        let idx: usize = parse(cols[0], "i", no, source)?;
        if idx != i {
            return Err(fail(no, format!("expected row i={i}, found i={idx}")));
        }
        let q: T = parse(cols[1], "q", no, source)?;
        let grid_q = problem.grid.point(i);
        if (q - grid_q).abs() > T::lit(1e-12) * grid_q.abs().max(T::one()) {
            return Err(fail(
                no,
                format!("q={q} does not match grid point {grid_q}"),
            ));
        }
        values.push(parse::<T>(cols[2], "U", no, source)?);
    }
    if values.len() < n {
        return Err(fail(
            last_line + 1,
            format!(
                "missing row i={} (file has {} of {n} rows)",
                values.len(),
                values.len()
            ),
        ));
    }
    SafetyFunction::from_parts(problem, values, k, tolerance)
        .map_err(|e| fail(header_line, e.to_string()))
}

pub fn write_orbit<T: Scalar, W: Write>(rec: &OrbitRecord<T>, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{ORBIT_COLUMNS}")?;
    for s in &rec.steps {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            s.n,
            fmt(s.q),
            fmt(s.xi),
            fmt(s.u),
            fmt(s.q_next),
            fmt_opt(s.value_next),
            s.in_safe
        )?;
    }
    w.flush()
}

pub fn write_sweep<T: Scalar, W: Write>(rows: &[SweepRow<T>], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SWEEP_COLUMNS}")?;
    for r in rows {
        let pieces: Vec<String> = r
            .pieces
            .iter()
            .map(|&(lo, hi)| format!("{}:{}", fmt(lo), fmt(hi)))
            .collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            fmt(r.param),
            fmt(r.u0),
            fmt_opt(r.ratio),
            r.iterations.map(|k| k.to_string()).unwrap_or_default(),
            r.piece_count,
            fmt_opt(r.mean_gap),
            pieces.join(";")
        )?;
    }
    w.flush()
}

pub fn write_stats<T: Scalar, W: Write>(
    stats: &ConvergenceStats<T>,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "{STATS_COLUMNS}")?;
    for s in &stats.per_ic {
        writeln!(
            w,
            "{},{},{},{}",
            fmt(s.q0),
            fmt(s.mean_iterations),
            fmt(s.mean_control),
            s.runs
        )?;
    }
    w.flush()
}

/// Writes through `write` into a file at `path`.
pub fn write_file(
    path: &Path,
    write: impl FnOnce(BufWriter<File>) -> std::io::Result<()>,
) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    write(BufWriter::new(f)).map_err(io_err(path))
}
