//! The four commands. Each returns the human-readable report and a CSV table
//! with fixed columns.

use std::fmt::Write as _;
use std::time::Instant;

use fermigrade_core::groupfn::{self, EvalOptions};
use fermigrade_core::ortho::{self, ArakiOperator};
use fermigrade_core::{internal_space, Complex64, MixedState, QOperator, Tolerances};

use crate::input::{format_complex, format_f64, StateFile};
use crate::CliError;

pub const GRADE_COLUMNS: &[&str] = &["p", "orthogonal", "max_overlap"];
pub const ARAKI_COLUMNS: &[&str] = &["p", "theta_rad", "theta_deg", "multiplicity", "dim_first", "dim_second"];
pub const MATELEM_COLUMNS: &[&str] =
    &["bra", "ket", "operator_rank", "q", "re", "im", "plans", "sequences", "inner_sequences", "seconds"];
pub const INTERNAL_COLUMNS: &[&str] = &["vector", "occupation", "re", "im"];

#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

fn describe(name: &str, s: &MixedState) -> String {
    let k = s.components().len();
    let comps = if k == 1 { "pure".to_string() } else { format!("{k} components") };
    format!("{name} ({} particles, {comps})", s.n())
}

fn sci(x: f64) -> String {
    format!("{x:.15e}")
}

fn value(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{sign}{}i", sci(z.re), sci(z.im.abs()))
}

/// Per-p verdicts and the orthogonality grade.
pub fn grade(file: &StateFile, first: &str, second: &str, tol: &Tolerances) -> Result<Output, CliError> {
    let s1 = file.mixed(first)?;
    let s2 = file.mixed(second)?;
    let report = ortho::grade(&s1, &s2, tol)?;
    let mut text = String::new();
    let _ = writeln!(text, "first:  {}", describe(first, &s1));
    let _ = writeln!(text, "second: {}", describe(second, &s2));
    let _ = writeln!(text, "{:>4}  {:<10}  max overlap", "p", "orthogonal");
    let mut rows = Vec::new();
    for v in &report.verdicts {
        let yes = if v.orthogonal { "yes" } else { "no" };
        let _ = writeln!(text, "{:>4}  {:<10}  {}", v.p, yes, sci(v.max_overlap));
        rows.push(vec![v.p.to_string(), v.orthogonal.to_string(), sci(v.max_overlap)]);
    }
    match report.grade {
        Some(g) => {
            let _ = writeln!(text, "grade = {g}");
        }
        None => {
            let _ = writeln!(text, "grade = none");
        }
    }
    Ok(Output { text, columns: GRADE_COLUMNS, rows })
}

/// Araki angles between the p-internal spaces, with the dimensions of each
/// angle block and of its intersections with the two spaces.
pub fn araki(file: &StateFile, first: &str, second: &str, p: usize, tol: &Tolerances) -> Result<Output, CliError> {
    let s1 = file.mixed(first)?;
    let s2 = file.mixed(second)?;
    let i1 = internal_space(&s1, p, tol)?;
    let i2 = internal_space(&s2, p, tol)?;
    let op = ArakiOperator::new(&i1, &i2, tol)?;
    let blocks = op.decomposition();
    let mut text = String::new();
    let _ = writeln!(text, "first:  {}", describe(first, &s1));
    let _ = writeln!(text, "second: {}", describe(second, &s2));
    let _ = writeln!(text, "p = {p}, dim I1 = {}, dim I2 = {}, dim E = {}", i1.dim(), i2.dim(), op.dim_e());
    let _ = writeln!(
        text,
        "{:>18}  {:>11}  {:>5}  {:>6}  {:>6}",
        "theta (rad)", "theta (deg)", "mult", "in I1", "in I2"
    );
    let mut rows = Vec::new();
    for b in &blocks {
        let rad = format!("{:.15}", b.theta);
        let deg = format!("{:.6}", b.theta.to_degrees());
        let (m, d1, d2) = (b.v.dim(), b.first.dim(), b.second.dim());
        let _ = writeln!(text, "{rad:>18}  {deg:>11}  {m:>5}  {d1:>6}  {d2:>6}");
        rows.push(vec![p.to_string(), rad, deg, m.to_string(), d1.to_string(), d2.to_string()]);
    }
    let _ = writeln!(text, "identity residual = {:.1e}", op.identity_residual());
    Ok(Output { text, columns: ARAKI_COLUMNS, rows })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatelemOptions {
    pub q: Option<usize>,
    pub verify: bool,
    pub report_terms: bool,
    pub threads: usize,
}

/// `⟨bra|H|ket⟩`, or the overlap when no operator is given.
pub fn matelem(
    file: &StateFile,
    bra_name: &str,
    ket_name: &str,
    op: Option<&QOperator>,
    options: &MatelemOptions,
    tol: &Tolerances,
) -> Result<Output, CliError> {
    let bra = file.group(bra_name)?;
    let ket = file.group(ket_name)?;
    let opts = EvalOptions { q: options.q, verify: options.verify, threads: options.threads.max(1), tol: *tol };
    let start = Instant::now();
    let eval = match op {
        Some(op) => groupfn::matelem_with(&bra, op, &ket, &opts)?,
        None => groupfn::overlap_group_with(&bra, &ket, &opts)?,
    };
    let seconds = start.elapsed().as_secs_f64();

    let sizes = |s: Vec<usize>| s.iter().map(usize::to_string).collect::<Vec<_>>().join("+");
    let mut text = String::new();
    let _ = writeln!(text, "bra: {bra_name} ({} particles as {})", bra.n(), sizes(bra.sizes()));
    let _ = writeln!(text, "ket: {ket_name} ({} particles as {})", ket.n(), sizes(ket.sizes()));
    match op {
        Some(op) => {
            let _ = writeln!(text, "operator: rank {}, {} terms", op.q(), op.terms().count());
        }
        None => {
            let _ = writeln!(text, "operator: none (overlap)");
        }
    }
    match options.q {
        Some(q) if options.verify => {
            let _ = writeln!(text, "sums: restricted by declared {q}-orthogonality (verified)");
        }
        Some(q) => {
            let _ = writeln!(text, "sums: restricted by declared {q}-orthogonality (not verified)");
        }
        None => {
            let _ = writeln!(text, "sums: full");
        }
    }
    let _ = writeln!(text, "value = {}", value(eval.value));
    if options.report_terms {
        let s = &eval.stats;
        let _ = writeln!(text, "plans = {}", s.plans);
        let _ = writeln!(text, "sequences = {}", s.sequences);
        if op.is_some() {
            let _ = writeln!(text, "inner sequences = {}", s.inner_sequences);
        }
        let n1 = bra.sizes()[0];
        if op.is_none() && bra.r() > 1 {
            let q = options.q.unwrap_or(n1).clamp(1, n1);
            let (total, kept) = groupfn::term_count(bra.n(), n1, q)?;
            let expected = if options.q.is_some() { kept } else { total };
            let _ = writeln!(
                text,
                "term count (n = {}, n1 = {n1}, q = {q}): total {total}, restricted {kept}, expected here {expected}",
                bra.n()
            );
        }
    }
    let _ = writeln!(text, "time = {seconds:.6} s");

    let row = vec![
        bra_name.to_string(),
        ket_name.to_string(),
        op.map_or(String::new(), |o| o.q().to_string()),
        options.q.map_or(String::new(), |q| q.to_string()),
        format_f64(eval.value.re),
        format_f64(eval.value.im),
        eval.stats.plans.to_string(),
        eval.stats.sequences.to_string(),
        eval.stats.inner_sequences.to_string(),
        format!("{seconds:.6}"),
    ];
    Ok(Output { text, columns: MATELEM_COLUMNS, rows: vec![row] })
}

/// Orthonormal basis of the p-internal space, written as state blocks that
/// can be read back as a state file.
pub fn internal(file: &StateFile, name: &str, p: usize, tol: &Tolerances) -> Result<Output, CliError> {
    let s = file.mixed(name)?;
    let space = internal_space(&s, p, tol)?;
    let mut text = String::new();
    let _ = writeln!(text, "# {}", describe(name, &s));
    let _ = writeln!(text, "# p = {p}, dim = {}", space.dim());
    let _ = writeln!(text, "basis {}", file.dim);
    let mut rows = Vec::new();
    for (k, v) in space.vectors().iter().enumerate() {
        let label = format!("v{}", k + 1);
        let _ = writeln!(text, "\nstate {label}");
        for (occ, c) in v.terms() {
            let idx = occ.indices();
            let list = idx.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
            let _ = writeln!(text, "  {} [{list}]", format_complex(*c));
            rows.push(vec![label.clone(), list, format_f64(c.re), format_f64(c.im)]);
        }
        let _ = writeln!(text, "end");
    }
    Ok(Output { text, columns: INTERNAL_COLUMNS, rows })
}
