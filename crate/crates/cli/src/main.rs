use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::Deserialize;
use serde_json::Value;
use shiftfact::cholesky::{cholesky_tree_with, enumerate_permutation_cholesky, Factorisation};
use shiftfact::generator::GeneratorSpec;
use shiftfact::graphs::{
    cycle_schur_closed_form, cycle_schur_truncation_residual, edge_graph, has_cycle_geq, is_chordal, DirectedGraph,
    UndirectedGraph,
};
use shiftfact::json::{canonical_value, to_canonical};
use shiftfact::lqr::{
    build_operator_matrix, build_state_space, dp_riccati, interleaved_order, solve_lqr_with, verify_law,
};
use shiftfact::lqr::{DP_HORIZON, DP_TOL};
use shiftfact::solver::real_pattern;
use shiftfact::{Error, Network, OpMatrix, SparsityPattern, Tolerances};

const CHECK_TOL: f64 = 1e-9;
const CYCLE_TRUNCATION: usize = 96;
const CYCLE_INTERIOR: usize = 48;

#[derive(Parser)]
#[command(
    name = "shiftfact",
    version,
    about = "Factor shift-operator matrices and solve network LQR problems"
)]
struct Cli {
    #[command(flatten)]
    tol: TolArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct TolArgs {
    /// Coefficients at or below this magnitude are dropped
    #[arg(long, global = true, default_value_t = shiftfact::shift_algebra::ZERO_TOL)]
    zero_tol: f64,
    /// Slack allowed on non-negative partial sums
    #[arg(long, global = true, default_value_t = shiftfact::shift_algebra::PSD_TOL)]
    psd_tol: f64,
    /// Smallest partial sum treated as invertible
    #[arg(long, global = true, default_value_t = shiftfact::shift_algebra::INV_TOL)]
    inv_tol: f64,
}

impl TolArgs {
    fn tolerances(&self) -> Tolerances {
        Tolerances {
            zero_tol: self.zero_tol,
            psd_tol: self.psd_tol,
            inv_tol: self.inv_tol,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Factor an operator matrix or a graph-structured generator spec
    Factor {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Re-verify the factorisation identity and fill-in freedom
        #[arg(long)]
        check: bool,
    },
    /// Solve the discounted LQR problem of a transport network
    Lqr {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Compare against value iteration on the Riccati equation
        #[arg(long)]
        oracle: bool,
        /// Print sparsity grids of the law
        #[arg(long)]
        pattern: bool,
        /// Print grids as comma separated 0/1 rows
        #[arg(long)]
        csv: bool,
    },
    /// Relate long cycles of a graph to chordality of its edge graph
    Chordal {
        #[arg(long)]
        input: PathBuf,
    },
    /// Schur complement of the cycle matrix
    CycleDemo {
        #[arg(long, value_parser = clap::value_parser!(u32).range(3..=8))]
        n: u32,
    },
    /// Column orderings of a line network with no sparse spectral factor
    SpectralDemo,
}

enum Failure {
    Core(Error),
    Schema(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Schema(_) => 3,
            Failure::Io(_) => 1,
            Failure::Core(e) => match e {
                Error::NoLeafEdge
                | Error::NotAForest
                | Error::MalformedColumn { .. }
                | Error::PreconditionViolated(_)
                | Error::NotTwoTermShape(_)
                | Error::NotInRInf { .. }
                | Error::TooLarge(_) => 2,
                Error::Schema(_)
                | Error::DimensionMismatch(_)
                | Error::InvalidGraph(_)
                | Error::InvalidPermutation(_)
                | Error::InvalidDiscount(_)
                | Error::WindowTooShort { .. } => 3,
                Error::Singular { .. }
                | Error::NotPsd { .. }
                | Error::NoConvergence { .. }
                | Error::Indefinite
                | Error::VerificationFailed(_) => 4,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Core(Error::NoLeafEdge) => {
                "no leaf edge: the sparsity graph has a cycle, and only forests admit a fill-in free factor".into()
            }
            Failure::Core(e) => e.to_string(),
            Failure::Schema(m) => format!("invalid input: {m}"),
            Failure::Io(m) => m.clone(),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

fn read_json(path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Schema(format!("{}: {e}", path.display())))
}

fn parse<T: for<'de> Deserialize<'de>>(v: Value) -> CliResult<T> {
    serde_json::from_value(v).map_err(|e| Failure::Schema(e.to_string()))
}

fn emit(text: &str, output: Option<&Path>) -> CliResult<()> {
    match output {
        Some(p) => fs::write(p, format!("{text}\n")).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn load_matrix(v: Value) -> CliResult<OpMatrix> {
    if v.get("graph").is_some() {
        Ok(parse::<GeneratorSpec>(v)?.build()?)
    } else {
        parse(v)
    }
}

fn recheck(m: &OpMatrix, f: &Factorisation) -> CliResult<()> {
    let gram = m.permute_cols(&f.p)?.gram();
    let resid = f.l.matmul(&f.l.adjoint())?.max_abs_diff(&gram)?;
    let scale = gram.max_abs_coeff().max(1.0);
    if resid > CHECK_TOL * scale {
        return Err(Error::VerificationFailed(format!("residual {resid:e}")).into());
    }
    if !gram.sparsity().dominates(&f.l.sparsity())? {
        return Err(Error::VerificationFailed("factor has fill-in".into()).into());
    }
    eprintln!("check passed: residual {resid:.3e}, no fill-in");
    Ok(())
}

fn cmd_factor(input: &Path, output: Option<&Path>, check: bool, tol: &Tolerances) -> CliResult<()> {
    let m = load_matrix(read_json(input)?)?;
    let f = cholesky_tree_with(&m, tol)?;
    if check {
        recheck(&m, &f)?;
    }
    emit(&to_canonical(&f)?, output)
}

/// Network file as written by users; parsed loosely so that structural
/// problems are reported apart from malformed JSON.
#[derive(Deserialize)]
struct NetworkInput {
    vertices: usize,
    arcs: Vec<ArcInput>,
    discount: f64,
}

#[derive(Deserialize)]
struct ArcInput {
    from: usize,
    to: usize,
}

fn load_network(v: Value) -> CliResult<Network> {
    let raw: NetworkInput = parse(v)?;
    let g = DirectedGraph::new(raw.vertices, raw.arcs.iter().map(|a| (a.from, a.to)).collect())?;
    Ok(Network::new(g, raw.discount)?)
}

fn grid(p: &SparsityPattern, csv: bool) -> String {
    if csv {
        p.render_csv()
    } else {
        p.render()
    }
}

fn patterns(net: &Network, law: &shiftfact::ControlLaw, csv: bool) -> String {
    let order = interleaved_order(net);
    let mut out = String::new();
    if let Some(k1) = &law.K1 {
        let _ = writeln!(out, "K1 ({}x{})", k1.nrows(), k1.ncols());
        out.push_str(&grid(&real_pattern(k1), csv));
    }
    let k2 = law.K2.select_columns(order.image());
    let _ = writeln!(out, "K2 ({}x{}, states v0 a0 v1 a1 ...)", k2.nrows(), k2.ncols());
    out.push_str(&grid(&real_pattern(&k2), csv));
    if law.K1.is_none() {
        let k = law.K.select_columns(order.image());
        let _ = writeln!(out, "K ({}x{}, states v0 a0 v1 a1 ...)", k.nrows(), k.ncols());
        out.push_str(&grid(&real_pattern(&k), csv));
    }
    out
}

fn cmd_lqr(
    input: &Path,
    output: Option<&Path>,
    oracle: bool,
    pattern: bool,
    csv: bool,
    tol: &Tolerances,
) -> CliResult<()> {
    let net = load_network(read_json(input)?)?;
    let law = solve_lqr_with(&net, tol)?;
    let mut doc = serde_json::to_value(&law).map_err(|e| Failure::Schema(e.to_string()))?;
    if oracle {
        let ss = build_state_space(&net);
        let sol = dp_riccati(&ss, net.discount(), DP_HORIZON, DP_TOL)?;
        let report = verify_law(&net, &ss, &law, &sol, 0)?;
        let report = serde_json::to_value(&report).map_err(|e| Failure::Schema(e.to_string()))?;
        if let Value::Object(map) = &mut doc {
            map.insert("oracle".into(), report);
        }
    }
    emit(&canonical_value(&doc), output)?;
    if pattern || csv {
        print!("{}", patterns(&net, &law, csv));
    }
    Ok(())
}

fn cmd_chordal(input: &Path) -> CliResult<()> {
    let g: UndirectedGraph = parse(read_json(input)?)?;
    let long_cycle = has_cycle_geq(&g, 4)?;
    let chordal = is_chordal(&edge_graph(&g));
    println!("is tree: {}", g.is_tree());
    println!("cycle >= 4: {long_cycle}, edge graph chordal: {chordal}");
    println!("equivalence holds: {}", long_cycle != chordal);
    Ok(())
}

fn cmd_cycle_demo(n: usize) -> CliResult<()> {
    let s = cycle_schur_closed_form(n)?;
    println!("Schur complement of the last column, n = {n}:");
    for (m, c) in s.terms() {
        println!("  (q*)^{} q^{}: {c:.12}", m.istar, m.j);
    }
    println!("in R_inf: {}", s.is_rinf());
    let resid = cycle_schur_truncation_residual(n, CYCLE_TRUNCATION, CYCLE_INTERIOR)?;
    println!("truncation residual (T = {CYCLE_TRUNCATION}, leading {CYCLE_INTERIOR}): {resid:.3e}");
    Ok(())
}

fn print_matrix(m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        let row: Vec<String> = m
            .row(i)
            .iter()
            .map(|&x| format!("{:>9.6}", if x.abs() < 5e-7 { 0.0 } else { x }))
            .collect();
        println!("  {}", row.join(" "));
    }
}

fn cmd_spectral_demo() -> CliResult<()> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let g = DirectedGraph::new(5, vec![(0, 1), (1, 2), (3, 2), (4, 3)])?;
    let net = Network::new(g, r)?;
    let m = build_operator_matrix(&net);
    println!("limit of the Gram matrix N:");
    print_matrix(&m.gram().coefficient_sum());
    let report = enumerate_permutation_cholesky(&m)?;
    println!("{} / {} orderings sparsity-compatible", report.compatible, report.total);
    for o in report.orderings.iter().filter(|o| o.compatible) {
        let diag = o.diag_qstarq.as_deref().unwrap_or(&[]);
        let coeffs: Vec<String> = diag.iter().map(|c| format!("{c:.6}")).collect();
        println!(
            "  order {:?}: q*q diagonal coefficients [{}]",
            o.perm.image(),
            coeffs.join(", ")
        );
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    let tol = cli.tol.tolerances();
    match cli.command {
        Command::Factor { input, output, check } => cmd_factor(&input, output.as_deref(), check, &tol),
        Command::Lqr {
            input,
            output,
            oracle,
            pattern,
            csv,
        } => cmd_lqr(&input, output.as_deref(), oracle, pattern, csv, &tol),
        Command::Chordal { input } => cmd_chordal(&input),
        Command::CycleDemo { n } => cmd_cycle_demo(n as usize),
        Command::SpectralDemo => cmd_spectral_demo(),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.exit_code())
        }
    }
}
