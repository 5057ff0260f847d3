//! `bckp` — exact calculus for the odd flows of the constrained KP
//! sub-hierarchies, on the command line.
//!
//! Derivation subcommands (`elim`, `flow`, `reduce`, `reduced-flow`,
//! `recursion`, `apply-recursion`, `scale`) print `lhs = value` records in
//! the same tagged grammar the fixture files use, so any printed line can be
//! pasted into a fixture and re-checked with `verify`.  Results go to
//! stdout, diagnostics to stderr; identical invocations produce
//! byte-identical output.
//!
//! Exit codes: 0 success, 1 domain error (the computation itself refused,
//! e.g. a non-integrable right-hand side) or failed verification, 2 usage
//! error.  Domain errors name the failing operation and error variant so
//! scripts can triage without scraping prose.

mod emit;
mod fixtures;

use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

use bckp::{
    eliminate_odd, flow, hat_phi_operator, kp_phi_operator, phi_action, reduce, reduced_flow,
    scaling_transform, CalcError, DiffPoly, HierarchyKind, Rational, RecursionContext,
};
use emit::{render_line, Format, Rendered};

#[derive(Parser)]
#[command(
    name = "bckp",
    version,
    about = "Exact pseudo-differential calculus for the BKP/CKP odd flows"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Bkp,
    Ckp,
    Kp,
}

impl From<KindArg> for HierarchyKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Bkp => HierarchyKind::Bkp,
            KindArg::Ckp => HierarchyKind::Ckp,
            KindArg::Kp => HierarchyKind::Kp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Latex,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => Format::Text,
            FormatArg::Latex => Format::Latex,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Operator,
    Action,
}

#[derive(Subcommand)]
enum Command {
    /// Print the elimination binding of the odd variable u_{2l+1}.
    Elim {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Row of the elimination table; prints u_{2l+1}.
        #[arg(long)]
        l: u32,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Print the unreduced flow of u_{2j} along t_{2m+1}.
    Flow {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Variable index half: the flow of u_{2j}.
        #[arg(long)]
        j: u32,
        /// Time index half: the t_{2m+1} flow.
        #[arg(long)]
        m: u32,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Print the dependent-variable bindings of the (2n+1)-reduction.
    Reduce {
        #[arg(long, value_enum)]
        kind: KindArg,
        /// Reduction order parameter: imposes L^(2n+1) purely differential.
        #[arg(long)]
        n: u32,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Print the reduced flow of u_{2j} along t_{2m+1}.
    ReducedFlow {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 1)]
        j: u32,
        #[arg(long)]
        m: u32,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Print the recursion matrices Phi(2n+1) and, for bkp/ckp, hat-Phi(2n+1).
    Recursion {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: u32,
        /// Output selection; the action path lives under `apply-recursion`.
        #[arg(long, value_enum, default_value = "operator")]
        form: FormArg,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Apply the lifted recursion matrix `reps` times to the t1 flow vector.
    ApplyRecursion {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: u32,
        /// Number of Phi applications; two per recursion step, so even.
        #[arg(long, default_value_t = 2)]
        reps: u32,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Rescale a reduced flow: u2 -> u_scale * u2 and d/dt -> (1/t_scale) d/dt.
    Scale {
        #[arg(long, value_enum)]
        kind: KindArg,
        #[arg(long)]
        n: u32,
        #[arg(long, default_value_t = 1)]
        j: u32,
        #[arg(long)]
        m: u32,
        /// Rational factor, e.g. 1/3.
        #[arg(long, allow_hyphen_values = true)]
        u_scale: String,
        /// Rational factor, e.g. -1/27.
        #[arg(long, allow_hyphen_values = true)]
        t_scale: String,
        #[arg(long, value_enum, default_value = "text")]
        format: FormatArg,
    },
    /// Recompute and check every fixture record under a file or directory.
    Verify {
        #[arg(long)]
        fixtures: PathBuf,
    },
}

enum RunError {
    /// Bad parameters for the requested command (exit 2).
    Usage(String),
    /// The computation itself refused (exit 1).
    Domain { op: &'static str, err: CalcError },
}

/// Result lines plus the number of failed verification entries (zero for
/// every command except a failing `verify`).
struct Output {
    lines: Vec<String>,
    failed_entries: usize,
}

impl Output {
    fn lines(lines: Vec<String>) -> Self {
        Output { lines, failed_entries: 0 }
    }
}

fn error_name(err: &CalcError) -> &'static str {
    match err {
        CalcError::NotExact(_) => "NotExact",
        CalcError::InsufficientCutoff(_) => "InsufficientCutoff",
        CalcError::TooNonlocal(_) => "TooNonlocal",
        CalcError::SelfReferential(_) => "SelfReferential",
        CalcError::MissingFlow(_) => "MissingFlow",
        CalcError::ZeroPolynomial => "ZeroPolynomial",
        CalcError::Inhomogeneous(_, _) => "Inhomogeneous",
        CalcError::NegativeJ(_) => "NegativeJ",
        CalcError::BadIndex(_) => "BadIndex",
        CalcError::NonlinearPivot(_) => "NonlinearPivot",
    }
}

fn constrained(kind: KindArg, command: &'static str) -> Result<HierarchyKind, RunError> {
    match kind {
        KindArg::Kp => Err(RunError::Usage(format!(
            "`{command}` needs --kind bkp or --kind ckp: the kp hierarchy carries no \
             adjoint constraint, so this derivation is undefined for it"
        ))),
        other => Ok(other.into()),
    }
}

fn domain(op: &'static str) -> impl FnOnce(CalcError) -> RunError {
    move |err| RunError::Domain { op, err }
}

fn run(cli: Cli) -> Result<Output, RunError> {
    match cli.command {
        Command::Elim { kind, l, format } => {
            let kind = constrained(kind, "elim")?;
            if l == 0 {
                return Err(RunError::Usage("--l must be at least 1".into()));
            }
            let odd = 2 * l + 1;
            let table = eliminate_odd(kind, odd).map_err(domain("elim"))?;
            let value = Rendered::Poly(table.bindings()[&odd].clone());
            Ok(Output::lines(vec![render_line(&format!("u{odd}"), &value, format.into())]))
        }
        Command::Flow { kind, j, m, format } => {
            let kind = constrained(kind, "flow")?;
            if j == 0 {
                return Err(RunError::Usage("--j must be at least 1".into()));
            }
            let f = flow(kind, j, m, 2 * (j + m) + 1).map_err(domain("flow"))?;
            let lhs = format!("u{}_t{}", 2 * j, 2 * m + 1);
            Ok(Output::lines(vec![render_line(&lhs, &Rendered::Poly(f), format.into())]))
        }
        Command::Reduce { kind, n, format } => {
            let kind = constrained(kind, "reduce")?;
            if n == 0 {
                return Err(RunError::Usage("--n must be at least 1".into()));
            }
            // Three dependent variables, matching the printed tables.
            let red = reduce(kind, n, 2 * n + 6).map_err(domain("reduce"))?;
            let v = 2 * n + 1;
            let mut lines = Vec::new();
            for (index, binding) in red.bindings() {
                let lhs = format!("u{index}@red{v}");
                lines.push(render_line(&lhs, &Rendered::Poly(binding.clone()), format.into()));
            }
            Ok(Output::lines(lines))
        }
        Command::ReducedFlow { kind, n, j, m, format } => {
            let kind = constrained(kind, "reduced-flow")?;
            if n == 0 || j == 0 || j > n {
                return Err(RunError::Usage(format!(
                    "reduced coordinates are u2..u{}: need 1 <= j <= n",
                    2 * n
                )));
            }
            let f = reduced_flow(kind, n, j, m).map_err(domain("reduced-flow"))?;
            let lhs = format!("u{}_t{}@red{}", 2 * j, 2 * m + 1, 2 * n + 1);
            Ok(Output::lines(vec![render_line(&lhs, &Rendered::Poly(f), format.into())]))
        }
        Command::Recursion { kind, n, form, format } => {
            if matches!(form, FormArg::Action) {
                return Err(RunError::Usage(
                    "--form action is served by `apply-recursion`, which takes the flow \
                     vector arguments"
                        .into(),
                ));
            }
            if n == 0 {
                return Err(RunError::Usage("--n must be at least 1".into()));
            }
            let hkind: HierarchyKind = kind.into();
            let v = 2 * n + 1;
            let ctx = RecursionContext::new(hkind, n).map_err(domain("recursion"))?;
            let phi = kp_phi_operator(&ctx).map_err(domain("recursion"))?;
            let mut lines = Vec::new();
            for a in 1..=phi.rows() {
                for b in 1..=phi.cols() {
                    let lhs = format!("phi{a}{b}@red{v}");
                    lines.push(render_line(
                        &lhs,
                        &Rendered::Operator(phi.at(a, b).clone()),
                        format.into(),
                    ));
                }
            }
            if !matches!(kind, KindArg::Kp) {
                let hat = hat_phi_operator(&ctx).map_err(domain("recursion"))?;
                for a in 1..=hat.rows() {
                    for b in 1..=hat.cols() {
                        let lhs = format!("hatphi{a}{b}@red{v}");
                        lines.push(render_line(
                            &lhs,
                            &Rendered::Operator(hat.at(a, b).clone()),
                            format.into(),
                        ));
                    }
                }
            }
            Ok(Output::lines(lines))
        }
        Command::ApplyRecursion { kind, n, reps, format } => {
            let kind = constrained(kind, "apply-recursion")?;
            if n == 0 {
                return Err(RunError::Usage("--n must be at least 1".into()));
            }
            if reps == 0 || reps % 2 != 0 {
                return Err(RunError::Usage(
                    "--reps must be a positive even number: one recursion step is two \
                     applications of the lifted matrix"
                        .into(),
                ));
            }
            let ctx = RecursionContext::new(kind, n).map_err(domain("apply-recursion"))?;
            let free: Vec<DiffPoly> =
                (1..=n).map(|a| DiffPoly::var_deriv(2 * a, 1)).collect();
            let lifted = ctx
                .lift_flows(&free)
                .map_err(domain("apply-recursion"))?;
            let advanced =
                phi_action(&ctx, &lifted, reps).map_err(domain("apply-recursion"))?;
            let t = 1 + (2 * n + 1) * reps;
            let mut lines = Vec::new();
            for a in 1..=n as usize {
                let lhs = format!("u{}_t{}@red{}", 2 * a, t, 2 * n + 1);
                let value = Rendered::Poly(advanced[2 * (a - 1)].clone());
                lines.push(render_line(&lhs, &value, format.into()));
            }
            Ok(Output::lines(lines))
        }
        Command::Scale { kind, n, j, m, u_scale, t_scale, format } => {
            let kind = constrained(kind, "scale")?;
            if n == 0 || j == 0 || j > n {
                return Err(RunError::Usage(format!(
                    "reduced coordinates are u2..u{}: need 1 <= j <= n",
                    2 * n
                )));
            }
            let u = Rational::from_str(&u_scale)
                .map_err(|e| RunError::Usage(format!("bad --u-scale {u_scale:?}: {e}")))?;
            let t = Rational::from_str(&t_scale)
                .map_err(|e| RunError::Usage(format!("bad --t-scale {t_scale:?}: {e}")))?;
            let f = reduced_flow(kind, n, j, m).map_err(domain("scale"))?;
            let scaled = scaling_transform(&f, &u, &t).map_err(domain("scale"))?;
            let lhs = format!(
                "u{}_t{}@red{}!scale({u},{t})",
                2 * j,
                2 * m + 1,
                2 * n + 1
            );
            Ok(Output::lines(vec![render_line(&lhs, &Rendered::Poly(scaled), format.into())]))
        }
        Command::Verify { fixtures } => {
            let reports = fixtures::verify_path(&fixtures).map_err(RunError::Usage)?;
            let mut lines = Vec::new();
            let mut failed = 0usize;
            for report in &reports {
                if report.passed {
                    lines.push(format!("ok   {}", report.key));
                } else {
                    failed += 1;
                    lines.push(format!("FAIL {}", report.key));
                    lines.push(report.detail.clone());
                }
            }
            lines.push(format!(
                "{} entries: {} passed, {failed} failed",
                reports.len(),
                reports.len() - failed
            ));
            Ok(Output { lines, failed_entries: failed })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(output) => {
            // Results are computed in full before the first byte is printed,
            // so a failure can never leave a truncated table behind.  A
            // closed pipe downstream (e.g. `bckp ... | head`) is not an
            // error on our side.
            let stdout = io::stdout();
            let mut handle = stdout.lock();
            for line in output.lines {
                if let Err(e) = writeln!(handle, "{line}") {
                    if e.kind() == io::ErrorKind::BrokenPipe {
                        break;
                    }
                    eprintln!("error[Io] writing results: {e}");
                    return ExitCode::from(1);
                }
            }
            if output.failed_entries == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(RunError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            ExitCode::from(2)
        }
        Err(RunError::Domain { op, err }) => {
            eprintln!("error[{}] in {op}: {err}", error_name(&err));
            ExitCode::from(1)
        }
    }
}
