//! Command-line front end for `glvar`.

pub mod commands;
pub mod settings;
pub mod svg;

use std::path::PathBuf;

use settings::Settings;

/// CLI failure, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    MissingInput(String),
    NonConvergence(String),
    Invariant(String),
    Failure(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MissingInput(_) => 3,
            CliError::NonConvergence(_) => 4,
            CliError::Invariant(_) => 5,
            CliError::Failure(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::MissingInput(_) => "missing-input",
            CliError::NonConvergence(_) => "non-convergence",
            CliError::Invariant(_) => "invariant",
            CliError::Failure(_) => "failure",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::MissingInput(m) | CliError::NonConvergence(m) | CliError::Invariant(m) | CliError::Failure(m) => m,
        }
    }

    /// One-line JSON description for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "code": self.code(), "message": self.message() }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<glvar::Error> for CliError {
    fn from(e: glvar::Error) -> Self {
        use glvar::Error as E;
        let m = e.to_string();
        match e {
            E::InvalidParameter(_) | E::InvalidGrid(_) | E::Resolution { .. } | E::InvalidPeriodicSize(_) | E::DegenerateField { .. } | E::Schedule(_) | E::RegionOutsideGrid(_) => CliError::Usage(m),
            E::Io(ref io) if io.kind() == std::io::ErrorKind::NotFound => CliError::MissingInput(m),
            E::Format(_) | E::Table(_) => CliError::MissingInput(m),
            E::LinearSolve { .. } => CliError::NonConvergence(m),
            E::Io(_) => CliError::Failure(m),
            _ => CliError::Invariant(m),
        }
    }
}

pub const COMMANDS: &[(&str, &str)] = &[
    ("refcell", "solve reference cell problems"),
    ("fhat", "tabulate the limiting energy density"),
    ("predict", "leading-order energy prediction"),
    ("minimize", "minimize the GL energy on a domain"),
    ("vortices", "detect vortices in a checkpoint"),
    ("report", "full report with figures"),
];

/// Run a command in a thread pool sized by `threads`, then `GLVAR_THREADS`.
pub fn run(s: &Settings) -> Result<Vec<PathBuf>, CliError> {
    let mut threads: usize = s.get("threads")?;
    if threads == 0 {
        threads = std::env::var("GLVAR_THREADS").ok().and_then(|v| v.parse().ok()).unwrap_or(0);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(|e| CliError::Failure(e.to_string()))?;
    pool.install(|| match s.command.as_str() {
        "refcell" => commands::refcell(s),
        "fhat" => commands::fhat(s),
        "predict" => commands::predict(s),
        "minimize" => commands::minimize_cmd(s),
        "vortices" => commands::vortices(s),
        "report" => commands::report(s),
        c => Err(CliError::Usage(format!("unknown command {c}"))),
    })
}
