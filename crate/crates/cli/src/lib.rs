//! `dragkit` command-line interface.
//!
//! Exit codes: 0 success, 2 bad input, 3 internal failure. Failures print
//! `{"error":{"code":...,"message":...}}` on stderr.

use std::ffi::OsString;
use std::io::Write;
use std::net::IpAddr;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dragkit_core::{reverse_map, run_mechanism, BinaryMask, Cell, DragInputs, DragPair, HarnessConfig, LrmConfig, Point2};
use dragkit_formats::bundle::TRACE_CELL_LIMIT;
use dragkit_formats::{
    compute_edit, fixtures, pixels_to_tokens, write_bundle_atomic, ComputeOptions, DragSpecFile, FormatError, Raster,
    TokenSpec,
};
use dragkit_service::ServiceConfig;
use serde::Deserialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USER: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dragkit", version, about = "Drag-edit geometry, previews and the toy attention harness")]
struct Cli {
    /// TOML file with [lrm], [harness] and [service] tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Harness seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Only print errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute an edit bundle from a spec and an image.
    Compute(ComputeArgs),
    /// Run the toy harness and write its trace as JSON.
    Trace(TraceArgs),
    /// Start the HTTP edit service.
    Serve(ServeArgs),
    /// Check a spec against the brute-force oracles.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct ComputeArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    image: PathBuf,
    /// Bundle directory; replaced atomically if it exists.
    #[arg(long)]
    out: PathBuf,
    /// Also run the harness and include trace.json.
    #[arg(long)]
    trace: bool,
    /// Draw a field arrow every N cells.
    #[arg(long, default_value_t = 1)]
    field_stride: usize,
}

#[derive(Debug, Args)]
struct TraceArgs {
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Drag to run; a built-in drag on the configured grid when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long)]
    port: Option<u16>,
    #[arg(long)]
    host: Option<IpAddr>,
    #[arg(long)]
    data_dir: Option<PathBuf>,
    /// Allowed CORS origin; repeatable. Any origin when none is configured.
    #[arg(long)]
    cors_origin: Vec<String>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Spec to check; the built-in translation fixture when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    lrm: Option<LrmConfig>,
    harness: Option<HarnessConfig>,
    service: ServiceSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ServiceSection {
    port: Option<u16>,
    host: Option<IpAddr>,
    data_dir: Option<PathBuf>,
    cors_origins: Option<Vec<String>>,
    max_image_area: Option<usize>,
}

#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub exit: i32,
}

impl CliError {
    fn user(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into(), exit: EXIT_USER }
    }

    fn internal(code: &str, message: impl Into<String>) -> Self {
        Self { code: code.into(), message: message.into(), exit: EXIT_INTERNAL }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "code": self.code, "message": self.message } }).to_string()
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        let exit = if e.is_user_error() { EXIT_USER } else { EXIT_INTERNAL };
        Self { code: e.code().into(), message: e.to_string(), exit }
    }
}

impl From<dragkit_core::DragError> for CliError {
    fn from(e: dragkit_core::DragError) -> Self {
        FormatError::from(e).into()
    }
}

type CliResult<T = ()> = Result<T, CliError>;

/// Parses `args` (including the program name), runs the command and returns
/// the exit code.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run(args, &mut stdout.lock(), &mut stderr.lock())
}

/// [`cli_main`] with explicit output streams.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return EXIT_OK;
            }
            let e = CliError::user("Usage", e.render().to_string().trim());
            let _ = writeln!(err, "{}", e.to_json());
            return e.exit;
        }
    };
    match execute(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "{}", e.to_json());
            e.exit
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult {
    let config = match &cli.config {
        None => FileConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::user("InvalidConfig", format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| CliError::user("InvalidConfig", format!("{}: {e}", path.display())))?
        }
    };
    let mut harness = config.harness.clone().unwrap_or_default();
    if let Some(seed) = cli.seed {
        harness.seed = seed;
    }
    let mut console = Console { out, quiet: cli.quiet };
    match &cli.command {
        Command::Compute(args) => compute(args, &config, harness, &mut console),
        Command::Trace(args) => trace(args, &config, harness, &mut console),
        Command::Serve(args) => serve(args, &config, harness, &mut console),
        Command::Verify(args) => verify(args, &config, &mut console),
    }
}

struct Console<'a> {
    out: &'a mut dyn Write,
    quiet: bool,
}

impl Console<'_> {
    /// Progress line, suppressed by `--quiet`.
    fn say(&mut self, line: String) -> CliResult {
        if self.quiet {
            return Ok(());
        }
        self.data(format!("{line}\n").as_bytes())
    }

    fn data(&mut self, bytes: &[u8]) -> CliResult {
        self.out
            .write_all(bytes)
            .and_then(|_| self.out.flush())
            .map_err(|e| CliError::internal("Io", e.to_string()))
    }
}

fn load_spec(path: &Path, config: &FileConfig) -> CliResult<(DragSpecFile, Raster)> {
    let mut spec = DragSpecFile::load(path)?;
    if spec.lrm.is_none() {
        spec.lrm = config.lrm;
    }
    let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mask = spec.load_mask(Some(base))?;
    Ok((spec, mask))
}

fn compute(args: &ComputeArgs, config: &FileConfig, harness: HarnessConfig, con: &mut Console<'_>) -> CliResult {
    let (spec, mask) = load_spec(&args.spec, config)?;
    let bytes = std::fs::read(&args.image)
        .map_err(|e| CliError::user("InputUnreadable", format!("{}: {e}", args.image.display())))?;
    let image = Raster::decode(&bytes)?;
    let opts = ComputeOptions { trace: args.trace.then_some(harness), field_stride: args.field_stride };
    let bundle = compute_edit(&image, &spec, &mask, &opts)?;
    let files = bundle.files();
    write_bundle_atomic(&args.out, &files)?;
    con.say(format!(
        "{}x{} grid, {} source cells, {} destination cells",
        bundle.tokens.grid_width,
        bundle.tokens.grid_height,
        bundle.tokens.mask.count(),
        bundle.map.mask_dst.count()
    ))?;
    for (i, ok) in bundle.reachability.iter().enumerate() {
        con.say(format!("pair {i}: {}", if *ok { "reachable" } else { "target outside destination" }))?;
    }
    con.say(format!("wrote {} files to {}", files.len(), args.out.display()))
}

/// A 3x3 block left of centre dragged a quarter of the grid to the right.
fn demo_drag(width: usize, height: usize) -> CliResult<TokenSpec> {
    let (cx, cy) = (width / 4, height / 2);
    let cells = (cy.saturating_sub(1)..=cy + 1)
        .flat_map(|y| (cx.saturating_sub(1)..=cx + 1).map(move |x| Cell::new(x, y)))
        .filter(|c| c.x < width && c.y < height);
    let mask = BinaryMask::from_cells(width, height, cells)?;
    let source = Point2::new(cx as f64, cy as f64);
    let pair = DragPair::new(source, Point2::new((cx + width / 4) as f64, cy as f64));
    Ok(TokenSpec { grid_width: width, grid_height: height, pairs: vec![pair], mask })
}

fn trace(args: &TraceArgs, config: &FileConfig, mut harness: HarnessConfig, con: &mut Console<'_>) -> CliResult {
    let (tokens, lrm) = match &args.spec {
        Some(path) => {
            let (spec, mask) = load_spec(path, config)?;
            harness.mask_policy = spec.mask_policy.unwrap_or(harness.mask_policy);
            if let Some(o) = &spec.injection {
                harness.injection = o.apply(&harness.injection);
            }
            (pixels_to_tokens(&spec, &mask)?, spec.lrm_config())
        }
        None => (demo_drag(harness.grid_width, harness.grid_height)?, config.lrm.unwrap_or_default()),
    };
    harness.grid_width = tokens.grid_width;
    harness.grid_height = tokens.grid_height;
    if tokens.grid_width * tokens.grid_height > TRACE_CELL_LIMIT {
        return Err(CliError::user(
            "InvalidConfig",
            format!("a {}x{} grid exceeds the {TRACE_CELL_LIMIT}-cell harness limit", tokens.grid_width, tokens.grid_height),
        ));
    }
    let map = reverse_map(&tokens.mask, &tokens.pairs, &lrm)?;
    let trace = run_mechanism(&harness, &DragInputs { mask_src: &tokens.mask, map: &map })?;
    let mut json = serde_json::to_string_pretty(&trace).map_err(|e| CliError::internal("Internal", e.to_string()))?;
    json.push('\n');
    match &args.out {
        Some(path) => {
            std::fs::write(path, json).map_err(|e| CliError::internal("Io", format!("{}: {e}", path.display())))?;
            con.say(format!("wrote {} block records to {}", trace.records.len(), path.display()))
        }
        None => con.data(json.as_bytes()),
    }
}

fn serve(args: &ServeArgs, config: &FileConfig, harness: HarnessConfig, con: &mut Console<'_>) -> CliResult {
    let mut cfg = ServiceConfig { harness, ..ServiceConfig::default() };
    let s = &config.service;
    cfg.port = s.port.unwrap_or(cfg.port);
    cfg.host = s.host.unwrap_or(cfg.host);
    cfg.max_image_area = s.max_image_area.unwrap_or(cfg.max_image_area);
    if let Some(d) = &s.data_dir {
        cfg.data_dir = d.clone();
    }
    if let Some(o) = &s.cors_origins {
        cfg.cors_origins = o.clone();
    }
    cfg.apply_env().map_err(|e| CliError::user("InvalidConfig", e))?;
    cfg.port = args.port.unwrap_or(cfg.port);
    cfg.host = args.host.unwrap_or(cfg.host);
    if let Some(d) = &args.data_dir {
        cfg.data_dir = d.clone();
    }
    if !args.cors_origin.is_empty() {
        cfg.cors_origins = args.cors_origin.clone();
    }
    let runtime = tokio::runtime::Runtime::new().map_err(|e| CliError::internal("Io", e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(cfg.addr())
            .await
            .map_err(|e| CliError::user("Io", format!("cannot bind {}: {e}", cfg.addr())))?;
        let addr = listener.local_addr().map_err(|e| CliError::internal("Io", e.to_string()))?;
        con.say(format!("listening on http://{addr} (data in {})", cfg.data_dir.display()))?;
        dragkit_service::serve_on(listener, cfg)
            .await
            .map_err(|e| CliError::internal("Io", e.to_string()))
    })
}

fn verify(args: &VerifyArgs, config: &FileConfig, con: &mut Console<'_>) -> CliResult {
    let (spec, mask) = match &args.spec {
        Some(path) => load_spec(path, config)?,
        None => {
            let (_, spec, mask) = fixtures::translation();
            (spec, mask)
        }
    };
    let tokens = pixels_to_tokens(&spec, &mask)?;
    let checks = dragkit_verify::run_suite(&tokens.mask, &tokens.pairs, &spec.lrm_config(), spec.mask_policy());
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    for c in &checks {
        con.say(format!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::internal("VerificationFailed", format!("failed checks: {}", failed.join(", "))))
    }
}
