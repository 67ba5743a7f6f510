//! Subcommand implementations.

mod analyze;
mod collect;
mod embed;
mod neurons;
mod probes;
mod synth;
mod validate;

use std::path::{Path, PathBuf};

use yearsense::dumpio::{open_dump, read_similarity};
use yearsense::{Error, Result, SimilarityMatrix, TheoreticalMetric, YearGrid, DEFAULT_REFERENCE};

use crate::cli::{Cli, Command, EmbedCommand, FigureArgs, NeuronsCommand, OutArg, ProbesCommand};
use crate::config::{pick, FileConfig};
use crate::manifest::RunDir;
use crate::svg::{render_heatmap, Palette};

pub const DEFAULT_OUT: &str = "yearsense-out";
/// Heatmaps are downsampled to at most this many cells per side by default.
pub const HEATMAP_TARGET_CELLS: usize = 250;

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let ctx = Ctx { file };
    match &cli.command {
        Command::Collect(a) => collect::run(&ctx, a),
        Command::FitMetrics(a) => analyze::fit_metrics(&ctx, a),
        Command::EstimateReference(a) => analyze::estimate_reference(&ctx, a),
        Command::Neurons(NeuronsCommand::Identify(a)) => neurons::identify(&ctx, a),
        Command::Neurons(NeuronsCommand::Curve(a)) => neurons::curve(&ctx, a),
        Command::Neurons(NeuronsCommand::Logfit { inputs, reference }) => neurons::logfit(&ctx, inputs, *reference),
        Command::Probes(ProbesCommand::Sweep(a)) => probes::sweep(&ctx, a),
        Command::Embed(EmbedCommand::Collect(a)) => embed::collect(&ctx, a),
        Command::Embed(EmbedCommand::Analyze(a)) => embed::analyze(&ctx, a),
        Command::Synth(a) => synth::run(&ctx, a),
        Command::Validate(a) => validate::run(&ctx, a),
    }
}

/// Resolved config-file defaults shared by every command.
pub(crate) struct Ctx {
    pub file: FileConfig,
}

impl Ctx {
    pub fn out_dir(&self, arg: &OutArg) -> PathBuf {
        pick(arg.out.clone(), self.file.out.clone(), PathBuf::from(DEFAULT_OUT))
    }

    pub fn reference(&self, flag: Option<i32>) -> i32 {
        pick(flag, self.file.reference, DEFAULT_REFERENCE)
    }

    pub fn seed(&self, flag: Option<u64>) -> u64 {
        pick(flag, self.file.seed, 0)
    }

    pub fn metrics(&self, flag: Option<&str>, reference: i32) -> Result<Vec<TheoreticalMetric>> {
        let spec = flag.or(self.file.metric.as_deref()).unwrap_or("all");
        TheoreticalMetric::parse_list(spec, reference)
    }

    pub fn figure(&self, f: &FigureArgs) -> Result<Figure> {
        let palette_name = pick(f.palette.clone(), self.file.palette.clone(), "blues".to_string());
        Ok(Figure {
            palette: palette_name.parse()?,
            palette_name,
            downsample: f.downsample.or(self.file.downsample),
        })
    }
}

pub(crate) struct Figure {
    pub palette: Palette,
    pub palette_name: String,
    /// None picks a factor that keeps at most [`HEATMAP_TARGET_CELLS`] per side.
    pub downsample: Option<usize>,
}

impl Figure {
    pub fn factor(&self, n: usize) -> usize {
        self.downsample
            .unwrap_or_else(|| n.div_ceil(HEATMAP_TARGET_CELLS))
            .max(1)
    }

    pub fn heatmap(&self, run: &mut RunDir, name: &str, grid: &YearGrid, title: &str) -> Result<PathBuf> {
        let svg = render_heatmap(grid, self.palette, self.factor(grid.n()), title);
        run.write(name, svg)
    }

    pub fn json(&self) -> serde_json::Value {
        serde_json::json!({
            "palette": self.palette_name,
            "downsample": self.downsample,
        })
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Similarity matrix from a CSV file or a similarity dump.
pub(crate) fn load_similarity(path: &Path) -> Result<SimilarityMatrix> {
    if is_csv(path) {
        SimilarityMatrix::read_csv(path)
    } else {
        let mut reader = open_dump(path)?;
        read_similarity(&mut reader)
    }
}

pub(crate) fn num(v: f64) -> String {
    v.to_string()
}

/// Writes a year grid (any value range) as a square CSV.
pub(crate) fn grid_csv(run: &mut RunDir, name: &str, corner: &str, grid: &YearGrid) -> Result<PathBuf> {
    let mut header = vec![corner.to_string()];
    header.extend(grid.range().years().map(|y| y.to_string()));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let n = grid.n();
    let rows = grid.range().years().enumerate().map(|(r, year)| {
        let mut row = vec![year.to_string()];
        row.extend((0..n).map(|c| grid.at(r, c).map(num).unwrap_or_default()));
        row
    });
    run.write_csv(name, &header_refs, rows)
}

pub(crate) fn missing_flag(name: &str) -> Error {
    Error::Config(format!("--{name} is required (flag or config file)"))
}
