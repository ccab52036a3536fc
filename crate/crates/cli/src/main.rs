//! `tagparse`: region-level image parsing from noisy image-level tags.
//!
//! Subcommands cover the full pipeline and its stages: `synth` generates a
//! labeled scene collection, `segment` turns images into region tables,
//! `graph` caches the region graph and spectral basis, `noise` corrupts tag
//! tables, `parse` and `baseline-lgc` solve for region labels, `eval` scores
//! label maps against ground truth, and `pipeline` runs everything in one go.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use tagparse_cli::cache;
use tagparse_cli::config::{ConfigOverrides, RunConfig};
use tagparse_cli::error::{CliError, Result};
use tagparse_cli::formats;
use tagparse_cli::pngio;
use tagparse_cli::pnm;
use tagparse_cli::report::RunReport;
use tagparse_cli::stages::{self, numbered, StagedDir};

use tagparse_core::dataset::{inject_tag_noise, synth_dataset, SyntheticSpec};
use tagparse_core::eval::evaluate_pixel_accuracy;
use tagparse_core::raster::LabelMap;
use tagparse_core::solver::{lgc_baseline, wssl_solve};

#[derive(Parser)]
#[command(name = "tagparse", version, about = "Region-level image parsing from noisy image-level tags")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Tunables shared by the solving subcommands. A config file loads first;
/// explicit flags override its values.
#[derive(Args, Debug, Default)]
struct Tunables {
    /// Config file of `key = value` lines
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Neighbors per region in the k-NN graph
    #[arg(long)]
    k: Option<usize>,
    /// Context-propagation strength (also the baseline's diffusion weight)
    #[arg(long)]
    alpha: Option<f64>,
    /// Spectral-smoothness weight
    #[arg(long)]
    lambda: Option<f64>,
    /// Label-fidelity weight
    #[arg(long)]
    gamma: Option<f64>,
    /// Spectral basis size
    #[arg(long)]
    m: Option<usize>,
    /// Solver relative-change stop
    #[arg(long)]
    tol: Option<f64>,
    /// Solver iteration cap
    #[arg(long)]
    max_iter: Option<usize>,
    /// Base seed for every seeded stage
    #[arg(long)]
    seed: Option<u64>,
    /// Mixture components fitted per image
    #[arg(long)]
    gmm_components: Option<usize>,
    /// Mixture EM iteration cap
    #[arg(long)]
    gmm_max_iter: Option<usize>,
    /// Mixture EM log-likelihood stop
    #[arg(long)]
    gmm_tol: Option<f64>,
    /// Merge regions below this fraction of the image area
    #[arg(long)]
    min_region_frac: Option<f64>,
}

impl Tunables {
    fn resolve(&self) -> Result<RunConfig> {
        let overrides = ConfigOverrides {
            k: self.k,
            alpha: self.alpha,
            lambda: self.lambda,
            gamma: self.gamma,
            m: self.m,
            tol: self.tol,
            max_iter: self.max_iter,
            seed: self.seed,
            gmm_components: self.gmm_components,
            gmm_max_iter: self.gmm_max_iter,
            gmm_tol: self.gmm_tol,
            min_region_frac: self.min_region_frac,
        };
        RunConfig::resolve(self.config.as_deref(), &overrides)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene collection with ground truth and clean tags
    Synth {
        /// Output directory (images/, truth/, tags.tsv)
        #[arg(long)]
        out: PathBuf,
        /// Number of images
        #[arg(long, default_value_t = 60)]
        images: usize,
        /// Number of categories
        #[arg(long, default_value_t = 6)]
        categories: usize,
        #[arg(long, default_value_t = 64)]
        width: usize,
        #[arg(long, default_value_t = 64)]
        height: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Image format: png or ppm
        #[arg(long, default_value = "png")]
        format: String,
    },
    /// Oversegment images into a region table and per-image region maps
    Segment {
        /// Directory of input images (PNG or PPM)
        #[arg(long)]
        images: PathBuf,
        /// Output directory (regions.tsv, maps/)
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        tunables: Tunables,
    },
    /// Build and cache the region graph and spectral basis
    Graph {
        /// Region table from `segment`
        #[arg(long)]
        regions: PathBuf,
        /// Output cache file
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        tunables: Tunables,
    },
    /// Add wrong tags to a fraction of images
    Noise {
        /// Tag table to corrupt
        #[arg(long)]
        tags: PathBuf,
        /// Percent of images that gain one wrong tag
        #[arg(long)]
        percent: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Total category count (default: inferred from the table)
        #[arg(long)]
        categories: Option<usize>,
        /// Output tag table
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve for region labels from a region table and tags
    Parse(ParseArgs),
    /// Label-propagation baseline over the same inputs as `parse`
    BaselineLgc(ParseArgs),
    /// Score predicted label maps against ground-truth maps
    Eval {
        /// Directory of predicted 8-bit PGM label maps
        #[arg(long)]
        pred: PathBuf,
        /// Directory of ground-truth 8-bit PGM label maps
        #[arg(long)]
        truth: PathBuf,
        /// Write the report here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run segment, graph, parse, and optional eval in one invocation
    Pipeline {
        /// Directory of input images (PNG or PPM)
        #[arg(long)]
        images: PathBuf,
        /// Tag table (image_id, comma-separated categories)
        #[arg(long)]
        tags: PathBuf,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
        /// Ground-truth label maps; enables the accuracy section
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Total category count (default: inferred from the tag table)
        #[arg(long)]
        categories: Option<usize>,
        #[command(flatten)]
        tunables: Tunables,
    },
}

#[derive(Args)]
struct ParseArgs {
    /// Region table from `segment`
    #[arg(long)]
    regions: PathBuf,
    /// Tag table
    #[arg(long)]
    tags: PathBuf,
    /// Region maps from `segment`; enables per-pixel label map output
    #[arg(long)]
    maps: Option<PathBuf>,
    /// Graph cache from `graph` (default: build in process)
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Output directory (labels.tsv, labels/, report.txt)
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth label maps; enables the accuracy section (needs --maps)
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Total category count (default: inferred from the tag table)
    #[arg(long)]
    categories: Option<usize>,
    #[command(flatten)]
    tunables: Tunables,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = i32::from(e.use_stderr());
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            out,
            images,
            categories,
            width,
            height,
            seed,
            format,
        } => synth(&out, images, categories, width, height, seed, &format),
        Command::Segment {
            images,
            out,
            tunables,
        } => segment(&images, &out, &tunables),
        Command::Graph {
            regions,
            out,
            tunables,
        } => graph(&regions, &out, &tunables),
        Command::Noise {
            tags,
            percent,
            seed,
            categories,
            out,
        } => noise(&tags, percent, seed, categories, &out),
        Command::Parse(args) => parse(&args, Solver::Wssl),
        Command::BaselineLgc(args) => parse(&args, Solver::Lgc),
        Command::Eval { pred, truth, out } => eval(&pred, &truth, out.as_deref()),
        Command::Pipeline {
            images,
            tags,
            out,
            truth,
            categories,
            tunables,
        } => pipeline(&images, &tags, &out, truth.as_deref(), categories, &tunables),
    }
}

fn synth(
    out: &Path,
    images: usize,
    categories: usize,
    width: usize,
    height: usize,
    seed: u64,
    format: &str,
) -> Result<()> {
    if format != "png" && format != "ppm" {
        return Err(CliError::usage(format!(
            "format: {format:?} is neither png nor ppm"
        )));
    }
    let spec = SyntheticSpec::standard(images, categories, width, height, seed);
    let scenes = synth_dataset(&spec)?;
    let staged = StagedDir::create(out)?;
    let image_dir = staged.subdir("images")?;
    let truth_dir = staged.subdir("truth")?;
    for (i, image) in scenes.images.iter().enumerate() {
        let path = image_dir.join(numbered("img", i, format));
        if format == "png" {
            pngio::write_png(&path, image)?;
        } else {
            pnm::write_ppm(&path, image)?;
        }
    }
    for (i, map) in scenes.ground_truth.iter().enumerate() {
        pnm::write_label_pgm(&truth_dir.join(numbered("gt", i, "pgm")), map)?;
    }
    formats::write_tags_tsv(&staged.path().join("tags.tsv"), &scenes.tags)?;
    staged.commit()?;
    eprintln!(
        "wrote {} images, ground truth, and tags to {}",
        images,
        out.display()
    );
    Ok(())
}

fn segment(images_dir: &Path, out: &Path, tunables: &Tunables) -> Result<()> {
    let config = tunables.resolve()?;
    let images = stages::load_images(images_dir).map_err(|e| e.in_stage("load"))?;
    let (region_maps, regions) =
        stages::segment_stage(&images, &config).map_err(|e| e.in_stage("segment"))?;
    let staged = StagedDir::create(out)?;
    formats::write_regions_tsv(&staged.path().join("regions.tsv"), &regions)?;
    let map_dir = staged.subdir("maps")?;
    for (i, map) in region_maps.iter().enumerate() {
        pnm::write_region_pgm(
            &map_dir.join(numbered("region", i, "pgm")),
            map.width(),
            map.height(),
            map.labels(),
        )?;
    }
    staged.commit()?;
    eprintln!(
        "segmented {} images into {} regions; table and maps in {}",
        images.len(),
        regions.len(),
        out.display()
    );
    Ok(())
}

fn graph(regions_path: &Path, out: &Path, tunables: &Tunables) -> Result<()> {
    let config = tunables.resolve()?;
    let regions = formats::read_regions_tsv(regions_path).map_err(|e| e.in_stage("load"))?;
    let (graph, basis) = stages::graph_stage(&regions, &config).map_err(|e| e.in_stage("graph"))?;
    cache::write_cache(out, &regions, config.k, &graph, &basis)?;
    eprintln!(
        "cached graph over {} regions (k = {}, m = {}) in {}",
        regions.len(),
        config.k,
        config.m,
        out.display()
    );
    Ok(())
}

fn noise(
    tags_path: &Path,
    percent: f64,
    seed: u64,
    categories: Option<usize>,
    out: &Path,
) -> Result<()> {
    let tags = formats::read_tags_tsv(tags_path, categories)?;
    let noisy = inject_tag_noise(&tags, percent, seed)?;
    formats::write_tags_tsv(out, &noisy)?;
    eprintln!(
        "corrupted {percent}% of {} images into {}",
        tags.num_images(),
        out.display()
    );
    Ok(())
}

enum Solver {
    Wssl,
    Lgc,
}

fn parse(args: &ParseArgs, solver: Solver) -> Result<()> {
    let config = args.tunables.resolve()?;
    if args.truth.is_some() && args.maps.is_none() {
        return Err(CliError::usage(
            "--truth needs --maps to paint per-pixel predictions",
        ));
    }
    let mut report = RunReport::new(match solver {
        Solver::Wssl => "parse",
        Solver::Lgc => "baseline-lgc",
    });

    let regions =
        formats::read_regions_tsv(&args.regions).map_err(|e| e.in_stage("load-regions"))?;
    let tags = formats::read_tags_tsv(&args.tags, args.categories)
        .map_err(|e| e.in_stage("load-tags"))?;
    let region_maps = match &args.maps {
        Some(dir) => {
            let maps = stages::load_region_maps(dir).map_err(|e| e.in_stage("load-maps"))?;
            validate_maps(&maps, &regions)?;
            Some(maps)
        }
        None => None,
    };

    let (graph, basis) = match &args.graph {
        Some(path) => cache::read_cache(path, &regions, config.k, config.m)
            .map_err(|e| e.in_stage("load-graph"))?,
        None => stages::timed(&mut report.timings, "graph", || {
            stages::graph_stage(&regions, &config)
        })?,
    };

    let ybar = stages::timed(&mut report.timings, "labels", || {
        stages::label_stage(&regions, &tags, config.alpha)
    })?;
    let scores = stages::timed(&mut report.timings, "solve", || match solver {
        Solver::Wssl => {
            let (scores, solve) = wssl_solve(&basis, &ybar, &config.solver_params())?;
            report.solve = Some(solve);
            Ok(scores)
        }
        Solver::Lgc => Ok(lgc_baseline(&graph, &ybar, config.alpha)?),
    })?;
    let scored = stages::timed(&mut report.timings, "assign", || {
        stages::score_stage(scores, region_maps.as_deref())
    })?;
    report.zero_rows = Some(scored.assignment.zero_rows);

    if let Some(truth_dir) = &args.truth {
        let truth = stages::load_label_maps(truth_dir).map_err(|e| e.in_stage("load-truth"))?;
        report.accuracy = Some(
            evaluate_pixel_accuracy(&scored.maps, &truth, LabelMap::VOID)
                .map_err(|e| CliError::from(e).in_stage("eval"))?,
        );
    }

    report.inputs = vec![
        ("images", regions.num_images().to_string()),
        ("categories", tags.num_categories().to_string()),
        ("regions", regions.len().to_string()),
    ];
    report.config = Some(config.clone());

    let staged = StagedDir::create(&args.out)?;
    formats::write_labels_tsv(
        &staged.path().join("labels.tsv"),
        &scored.assignment.categories,
        &scored.scores,
    )?;
    if !scored.maps.is_empty() {
        let label_dir = staged.subdir("labels")?;
        for (i, map) in scored.maps.iter().enumerate() {
            pnm::write_label_pgm(&label_dir.join(numbered("label", i, "pgm")), map)?;
        }
    }
    std::fs::write(staged.path().join("report.txt"), report.render())
        .map_err(CliError::from)?;
    std::fs::write(staged.path().join("effective-config.txt"), config.echo())
        .map_err(CliError::from)?;
    staged.commit()?;
    if let Some(accuracy) = &report.accuracy {
        eprintln!("average accuracy {:.2}", accuracy.average);
    }
    eprintln!("labels in {}", args.out.display());
    Ok(())
}

fn validate_maps(maps: &[tagparse_core::segment::RegionMap], regions: &tagparse_core::regions::RegionSet) -> Result<()> {
    if maps.len() != regions.num_images() {
        return Err(CliError::data(format!(
            "{} region maps for {} images in the region table",
            maps.len(),
            regions.num_images()
        )));
    }
    let mut counts = vec![0usize; regions.num_images()];
    for &image in regions.image_index() {
        counts[image] += 1;
    }
    for (i, map) in maps.iter().enumerate() {
        if map.num_regions() != counts[i] {
            return Err(CliError::data(format!(
                "map {i} holds {} regions but the table lists {}",
                map.num_regions(),
                counts[i]
            )));
        }
    }
    Ok(())
}

fn eval(pred: &Path, truth: &Path, out: Option<&Path>) -> Result<()> {
    let predicted = stages::load_label_maps(pred).map_err(|e| e.in_stage("load-pred"))?;
    let truth_maps = stages::load_label_maps(truth).map_err(|e| e.in_stage("load-truth"))?;
    let accuracy = evaluate_pixel_accuracy(&predicted, &truth_maps, LabelMap::VOID)?;
    let mut report = RunReport::new("eval");
    report.inputs = vec![("images", predicted.len().to_string())];
    report.accuracy = Some(accuracy);
    let text = report.render();
    match out {
        Some(path) => std::fs::write(path, text).map_err(CliError::from)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn pipeline(
    images_dir: &Path,
    tags_path: &Path,
    out: &Path,
    truth: Option<&Path>,
    categories: Option<usize>,
    tunables: &Tunables,
) -> Result<()> {
    let config = tunables.resolve()?;
    let mut report = RunReport::new("pipeline");

    let images = stages::timed(&mut report.timings, "load", || {
        stages::load_images(images_dir)
    })?;
    let tags = formats::read_tags_tsv(tags_path, categories).map_err(|e| e.in_stage("load"))?;
    let (region_maps, regions) = stages::timed(&mut report.timings, "segment", || {
        stages::segment_stage(&images, &config)
    })?;
    let (graph, basis) = stages::timed(&mut report.timings, "graph", || {
        stages::graph_stage(&regions, &config)
    })?;
    let _ = &graph;
    let ybar = stages::timed(&mut report.timings, "labels", || {
        stages::label_stage(&regions, &tags, config.alpha)
    })?;
    let scores = stages::timed(&mut report.timings, "solve", || {
        let (scores, solve) = wssl_solve(&basis, &ybar, &config.solver_params())?;
        report.solve = Some(solve);
        Ok(scores)
    })?;
    let scored = stages::timed(&mut report.timings, "assign", || {
        stages::score_stage(scores, Some(&region_maps))
    })?;
    report.zero_rows = Some(scored.assignment.zero_rows);

    if let Some(truth_dir) = truth {
        let truth_maps = stages::timed(&mut report.timings, "eval", || {
            stages::load_label_maps(truth_dir)
        })?;
        report.accuracy = Some(
            evaluate_pixel_accuracy(&scored.maps, &truth_maps, LabelMap::VOID)
                .map_err(|e| CliError::from(e).in_stage("eval"))?,
        );
    }

    report.inputs = vec![
        ("images", images.len().to_string()),
        ("categories", tags.num_categories().to_string()),
        ("regions", regions.len().to_string()),
    ];
    report.config = Some(config.clone());

    let staged = StagedDir::create(out)?;
    formats::write_regions_tsv(&staged.path().join("regions.tsv"), &regions)?;
    let map_dir = staged.subdir("maps")?;
    for (i, map) in region_maps.iter().enumerate() {
        pnm::write_region_pgm(
            &map_dir.join(numbered("region", i, "pgm")),
            map.width(),
            map.height(),
            map.labels(),
        )?;
    }
    formats::write_labels_tsv(
        &staged.path().join("labels.tsv"),
        &scored.assignment.categories,
        &scored.scores,
    )?;
    let label_dir = staged.subdir("labels")?;
    for (i, map) in scored.maps.iter().enumerate() {
        pnm::write_label_pgm(&label_dir.join(numbered("label", i, "pgm")), map)?;
    }
    std::fs::write(staged.path().join("report.txt"), report.render())
        .map_err(CliError::from)?;
    std::fs::write(staged.path().join("effective-config.txt"), config.echo())
        .map_err(CliError::from)?;
    staged.commit()?;
    if let Some(accuracy) = &report.accuracy {
        eprintln!("average accuracy {:.2}", accuracy.average);
    }
    eprintln!("pipeline outputs in {}", out.display());
    Ok(())
}
