//! Command-line front end. Each subcommand opens the archive under `--data`,
//! performs one operation and prints its result.

use std::ffi::OsString;
use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use shotgraph_core::feature_store::parse_vectors;
use shotgraph_core::feature_store::synth::{generate_synthetic_film, SynthSpec};
use shotgraph_core::indexer::DEFAULT_MIN_WEIGHT;
use shotgraph_core::retrieval::{DEFAULT_NEGATIVES, DEFAULT_PRUNE_DEPTH, DEFAULT_SIMILARITY_THRESHOLD};
use shotgraph_core::segmenter::{evaluate_boundaries, parse_ordinals};
use shotgraph_core::{
    Archive, ClassMap, Element, IndexParams, Metric, NodeId, Page, PoolMode, SearchResult, SegmentOptions,
    SpatialRelation, TrainParams,
};

use crate::error::ApiError;
use crate::http::{self, AppState};
use crate::output::{Format, Table};

#[derive(Debug, Parser)]
#[command(name = "shotgraph", version, about = "Shot segmentation, semantic indexing and retrieval")]
pub struct Cli {
    /// Archive directory.
    #[arg(long, global = true, env = "SHOTGRAPH_DATA", default_value = "shotgraph-data")]
    pub data: PathBuf,
    #[arg(long, global = true, value_enum, default_value_t = Format::Lines)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest a feature stream (`-` reads stdin).
    Ingest {
        file: PathBuf,
        #[arg(long)]
        overwrite: bool,
    },
    /// Write a synthetic feature stream and its true shot starts.
    Synth(SynthArgs),
    /// Detect shot boundaries of an ingested film.
    Segment {
        #[arg(long)]
        film: String,
        #[arg(long, conflicts_with = "auto_threshold")]
        threshold: Option<f64>,
        /// Calibrate the threshold from the film (the default without --threshold).
        #[arg(long)]
        auto_threshold: bool,
        #[arg(long, default_value = "squared_euclidean")]
        metric: Metric,
        /// Also write the start ordinals to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted shot starts against ground truth.
    EvalBoundaries {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 5)]
        tolerance: usize,
    },
    /// Load synsets and lexical relations.
    LoadLexicon { file: PathBuf },
    /// Pool a segmented film's shots and write them into the graph.
    Index {
        #[arg(long)]
        film: String,
        #[arg(long, default_value = "avg")]
        mode: PoolMode,
        #[arg(long, default_value_t = DEFAULT_MIN_WEIGHT)]
        min_weight: f64,
        /// Class slot to synset map, one synset id per line. Replaces the stored map.
        #[arg(long)]
        class_map: Option<PathBuf>,
    },
    /// Keyword, hypernym or spatial search.
    Search(SearchArgs),
    /// Shots whose pooled features are close to a sample shot.
    Similar {
        #[arg(long)]
        shot: u64,
        #[arg(long, default_value_t = DEFAULT_SIMILARITY_THRESHOLD)]
        threshold: f64,
        #[arg(long, default_value_t = DEFAULT_PRUNE_DEPTH)]
        depth: usize,
    },
    /// Train a classifier from positive sample vectors.
    Train(TrainArgs),
    /// List the shots a trained classifier accepts.
    Classify {
        #[arg(long)]
        classifier: String,
    },
    /// Run a graph query.
    Query {
        /// Query text; omit to read --file.
        text: Option<String>,
        #[arg(long, conflicts_with = "text")]
        file: Option<PathBuf>,
        /// Print the evaluation plan instead of rows.
        #[arg(long)]
        explain: bool,
    },
    /// Serve the HTTP interface.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Static files to serve under /ui.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    pub shots: usize,
    #[arg(long, default_value_t = 12)]
    pub samples: usize,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "synthetic")]
    pub film_id: String,
    /// Stream destination (`-` for stdout).
    #[arg(long)]
    pub out: PathBuf,
    /// Where to write the true shot starts.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    pub lemma: String,
    /// Widen to synsets sharing a direct hypernym.
    #[arg(long, conflicts_with = "rel")]
    pub hypernym: bool,
    /// Spatial relation of LEMMA to --to (Left, Right, Above, Below).
    #[arg(long, requires = "to")]
    pub rel: Option<SpatialRelation>,
    #[arg(long, requires = "rel")]
    pub to: Option<String>,
    #[arg(long, default_value_t = DEFAULT_MIN_WEIGHT)]
    pub min_weight: f64,
    #[arg(long, default_value_t = 0)]
    pub skip: usize,
    #[arg(long)]
    pub limit: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Positive vectors, one `{"fv": [...]}` object per line.
    #[arg(long)]
    pub positives: PathBuf,
    #[arg(long, default_value_t = 200.0)]
    pub positive_weight: f64,
    #[arg(long, default_value_t = 3)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.5)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_NEGATIVES)]
    pub negatives: usize,
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>, ApiError> {
    if path == Path::new("-") {
        Ok(Box::new(BufReader::new(io::stdin())))
    } else {
        let f = fs::File::open(path).map_err(|e| ApiError::from(e).with_path(path))?;
        Ok(Box::new(BufReader::new(f)))
    }
}

fn read_text(path: &Path) -> Result<String, ApiError> {
    let mut s = String::new();
    open_input(path)?.read_to_string(&mut s)?;
    Ok(s)
}

fn write_file(path: &Path, text: &str) -> Result<(), ApiError> {
    fs::write(path, text).map_err(|e| ApiError::from(e).with_path(path))
}

impl ApiError {
    fn with_path(mut self, path: &Path) -> Self {
        self.message = format!("{}: {}", path.display(), self.message);
        self
    }
}

fn shot_table(archive: &Archive, results: &[SearchResult], score: &str) -> Table {
    let mut t = Table::new(["rank", "shot_id", score, "film_id", "shot_index", "start_ms", "duration_ms"]);
    for r in results {
        let info = archive.shot_info(r.shot_id).ok();
        let field = |f: &dyn Fn(&shotgraph_core::ShotInfo) -> String| info.as_ref().map(f).unwrap_or_default();
        t.push(vec![
            r.rank.to_string(),
            r.shot_id.to_string(),
            r.score.to_string(),
            field(&|i| i.film_id.clone()),
            field(&|i| i.shot_index.to_string()),
            field(&|i| i.start_ms.to_string()),
            field(&|i| i.duration_ms.to_string()),
        ]);
    }
    t
}

/// What a command printed: a table on stdout plus optional notes on stderr.
#[derive(Debug, Default)]
pub struct Outcome {
    pub stdout: String,
    pub notes: Vec<String>,
}

impl Outcome {
    fn table(t: Table, format: Format) -> Self {
        Self {
            stdout: t.render(format),
            notes: Vec::new(),
        }
    }

    fn note(mut self, n: impl Into<String>) -> Self {
        self.notes.push(n.into());
        self
    }
}

/// Execute everything except `serve`.
pub fn execute(cli: &Cli) -> Result<Outcome, ApiError> {
    let format = cli.format;
    if let Command::Synth(args) = &cli.command {
        return synth(args, format);
    }
    if let Command::EvalBoundaries { pred, truth, tolerance } = &cli.command {
        let pred = parse_ordinals(open_input(pred)?)?;
        let truth = parse_ordinals(open_input(truth)?)?;
        let s = evaluate_boundaries(&pred, &truth, *tolerance);
        let mut t = Table::new(["precision", "recall", "true_positives", "predicted", "truth"]);
        t.push(vec![
            s.precision.to_string(),
            s.recall.to_string(),
            s.true_positives.to_string(),
            pred.len().to_string(),
            truth.len().to_string(),
        ]);
        return Ok(Outcome::table(t, format));
    }

    let archive = Archive::open(&cli.data)?;
    match &cli.command {
        Command::Ingest { file, overwrite } => {
            let (meta, frames) = archive.ingest(open_input(file)?, *overwrite)?;
            let mut t = Table::new(["film_id", "frames", "feature_dim", "class_count"]);
            t.push(vec![
                meta.film_id,
                frames.to_string(),
                meta.feature_dim.to_string(),
                meta.class_count.to_string(),
            ]);
            Ok(Outcome::table(t, format))
        }
        Command::Segment {
            film,
            threshold,
            auto_threshold: _,
            metric,
            out,
        } => {
            let report = archive.segment(
                film,
                SegmentOptions {
                    threshold: *threshold,
                    metric: *metric,
                },
            )?;
            let mut t = Table::new(["start_ordinal"]);
            for b in &report.boundaries {
                t.push(vec![b.to_string()]);
            }
            if let Some(path) = out {
                write_file(path, &Table { headers: vec![], rows: t.rows.clone() }.render(Format::Lines))?;
            }
            Ok(Outcome::table(t, format).note(format!("threshold {} -> {} shots", report.threshold, report.shots)))
        }
        Command::LoadLexicon { file } => {
            let counts = archive.load_lexicon(open_input(file)?)?;
            let mut t = Table::new(["synsets", "relations"]);
            t.push(vec![counts.synsets.to_string(), counts.relations.to_string()]);
            Ok(Outcome::table(t, format))
        }
        Command::Index {
            film,
            mode,
            min_weight,
            class_map,
        } => {
            let map = match class_map {
                Some(p) => Some(ClassMap::parse(open_input(p)?)?),
                None => None,
            };
            let counts = archive.index(
                film,
                IndexParams {
                    mode: *mode,
                    min_weight: *min_weight,
                },
                map,
            )?;
            let mut t = Table::new(["shots", "tags", "salient_nodes", "spatial_edges"]);
            t.push(vec![
                counts.shots.to_string(),
                counts.tags.to_string(),
                counts.salient_nodes.to_string(),
                counts.spatial_edges.to_string(),
            ]);
            Ok(Outcome::table(t, format))
        }
        Command::Search(args) => {
            let page = Page {
                skip: args.skip,
                limit: args.limit,
            };
            let response = match (&args.rel, &args.to) {
                (Some(rel), Some(to)) => archive.search_spatial(&args.lemma, *rel, to, page)?,
                _ if args.hypernym => archive.search_hypernym(&args.lemma, args.min_weight, page)?,
                _ => archive.search_keyword(&args.lemma, args.min_weight, page)?,
            };
            let mut out = Outcome::table(shot_table(&archive, &response.results, "score"), format);
            if let Some(n) = response.notice {
                out = out.note(n);
            }
            Ok(out)
        }
        Command::Similar { shot, threshold, depth } => {
            let hits = archive.similar(NodeId(*shot), *threshold, *depth)?;
            Ok(Outcome::table(shot_table(&archive, &hits, "distance"), format))
        }
        Command::Train(args) => {
            let positives = parse_vectors(open_input(&args.positives)?, None)?;
            let params = TrainParams {
                positive_weight: args.positive_weight,
                epochs: args.epochs,
                learning_rate: args.learning_rate,
                seed: args.seed,
                negatives: args.negatives,
            };
            let (id, model) = archive.train_classifier(&positives, &params)?;
            let mut t = Table::new(["classifier_id", "positives", "negatives", "final_loss"]);
            t.push(vec![
                id,
                model.positives.to_string(),
                model.negatives.to_string(),
                model.epoch_losses.last().map(f64::to_string).unwrap_or_default(),
            ]);
            Ok(Outcome::table(t, format))
        }
        Command::Classify { classifier } => {
            let hits = archive.classifier_results(classifier)?;
            Ok(Outcome::table(shot_table(&archive, &hits, "margin"), format))
        }
        Command::Query { text, file, explain } => {
            let text = match (text, file) {
                (Some(t), _) => t.clone(),
                (None, Some(f)) => read_text(f)?,
                (None, None) => return Err(ApiError::invalid("give the query text or --file")),
            };
            if *explain {
                return Ok(Outcome {
                    stdout: archive.explain(&text)?.to_string(),
                    notes: Vec::new(),
                });
            }
            let result = archive.query(&text)?;
            let mut t = Table::new(result.columns.clone());
            for row in &result.rows {
                t.push(
                    row.0
                        .iter()
                        .map(|e| match e {
                            Element::Node(n) => n.to_string(),
                            Element::Edge(e) => format!("e{e}"),
                        })
                        .collect(),
                );
            }
            Ok(Outcome::table(t, format))
        }
        Command::Synth(_) | Command::EvalBoundaries { .. } | Command::Serve { .. } => {
            unreachable!("handled before opening the archive")
        }
    }
}

fn synth(args: &SynthArgs, format: Format) -> Result<Outcome, ApiError> {
    let mut spec = SynthSpec::new(args.shots, args.samples, args.dim, args.classes)
        .seed(args.seed)
        .film_id(args.film_id.clone());
    if let Some(s) = args.separation {
        spec = spec.separation(s);
    }
    if let Some(n) = args.noise {
        spec = spec.noise(n);
    }
    spec.validate().map_err(ApiError::invalid)?;
    let film = generate_synthetic_film(&spec);
    let stream = film.to_stream();
    if args.out == Path::new("-") {
        return Ok(Outcome {
            stdout: stream,
            notes: Vec::new(),
        });
    }
    write_file(&args.out, &stream)?;
    if let Some(truth) = &args.truth {
        let text: String = film.truth.iter().map(|b| format!("{b}\n")).collect();
        write_file(truth, &text)?;
    }
    let mut t = Table::new(["film_id", "samples", "shots"]);
    t.push(vec![
        spec.film_id.clone(),
        film.film.frames.len().to_string(),
        film.truth.len().to_string(),
    ]);
    Ok(Outcome::table(t, format))
}

fn serve(data: &Path, bind: SocketAddr, ui: Option<PathBuf>) -> Result<(), ApiError> {
    let archive = Arc::new(Archive::open(data)?);
    let state = AppState {
        archive,
        ui_dir: ui,
    };
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(http::serve(state, bind))?;
    Ok(())
}

/// Parse `args`, run the command and return the process exit code: 0 on
/// success, 1 on an operational error, 2 on a usage error.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(stdout, "{text}");
            } else {
                let _ = write!(stderr, "{text}");
            }
            return code;
        }
    };
    let result = match &cli.command {
        Command::Serve { bind, ui } => serve(&cli.data, *bind, ui.clone()).map(|()| Outcome::default()),
        _ => execute(&cli),
    };
    match result {
        Ok(outcome) => {
            let _ = stdout.write_all(outcome.stdout.as_bytes());
            for n in outcome.notes {
                let _ = writeln!(stderr, "{n}");
            }
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {}", e.code, e.message);
            1
        }
    }
}
