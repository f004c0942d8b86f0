use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use sha2::{Digest, Sha256};

use symdist::analysis::{self, locate_intervals, PipelineParams};
use symdist::archive::{load_archive, save_archive, write_tsv};
use symdist::distances::{count_fasta_files, CountArchive};
use symdist::dissim::DissimilarityParams;
use symdist::distributions::{to_distribution, TotalScope};
use symdist::nullmodel::{self, RNG_NAME};
use symdist::peaks::find_peaks;
use symdist::report::{self, Cell, Table};
use symdist::seq_io::open_fasta;
use symdist::words::WordCode;

#[derive(Parser, Debug)]
#[command(name = "symdist", version, about = "Inter-word distance distributions and reversed-complement pair dissimilarity")]
struct Cli {
    /// Worker threads (0 = all available cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Write tables as JSON records instead of TSV.
    #[arg(long, global = true)]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct PeakArgs {
    /// Peak window width in distances.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(2..))]
    h: u32,

    /// Number of strongest peaks compared per distribution (exact matching, at most 8).
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u32).range(1..=8))]
    n: u32,

    /// Upper end of the distance domain; the lower end is k+1.
    #[arg(long = "domain-hi", default_value_t = 1000)]
    domain_hi: u32,
}

impl PeakArgs {
    fn dissim(&self) -> DissimilarityParams {
        DissimilarityParams { h: self.h as usize, n: self.n as usize, domain_hi: self.domain_hi }
    }
}

#[derive(Args, Debug, Clone, Copy)]
struct FilterArgs {
    /// Quantile of all word totals S^w at or below which a pair is excluded.
    #[arg(long = "filter-level", default_value_t = 0.25)]
    filter_level: f64,

    /// Lower selection percentile of the retained dissimilarities.
    #[arg(long = "low", default_value_t = 0.10)]
    low: f64,

    /// Upper selection percentile of the retained dissimilarities.
    #[arg(long = "high", default_value_t = 0.90)]
    high: f64,

    /// Compute S^w over every recorded distance instead of the domain only.
    #[arg(long = "all-distances")]
    all_distances: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Count inter-word distances for every word of length k.
    Count {
        /// FASTA input (plain or gzip); repeat for several files.
        #[arg(long, required = true)]
        fasta: Vec<PathBuf>,
        /// Word length.
        #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u32).range(1..=15))]
        k: u32,
        /// Largest distance recorded; longer gaps are discarded.
        #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u32).range(1..))]
        dmax: u32,
        /// Output archive (binary; `.tsv` extension writes the TSV form).
        #[arg(long)]
        out: PathBuf,
        /// Force the TSV form regardless of extension.
        #[arg(long)]
        tsv: bool,
    },
    /// Dump the relative-frequency distribution of one word.
    Dist {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        word: String,
        /// Upper end of the distance domain; the lower end is k+1.
        #[arg(long = "domain-hi", default_value_t = 1000)]
        domain_hi: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Strongest peaks of one word's distribution.
    Peaks {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        word: String,
        #[command(flatten)]
        peaks: PeakArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dissimilarity of every reversed-complement pair.
    Dissim {
        #[arg(long)]
        archive: PathBuf,
        #[command(flatten)]
        peaks: PeakArgs,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full pair analysis: pairs.tsv, summary.tsv, selection.tsv.
    Report {
        #[arg(long)]
        archive: PathBuf,
        #[command(flatten)]
        peaks: PeakArgs,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Chromosome where a pair's favoured distances are most pronounced.
    Localize {
        #[arg(long)]
        archive: PathBuf,
        #[arg(long)]
        word: String,
        #[command(flatten)]
        peaks: PeakArgs,
        /// BED file of occurrence pairs at the favoured distances.
        #[arg(long)]
        bed: Option<PathBuf>,
        /// FASTA to scan for positions (defaults to the archive's sources).
        #[arg(long)]
        fasta: Vec<PathBuf>,
        /// Per-chromosome table (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a sequence from a strand-symmetric Markov model.
    Simulate {
        /// Training FASTA.
        #[arg(long)]
        train: PathBuf,
        /// Markov order (context length).
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(0..=12))]
        order: u32,
        /// Mirror every count onto its reversed complement.
        #[arg(long)]
        symmetrize: bool,
        #[arg(long)]
        length: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn file_digest(path: &Path) -> Result<String> {
    let mut f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut h = Sha256::new();
    io::copy(&mut f, &mut h)?;
    Ok(hex::encode(h.finalize()))
}

fn header(command: &str, config: String, inputs: &[&Path]) -> Result<Vec<(String, String)>> {
    let mut meta = vec![
        ("tool".to_string(), format!("symdist {}", env!("CARGO_PKG_VERSION"))),
        ("command".to_string(), command.to_string()),
        ("config".to_string(), config),
    ];
    for p in inputs {
        meta.push(("input".to_string(), format!("{}\t{}", p.display(), file_digest(p)?)));
    }
    Ok(meta)
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn parse_word(text: &str, archive: &CountArchive) -> Result<WordCode> {
    let w: WordCode = text.parse().with_context(|| format!("invalid word {text:?}"))?;
    if w.k() != archive.k() {
        bail!("word {text} has length {} but the archive has k = {}", w.k(), archive.k());
    }
    Ok(w)
}

fn pipeline_params(p: &PeakArgs, f: &FilterArgs) -> PipelineParams {
    PipelineParams {
        dissim: p.dissim(),
        filter_level: f.filter_level,
        low_level: f.low,
        high_level: f.high,
        scope: if f.all_distances { TotalScope::AllRecorded } else { TotalScope::Domain },
    }
}

fn pipeline_config(k: usize, p: &PipelineParams) -> String {
    format!(
        "k={} domain=[{},{}] h={} n={} filter_level={} low={} high={} total_scope={:?}",
        k,
        k + 1,
        p.dissim.domain_hi,
        p.dissim.h,
        p.dissim.n,
        p.filter_level,
        p.low_level,
        p.high_level,
        p.scope
    )
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    let json = cli.json;
    match cli.command {
        Command::Count { fasta, k, dmax, out, tsv } => {
            info!("counting k={k} d_max={dmax} over {} file(s)", fasta.len());
            let archive = count_fasta_files(&fasta, k as usize, dmax, cli.threads)?;
            let as_tsv = tsv || out.extension().is_some_and(|e| e == "tsv");
            if as_tsv {
                write_tsv(&archive, BufWriter::new(File::create(&out)?))?;
            } else {
                save_archive(&archive, &out)?;
            }
            info!("wrote {}", out.display());
        }
        Command::Dist { archive: path, word, domain_hi, out } => {
            let archive = load_archive(&path)?;
            let w = parse_word(&word, &archive)?;
            if domain_hi > archive.d_max() {
                bail!("domain upper bound {domain_hi} exceeds archive d_max {}", archive.d_max());
            }
            let f = to_distribution(w, archive.histogram(w), domain_hi)?;
            let config = format!("word={w} k={} domain=[{},{}] S_w={}", w.k(), f.lo, f.hi, f.total);
            let mut t = Table::new(&["distance", "frequency"]).with_meta(&header("dist", config, &[&path])?);
            for (i, x) in f.freqs.iter().enumerate() {
                t.push(vec![(f.lo as u64 + i as u64).into(), (*x).into()]);
            }
            t.write(sink(out.as_deref())?, json)?;
        }
        Command::Peaks { archive: path, word, peaks, out } => {
            let archive = load_archive(&path)?;
            let w = parse_word(&word, &archive)?;
            let p = peaks.dissim();
            if p.domain_hi > archive.d_max() {
                bail!("domain upper bound {} exceeds archive d_max {}", p.domain_hi, archive.d_max());
            }
            let f = to_distribution(w, archive.histogram(w), p.domain_hi)?;
            let ps = find_peaks(&f, p.h, p.n)?;
            let config = format!(
                "word={w} k={} domain=[{},{}] h={} n={} v={} R={}",
                w.k(),
                f.lo,
                f.hi,
                p.h,
                p.n,
                report::fmt_sig(ps.v),
                ps.range
            );
            let mut t = Table::new(&["rank", "location", "size"]).with_meta(&header("peaks", config, &[&path])?);
            for (i, pk) in ps.peaks.iter().enumerate() {
                t.push(vec![(i + 1).into(), pk.location.into(), pk.size.into()]);
            }
            t.write(sink(out.as_deref())?, json)?;
        }
        Command::Dissim { archive: path, peaks, filter, out } => {
            let archive = load_archive(&path)?;
            let params = pipeline_params(&peaks, &filter);
            let rep = analysis::run_pipeline(&archive, &params)?;
            let meta = header("dissim", pipeline_config(archive.k(), &params), &[&path])?;
            report::pairs_table(&rep).with_meta(&meta).write(sink(out.as_deref())?, json)?;
        }
        Command::Report { archive: path, peaks, filter, outdir } => {
            let archive = load_archive(&path)?;
            let params = pipeline_params(&peaks, &filter);
            let rep = analysis::run_pipeline(&archive, &params)?;
            std::fs::create_dir_all(&outdir)?;
            let meta = header("report", pipeline_config(archive.k(), &params), &[&path])?;
            let ext = if json { "json" } else { "tsv" };
            let write = |name: &str, t: Table| -> Result<()> {
                let p = outdir.join(format!("{name}.{ext}"));
                t.with_meta(&meta).write(sink(Some(&p))?, json)?;
                Ok(())
            };
            write("pairs", report::pairs_table(&rep))?;
            let mut summary = report::summary_report(&rep.summary);
            for row in report::counts_report(&rep.summary, rep.selection.as_ref()).rows {
                let mut r = row;
                r.extend([Cell::Na, Cell::Na, Cell::Na]);
                summary.push(r);
            }
            write("summary", summary)?;
            write("selection", report::selection_table(rep.selection.as_ref()))?;
            info!(
                "{} pairs retained of {}, d defined for {}",
                rep.summary.pairs_retained,
                rep.summary.pairs_total,
                rep.selection.as_ref().map_or(0, |_| rep.pairs.iter().filter(|r| r.status == symdist::PairStatus::Ok).count())
            );
        }
        Command::Localize { archive: path, word, peaks, bed, fasta, out } => {
            let archive = load_archive(&path)?;
            let w = parse_word(&word, &archive)?;
            let params = PipelineParams { dissim: peaks.dissim(), ..PipelineParams::default() };
            let mut rep = analysis::localize(&archive, w, &params)?;
            if let Some(bed_path) = &bed {
                let sources: Vec<PathBuf> = if fasta.is_empty() {
                    archive.sources().iter().map(|s| PathBuf::from(&s.path)).collect()
                } else {
                    fasta.clone()
                };
                if sources.is_empty() {
                    bail!("no FASTA to scan: pass --fasta");
                }
                locate_intervals(&mut rep, &sources)?;
                report::export_bed(&rep.intervals, sink(Some(bed_path))?)?;
            }
            let favoured: Vec<String> = rep.favoured.iter().map(|p| report::fmt_sig(p.location)).collect();
            let config = format!(
                "word={} pair={}/{} favoured={} top={}",
                rep.word,
                rep.pair.w,
                rep.pair.w_bar,
                favoured.join(","),
                rep.top_chromosome.as_deref().unwrap_or("NA")
            );
            let mut t = Table::new(&["chromosome", "at_favoured", "total", "ratio"])
                .with_meta(&header("localize", config, &[&path])?);
            for c in &rep.per_chromosome {
                t.push(vec![c.chromosome.clone().into(), c.at_favoured.into(), c.total.into(), c.ratio.into()]);
            }
            t.write(sink(out.as_deref())?, json)?;
        }
        Command::Simulate { train, order, symmetrize, length, seed, out } => {
            let model = nullmodel::train(open_fasta(&train)?, order as usize, symmetrize)?;
            let seq = nullmodel::generate(&model, length, seed)?;
            let mut w = sink(Some(&out))?;
            writeln!(
                w,
                ">sim order={order} symmetrized={symmetrize} seed={seed} rng={RNG_NAME} length={length} train_sha256={}",
                file_digest(&train)?
            )?;
            for line in seq.chunks(60) {
                w.write_all(line)?;
                w.write_all(b"\n")?;
            }
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
