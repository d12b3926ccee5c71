//! `evmscope` command line.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use evmscope_core::attrs::AttributeRuleTable;
use evmscope_core::cfg::{build_cfg, execution_order};
use evmscope_core::disasm::{disassemble, strip_metadata};
use evmscope_core::features::{
    opcode_frequency, DetectionOptions, FeatureRecord, FilteredAbi, FrequencyOptions,
    DEFAULT_MAX_CONTEXT,
};
use evmscope_core::functions::recover_functions_at_depth;
use evmscope_core::signature::{LabelSpace, SignatureDb};
use evmscope_core::ssa::to_ssa;
use evmscope_core::DEFAULT_CONTEXT_DEPTH;
use serde::Serialize;
use serde_json::json;

use crate::abi::{self, FetchConfig, FetchOutcome};
use crate::dataset::{self, DatasetOutput, DEFAULT_SEED};
use crate::files;
use crate::input::{read_code, read_text};
use crate::report;

#[derive(Debug, Parser)]
#[command(name = "evmscope", version, about = "Static analysis of EVM bytecode")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// DFS depth for function contexts.
    #[arg(long, global = true, default_value_t = DEFAULT_CONTEXT_DEPTH)]
    pub depth: usize,
    /// Signature database (`selector<TAB>signature` per line).
    #[arg(long, global = true)]
    pub db: Option<PathBuf>,
    /// Parameter label space JSON.
    #[arg(long, global = true)]
    pub labels: Option<PathBuf>,
    /// Attribute rule table JSON.
    #[arg(long, global = true)]
    pub rules: Option<PathBuf>,
    /// Output file (a directory for `features`); stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Report errors as JSON on stderr.
    #[arg(long, global = true)]
    pub json_errors: bool,
    /// More logging (repeatable).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Instruction listing.
    Disasm {
        /// Bytecode file or hex literal; stdin when absent.
        input: Option<String>,
        #[arg(long)]
        json: bool,
    },
    /// Basic blocks and resolved jump edges.
    Cfg {
        input: Option<String>,
        /// Graphviz instead of JSON.
        #[arg(long)]
        dot: bool,
    },
    /// Public functions recovered from the selector dispatcher.
    Functions { input: Option<String> },
    /// Stack-free opcode stream in execution order.
    Ssa {
        input: Option<String>,
        /// Input is whitespace-separated mnemonics, not bytecode.
        #[arg(long)]
        tokens: bool,
        #[arg(long)]
        json: bool,
    },
    /// view/payable/pure for each function, or for a token list.
    Attrs {
        input: Option<String>,
        #[arg(long)]
        tokens: bool,
    },
    /// Build dataset records, vocabularies and the split manifest.
    Features(FeaturesArgs),
    /// Per-class opcode rates over detection records.
    Freq {
        /// Detection JSONL; stdin when absent.
        input: Option<String>,
        #[arg(long)]
        filter_generic: bool,
        #[arg(long, default_value_t = 0.99)]
        threshold: f64,
        /// Also list mnemonics whose rate is within this distance of 1.
        #[arg(long)]
        near_unit: Option<f64>,
    },
    /// Fetch and filter verified ABIs from a block explorer.
    FetchAbi {
        #[arg(required = true)]
        addresses: Vec<String>,
        #[arg(long, default_value = abi::DEFAULT_ENDPOINT)]
        endpoint: String,
        #[arg(long, default_value = "cache")]
        cache: PathBuf,
    },
    /// Render detector predictions as a report.
    Detect {
        /// Predictions JSONL; stdin when absent.
        predictions: Option<String>,
        /// Contract list, to add recovered functions to the report.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetKind {
    Signature,
    Detection,
    All,
}

#[derive(Debug, Args)]
pub struct FeaturesArgs {
    /// Contract list JSONL: {"id", "code", "labels"?, "abi"?}.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub kind: DatasetKind,
    /// Parameter-label predictions JSONL for contracts without an ABI.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Directory of cached ABIs (`<id>.json`).
    #[arg(long)]
    pub abi_dir: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_CONTEXT)]
    pub max_context: usize,
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(path) => {
            std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

impl Global {
    fn label_space(&self) -> Result<LabelSpace> {
        match &self.labels {
            Some(p) => Ok(files::load_label_space(p)?),
            None => Ok(LabelSpace::default()),
        }
    }

    fn rules(&self) -> Result<AttributeRuleTable> {
        match &self.rules {
            Some(p) => Ok(files::load_rules(p)?),
            None => Ok(AttributeRuleTable::default()),
        }
    }

    fn db(&self) -> Result<Option<SignatureDb>> {
        let Some(path) = &self.db else {
            return Ok(None);
        };
        let (db, report) = files::load_signature_db(path)?;
        if report.rejected() > 0 {
            log::warn!(
                "{}: {} malformed and {} selector-mismatched rows skipped",
                path.display(),
                report.malformed,
                report.selector_mismatch
            );
        }
        Ok(Some(db))
    }

    fn jobs(&self) -> usize {
        self.jobs
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
            .max(1)
    }
}

fn tokens_of(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}

fn execution_tokens(code: &[u8]) -> Vec<&'static str> {
    let cfg = build_cfg(strip_metadata(code).0);
    execution_order(&cfg)
        .iter()
        .flat_map(|id| cfg.blocks[id].mnemonics().collect::<Vec<_>>())
        .collect()
}

fn run_command(cli: &Cli) -> Result<()> {
    let g = &cli.global;
    let out = g.out.as_deref();
    match &cli.command {
        Command::Disasm { input, json } => {
            let insns = disassemble(&read_code(input.as_deref())?);
            if *json {
                emit_json(out, &insns)
            } else {
                let mut s = String::new();
                for i in &insns {
                    s.push_str(&i.to_string());
                    s.push('\n');
                }
                emit(out, s.as_bytes())
            }
        }
        Command::Cfg { input, dot } => {
            let cfg = build_cfg(&read_code(input.as_deref())?);
            if *dot {
                emit(out, cfg.to_dot().as_bytes())
            } else {
                emit_json(out, &cfg)
            }
        }
        Command::Functions { input } => {
            let cfg = build_cfg(&read_code(input.as_deref())?);
            let mut recovery = recover_functions_at_depth(&cfg, g.depth);
            recovery.apply_rules(&g.rules()?);
            let db = g.db()?;
            if let Some(db) = &db {
                recovery.resolve_signatures(db);
            }
            let functions: Vec<_> = recovery
                .by_entry()
                .into_iter()
                .map(|f| {
                    let candidates: Vec<&str> = db
                        .as_ref()
                        .map(|db| {
                            db.lookup(f.selector)
                                .iter()
                                .map(|r| r.text.as_str())
                                .collect()
                        })
                        .unwrap_or_default();
                    json!({
                        "selector": f.selector,
                        "entry": f.entry_block,
                        "fallback": f.fallback,
                        "attributes": f.attributes,
                        "signature": f.resolved_signature.as_ref().map(|r| &r.text),
                        "candidates": candidates,
                        "context": f.context,
                    })
                })
                .collect();
            emit_json(
                out,
                &json!({ "functions": functions, "warnings": recovery.warnings }),
            )
        }
        Command::Ssa {
            input,
            tokens,
            json,
        } => {
            let seq = if *tokens {
                to_ssa(&tokens_of(&read_text(input.as_deref())?))
            } else {
                to_ssa(&execution_tokens(&read_code(input.as_deref())?))
            };
            if *json {
                emit_json(out, &seq)
            } else {
                let mut line = seq.tokens.join(" ");
                line.push('\n');
                emit(out, line.as_bytes())
            }
        }
        Command::Attrs { input, tokens } => {
            let rules = g.rules()?;
            if *tokens {
                let toks = tokens_of(&read_text(input.as_deref())?);
                return emit_json(out, &rules.summarize(&toks));
            }
            let cfg = build_cfg(&read_code(input.as_deref())?);
            let mut recovery = recover_functions_at_depth(&cfg, g.depth);
            recovery.apply_rules(&rules);
            let rows: Vec<_> = recovery
                .by_entry()
                .into_iter()
                .map(|f| {
                    json!({
                        "selector": f.selector,
                        "fallback": f.fallback,
                        "view": f.attributes.view,
                        "payable": f.attributes.payable,
                        "pure": f.attributes.pure,
                    })
                })
                .collect();
            emit_json(out, &rows)
        }
        Command::Features(args) => features(g, args),
        Command::Freq {
            input,
            filter_generic,
            threshold,
            near_unit,
        } => {
            let text = read_text(input.as_deref())?;
            let name = input.as_deref().unwrap_or("<stdin>");
            let records: Vec<FeatureRecord> = files::parse_jsonl(&text, Path::new(name))?;
            let report = opcode_frequency(
                &records,
                FrequencyOptions {
                    filter_generic: *filter_generic,
                    threshold: *threshold,
                },
            );
            match near_unit {
                Some(tol) => emit_json(
                    out,
                    &json!({ "report": report, "near_unit": report.near_unit(*tol) }),
                ),
                None => emit_json(out, &report),
            }
        }
        Command::FetchAbi {
            addresses,
            endpoint,
            cache,
        } => {
            let mut config = FetchConfig::new(cache);
            config.endpoint = endpoint.clone();
            let results = abi::fetch_many(
                addresses,
                &config,
                g.jobs.unwrap_or(abi::DEFAULT_JOBS).max(1),
            );
            let mut lines = String::new();
            let mut failures = Vec::new();
            for (address, result) in addresses.iter().zip(results) {
                let row = match result {
                    Ok(FetchOutcome::Hit { abi, cached }) => {
                        json!({ "address": address, "status": "hit", "cached": cached, "abi": abi })
                    }
                    Ok(FetchOutcome::Miss { reason }) => {
                        json!({ "address": address, "status": "miss", "reason": reason })
                    }
                    Err(e) => {
                        failures.push(format!("{address}: {e}"));
                        json!({ "address": address, "status": "error", "error": e.to_string() })
                    }
                };
                lines.push_str(&row.to_string());
                lines.push('\n');
            }
            emit(out, lines.as_bytes())?;
            if !failures.is_empty() {
                bail!("{}", failures.join("; "));
            }
            Ok(())
        }
        Command::Detect {
            predictions,
            input,
            json,
        } => {
            let text = read_text(predictions.as_deref())?;
            let name = predictions.as_deref().unwrap_or("<stdin>");
            let preds: Vec<report::DetectionPrediction> =
                files::parse_jsonl(&text, Path::new(name))?;
            let mut recovered = BTreeMap::new();
            if let Some(path) = input {
                for (_, contract) in files::load_contracts(path)? {
                    let cfg = build_cfg(&contract.code);
                    recovered.insert(contract.id, recover_functions_at_depth(&cfg, g.depth));
                }
            }
            let reports = report::build_report(&preds, &recovered);
            if *json {
                emit_json(out, &reports)
            } else {
                emit(out, report::render_text(&reports).as_bytes())
            }
        }
    }
}

fn load_abis(
    entries: &[(files::ContractEntry, evmscope_core::features::Contract)],
    abi_dir: Option<&Path>,
) -> Result<BTreeMap<String, FilteredAbi>> {
    let mut abis = BTreeMap::new();
    for (entry, _) in entries {
        if let Some(items) = &entry.abi {
            let abi = FilteredAbi::from_items(items)
                .with_context(|| format!("{}: inline ABI", entry.id))?;
            abis.insert(entry.id.clone(), abi);
        } else if let Some(dir) = abi_dir {
            let path = abi::cache_path(dir, &entry.id.to_ascii_lowercase());
            if path.is_file() {
                let text = std::fs::read_to_string(&path)?;
                let abi =
                    abi::filter_abi_json(&text).with_context(|| format!("{}", path.display()))?;
                abis.insert(entry.id.clone(), abi);
            }
        }
    }
    Ok(abis)
}

fn features(g: &Global, args: &FeaturesArgs) -> Result<()> {
    let space = g.label_space()?;
    let entries = files::load_contracts(&args.input)?;
    let contracts: Vec<_> = entries.iter().map(|(_, c)| c.clone()).collect();
    let jobs = g.jobs();

    let signature = match args.kind {
        DatasetKind::Detection => None,
        _ => {
            let Some(db) = g.db()? else {
                bail!("--db is required for signature records");
            };
            Some(dataset::build_signature_dataset(
                &contracts, &db, &space, g.depth, jobs,
            ))
        }
    };
    let detection = match args.kind {
        DatasetKind::Signature => None,
        _ => {
            let abis = load_abis(&entries, args.abi_dir.as_deref())?;
            let predictions = match &args.predictions {
                Some(p) => files::load_signature_predictions(p)?,
                None => Vec::new(),
            };
            let opts = DetectionOptions {
                max_context: args.max_context,
                depth: g.depth,
                rules: g.rules()?,
            };
            Some(dataset::build_detection_dataset(
                &entries,
                &abis,
                &predictions,
                &space,
                &opts,
                jobs,
            ))
        }
    };
    if let Some((_, stats)) = &signature {
        log::info!(
            "signature: {} records, {} unresolved, {} ambiguous, {} outside the label space",
            stats.records,
            stats.unresolved,
            stats.ambiguous,
            stats.out_of_space
        );
    }
    let output = DatasetOutput {
        signature,
        detection,
        contract_ids: contracts.iter().map(|c| c.id.clone()).collect(),
        seed: args.seed,
        depth: g.depth,
        max_context: args.max_context,
    };
    match &g.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let manifest = dataset::write_dataset(dir, &output, &space)?;
            log::info!("wrote {} under {}", manifest.files.len(), dir.display());
            Ok(())
        }
        None => {
            let mut buf = Vec::new();
            if let Some((records, _)) = &output.signature {
                dataset::write_jsonl(&mut buf, records)?;
            }
            if let Some((records, _)) = &output.detection {
                dataset::write_jsonl(&mut buf, records)?;
            }
            emit(None, &buf)
        }
    }
}

/// Parses `args` (program name first), runs, and returns the exit code:
/// 0 success, 1 processing error, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let json_errors = args.iter().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            if json_errors {
                let msg = e.kind().to_string();
                eprintln!(
                    "{}",
                    json!({ "error": msg, "kind": "usage", "detail": e.to_string() })
                );
            } else {
                let _ = e.print();
            }
            return 2;
        }
    };
    let level = match cli.global.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();

    match run_command(&cli) {
        Ok(()) => 0,
        Err(e) => {
            if cli.global.json_errors {
                eprintln!(
                    "{}",
                    json!({ "error": format!("{e:#}"), "kind": "processing" })
                );
            } else {
                eprintln!("error: {e:#}");
            }
            1
        }
    }
}
