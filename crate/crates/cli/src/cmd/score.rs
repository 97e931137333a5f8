use std::collections::BTreeSet;
use std::path::PathBuf;

use ivispar_core::evaluator::{
    action_table_csv, aggregate, aggregate_aux, aux_table_csv, complexity_matrix_csv, metrics_table_csv,
    score_aux_records, summary_csv, AuxRecord, AuxSummary, EvalError, Grouping,
};

use super::{load_dataset, read_logs, write_file};
use crate::{Context, Failure};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Log file or directory searched recursively for `*.jsonl`. Default DATA_DIR/logs.
    #[arg(long, short)]
    pub logs: Option<PathBuf>,
    /// Dataset the logs were run on; checks format, digest and episode ids.
    #[arg(long, short)]
    pub dataset: Option<PathBuf>,
    /// Board-state inference replies, one JSON record per line
    /// (`model`, `modality`, `episode`, optional `state`, `raw_reply`). Needs --dataset.
    #[arg(long, requires = "dataset")]
    pub aux: Option<PathBuf>,
    /// Report directory. Without it the headline table goes to stdout.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

fn eval_failure(e: EvalError) -> Failure {
    Failure::format(e.to_string())
}

fn read_aux(path: &PathBuf) -> Result<Vec<AuxRecord>, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Failure::format(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn run(ctx: &Context, args: Args) -> Result<(), Failure> {
    let root = args.logs.clone().unwrap_or_else(|| ctx.logs_dir());
    let logs: Vec<_> = read_logs(&root)?;
    if logs.is_empty() && args.aux.is_none() {
        return Err(Failure::usage(format!("no episode logs found under {}", root.display())));
    }

    let dataset = args.dataset.as_deref().map(load_dataset).transpose()?;
    if let Some(ds) = &dataset {
        let digest = ds.digest();
        let ids: BTreeSet<&str> = ds.episodes.iter().map(|e| e.id.as_str()).collect();
        for (path, log) in &logs {
            if log.header.dataset_digest.as_deref().is_some_and(|d| d != digest) {
                return Err(Failure::format(format!(
                    "{}: log was produced from a different dataset version",
                    path.display()
                )));
            }
            if !ids.contains(log.header.episode.as_str()) {
                return Err(Failure::format(format!(
                    "{}: episode `{}` is not in the dataset",
                    path.display(),
                    log.header.episode
                )));
            }
        }
    }

    let logs: Vec<_> = logs.into_iter().map(|(_, l)| l).collect();
    let by_model = aggregate(&logs, Grouping::MODEL_MODALITY).map_err(eval_failure)?;
    let by_cell = aggregate(&logs, Grouping::FULL).map_err(eval_failure)?;
    if by_model.unscored > 0 {
        eprintln!("{} log(s) left unscored (transport failure or unfinished)", by_model.unscored);
    }

    let aux: Vec<AuxSummary> = match (&args.aux, &dataset) {
        (Some(path), Some(ds)) => {
            let records = read_aux(path)?;
            let reports = score_aux_records(ds, &records).map_err(eval_failure)?;
            aggregate_aux(&records, &reports)
        }
        _ => Vec::new(),
    };

    let metrics = metrics_table_csv(&by_model, &aux);
    match &args.output {
        None => print!("{metrics}"),
        Some(dir) => {
            write_file(&dir.join("metrics.csv"), &metrics)?;
            write_file(&dir.join("actions.csv"), action_table_csv(&by_model))?;
            write_file(&dir.join("summary.csv"), summary_csv(&by_model))?;
            write_file(&dir.join("complexity.csv"), complexity_matrix_csv(&by_cell))?;
            if args.aux.is_some() {
                write_file(&dir.join("aux.csv"), aux_table_csv(&aux))?;
                let json = serde_json::to_string_pretty(&aux).map_err(|e| Failure::usage(e.to_string()))?;
                write_file(&dir.join("aux.json"), json + "\n")?;
            }
            eprintln!("scored {} log(s); reports in {}", logs.len(), dir.display());
        }
    }
    Ok(())
}
