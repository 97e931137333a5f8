use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use super::{load_dataset, load_templates, read_logs};
use crate::{Context, Failure};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Dataset the logs were run on. Default DATA_DIR/datasets/paper.json.
    #[arg(long, short)]
    pub dataset: Option<PathBuf>,
    /// Log file or directory searched recursively for `*.jsonl`. Default DATA_DIR/logs.
    #[arg(long, short)]
    pub logs: Option<PathBuf>,
    /// Directory with the prompt template files the logs were produced with. Default: built-in templates.
    #[arg(long)]
    pub templates: Option<PathBuf>,
}

pub fn run(ctx: &Context, args: Args) -> Result<(), Failure> {
    let dataset = load_dataset(&args.dataset.clone().unwrap_or_else(|| ctx.datasets_dir().join("paper.json")))?;
    let templates = Arc::new(load_templates(args.templates.as_deref())?);
    let root = args.logs.clone().unwrap_or_else(|| ctx.logs_dir());
    let logs = read_logs(&root)?;
    if logs.is_empty() {
        return Err(Failure::usage(format!("no episode logs found under {}", root.display())));
    }
    let episodes: HashMap<&str, Arc<_>> =
        dataset.episodes.iter().map(|e| (e.id.as_str(), Arc::new(e.clone()))).collect();

    let mut failures = 0;
    for (path, log) in &logs {
        let verdict = match episodes.get(log.header.episode.as_str()) {
            None => Err(format!("episode `{}` is not in the dataset", log.header.episode)),
            Some(ep) => log.replay(ep.clone(), templates.clone()).map_err(|m| m.to_string()),
        };
        match verdict {
            Ok(()) => println!("ok   {} ({})", path.display(), log.header.session),
            Err(reason) => {
                failures += 1;
                println!("FAIL {} ({}): {reason}", path.display(), log.header.session);
            }
        }
    }
    if failures > 0 {
        return Err(Failure::format(format!("{failures} of {} log(s) do not replay", logs.len())));
    }
    Ok(())
}
