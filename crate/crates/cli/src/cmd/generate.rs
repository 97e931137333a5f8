use std::path::PathBuf;

use ivispar_core::generator::{generate_dataset, paper_grid, ComplexitySpec, GenerateError, PAPER_EPISODES_PER_CELL};
use ivispar_core::{astar, BoardSpec};

use super::write_file;
use crate::{Context, Failure};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Preset: 4x4 board, geoms 2-11 x lengths 2-11, interference 0, 3 episodes per cell.
    #[arg(long, conflicts_with_all = ["board", "geoms", "lengths", "interference"])]
    pub paper_grid: bool,
    /// Board size as COLSxROWS. Default 4x4.
    #[arg(long)]
    pub board: Option<String>,
    /// Geom counts: a value, an inclusive range `a-b`, or a comma list.
    #[arg(long)]
    pub geoms: Option<String>,
    /// Optimal path lengths, same syntax as --geoms.
    #[arg(long)]
    pub lengths: Option<String>,
    /// A* length minus Manhattan sum. Default 0.
    #[arg(long)]
    pub interference: Option<u32>,
    /// Keep only the first N grid cells (geoms-major order).
    #[arg(long, value_name = "N")]
    pub cells: Option<usize>,
    /// Episodes per cell. Default 3.
    #[arg(long)]
    pub per_cell: Option<usize>,
    /// Master seed. Default 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads, 0 for one per core. Output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Dataset file. Default DATA_DIR/datasets/paper.json with --paper-grid, else dataset.json.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Print A* expanded-node counts per cell to stderr.
    #[arg(long)]
    pub stats: bool,
}

/// Parses `5`, `2-11`, `2..11`, `2..=11` or `2,4,6`.
pub fn parse_values(s: &str) -> Result<Vec<u64>, String> {
    let s = s.trim();
    let one = |x: &str| x.trim().parse::<u64>().map_err(|_| format!("bad number `{x}` in `{s}`"));
    if s.contains(',') {
        return s.split(',').map(one).collect();
    }
    let split = s.split_once("..=").or_else(|| s.split_once("..")).or_else(|| s.split_once('-'));
    match split {
        Some((a, b)) => {
            let (a, b) = (one(a)?, one(b)?);
            if a > b {
                return Err(format!("empty range `{s}`"));
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![one(s)?]),
    }
}

fn grid(ctx: &Context, args: &Args) -> Result<Vec<ComplexitySpec>, Failure> {
    if args.paper_grid {
        return Ok(paper_grid());
    }
    let cfg = &ctx.config.generate;
    let board: BoardSpec = args
        .board
        .as_deref()
        .or(cfg.board.as_deref())
        .unwrap_or("4x4")
        .parse()
        .map_err(|e| Failure::usage(format!("--board: {e}")))?;
    let geoms = parse_values(args.geoms.as_deref().or(cfg.geoms.as_deref()).unwrap_or("2-11"))
        .map_err(|e| Failure::usage(format!("--geoms: {e}")))?;
    let lengths = parse_values(args.lengths.as_deref().or(cfg.lengths.as_deref()).unwrap_or("2-11"))
        .map_err(|e| Failure::usage(format!("--lengths: {e}")))?;
    let lengths: Vec<u32> = lengths
        .into_iter()
        .map(|l| u32::try_from(l).map_err(|_| Failure::usage(format!("--lengths: {l} is too large"))))
        .collect::<Result<_, _>>()?;
    let interference = args.interference.or(cfg.interference).unwrap_or(0);
    Ok(geoms
        .iter()
        .flat_map(|&g| lengths.iter().map(move |&l| ComplexitySpec::new(board, g as usize, l, interference)))
        .collect())
}

pub fn run(ctx: &Context, args: Args) -> Result<(), Failure> {
    let cfg = &ctx.config.generate;
    let mut grid = grid(ctx, &args)?;
    if let Some(n) = args.cells {
        grid.truncate(n);
    }
    if grid.is_empty() {
        return Err(Failure::usage("the grid has no cells"));
    }
    let per_cell = args.per_cell.or(cfg.per_cell).unwrap_or(PAPER_EPISODES_PER_CELL);
    let seed = args.seed.or(cfg.seed).unwrap_or(0);
    let jobs = args.jobs.or(cfg.jobs).unwrap_or(0);
    let dataset = generate_dataset(&grid, per_cell, seed, jobs).map_err(|e| match e {
        GenerateError::Search(_) => Failure::usage(e.to_string()),
        _ => Failure::infeasible(e.to_string()),
    })?;

    let output = args.output.clone().unwrap_or_else(|| {
        ctx.datasets_dir().join(if args.paper_grid { "paper.json" } else { "dataset.json" })
    });
    write_file(&output, dataset.to_bytes())?;
    eprintln!(
        "wrote {} episodes ({} cells x {per_cell}) to {}",
        dataset.episodes.len(),
        grid.len(),
        output.display()
    );

    if args.stats {
        eprintln!("cell,episodes,mean_expanded,max_expanded");
        for (cell, spec) in grid.iter().enumerate() {
            let eps = &dataset.episodes[cell * per_cell..(cell + 1) * per_cell];
            let expanded: Vec<usize> = eps
                .iter()
                .map(|e| astar(&e.start, &e.goal).map(|r| r.expanded))
                .collect::<Result<_, _>>()
                .map_err(|e| Failure::usage(e.to_string()))?;
            let mean = expanded.iter().sum::<usize>() as f64 / expanded.len().max(1) as f64;
            eprintln!(
                "{}-g{:02}-l{:02}-i{},{},{mean:.1},{}",
                spec.board,
                spec.num_geoms,
                spec.target_length,
                spec.interference,
                eps.len(),
                expanded.iter().max().unwrap_or(&0)
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("2-5").unwrap(), vec![2, 3, 4, 5]);
        assert_eq!(parse_values("2..=4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_values("2..4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_values("7").unwrap(), vec![7]);
        assert_eq!(parse_values("3, 5,9").unwrap(), vec![3, 5, 9]);
        assert!(parse_values("5-2").is_err());
        assert!(parse_values("x").is_err());
    }
}
