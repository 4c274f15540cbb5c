//! Parameter grids evaluated in parallel, written in a fixed order.

use rayon::prelude::*;

use super::commands::{self, Outcome};
use super::config::{RunConfig, SweepConfig, SweepQuantity};
use super::output::ResultRecord;
use crate::error::{Error, Result};

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "NBE_THREADS";

#[derive(Clone, Debug, PartialEq)]
struct Cell {
    epsilon: f64,
    delta: Option<f64>,
    n_min: usize,
}

fn grid(cfg: &RunConfig, sw: &SweepConfig) -> Vec<Cell> {
    let eps = sw.epsilon.clone().unwrap_or_else(|| cfg.compute.epsilon.clone());
    let deltas: Vec<Option<f64>> = match sw.quantity {
        SweepQuantity::Katok => sw.delta.clone().unwrap_or_else(|| cfg.compute.delta.clone()).into_iter().map(Some).collect(),
        _ => vec![None],
    };
    let n_mins = sw.n_min.clone().unwrap_or_else(|| vec![cfg.compute.n_min]);
    let mut cells = Vec::new();
    for &e in &eps {
        for &d in &deltas {
            for &n in &n_mins {
                cells.push(Cell { epsilon: e, delta: d, n_min: n });
            }
        }
    }
    cells.sort_by(|a, b| {
        a.epsilon
            .total_cmp(&b.epsilon)
            .then(a.delta.unwrap_or(0.0).total_cmp(&b.delta.unwrap_or(0.0)))
            .then(a.n_min.cmp(&b.n_min))
    });
    cells.dedup();
    cells
}

pub(crate) fn validate(cfg: &RunConfig) -> Result<()> {
    let sw = cfg.sweep.as_ref().ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    for cell in grid(cfg, sw) {
        cell_config(cfg, sw, &cell, 0).validate()?;
    }
    match sw.quantity {
        SweepQuantity::Katok => {
            cfg.require_measure()?;
        }
        SweepQuantity::BrinKatok => {
            cfg.require_measure()?;
            if cfg.compute.bk_mode == super::config::BkModeConfig::MonteCarlo {
                cfg.require_seed()?;
            }
        }
        _ => {}
    }
    Ok(())
}

fn cell_config(cfg: &RunConfig, sw: &SweepConfig, cell: &Cell, index: usize) -> RunConfig {
    let mut c = cfg.clone();
    c.sweep = None;
    c.compute.epsilon = vec![cell.epsilon];
    if let Some(d) = cell.delta {
        c.compute.delta = vec![d];
    }
    c.compute.n_min = cell.n_min;
    if sw.quantity == SweepQuantity::BrinKatok {
        c.compute.seed = c.compute.seed.map(|s| s.wrapping_add(index as u64));
    }
    c
}

fn run_cell(cfg: &RunConfig, quantity: SweepQuantity) -> Outcome {
    let (res, primary) = match quantity {
        SweepQuantity::Entropy => (commands::entropy(cfg), "bowen_entropy"),
        SweepQuantity::Katok => (commands::katok(cfg), "katok_exponent"),
        SweepQuantity::BrinKatok => (commands::brin_katok(cfg), "brin_katok"),
        SweepQuantity::Spanning => (commands::spanning(cfg), "spanning_rate"),
    };
    match res {
        Ok(mut o) => {
            o.records.retain(|r| r.quantity == primary);
            o
        }
        Err(e) => {
            let mut o = Outcome::default();
            let mut row = ResultRecord::new(primary, cfg.compute.n_min, cfg.compute.n_max).epsilon(cfg.compute.epsilon[0]);
            row.delta = (quantity == SweepQuantity::Katok).then(|| cfg.compute.delta[0]);
            o.fail(row, &e);
            o
        }
    }
}

/// Worker count: the configured value, capped by `NBE_THREADS` when set.
pub fn thread_count(configured: Option<usize>) -> usize {
    let env = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|&n| n > 0);
    let base = configured.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    env.map_or(base, |cap| base.min(cap)).max(1)
}

pub fn sweep(cfg: &RunConfig) -> Result<Outcome> {
    validate(cfg)?;
    let sw = cfg.sweep.as_ref().expect("validated");
    let cells = grid(cfg, sw);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(sw.threads))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<Outcome> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, cell)| run_cell(&cell_config(cfg, sw, cell, i), sw.quantity))
            .collect()
    });
    let mut out = Outcome::default();
    for o in outcomes {
        out.absorb(o);
    }
    Ok(out)
}
