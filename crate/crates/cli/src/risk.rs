//! `risk`: Monte-Carlo excess-risk curves with theory predictions, behind a
//! runtime budget.

use anisokrr::experiment::{run_risk_grid, RiskRow, DEFAULT_FLOP_RATE};

use crate::config::RiskSettings;
use crate::output::{float, Table};
use crate::CliError;

pub fn estimate_seconds(s: &RiskSettings) -> f64 {
    s.grid.estimate_seconds(DEFAULT_FLOP_RATE)
}

/// Refuses grids whose estimated runtime exceeds the budget.
pub fn check_budget(s: &RiskSettings) -> Result<f64, CliError> {
    let est = estimate_seconds(s);
    if est > s.budget {
        return Err(CliError::Budget { estimate: est, budget: s.budget });
    }
    Ok(est)
}

pub fn risk_rows(s: &RiskSettings) -> Result<Vec<RiskRow>, CliError> {
    check_budget(s)?;
    Ok(run_risk_grid(&s.grid)?)
}

pub fn cmd_risk(s: &RiskSettings) -> Result<Table, CliError> {
    let est = check_budget(s)?;
    let rows = run_risk_grid(&s.grid)?;
    let mut table = Table::new(
        "risk",
        s.grid.master_seed,
        s.echo(),
        vec![
            "alpha",
            "n",
            "seed_count",
            "target",
            "mean_risk",
            "std_err",
            "relative_risk",
            "theory_risk",
            "theory_mode",
        ],
    );
    table.note("estimated_seconds", format!("{est:.1}"));
    for r in rows {
        table.push(vec![
            float(r.alpha),
            r.n.to_string(),
            r.seed_count.to_string(),
            r.target.clone(),
            float(r.mean_risk),
            float(r.std_err),
            float(r.relative_risk),
            float(r.theory_risk),
            r.theory_mode.to_string(),
        ]);
    }
    Ok(table)
}
