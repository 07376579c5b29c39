//! Cartesian sweeps: every grid point runs one check on a bounded pool; results merge in grid order.

use crate::config::RunConfig;
use crate::document::{check, Outcome};
use crate::{run_check, CheckKind};
use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;
use serde_json::json;

/// All axis combinations in lexicographic order of axis name, then value order.
fn grid_points(cfg: &RunConfig) -> Vec<Vec<(String, f64)>> {
    let mut points = vec![vec![]];
    for (axis, values) in &cfg.sweep.axes {
        points = points
            .into_iter()
            .flat_map(|p: Vec<(String, f64)>| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push((axis.clone(), *v));
                    q
                })
            })
            .collect();
    }
    points
}

fn file_name(experiment: &str, idx: usize, point: &[(String, f64)]) -> String {
    let tags: Vec<String> = point.iter().map(|(a, v)| format!("{a}-{v}")).collect();
    format!("{experiment}_{idx:03}_{}.csv", tags.join("_"))
}

pub fn run(cfg: &RunConfig, jobs: Option<usize>) -> Result<Outcome> {
    let kind = CheckKind::parse(&cfg.sweep.experiment)
        .ok_or_else(|| anyhow!("unknown sweep experiment `{}`", cfg.sweep.experiment))?;
    if cfg.sweep.axes.is_empty() || cfg.sweep.axes.values().any(|v| v.is_empty()) {
        bail!("sweep needs at least one axis and no empty axis");
    }
    let points = grid_points(cfg);
    let configs: Vec<RunConfig> = points
        .iter()
        .map(|p| {
            let mut c = cfg.clone();
            for (axis, v) in p {
                c.set_axis(axis, *v)?;
            }
            c.validate()?;
            Ok(c)
        })
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.unwrap_or(0)).build()?;
    let results: Vec<Result<Outcome>> = pool.install(|| configs.par_iter().map(|c| run_check(c, kind)).collect());
    let mut merged = Outcome::checked(vec![], json!(null));
    let mut runs = vec![];
    for (idx, (point, res)) in points.iter().zip(results).enumerate() {
        let out = res?;
        let name = file_name(&cfg.sweep.experiment, idx, point);
        let pass = out.verdict != crate::document::Verdict::Fail;
        merged.checks.push(check(name.trim_end_matches(".csv"), pass));
        runs.push(json!({
            "point": point.iter().map(|(a, v)| (a.clone(), json!(v))).collect::<serde_json::Map<_, _>>(),
            "verdict": out.verdict,
            "file": out.csv.first().map(|_| name.clone()),
        }));
        if let Some((_, bytes)) = out.csv.into_iter().next() {
            merged.csv.push((name, bytes));
        }
    }
    let all = merged.checks.iter().all(|c| c.pass);
    merged.verdict = crate::document::Verdict::from_pass(all);
    merged.payload = json!({ "experiment": cfg.sweep.experiment, "runs": runs });
    Ok(merged)
}
