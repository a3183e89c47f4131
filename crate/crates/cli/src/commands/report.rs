use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::run::{path_value, Outcome, Run};
use crate::Global;

#[derive(clap::Args, Debug)]
pub struct Args {
    /// Run directories, or directories whose subdirectories are runs.
    #[arg(required = true)]
    dirs: Vec<PathBuf>,
}

/// One graph's results, merged across the runs that used it.
#[derive(Default, Serialize)]
struct Row {
    graph: String,
    clean_accuracy: Option<f64>,
    attacked_accuracy: Option<f64>,
    angcn_accuracy: Option<f64>,
    attack_success_rate: Option<f64>,
    runs: Vec<String>,
}

#[derive(Serialize)]
struct Report {
    rows: Vec<Row>,
    warnings: Vec<String>,
}

struct RunRecord {
    dir: PathBuf,
    command: String,
    graph: String,
    metrics: Value,
}

fn read_json(path: &Path) -> Result<Value, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn read_run(dir: &Path) -> Result<RunRecord, String> {
    let manifest = read_json(&dir.join("manifest.json"))?;
    let metrics = read_json(&dir.join("metrics.json"))?;
    let command = manifest["command"].as_str().unwrap_or_default().to_string();
    let graph = manifest["inputs"]["graph"].as_str().unwrap_or("(none)").to_string();
    Ok(RunRecord {
        dir: dir.to_path_buf(),
        command,
        graph,
        metrics,
    })
}

/// Run directories under `dir`: itself when it holds a manifest, else its
/// immediate subdirectories that do, in name order.
fn discover(dir: &Path, warnings: &mut Vec<String>) -> Vec<PathBuf> {
    if dir.join("manifest.json").is_file() {
        return vec![dir.to_path_buf()];
    }
    let mut found = Vec::new();
    match fs::read_dir(dir) {
        Ok(entries) => {
            for entry in entries.flatten() {
                let p = entry.path();
                if p.is_dir() {
                    if p.join("manifest.json").is_file() {
                        found.push(p);
                    } else {
                        warnings.push(format!("{}: no manifest.json", p.display()));
                    }
                }
            }
        }
        Err(e) => warnings.push(format!("{}: {e}", dir.display())),
    }
    if found.is_empty() {
        warnings.push(format!("{}: no runs found", dir.display()));
    }
    found.sort();
    found
}

fn merge(runs: &[RunRecord]) -> Vec<Row> {
    let mut rows: BTreeMap<&str, Row> = BTreeMap::new();
    for r in runs {
        let row = rows.entry(&r.graph).or_insert_with(|| Row {
            graph: r.graph.clone(),
            ..Row::default()
        });
        let m = &r.metrics;
        match r.command.as_str() {
            "train" => row.clean_accuracy = m["test_accuracy"].as_f64().or(row.clean_accuracy),
            "attack" => {
                row.clean_accuracy = row.clean_accuracy.or(m["clean_accuracy"].as_f64());
                row.attacked_accuracy = m["attacked_accuracy"].as_f64();
                row.attack_success_rate = m["success_rate"].as_f64();
            }
            "defend" => row.angcn_accuracy = m["best_acc_g"].as_f64(),
            _ => {}
        }
        row.runs.push(format!("{} ({})", r.dir.display(), r.command));
    }
    rows.into_values().collect()
}

fn markdown(rows: &[Row]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    let mut out =
        String::from("| graph | clean acc | attacked acc | AN-GCN acc | attack success |\n|---|---|---|---|---|\n");
    for r in rows {
        writeln!(
            out,
            "| {} | {} | {} | {} | {} |",
            r.graph,
            cell(r.clean_accuracy),
            cell(r.attacked_accuracy),
            cell(r.angcn_accuracy),
            cell(r.attack_success_rate)
        )
        .unwrap();
    }
    out
}

pub fn run(global: &Global, args: Args) -> Outcome {
    let mut warnings = Vec::new();
    let mut runs = Vec::new();
    for dir in &args.dirs {
        for d in discover(dir, &mut warnings) {
            match read_run(&d) {
                Ok(r) => runs.push(r),
                Err(e) => warnings.push(e),
            }
        }
    }
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let rows = merge(&runs);

    let mut run = Run::new(&global.out_dir, "report", global.seed)?;
    for (i, dir) in args.dirs.iter().enumerate() {
        run.input(&format!("dir{i}"), path_value(dir));
    }
    let table = markdown(&rows);
    print!("{table}");
    run.write("report.md", &table)?;
    run.write_json("report.json", &Report { rows, warnings })?;
    run.finish(&serde_json::json!({}))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn record(command: &str, graph: &str, metrics: Value) -> RunRecord {
        RunRecord {
            dir: PathBuf::from(command),
            command: command.into(),
            graph: graph.into(),
            metrics,
        }
    }

    #[test]
    fn runs_on_one_graph_share_a_row() {
        let runs = [
            record("train", "g", json!({"test_accuracy": 0.8})),
            record(
                "attack",
                "g",
                json!({"clean_accuracy": 0.7, "attacked_accuracy": 0.6, "success_rate": 1.0}),
            ),
            record("defend", "g", json!({"best_acc_g": 0.75})),
            record("train", "h", json!({"test_accuracy": 0.5})),
        ];
        let rows = merge(&runs);
        assert_eq!(rows.len(), 2);
        let g = &rows[0];
        assert_eq!(g.clean_accuracy, Some(0.8));
        assert_eq!(g.attacked_accuracy, Some(0.6));
        assert_eq!(g.angcn_accuracy, Some(0.75));
        assert_eq!(g.attack_success_rate, Some(1.0));
        assert_eq!(rows[1].clean_accuracy, Some(0.5));
    }

    #[test]
    fn empty_table_has_only_a_header() {
        assert_eq!(markdown(&[]).lines().count(), 2);
    }
}
