//! Reference JSON-lines model server over stdio, backed by a model TSV.
//!
//! Reads `{"id": .., "smiles": .., "num_results": ..}` per line and answers
//! `{"id": .., "predictions": [{"reactants": [..], "probability": ..}]}`.
//! Unknown products get an empty list; malformed requests get an `error`
//! reply and the loop continues.

use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::time::Duration;

use clap::Parser;
use serde_json::{json, Value};

use synthsearch::gateway::FileModel;
use synthsearch::Normalizer;

#[derive(Debug, Parser)]
struct Args {
    /// Model TSV (`product<TAB>reactants<TAB>probability`).
    table: PathBuf,
    /// Sleep before every reply.
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
}

fn answer(model: &FileModel, n: &Normalizer, line: &str) -> Value {
    let req: Value = match serde_json::from_str(line) {
        Ok(v) => v,
        Err(e) => return json!({ "id": null, "error": format!("bad request: {e}") }),
    };
    let id = req.get("id").cloned().unwrap_or(Value::Null);
    let Some(smiles) = req.get("smiles").and_then(Value::as_str) else {
        return json!({ "id": id, "error": "missing smiles" });
    };
    let limit = req.get("num_results").and_then(Value::as_u64).unwrap_or(u64::MAX) as usize;
    let preds = match n.normalize(smiles) {
        Ok(m) => model.entries(&m.id),
        Err(e) => return json!({ "id": id, "error": e.to_string() }),
    };
    let preds: Vec<Value> = preds
        .iter()
        .take(limit)
        .map(|p| json!({ "reactants": p.reactants, "probability": p.probability }))
        .collect();
    json!({ "id": id, "predictions": preds })
}

fn main() {
    let args = Args::parse();
    let model = match FileModel::load(&args.table) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("table-server: {e}");
            std::process::exit(2);
        }
    };
    let n = Normalizer::default();
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for line in stdin.lock().lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        if args.delay_ms > 0 {
            std::thread::sleep(Duration::from_millis(args.delay_ms));
        }
        let reply = answer(&model, &n, &line);
        if writeln!(stdout, "{reply}").and_then(|_| stdout.flush()).is_err() {
            break;
        }
    }
}
