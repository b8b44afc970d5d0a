use serde_json::{json, Value};

use crate::Command;

fn csv(columns: &[(&str, &str)]) -> Value {
    json!({
        "format": "csv",
        "header": true,
        "columns": columns.iter().map(|(n, t)| json!({"name": n, "type": t})).collect::<Vec<_>>(),
    })
}

fn object(fields: &[(&str, &str)]) -> Value {
    json!({
        "format": "json",
        "fields": fields.iter().map(|(n, t)| json!({"name": n, "type": t})).collect::<Vec<_>>(),
    })
}

/// Output layout of each subcommand, as printed by `--schema`.
pub fn schema_for(command: &Command) -> Value {
    match command {
        Command::TesterBench(_) => csv(&[("trial", "integer"), ("output", "0|1"), ("probes", "integer")]),
        Command::LocateBench(_) => csv(&[
            ("trial", "integer"),
            ("output", "0|1"),
            ("probes", "integer"),
            ("halted_at_checkpoint", "integer, empty if the run fell back to the full scan"),
        ]),
        Command::SearchBench(_) => csv(&[
            ("trial", "integer"),
            ("correct", "0|1"),
            ("iterations", "integer"),
            ("probes", "integer"),
        ]),
        Command::Prefix(_) => object(&[
            ("index", "integer"),
            ("sum", "number"),
            ("probes", "integer"),
            ("padded_len", "integer"),
            ("search_epsilon", "number"),
            ("padding_epsilon", "number"),
            ("padding_delta", "number"),
            ("beta", "number"),
        ]),
        Command::MultisearchBench(_) => csv(&[
            ("query", "number"),
            ("answer", "number"),
            ("oracle", "number"),
            ("eps_spent", "number"),
            ("search_invoked", "0|1"),
            ("M", "integer"),
            ("t", "integer"),
        ]),
        Command::Verify(_) => object(&[
            ("eps_hat", "number or \"inf\""),
            ("delta_used", "number"),
            ("event_family", "string"),
            ("ci_low", "number or \"inf\""),
            ("ci_high", "number or \"inf\""),
            ("trials", "integer"),
            ("distinct_tokens", "integer"),
            ("best_set_size", "integer"),
            ("best_direction", "string"),
            ("warnings", "array of strings"),
            ("note", "string"),
        ]),
        Command::LowerboundDemo(_) => object(&[
            ("n", "integer"),
            ("q", "integer"),
            ("tester", "string"),
            ("trials", "integer"),
            ("adv_h1", "number"),
            ("adv_h2", "number"),
            ("ratio", "number"),
        ]),
        Command::DumpTrace(_) => csv(&[("step", "integer"), ("kind", "R|W"), ("address", "integer")]),
    }
}
