//! Runs a batch of jobs in parallel and prints the summary table.
//!
//! cargo run --example sweep -- examples/configs/sweep.json

use maxgraph::runner::sweep;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/configs/sweep.json").into());
    let text = std::fs::read_to_string(&path).unwrap();
    let jobs: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    print!("{}", sweep(&jobs).summary_csv());
}
