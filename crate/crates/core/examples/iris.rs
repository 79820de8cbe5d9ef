//! Per-species credible ellipsoids of the four-feature spatial median for
//! iris-layout data: four numeric columns followed by a species label.
//!
//! cargo run --release --example iris -- path/to/iris.csv [out_dir]

use std::path::PathBuf;

use geomed::cli_io::{execute, Command, InputSpec};

fn main() -> geomed::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(input) = args.next() else {
        eprintln!("usage: iris <iris.csv> [out_dir]");
        std::process::exit(2);
    };
    let out = PathBuf::from(args.next().unwrap_or_else(|| "iris_out".into()));
    let cmd = Command::Iris {
        input: InputSpec::new(input),
        species_column: "4".into(),
        features: ["0", "1", "2", "3"].map(String::from).to_vec(),
        p: 2.0,
        draws: 2000,
        level: 0.95,
        seed: 1,
    };
    for path in execute(&cmd, &out)? {
        println!("wrote {}", path.display());
    }
    let doc: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("iris.json")).unwrap()).unwrap();
    for sp in doc["result"].as_array().into_iter().flatten() {
        println!("{}: |cos| to reference axes {}", sp["species"], sp["reference_cosines"]);
    }
    Ok(())
}
