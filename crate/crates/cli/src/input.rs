use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use monoresp::{QuantileTable, Sample};
use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Reads a `z,x` CSV into a [`Sample`]. Columns may appear in either order;
/// extra columns are ignored.
pub fn read_sample(path: &Path) -> Result<Sample, CliError> {
    let file = File::open(path).map_err(|e| CliError::Usage(format!("cannot open {}: {e}", path.display())))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let (Some(zi), Some(xi)) = (col("z"), col("x")) else {
        return Err(CliError::Usage(format!(
            "{}: line 1: expected a header with columns z and x",
            path.display()
        )));
    };
    let mut pairs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize, name: &str| -> Result<f64, CliError> {
            let raw = rec.get(i).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::Usage(format!("{}: line {line}: bad {name} value {raw:?}", path.display())))
        };
        pairs.push((field(zi, "z")?, field(xi, "x")?));
    }
    if pairs.is_empty() {
        return Err(CliError::Usage(format!("{}: no data rows", path.display())));
    }
    Sample::from_pairs(pairs).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Resolves the 𝔻 table from an explicit path or the table directory.
pub fn load_table(table: Option<&Path>, dir: Option<&Path>) -> Result<QuantileTable, CliError> {
    let path: PathBuf = match (table, dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(d)) => d.join(crate::DEFAULT_TABLE),
        (None, None) => {
            return Err(CliError::MissingTable(format!(
                "no --table given and {} is not set",
                crate::TABLE_DIR_ENV
            )))
        }
    };
    if !path.is_file() {
        return Err(CliError::MissingTable(path.display().to_string()));
    }
    QuantileTable::load(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

/// Tool version, command, resolved configuration, seed and notes.
pub struct Provenance {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub notes: Vec<String>,
}

impl Provenance {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config: serde_json::to_value(config).expect("config serializes"),
            seed,
            notes: Vec::new(),
        }
    }

    pub fn note_sample(&mut self, sample: &Sample) {
        if sample.was_reordered() {
            self.notes.push("input was not sorted by z and has been sorted".into());
        }
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("tool=monoresp {}", env!("CARGO_PKG_VERSION")),
            format!("command={}", self.command),
            format!("config={}", self.config),
        ];
        if let Some(s) = self.seed {
            out.push(format!("seed={s}"));
        }
        out.extend(self.notes.iter().map(|n| format!("note={n}")));
        out
    }

    pub fn json(&self) -> Value {
        json!({
            "tool": format!("monoresp {}", env!("CARGO_PKG_VERSION")),
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "notes": self.notes,
        })
    }
}

pub fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(io::BufWriter::new(File::create(p).map_err(|e| {
            CliError::Output(format!("cannot create {}: {e}", p.display()))
        })?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

/// JSON document `{ "provenance": ..., "result": ... }`.
pub fn write_json(path: Option<&Path>, prov: &Provenance, result: &impl Serialize) -> Result<(), CliError> {
    let doc = json!({ "provenance": prov.json(), "result": result });
    let mut out = open_out(path)?;
    serde_json::to_writer_pretty(&mut out, &doc).map_err(|e| CliError::Output(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// CSV with `#` provenance lines followed by `header` and `rows`.
pub fn write_csv(
    path: Option<&Path>,
    prov: &Provenance,
    summary: &[String],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<(), CliError> {
    let mut out = open_out(path)?;
    for l in prov.lines().iter().chain(summary) {
        writeln!(out, "# {l}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(|e| CliError::Output(e.to_string()))?;
    for r in rows {
        w.write_record(&r).map_err(|e| CliError::Output(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
