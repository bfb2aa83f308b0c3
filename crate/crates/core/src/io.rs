//! CSV exchange formats.
//!
//! Both formats start with a version line, then `# key: value` metadata
//! lines, a column header and one row per record. Numbers are written in
//! the shortest form that parses back to the same `f64`, so a write/read
//! cycle is lossless and identical inputs give byte-identical files.
//!
//! ```text
//! # kinex pdf v1                  # kinex population v1
//! # model: saving                 # model: angle
//! # parameter: lambda=0.5         # omega: 0.3
//! # mean_wealth: 1                # mean_wealth: 1
//! # iterations: 4                 # seed: 42
//! # residual: 3.1e-7              # steps: 1000000
//! u,f                             agent_index,wealth
//! 0e0,0e0                         0,1.3e0
//! ```

use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{domain, Error, Result};
use crate::grid::{GridPdf, WealthGrid};
use crate::models::{ModelKind, ModelParams};
use crate::montecarlo::Population;

pub const PDF_HEADER: &str = "# kinex pdf v1";
pub const POPULATION_HEADER: &str = "# kinex population v1";

/// A density with the model it belongs to and solver diagnostics.
#[derive(Debug, Clone)]
pub struct PdfRecord {
    pub model: ModelParams,
    pub pdf: GridPdf,
    pub iterations: Option<usize>,
    pub residual: Option<f64>,
    /// Further `key: value` metadata, written after the standard keys.
    pub extra: Vec<(String, String)>,
}

/// A population snapshot with the seed that produced it.
#[derive(Debug, Clone)]
pub struct PopulationRecord {
    pub population: Population,
    pub seed: u64,
}

fn parameter_text(model: &ModelParams) -> String {
    match model.parameter() {
        Some((name, value)) => format!("{name}={value:e}"),
        None => "none".to_string(),
    }
}

pub fn write_pdf<W: Write>(out: &mut W, record: &PdfRecord) -> Result<()> {
    writeln!(out, "{PDF_HEADER}")?;
    writeln!(out, "# model: {}", record.model.kind().name())?;
    writeln!(out, "# parameter: {}", parameter_text(&record.model))?;
    writeln!(out, "# mean_wealth: {:e}", record.model.mean_wealth())?;
    if let Some(iterations) = record.iterations {
        writeln!(out, "# iterations: {iterations}")?;
    }
    if let Some(residual) = record.residual {
        writeln!(out, "# residual: {residual:e}")?;
    }
    for (key, value) in &record.extra {
        writeln!(out, "# {key}: {value}")?;
    }
    writeln!(out, "u,f")?;
    for (u, f) in record.pdf.grid().nodes().iter().zip(record.pdf.values()) {
        writeln!(out, "{u:e},{f:e}")?;
    }
    Ok(())
}

pub fn write_population<W: Write>(out: &mut W, record: &PopulationRecord) -> Result<()> {
    let model = record.population.model();
    writeln!(out, "{POPULATION_HEADER}")?;
    writeln!(out, "# model: {}", model.kind().name())?;
    if let Some((name, value)) = model.parameter() {
        writeln!(out, "# {name}: {value:e}")?;
    }
    writeln!(out, "# mean_wealth: {:e}", model.mean_wealth())?;
    writeln!(out, "# seed: {}", record.seed)?;
    writeln!(out, "# steps: {}", record.population.step_count())?;
    writeln!(out, "agent_index,wealth")?;
    for (i, w) in record.population.wealth().iter().enumerate() {
        writeln!(out, "{i},{w:e}")?;
    }
    Ok(())
}

/// Metadata lines, the column header and the data rows of one file.
struct Parsed {
    metadata: Vec<(String, String)>,
    rows: Vec<(usize, String, String)>,
}

impl Parsed {
    fn read<R: BufRead>(input: R, header: &str, columns: &str) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let first = lines.next().map(|(_, line)| line).transpose()?;
        if first.as_deref().map(str::trim_end) != Some(header) {
            return Err(parse_error(1, &format!("expected `{header}`")));
        }
        let mut metadata = Vec::new();
        let mut rows = Vec::new();
        let mut seen_columns = false;
        for (index, line) in lines {
            let number = index + 1;
            let line = line?;
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                if seen_columns {
                    return Err(parse_error(number, "metadata after the column header"));
                }
                let (key, value) = meta
                    .split_once(':')
                    .ok_or_else(|| parse_error(number, "metadata must read `# key: value`"))?;
                metadata.push((key.trim().to_string(), value.trim().to_string()));
            } else if !seen_columns {
                if line != columns {
                    return Err(parse_error(number, &format!("expected column header `{columns}`")));
                }
                seen_columns = true;
            } else {
                let (a, b) = line
                    .split_once(',')
                    .ok_or_else(|| parse_error(number, "expected two comma-separated fields"))?;
                rows.push((number, a.trim().to_string(), b.trim().to_string()));
            }
        }
        if !seen_columns {
            return Err(parse_error(0, "missing column header"));
        }
        Ok(Self { metadata, rows })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| parse_error(0, &format!("missing `# {key}:` line")))
    }
}

fn parse_error(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

fn number<T: std::str::FromStr>(text: &str, line: usize, what: &str) -> Result<T> {
    text.parse()
        .map_err(|_| parse_error(line, &format!("invalid {what} `{text}`")))
}

fn model_from(name: &str, parameter: Option<(&str, f64)>, mean_wealth: f64) -> Result<ModelParams> {
    let kind = match (name, parameter) {
        ("pure", None) => ModelKind::PureRandom,
        ("saving", Some(("lambda", lambda))) => ModelKind::Saving { lambda },
        ("angle", Some(("omega", omega))) => ModelKind::Angle { omega },
        _ => {
            return Err(domain(format!(
                "model `{name}` does not match its parameter {parameter:?}"
            )))
        }
    };
    ModelParams::new(kind, mean_wealth)
}

const STANDARD_PDF_KEYS: [&str; 5] = ["model", "parameter", "mean_wealth", "iterations", "residual"];

pub fn read_pdf<R: BufRead>(input: R) -> Result<PdfRecord> {
    let parsed = Parsed::read(input, PDF_HEADER, "u,f")?;
    let mean_wealth = number(parsed.require("mean_wealth")?, 0, "mean wealth")?;
    let parameter = match parsed.require("parameter")? {
        "none" => None,
        text => {
            let (name, value) = text
                .split_once('=')
                .ok_or_else(|| parse_error(0, "parameter must read `name=value` or `none`"))?;
            Some((name, number(value, 0, "parameter")?))
        }
    };
    let model = model_from(parsed.require("model")?, parameter, mean_wealth)?;
    let mut nodes = Vec::with_capacity(parsed.rows.len());
    let mut values = Vec::with_capacity(parsed.rows.len());
    for (line, u, f) in &parsed.rows {
        nodes.push(number(u, *line, "wealth")?);
        values.push(number(f, *line, "density")?);
    }
    let grid = Arc::new(WealthGrid::from_nodes(nodes)?);
    let pdf = GridPdf::new(grid, values, mean_wealth)?;
    let iterations = parsed
        .get("iterations")
        .map(|t| number(t, 0, "iteration count"))
        .transpose()?;
    let residual = parsed.get("residual").map(|t| number(t, 0, "residual")).transpose()?;
    let extra = parsed
        .metadata
        .iter()
        .filter(|(k, _)| !STANDARD_PDF_KEYS.contains(&k.as_str()))
        .cloned()
        .collect();
    Ok(PdfRecord {
        model,
        pdf,
        iterations,
        residual,
        extra,
    })
}

pub fn read_population<R: BufRead>(input: R) -> Result<PopulationRecord> {
    let parsed = Parsed::read(input, POPULATION_HEADER, "agent_index,wealth")?;
    let name = parsed.require("model")?;
    let parameter = match name {
        "saving" => Some(("lambda", number(parsed.require("lambda")?, 0, "lambda")?)),
        "angle" => Some(("omega", number(parsed.require("omega")?, 0, "omega")?)),
        _ => None,
    };
    let mean_wealth = number(parsed.require("mean_wealth")?, 0, "mean wealth")?;
    let model = model_from(name, parameter, mean_wealth)?;
    let seed = number(parsed.require("seed")?, 0, "seed")?;
    let steps = number(parsed.require("steps")?, 0, "step count")?;
    let mut wealth = Vec::with_capacity(parsed.rows.len());
    for (expected, (line, index, w)) in parsed.rows.iter().enumerate() {
        if number::<usize>(index, *line, "agent index")? != expected {
            return Err(parse_error(*line, "agent indices must run 0, 1, 2, ..."));
        }
        wealth.push(number(w, *line, "wealth")?);
    }
    Ok(PopulationRecord {
        population: Population::from_parts(wealth, model, steps)?,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::montecarlo::{init_population, InitialCondition, RngStream};

    fn pdf_record() -> PdfRecord {
        let grid = Arc::new(WealthGrid::uniform(10.0, 101).unwrap());
        PdfRecord {
            model: ModelParams::saving(0.3, 1.0).unwrap(),
            pdf: GridPdf::exponential(grid, 1.0).unwrap(),
            iterations: Some(3),
            residual: Some(1.25e-7),
            extra: vec![("grid".into(), "uniform".into())],
        }
    }

    #[test]
    fn pdf_round_trip_is_lossless() {
        let record = pdf_record();
        let mut text = Vec::new();
        write_pdf(&mut text, &record).unwrap();
        let back = read_pdf(text.as_slice()).unwrap();
        assert_eq!(back.model, record.model);
        assert_eq!(back.pdf.values(), record.pdf.values());
        assert_eq!(back.pdf.grid().nodes(), record.pdf.grid().nodes());
        assert_eq!((back.iterations, back.residual), (Some(3), Some(1.25e-7)));
        assert_eq!(back.extra, record.extra);
        let mut again = Vec::new();
        write_pdf(&mut again, &back).unwrap();
        assert_eq!(again, text);
    }

    #[test]
    fn pdf_header_lines() {
        let mut text = Vec::new();
        write_pdf(&mut text, &pdf_record()).unwrap();
        let text = String::from_utf8(text).unwrap();
        let lines: Vec<&str> = text.lines().take(8).collect();
        assert_eq!(lines[0], "# kinex pdf v1");
        assert_eq!(lines[1], "# model: saving");
        assert_eq!(lines[2], "# parameter: lambda=3e-1");
        assert!(lines.contains(&"u,f"));
    }

    #[test]
    fn population_round_trip_is_lossless() {
        let model = ModelParams::angle(0.3, 2.0).unwrap();
        let mut rng = RngStream::new(4);
        let mut population = init_population(100, model, &InitialCondition::Exponential, &mut rng).unwrap();
        population.run(1000, &mut rng);
        let record = PopulationRecord { population, seed: 4 };
        let mut text = Vec::new();
        write_population(&mut text, &record).unwrap();
        assert!(String::from_utf8_lossy(&text).contains("# omega: 3e-1\n"));
        let back = read_population(text.as_slice()).unwrap();
        assert_eq!(back.population, record.population);
        assert_eq!(back.seed, 4);
    }

    #[test]
    fn malformed_files_are_rejected() {
        assert!(matches!(
            read_pdf("u,f\n0,1\n".as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
        let missing = "# kinex pdf v1\n# model: pure\n# mean_wealth: 1\nu,f\n0,1\n";
        assert!(read_pdf(missing.as_bytes()).is_err());
        let bad_row = "# kinex pdf v1\n# model: pure\n# parameter: none\n# mean_wealth: 1\nu,f\n0,1\n1;2\n";
        assert!(matches!(
            read_pdf(bad_row.as_bytes()),
            Err(Error::Parse { line: 7, .. })
        ));
        let mismatch = "# kinex pdf v1\n# model: pure\n# parameter: lambda=0.5\n# mean_wealth: 1\nu,f\n0,1\n1,1\n2,1\n";
        assert!(read_pdf(mismatch.as_bytes()).is_err());
        let gap = "# kinex population v1\n# model: pure\n# mean_wealth: 1\n# seed: 1\n# steps: 0\nagent_index,wealth\n0,1\n2,1\n";
        assert!(read_population(gap.as_bytes()).is_err());
    }
}
