//! Data files: one CSV row per datum.
//!
//! Columns: `frequency_hz, source_index, receiver_index, node_x, node_z, real, imag`.
//! Floats use the shortest representation that reads back bit-exactly.

use std::path::Path;

use crate::forward::{DataVector, Survey};
use crate::grid::Grid2D;
use crate::{Error, Result, C64};

const HEADER: [&str; 7] = [
    "frequency_hz",
    "source_index",
    "receiver_index",
    "node_x",
    "node_z",
    "real",
    "imag",
];

/// Observed data for a survey, one vector per frequency in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    pub frequencies_hz: Vec<f64>,
    pub data: Vec<DataVector>,
}

impl DataSet {
    /// Data at exactly these frequencies, in the given order.
    pub fn select(&self, freqs: &[f64]) -> Result<Vec<DataVector>> {
        freqs
            .iter()
            .map(|f| {
                self.frequencies_hz
                    .iter()
                    .position(|g| g == f)
                    .map(|i| self.data[i].clone())
                    .ok_or_else(|| {
                        Error::InvalidInput(format!("data file has no records at {f} Hz"))
                    })
            })
            .collect()
    }
}

pub fn write_data(path: &Path, grid: &Grid2D, survey: &Survey, set: &DataSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fail = |e: csv::Error| Error::InvalidInput(format!("cannot encode data: {e}"));
    w.write_record(HEADER).map_err(fail)?;
    for (freq, d) in set.frequencies_hz.iter().zip(&set.data) {
        if d.len() != survey.n_data() {
            return Err(Error::InvalidInput(format!(
                "{} data values at {freq} Hz, survey has {}",
                d.len(),
                survey.n_data()
            )));
        }
        for (k, src) in survey.sources().iter().enumerate() {
            let range = survey.data_range(k);
            for (r, (&node, z)) in src.receivers.iter().zip(&d.values[range]).enumerate() {
                let (x, zn) = grid.coords(node);
                w.write_record([
                    freq.to_string(),
                    k.to_string(),
                    r.to_string(),
                    x.to_string(),
                    zn.to_string(),
                    z.re.to_string(),
                    z.im.to_string(),
                ])
                .map_err(fail)?;
            }
        }
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Error::InvalidInput(format!("cannot encode data: {e}")))?;
    super::write_atomic(path, &bytes)
}

/// Reads a data file and checks it against `survey`: every frequency present
/// must have exactly one row per (source, receiver) with matching node
/// coordinates.
pub fn read_data(path: &Path, grid: &Grid2D, survey: &Survey) -> Result<DataSet> {
    let text = super::read_to_string(path)?;
    parse_data(&text, &super::file_label(path), grid, survey)
}

pub(crate) fn parse_data(
    text: &str,
    label: &str,
    grid: &Grid2D,
    survey: &Survey,
) -> Result<DataSet> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| Error::parse(label, 1, e.to_string()))?;
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(Error::parse(
            label,
            1,
            format!("expected header '{}'", HEADER.join(",")),
        ));
    }

    let n = survey.n_data();
    let mut freqs: Vec<f64> = Vec::new();
    let mut values: Vec<Vec<Option<C64>>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            Error::parse(label, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let err = |msg: String| Error::parse(label, line, msg);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let float = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(format!("invalid {} '{}'", HEADER[i], field(i))))
        };
        let int = |i: usize| -> Result<usize> {
            field(i)
                .parse::<usize>()
                .map_err(|_| err(format!("invalid {} '{}'", HEADER[i], field(i))))
        };
        let freq = float(0)?;
        let (k, r, x, z) = (int(1)?, int(2)?, int(3)?, int(4)?);
        let value = C64::new(float(5)?, float(6)?);

        let src = survey.sources().get(k).ok_or_else(|| {
            err(format!(
                "source_index {k} out of range (survey has {})",
                survey.n_sources()
            ))
        })?;
        let node = *src
            .receivers
            .get(r)
            .ok_or_else(|| err(format!("receiver_index {r} out of range for source {k}")))?;
        if grid.coords(node) != (x, z) {
            let (ex, ez) = grid.coords(node);
            return Err(err(format!(
                "node [{x}, {z}] does not match survey receiver [{ex}, {ez}]"
            )));
        }
        let fi = match freqs.iter().position(|&f| f == freq) {
            Some(i) => i,
            None => {
                freqs.push(freq);
                values.push(vec![None; n]);
                freqs.len() - 1
            }
        };
        let slot = &mut values[fi][survey.data_range(k).start + r];
        if slot.is_some() {
            return Err(err(format!(
                "duplicate record for {freq} Hz, source {k}, receiver {r}"
            )));
        }
        *slot = Some(value);
    }

    let mut order: Vec<usize> = (0..freqs.len()).collect();
    order.sort_by(|&a, &b| freqs[a].total_cmp(&freqs[b]));
    let mut set = DataSet {
        frequencies_hz: Vec::with_capacity(freqs.len()),
        data: Vec::with_capacity(freqs.len()),
    };
    for i in order {
        let d = values[i]
            .iter()
            .map(|v| {
                v.ok_or_else(|| {
                    Error::InvalidInput(format!("{label}: data at {} Hz is incomplete", freqs[i]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        set.frequencies_hz.push(freqs[i]);
        set.data.push(DataVector { values: d });
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::Source;

    fn fixture() -> (Grid2D, Survey, DataSet) {
        let grid = Grid2D::new(8, 8, 10.0, 1).unwrap();
        let sources = vec![
            Source {
                node: grid.index(3, 3),
                amplitude: 1.0,
                receivers: vec![grid.index(2, 5), grid.index(5, 5)],
            },
            Source {
                node: grid.index(4, 3),
                amplitude: 1.0,
                receivers: vec![grid.index(6, 2)],
            },
        ];
        let survey = Survey::new(&grid, sources, vec![1.5, 3.0]).unwrap();
        let set = DataSet {
            frequencies_hz: vec![1.5, 3.0],
            data: vec![
                DataVector {
                    values: vec![
                        C64::new(0.1, -1e-300),
                        C64::new(1.0 / 3.0, 2.0),
                        C64::new(-7.5, 0.0),
                    ],
                },
                DataVector {
                    values: vec![
                        C64::new(1e10, 3.25),
                        C64::new(0.0, -0.0),
                        C64::new(f64::MIN_POSITIVE, 1.0),
                    ],
                },
            ],
        };
        (grid, survey, set)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (grid, survey, set) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_data(&path, &grid, &survey, &set).unwrap();
        let back = read_data(&path, &grid, &survey).unwrap();
        assert_eq!(back, set);
        assert_eq!(back.select(&[3.0]).unwrap()[0], set.data[1]);
        assert!(back.select(&[2.0]).is_err());
    }

    #[test]
    fn missing_and_duplicate_rows_are_rejected() {
        let (grid, survey, set) = fixture();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_data(&path, &grid, &survey, &set).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();

        let missing = lines[..lines.len() - 1].join("\n");
        let e = parse_data(&missing, "d", &grid, &survey)
            .unwrap_err()
            .to_string();
        assert!(e.contains("incomplete"), "{e}");

        let dup = format!("{text}{}\n", lines[1]);
        let e = parse_data(&dup, "d", &grid, &survey)
            .unwrap_err()
            .to_string();
        assert!(e.contains("duplicate") && e.contains("line 8"), "{e}");
    }

    #[test]
    fn bad_fields_name_the_column() {
        let (grid, survey, _) = fixture();
        let text =
            "frequency_hz,source_index,receiver_index,node_x,node_z,real,imag\n1.5,0,0,2,5,abc,0\n";
        let e = parse_data(text, "d", &grid, &survey)
            .unwrap_err()
            .to_string();
        assert!(e.contains("real") && e.contains("line 2"), "{e}");
        let wrong_node =
            "frequency_hz,source_index,receiver_index,node_x,node_z,real,imag\n1.5,0,0,3,5,1,0\n";
        assert!(parse_data(wrong_node, "d", &grid, &survey).is_err());
    }
}
