use std::io::{Read, Write};
use std::path::Path;

use super::schema::DatasetSchema;
use super::transform::fit_outcome_chain;
use crate::error::{Error, Result};
use crate::model::{Dataset, ObservationRecord};

fn column_index(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Data {
        row: 0,
        column: name.into(),
        message: "column not found in the header".into(),
    })
}

fn parse_value(field: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = field.parse().map_err(|_| Error::Data {
        row,
        column: column.into(),
        message: format!("non-numeric value {field:?}"),
    })?;
    if !v.is_finite() {
        return Err(Error::Data { row, column: column.into(), message: format!("non-finite value {field:?}") });
    }
    Ok(v)
}

/// Parse a dataset from CSV text. Rows are numbered from 1 after the header.
/// Missing `z` is an empty field, allowed only on rows with `r = 0`; `z`
/// values on those rows are dropped.
pub fn read_dataset<R: Read>(reader: R, schema: &DatasetSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::Io(e.to_string()))?.clone();
    if headers.iter().all(str::is_empty) {
        return Err(Error::Input("no data rows".into()));
    }
    let iy = column_index(&headers, &schema.y_column)?;
    let ix = schema.x_columns.iter().map(|c| column_index(&headers, c)).collect::<Result<Vec<_>>>()?;
    let iz = schema.z_columns.iter().map(|c| column_index(&headers, c)).collect::<Result<Vec<_>>>()?;
    let ir = schema.r_column.as_deref().map(|c| column_index(&headers, c)).transpose()?;

    let mut rows: Vec<(f64, Vec<f64>, Option<Vec<f64>>, bool)> = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::Data { row, column: String::new(), message: e.to_string() })?;
        let y = parse_value(rec.get(iy).unwrap_or(""), row, &schema.y_column)?;
        let x = ix
            .iter()
            .zip(&schema.x_columns)
            .map(|(&j, c)| parse_value(rec.get(j).unwrap_or(""), row, c))
            .collect::<Result<Vec<_>>>()?;
        let r = match (ir, schema.r_column.as_deref()) {
            (Some(j), Some(c)) => match rec.get(j).unwrap_or("") {
                "1" | "true" | "TRUE" => true,
                "0" | "false" | "FALSE" => false,
                other => {
                    return Err(Error::Data {
                        row,
                        column: c.into(),
                        message: format!("phase-2 indicator must be 0 or 1, found {other:?}"),
                    })
                }
            },
            _ => true,
        };
        let mut z = Vec::with_capacity(iz.len());
        let mut missing = None;
        for (&j, c) in iz.iter().zip(&schema.z_columns) {
            let f = rec.get(j).unwrap_or("");
            if f.is_empty() {
                missing.get_or_insert(c);
            } else {
                z.push(parse_value(f, row, c)?);
            }
        }
        let z = match missing {
            Some(c) if r => {
                return Err(Error::Data {
                    row,
                    column: c.clone(),
                    message: "expensive covariate missing on a phase-2 row".into(),
                })
            }
            Some(_) => None,
            None if r => Some(z),
            None => None,
        };
        rows.push((y, x, z, r));
    }
    if rows.is_empty() {
        return Err(Error::Input("no data rows".into()));
    }

    // s is judged on the analysis scale so that cut points mean what the
    // schema says after the outcome transforms
    let raw_y: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let cuts = match &schema.strata {
        Some(strata) => {
            let chain = fit_outcome_chain(schema, &raw_y)?;
            let ys: Vec<f64> = raw_y.iter().map(|&y| chain.forward(y)).collect();
            let cuts = strata.resolve(&ys)?;
            Some((chain, cuts))
        }
        None => None,
    };
    let support = crate::numerics::Support::real_line();
    let mut records = Vec::with_capacity(rows.len());
    for (i, (y, x, z, r)) in rows.into_iter().enumerate() {
        let mut rec = ObservationRecord::new(y, x, z, false, &support)?;
        if let Some((chain, c)) = &cuts {
            let t = chain.forward(y);
            rec.s = t <= c[0] || t > c[1];
        }
        if r && !rec.s {
            return Err(Error::Data {
                row: i + 1,
                column: schema.r_column.clone().unwrap_or_else(|| schema.y_column.clone()),
                message: format!("phase-2 row has outcome {y} outside the sampled strata"),
            });
        }
        rec.r = r;
        records.push(rec);
    }
    Dataset::new(records, schema.y_column.clone(), schema.x_columns.clone(), schema.z_columns.clone())
}

pub fn load_csv(path: &Path, schema: &DatasetSchema) -> Result<Dataset> {
    let f = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    read_dataset(f, schema)
}

/// Write `y`, `x`, `z` and the phase-2 indicator; unobserved `z` is an empty
/// field. Values use the shortest representation that parses back exactly.
pub fn write_dataset<W: Write>(data: &Dataset, r_column: &str, w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec![data.y_name.clone()];
    header.extend(data.x_names.iter().cloned());
    header.extend(data.z_names.iter().cloned());
    header.push(r_column.to_string());
    wtr.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for rec in &data.records {
        let mut fields = vec![rec.y.to_string()];
        fields.extend(rec.x.iter().map(f64::to_string));
        match &rec.z {
            Some(z) => fields.extend(z.iter().map(f64::to_string)),
            None => fields.extend(std::iter::repeat_n(String::new(), data.z_names.len())),
        }
        fields.push(if rec.r { "1".into() } else { "0".into() });
        wtr.write_record(&fields).map_err(|e| Error::Io(e.to_string()))?;
    }
    wtr.flush()?;
    Ok(())
}
