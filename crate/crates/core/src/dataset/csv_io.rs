use std::collections::HashMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureSpec, RecordTable, DAYS_COLUMN, ID_COLUMN, LABEL_COLUMN};
use crate::error::{Result, TriageError};
use crate::matrix::{Matrix, MISSING};

#[derive(Debug, Clone)]
pub struct CsvOptions {
    /// Tokens (compared case-insensitively) read as MISSING in addition to the empty cell.
    pub na_tokens: Vec<String>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            na_tokens: vec!["NA".to_string()],
        }
    }
}

impl CsvOptions {
    fn is_na(&self, cell: &str) -> bool {
        let cell = cell.trim();
        cell.is_empty() || self.na_tokens.iter().any(|t| t.eq_ignore_ascii_case(cell))
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &[FeatureSpec]) -> Result<RecordTable> {
    load_csv_with(path, schema, &CsvOptions::default())
}

pub fn load_csv_with(
    path: impl AsRef<Path>,
    schema: &[FeatureSpec],
    opts: &CsvOptions,
) -> Result<RecordTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| TriageError::io(path, e))?;
    read_csv(file, schema, opts)
}

/// Schema with one continuous, unit-less feature per non-reserved header column.
pub fn infer_schema(path: impl AsRef<Path>) -> Result<Vec<FeatureSpec>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| TriageError::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let headers = rdr.headers()?.clone();
    Ok(headers
        .iter()
        .filter(|h| ![ID_COLUMN, LABEL_COLUMN, DAYS_COLUMN].contains(h))
        .map(|h| FeatureSpec::continuous(h, ""))
        .collect())
}

pub(crate) fn read_csv<R: Read>(
    reader: R,
    schema: &[FeatureSpec],
    opts: &CsvOptions,
) -> Result<RecordTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();

    let feature_pos: HashMap<&str, usize> = schema
        .iter()
        .enumerate()
        .map(|(i, f)| (f.name.as_str(), i))
        .collect();
    let mut id_col = None;
    let mut label_col = None;
    let mut days_col = None;
    // header column -> feature index
    let mut col_map: Vec<Option<usize>> = Vec::with_capacity(headers.len());
    let mut seen = vec![false; schema.len()];
    for h in headers.iter() {
        match h {
            ID_COLUMN => {
                id_col = Some(col_map.len());
                col_map.push(None);
            }
            LABEL_COLUMN => {
                label_col = Some(col_map.len());
                col_map.push(None);
            }
            DAYS_COLUMN => {
                days_col = Some(col_map.len());
                col_map.push(None);
            }
            name => match feature_pos.get(name) {
                Some(&fi) if !seen[fi] => {
                    seen[fi] = true;
                    col_map.push(Some(fi));
                }
                Some(_) => return Err(TriageError::schema(format!("duplicate column {name:?}"))),
                None => return Err(TriageError::schema(format!("unknown column {name:?}"))),
            },
        }
    }
    let id_col =
        id_col.ok_or_else(|| TriageError::schema(format!("missing {ID_COLUMN:?} column")))?;
    if let Some(fi) = seen.iter().position(|s| !s) {
        return Err(TriageError::schema(format!(
            "schema column {:?} absent from header",
            schema[fi].name
        )));
    }

    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut days = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        // 1-based line numbers, header is line 1
        let line = r + 2;
        let mut row = vec![MISSING; schema.len()];
        for (c, cell) in rec.iter().enumerate() {
            let col_name = || headers.get(c).unwrap_or("?").to_string();
            if c == id_col {
                ids.push(cell.to_string());
            } else if Some(c) == label_col {
                let v = match cell.trim() {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(TriageError::Parse {
                            row: line,
                            column: col_name(),
                            message: format!("label must be 0 or 1, got {other:?}"),
                        })
                    }
                };
                labels.push(v);
            } else if Some(c) == days_col {
                days.push(parse_real(cell, line, &col_name())?);
            } else if let Some(fi) = col_map[c] {
                if !opts.is_na(cell) {
                    row[fi] = parse_real(cell, line, &col_name())?;
                }
            }
        }
        data.extend(row);
    }
    let n = ids.len();
    RecordTable::new(
        ids,
        schema.to_vec(),
        Matrix::new(n, schema.len(), data)?,
        label_col.map(|_| labels),
        days_col.map(|_| days),
    )
}

fn parse_real(cell: &str, row: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| TriageError::Parse {
        row,
        column: column.to_string(),
        message: format!("cannot parse {cell:?} as a real number"),
    })?;
    if !v.is_finite() {
        return Err(TriageError::Parse {
            row,
            column: column.to_string(),
            message: format!("non-finite value {cell:?}"),
        });
    }
    Ok(v)
}

/// Writes `patient_id, features..., [special_care], [days]`. Reals use the
/// shortest representation that parses back to the same bits.
pub fn write_csv(table: &RecordTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = File::create(path).map_err(|e| TriageError::io(path, e))?;
    let mut buf = Vec::new();
    write_csv_to(table, &mut buf)?;
    file.write_all(&buf).map_err(|e| TriageError::io(path, e))
}

pub(crate) fn write_csv_to<W: Write>(table: &RecordTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![ID_COLUMN.to_string()];
    header.extend(table.features().iter().map(|f| f.name.clone()));
    if table.special_care().is_some() {
        header.push(LABEL_COLUMN.into());
    }
    if table.days().is_some() {
        header.push(DAYS_COLUMN.into());
    }
    w.write_record(&header)?;
    for r in 0..table.n_patients() {
        let mut rec = vec![table.patient_ids()[r].clone()];
        rec.extend(table.values().row(r).iter().map(|v| {
            if v.is_nan() {
                String::new()
            } else {
                format!("{v}")
            }
        }));
        if let Some(l) = table.special_care() {
            rec.push(if l[r] { "1" } else { "0" }.into());
        }
        if let Some(d) = table.days() {
            rec.push(format!("{}", d[r]));
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| TriageError::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::FeatureSpec;
    use proptest::prelude::*;

    fn schema2() -> Vec<FeatureSpec> {
        vec![
            FeatureSpec::binary("sex"),
            FeatureSpec::continuous("age", "years"),
        ]
    }

    #[test]
    fn header_only_gives_empty_table() {
        let t = read_csv(
            "patient_id,sex,age\n".as_bytes(),
            &schema2(),
            &CsvOptions::default(),
        )
        .unwrap();
        assert_eq!(t.n_patients(), 0);
        assert_eq!(t.n_features(), 2);
    }

    #[test]
    fn na_tokens_and_empty_cells_are_missing() {
        let src = "patient_id,age,sex,special_care,days\nA,,na,1,3\nB,40,1,0,0\n";
        let t = read_csv(src.as_bytes(), &schema2(), &CsvOptions::default()).unwrap();
        assert!(t.values().get(0, 0).is_nan());
        assert!(t.values().get(0, 1).is_nan());
        assert_eq!(t.values().get(1, 1), 40.0);
        assert_eq!(t.special_care().unwrap(), &[true, false]);
        assert_eq!(t.days().unwrap(), &[3.0, 0.0]);
    }

    #[test]
    fn unknown_column_is_schema_error() {
        let err = read_csv(
            "patient_id,sex,age,bmi\n".as_bytes(),
            &schema2(),
            &CsvOptions::default(),
        );
        assert!(matches!(err, Err(TriageError::Schema(_))));
    }

    #[test]
    fn bad_cell_reports_location() {
        let src = "patient_id,sex,age\nA,1,40\nB,0,forty\n";
        match read_csv(src.as_bytes(), &schema2(), &CsvOptions::default()) {
            Err(TriageError::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "age");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wide_clinical_schema_accepted() {
        let mut schema = schema2();
        for i in 0..165 {
            schema.push(FeatureSpec::continuous(format!("exam_{i:03}"), "U/L"));
        }
        let header: Vec<String> = std::iter::once("patient_id".to_string())
            .chain(schema.iter().map(|f| f.name.clone()))
            .collect();
        let mut src = header.join(",");
        src.push('\n');
        src.push_str("P1,1,50");
        src.push_str(&",".repeat(165));
        src.push('\n');
        let t = read_csv(src.as_bytes(), &schema, &CsvOptions::default()).unwrap();
        assert_eq!(t.n_features(), 167);
        assert_eq!(t.values().missing_count(), 165);
    }

    fn cell() -> impl Strategy<Value = f64> {
        prop_oneof![
            1 => Just(f64::NAN),
            4 => any::<f64>().prop_filter("finite", |v| v.is_finite()),
        ]
    }

    proptest! {
        #[test]
        fn write_then_load_is_identity(
            rows in prop::collection::vec((prop::collection::vec(cell(), 3), any::<bool>(), 0.0f64..1e6), 0..20)
        ) {
            let schema = vec![
                FeatureSpec::continuous("a", ""),
                FeatureSpec::continuous("b", "%"),
                FeatureSpec::binary("c"),
            ];
            let ids: Vec<String> = (0..rows.len()).map(|i| format!("P{i}")).collect();
            let vals: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
            let labels: Vec<bool> = rows.iter().map(|r| r.1).collect();
            let days: Vec<f64> = rows.iter().map(|r| if r.1 { r.2 } else { 0.0 }).collect();
            let t = RecordTable::new(ids, schema.clone(), Matrix::from_rows(&vals, 3).unwrap(), Some(labels), Some(days)).unwrap();
            let mut buf = Vec::new();
            write_csv_to(&t, &mut buf).unwrap();
            let back = read_csv(buf.as_slice(), &schema, &CsvOptions::default()).unwrap();
            prop_assert!(back.values().bit_eq(t.values()));
            prop_assert_eq!(back.patient_ids(), t.patient_ids());
            prop_assert_eq!(back.special_care(), t.special_care());
            prop_assert_eq!(back.days(), t.days());
        }
    }
}
