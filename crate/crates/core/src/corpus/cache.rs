use std::path::Path;

use super::features::{FeatureSchema, FeatureVector, LabeledPair};
use crate::error::{Error, Result};

fn fmt_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// CSV with columns `pair_id,label` followed by one column per similarity channel.
/// Values are written in shortest round-trip form, so reading back is exact.
pub fn write_feature_cache(pairs: &[LabeledPair], schema: &FeatureSchema) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["pair_id".to_string(), "label".to_string()];
    header.extend(schema.names());
    w.write_record(&header).map_err(fmt_err)?;
    for p in pairs {
        if p.features.len() != schema.len() {
            return Err(Error::Dimension {
                expected: schema.len(),
                actual: p.features.len(),
            });
        }
        let mut row = vec![p.id.clone(), u8::from(p.equivalent).to_string()];
        row.extend(p.features.values.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(fmt_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_feature_cache(
    text: &str,
    schema: &FeatureSchema,
    origin: &Path,
) -> Result<Vec<LabeledPair>> {
    let parse = |line: u64, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(fmt_err)?
        .iter()
        .map(String::from)
        .collect();
    let mut want = vec!["pair_id".to_string(), "label".to_string()];
    want.extend(schema.names());
    if header != want {
        return Err(Error::Schema(format!(
            "{}: feature cache columns {header:?} do not match the schema {want:?}",
            origin.display()
        )));
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row.map_err(fmt_err)?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let equivalent = match &row[1] {
            "1" => true,
            "0" => false,
            other => return Err(parse(line, format!("label `{other}` is not 0 or 1"))),
        };
        let values = row
            .iter()
            .skip(2)
            .map(|c| match c.parse::<f64>() {
                Ok(v) if (0.0..=1.0).contains(&v) => Ok(v),
                _ => Err(parse(line, format!("`{c}` is not a similarity in [0, 1]"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        out.push(LabeledPair {
            id: row[0].to_string(),
            features: FeatureVector::new(values),
            equivalent,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{bibliographic_schema, generate_workload, SyntheticSpec};

    #[test]
    fn round_trip_is_exact() {
        let spec = SyntheticSpec {
            n_entities: 30,
            duplicates_per_entity: 2,
            corruption: vec![0.2, 0.4],
            sibling_rate: 0.2,
            attribute_corruption: Default::default(),
            seed: 4,
        };
        let pairs = generate_workload(&spec)
            .unwrap()
            .labeled_candidates(2)
            .unwrap();
        let fs = FeatureSchema::from_schema(&bibliographic_schema());
        let text = write_feature_cache(&pairs, &fs).unwrap();
        assert_eq!(
            read_feature_cache(&text, &fs, Path::new("x")).unwrap(),
            pairs
        );
    }

    #[test]
    fn rejects_bad_rows() {
        let fs = FeatureSchema::from_schema(&bibliographic_schema());
        let mut header = String::from("pair_id,label");
        for n in fs.names() {
            header.push(',');
            header.push_str(&n);
        }
        let ok_vals = vec!["0.5"; fs.len()].join(",");
        let good = format!("{header}\na|b,1,{ok_vals}\n");
        assert_eq!(
            read_feature_cache(&good, &fs, Path::new("x"))
                .unwrap()
                .len(),
            1
        );
        let bad_label = format!("{header}\na|b,2,{ok_vals}\n");
        assert!(read_feature_cache(&bad_label, &fs, Path::new("x")).is_err());
        let bad_val = format!("{header}\na|b,1,{}\n", vec!["1.5"; fs.len()].join(","));
        assert!(matches!(
            read_feature_cache(&bad_val, &fs, Path::new("x")),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(read_feature_cache("pair_id,label,x\n", &fs, Path::new("x")).is_err());
    }
}
