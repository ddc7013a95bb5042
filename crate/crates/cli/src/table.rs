//! Result tables: comma-separated, one header row, twelve significant digits.

use std::io::Write;

use hybrid_core::pipeline::{RowMetrics, SweepParam, SweepRow};

use crate::error::Result;

pub const METRIC_COLUMNS: [&str; 8] = [
    "fidelity",
    "probability_total",
    "negativity",
    "p_vac",
    "p_chi",
    "p_phi2",
    "tail_mass",
    "status",
];

const MISSING: &str = "NA";

pub fn number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.11e}")
    } else {
        MISSING.to_string()
    }
}

fn optional(x: Option<f64>) -> String {
    x.map_or_else(|| MISSING.to_string(), number)
}

fn metric_fields(m: &RowMetrics) -> Vec<String> {
    vec![
        number(m.fidelity),
        number(m.probability_total),
        number(m.negativity),
        optional(m.p_vac),
        optional(m.p_chi),
        optional(m.p_phi2),
        number(m.tail_mass),
        "ok".to_string(),
    ]
}

/// Write `rows` with the parameter columns `params` first.
pub fn write_table(out: impl Write, params: &[SweepParam], rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<&str> = params.iter().map(SweepParam::name).chain(METRIC_COLUMNS).collect();
    w.write_record(&header)?;
    for row in rows {
        let mut fields: Vec<String> = params
            .iter()
            .map(|p| {
                row.params
                    .iter()
                    .find(|(q, _)| q == p)
                    .map_or_else(|| MISSING.to_string(), |(_, v)| number(*v))
            })
            .collect();
        match &row.outcome {
            Ok(m) => fields.extend(metric_fields(m)),
            Err(e) => {
                fields.extend(std::iter::repeat_n(MISSING.to_string(), METRIC_COLUMNS.len() - 1));
                fields.push(format!("error: {e}"));
            }
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use hybrid_core::Error;

    #[test]
    fn formatting() {
        assert_eq!(number(1.0), "1.00000000000e0");
        assert_eq!(number(-2.5e-7), "-2.50000000000e-7");
        assert_eq!(number(f64::NAN), "NA");
    }

    #[test]
    fn rows_and_errors() {
        let ok = RowMetrics {
            fidelity: 0.5,
            probability_total: 1e-3,
            negativity: 0.25,
            p_vac: None,
            p_chi: Some(2e-3),
            p_phi2: None,
            tail_mass: 0.0,
        };
        let rows = vec![
            SweepRow {
                params: vec![(SweepParam::T, 0.9)],
                outcome: Ok(ok),
            },
            SweepRow {
                params: vec![(SweepParam::T, 1.5)],
                outcome: Err(Error::Invalid("t, out of range".into())),
            },
        ];
        let mut buf = Vec::new();
        write_table(&mut buf, &[SweepParam::T], &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(
            lines[0],
            "t,fidelity,probability_total,negativity,p_vac,p_chi,p_phi2,tail_mass,status"
        );
        assert_eq!(
            lines[1],
            "9.00000000000e-1,5.00000000000e-1,1.00000000000e-3,2.50000000000e-1,NA,2.00000000000e-3,NA,0.00000000000e0,ok"
        );
        assert!(lines[2].starts_with("1.50000000000e0,NA,NA,NA,NA,NA,NA,NA,\"error: "));
    }
}
