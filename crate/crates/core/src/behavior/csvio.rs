//! CSV interchange. Columns are the parties' input labels, then their output
//! labels, then a value column (`count` or `p`), e.g.
//! `x,y1,y2,a,b1,b2,p` for the broadcast scenario.

use std::io::{Read, Write};

use super::{Behavior, CountsTable, Scenario};
use crate::{Error, Result};

fn header(scenario: &Scenario, value: &str) -> Vec<String> {
    let mut h: Vec<String> = scenario.parties().iter().map(|p| p.input_label.clone()).collect();
    h.extend(scenario.parties().iter().map(|p| p.output_label.clone()));
    h.push(value.to_string());
    h
}

/// Reads rows into `(cell, value string, line)` triples.
fn read_cells<R: Read>(scenario: &Scenario, value: &str, reader: R) -> Result<Vec<(usize, String, usize)>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let wanted = header(scenario, value);
    let mut columns = Vec::with_capacity(wanted.len());
    for name in &wanted {
        let pos = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::parse(1, format!("missing column `{name}`")))?;
        columns.push(pos);
    }
    if headers.len() != wanted.len() {
        return Err(Error::parse(
            1,
            format!(
                "expected columns {wanted:?}, found {:?}",
                headers.iter().collect::<Vec<_>>()
            ),
        ));
    }
    let n = scenario.num_parties();
    let mut out = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize);
        let mut inputs = vec![0; n];
        let mut outcomes = vec![0; n];
        for k in 0..n {
            let field = |c: usize| -> Result<usize> {
                record[columns[c]]
                    .parse::<usize>()
                    .map_err(|e| Error::parse(line, format!("column `{}`: {e}", wanted[c])))
            };
            inputs[k] = field(k)?;
            outcomes[k] = field(n + k)?;
            let p = scenario.party(k);
            if inputs[k] >= p.inputs || outcomes[k] >= p.outputs {
                return Err(Error::parse(line, format!("party {} index out of range", p.name)));
            }
        }
        out.push((
            scenario.index(&inputs, &outcomes),
            record[columns[2 * n]].to_string(),
            line,
        ));
    }
    Ok(out)
}

pub fn read_counts_csv<R: Read>(scenario: &Scenario, reader: R) -> Result<CountsTable> {
    let mut counts = vec![0u64; scenario.table_len()];
    let mut seen = vec![false; scenario.table_len()];
    for (cell, value, line) in read_cells(scenario, "count", reader)? {
        if std::mem::replace(&mut seen[cell], true) {
            return Err(Error::parse(line, "duplicate cell".to_string()));
        }
        counts[cell] = value.parse().map_err(|e| Error::parse(line, format!("count: {e}")))?;
    }
    CountsTable::new(scenario.clone(), counts)
}

/// Every cell must be present exactly once.
pub fn read_behavior_csv<R: Read>(scenario: &Scenario, reader: R) -> Result<Behavior> {
    let mut table = vec![0.0; scenario.table_len()];
    let mut seen = vec![false; scenario.table_len()];
    for (cell, value, line) in read_cells(scenario, "p", reader)? {
        if std::mem::replace(&mut seen[cell], true) {
            return Err(Error::parse(line, "duplicate cell".to_string()));
        }
        table[cell] = value.parse().map_err(|e| Error::parse(line, format!("p: {e}")))?;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        let (x, a) = scenario.decode(missing);
        return Err(Error::Validation(format!(
            "behavior file lacks inputs {x:?} outcomes {a:?}"
        )));
    }
    Behavior::new(scenario.clone(), table)
}

fn write_rows<W: Write, T: ToString>(scenario: &Scenario, value: &str, values: &[T], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(header(scenario, value))?;
    for (cell, v) in values.iter().enumerate() {
        let (x, a) = scenario.decode(cell);
        let mut rec: Vec<String> = x.iter().chain(&a).map(|i| i.to_string()).collect();
        rec.push(v.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows in storage order; probabilities use the shortest round-trip format.
pub fn write_behavior_csv<W: Write>(behavior: &Behavior, writer: W) -> Result<()> {
    write_rows(behavior.scenario(), "p", behavior.table(), writer)
}

pub fn write_counts_csv<W: Write>(counts: &CountsTable, writer: W) -> Result<()> {
    write_rows(counts.scenario(), "count", counts.counts(), writer)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn behavior_roundtrip() {
        let s = Scenario::broadcast();
        let b = Behavior::from_fn(s.clone(), |x, a| {
            let n = (x[0] + 2 * a[0] + a[1] * a[2]) as f64;
            (n + 1.0) / 10.0
        });
        let mut buf = Vec::new();
        write_behavior_csv(&b, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,y1,y2,a,b1,b2,p\n0,0,0,0,0,0,0.1\n"));
        assert_eq!(read_behavior_csv(&s, buf.as_slice()).unwrap(), b);
    }

    #[test]
    fn counts_roundtrip_and_column_order() {
        let s = Scenario::chsh();
        let text = "b,a,count,y,x\n1,0,7,1,0\n";
        let c = read_counts_csv(&s, text.as_bytes()).unwrap();
        assert_eq!(c.counts()[s.index(&[0, 1], &[0, 1])], 7);
        let mut buf = Vec::new();
        write_counts_csv(&c, &mut buf).unwrap();
        assert_eq!(read_counts_csv(&s, buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let s = Scenario::chsh();
        let text = "x,y,a,b,count\n0,0,0,0,3\n0,0,2,0,1\n";
        match read_counts_csv(&s, text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let text = "x,y,a,b,p\n0,0,0,0,0.5\n";
        assert!(matches!(
            read_behavior_csv(&s, text.as_bytes()),
            Err(Error::Validation(_))
        ));
        let text = "x,y,a,count\n";
        assert!(matches!(
            read_counts_csv(&s, text.as_bytes()),
            Err(Error::Parse { line: 1, .. })
        ));
    }
}
