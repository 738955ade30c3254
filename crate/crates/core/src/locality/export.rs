use std::io::Write;

use super::{Certificate, VertexSet};
use crate::behavior::Scenario;
use crate::Result;

fn labels(scenario: &Scenario) -> Vec<String> {
    let mut h: Vec<String> = scenario.parties().iter().map(|p| p.input_label.clone()).collect();
    h.extend(scenario.parties().iter().map(|p| p.output_label.clone()));
    h
}

/// Long format: `vertex,<inputs>,<outputs>,p`, one row per cell, with `p`
/// written as an exact fraction.
pub fn write_vertices_csv<W: Write>(set: &VertexSet, writer: W) -> Result<()> {
    let s = set.scenario();
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["vertex".to_string()];
    header.extend(labels(s));
    header.push("p".into());
    w.write_record(&header)?;
    for (i, v) in set.exact().iter().enumerate() {
        for (cell, p) in v.iter().enumerate() {
            let (x, a) = s.decode(cell);
            let mut rec = vec![i.to_string()];
            rec.extend(x.iter().chain(&a).map(|k| k.to_string()));
            rec.push(p.to_string());
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `<inputs>,<outputs>,coefficient`, one row per cell in storage order.
pub fn write_certificate_csv<W: Write>(scenario: &Scenario, cert: &Certificate, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = labels(scenario);
    header.push("coefficient".into());
    w.write_record(&header)?;
    for (cell, c) in cert.coefficients.iter().enumerate() {
        let (x, a) = scenario.decode(cell);
        let mut rec: Vec<String> = x.iter().chain(&a).map(|k| k.to_string()).collect();
        rec.push(c.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
