use std::collections::BTreeSet;
use std::io::Write;

use crate::data::IonVocabulary;
use crate::error::{Error, Result};
use crate::model::FinetuneModel;
use crate::nn::Matrix;

/// Writes one CSV row per (cation, anion) pair with every model's prediction
/// at `(temperature, pressure)`. Rows are produced one cation at a time, so
/// memory stays proportional to the vocabularies, not to their product.
/// Returns the number of data rows written.
pub fn full_space_predict<W: Write>(
    models: &[&FinetuneModel],
    cations: &IonVocabulary,
    anions: &IonVocabulary,
    temperature: f64,
    pressure: f64,
    out: W,
) -> Result<usize> {
    if models.is_empty() {
        return Err(Error::Config("no models to predict with".into()));
    }
    let properties: BTreeSet<_> = models.iter().map(|m| m.property()).collect();
    if properties.len() != models.len() {
        return Err(Error::Config("each property may appear only once".into()));
    }
    let (nc, na) = (cations.len(), anions.len());
    let mut tables = Vec::with_capacity(models.len());
    for m in models {
        if m.encoder().vocab_sizes() != (nc, na) {
            return Err(Error::Dimension(format!(
                "{} model covers {:?} ions, vocabularies have ({nc}, {na})",
                m.property(),
                m.encoder().vocab_sizes()
            )));
        }
        let enc = m.encoder().encoder();
        tables.push((enc.cation_features()?, enc.anion_features()?));
    }

    let mut out = std::io::BufWriter::new(out);
    write!(out, "cation,anion")?;
    for m in models {
        write!(out, ",{}", m.property().tag())?;
    }
    writeln!(out)?;

    let t = vec![temperature; na];
    let p = vec![pressure; na];
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); models.len()];
    let mut rows = 0;
    for c in 0..nc {
        for (k, (m, (cf, af))) in models.iter().zip(&tables).enumerate() {
            let (wc, wa) = (cf.cols(), af.cols());
            let mut encoded = Matrix::zeros(na, wc + wa);
            for a in 0..na {
                let row = encoded.row_mut(a);
                row[..wc].copy_from_slice(cf.row(c));
                row[wc..].copy_from_slice(af.row(a));
            }
            columns[k] = m.predict_encoded(&encoded, &t, &p)?;
        }
        let cname = csv_field(cations.name(c).unwrap_or_default());
        for a in 0..na {
            write!(out, "{cname},{}", csv_field(anions.name(a).unwrap_or_default()))?;
            for col in &columns {
                write!(out, ",{}", col[a])?;
            }
            writeln!(out)?;
            rows += 1;
        }
    }
    out.flush()?;
    Ok(rows)
}

fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}
