//! Enumerates every cation-anion pair of a 2,268 x 311 vocabulary through
//! two fine-tuned heads, streaming rows to a counting sink.
//!
//! `cargo run --release --example full_space -- [OUTPUT.csv]`

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::sync::Arc;
use std::time::Instant;

use ilnrs::data::{IonRole, IonVocabulary, Property};
use ilnrs::model::{build_finetune, build_pretrain, FinetuneConfig, PretrainConfig};
use ilnrs::pipeline::full_space_predict;

struct Counting<W> {
    inner: W,
    bytes: u64,
}

impl<W: Write> Write for Counting<W> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

fn main() -> ilnrs::Result<()> {
    let cations = IonVocabulary::synthetic(IonRole::Cation, 2268);
    let anions = IonVocabulary::synthetic(IonRole::Anion, 311);
    // Untrained weights are enough to exercise the enumeration.
    let encoder = Arc::new(
        build_pretrain(PretrainConfig::new(Property::Density), (cations.len(), anions.len()), 1)?.export_encoder(),
    );
    let density = build_finetune(encoder.clone(), FinetuneConfig::new(Property::Density), 2)?;
    let melting = build_finetune(encoder, FinetuneConfig::new(Property::MeltingPoint), 3)?;

    let start = Instant::now();
    let sink: Box<dyn Write> = match std::env::args().nth(1) {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(io::sink()),
    };
    let mut out = Counting { inner: sink, bytes: 0 };
    let rows = full_space_predict(&[&density, &melting], &cations, &anions, 298.15, 1.0, &mut out)?;
    println!(
        "{rows} rows ({:.1} MB) in {:.1?}",
        out.bytes as f64 / 1e6,
        start.elapsed()
    );
    Ok(())
}
