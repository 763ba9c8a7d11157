//! Emits the default synthetic benchmark and writes it as CSV.
//!
//! `cargo run --release --example gen_synth -- [SEED] [DIR]`

use std::fs::File;

use ilnrs::data::{write_ions, write_records, Property};
use ilnrs::synth::{emit_datasets, OracleConfig, SamplingPlan};

fn main() -> ilnrs::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    let dir = args.next().unwrap_or_else(|| "synth-out".into());
    std::fs::create_dir_all(&dir)?;

    let bench = emit_datasets(&OracleConfig::default().with_seed(seed), &SamplingPlan::default())?;
    write_ions(
        File::create(format!("{dir}/ions.csv"))?,
        &bench.pretrain.cations,
        &bench.pretrain.anions,
    )?;
    write_records(File::create(format!("{dir}/pretrain.csv"))?, &bench.pretrain)?;
    write_records(File::create(format!("{dir}/experimental.csv"))?, &bench.experimental)?;

    println!(
        "universe: {} cations x {} anions",
        bench.plan.num_cations, bench.plan.num_anions
    );
    println!("simulated ILs: {}", bench.pretrain.distinct_ils().len());
    for p in Property::ALL {
        let sim = bench.pretrain.filter_property(p);
        let exp = bench.experimental.filter_property(p);
        println!(
            "{:<16} simulated {:>5}  experimental {:>5} records / {:>3} ILs",
            p.tag(),
            sim.records.len(),
            exp.records.len(),
            exp.distinct_ils().len()
        );
    }
    let overlap = bench.pretrain.il_set().intersection(&bench.experimental_ils()).count();
    println!("ILs shared by both sets: {overlap}");
    println!("written to {dir}/");
    Ok(())
}
