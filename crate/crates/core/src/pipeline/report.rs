use std::fmt::Write as _;
use std::io::Write;

use super::metrics::MetricReport;
use super::sweep::SweepPoint;
use super::transfer::TransferMatrix;
use super::CvReport;
use crate::error::Result;

const METRIC_COLUMNS: &str = "r2,mae,mape,n_records,n_ils";

fn metric_fields(m: &MetricReport) -> String {
    format!("{},{},{},{},{}", m.r2, m.mae, m.mape, m.n_records, m.n_ils)
}

/// One row per (grid point, fold), plus a `mean` row per grid point.
pub fn write_cv_csv<W: Write>(mut out: W, report: &CvReport) -> Result<()> {
    writeln!(out, "grid_point,fold,selected,{METRIC_COLUMNS}")?;
    for (i, p) in report.points.iter().enumerate() {
        let selected = i == report.best;
        for (f, m) in p.folds.iter().enumerate() {
            writeln!(out, "\"{}\",{f},{selected},{}", p.label, metric_fields(m))?;
        }
        writeln!(out, "\"{}\",mean,{selected},{}", p.label, metric_fields(&p.mean))?;
    }
    Ok(())
}

pub fn write_transfer_csv<W: Write>(mut out: W, matrix: &TransferMatrix) -> Result<()> {
    writeln!(out, "source,target,within,grid_point,fold,{METRIC_COLUMNS}")?;
    for c in &matrix.cells {
        let head = format!("{},{},{},\"{}\"", c.source.tag(), c.target.tag(), c.within, c.label);
        for (f, m) in c.folds.iter().enumerate() {
            writeln!(out, "{head},{f},{}", metric_fields(m))?;
        }
        writeln!(out, "{head},mean,{}", metric_fields(&c.mean))?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut out: W, points: &[SweepPoint]) -> Result<()> {
    writeln!(out, "anions_per_cation,pretrain_ils,stage,property,{METRIC_COLUMNS}")?;
    for p in points {
        let lead = format!("{},{}", p.anions_per_cation, p.pretrain_ils);
        writeln!(out, "{lead},pretrain,holdout,{}", metric_fields(&p.pretrain))?;
        for (t, m) in &p.finetune {
            writeln!(out, "{lead},finetune,{},{}", t.tag(), metric_fields(m))?;
        }
    }
    Ok(())
}

pub fn cv_summary(title: &str, report: &CvReport) -> String {
    let mut s = format!("{title}\n");
    for (i, p) in report.points.iter().enumerate() {
        let mark = if i == report.best { "*" } else { " " };
        let _ = writeln!(
            s,
            "{mark} {:<32} MAE {:.6}  MAPE {:.3}%  R2 {:.4}  ({} folds)",
            p.label,
            p.mean.mae,
            p.mean.mape,
            p.mean.r2,
            p.folds.len()
        );
    }
    s
}

pub fn transfer_summary(matrix: &TransferMatrix) -> String {
    let targets = matrix.targets();
    let mut s = String::from("mean CV MAE (rows: pre-training source, columns: fine-tuning target)\n");
    let _ = write!(s, "{:<16}", "");
    for t in &targets {
        let _ = write!(s, "{:>18}", t.tag());
    }
    s.push('\n');
    for src in matrix.sources() {
        let _ = write!(s, "{:<16}", src.tag());
        for &t in &targets {
            match matrix.get(src, t) {
                Some(c) => {
                    let _ = write!(s, "{:>17.6}{}", c.mean.mae, if c.within { "*" } else { " " });
                }
                None => {
                    let _ = write!(s, "{:>18}", "-");
                }
            }
        }
        s.push('\n');
    }
    s.push_str("* within-property transfer\n");
    s
}

pub fn sweep_summary(points: &[SweepPoint]) -> String {
    let mut s = String::from("anions/cation  pre-train ILs  held-out MAE  fine-tune MAE by target\n");
    for p in points {
        let _ = write!(
            s,
            "{:>13}  {:>13}  {:>12.6} ",
            p.anions_per_cation, p.pretrain_ils, p.pretrain.mae
        );
        for (t, m) in &p.finetune {
            let _ = write!(s, " {}={:.6}", t.tag(), m.mae);
        }
        s.push('\n');
    }
    s
}
