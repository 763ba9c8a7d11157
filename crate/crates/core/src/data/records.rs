use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::property::Property;
use super::vocab::{IonRole, IonVocabulary};
use crate::error::{Error, Result};

/// An ionic liquid, identified by its (cation, anion) id pair. This is the
/// grouping unit for every train/test split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ILKey {
    pub cation: usize,
    pub anion: usize,
}

impl ILKey {
    pub fn new(cation: usize, anion: usize) -> Self {
        Self { cation, anion }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropertyRecord {
    pub il: ILKey,
    pub property: Property,
    /// Kelvin.
    pub temperature: f64,
    /// Bar.
    pub pressure: f64,
    /// Native units of `property`.
    pub value: f64,
}

impl PropertyRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(format!("temperature {} K must be positive", self.temperature));
        }
        if !(self.pressure > 0.0 && self.pressure.is_finite()) {
            return Err(format!("pressure {} bar must be positive", self.pressure));
        }
        if !self.value.is_finite() {
            return Err(format!("value {} is not finite", self.value));
        }
        Ok(())
    }
}

/// Records together with the vocabularies their ids refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub cations: IonVocabulary,
    pub anions: IonVocabulary,
    pub records: Vec<PropertyRecord>,
}

impl Dataset {
    pub fn empty() -> Self {
        Self::with_vocabularies(IonVocabulary::new(IonRole::Cation), IonVocabulary::new(IonRole::Anion))
    }

    pub fn with_vocabularies(cations: IonVocabulary, anions: IonVocabulary) -> Self {
        Self {
            cations,
            anions,
            records: Vec::new(),
        }
    }

    /// Same vocabularies, only the records of `property`.
    pub fn filter_property(&self, property: Property) -> Dataset {
        Dataset {
            cations: self.cations.clone(),
            anions: self.anions.clone(),
            records: self
                .records
                .iter()
                .filter(|r| r.property == property)
                .copied()
                .collect(),
        }
    }

    pub fn with_records(&self, records: Vec<PropertyRecord>) -> Dataset {
        Dataset {
            cations: self.cations.clone(),
            anions: self.anions.clone(),
            records,
        }
    }

    pub fn distinct_ils(&self) -> BTreeSet<ILKey> {
        self.records.iter().map(|r| r.il).collect()
    }

    pub fn il_set(&self) -> HashSet<ILKey> {
        self.records.iter().map(|r| r.il).collect()
    }

    pub fn properties(&self) -> BTreeSet<Property> {
        self.records.iter().map(|r| r.property).collect()
    }

    /// Drops exact replicates of `(il, property, T, P)`, keeping the first.
    pub fn dedup_replicates(&mut self) {
        let mut seen = HashSet::new();
        self.records
            .retain(|r| seen.insert((r.il, r.property, r.temperature.to_bits(), r.pressure.to_bits())));
    }
}

pub const RECORD_COLUMNS: [&str; 6] = ["cation", "anion", "property", "temperature_K", "pressure_bar", "value"];

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Drop replicate measurements at identical conditions.
    pub dedup: bool,
    /// Reject ion names missing from the supplied vocabularies instead of adding them.
    pub fixed_vocabulary: bool,
}

/// Reads a records CSV into a fresh pair of vocabularies.
pub fn load_records(path: impl AsRef<Path>) -> Result<Dataset> {
    read_records(File::open(path)?, Dataset::empty(), LoadOptions::default())
}

/// Reads records on top of `base` (its vocabularies and any existing records).
pub fn read_records<R: Read>(reader: R, base: Dataset, opts: LoadOptions) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut cols = [0usize; 6];
    for (slot, name) in cols.iter_mut().zip(RECORD_COLUMNS) {
        *slot = headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column {name:?}"),
        })?;
    }

    let mut ds = base;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| row.get(cols[i]).unwrap_or("");
        let number = |i: usize| -> Result<f64> {
            field(i).parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("{} {:?} is not a number", RECORD_COLUMNS[i], field(i)),
            })
        };
        let property: Property = field(2).parse().map_err(|_| Error::Parse {
            line,
            message: format!("unknown property tag {:?}", field(2)),
        })?;
        let (cation, anion) = if opts.fixed_vocabulary {
            (
                ds.cations.lookup(field(0)).map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?,
                ds.anions.lookup(field(1)).map_err(|e| Error::Parse {
                    line,
                    message: e.to_string(),
                })?,
            )
        } else {
            let wrap = |e: Error| Error::Parse {
                line,
                message: e.to_string(),
            };
            (
                ds.cations.intern(field(0)).map_err(wrap)?,
                ds.anions.intern(field(1)).map_err(wrap)?,
            )
        };
        let record = PropertyRecord {
            il: ILKey::new(cation, anion),
            property,
            temperature: number(3)?,
            pressure: number(4)?,
            value: number(5)?,
        };
        record.validate().map_err(|message| Error::Parse { line, message })?;
        ds.records.push(record);
    }
    if opts.dedup {
        ds.dedup_replicates();
    }
    Ok(ds)
}

pub fn write_records<W: Write>(writer: W, ds: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RECORD_COLUMNS)?;
    for r in &ds.records {
        w.write_record([
            ds.cations.name(r.il.cation).unwrap_or("?"),
            ds.anions.name(r.il.anion).unwrap_or("?"),
            r.property.tag(),
            &r.temperature.to_string(),
            &r.pressure.to_string(),
            &r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an ions CSV (`role,name`).
pub fn read_ions<R: Read>(reader: R) -> Result<(IonVocabulary, IonVocabulary)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing column {name:?}"),
        })
    };
    let (role_col, name_col) = (col("role")?, col("name")?);
    let mut cations = IonVocabulary::new(IonRole::Cation);
    let mut anions = IonVocabulary::new(IonRole::Anion);
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line() as usize);
        let name = row.get(name_col).unwrap_or("");
        let vocab = match row.get(role_col).unwrap_or("") {
            "cation" => &mut cations,
            "anion" => &mut anions,
            other => {
                return Err(Error::Parse {
                    line,
                    message: format!("role {other:?} is neither cation nor anion"),
                })
            }
        };
        if vocab.id(name).is_some() {
            return Err(Error::Parse {
                line,
                message: format!("duplicate ion {name:?}"),
            });
        }
        vocab.intern(name).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
    }
    Ok((cations, anions))
}

pub fn load_ions(path: impl AsRef<Path>) -> Result<(IonVocabulary, IonVocabulary)> {
    read_ions(File::open(path)?)
}

pub fn write_ions<W: Write>(writer: W, cations: &IonVocabulary, anions: &IonVocabulary) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["role", "name"])?;
    for v in [cations, anions] {
        for n in v.names() {
            w.write_record([v.role().tag(), n.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}
