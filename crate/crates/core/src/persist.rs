//! Versioned model artifacts.
//!
//! Layout: a UTF-8 header of `key=value` lines opened by `ILNRS` and closed by
//! `end`, then every tensor as row-major little-endian `f64`, then a SHA-256
//! digest of everything before it. The header carries the architecture, the
//! scalers, both ion name lists and their fingerprints, and a tensor table.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::data::{IonRole, IonVocabulary, Property, Scaler};
use crate::error::{Error, Result};
use crate::model::{
    build_pretrain, EncoderSnapshot, FinetuneConfig, FinetuneModel, FinetuneScalers, Head, PretrainConfig,
};
use crate::nn::{Loss, Matrix, Parameter, Parameterized};

pub const MAGIC: &str = "ILNRS";
pub const FORMAT_VERSION: u32 = 1;
const DIGEST_LEN: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArtifactKind {
    Encoder,
    Finetune,
}

impl ArtifactKind {
    pub fn tag(self) -> &'static str {
        match self {
            ArtifactKind::Encoder => "encoder",
            ArtifactKind::Finetune => "finetune",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SavedModel {
    Encoder(EncoderSnapshot),
    Finetune(FinetuneModel),
}

impl SavedModel {
    pub fn kind(&self) -> ArtifactKind {
        match self {
            SavedModel::Encoder(_) => ArtifactKind::Encoder,
            SavedModel::Finetune(_) => ArtifactKind::Finetune,
        }
    }
}

/// A loaded model with the vocabularies its ion ids refer to.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact<M> {
    pub model: M,
    pub cations: IonVocabulary,
    pub anions: IonVocabulary,
}

impl<M> Artifact<M> {
    /// Fails unless both vocabularies match the artifact's id assignment exactly.
    pub fn check_vocabularies(&self, cations: &IonVocabulary, anions: &IonVocabulary) -> Result<()> {
        if cations.fingerprint() != self.cations.fingerprint() {
            return Err(Error::Fingerprint { role: "cation" });
        }
        if anions.fingerprint() != self.anions.fingerprint() {
            return Err(Error::Fingerprint { role: "anion" });
        }
        Ok(())
    }
}

fn loss_tag(loss: Loss) -> String {
    match loss {
        Loss::Mse => "mse".into(),
        Loss::Huber { delta } => format!("huber:{delta}"),
    }
}

fn parse_loss(s: &str) -> Result<Loss> {
    match s.split_once(':') {
        None if s == "mse" => Ok(Loss::Mse),
        Some(("huber", d)) => Ok(Loss::Huber {
            delta: parse(d, "loss")?,
        }),
        _ => Err(Error::Format(format!("unknown loss {s:?}"))),
    }
}

fn scaler_tag(s: &Scaler) -> String {
    format!("{},{},{}", s.mean, s.std, s.constant)
}

fn parse_scaler(s: &str) -> Result<Scaler> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::Format(format!("malformed scaler {s:?}")));
    }
    Ok(Scaler {
        mean: parse(parts[0], "scaler")?,
        std: parse(parts[1], "scaler")?,
        constant: parse(parts[2], "scaler")?,
    })
}

fn parse<T: std::str::FromStr>(s: &str, key: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::Format(format!("bad value {s:?} for {key}")))
}

fn branch_names(prefix: &str, blocks: usize) -> Vec<String> {
    let mut v = vec![
        format!("{prefix}.projection.weight"),
        format!("{prefix}.projection.bias"),
    ];
    for i in 0..blocks {
        v.push(format!("{prefix}.block{i}.weight"));
        v.push(format!("{prefix}.block{i}.bias"));
    }
    v
}

fn encoder_tensor_names(config: &PretrainConfig) -> Vec<String> {
    let mut v = vec!["cation_embedding".to_string(), "anion_embedding".to_string()];
    v.extend(branch_names("cation_branch", config.blocks_per_branch));
    v.extend(branch_names("anion_branch", config.blocks_per_branch));
    v
}

fn head_tensor_names() -> Vec<String> {
    ["hidden1", "hidden2", "output"]
        .iter()
        .flat_map(|l| [format!("head.{l}.weight"), format!("head.{l}.bias")])
        .collect()
}

fn collect(visit: impl FnOnce(&mut dyn FnMut(&Parameter))) -> Vec<Matrix> {
    let mut out = Vec::new();
    visit(&mut |p: &Parameter| out.push(p.value.clone()));
    out
}

/// Serializes a model and its vocabularies.
pub fn to_bytes(model: &SavedModel, cations: &IonVocabulary, anions: &IonVocabulary) -> Result<Vec<u8>> {
    let encoder = match model {
        SavedModel::Encoder(e) => e,
        SavedModel::Finetune(m) => m.encoder().as_ref(),
    };
    if encoder.vocab_sizes() != (cations.len(), anions.len()) {
        return Err(Error::Dimension(format!(
            "model covers {:?} ions but vocabularies have ({}, {})",
            encoder.vocab_sizes(),
            cations.len(),
            anions.len()
        )));
    }
    let pc = encoder.config();
    let mut h = String::new();
    let mut line = |k: &str, v: String| {
        h.push_str(k);
        h.push('=');
        h.push_str(&v);
        h.push('\n');
    };
    line("version", FORMAT_VERSION.to_string());
    line("kind", model.kind().tag().into());
    line("source", encoder.source().tag().into());
    line("embedding_dim", pc.embedding_dim.to_string());
    line("branch_width", pc.branch_width.to_string());
    line("blocks_per_branch", pc.blocks_per_branch.to_string());
    line("pretrain_head_width", pc.head_width.to_string());
    line("pretrain_dropout_rate", pc.dropout_rate.to_string());
    line("pretrain_learning_rate", pc.learning_rate.to_string());
    line("pretrain_loss", loss_tag(pc.loss));
    line("pretrain_robust_scaling", pc.robust_scaling.to_string());
    let mut names = encoder_tensor_names(pc);
    let mut tensors = collect(|f| encoder.visit_params(f));
    if let SavedModel::Finetune(m) = model {
        let fc = m.config();
        line("property", fc.property.tag().into());
        line("head_width", fc.head_width.to_string());
        line("dropout_rate", fc.dropout_rate.to_string());
        line("learning_rate", fc.learning_rate.to_string());
        line("uses_temperature", fc.uses_temperature.to_string());
        line("uses_pressure", fc.uses_pressure.to_string());
        line("scaler.target", scaler_tag(&m.scalers.target));
        line("scaler.temperature", scaler_tag(&m.scalers.temperature));
        line("scaler.pressure", scaler_tag(&m.scalers.pressure));
        names.extend(head_tensor_names());
        tensors.extend(collect(|f| m.head.visit(f)));
    }
    line("cation_count", cations.len().to_string());
    line("anion_count", anions.len().to_string());
    line("cation_fingerprint", cations.fingerprint());
    line("anion_fingerprint", anions.fingerprint());
    for n in cations.names() {
        line("cation", n.clone());
    }
    for n in anions.names() {
        line("anion", n.clone());
    }
    for (n, t) in names.iter().zip(&tensors) {
        line("tensor", format!("{n} {} {}", t.rows(), t.cols()));
    }

    let mut bytes = format!("{MAGIC}\n{h}end\n").into_bytes();
    for t in &tensors {
        for v in t.data() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    let digest = Sha256::digest(&bytes);
    bytes.extend_from_slice(digest.as_slice());
    Ok(bytes)
}

struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    fn get(&self, key: &str) -> Result<&str> {
        let mut found = self.entries.iter().filter(|(k, _)| k == key);
        match (found.next(), found.next()) {
            (Some((_, v)), None) => Ok(v),
            (None, _) => Err(Error::Format(format!("missing header key {key}"))),
            (Some(_), Some(_)) => Err(Error::Format(format!("repeated header key {key}"))),
        }
    }

    fn value<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        parse(self.get(key)?, key)
    }

    fn all(&self, key: &str) -> Vec<&str> {
        self.entries
            .iter()
            .filter(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .collect()
    }

    fn property(&self, key: &str) -> Result<Property> {
        self.get(key)?
            .parse()
            .map_err(|_| Error::Format(format!("bad property for {key}")))
    }
}

/// Splits the header from the payload and checks magic, version, size and digest.
fn open(bytes: &[u8]) -> Result<(Header, &[u8])> {
    let magic = format!("{MAGIC}\n");
    if !bytes.starts_with(magic.as_bytes()) {
        return Err(Error::Format("not an artifact (bad magic)".into()));
    }
    let end = bytes
        .windows(5)
        .position(|w| w == b"\nend\n")
        .ok_or_else(|| Error::Payload("header is not terminated".into()))?;
    let text =
        std::str::from_utf8(&bytes[magic.len()..end + 1]).map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let mut entries = Vec::new();
    for line in text.split_terminator('\n') {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("malformed header line {line:?}")))?;
        entries.push((k.to_string(), v.to_string()));
    }
    let header = Header { entries };
    let version: u32 = header.value("version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let mut values = 0usize;
    for t in header.all("tensor") {
        let parts: Vec<&str> = t.split(' ').collect();
        if parts.len() != 3 {
            return Err(Error::Format(format!("malformed tensor entry {t:?}")));
        }
        let rows: usize = parse(parts[1], "tensor")?;
        let cols: usize = parse(parts[2], "tensor")?;
        values = rows
            .checked_mul(cols)
            .and_then(|n| values.checked_add(n))
            .ok_or_else(|| Error::Format("tensor table overflows".into()))?;
    }
    let payload_start = end + 5;
    let expected = values
        .checked_mul(8)
        .and_then(|n| n.checked_add(payload_start + DIGEST_LEN))
        .ok_or_else(|| Error::Format("tensor table overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Payload(format!(
            "expected {expected} bytes, found {}",
            bytes.len()
        )));
    }
    let body = &bytes[..bytes.len() - DIGEST_LEN];
    if Sha256::digest(body).as_slice() != &bytes[bytes.len() - DIGEST_LEN..] {
        return Err(Error::Payload("checksum mismatch".into()));
    }
    Ok((header, &body[payload_start..]))
}

fn vocabulary(header: &Header, role: IonRole) -> Result<IonVocabulary> {
    let tag = role.tag();
    let names = header.all(tag);
    let count: usize = header.value(&format!("{tag}_count"))?;
    if names.len() != count {
        return Err(Error::Format(format!(
            "{count} {tag}s declared, {} listed",
            names.len()
        )));
    }
    let vocab = IonVocabulary::from_names(role, names).map_err(|e| Error::Format(e.to_string()))?;
    if vocab.fingerprint() != header.get(&format!("{tag}_fingerprint"))? {
        return Err(Error::Fingerprint {
            role: match role {
                IonRole::Cation => "cation",
                IonRole::Anion => "anion",
            },
        });
    }
    Ok(vocab)
}

/// Reads tensors into `visit` order, checking names and shapes against the
/// architecture the header declares.
struct Tensors<'a> {
    table: Vec<(String, usize, usize)>,
    payload: &'a [u8],
    next: usize,
    offset: usize,
}

impl<'a> Tensors<'a> {
    fn new(header: &Header, payload: &'a [u8]) -> Result<Self> {
        let table = header
            .all("tensor")
            .into_iter()
            .map(|t| {
                let p: Vec<&str> = t.split(' ').collect();
                Ok((p[0].to_string(), parse(p[1], "tensor")?, parse(p[2], "tensor")?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            table,
            payload,
            next: 0,
            offset: 0,
        })
    }

    fn fill(&mut self, names: &[String], visit: impl FnOnce(&mut dyn FnMut(&mut Parameter))) -> Result<()> {
        let mut failure = None;
        let mut k = 0;
        visit(&mut |p: &mut Parameter| {
            if failure.is_some() {
                return;
            }
            let Some((name, rows, cols)) = self.table.get(self.next) else {
                failure = Some(Error::Format("tensor table is too short".into()));
                return;
            };
            if names.get(k) != Some(name) || p.shape() != (*rows, *cols) {
                failure = Some(Error::Format(format!(
                    "tensor {name} {rows}x{cols} does not match the declared architecture"
                )));
                return;
            }
            let n = rows * cols;
            let bytes = &self.payload[self.offset..self.offset + 8 * n];
            for (dst, chunk) in p.value.data_mut().iter_mut().zip(bytes.chunks_exact(8)) {
                *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
            }
            self.offset += 8 * n;
            self.next += 1;
            k += 1;
        });
        match failure {
            Some(e) => Err(e),
            None if k != names.len() => Err(Error::Format("tensor count mismatch".into())),
            None => Ok(()),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.next != self.table.len() {
            return Err(Error::Format("unexpected extra tensors".into()));
        }
        Ok(())
    }
}

/// Parses and verifies an artifact held in memory.
pub fn from_bytes(bytes: &[u8]) -> Result<Artifact<SavedModel>> {
    let (header, payload) = open(bytes)?;
    let kind = match header.get("kind")? {
        "encoder" => ArtifactKind::Encoder,
        "finetune" => ArtifactKind::Finetune,
        other => return Err(Error::Format(format!("unknown artifact kind {other:?}"))),
    };
    let cations = vocabulary(&header, IonRole::Cation)?;
    let anions = vocabulary(&header, IonRole::Anion)?;
    let mut pc = PretrainConfig::new(header.property("source")?);
    pc.embedding_dim = header.value("embedding_dim")?;
    pc.branch_width = header.value("branch_width")?;
    pc.blocks_per_branch = header.value("blocks_per_branch")?;
    pc.head_width = header.value("pretrain_head_width")?;
    pc.dropout_rate = header.value("pretrain_dropout_rate")?;
    pc.learning_rate = header.value("pretrain_learning_rate")?;
    pc.loss = parse_loss(header.get("pretrain_loss")?)?;
    pc.robust_scaling = header.value("pretrain_robust_scaling")?;
    let mut encoder = build_pretrain(pc, (cations.len(), anions.len()), 0)
        .map_err(|e| Error::Format(e.to_string()))?
        .encoder;
    let mut tensors = Tensors::new(&header, payload)?;
    tensors.fill(&encoder_tensor_names(&pc), |f| encoder.visit_params_mut(f))?;
    let snapshot = EncoderSnapshot::from_parts(encoder, pc, pc.property);

    let model = match kind {
        ArtifactKind::Encoder => SavedModel::Encoder(snapshot),
        ArtifactKind::Finetune => {
            let fc = FinetuneConfig {
                head_width: header.value("head_width")?,
                dropout_rate: header.value("dropout_rate")?,
                learning_rate: header.value("learning_rate")?,
                uses_temperature: header.value("uses_temperature")?,
                uses_pressure: header.value("uses_pressure")?,
                property: header.property("property")?,
            };
            let scalers = FinetuneScalers {
                target: parse_scaler(header.get("scaler.target")?)?,
                temperature: parse_scaler(header.get("scaler.temperature")?)?,
                pressure: parse_scaler(header.get("scaler.pressure")?)?,
            };
            let input = snapshot.width() + fc.condition_count();
            let mut rng = crate::seed::rng(0);
            let mut head = Head::new(input, fc.head_width, &mut rng).map_err(|e| Error::Format(e.to_string()))?;
            tensors.fill(&head_tensor_names(), |f| head.visit_params_mut(f))?;
            SavedModel::Finetune(FinetuneModel::from_parts(Arc::new(snapshot), head, fc, scalers)?)
        }
    };
    tensors.finish()?;
    Ok(Artifact { model, cations, anions })
}

/// Writes atomically: a temporary file in the same directory, then a rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.{}.tmp", file_name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

pub fn save_model(
    path: impl AsRef<Path>,
    model: &SavedModel,
    cations: &IonVocabulary,
    anions: &IonVocabulary,
) -> Result<()> {
    write_atomic(path.as_ref(), &to_bytes(model, cations, anions)?)
}

pub fn save_encoder(
    path: impl AsRef<Path>,
    encoder: &EncoderSnapshot,
    cations: &IonVocabulary,
    anions: &IonVocabulary,
) -> Result<()> {
    save_model(path, &SavedModel::Encoder(encoder.clone()), cations, anions)
}

pub fn save_finetune(
    path: impl AsRef<Path>,
    model: &FinetuneModel,
    cations: &IonVocabulary,
    anions: &IonVocabulary,
) -> Result<()> {
    save_model(path, &SavedModel::Finetune(model.clone()), cations, anions)
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Artifact<SavedModel>> {
    from_bytes(&fs::read(path)?)
}

pub fn load_encoder(path: impl AsRef<Path>) -> Result<Artifact<EncoderSnapshot>> {
    let a = load_model(path)?;
    match a.model {
        SavedModel::Encoder(model) => Ok(Artifact {
            model,
            cations: a.cations,
            anions: a.anions,
        }),
        SavedModel::Finetune(_) => Err(Error::Kind {
            expected: "encoder".into(),
            found: "finetune".into(),
        }),
    }
}

pub fn load_finetune(path: impl AsRef<Path>) -> Result<Artifact<FinetuneModel>> {
    let a = load_model(path)?;
    match a.model {
        SavedModel::Finetune(model) => Ok(Artifact {
            model,
            cations: a.cations,
            anions: a.anions,
        }),
        SavedModel::Encoder(_) => Err(Error::Kind {
            expected: "finetune".into(),
            found: "encoder".into(),
        }),
    }
}
