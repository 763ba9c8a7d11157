//! Seeded synthetic oracle standing in for both the simulator and the lab.
//!
//! Every ion gets a hidden 8-vector `z`. A property's structural term is
//! `g(c, a) = u_c·z_c + u_a·z_a + v·(z_c ⊙ z_a) + q·tanh(z_c·z_a)`, and the
//! per-property directions share most of their mass so properties are
//! correlated. Models never see `z`: they consume ion ids, temperature and
//! pressure only.

use std::collections::{BTreeSet, HashSet};

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{exclude_ils, sample_pairs, Dataset, ILKey, IonRole, IonVocabulary, Property, PropertyRecord};
use crate::error::{Error, Result};
use crate::seed;

pub const LATENT_DIM: usize = 8;
pub const REFERENCE_TEMPERATURE: f64 = 298.15;
pub const REFERENCE_PRESSURE: f64 = 1.0;
/// Exponents of `σ = k₃·μ^b·ρ^c` used by the generator.
pub const SURFACE_TENSION_EXPONENTS: (f64, f64) = (0.3, 1.2);
/// Surface tension of the reference liquid (`g = 0`) at 298.15 K, N/m.
const SURFACE_TENSION_REFERENCE: f64 = 0.04;
/// Fraction of each direction's squared norm shared across properties.
const SHARED_FRACTION: f64 = 0.92;
const LINEAR_SCALE: f64 = 0.41;
const PRODUCT_SCALE: f64 = 0.025;
const TANH_SCALE: f64 = 0.03;
/// Property weights do not depend on the run seed.
const WEIGHT_SEED: u64 = 0x1ea5_7ab1_e5ee_d001;

/// Hidden per-ion descriptors for one role.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentIonFeatures {
    z: Vec<[f64; LATENT_DIM]>,
}

impl LatentIonFeatures {
    fn generate(count: usize, rng: &mut ChaCha8Rng) -> Self {
        let z = (0..count)
            .map(|_| std::array::from_fn(|_| StandardNormal.sample(rng)))
            .collect();
        Self { z }
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    pub fn vector(&self, id: usize) -> &[f64; LATENT_DIM] {
        &self.z[id]
    }

    /// Positive size descriptor `exp(0.2·z₀)`.
    pub fn size(&self, id: usize) -> f64 {
        (0.2 * self.z[id][0]).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentTables {
    pub cations: LatentIonFeatures,
    pub anions: LatentIonFeatures,
}

pub fn generate_ions(num_cations: usize, num_anions: usize, seed: u64) -> Result<LatentTables> {
    if num_cations == 0 || num_anions == 0 {
        return Err(Error::Config("ion counts must be positive".into()));
    }
    let mut rng = seed::rng(seed);
    let cations = LatentIonFeatures::generate(num_cations, &mut rng);
    let anions = LatentIonFeatures::generate(num_anions, &mut rng);
    Ok(LatentTables { cations, anions })
}

/// One value per property, addressable by tag in configuration files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerProperty<T> {
    pub density: T,
    pub ln_viscosity: T,
    pub surface_tension: T,
    pub heat_capacity: T,
    pub melting_point: T,
}

impl<T: Copy> PerProperty<T> {
    pub fn uniform(v: T) -> Self {
        Self {
            density: v,
            ln_viscosity: v,
            surface_tension: v,
            heat_capacity: v,
            melting_point: v,
        }
    }

    pub fn get(&self, p: Property) -> T {
        match p {
            Property::Density => self.density,
            Property::LnViscosity => self.ln_viscosity,
            Property::SurfaceTension => self.surface_tension,
            Property::HeatCapacity => self.heat_capacity,
            Property::MeltingPoint => self.melting_point,
        }
    }
}

/// Affine gap between simulated and true values: `(1 + multiplicative)·y + additive`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bias {
    pub multiplicative: f64,
    pub additive: f64,
}

impl Bias {
    pub const NONE: Bias = Bias {
        multiplicative: 0.0,
        additive: 0.0,
    };

    pub fn apply(&self, y: f64) -> f64 {
        (1.0 + self.multiplicative) * y + self.additive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub seed: u64,
    /// Noise on simulated (pre-training) values, native units.
    pub simulation_noise: PerProperty<f64>,
    /// Noise on experimental values, native units.
    pub measurement_noise: PerProperty<f64>,
    pub simulation_bias: PerProperty<Bias>,
    /// Fraction of simulated ln-viscosity rows replaced by outliers.
    pub outlier_fraction: f64,
    /// Value outliers are pulled toward.
    pub outlier_magnitude: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        let bias = |additive| Bias {
            multiplicative: 0.02,
            additive,
        };
        Self {
            seed: 0,
            simulation_noise: PerProperty {
                density: 1.0,
                ln_viscosity: 0.02,
                surface_tension: 0.0002,
                heat_capacity: 1.0,
                melting_point: 2.0,
            },
            measurement_noise: PerProperty {
                density: 2.0,
                ln_viscosity: 0.05,
                surface_tension: 0.0004,
                heat_capacity: 3.0,
                melting_point: 5.0,
            },
            simulation_bias: PerProperty {
                density: bias(5.0),
                ln_viscosity: bias(0.1),
                surface_tension: bias(0.001),
                heat_capacity: bias(2.0),
                melting_point: bias(3.0),
            },
            outlier_fraction: 0.01,
            outlier_magnitude: 80.0,
        }
    }
}

impl OracleConfig {
    /// Noise-free, unbiased, outlier-free configuration.
    pub fn exact(seed: u64) -> Self {
        Self {
            seed,
            simulation_noise: PerProperty::uniform(0.0),
            measurement_noise: PerProperty::uniform(0.0),
            simulation_bias: PerProperty::uniform(Bias::NONE),
            outlier_fraction: 0.0,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(Error::Config(format!(
                "outlier fraction {} outside [0, 1]",
                self.outlier_fraction
            )));
        }
        if !self.outlier_magnitude.is_finite() {
            return Err(Error::Config("outlier magnitude must be finite".into()));
        }
        for p in Property::ALL {
            for (what, s) in [
                ("simulation", self.simulation_noise.get(p)),
                ("measurement", self.measurement_noise.get(p)),
            ] {
                if !(s >= 0.0 && s.is_finite()) {
                    return Err(Error::Config(format!("{what} noise for {p} must be finite and >= 0")));
                }
            }
            let b = self.simulation_bias.get(p);
            if !(b.multiplicative.is_finite() && b.additive.is_finite() && b.multiplicative > -1.0) {
                return Err(Error::Config(format!("invalid simulation bias for {p}")));
            }
        }
        Ok(())
    }
}

/// Which ILs get simulated and measured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SamplingPlan {
    pub num_cations: usize,
    pub num_anions: usize,
    /// Anions paired with each cation in the simulated set.
    pub anions_per_cation: usize,
    pub pretrain_properties: Vec<Property>,
    /// Size of the measured IL subset, per property.
    pub experimental_ils: usize,
    pub min_temperatures: usize,
    pub max_temperatures: usize,
    pub temperature_range: (f64, f64),
    /// Maximum pressure for off-ambient density measurements.
    pub max_pressure: f64,
    /// Share of density measurements taken at ambient pressure.
    pub ambient_pressure_share: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        Self {
            num_cations: 200,
            num_anions: 60,
            anions_per_cation: 9,
            pretrain_properties: Property::PRETRAINABLE.to_vec(),
            experimental_ils: 150,
            min_temperatures: 5,
            max_temperatures: 9,
            temperature_range: (278.15, 368.15),
            max_pressure: 100.0,
            ambient_pressure_share: 0.6,
        }
    }
}

impl SamplingPlan {
    pub fn validate(&self) -> Result<()> {
        let universe = self.num_cations * self.num_anions;
        if universe == 0 {
            return Err(Error::Config("ion counts must be positive".into()));
        }
        if self.anions_per_cation > self.num_anions {
            return Err(Error::Config(format!(
                "{} anions per cation exceeds {} anions",
                self.anions_per_cation, self.num_anions
            )));
        }
        if self.experimental_ils > universe {
            return Err(Error::Config(format!(
                "{} experimental ILs exceed a universe of {universe}",
                self.experimental_ils
            )));
        }
        if self.min_temperatures == 0 || self.min_temperatures > self.max_temperatures {
            return Err(Error::Config("temperature counts must satisfy 1 <= min <= max".into()));
        }
        let (lo, hi) = self.temperature_range;
        if !(lo >= 273.0 && hi <= 473.0 && lo < hi) {
            return Err(Error::Config(format!(
                "temperature range [{lo}, {hi}] outside [273, 473] K"
            )));
        }
        if !(self.max_pressure >= 1.0 && self.max_pressure <= 100.0) {
            return Err(Error::Config("max pressure must lie in [1, 100] bar".into()));
        }
        if !(0.0..=1.0).contains(&self.ambient_pressure_share) {
            return Err(Error::Config("ambient pressure share outside [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Weights {
    cation: [f64; LATENT_DIM],
    anion: [f64; LATENT_DIM],
    product: [f64; LATENT_DIM],
    tanh: f64,
}

fn unit(rng: &mut ChaCha8Rng) -> [f64; LATENT_DIM] {
    let v: [f64; LATENT_DIM] = std::array::from_fn(|_| StandardNormal.sample(rng));
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.map(|x| x / n)
}

/// A unit vector mixing `shared` with a fresh direction orthogonal to it.
fn mixed(shared: &[f64; LATENT_DIM], rng: &mut ChaCha8Rng) -> [f64; LATENT_DIM] {
    let mut e = unit(rng);
    let d: f64 = e.iter().zip(shared).map(|(a, b)| a * b).sum();
    e.iter_mut().zip(shared).for_each(|(a, b)| *a -= d * b);
    let n = e.iter().map(|x| x * x).sum::<f64>().sqrt();
    let (a, b) = (SHARED_FRACTION.sqrt(), (1.0 - SHARED_FRACTION).sqrt());
    std::array::from_fn(|i| a * shared[i] + b * e[i] / n)
}

fn property_weights() -> [Weights; 4] {
    let mut rng = seed::rng(WEIGHT_SEED);
    let shared_c = unit(&mut rng);
    let shared_a = unit(&mut rng);
    let shared_p = unit(&mut rng);
    std::array::from_fn(|_| Weights {
        cation: mixed(&shared_c, &mut rng).map(|x| LINEAR_SCALE * x),
        anion: mixed(&shared_a, &mut rng).map(|x| LINEAR_SCALE * x),
        product: mixed(&shared_p, &mut rng).map(|x| PRODUCT_SCALE * x),
        tanh: TANH_SCALE,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Ground truth for a seeded ion universe.
#[derive(Debug, Clone, PartialEq)]
pub struct Oracle {
    config: OracleConfig,
    ions: LatentTables,
    weights: [Weights; 4],
    k3: f64,
}

impl Oracle {
    pub fn new(config: OracleConfig, num_cations: usize, num_anions: usize) -> Result<Self> {
        config.validate()?;
        let ions = generate_ions(num_cations, num_anions, seed::derive(config.seed, 1))?;
        let (b, c) = SURFACE_TENSION_EXPONENTS;
        let ln_mu = 1.5 + 800.0 / (REFERENCE_TEMPERATURE - 150.0);
        let rho: f64 = 1250.0 - 0.6 * (REFERENCE_TEMPERATURE - 298.0);
        let k3 = SURFACE_TENSION_REFERENCE / ((b * ln_mu).exp() * rho.powf(c));
        Ok(Self {
            config,
            ions,
            weights: property_weights(),
            k3,
        })
    }

    pub fn config(&self) -> &OracleConfig {
        &self.config
    }

    pub fn ions(&self) -> &LatentTables {
        &self.ions
    }

    pub fn num_cations(&self) -> usize {
        self.ions.cations.len()
    }

    pub fn num_anions(&self) -> usize {
        self.ions.anions.len()
    }

    /// `(k₃, b, c)` of the surface-tension surface.
    pub fn surface_tension_law(&self) -> (f64, f64, f64) {
        let (b, c) = SURFACE_TENSION_EXPONENTS;
        (self.k3, b, c)
    }

    fn structural(&self, k: usize, il: ILKey) -> f64 {
        let w = &self.weights[k];
        let zc = self.ions.cations.vector(il.cation);
        let za = self.ions.anions.vector(il.anion);
        let product: f64 = (0..LATENT_DIM).map(|i| w.product[i] * zc[i] * za[i]).sum();
        dot(&w.cation, zc) + dot(&w.anion, za) + product + w.tanh * dot(zc, za).tanh()
    }

    /// Noise-free value in native units.
    pub fn true_property(&self, il: ILKey, property: Property, temperature: f64, pressure: f64) -> Result<f64> {
        if il.cation >= self.num_cations() || il.anion >= self.num_anions() {
            return Err(Error::OutOfVocabulary {
                id: il.cation.max(il.anion),
                size: self.num_cations().min(self.num_anions()),
            });
        }
        if !(273.0..=473.0).contains(&temperature) {
            return Err(Error::Domain(format!("temperature {temperature} K outside [273, 473]")));
        }
        if !(0.5..=100.0).contains(&pressure) {
            return Err(Error::Domain(format!("pressure {pressure} bar outside [0.5, 100]")));
        }
        let t = temperature;
        let density = || 1250.0 + 150.0 * self.structural(0, il) - 0.6 * (t - 298.0) + 0.045 * (pressure - 1.0);
        let ln_viscosity = || 1.5 + 2.0 * self.structural(1, il) + 800.0 / (t - 150.0);
        Ok(match property {
            Property::Density => density(),
            Property::LnViscosity => ln_viscosity(),
            Property::SurfaceTension => {
                let (k3, b, c) = self.surface_tension_law();
                k3 * (b * ln_viscosity()).exp() * density().powf(c)
            }
            Property::HeatCapacity => 300.0 + 120.0 * self.structural(2, il) + 0.8 * (t - 298.0),
            Property::MeltingPoint => 280.0 + 60.0 * self.structural(3, il),
        })
    }

    /// Simulated records at the reference state for `ils`, with bias, noise and
    /// (for ln viscosity) outliers. `stream` separates independent draws.
    pub fn simulate(&self, ils: &[ILKey], property: Property, stream: u64) -> Result<Vec<PropertyRecord>> {
        let mut rng = seed::rng(seed::derive_all(self.config.seed, &[2, stream, property as u64]));
        let noise = self.config.simulation_noise.get(property);
        let bias = self.config.simulation_bias.get(property);
        let outliers = property == Property::LnViscosity && self.config.outlier_fraction > 0.0;
        ils.iter()
            .map(|&il| {
                let y = self.true_property(il, property, REFERENCE_TEMPERATURE, REFERENCE_PRESSURE)?;
                let mut value = bias.apply(y) + noise * gaussian(&mut rng);
                if outliers && rng.random::<f64>() < self.config.outlier_fraction {
                    let u = 1.0 - 0.75 * rng.random::<f64>();
                    value += (self.config.outlier_magnitude - value) * u;
                }
                Ok(PropertyRecord {
                    il,
                    property,
                    temperature: REFERENCE_TEMPERATURE,
                    pressure: REFERENCE_PRESSURE,
                    value,
                })
            })
            .collect()
    }

    /// Measured records for `ils` over a per-IL temperature grid.
    pub fn measure(&self, ils: &[ILKey], property: Property, plan: &SamplingPlan) -> Result<Vec<PropertyRecord>> {
        let mut rng = seed::rng(seed::derive_all(self.config.seed, &[3, property as u64]));
        let noise = self.config.measurement_noise.get(property);
        let mut out = Vec::new();
        for &il in ils {
            if !property.depends_on_conditions() {
                let y = self.true_property(il, property, REFERENCE_TEMPERATURE, REFERENCE_PRESSURE)?;
                out.push(PropertyRecord {
                    il,
                    property,
                    temperature: REFERENCE_TEMPERATURE,
                    pressure: REFERENCE_PRESSURE,
                    value: y + noise * gaussian(&mut rng),
                });
                continue;
            }
            let n = rng.random_range(plan.min_temperatures..=plan.max_temperatures);
            let (lo, hi) = plan.temperature_range;
            let mut temps: Vec<f64> = (0..n).map(|_| lo + (hi - lo) * rng.random::<f64>()).collect();
            temps.sort_by(f64::total_cmp);
            for t in temps {
                let t = (t * 100.0).round() / 100.0;
                let p = if property == Property::Density && rng.random::<f64>() >= plan.ambient_pressure_share {
                    1.0 + (plan.max_pressure - 1.0) * rng.random::<f64>()
                } else {
                    REFERENCE_PRESSURE
                };
                let y = self.true_property(il, property, t, p)?;
                out.push(PropertyRecord {
                    il,
                    property,
                    temperature: t,
                    pressure: p,
                    value: y + noise * gaussian(&mut rng),
                });
            }
        }
        Ok(out)
    }
}

fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Simulated and experimental datasets over one synthetic universe.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub oracle: Oracle,
    pub plan: SamplingPlan,
    /// Simulated records at 298.15 K and 1 bar, for every pre-training property.
    pub pretrain: Dataset,
    /// Measured records, all five properties.
    pub experimental: Dataset,
}

impl Benchmark {
    /// Every IL with at least one experimental record.
    pub fn experimental_ils(&self) -> HashSet<ILKey> {
        self.experimental.il_set()
    }

    /// The pre-training pair sample for another `anions_per_cation`, with the
    /// experimental ILs and `also_exclude` removed.
    pub fn pretrain_pairs(&self, anions_per_cation: usize, also_exclude: &HashSet<ILKey>) -> Result<Vec<ILKey>> {
        let pairs = sample_pairs(
            self.plan.num_cations,
            self.plan.num_anions,
            anions_per_cation,
            seed::derive(self.oracle.config.seed, 4),
        )?;
        let mut forbidden = self.experimental_ils();
        forbidden.extend(also_exclude.iter().copied());
        Ok(exclude_ils(&pairs, &forbidden))
    }

    /// Simulated dataset for `property` over `pairs`.
    pub fn simulated(&self, pairs: &[ILKey], property: Property) -> Result<Dataset> {
        let records = self.oracle.simulate(pairs, property, 0)?;
        Ok(self.pretrain.with_records(records))
    }
}

/// Builds the synthetic benchmark: simulated data on a stratified pair sample
/// and sparse measurements on random IL subsets, disjoint from the sample.
pub fn emit_datasets(config: &OracleConfig, plan: &SamplingPlan) -> Result<Benchmark> {
    plan.validate()?;
    let oracle = Oracle::new(*config, plan.num_cations, plan.num_anions)?;
    let cations = IonVocabulary::synthetic(IonRole::Cation, plan.num_cations);
    let anions = IonVocabulary::synthetic(IonRole::Anion, plan.num_anions);
    let base = Dataset::with_vocabularies(cations, anions);
    let universe = plan.num_cations * plan.num_anions;

    let mut experimental = Vec::new();
    let mut measured: HashSet<ILKey> = HashSet::new();
    for (k, property) in Property::ALL.into_iter().enumerate() {
        let mut rng = seed::rng(seed::derive_all(config.seed, &[5, k as u64]));
        let mut chosen: Vec<usize> = sample(&mut rng, universe, plan.experimental_ils).into_vec();
        chosen.sort_unstable();
        let ils: Vec<ILKey> = chosen
            .into_iter()
            .map(|i| ILKey::new(i / plan.num_anions, i % plan.num_anions))
            .collect();
        measured.extend(ils.iter().copied());
        experimental.extend(oracle.measure(&ils, property, plan)?);
    }

    let pairs = sample_pairs(
        plan.num_cations,
        plan.num_anions,
        plan.anions_per_cation,
        seed::derive(config.seed, 4),
    )?;
    let pairs = exclude_ils(&pairs, &measured);
    let properties: BTreeSet<Property> = plan.pretrain_properties.iter().copied().collect();
    let mut pretrain = Vec::new();
    for property in properties {
        pretrain.extend(oracle.simulate(&pairs, property, 0)?);
    }
    Ok(Benchmark {
        oracle,
        plan: plan.clone(),
        pretrain: base.with_records(pretrain),
        experimental: base.with_records(experimental),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_plan() -> SamplingPlan {
        SamplingPlan {
            num_cations: 40,
            num_anions: 12,
            anions_per_cation: 4,
            experimental_ils: 20,
            ..SamplingPlan::default()
        }
    }

    #[test]
    fn ion_tables_are_seeded() {
        let a = generate_ions(30, 10, 5).unwrap();
        assert_eq!(a, generate_ions(30, 10, 5).unwrap());
        let b = generate_ions(30, 10, 6).unwrap();
        let diff = (0..30)
            .flat_map(|i| (0..LATENT_DIM).map(move |j| (i, j)))
            .map(|(i, j)| (a.cations.vector(i)[j] - b.cations.vector(i)[j]).abs())
            .fold(0.0, f64::max);
        assert!(diff > 0.0);
        assert!(generate_ions(0, 3, 1).is_err());
        assert!((0..30).all(|i| a.cations.size(i) > 0.0));
    }

    #[test]
    fn latent_moments() {
        let t = generate_ions(10_000, 1, 11).unwrap();
        let values: Vec<f64> = (0..10_000).flat_map(|i| *t.cations.vector(i)).collect();
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "{mean}");
        assert!((var - 1.0).abs() < 0.05, "{var}");
    }

    #[test]
    fn density_slope_and_viscosity_monotone() {
        let o = Oracle::new(OracleConfig::default(), 20, 7).unwrap();
        for c in 0..20 {
            for a in 0..7 {
                let il = ILKey::new(c, a);
                let d298 = o.true_property(il, Property::Density, 298.0, 1.0).unwrap();
                let d308 = o.true_property(il, Property::Density, 308.0, 1.0).unwrap();
                assert!((d298 - d308 - 6.0).abs() < 1e-9);
                let mut prev = f64::INFINITY;
                for t in (280..460).step_by(10) {
                    let v = o.true_property(il, Property::LnViscosity, t as f64, 1.0).unwrap();
                    assert!(v < prev);
                    prev = v;
                }
            }
        }
        assert!(o
            .true_property(ILKey::new(0, 0), Property::Density, 250.0, 1.0)
            .is_err());
        assert!(o
            .true_property(ILKey::new(0, 0), Property::Density, 300.0, 200.0)
            .is_err());
        assert!(o
            .true_property(ILKey::new(20, 0), Property::Density, 300.0, 1.0)
            .is_err());
    }

    #[test]
    fn surface_tension_follows_power_law() {
        let o = Oracle::new(OracleConfig::default(), 15, 9).unwrap();
        let (k3, b, c) = o.surface_tension_law();
        for (i, t) in [(0usize, 290.0), (3, 330.0), (14, 410.0)] {
            let il = ILKey::new(i, i % 9);
            let rho = o.true_property(il, Property::Density, t, 1.0).unwrap();
            let mu = o.true_property(il, Property::LnViscosity, t, 1.0).unwrap().exp();
            let sigma = o.true_property(il, Property::SurfaceTension, t, 1.0).unwrap();
            assert!((k3 * mu.powf(b) * rho.powf(c) - sigma).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_config_reproduces_truth() {
        let b = emit_datasets(&OracleConfig::exact(3), &small_plan()).unwrap();
        for r in b.pretrain.records.iter().chain(&b.experimental.records) {
            let y = b
                .oracle
                .true_property(r.il, r.property, r.temperature, r.pressure)
                .unwrap();
            assert_eq!(r.value, y);
        }
    }

    #[test]
    fn emission_contract() {
        let plan = small_plan();
        let b = emit_datasets(&OracleConfig::default().with_seed(8), &plan).unwrap();
        assert_eq!(b, emit_datasets(&OracleConfig::default().with_seed(8), &plan).unwrap());
        assert!(b
            .pretrain
            .records
            .iter()
            .all(|r| r.temperature == REFERENCE_TEMPERATURE && r.pressure == REFERENCE_PRESSURE));
        let overlap = b.pretrain.il_set().intersection(&b.experimental.il_set()).count();
        assert_eq!(overlap, 0);
        for p in Property::ALL {
            let ds = b.experimental.filter_property(p);
            assert_eq!(ds.distinct_ils().len(), plan.experimental_ils);
            for il in ds.distinct_ils() {
                let n = ds.records.iter().filter(|r| r.il == il).count();
                if p == Property::MeltingPoint {
                    assert_eq!(n, 1);
                } else {
                    assert!((5..=9).contains(&n));
                }
            }
            if p != Property::Density {
                assert!(ds.records.iter().all(|r| r.pressure == 1.0));
            }
        }
        assert_eq!(b.pretrain.properties().len(), 3);
    }

    #[test]
    fn outlier_rate() {
        let plan = SamplingPlan {
            num_cations: 200,
            num_anions: 50,
            anions_per_cation: 50,
            pretrain_properties: vec![Property::LnViscosity],
            experimental_ils: 0,
            ..SamplingPlan::default()
        };
        let b = emit_datasets(&OracleConfig::default().with_seed(21), &plan).unwrap();
        assert_eq!(b.pretrain.records.len(), 10_000);
        let high = b.pretrain.records.iter().filter(|r| r.value > 20.0).count();
        assert!((70..=130).contains(&high), "{high}");
        assert!(b.pretrain.records.iter().all(|r| r.value <= 80.0));
    }

    #[test]
    fn physical_ranges() {
        let b = emit_datasets(&OracleConfig::default().with_seed(2), &SamplingPlan::default()).unwrap();
        let share = |p: Property, lo: f64, hi: f64, ds: &Dataset| {
            let rows: Vec<f64> = ds.filter_property(p).records.iter().map(|r| r.value).collect();
            rows.iter().filter(|v| (lo..=hi).contains(*v)).count() as f64 / rows.len() as f64
        };
        assert!(share(Property::Density, 900.0, 1600.0, &b.experimental) >= 0.99);
        assert!(share(Property::Density, 900.0, 1600.0, &b.pretrain) >= 0.99);
        assert!(share(Property::LnViscosity, 0.0, 15.0, &b.experimental) >= 0.99);
        let (k3, _, _) = b.oracle.surface_tension_law();
        assert!(k3 > 0.0);
        let clean = emit_datasets(&OracleConfig::exact(2), &SamplingPlan::default()).unwrap();
        assert!(clean
            .pretrain
            .filter_property(Property::LnViscosity)
            .records
            .iter()
            .all(|r| r.value < 20.0));
    }

    #[test]
    fn config_validation() {
        let c = OracleConfig {
            outlier_fraction: 1.5,
            ..OracleConfig::default()
        };
        assert!(c.validate().is_err());
        let mut c = OracleConfig::default();
        c.measurement_noise.density = -1.0;
        assert!(c.validate().is_err());
        let plan = SamplingPlan {
            anions_per_cation: 61,
            ..SamplingPlan::default()
        };
        assert!(plan.validate().is_err());
    }
}
