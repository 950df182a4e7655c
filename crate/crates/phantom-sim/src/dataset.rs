use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use tensor_engine::{container, rng};
use tomo_core::{Geometry, SinogramStack, Unit, Volume};

use crate::acquire::{simulate_cbct, simulate_ct};
use crate::dose::DoseModel;
use crate::spec::{make_phantom, sample_spec, Domain};
use crate::{Result, SimError};

pub const MANIFEST_NAME: &str = "manifest.toml";

/// Smallest slice extent for which every `sample_spec` draw provably fits
/// inside the inscribed circle (see its doc comment).
pub const MIN_EXTENT: usize = 52;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Everything needed to regenerate a dataset bit-exactly, minus the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub depth: usize,
    pub rows: usize,
    pub cols: usize,
    /// Shared by the CT and CBCT scans; should cover the slice diagonal
    /// (n_det·det_spacing ≥ √2·max(rows, cols)) or FBP leaves a rim halo.
    pub n_det: usize,
    pub det_spacing: f64,
    pub ct_dose: DoseModel,
    pub cbct_dose_a: DoseModel,
    pub cbct_dose_b: DoseModel,
    /// Replace an existing dataset directory instead of rejecting it.
    #[serde(default)]
    pub overwrite: bool,
}

impl DatasetConfig {
    /// Laptop-sized 64×64×8 volumes with the domain presets.
    pub fn desk_default() -> Self {
        DatasetConfig {
            depth: 8,
            rows: 64,
            cols: 64,
            n_det: 185,
            det_spacing: 0.5,
            ct_dose: DoseModel::ct(),
            cbct_dose_a: DoseModel::cbct_domain_a(),
            cbct_dose_b: DoseModel::cbct_domain_b(),
            overwrite: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.rows.min(self.cols) < MIN_EXTENT {
            return Err(SimError::invalid(
                "dataset config",
                format!(
                    "extents {}x{}x{}: need depth ≥ 1 and slices ≥ {MIN_EXTENT}²",
                    self.depth, self.rows, self.cols
                ),
            ));
        }
        if self.n_det == 0 || !(self.det_spacing.is_finite() && self.det_spacing > 0.0) {
            return Err(SimError::invalid(
                "dataset config",
                format!("detector: n_det {}, spacing {}", self.n_det, self.det_spacing),
            ));
        }
        self.ct_dose.validate()?;
        self.cbct_dose_a.validate()?;
        self.cbct_dose_b.validate()?;
        Ok(())
    }

    pub fn dose_for(&self, domain: Domain) -> &DoseModel {
        match domain {
            Domain::A => &self.cbct_dose_a,
            Domain::B => &self.cbct_dose_b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub index: usize,
    pub domain: Domain,
    pub split: Split,
    /// Seeds the phantom shape and both acquisitions' noise streams.
    pub phantom_seed: u64,
    pub file: String,
}

/// On-disk description of a generated dataset: the full config echo plus
/// one record per pair, serialized as TOML next to the pair containers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: DatasetConfig,
    pub pairs: Vec<PairRecord>,
}

impl Manifest {
    pub fn ct_geometry(&self) -> Result<Geometry> {
        let c = &self.config;
        Ok(Geometry::new(c.ct_dose.n_angles, c.n_det, c.det_spacing, c.rows, c.cols)?)
    }

    pub fn cbct_geometry(&self, domain: Domain) -> Result<Geometry> {
        let c = &self.config;
        Ok(Geometry::new(c.dose_for(domain).n_angles, c.n_det, c.det_spacing, c.rows, c.cols)?)
    }

    pub fn pairs_in(&self, split: Split) -> Vec<&PairRecord> {
        self.pairs.iter().filter(|p| p.split == split).collect()
    }
}

/// One dataset pair back in memory. `x0`/`xc` are the normalized CT and
/// CBCT reconstructions; `y0` is the CT's log-domain sinogram stack.
#[derive(Debug, Clone)]
pub struct LoadedPair {
    pub record: PairRecord,
    pub x0: Volume,
    pub xc: Volume,
    pub y0: SinogramStack,
}

/// Generates `n_train` training and `n_test` test pairs **per domain**
/// (A and B), writing one container per pair plus `manifest.toml` into
/// `dir`. Every pair derives its randomness from (seed, pair index), so
/// regeneration with the same arguments is bit-identical.
pub fn build_dataset(
    dir: &Path,
    n_train: usize,
    n_test: usize,
    cfg: &DatasetConfig,
    seed: u64,
) -> Result<Manifest> {
    cfg.validate()?;
    if n_train == 0 || n_test == 0 {
        return Err(SimError::invalid(
            "build_dataset",
            format!("need at least one pair per split, got train {n_train}, test {n_test}"),
        ));
    }
    let manifest_path = dir.join(MANIFEST_NAME);
    if manifest_path.exists() && !cfg.overwrite {
        return Err(SimError::Collision { path: manifest_path.display().to_string() });
    }
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;

    let mut pairs = Vec::new();
    let mut index = 0usize;
    for domain in [Domain::A, Domain::B] {
        for (split, count) in [(Split::Train, n_train), (Split::Test, n_test)] {
            for _ in 0..count {
                pairs.push(generate_pair(dir, index, domain, split, cfg, seed)?);
                index += 1;
            }
        }
    }

    let manifest = Manifest { seed, config: cfg.clone(), pairs };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| SimError::Manifest(format!("serialize: {e}")))?;
    fs::write(&manifest_path, text).map_err(|e| SimError::io(&manifest_path, e))?;
    Ok(manifest)
}

fn generate_pair(
    dir: &Path,
    index: usize,
    domain: Domain,
    split: Split,
    cfg: &DatasetConfig,
    seed: u64,
) -> Result<PairRecord> {
    // TOML integers are i64, so keep the drawn seed inside 63 bits.
    let phantom_seed = rng::substream(seed, "pair-seed", index as u64).gen::<u64>() >> 1;
    let spec = sample_spec(cfg.depth, cfg.rows, cfg.cols, domain, phantom_seed, index as u64);
    let phantom = make_phantom(&spec, phantom_seed)?;

    let g0 = Geometry::new(cfg.ct_dose.n_angles, cfg.n_det, cfg.det_spacing, cfg.rows, cfg.cols)?;
    let (y0, x0) = simulate_ct(&phantom, &g0, &cfg.ct_dose, phantom_seed)?;

    let dose_c = cfg.dose_for(domain);
    let gc = Geometry::new(dose_c.n_angles, cfg.n_det, cfg.det_spacing, cfg.rows, cfg.cols)?;
    let (_yc, xc) = simulate_cbct(&phantom, &gc, dose_c, phantom_seed)?;

    let file = format!("pair_{index:03}.epcv");
    let entries = vec![
        ("x0".to_string(), x0.into_values()),
        ("xc".to_string(), xc.into_values()),
        ("y0".to_string(), y0.into_values()),
    ];
    container::write(&dir.join(&file), &entries)?;
    Ok(PairRecord { index, domain, split, phantom_seed, file })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&path).map_err(|e| SimError::io(&path, e))?;
    toml::from_str(&text).map_err(|e| SimError::Manifest(format!("{}: {e}", path.display())))
}

pub fn load_pair(dir: &Path, manifest: &Manifest, index: usize) -> Result<LoadedPair> {
    let record = manifest
        .pairs
        .iter()
        .find(|p| p.index == index)
        .ok_or_else(|| SimError::invalid("load_pair", format!("no pair with index {index}")))?;
    let entries = container::read(&dir.join(&record.file))?;
    let x0 = Volume::new(container::get(&entries, "x0")?.clone(), Unit::Normalized)?;
    let xc = Volume::new(container::get(&entries, "xc")?.clone(), Unit::Normalized)?;
    let y0 = SinogramStack::new(container::get(&entries, "y0")?.clone(), manifest.ct_geometry()?)?;
    Ok(LoadedPair { record: record.clone(), x0, xc, y0 })
}
