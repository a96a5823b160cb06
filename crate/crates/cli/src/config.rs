//! JSON run configuration and its translation into core types.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use casimir_core::dielectric::{
    DielectricModel, Extrapolation, Oscillator, OscillatorParams, Tail,
};
use casimir_core::io::read_optical_table;
use casimir_core::lifshitz::QuadratureConfig;
use casimir_core::mtb_sim::{MtbParams, SweepPlan};
use casimir_core::stack::{Layer, LayerStack};
use serde::Deserialize;

/// A configuration problem, located by a JSON path.
#[derive(Debug)]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ValidationError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ValidationError {}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> anyhow::Error {
    ValidationError {
        path: path.into(),
        message: message.into(),
    }
    .into()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub materials: BTreeMap<String, MaterialSpec>,
    #[serde(default)]
    pub stacks: BTreeMap<String, StackSpec>,
    /// Material filling the gap; vacuum when absent.
    pub gap: Option<String>,
    #[serde(default)]
    pub quadrature: QuadratureConfig<f64>,
    pub force: Option<ForceSection>,
    pub kk: Option<KkSection>,
    pub roughness: Option<RoughnessSection>,
    pub synth: Option<SynthSection>,
    pub analyze: Option<AnalyzeSection>,
    /// Directory relative paths resolve against; set by the loader.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum MaterialSpec {
    Vacuum,
    Constant {
        eps: f64,
    },
    Drude {
        omega_p_rad_s: f64,
        gamma_rad_s: f64,
    },
    Oscillators {
        oscillators: Vec<OscillatorSpec>,
    },
    /// Absorption table `omega_rad_s,im_eps` mapped by Kramers-Kronig.
    Table {
        file: PathBuf,
        low_tail: Option<Tail<f64>>,
        high_tail: Option<Tail<f64>>,
    },
    /// Susceptibilities of the named materials added together.
    Sum {
        components: Vec<String>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscillatorSpec {
    pub strength: f64,
    pub omega_0_rad_s: f64,
    #[serde(default)]
    pub gamma_rad_s: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StackSpec {
    pub substrate: String,
    /// Films from the substrate outwards.
    #[serde(default)]
    pub films: Vec<FilmSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilmSpec {
    pub material: String,
    pub thickness_m: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceSection {
    pub radius_m: f64,
    pub separations: Separations,
    pub curves: Vec<CurveSpec>,
    pub roughness: Option<RoughnessFiles>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSpec {
    pub label: String,
    pub sphere: String,
    pub plate: String,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Separations {
    List(Vec<f64>),
    Grid(GridSpec),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoughnessFiles {
    pub sphere: PathBuf,
    pub plate: PathBuf,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KkSection {
    pub material: String,
    pub xi_rad_s: Separations,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoughnessSection {
    pub height_map: PathBuf,
    pub pitch_m: f64,
    /// Row width for single-column files; grid files need none.
    pub width: Option<usize>,
    pub n_bins: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    #[serde(default)]
    pub params: MtbParams<f64>,
    pub plan: SweepPlan<f64>,
    pub force_law: ForceLawSpec,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ForceLawSpec {
    None,
    IdealMetal,
    /// A curve of the `force` section, tabulated and splined.
    Lifshitz {
        curve: String,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub input: PathBuf,
    pub radius_m: f64,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let file =
            File::open(path).with_context(|| format!("cannot open config {}", path.display()))?;
        let de = &mut serde_json::Deserializer::from_reader(BufReader::new(file));
        let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let p = e.path().to_string();
            invalid(
                if p == "." {
                    "$".to_string()
                } else {
                    format!("$.{p}")
                },
                e.inner().to_string(),
            )
        })?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Checks every name reference and the quadrature settings.
    pub fn validate(&self) -> Result<()> {
        for (name, m) in &self.materials {
            if let MaterialSpec::Sum { components } = m {
                for (i, c) in components.iter().enumerate() {
                    self.material_ref(c, &format!("$.materials.{name}.components[{i}]"))?;
                }
            }
        }
        for (name, s) in &self.stacks {
            self.material_ref(&s.substrate, &format!("$.stacks.{name}.substrate"))?;
            for (i, f) in s.films.iter().enumerate() {
                self.material_ref(&f.material, &format!("$.stacks.{name}.films[{i}].material"))?;
            }
        }
        if let Some(g) = &self.gap {
            self.material_ref(g, "$.gap")?;
        }
        self.quadrature
            .validate()
            .map_err(|e| invalid("$.quadrature", e.to_string()))?;
        if let Some(f) = &self.force {
            if f.curves.is_empty() {
                return Err(invalid("$.force.curves", "at least one curve is required"));
            }
            for (i, c) in f.curves.iter().enumerate() {
                self.stack_ref(&c.sphere, &format!("$.force.curves[{i}].sphere"))?;
                self.stack_ref(&c.plate, &format!("$.force.curves[{i}].plate"))?;
                if f.curves[..i].iter().any(|o| o.label == c.label) {
                    return Err(invalid(
                        format!("$.force.curves[{i}].label"),
                        format!("duplicate curve label {:?}", c.label),
                    ));
                }
            }
        }
        if let Some(k) = &self.kk {
            self.material_ref(&k.material, "$.kk.material")?;
        }
        if let Some(s) = &self.synth {
            if let ForceLawSpec::Lifshitz { curve } = &s.force_law {
                let known = self
                    .force
                    .as_ref()
                    .is_some_and(|f| f.curves.iter().any(|c| &c.label == curve));
                if !known {
                    return Err(invalid(
                        "$.synth.force_law.curve",
                        format!("no curve labelled {curve:?} in $.force.curves"),
                    ));
                }
            }
        }
        Ok(())
    }

    fn material_ref(&self, name: &str, path: &str) -> Result<()> {
        if self.materials.contains_key(name) {
            Ok(())
        } else {
            Err(invalid(path, format!("unknown material {name:?}")))
        }
    }

    fn stack_ref(&self, name: &str, path: &str) -> Result<()> {
        if self.stacks.contains_key(name) {
            Ok(())
        } else {
            Err(invalid(path, format!("unknown stack {name:?}")))
        }
    }

    pub fn material(&self, name: &str) -> Result<DielectricModel<f64>> {
        self.material_at(name, &mut Vec::new())
    }

    fn material_at(&self, name: &str, seen: &mut Vec<String>) -> Result<DielectricModel<f64>> {
        let path = format!("$.materials.{name}");
        if seen.iter().any(|s| s == name) {
            return Err(invalid(path, "material refers to itself"));
        }
        let spec = self
            .materials
            .get(name)
            .ok_or_else(|| invalid(&path, format!("unknown material {name:?}")))?;
        let core = |e: casimir_core::Error| invalid(&path, e.to_string());
        Ok(match spec {
            MaterialSpec::Vacuum => DielectricModel::Vacuum,
            MaterialSpec::Constant { eps } => DielectricModel::constant(*eps).map_err(core)?,
            MaterialSpec::Drude {
                omega_p_rad_s,
                gamma_rad_s,
            } => DielectricModel::drude(*omega_p_rad_s, *gamma_rad_s).map_err(core)?,
            MaterialSpec::Oscillators { oscillators } => {
                let list = oscillators
                    .iter()
                    .enumerate()
                    .map(|(i, o)| {
                        Oscillator::new(o.strength, o.omega_0_rad_s, o.gamma_rad_s)
                            .map_err(|e| invalid(format!("{path}.oscillators[{i}]"), e.to_string()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                DielectricModel::Oscillators(OscillatorParams::new(list).map_err(core)?)
            }
            MaterialSpec::Table {
                file,
                low_tail,
                high_tail,
            } => {
                let full = self.resolve(file);
                let f = File::open(&full).map_err(|e| {
                    invalid(format!("{path}.file"), format!("{}: {e}", full.display()))
                })?;
                let ext = match (low_tail, high_tail) {
                    (None, None) => None,
                    _ => Some(Extrapolation {
                        low: low_tail.unwrap_or(Tail::Truncate),
                        high: high_tail.unwrap_or(Tail::Truncate),
                    }),
                };
                let table = read_optical_table(BufReader::new(f), ext).map_err(|e| {
                    invalid(format!("{path}.file"), format!("{}: {e}", full.display()))
                })?;
                DielectricModel::Tabulated(table)
            }
            MaterialSpec::Sum { components } => {
                seen.push(name.to_string());
                let parts = components
                    .iter()
                    .map(|c| self.material_at(c, seen))
                    .collect::<Result<Vec<_>>>()?;
                seen.pop();
                DielectricModel::Sum(parts)
            }
        })
    }

    pub fn stack(&self, name: &str) -> Result<LayerStack<f64>> {
        let path = format!("$.stacks.{name}");
        let spec = self
            .stacks
            .get(name)
            .ok_or_else(|| invalid(&path, format!("unknown stack {name:?}")))?;
        let films = spec
            .films
            .iter()
            .enumerate()
            .map(|(i, f)| {
                Layer::new(self.material(&f.material)?, f.thickness_m)
                    .map_err(|e| invalid(format!("{path}.films[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        LayerStack::new(self.material(&spec.substrate)?, films)
            .map_err(|e| invalid(path, e.to_string()))
    }

    pub fn gap(&self) -> Result<DielectricModel<f64>> {
        match &self.gap {
            Some(g) => self.material(g),
            None => Ok(DielectricModel::Vacuum),
        }
    }

    pub fn force_section(&self) -> Result<&ForceSection> {
        self.force
            .as_ref()
            .ok_or_else(|| invalid("$.force", "section is required for this command"))
    }
}

impl Separations {
    /// Expands to an ascending list of positive values.
    pub fn values(&self, path: &str) -> Result<Vec<f64>> {
        let v = match self {
            Separations::List(v) => v.clone(),
            Separations::Grid(g) => {
                if !(g.min > 0.0 && g.max > g.min) || g.points < 2 {
                    return Err(invalid(
                        path,
                        "grid needs 0 < min < max and at least 2 points",
                    ));
                }
                let n = g.points - 1;
                (0..=n)
                    .map(|i| {
                        let t = i as f64 / n as f64;
                        match (i, g.spacing) {
                            (0, _) => g.min,
                            _ if i == n => g.max,
                            (_, Spacing::Log) => g.min * (g.max / g.min).powf(t),
                            (_, Spacing::Linear) => g.min + t * (g.max - g.min),
                        }
                    })
                    .collect()
            }
        };
        if v.is_empty() {
            return Err(invalid(path, "no values given"));
        }
        if let Some(i) = v.iter().position(|x| !(*x > 0.0) || !x.is_finite()) {
            return Err(invalid(format!("{path}[{i}]"), "values must be positive"));
        }
        if let Some(i) = (1..v.len()).find(|&i| v[i] <= v[i - 1]) {
            return Err(invalid(
                format!("{path}[{i}]"),
                "values must be strictly increasing",
            ));
        }
        Ok(v)
    }
}
