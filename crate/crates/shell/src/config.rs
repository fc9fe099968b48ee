//! TOML run configuration and its resolution into core types.
//!
//! Resolution fills every default and every derived value (grid size,
//! Galerkin truncation, volume and area targets taken from the initial
//! phase), so the manifest written next to a run is itself a complete
//! config that replays it.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vesicle_core::dynamics::{evaluate, presets, Model, Scheme, StepperConfig, SystemState};
use vesicle_core::{AlphaParams, Domain, DomainSpec, EnergyParams, NoiseSpec};

use crate::error::{io, Result, ShellError};
use crate::snapshot;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainSection,
    #[serde(default)]
    pub alpha: AlphaParams,
    #[serde(default)]
    pub energy: EnergySection,
    #[serde(default)]
    pub noise: NoiseSection,
    pub stepper: StepperSection,
    #[serde(default)]
    pub initial: InitialCondition,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub ensemble: EnsembleSection,
    /// Written into manifests; ignored on load.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    /// Modes per axis, N.
    pub modes: usize,
    /// Collocation points per axis, M; defaults to 8N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub collocation: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    #[serde(default = "one")]
    pub m1: f64,
    #[serde(default = "one")]
    pub m2: f64,
    /// Target volume; omitted means the volume of the initial phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    /// Target area; omitted means the area of the initial phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    #[serde(default = "one")]
    pub gamma: f64,
}

impl Default for EnergySection {
    fn default() -> Self {
        Self {
            m1: 1.0,
            m2: 1.0,
            a: None,
            b: None,
            gamma: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub zeta_a: f64,
    #[serde(default = "two")]
    pub p_a: f64,
    #[serde(default)]
    pub zeta_b: f64,
    #[serde(default = "two")]
    pub p_b: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub stream_id: u64,
    #[serde(default)]
    pub override_hypothesis: bool,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            zeta_a: 0.0,
            p_a: 2.0,
            zeta_b: 0.0,
            p_b: 2.0,
            seed: 0,
            stream_id: 0,
            override_hypothesis: false,
        }
    }
}

impl NoiseSection {
    pub fn spec(&self) -> NoiseSpec {
        NoiseSpec {
            zeta_a: self.zeta_a,
            p_a: self.p_a,
            zeta_b: self.zeta_b,
            p_b: self.p_b,
            seed: self.seed,
            stream_id: self.stream_id,
            override_hypothesis: self.override_hypothesis,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepperSection {
    #[serde(default = "imex")]
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    /// Active modes per axis; defaults to N.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub galerkin_n: Option<usize>,
    /// Blow-up guard on F.
    #[serde(default = "f_max")]
    pub f_max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Equilibrium,
    CircleVesicle {
        #[serde(default = "centre")]
        center: [f64; 2],
        #[serde(default = "radius")]
        radius: f64,
        /// Interface width proxy.
        #[serde(default = "width")]
        width: f64,
    },
    Random {
        seed: u64,
        #[serde(default = "amplitude")]
        amplitude: f64,
        #[serde(default = "decay")]
        decay: f64,
    },
    FromSnapshot {
        path: PathBuf,
    },
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::CircleVesicle {
            center: centre(),
            radius: radius(),
            width: width(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "out_dir")]
    pub dir: PathBuf,
    /// Steps per ledger row.
    #[serde(default = "one_u64")]
    pub ledger_every: u64,
    /// Steps per snapshot; 0 keeps only the initial and final states.
    #[serde(default)]
    pub snapshot_every: u64,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: out_dir(),
            ledger_every: 1,
            snapshot_every: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    #[serde(default = "trajectories")]
    pub trajectories: usize,
    /// Moment order k of `E[F^k]`.
    #[serde(default = "two_u32")]
    pub moment: u32,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        Self {
            trajectories: trajectories(),
            moment: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub code_version: String,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_u64() -> u64 {
    1
}
fn two_u32() -> u32 {
    2
}
fn imex() -> Scheme {
    Scheme::ImexEm
}
fn f_max() -> f64 {
    1e12
}
fn centre() -> [f64; 2] {
    [PI / 2.0, PI / 2.0]
}
fn radius() -> f64 {
    PI / 4.0
}
fn width() -> f64 {
    0.3
}
fn amplitude() -> f64 {
    0.1
}
fn decay() -> f64 {
    1.5
}
fn out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn trajectories() -> usize {
    32
}

/// Everything a run needs, validated.
#[derive(Clone, Debug)]
pub struct Resolved {
    /// The fully explicit config; serialized, it replays this run.
    pub config: RunConfig,
    pub model: Model,
    pub initial: SystemState,
    pub stepper: StepperConfig,
    pub noise: NoiseSpec,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| ShellError::Config(e.to_string()))
    }

    /// Reads a config; relative snapshot paths are taken relative to the
    /// file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ShellError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let InitialCondition::FromSnapshot { path: snap } = &mut cfg.initial {
            if snap.is_relative() {
                if let Some(dir) = path.parent() {
                    *snap = dir.join(&*snap);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| ShellError::Config(e.to_string()))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let n = self.domain.modes;
        let spec = DomainSpec {
            modes_per_axis: n,
            collocation_per_axis: self.domain.collocation.unwrap_or(8 * n),
        };
        let domain = Domain::new(spec)?;
        self.alpha.validate()?;
        let initial = self.initial_state(&domain)?;

        // provisional targets, replaced by those of the initial phase
        let mut energy = EnergyParams {
            m1: self.energy.m1,
            m2: self.energy.m2,
            a: self.energy.a.unwrap_or(0.0),
            b: self.energy.b.unwrap_or(0.0),
            gamma: self.energy.gamma,
        };
        let model = Model::new(domain.clone(), self.alpha, energy)?;
        let mask = model.mask(self.stepper.galerkin_n.unwrap_or(n).clamp(1, n));
        let e0 = evaluate(&model, &initial.clone().masked(&mask), &mask)?.energy;
        energy.a = self.energy.a.unwrap_or(e0.a_phi);
        energy.b = self.energy.b.unwrap_or(e0.b_phi);
        let model = Model::new(domain.clone(), self.alpha, energy)?;

        let stepper = StepperConfig {
            scheme: self.stepper.scheme,
            dt: self.stepper.dt,
            t_final: self.stepper.t_final,
            galerkin_n: self.stepper.galerkin_n.unwrap_or(n),
            f_max: self.stepper.f_max,
        };
        stepper.validate(&model)?;
        let noise = self.noise.spec();
        noise.validate()?;
        if self.output.ledger_every == 0 {
            return Err(ShellError::Config("output.ledger_every must be >= 1".into()));
        }

        let mut config = self.clone();
        config.domain.collocation = Some(spec.collocation_per_axis);
        config.energy.a = Some(energy.a);
        config.energy.b = Some(energy.b);
        config.stepper.galerkin_n = Some(stepper.galerkin_n);
        if let InitialCondition::FromSnapshot { path } = &mut config.initial {
            if let Ok(abs) = path.canonicalize() {
                *path = abs;
            }
        }
        Ok(Resolved {
            config,
            model,
            initial,
            stepper,
            noise,
        })
    }

    fn initial_state(&self, domain: &Domain) -> Result<SystemState> {
        Ok(match &self.initial {
            InitialCondition::Equilibrium => presets::equilibrium(domain),
            InitialCondition::CircleVesicle {
                center,
                radius,
                width,
            } => {
                if !(*radius > 0.0 && *width > 0.0) {
                    return Err(ShellError::Config("radius and width must be > 0".into()));
                }
                presets::circle_vesicle(domain, (center[0], center[1]), *radius, *width)?
            }
            InitialCondition::Random {
                seed,
                amplitude,
                decay,
            } => presets::random(domain, *seed, *amplitude, *decay),
            InitialCondition::FromSnapshot { path } => {
                let s = snapshot::read(path)?;
                snapshot::embed(&s, domain.n()).map_err(|reason| ShellError::Snapshot {
                    path: path.clone(),
                    reason,
                })?
            }
        })
    }
}

pub fn write_manifest(resolved: &Resolved, dir: &Path, command: &str) -> Result<()> {
    let mut m = resolved.config.clone();
    m.provenance = Some(Provenance {
        command: command.to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        seed: resolved.noise.seed,
    });
    let path = dir.join("manifest.toml");
    std::fs::write(&path, m.to_toml()?).map_err(io(path))
}
