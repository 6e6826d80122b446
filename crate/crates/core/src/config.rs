//! Plain-text configuration files.
//!
//! Every file is line oriented. `#` starts a comment, blank lines are
//! ignored, and the first meaningful line is a header `<kind> <version>`
//! (e.g. `chain 1` or `scenario 1`). Every other line is a key followed by
//! whitespace-separated values; keys may repeat where noted.
//!
//! Chain files (`chain 1`) describe a 7-DoF arm:
//!
//! ```text
//! chain 1
//! base  xyz <x y z> rpy <r p y>
//! tool  xyz <x y z> rpy <r p y>
//! joint axis <x y z> xyz <x y z> rpy <r p y> qmin <v> qmax <v> qdmax <v>   # exactly 7
//! ```
//!
//! Scenario files (`scenario 1`) override the built-in defaults field by
//! field; see [`Scenario::apply_kv`] for the accepted keys. Unknown keys are
//! an error so typos never pass silently.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector2, Vector3};
use thiserror::Error;

use crate::hit_optimizer::{HitMode, PipelineConfig};
use crate::kinematics::{Joint, JointVec, KinematicChain, KinematicsError};
use crate::puck_dynamics::SimParams;
use crate::puck_tracker::FilterParams;
use crate::sysid::BoConfig;
use crate::table::{TableGeometry, TableError};
use crate::tactics::Thresholds;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing required key `{0}`")]
    MissingKey(String),
    #[error("expected a `{expected}` file, found `{found}`")]
    WrongKind { expected: String, found: String },
    #[error("unsupported `{kind}` version {version}")]
    UnsupportedVersion { kind: String, version: u32 },
    #[error("chain: {0}")]
    Chain(#[from] KinematicsError),
    #[error("table: {0}")]
    Table(#[from] TableError),
    #[error("{path}: {err}")]
    Io { path: String, err: String },
}

fn perr(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Parse {
        line,
        msg: msg.into(),
    }
}

/// One parsed key-value line.
#[derive(Debug, Clone)]
pub struct KvLine {
    pub line: usize,
    pub key: String,
    pub values: Vec<String>,
}

/// A parsed key-value file with its header.
#[derive(Debug, Clone)]
pub struct KvFile {
    pub kind: String,
    pub version: u32,
    pub lines: Vec<KvLine>,
}

impl KvFile {
    pub fn parse(text: &str) -> Result<KvFile, ConfigError> {
        let mut header: Option<(String, u32, usize)> = None;
        let mut lines = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let content = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let mut tokens = content.split_whitespace().map(str::to_owned);
            let Some(first) = tokens.next() else { continue };
            let rest: Vec<String> = tokens.collect();
            if header.is_none() {
                if rest.len() != 1 {
                    return Err(perr(line_no, "header must be `<kind> <version>`"));
                }
                let version: u32 = rest[0]
                    .parse()
                    .map_err(|_| perr(line_no, format!("bad version `{}`", rest[0])))?;
                header = Some((first, version, line_no));
            } else {
                lines.push(KvLine {
                    line: line_no,
                    key: first,
                    values: rest,
                });
            }
        }
        let (kind, version, _) = header.ok_or_else(|| perr(0, "empty file (missing header)"))?;
        Ok(KvFile {
            kind,
            version,
            lines,
        })
    }

    pub fn expect(&self, kind: &str, version: u32) -> Result<(), ConfigError> {
        if self.kind != kind {
            return Err(ConfigError::WrongKind {
                expected: kind.to_owned(),
                found: self.kind.clone(),
            });
        }
        if self.version != version {
            return Err(ConfigError::UnsupportedVersion {
                kind: kind.to_owned(),
                version: self.version,
            });
        }
        Ok(())
    }

    pub fn first(&self, key: &str) -> Option<&KvLine> {
        self.lines.iter().find(|l| l.key == key)
    }

    pub fn require(&self, key: &str) -> Result<&KvLine, ConfigError> {
        self.first(key)
            .ok_or_else(|| ConfigError::MissingKey(key.to_owned()))
    }

    pub fn all<'a>(&'a self, key: &'a str) -> impl Iterator<Item = &'a KvLine> {
        self.lines.iter().filter(move |l| l.key == key)
    }
}

/// Cursor over the value tokens of one line, with line-numbered errors.
struct Tokens<'a> {
    line: usize,
    values: &'a [String],
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(l: &'a KvLine) -> Tokens<'a> {
        Tokens {
            line: l.line,
            values: &l.values,
            pos: 0,
        }
    }

    fn next(&mut self) -> Result<&'a str, ConfigError> {
        let v = self
            .values
            .get(self.pos)
            .ok_or_else(|| perr(self.line, "unexpected end of line"))?;
        self.pos += 1;
        Ok(v)
    }

    fn label(&mut self, want: &str) -> Result<(), ConfigError> {
        let got = self.next()?;
        if got != want {
            return Err(perr(self.line, format!("expected `{want}`, got `{got}`")));
        }
        Ok(())
    }

    fn f64(&mut self) -> Result<f64, ConfigError> {
        let tok = self.next()?;
        tok.parse()
            .map_err(|_| perr(self.line, format!("bad number `{tok}`")))
    }

    fn vec3(&mut self) -> Result<Vector3<f64>, ConfigError> {
        Ok(Vector3::new(self.f64()?, self.f64()?, self.f64()?))
    }

    fn finish(&self) -> Result<(), ConfigError> {
        if self.pos != self.values.len() {
            return Err(perr(
                self.line,
                format!("unexpected trailing token `{}`", self.values[self.pos]),
            ));
        }
        Ok(())
    }
}

fn isometry(xyz: Vector3<f64>, rpy: Vector3<f64>) -> Isometry3<f64> {
    Isometry3::from_parts(
        Translation3::from(xyz),
        UnitQuaternion::from_euler_angles(rpy.x, rpy.y, rpy.z),
    )
}

fn pose_line(l: &KvLine) -> Result<Isometry3<f64>, ConfigError> {
    let mut t = Tokens::new(l);
    t.label("xyz")?;
    let xyz = t.vec3()?;
    t.label("rpy")?;
    let rpy = t.vec3()?;
    t.finish()?;
    Ok(isometry(xyz, rpy))
}

/// Parse a `chain 1` file.
pub fn parse_chain(text: &str) -> Result<KinematicChain, ConfigError> {
    let kv = KvFile::parse(text)?;
    kv.expect("chain", 1)?;
    for l in &kv.lines {
        if !matches!(l.key.as_str(), "base" | "tool" | "joint") {
            return Err(perr(l.line, format!("unknown chain key `{}`", l.key)));
        }
    }
    let base = pose_line(kv.require("base")?)?;
    let tool = pose_line(kv.require("tool")?)?;

    let mut joints = Vec::new();
    let mut q_min = JointVec::zeros();
    let mut q_max = JointVec::zeros();
    let mut qd_max = JointVec::zeros();
    for l in kv.all("joint") {
        let i = joints.len();
        if i >= 7 {
            return Err(perr(l.line, "more than 7 joint lines"));
        }
        let mut t = Tokens::new(l);
        t.label("axis")?;
        let axis = t.vec3()?;
        t.label("xyz")?;
        let xyz = t.vec3()?;
        t.label("rpy")?;
        let rpy = t.vec3()?;
        t.label("qmin")?;
        q_min[i] = t.f64()?;
        t.label("qmax")?;
        q_max[i] = t.f64()?;
        t.label("qdmax")?;
        qd_max[i] = t.f64()?;
        t.finish()?;
        joints.push(Joint::new(isometry(xyz, rpy), axis)?);
    }
    let joints: [Joint; 7] = joints
        .try_into()
        .map_err(|v: Vec<Joint>| ConfigError::MissingKey(format!("joint (found {}, need 7)", v.len())))?;
    Ok(KinematicChain::new(base, tool, joints, q_min, q_max, qd_max)?)
}

/// Built-in chain file: a 7-DoF arm with public data-sheet limits, mounted
/// behind the home rim with a 515 mm hitting rod on a 45 mm flange.
pub const DEFAULT_CHAIN_TEXT: &str = include_str!("../resources/default.chain");

/// The built-in chain, home-mounted (world frame = table frame).
pub fn default_chain() -> KinematicChain {
    parse_chain(DEFAULT_CHAIN_TEXT).expect("built-in chain file must parse")
}

/// Uniform benchmark grid over the agent's reachable half.
#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    /// Grid points in deterministic row-major order (x outer, y inner).
    pub fn points(&self) -> Vec<Vector2<f64>> {
        let mut pts = Vec::with_capacity(self.nx * self.ny);
        for ix in 0..self.nx {
            let fx = if self.nx > 1 {
                ix as f64 / (self.nx - 1) as f64
            } else {
                0.5
            };
            for iy in 0..self.ny {
                let fy = if self.ny > 1 {
                    iy as f64 / (self.ny - 1) as f64
                } else {
                    0.5
                };
                pts.push(Vector2::new(
                    self.x_min + fx * (self.x_max - self.x_min),
                    self.y_min + fy * (self.y_max - self.y_min),
                ));
            }
        }
        pts
    }
}

/// Everything a harness run needs, with built-in defaults and file
/// overrides.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub chain: KinematicChain,
    pub table: TableGeometry,
    pub pipeline: PipelineConfig,
    pub sim: SimParams,
    /// Simulator step (s).
    pub sim_dt: f64,
    /// Camera measurement period (s).
    pub meas_dt: f64,
    pub filter: FilterParams,
    pub thresholds: Thresholds,
    pub grid: GridSpec,
    /// Rest configuration used as the trajectory start.
    pub home_q: JointVec,
    pub sysid: BoConfig,
    /// Self-play game length (s).
    pub selfplay_duration: f64,
    /// Hit mode used by self-play agents.
    pub selfplay_mode: HitMode,
}

impl Default for Scenario {
    fn default() -> Scenario {
        Scenario {
            chain: default_chain(),
            table: TableGeometry::default(),
            pipeline: PipelineConfig::default(),
            sim: SimParams::default(),
            sim_dt: 0.01,
            meas_dt: 1.0 / 120.0,
            filter: FilterParams::default(),
            thresholds: Thresholds::default(),
            grid: GridSpec {
                x_min: -0.88,
                x_max: -0.45,
                y_min: -0.42,
                y_max: 0.42,
                nx: 15,
                ny: 12,
            },
            home_q: JointVec::from_row_slice(&[
                0.0,
                0.4899573262537421,
                0.0,
                -1.4249852859303002,
                0.0,
                1.2264386607271161,
                0.0,
            ]),
            sysid: BoConfig::default(),
            selfplay_duration: 60.0,
            selfplay_mode: HitMode::NlAqp,
        }
    }
}

impl Scenario {
    /// Parse a `scenario 1` file on top of the defaults. `dir` resolves any
    /// relative `chain` path.
    pub fn parse(text: &str, dir: Option<&Path>) -> Result<Scenario, ConfigError> {
        let kv = KvFile::parse(text)?;
        kv.expect("scenario", 1)?;
        let mut s = Scenario::default();
        s.apply_kv(&kv, dir)?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Scenario, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            err: e.to_string(),
        })?;
        Scenario::parse(&text, path.parent())
    }

    /// Apply overrides from a parsed file. Each key is optional; unknown
    /// keys are errors.
    pub fn apply_kv(&mut self, kv: &KvFile, dir: Option<&Path>) -> Result<(), ConfigError> {
        let mut seen = BTreeSet::new();
        for l in &kv.lines {
            if !seen.insert(l.key.clone()) {
                return Err(perr(l.line, format!("duplicate key `{}`", l.key)));
            }
            let mut t = Tokens::new(l);
            match l.key.as_str() {
                "chain" => {
                    let v = t.next()?;
                    if v == "builtin" {
                        self.chain = default_chain();
                    } else {
                        let p = match dir {
                            Some(d) => d.join(v),
                            None => Path::new(v).to_path_buf(),
                        };
                        let text = std::fs::read_to_string(&p).map_err(|e| ConfigError::Io {
                            path: p.display().to_string(),
                            err: e.to_string(),
                        })?;
                        self.chain = parse_chain(&text)?;
                    }
                }
                "table.length" => self.table.length = t.f64()?,
                "table.width" => self.table.width = t.f64()?,
                "table.goal_width" => self.table.goal_width = t.f64()?,
                "table.puck_radius" => self.table.puck_radius = t.f64()?,
                "table.mallet_radius" => self.table.mallet_radius = t.f64()?,
                "plan.margin_extra" => self.pipeline.margin_extra = t.f64()?,
                "tracker.weights" => {
                    let mut w = JointVec::zeros();
                    for i in 0..7 {
                        w[i] = t.f64()?;
                    }
                    self.pipeline.tracker.weights = w;
                }
                "tracker.dt" => self.pipeline.tracker.dt = t.f64()?,
                "tracker.anchor_scale" => self.pipeline.tracker.anchor_scale = t.f64()?,
                "qp.hit_speed" => self.pipeline.qp_hit_speed = t.f64()?,
                "retry.scale" => self.pipeline.retry_scale = t.f64()?,
                "retry.max_trials" => {
                    self.pipeline.max_trials = t.f64()? as usize;
                }
                "sim.dt" => self.sim_dt = t.f64()?,
                "sim.e_long" => self.sim.e_long = t.f64()?,
                "sim.e_short" => self.sim.e_short = t.f64()?,
                "sim.mu_rim" => self.sim.mu_rim = t.f64()?,
                "sim.mu_table" => self.sim.mu_table = t.f64()?,
                "sim.k_spin" => self.sim.k_spin = t.f64()?,
                "sim.d_lin" => self.sim.d_lin = t.f64()?,
                "sim.d_ang" => self.sim.d_ang = t.f64()?,
                "meas.dt" => self.meas_dt = t.f64()?,
                "filter.damping" => self.filter.damping = t.f64()?,
                "filter.friction" => self.filter.friction = t.f64()?,
                "filter.q_pos" => self.filter.q_pos = t.f64()?,
                "filter.q_vel" => self.filter.q_vel = t.f64()?,
                "filter.q_phi" => self.filter.q_phi = t.f64()?,
                "filter.q_phidot" => self.filter.q_phidot = t.f64()?,
                "filter.r_pos" => self.filter.r_pos = t.f64()?,
                "filter.r_phi" => self.filter.r_phi = t.f64()?,
                "tactics.v_smash_max" => self.thresholds.v_smash_max = t.f64()?,
                "tactics.v_repel_min" => self.thresholds.v_repel_min = t.f64()?,
                "tactics.v_still" => self.thresholds.v_still = t.f64()?,
                "tactics.d_border" => self.thresholds.d_border = t.f64()?,
                "tactics.horizon" => self.thresholds.horizon = t.f64()?,
                "tactics.corridor_margin" => self.thresholds.corridor_margin = t.f64()?,
                "grid.x" => {
                    self.grid.x_min = t.f64()?;
                    self.grid.x_max = t.f64()?;
                }
                "grid.y" => {
                    self.grid.y_min = t.f64()?;
                    self.grid.y_max = t.f64()?;
                }
                "grid.nx" => self.grid.nx = t.f64()? as usize,
                "grid.ny" => self.grid.ny = t.f64()? as usize,
                "home.q" => {
                    let mut q = JointVec::zeros();
                    for i in 0..7 {
                        q[i] = t.f64()?;
                    }
                    self.home_q = q;
                }
                "sysid.iterations" => self.sysid.iterations = t.f64()? as usize,
                "sysid.batch" => self.sysid.batch = t.f64()? as usize,
                "sysid.beta" => self.sysid.beta = t.f64()?,
                "sysid.mc_samples" => self.sysid.mc_samples = t.f64()? as usize,
                "sysid.population" => self.sysid.population = t.f64()? as usize,
                "sysid.generations" => self.sysid.generations = t.f64()? as usize,
                "selfplay.duration" => self.selfplay_duration = t.f64()?,
                "selfplay.mode" => {
                    self.selfplay_mode = match t.next()? {
                        "qp" => HitMode::Qp,
                        "nl-aqp" => HitMode::NlAqp,
                        "lp-nl-aqp" => HitMode::LpNlAqp,
                        other => {
                            return Err(perr(
                                l.line,
                                format!("unknown mode `{other}` (qp | nl-aqp | lp-nl-aqp)"),
                            ))
                        }
                    };
                }
                other => return Err(perr(l.line, format!("unknown scenario key `{other}`"))),
            }
            t.finish()?;
        }
        // Re-validate the table after the overrides.
        self.table = TableGeometry::new(
            self.table.length,
            self.table.width,
            self.table.goal_width,
            self.table.puck_radius,
            self.table.mallet_radius,
        )?;
        Ok(())
    }

    /// Planner boundary margin: mallet radius plus the configured extra.
    pub fn plan_margin(&self) -> f64 {
        self.table.mallet_radius + self.pipeline.margin_extra
    }
}
