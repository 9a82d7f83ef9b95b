//! Experiment runner: initial guesses, contact classification, parameter
//! presets, sweeps over `N`, energy tables and file output.
//!
//! Cells of a sweep (one `N` and one guess each) are independent and run on
//! the rayon pool. Records come back in configured order regardless of which
//! cell finishes first.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{
    bending_auxiliary, bending_continuous, bending_discrete, DiscreteEnergy, EnergyBreakdown, PhysicalParams,
    QuarticBump, RegularizationParams, SmoothCurve,
};
use crate::error::{Error, Result};
use crate::grid::{interpolate, PeriodicGrid, PolygonalCurve};
use crate::obstacles::Obstacle;
use crate::optimizer::{minimize_bfgs, MinimizeOptions};

/// Marker for a Type that was not found.
pub const MISSING: &str = "×";

/// How the adhesion range `delta` follows the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaRule {
    /// `delta = h`
    Mesh,
    Fixed(f64),
}

impl DeltaRule {
    pub fn delta(&self, h: f64) -> f64 {
        match *self {
            DeltaRule::Mesh => h,
            DeltaRule::Fixed(d) => d,
        }
    }
}

impl FromStr for DeltaRule {
    type Err = Error;

    /// `h` or a number.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "h" | "mesh" => Ok(DeltaRule::Mesh),
            t => t
                .parse()
                .map(DeltaRule::Fixed)
                .map_err(|_| Error::InvalidParameter(format!("bad delta rule `{s}`"))),
        }
    }
}

/// How the penalty parameter `rho` follows the mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoRule {
    /// `rho = h / divisor`
    MeshOver(f64),
    Fixed(f64),
}

impl RhoRule {
    pub fn rho(&self, h: f64) -> f64 {
        match *self {
            RhoRule::MeshOver(d) => h / d,
            RhoRule::Fixed(r) => r,
        }
    }
}

impl FromStr for RhoRule {
    type Err = Error;

    /// `h/<divisor>` or a number.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::InvalidParameter(format!("bad rho rule `{s}`"));
        if let Some(d) = t.strip_prefix("h/") {
            return d.trim().parse().map(RhoRule::MeshOver).map_err(|_| bad());
        }
        t.parse().map(RhoRule::Fixed).map_err(|_| bad())
    }
}

/// Starting curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialGuess {
    /// `v = offset`
    Constant { offset: f64 },
    /// `v = max_j psi_j + clearance * delta`
    ObstacleTop { clearance: f64 },
    /// `v = psi` at the nodes.
    FullAdhesion,
    /// Full adhesion except `k` arcs, each rising `height` above one crest and
    /// spanning trough to trough. Crests are picked evenly among the obstacle's
    /// local maxima.
    KBump { k: usize, height: f64 },
    /// Rests on the crests at `max psi` and adheres inside the troughs whose
    /// bit is set in `mask`. Trough `t` lies between crest `t` and crest `t + 1`.
    TroughDips { mask: u64 },
    /// `max(psi, tent)` for a tent of the given height centred at `x = 1/2`.
    Tent { half_width: f64, height: f64 },
    /// `v = psi` except the node nearest `x = 1/2`, which is lifted to `height`.
    CenterSpike { height: f64 },
    /// `v_j = psi_j + amplitude * u_j` with `u_j` uniform on `[0, 1)`.
    Random { seed: u64, amplitude: f64 },
}

impl FromStr for InitialGuess {
    type Err = Error;

    /// `constant:<offset>`, `top:<clearance>`, `full`, `bump:<k>:<height>`,
    /// `tent:<half_width>:<height>`, `spike:<height>` or `random:<seed>:<amplitude>`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let bad = || Error::InvalidParameter(format!("unknown initial guess `{s}`"));
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let int = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
        match parts.as_slice() {
            ["constant", c] => Ok(Self::Constant { offset: num(c)? }),
            ["top"] => Ok(Self::ObstacleTop { clearance: 0.0 }),
            ["top", c] => Ok(Self::ObstacleTop { clearance: num(c)? }),
            ["full"] => Ok(Self::FullAdhesion),
            ["bump", k, a] => Ok(Self::KBump {
                k: int(k)? as usize,
                height: num(a)?,
            }),
            ["tent", w, a] => Ok(Self::Tent {
                half_width: num(w)?,
                height: num(a)?,
            }),
            ["dips", bits] => Ok(Self::TroughDips {
                mask: parse_mask(bits).ok_or_else(bad)?,
            }),
            ["spike", a] => Ok(Self::CenterSpike { height: num(a)? }),
            ["random", seed, a] => Ok(Self::Random {
                seed: int(seed)?,
                amplitude: num(a)?,
            }),
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for InitialGuess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Constant { offset } => write!(f, "constant:{offset}"),
            Self::ObstacleTop { clearance } => write!(f, "top:{clearance}"),
            Self::FullAdhesion => write!(f, "full"),
            Self::KBump { k, height } => write!(f, "bump:{k}:{height}"),
            Self::TroughDips { mask } => {
                let bits: String = (0..(64 - mask.leading_zeros()).max(1))
                    .map(|t| if mask >> t & 1 == 1 { '1' } else { '0' })
                    .collect();
                write!(f, "dips:{bits}")
            }
            Self::Tent { half_width, height } => write!(f, "tent:{half_width}:{height}"),
            Self::CenterSpike { height } => write!(f, "spike:{height}"),
            Self::Random { seed, amplitude } => write!(f, "random:{seed}:{amplitude}"),
        }
    }
}

/// `1` and `0` characters, trough 0 first.
fn parse_mask(bits: &str) -> Option<u64> {
    let bits = bits.trim();
    if bits.is_empty() || bits.len() > 64 {
        return None;
    }
    bits.chars().enumerate().try_fold(0u64, |m, (t, c)| match c {
        '1' => Some(m | 1 << t),
        '0' => Some(m),
        _ => None,
    })
}

/// Indices of strict periodic local maxima of `psi` (plateaus count once, at their left end).
fn crests(psi: &[f64]) -> Vec<usize> {
    let n = psi.len();
    (0..n)
        .filter(|&j| {
            let prev = psi[(j + n - 1) % n];
            let mut k = (j + 1) % n;
            while psi[k] == psi[j] && k != j {
                k = (k + 1) % n;
            }
            psi[j] > prev && psi[j] > psi[k]
        })
        .collect()
}

/// Walks from `from` in direction `step` while `psi` keeps decreasing.
fn trough_from(psi: &[f64], from: usize, step: isize) -> usize {
    let n = psi.len() as isize;
    let mut j = from as isize;
    for _ in 0..n {
        let next = (j + step).rem_euclid(n);
        if psi[next as usize] >= psi[j.rem_euclid(n) as usize] {
            break;
        }
        j += step;
    }
    j.rem_euclid(n) as usize
}

pub fn initial_guess(
    kind: &InitialGuess,
    grid: PeriodicGrid,
    obstacle: &Obstacle,
    reg: &RegularizationParams,
) -> Result<PolygonalCurve> {
    let n = grid.len();
    let psi: Vec<f64> = grid.nodes().map(|x| obstacle.value(x)).collect();
    let values = match *kind {
        InitialGuess::Constant { offset } => vec![offset; n],
        InitialGuess::ObstacleTop { clearance } => {
            let top = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            vec![top + clearance * reg.delta; n]
        }
        InitialGuess::FullAdhesion => psi,
        InitialGuess::KBump { k, height } => {
            let tops = crests(&psi);
            if k == 0 || k > tops.len() {
                return Err(Error::InvalidParameter(format!(
                    "asked for {k} raised arcs but the obstacle has {} crests",
                    tops.len()
                )));
            }
            let mut v = psi.clone();
            for i in 0..k {
                let c = tops[i * tops.len() / k];
                let left = trough_from(&psi, c, -1);
                let right = trough_from(&psi, c, 1);
                // window in unwrapped node offsets
                let a = -(((c + n - left) % n) as isize);
                let b = ((right + n - c) % n) as isize;
                let (base_l, base_r, peak) = (psi[left], psi[right], psi[c] + height);
                for off in a..=b {
                    let j = (c as isize + off).rem_euclid(n as isize) as usize;
                    let s = (off - a) as f64 / (b - a).max(1) as f64;
                    let base = base_l + (base_r - base_l) * s;
                    let arc = base + (peak - base) * (std::f64::consts::PI * s).sin();
                    v[j] = v[j].max(arc);
                }
            }
            v
        }
        InitialGuess::TroughDips { mask } => {
            let tops = crests(&psi);
            if tops.is_empty() || (tops.len() < 64 && mask >> tops.len() != 0) {
                return Err(Error::InvalidParameter(format!(
                    "dip mask {mask:#b} does not fit the obstacle's {} troughs",
                    tops.len()
                )));
            }
            let top = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut v: Vec<f64> = psi.iter().map(|p| p.max(top)).collect();
            for (t, &c) in tops.iter().enumerate().filter(|(t, _)| mask >> t & 1 == 1) {
                let next = tops[(t + 1) % tops.len()];
                let len = if next > c { next - c } else { next + n - c };
                for off in 0..=len {
                    let j = (c + off) % n;
                    v[j] = psi[j];
                }
            }
            v
        }
        InitialGuess::Tent { half_width, height } => {
            if half_width <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "tent half width must be positive, got {half_width}"
                )));
            }
            grid.nodes()
                .zip(&psi)
                .map(|(x, &p)| p.max(height * (1.0 - (x - 0.5).abs() / half_width).max(0.0)))
                .collect()
        }
        InitialGuess::CenterSpike { height } => {
            let mut v = psi;
            let c = n / 2;
            v[c] = v[c].max(height);
            v
        }
        InitialGuess::Random { seed, amplitude } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            psi.iter().map(|p| p + amplitude * rng.random::<f64>()).collect()
        }
    };
    PolygonalCurve::new(grid, values)
}

/// Contact set `{ j : |v_j - psi_j| < delta }` and its structure.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactClassification {
    pub adhering: Vec<usize>,
    /// Maximal runs of consecutive adhering nodes, counted periodically.
    pub runs: usize,
    /// Adhering nodes over all nodes.
    pub fraction: f64,
}

pub fn classify(curve: &PolygonalCurve, obstacle: &Obstacle, reg: &RegularizationParams) -> ContactClassification {
    let psi: Vec<f64> = curve.grid().nodes().map(|x| obstacle.value(x)).collect();
    classify_nodal(curve.values(), &psi, reg.delta)
}

/// [`classify`] against precomputed nodal obstacle values.
pub fn classify_nodal(v: &[f64], psi: &[f64], delta: f64) -> ContactClassification {
    let n = v.len();
    let touch: Vec<bool> = v.iter().zip(psi).map(|(v, p)| (v - p).abs() < delta).collect();
    let adhering: Vec<usize> = (0..n).filter(|&j| touch[j]).collect();
    let runs = if adhering.len() == n {
        1
    } else {
        (0..n).filter(|&j| touch[j] && !touch[(j + n - 1) % n]).count()
    };
    ContactClassification {
        fraction: adhering.len() as f64 / n as f64,
        adhering,
        runs,
    }
}

/// What a converged curve must look like to count as the intended Type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExpectedShape {
    pub min_fraction: f64,
    pub max_fraction: f64,
    pub runs: Option<usize>,
    pub min_lipschitz: f64,
    pub max_lipschitz: Option<f64>,
}

impl Default for ExpectedShape {
    fn default() -> Self {
        Self {
            min_fraction: 0.0,
            max_fraction: 1.0,
            runs: None,
            min_lipschitz: 0.0,
            max_lipschitz: None,
        }
    }
}

impl ExpectedShape {
    pub fn detached() -> Self {
        Self {
            max_fraction: 0.0,
            ..Self::default()
        }
    }

    pub fn full() -> Self {
        Self {
            min_fraction: 1.0,
            ..Self::default()
        }
    }

    pub fn matches(&self, c: &ContactClassification, lipschitz: f64) -> bool {
        c.fraction >= self.min_fraction
            && c.fraction <= self.max_fraction
            && self.runs.is_none_or(|r| r == c.runs)
            && lipschitz >= self.min_lipschitz
            && self.max_lipschitz.is_none_or(|m| lipschitz <= m)
    }
}

/// One labelled starting point of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuessSpec {
    /// Type label, e.g. `A`. Several guesses may share one label; the table
    /// keeps the least energy among those that land on the intended shape.
    pub label: String,
    pub guess: InitialGuess,
    #[serde(default)]
    pub expect: ExpectedShape,
}

impl GuessSpec {
    pub fn new(label: &str, guess: InitialGuess, expect: ExpectedShape) -> Self {
        Self {
            label: label.to_string(),
            guess,
            expect,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    /// Obstacle spec understood by [`Obstacle::from_name`].
    pub obstacle: String,
    pub params: PhysicalParams,
    pub delta_rule: DeltaRule,
    pub rho_rule: RhoRule,
    #[serde(rename = "N")]
    pub ns: Vec<usize>,
    pub guesses: Vec<GuessSpec>,
    #[serde(default)]
    pub options: MinimizeOptions,
}

pub const PRESETS: [&str; 5] = ["psi1-p1", "psi1-p2", "psi2-p1", "psi2-p2", "psi2-p3"];

/// Default mesh sizes of the presets.
pub const PRESET_NS: [usize; 3] = [100, 200, 400];

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self> {
        let (obstacle, params, divisor, guesses) = match name {
            "psi1-p1" => ("sin24", PhysicalParams::from_half_modulus(0.0005, 0.01, 1.0)?, 100.0, psi1_guesses()),
            "psi1-p2" => ("sin24", PhysicalParams::from_half_modulus(0.0003, 0.01, 2.0)?, 100.0, psi1_guesses()),
            "psi2-p1" => ("peak(eps=0.01)", PhysicalParams::from_half_modulus(0.1, 1.0, 1.0)?, 1000.0, psi2_guesses()),
            "psi2-p2" => ("peak(eps=0.01)", PhysicalParams::from_half_modulus(0.1, 1.0, 0.01)?, 1000.0, psi2_guesses()),
            "psi2-p3" => ("peak(eps=0.01)", PhysicalParams::from_half_modulus(0.001, 1.0, 5.0)?, 1000.0, psi2_guesses()),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset `{name}`, expected one of {}",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(Self {
            name: name.to_string(),
            obstacle: obstacle.to_string(),
            params,
            delta_rule: DeltaRule::Mesh,
            rho_rule: RhoRule::MeshOver(divisor),
            ns: PRESET_NS.to_vec(),
            guesses,
            options: MinimizeOptions::default(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c: Self = serde_json::from_str(&text)?;
        c.normalize()?;
        Ok(c)
    }

    /// Sorts and deduplicates `N`, then checks every field.
    pub fn normalize(&mut self) -> Result<()> {
        self.ns.sort_unstable();
        self.ns.dedup();
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns.is_empty() {
            return Err(Error::InvalidParameter("no mesh sizes given".into()));
        }
        if let Some(&n) = self.ns.iter().find(|&&n| n < 3) {
            return Err(Error::GridTooSmall(n));
        }
        if self.guesses.is_empty() {
            return Err(Error::InvalidParameter("no initial guesses given".into()));
        }
        self.params.validate()?;
        self.options.validate()?;
        let h = 1.0 / self.ns[0] as f64;
        RegularizationParams::new(self.delta_rule.delta(h), self.rho_rule.rho(h))?;
        Ok(())
    }
}

/// ψ₁: Type A rests on the crests and F adheres everywhere. B to E rest on
/// the crests but wrap some troughs: B every other trough, C a block of four
/// alternating troughs, D three evenly spaced troughs, E a single trough.
fn psi1_guesses() -> Vec<GuessSpec> {
    // each wrapped trough merges the contacts on its two crests into one run
    let resting = |wraps: usize| ExpectedShape {
        runs: Some(12 - wraps),
        max_fraction: 0.9,
        ..ExpectedShape::default()
    };
    let dips = |label: &str, mask: u64| {
        GuessSpec::new(label, InitialGuess::TroughDips { mask }, resting(mask.count_ones() as usize))
    };
    vec![
        GuessSpec::new("A", InitialGuess::ObstacleTop { clearance: 0.0 }, resting(0)),
        dips("B", 0b010101010101),
        dips("C", 0b1010101),
        dips("D", 0b100010001),
        dips("E", 0b1),
        GuessSpec::new("F", InitialGuess::FullAdhesion, ExpectedShape::full()),
    ]
}

/// ψ₂: A floats above the needle, B drapes over it with a skirt, C adheres
/// everywhere, D hugs the floor and leaves it in a near-vertical spike whose
/// slope grows like `N`.
fn psi2_guesses() -> Vec<GuessSpec> {
    vec![
        GuessSpec::new("A", InitialGuess::ObstacleTop { clearance: 10.0 }, ExpectedShape::detached()),
        GuessSpec::new(
            "B",
            InitialGuess::Tent {
                half_width: 0.2,
                height: 1.0 / 16.0,
            },
            ExpectedShape {
                min_fraction: 0.05,
                max_fraction: 1.0 - 1e-12,
                max_lipschitz: Some(SINGULAR_SLOPE),
                ..ExpectedShape::default()
            },
        ),
        GuessSpec::new(
            "C",
            InitialGuess::FullAdhesion,
            ExpectedShape {
                max_lipschitz: Some(SINGULAR_SLOPE),
                ..ExpectedShape::full()
            },
        ),
        GuessSpec::new(
            "D",
            InitialGuess::CenterSpike { height: 0.5 },
            ExpectedShape {
                min_fraction: f64::MIN_POSITIVE,
                min_lipschitz: SINGULAR_SLOPE,
                ..ExpectedShape::default()
            },
        ),
    ]
}

/// Slope separating smooth ψ₂ minimizers from the spiked ones at `N >= 100`.
const SINGULAR_SLOPE: f64 = 40.0;

/// Result of one `(N, guess)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(rename = "N")]
    pub n: usize,
    pub h: f64,
    pub delta: f64,
    pub rho: f64,
    pub label: String,
    pub guess: InitialGuess,
    pub energy: EnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    pub final_criterion: f64,
    #[serde(default)]
    pub diagnostic: Option<String>,
    pub runs: usize,
    pub fraction: f64,
    pub lipschitz: f64,
    pub sup_norm: f64,
    /// Converged onto the intended shape.
    pub matches: bool,
    /// Wall time in seconds; the only nondeterministic field.
    pub wall_seconds: f64,
    pub curve: PolygonalCurve,
    pub psi: Vec<f64>,
}

impl RunRecord {
    /// The label when the intended shape was reached, [`MISSING`] otherwise.
    pub fn type_label(&self) -> &str {
        if self.matches {
            &self.label
        } else {
            MISSING
        }
    }
}

/// Flat CSV view of a [`RunRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    #[serde(rename = "N")]
    pub n: usize,
    pub label: String,
    pub guess: String,
    #[serde(rename = "type")]
    pub type_label: String,
    pub bending: f64,
    pub tension: f64,
    pub adhesion: f64,
    pub penalty: f64,
    pub total: f64,
    pub iterations: usize,
    pub converged: bool,
    pub criterion: f64,
    pub runs: usize,
    pub fraction: f64,
    pub lipschitz: f64,
    pub sup_norm: f64,
    pub wall_seconds: f64,
}

pub const RUN_CSV_HEADER: [&str; 17] = [
    "N",
    "label",
    "guess",
    "type",
    "bending",
    "tension",
    "adhesion",
    "penalty",
    "total",
    "iterations",
    "converged",
    "criterion",
    "runs",
    "fraction",
    "lipschitz",
    "sup_norm",
    "wall_seconds",
];

impl From<&RunRecord> for RunRow {
    fn from(r: &RunRecord) -> Self {
        Self {
            n: r.n,
            label: r.label.clone(),
            guess: r.guess.to_string(),
            type_label: r.type_label().to_string(),
            bending: r.energy.bending,
            tension: r.energy.tension,
            adhesion: r.energy.adhesion,
            penalty: r.energy.penalty,
            total: r.energy.total,
            iterations: r.iterations,
            converged: r.converged,
            criterion: r.final_criterion,
            runs: r.runs,
            fraction: r.fraction,
            lipschitz: r.lipschitz,
            sup_norm: r.sup_norm,
            wall_seconds: r.wall_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
}

fn run_cell(config: &ExperimentConfig, obstacle: &Obstacle, n: usize, spec: &GuessSpec) -> Result<RunRecord> {
    let grid = PeriodicGrid::new(n)?;
    let h = grid.h();
    let reg = RegularizationParams::new(config.delta_rule.delta(h), config.rho_rule.rho(h))?;
    let energy = DiscreteEnergy::new(grid, obstacle, config.params, reg, Arc::new(QuarticBump));
    let start = initial_guess(&spec.guess, grid, obstacle, &reg)?;
    let clock = Instant::now();
    let result = minimize_bfgs(&start, &energy, &config.options)?;
    let wall_seconds = clock.elapsed().as_secs_f64();
    let class = classify_nodal(result.curve.values(), energy.psi(), reg.delta);
    let lipschitz = result.curve.lipschitz_seminorm();
    let sup_norm = result.curve.values().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(RunRecord {
        n,
        h,
        delta: reg.delta,
        rho: reg.rho,
        label: spec.label.clone(),
        guess: spec.guess,
        energy: result.breakdown,
        iterations: result.iterations,
        converged: result.converged,
        final_criterion: result.final_criterion,
        diagnostic: result.diagnostic,
        runs: class.runs,
        fraction: class.fraction,
        lipschitz,
        sup_norm,
        matches: result.converged && spec.expect.matches(&class, lipschitz),
        wall_seconds,
        psi: energy.psi().to_vec(),
        curve: result.curve,
    })
}

/// Minimizes every `(N, guess)` cell of `config`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentRecord> {
    let mut config = config.clone();
    config.normalize()?;
    let obstacle = Obstacle::from_name(&config.obstacle)?;
    let cells: Vec<(usize, &GuessSpec)> = config
        .ns
        .iter()
        .flat_map(|&n| config.guesses.iter().map(move |g| (n, g)))
        .collect();
    let runs = cells
        .par_iter()
        .map(|&(n, g)| run_cell(&config, &obstacle, n, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentRecord { config, runs })
}

/// Energies per Type (rows) and `N` (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTable {
    #[serde(rename = "N")]
    pub ns: Vec<usize>,
    pub labels: Vec<String>,
    /// `cells[label][n]`, `None` when the Type was not found.
    pub cells: Vec<Vec<Option<f64>>>,
    /// Label of the least energy per `N`.
    pub global: Vec<Option<String>>,
}

impl EnergyTable {
    pub fn get(&self, label: &str, n: usize) -> Option<f64> {
        let i = self.labels.iter().position(|l| l == label)?;
        let k = self.ns.iter().position(|&m| m == n)?;
        self.cells[i][k]
    }

    /// CSV with a `type` column, one column per `N` and a closing `global` row.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> std::result::Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["type".to_string()];
        header.extend(self.ns.iter().map(|n| format!("N={n}")));
        w.write_record(&header)?;
        for (label, row) in self.labels.iter().zip(&self.cells) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|c| c.map_or(MISSING.to_string(), |e| format!("{e:.7}"))));
            w.write_record(&rec)?;
        }
        let mut rec = vec!["global".to_string()];
        rec.extend(self.global.iter().map(|g| g.clone().unwrap_or_else(|| MISSING.to_string())));
        w.write_record(&rec)?;
        w.flush()?;
        Ok(())
    }
}

impl ExperimentRecord {
    pub fn all_converged(&self) -> bool {
        self.runs.iter().all(|r| r.converged)
    }

    pub fn table(&self) -> EnergyTable {
        let ns = self.config.ns.clone();
        let mut labels: Vec<String> = Vec::new();
        for g in &self.config.guesses {
            if !labels.contains(&g.label) {
                labels.push(g.label.clone());
            }
        }
        let cells: Vec<Vec<Option<f64>>> = labels
            .iter()
            .map(|l| {
                ns.iter()
                    .map(|&n| {
                        self.runs
                            .iter()
                            .filter(|r| r.n == n && &r.label == l && r.matches)
                            .map(|r| r.energy.total)
                            .min_by(f64::total_cmp)
                    })
                    .collect()
            })
            .collect();
        let global = (0..ns.len())
            .map(|k| {
                labels
                    .iter()
                    .zip(&cells)
                    .filter_map(|(l, row)| row[k].map(|e| (l, e)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(l, _)| l.clone())
            })
            .collect();
        EnergyTable {
            ns,
            labels,
            cells,
            global,
        }
    }

    /// `|v|_{W^{1,inf}}` of the best matching run of `label` per `N`.
    pub fn seminorms(&self, label: &str) -> Vec<(usize, Option<f64>)> {
        self.config
            .ns
            .iter()
            .map(|&n| {
                let best = self
                    .runs
                    .iter()
                    .filter(|r| r.n == n && r.label == label && r.matches)
                    .min_by(|a, b| a.energy.total.total_cmp(&b.energy.total));
                (n, best.map(|r| r.lipschitz))
            })
            .collect()
    }

    pub fn write_runs_csv<W: std::io::Write>(&self, writer: W) -> std::result::Result<(), csv::Error> {
        write_runs_csv(&self.runs, writer)
    }

    pub fn save_runs_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_runs_csv(file).map_err(|e| Error::csv(path, e))
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// One `x,v,psi` CSV per run, named `<label>_<index>_N<n>.csv`.
    pub fn dump_curves(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (i, r) in self.runs.iter().enumerate() {
            let path = dir.join(format!("{}_{}_N{}.csv", r.label, i, r.n));
            let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
            write_curve_csv(&r.curve, &r.psi, file).map_err(|e| Error::csv(&path, e))?;
        }
        Ok(())
    }
}

/// Header plus one row per run; an empty slice gives the header alone.
pub fn write_runs_csv<W: std::io::Write>(runs: &[RunRecord], writer: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(RUN_CSV_HEADER)?;
    for r in runs {
        w.serialize(RunRow::from(r))?;
    }
    w.flush()?;
    Ok(())
}

/// `x,v,psi` triples for plotting.
pub fn write_curve_csv<W: std::io::Write>(
    curve: &PolygonalCurve,
    psi: &[f64],
    writer: W,
) -> std::result::Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["x", "v", "psi"])?;
    for ((x, v), p) in curve.grid().nodes().zip(curve.values()).zip(psi) {
        w.serialize((x, v, p))?;
    }
    w.flush()?;
    Ok(())
}

/// One row of a bending consistency study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaRow {
    #[serde(rename = "N")]
    pub n: usize,
    /// Second-difference form on the interpolant.
    pub auxiliary: f64,
    /// Turning-angle form on the interpolant.
    pub discrete: f64,
    pub continuous: f64,
    pub auxiliary_error: f64,
    pub discrete_error: f64,
}

/// Discrete bending energies of `I_h f` against the continuous value, per `N`.
pub fn gamma_convergence_study<F: SmoothCurve + ?Sized>(
    f: &F,
    ns: &[usize],
    params: &PhysicalParams,
) -> Result<Vec<GammaRow>> {
    let continuous = bending_continuous(f, params)?;
    ns.iter()
        .map(|&n| {
            let curve = interpolate(PeriodicGrid::new(n)?, |x| f.value(x))?;
            let auxiliary = bending_auxiliary(&curve, params);
            let discrete = bending_discrete(&curve, params);
            Ok(GammaRow {
                n,
                auxiliary,
                discrete,
                continuous,
                auxiliary_error: (auxiliary - continuous).abs(),
                discrete_error: (discrete - continuous).abs(),
            })
        })
        .collect()
}

pub fn write_gamma_csv<W: std::io::Write>(rows: &[GammaRow], writer: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    w.write_record(["N", "auxiliary", "discrete", "continuous", "auxiliary_error", "discrete_error"])?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> RegularizationParams {
        RegularizationParams::new(0.01, 0.001).unwrap()
    }

    #[test]
    fn guesses_from_examples() {
        let g = PeriodicGrid::new(8).unwrap();
        let c = initial_guess(&InitialGuess::Constant { offset: 0.1 }, g, &Obstacle::flat(0.0), &reg()).unwrap();
        assert!(c.values().iter().all(|&v| v == 0.1));

        let g = PeriodicGrid::new(100).unwrap();
        let o = Obstacle::sinusoidal();
        let c = initial_guess(&InitialGuess::FullAdhesion, g, &o, &reg()).unwrap();
        for (j, v) in c.values().iter().enumerate() {
            assert!((v - 0.03 * (24.0 * std::f64::consts::PI * j as f64 / 100.0).sin()).abs() < 1e-15);
        }

        let g = PeriodicGrid::new(4).unwrap();
        let c = initial_guess(&InitialGuess::CenterSpike { height: 1.0 }, g, &Obstacle::flat(0.0), &reg()).unwrap();
        assert_eq!(c.values(), &[0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn classification_examples() {
        let g = PeriodicGrid::new(100).unwrap();
        let o = Obstacle::sinusoidal();
        let full = initial_guess(&InitialGuess::FullAdhesion, g, &o, &reg()).unwrap();
        let c = classify(&full, &o, &reg());
        assert_eq!((c.fraction, c.runs), (1.0, 1));

        let above = full.shifted(0.02);
        let c = classify(&above, &o, &reg());
        assert_eq!((c.fraction, c.runs), (0.0, 0));

        let bump = initial_guess(&InitialGuess::KBump { k: 1, height: 0.05 }, g, &o, &reg()).unwrap();
        let c = classify(&bump, &o, &reg());
        assert_eq!(c.runs, 1);
        assert!(c.fraction < 1.0 && c.fraction > 0.5);
    }

    #[test]
    fn bumps_rise_over_distinct_crests() {
        let g = PeriodicGrid::new(240).unwrap();
        let o = Obstacle::sinusoidal();
        for k in 1..=4 {
            let v = initial_guess(&InitialGuess::KBump { k, height: 0.02 }, g, &o, &reg()).unwrap();
            let c = classify(&v, &o, &reg());
            assert_eq!(c.runs, k, "k = {k}");
        }
        assert!(initial_guess(&InitialGuess::KBump { k: 13, height: 0.02 }, g, &o, &reg()).is_err());
        assert!(initial_guess(&InitialGuess::KBump { k: 1, height: 0.02 }, g, &Obstacle::flat(0.0), &reg()).is_err());
    }

    #[test]
    fn guess_strings_round_trip() {
        for s in ["constant:0.1", "top:10", "full", "bump:3:0.02", "dips:1", "dips:1001", "tent:0.2:0.0625", "spike:0.5", "random:7:0.01"] {
            let g: InitialGuess = s.parse().unwrap();
            assert_eq!(g.to_string().parse::<InitialGuess>().unwrap(), g);
        }
        assert!("wobble:1".parse::<InitialGuess>().is_err());
    }

    #[test]
    fn rules_parse() {
        assert_eq!("h".parse::<DeltaRule>().unwrap(), DeltaRule::Mesh);
        assert_eq!("h/100".parse::<RhoRule>().unwrap(), RhoRule::MeshOver(100.0));
        assert_eq!("0.5".parse::<RhoRule>().unwrap(), RhoRule::Fixed(0.5));
        assert!("x/2".parse::<RhoRule>().is_err());
    }

    #[test]
    fn presets_validate() {
        for p in PRESETS {
            ExperimentConfig::preset(p).unwrap().validate().unwrap();
        }
        assert!(ExperimentConfig::preset("psi3").is_err());
    }
}
