use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Side, Topology, ACTUATED_COUNT};

/// Admissible tendon target range and the neutral (assembled) length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShapeLimits {
    pub min_length: f64,
    pub max_length: f64,
    pub neutral_length: f64,
}

impl Default for ShapeLimits {
    fn default() -> Self {
        Self { min_length: 0.10, max_length: 0.30, neutral_length: 0.20 }
    }
}

impl ShapeLimits {
    pub fn validate(&self) -> Result<()> {
        if self.min_length > 0.0 && self.min_length <= self.neutral_length && self.neutral_length <= self.max_length {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid shape limits: {self:?}")))
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.min_length - 1e-12 && v <= self.max_length + 1e-12
    }
}

/// Six target lengths, one per actuated tendon, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetShape {
    pub targets: [f64; ACTUATED_COUNT],
}

impl TargetShape {
    pub fn new(targets: [f64; ACTUATED_COUNT]) -> Self {
        Self { targets }
    }

    pub fn uniform(v: f64) -> Self {
        Self { targets: [v; ACTUATED_COUNT] }
    }

    pub fn validate(&self, limits: &ShapeLimits) -> Result<()> {
        if self.targets.iter().all(|t| limits.contains(*t)) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("target shape {:?} outside [{}, {}]", self.targets, limits.min_length, limits.max_length)))
        }
    }

    /// Swap Left and Right roles: the target of tendon `i` moves to its
    /// mirror partner.
    pub fn mirrored(&self, mirror: &[usize]) -> Self {
        let mut out = [0.0; ACTUATED_COUNT];
        for (i, &j) in mirror.iter().enumerate() {
            out[j] = self.targets[i];
        }
        Self { targets: out }
    }
}

/// An ordered sequence of target shapes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gait {
    pub name: String,
    pub shapes: Vec<TargetShape>,
    pub cyclic: bool,
}

impl Gait {
    /// A one-shape gait holding every actuated tendon at `length`.
    pub fn hold(length: f64) -> Self {
        Self { name: "hold".into(), shapes: vec![TargetShape::uniform(length)], cyclic: true }
    }

    pub fn validate(&self, limits: &ShapeLimits) -> Result<()> {
        if self.shapes.is_empty() {
            return Err(Error::InvalidArgument(format!("gait '{}' has no shapes", self.name)));
        }
        self.shapes.iter().try_for_each(|s| s.validate(limits))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrientationClass {
    Identity,
    Mirror,
}

/// Identity leaves the gait alone; Mirror swaps Left/Right tendon roles in
/// every shape.
pub fn apply_symmetry(gait: &Gait, class: OrientationClass, topo: &Topology) -> Gait {
    match class {
        OrientationClass::Identity => gait.clone(),
        OrientationClass::Mirror => Gait {
            name: gait.name.clone(),
            shapes: gait.shapes.iter().map(|s| s.mirrored(&topo.mirror)).collect(),
            cyclic: gait.cyclic,
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrimitiveKind {
    ForwardRoll,
    Counterclockwise,
    Clockwise,
}

impl PrimitiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            PrimitiveKind::ForwardRoll => "ForwardRoll",
            PrimitiveKind::Counterclockwise => "Counterclockwise",
            PrimitiveKind::Clockwise => "Clockwise",
        }
    }
}

impl std::str::FromStr for PrimitiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ForwardRoll" => Ok(PrimitiveKind::ForwardRoll),
            "Counterclockwise" => Ok(PrimitiveKind::Counterclockwise),
            "Clockwise" => Ok(PrimitiveKind::Clockwise),
            other => Err(Error::InvalidArgument(format!("unknown primitive kind '{other}'"))),
        }
    }
}

/// One row of the primitive table: a gait family and its per-side maximum
/// tendon lengths in millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PrimitiveSpec {
    pub id: usize,
    pub kind: PrimitiveKind,
    pub left_max: u32,
    pub right_max: u32,
}

pub const SIDE_MAXIMA_MM: [u32; 3] = [200, 220, 240];

impl PrimitiveSpec {
    pub fn new(id: usize, kind: PrimitiveKind, left_max: u32, right_max: u32) -> Self {
        Self { id, kind, left_max, right_max }
    }

    pub fn validate(&self) -> Result<()> {
        if SIDE_MAXIMA_MM.contains(&self.left_max) && SIDE_MAXIMA_MM.contains(&self.right_max) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("side maxima must be one of {SIDE_MAXIMA_MM:?} mm: {self:?}")))
        }
    }

    /// The 11 default primitives.
    pub fn table() -> Vec<PrimitiveSpec> {
        use PrimitiveKind::*;
        let rolls = [(200, 200), (220, 220), (240, 240), (200, 220), (220, 200), (200, 240), (240, 200), (220, 240), (240, 220)];
        let mut out: Vec<_> = rolls.iter().enumerate().map(|(i, &(l, r))| PrimitiveSpec::new(i, ForwardRoll, l, r)).collect();
        out.push(PrimitiveSpec::new(9, Counterclockwise, 200, 200));
        out.push(PrimitiveSpec::new(10, Clockwise, 200, 200));
        out
    }
}

/// What a tendon does in one shape of a template.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Pull in to the minimum length.
    Contract,
    /// Let out to the side's maximum.
    Extend,
    /// Return to the neutral length.
    Neutral,
}

impl Role {
    fn from_char(c: char) -> Result<Self> {
        match c {
            'c' => Ok(Role::Contract),
            'e' => Ok(Role::Extend),
            'n' => Ok(Role::Neutral),
            other => Err(Error::InvalidArgument(format!("unknown tendon role '{other}' (expected c, e or n)"))),
        }
    }

    fn to_char(self) -> char {
        match self {
            Role::Contract => 'c',
            Role::Extend => 'e',
            Role::Neutral => 'n',
        }
    }
}

/// Shape sequence in terms of tendon roles. Each shape is written as a
/// 6-character string over `c`, `e`, `n` in actuated-tendon order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TemplateFile", into = "TemplateFile")]
pub struct GaitTemplate {
    pub name: String,
    pub cyclic: bool,
    pub shapes: Vec<[Role; ACTUATED_COUNT]>,
}

#[derive(Serialize, Deserialize)]
struct TemplateFile {
    name: String,
    cyclic: bool,
    shapes: Vec<String>,
}

impl TryFrom<TemplateFile> for GaitTemplate {
    type Error = Error;

    fn try_from(f: TemplateFile) -> Result<Self> {
        let shapes = f
            .shapes
            .iter()
            .map(|s| {
                let roles: Vec<Role> = s.chars().map(Role::from_char).collect::<Result<_>>()?;
                roles
                    .try_into()
                    .map_err(|_| Error::InvalidArgument(format!("template shape '{s}' must have 6 roles")))
            })
            .collect::<Result<Vec<_>>>()?;
        if shapes.is_empty() {
            return Err(Error::InvalidArgument(format!("template '{}' has no shapes", f.name)));
        }
        Ok(Self { name: f.name, cyclic: f.cyclic, shapes })
    }
}

impl From<GaitTemplate> for TemplateFile {
    fn from(t: GaitTemplate) -> Self {
        Self { name: t.name, cyclic: t.cyclic, shapes: t.shapes.iter().map(|s| s.iter().map(|r| r.to_char()).collect()).collect() }
    }
}

impl GaitTemplate {
    pub fn parse(name: &str, cyclic: bool, shapes: &[&str]) -> Result<Self> {
        TemplateFile { name: name.into(), cyclic, shapes: shapes.iter().map(|s| s.to_string()).collect() }.try_into()
    }

    /// Fill the roles with lengths: Extend takes the tendon's side maximum.
    pub fn instantiate(&self, name: String, left_max: f64, right_max: f64, limits: &ShapeLimits, topo: &Topology) -> Gait {
        let shapes = self
            .shapes
            .iter()
            .map(|roles| {
                TargetShape::new(std::array::from_fn(|i| match roles[i] {
                    Role::Contract => limits.min_length,
                    Role::Neutral => limits.neutral_length,
                    Role::Extend => match topo.side_assignment[i] {
                        Side::Left => left_max,
                        Side::Right => right_max,
                    },
                }))
            })
            .collect();
        Gait { name, shapes, cyclic: self.cyclic }
    }

    pub fn mirrored(&self, mirror: &[usize]) -> Self {
        let shapes = self
            .shapes
            .iter()
            .map(|roles| {
                let mut out = [Role::Neutral; ACTUATED_COUNT];
                for (i, &j) in mirror.iter().enumerate() {
                    out[j] = roles[i];
                }
                out
            })
            .collect();
        Self { name: self.name.clone(), cyclic: self.cyclic, shapes }
    }
}

/// Role templates for the rolling and turning families. The clockwise
/// template is the mirror image of the counterclockwise one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaitTemplates {
    pub forward_roll: GaitTemplate,
    pub counterclockwise: GaitTemplate,
}

pub const DEFAULT_TEMPLATES: &str = include_str!("templates.toml");

impl Default for GaitTemplates {
    fn default() -> Self {
        toml::from_str(DEFAULT_TEMPLATES).expect("bundled templates parse")
    }
}

/// Instantiate the template for `spec.kind` with the spec's side maxima.
/// Rolls use the roll template as-is; the clockwise turn is the Left/Right
/// label swap of the counterclockwise one.
pub fn make_gait(spec: &PrimitiveSpec, templates: &GaitTemplates, limits: &ShapeLimits, topo: &Topology) -> Gait {
    let left = spec.left_max as f64 * 1e-3;
    let right = spec.right_max as f64 * 1e-3;
    let name = format!("{}-{}-{}", spec.kind.name(), spec.left_max, spec.right_max);
    match spec.kind {
        PrimitiveKind::ForwardRoll => templates.forward_roll.instantiate(name, left, right, limits, topo),
        PrimitiveKind::Counterclockwise => templates.counterclockwise.instantiate(name, left, right, limits, topo),
        PrimitiveKind::Clockwise => {
            let partner = templates.counterclockwise.instantiate(name, right, left, limits, topo);
            apply_symmetry(&partner, OrientationClass::Mirror, topo)
        }
    }
}
