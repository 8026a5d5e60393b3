//! Experiment configuration: a JSON document with defaults for every field,
//! plus dotted-path overrides from the command line.

use std::fmt;
use std::path::{Path, PathBuf};

use mrcm_core::decomposition::Partition;
use mrcm_core::metrics::{default_jump_line, horizontal_line, vertical_line};
use mrcm_core::pipeline::Method;
use mrcm_core::problem::{PermComponent, SPE10_LAYER_SHAPE};
use mrcm_core::spaces::TraceFamily;
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    /// Unit square, `K = 1`, cosine manufactured solution, `m x m` subdomains of
    /// `n_loc x n_loc` cells.
    Homogeneous {
        m: usize,
        n_loc: usize,
    },
    /// One SPE10 layer on `220 x 60` cells. Without `path` a seeded synthetic
    /// channelized field is used instead.
    Spe10 {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<PathBuf>,
        #[serde(default = "default_layer")]
        layer: usize,
        #[serde(default)]
        component: Component,
        #[serde(default = "default_spe10_subdomains")]
        subdomains: [usize; 2],
    },
}

fn default_layer() -> usize {
    40
}

fn default_spe10_subdomains() -> [usize; 2] {
    [11, 3]
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig::Homogeneous { m: 8, n_loc: 20 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    #[default]
    Kx,
    Ky,
    Kz,
}

impl From<Component> for PermComponent {
    fn from(c: Component) -> Self {
        match c {
            Component::Kx => PermComponent::Kx,
            Component::Ky => PermComponent::Ky,
            Component::Kz => PermComponent::Kz,
        }
    }
}

/// One method of the matrix: `d` polynomial count (1 constant, 2 linear,
/// 0 one multiplier per fine edge), `l` oversampling layers (absent for
/// classical MRCM) and `ns` smoothing sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default)]
    pub ns: usize,
}

impl MethodSpec {
    pub fn family(&self) -> Option<TraceFamily> {
        match self.d {
            0 => Some(TraceFamily::Fine),
            1 => Some(TraceFamily::Constant),
            2 => Some(TraceFamily::Linear),
            _ => None,
        }
    }

    /// Panics on an unvalidated `d`.
    pub fn method(&self) -> Method {
        let family = self.family().expect("validated degree");
        match self.l {
            None => Method::classical(family),
            Some(l) => Method::informed(family, l, self.ns),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub methods: Vec<MethodSpec>,
    pub alphas: Vec<f64>,
    /// Robin parameter of the smoothing sweeps.
    pub smoothing_alpha: f64,
    /// Subdomain counts per axis for `refine` (homogeneous problem only).
    pub refine_m: Vec<usize>,
    /// Largest sweep count of `smooth-study`.
    pub max_smoothing_steps: usize,
    pub outputs: PathBuf,
    /// Seed of the synthetic SPE10 stand-in.
    pub seed: u64,
    /// Compare pressures up to their means; `None` does so for pure-Neumann problems.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_adjust: Option<bool>,
    pub dump_fields: bool,
    /// Skeleton line for jump profiles: `row:<k>` or `col:<k>`, default the
    /// middle horizontal line.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jump_line: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemConfig::default(),
            methods: vec![MethodSpec { d: 2, l: None, ns: 0 }, MethodSpec { d: 2, l: Some(2), ns: 2 }],
            alphas: vec![1.0],
            smoothing_alpha: 1.0,
            refine_m: vec![2, 4, 8, 16],
            max_smoothing_steps: 8,
            outputs: PathBuf::from("out"),
            seed: 40,
            mean_adjust: None,
            dump_fields: false,
            jump_line: None,
        }
    }
}

/// All validation failures, one `path: message` entry each.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigErrors(pub Vec<String>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid configuration:")?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

/// Which experiment the configuration is checked for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Purpose {
    Solve,
    AlphaSweep,
    Refine,
    SmoothStudy,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| anyhow::anyhow!("parsing {}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies `key=value` overrides; keys are dotted paths with numeric array
    /// indices (`problem.m`, `methods.1.ns`), values are JSON or bare strings.
    pub fn with_overrides(&self, overrides: &[String]) -> anyhow::Result<Self> {
        let mut doc = serde_json::to_value(self)?;
        for o in overrides {
            let (key, raw) = o.split_once('=').ok_or_else(|| anyhow::anyhow!("override '{o}' is not key=value"))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key, value)?;
        }
        Ok(serde_json::from_value(doc)?)
    }

    /// Subdomain counts and local cell counts per axis of the configured problem.
    pub fn layout(&self) -> ([usize; 2], [usize; 2]) {
        match &self.problem {
            ProblemConfig::Homogeneous { m, n_loc } => ([*m, *m], [*n_loc, *n_loc]),
            ProblemConfig::Spe10 { subdomains, .. } => {
                let (nx, ny) = SPE10_LAYER_SHAPE;
                let [mx, my] = *subdomains;
                ([mx, my], [nx / mx.max(1), ny / my.max(1)])
            }
        }
    }

    pub fn validate(&self, purpose: Purpose) -> Result<(), ConfigErrors> {
        let mut errs = Vec::new();
        match &self.problem {
            ProblemConfig::Homogeneous { m, n_loc } => {
                if *m == 0 {
                    errs.push("problem.m: must be at least 1".to_string());
                }
                if *n_loc == 0 {
                    errs.push("problem.n_loc: must be at least 1".to_string());
                }
            }
            ProblemConfig::Spe10 { layer, subdomains, .. } => {
                if !(1..=85).contains(layer) {
                    errs.push(format!("problem.layer: {layer} outside 1..=85"));
                }
                let (nx, ny) = SPE10_LAYER_SHAPE;
                for (k, (&m, n)) in subdomains.iter().zip([nx, ny]).enumerate() {
                    if m == 0 || n % m != 0 {
                        errs.push(format!("problem.subdomains[{k}]: {m} does not divide {n} cells"));
                    }
                }
                if purpose == Purpose::Refine {
                    errs.push("problem.kind: refine needs the homogeneous problem".to_string());
                }
            }
        }
        let (_, local) = self.layout();
        let min_local = local[0].min(local[1]);
        if self.methods.is_empty() {
            errs.push("methods: empty".to_string());
        }
        for (k, m) in self.methods.iter().enumerate() {
            match m.family() {
                None => errs.push(format!("methods[{k}].d: {} not in {{0, 1, 2}}", m.d)),
                Some(TraceFamily::Fine) if m.l.unwrap_or(0) > 0 => {
                    errs.push(format!("methods[{k}].d: fine multipliers need l = 0"))
                }
                _ => {}
            }
            if m.ns > 0 && m.l.is_none() {
                errs.push(format!("methods[{k}].ns: smoothing needs an oversampled method (set l)"));
            }
            if let Some(l) = m.l {
                if l > 0 && 2 * l >= min_local {
                    errs.push(format!("methods[{k}].l: {l} too large for {min_local}-cell subdomains (need 2l < n)"));
                }
            }
        }
        if self.alphas.is_empty() {
            errs.push("alphas: empty".to_string());
        }
        for (k, a) in self.alphas.iter().enumerate() {
            if !(*a > 0.0 && a.is_finite()) {
                errs.push(format!("alphas[{k}]: {a} is not a positive finite number"));
            }
        }
        if !(self.smoothing_alpha > 0.0 && self.smoothing_alpha.is_finite()) {
            errs.push(format!("smoothing_alpha: {} is not a positive finite number", self.smoothing_alpha));
        }
        if purpose == Purpose::Refine {
            if self.refine_m.len() < 2 {
                errs.push("refine_m: need at least two subdomain counts".to_string());
            }
            for (k, m) in self.refine_m.iter().enumerate() {
                if *m == 0 {
                    errs.push(format!("refine_m[{k}]: must be at least 1"));
                }
            }
        }
        if purpose == Purpose::SmoothStudy && !self.methods.iter().any(|m| m.l.is_some()) {
            errs.push("methods: smooth-study needs an oversampled method (set l)".to_string());
        }
        if let Some(line) = &self.jump_line {
            if let Err(e) = parse_jump_line(line) {
                errs.push(format!("jump_line: {e}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(ConfigErrors(errs))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JumpLine {
    Row(usize),
    Col(usize),
}

impl JumpLine {
    pub fn faces(&self, partition: &Partition) -> mrcm_core::error::Result<Vec<usize>> {
        match *self {
            JumpLine::Row(r) => horizontal_line(partition, r),
            JumpLine::Col(c) => vertical_line(partition, c),
        }
    }

    pub fn name(&self) -> String {
        match self {
            JumpLine::Row(r) => format!("row{r}"),
            JumpLine::Col(c) => format!("col{c}"),
        }
    }
}

pub fn parse_jump_line(s: &str) -> Result<JumpLine, String> {
    let (kind, k) = s.split_once(':').ok_or_else(|| format!("'{s}' is not row:<k> or col:<k>"))?;
    let k: usize = k.parse().map_err(|_| format!("bad index in '{s}'"))?;
    match kind {
        "row" => Ok(JumpLine::Row(k)),
        "col" => Ok(JumpLine::Col(k)),
        _ => Err(format!("'{s}' is not row:<k> or col:<k>")),
    }
}

/// Configured line, or the middle horizontal one.
pub fn resolve_jump_line(cfg: &ExperimentConfig, partition: &Partition) -> anyhow::Result<(String, Vec<usize>)> {
    match &cfg.jump_line {
        Some(s) => {
            let line = parse_jump_line(s).map_err(|e| anyhow::anyhow!(e))?;
            Ok((line.name(), line.faces(partition)?))
        }
        None => {
            let (_, my) = partition.counts();
            Ok((format!("row{}", (my / 2).max(1) - 1), default_jump_line(partition)?))
        }
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> anyhow::Result<()> {
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (n, part) in parts.iter().enumerate() {
        let last = n + 1 == parts.len();
        cur = match cur {
            Value::Object(map) => {
                if last {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                map.entry(part.to_string()).or_insert(Value::Object(Default::default()))
            }
            Value::Array(items) => {
                let i: usize = part.parse().map_err(|_| anyhow::anyhow!("{key}: '{part}' is not an array index"))?;
                let len = items.len();
                let slot = items.get_mut(i).ok_or_else(|| anyhow::anyhow!("{key}: index {i} out of range ({len} entries)"))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => anyhow::bail!("{key}: '{part}' is not inside an object or array"),
        };
    }
    anyhow::bail!("empty override key")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_fields() {
        let c = ExperimentConfig::from_json("{}").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        let c = ExperimentConfig::from_json(r#"{"problem": {"kind": "spe10"}}"#).unwrap();
        assert_eq!(
            c.problem,
            ProblemConfig::Spe10 { path: None, layer: 40, component: Component::Kx, subdomains: [11, 3] }
        );
    }

    #[test]
    fn round_trip_is_normalizing() {
        let text = r#"{"methods": [{"d": 1, "l": 2, "ns": 2}, {"d": 2}], "alphas": [1e-8, 1, 1e8]}"#;
        let c = ExperimentConfig::from_json(text).unwrap();
        let again = ExperimentConfig::from_json(&c.to_json()).unwrap();
        assert_eq!(c, again);
        assert_eq!(again.to_json(), c.to_json());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"alpha": [1]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"methods": [{"d": 2, "k": 1}]}"#).is_err());
    }

    #[test]
    fn overrides_reach_nested_leaves() {
        let c = ExperimentConfig::default()
            .with_overrides(&[
                "problem.m=4".into(),
                "methods.1.ns=4".into(),
                "alphas=[1e-2,1]".into(),
                "outputs=runs/a".into(),
                "jump_line=col:1".into(),
            ])
            .unwrap();
        assert_eq!(c.problem, ProblemConfig::Homogeneous { m: 4, n_loc: 20 });
        assert_eq!(c.methods[1].ns, 4);
        assert_eq!(c.alphas, vec![1e-2, 1.0]);
        assert_eq!(c.outputs, PathBuf::from("runs/a"));
        assert_eq!(c.jump_line.as_deref(), Some("col:1"));
        assert!(ExperimentConfig::default().with_overrides(&["methods.7.d=1".into()]).is_err());
        assert!(ExperimentConfig::default().with_overrides(&["nokey".into()]).is_err());
    }

    #[test]
    fn validation_lists_every_failure_with_its_path() {
        let mut c = ExperimentConfig::default();
        c.methods = vec![MethodSpec { d: 3, l: None, ns: 1 }, MethodSpec { d: 2, l: Some(10), ns: 0 }];
        c.alphas = vec![1.0, -1.0];
        let errs = c.validate(Purpose::AlphaSweep).unwrap_err().0;
        assert!(errs.iter().any(|e| e.starts_with("methods[0].d")));
        assert!(errs.iter().any(|e| e.starts_with("methods[0].ns")));
        assert!(errs.iter().any(|e| e.starts_with("methods[1].l")));
        assert!(errs.iter().any(|e| e.starts_with("alphas[1]")));
        assert!(ExperimentConfig::default().validate(Purpose::AlphaSweep).is_ok());
    }

    #[test]
    fn purpose_specific_checks() {
        let spe = ExperimentConfig { problem: ProblemConfig::Spe10 { path: None, layer: 40, component: Component::Kx, subdomains: [7, 3] }, ..Default::default() };
        let errs = spe.validate(Purpose::Refine).unwrap_err().0;
        assert!(errs.iter().any(|e| e.starts_with("problem.subdomains[0]")));
        assert!(errs.iter().any(|e| e.starts_with("problem.kind")));
        let classical = ExperimentConfig { methods: vec![MethodSpec { d: 2, l: None, ns: 0 }], ..Default::default() };
        assert!(classical.validate(Purpose::SmoothStudy).is_err());
        assert!(classical.validate(Purpose::Solve).is_ok());
    }

    #[test]
    fn jump_lines_parse() {
        assert_eq!(parse_jump_line("row:2"), Ok(JumpLine::Row(2)));
        assert_eq!(parse_jump_line("col:0"), Ok(JumpLine::Col(0)));
        assert!(parse_jump_line("diag:1").is_err());
        assert!(parse_jump_line("row").is_err());
    }

    #[test]
    fn method_specs_map_to_labels() {
        let m = |d, l, ns| MethodSpec { d, l, ns }.method().to_string();
        assert_eq!(m(2, None, 0), "MRCM");
        assert_eq!(m(1, Some(2), 2), "OC-2,2S");
        assert_eq!(m(2, Some(4), 4), "OL-4,4S");
    }
}
