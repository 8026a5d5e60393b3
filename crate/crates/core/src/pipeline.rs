//! Named method configurations (`MRCM`, `OC-l`, `OL-l,kS`, ...) and a single
//! entry point running basis construction, coupling and smoothing.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::decomposition::{oversample, Partition};
use crate::error::{MrcmError, Result};
use crate::mrcm::{solve_mrcm, MultiplierKind, MultiscaleSolution};
use crate::problem::DarcyProblem;
use crate::smoothing::Smoother;
use crate::spaces::TraceFamily;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Method {
    pub family: TraceFamily,
    /// `None` selects polynomial multipliers, `Some(l)` informed ones built on
    /// boxes enlarged by `l` cells.
    pub oversampling: Option<usize>,
    pub smoothing: usize,
}

impl Method {
    pub fn classical(family: TraceFamily) -> Self {
        Self { family, oversampling: None, smoothing: 0 }
    }

    pub fn informed(family: TraceFamily, l: usize, smoothing: usize) -> Self {
        Self { family, oversampling: Some(l), smoothing }
    }

    /// Polynomial degree count `d` (1 constant, 2 linear, 0 for the fine family).
    pub fn degree(&self) -> usize {
        match self.family {
            TraceFamily::Constant => 1,
            TraceFamily::Linear => 2,
            TraceFamily::Fine => 0,
        }
    }

    pub fn oversampling_layers(&self) -> usize {
        self.oversampling.unwrap_or(0)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.oversampling, self.family) {
            (None, TraceFamily::Fine) => write!(f, "MRCM-fine"),
            (None, _) => write!(f, "MRCM"),
            (Some(l), fam) => {
                let c = match fam {
                    TraceFamily::Constant => 'C',
                    TraceFamily::Linear => 'L',
                    TraceFamily::Fine => 'F',
                };
                write!(f, "O{c}-{l}")?;
                if self.smoothing > 0 {
                    write!(f, ",{}S", self.smoothing)?;
                }
                Ok(())
            }
        }
    }
}

impl FromStr for Method {
    type Err = MrcmError;

    /// Parses `OC-2`, `OL-4,4S` or `MRCM-d1` / `MRCM-d2` (plain `MRCM` is linear).
    fn from_str(s: &str) -> Result<Self> {
        let bad = || MrcmError::InvalidArgument(format!("unknown method '{s}'"));
        match s {
            "MRCM" | "MRCM-d2" => return Ok(Self::classical(TraceFamily::Linear)),
            "MRCM-d1" => return Ok(Self::classical(TraceFamily::Constant)),
            "MRCM-fine" => return Ok(Self::classical(TraceFamily::Fine)),
            _ => {}
        }
        let rest = s.strip_prefix('O').ok_or_else(bad)?;
        let family = match rest.chars().next() {
            Some('C') => TraceFamily::Constant,
            Some('L') => TraceFamily::Linear,
            _ => return Err(bad()),
        };
        let rest = rest[1..].strip_prefix('-').ok_or_else(bad)?;
        let (l, k) = match rest.split_once(',') {
            Some((l, k)) => (l, k.strip_suffix('S').ok_or_else(bad)?.parse().map_err(|_| bad())?),
            None => (rest, 0),
        };
        Ok(Self::informed(family, l.parse().map_err(|_| bad())?, k))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunTimings {
    pub local: Duration,
    pub coupling: Duration,
    pub smoothing: Duration,
}

impl RunTimings {
    pub fn total(&self) -> Duration {
        self.local + self.coupling + self.smoothing
    }
}

#[derive(Clone, Debug)]
pub struct MethodRun {
    pub method: Method,
    pub alpha: f64,
    /// Solution before smoothing.
    pub unsmoothed: MultiscaleSolution,
    pub solution: MultiscaleSolution,
    pub interface_size: usize,
    pub deflated: usize,
    pub timings: RunTimings,
}

/// Runs `method` at Robin parameter `alpha`; smoothing sweeps use `smoothing_alpha`.
pub fn run_method(problem: &DarcyProblem, partition: &Partition, method: Method, alpha: f64, smoothing_alpha: f64) -> Result<MethodRun> {
    if method.oversampling.is_none() && method.smoothing > 0 {
        return Err(MrcmError::InvalidArgument("smoothing needs an oversampled method".into()));
    }
    let opart = oversample(partition, method.oversampling_layers())?;
    let kind = if method.oversampling.is_some() { MultiplierKind::Informed } else { MultiplierKind::Classical };
    let out = solve_mrcm(problem, &opart, method.family, alpha, kind)?;
    let t = Instant::now();
    let solution = if method.smoothing == 0 {
        out.solution.clone()
    } else {
        let smoother = if smoothing_alpha == alpha {
            Smoother::with_solvers(problem, &opart, out.hat_solvers.clone())?
        } else {
            Smoother::new(problem, &opart, smoothing_alpha)?
        };
        smoother.smooth(&out.solution, method.smoothing)?
    };
    let smoothing = t.elapsed();
    Ok(MethodRun {
        method,
        alpha,
        unsmoothed: out.solution,
        solution,
        interface_size: out.interface_size,
        deflated: out.deflated,
        timings: RunTimings { local: out.timings.local, coupling: out.timings.coupling, smoothing },
    })
}
