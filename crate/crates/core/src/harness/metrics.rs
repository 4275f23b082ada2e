//! Gap arithmetic, the tokens-per-step regression and report tables.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{EvalRecord, GoalClass, HarnessError};

/// `(plan_length − c_opt) / c_opt`, kept exact until rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gap {
    Finite(Ratio<i64>),
    /// Non-empty plan for an instance whose optimum is 0.
    Infinite,
}

impl Gap {
    pub fn to_f64(self) -> f64 {
        match self {
            Gap::Finite(r) => *r.numer() as f64 / *r.denom() as f64,
            Gap::Infinite => f64::INFINITY,
        }
    }

    pub fn is_zero(self) -> bool {
        matches!(self, Gap::Finite(r) if *r.numer() == 0)
    }

    pub fn is_negative(self) -> bool {
        matches!(self, Gap::Finite(r) if *r.numer() < 0)
    }
}

impl fmt::Display for Gap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gap::Finite(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Gap::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Gap {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "inf" {
            return Ok(Gap::Infinite);
        }
        let bad = || format!("bad gap `{s}`");
        let (n, d) = s.split_once('/').unwrap_or((s, "1"));
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        Ok(Gap::Finite(Ratio::new(n, d)))
    }
}

// Stored as "n/d" text so the exact value survives the results file.
impl Serialize for Gap {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Gap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn optimality_gap(plan_length: u64, c_opt: u64) -> Gap {
    if c_opt == 0 {
        return if plan_length == 0 { Gap::Finite(Ratio::from_integer(0)) } else { Gap::Infinite };
    }
    Gap::Finite(Ratio::new(plan_length as i64 - c_opt as i64, c_opt as i64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    pub n: usize,
}

/// Ordinary least squares of `y` on `x`.
pub fn fit_line(points: &[(f64, f64)]) -> Result<FitResult, HarnessError> {
    let n = points.len();
    if n < 2 {
        return Err(HarnessError::InsufficientData(format!("{n} point(s)")));
    }
    let nf = n as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(HarnessError::InsufficientData("all x values equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = points.iter().map(|p| (p.1 - (slope * p.0 + intercept)).powi(2)).sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { (1.0 - ss_res / ss_tot).clamp(0.0, 1.0) };
    Ok(FitResult { slope, intercept, r2, n })
}

/// Thinking tokens against C_opt over valid records that report tokens.
pub fn fit_tokens_per_step(records: &[EvalRecord]) -> Result<FitResult, HarnessError> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.valid)
        .filter_map(|r| r.thinking_tokens.map(|t| (r.c_opt as f64, t as f64)))
        .collect();
    fit_line(&points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub curriculum: String,
    pub producer: String,
    pub representation: String,
    pub total: usize,
    pub valid: usize,
    pub optimal: usize,
    pub gap_min: Option<f64>,
    pub gap_median: Option<f64>,
    pub gap_max: Option<f64>,
    /// Valid records whose plan beat C_opt on a class where C_opt is the
    /// proven optimum. Always a bug when non-zero.
    pub negative_gaps: usize,
}

impl GroupSummary {
    pub fn success_rate(&self) -> f64 {
        ratio(self.valid, self.total)
    }

    pub fn optimal_rate(&self) -> f64 {
        ratio(self.optimal, self.valid)
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub groups: Vec<GroupSummary>,
    pub fit: Option<FitResult>,
}

fn median(sorted: &[f64]) -> Option<f64> {
    match sorted.len() {
        0 => None,
        n if n % 2 == 1 => Some(sorted[n / 2]),
        n => Some((sorted[n / 2 - 1] + sorted[n / 2]) / 2.0),
    }
}

pub fn summarize(records: &[EvalRecord]) -> Report {
    let mut groups: BTreeMap<(String, String, String), Vec<&EvalRecord>> = BTreeMap::new();
    for r in records {
        groups
            .entry((r.curriculum.clone(), r.producer.clone(), r.representation.to_string()))
            .or_default()
            .push(r);
    }
    let groups = groups
        .into_iter()
        .map(|((curriculum, producer, representation), rs)| {
            let valid: Vec<&&EvalRecord> = rs.iter().filter(|r| r.valid).collect();
            let gaps: Vec<Gap> = valid.iter().filter_map(|r| r.gap).collect();
            let mut finite: Vec<f64> = gaps.iter().map(|g| g.to_f64()).collect();
            finite.sort_by(f64::total_cmp);
            GroupSummary {
                curriculum,
                producer,
                representation,
                total: rs.len(),
                valid: valid.len(),
                optimal: gaps.iter().filter(|g| g.is_zero()).count(),
                gap_min: finite.first().copied(),
                gap_median: median(&finite),
                gap_max: finite.last().copied(),
                negative_gaps: valid
                    .iter()
                    .filter(|r| matches!(r.goal_class, GoalClass::Standard | GoalClass::Retrieve))
                    .filter(|r| r.gap.is_some_and(Gap::is_negative))
                    .count(),
            }
        })
        .collect();
    Report { groups, fit: fit_tokens_per_step(records).ok() }
}

/// `70%`, `33.3%`.
pub fn fmt_percent(x: f64) -> String {
    let p = x * 100.0;
    if (p - p.round()).abs() < 1e-9 {
        format!("{}%", p.round() as i64)
    } else {
        format!("{p:.1}%")
    }
}

fn fmt_gap(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_infinite() => "inf".into(),
        Some(v) => format!("{v:.4}"),
        None => "-".into(),
    }
}

pub fn render_text(report: &Report) -> String {
    let mut out = String::new();
    for g in &report.groups {
        out.push_str(&format!("[{} | {} | {}]\n", g.curriculum, g.producer, g.representation));
        out.push_str(&format!("  instances     {}\n", g.total));
        out.push_str(&format!("  success rate  {} ({}/{})\n", fmt_percent(g.success_rate()), g.valid, g.total));
        out.push_str(&format!("  optimal rate  {} ({}/{})\n", fmt_percent(g.optimal_rate()), g.optimal, g.valid));
        out.push_str(&format!(
            "  gap min/median/max  {} / {} / {}\n",
            fmt_gap(g.gap_min),
            fmt_gap(g.gap_median),
            fmt_gap(g.gap_max)
        ));
        if g.negative_gaps > 0 {
            out.push_str(&format!("  WARNING: {} plan(s) shorter than the proven optimum\n", g.negative_gaps));
        }
    }
    match &report.fit {
        Some(f) => out.push_str(&format!(
            "tokens per step: slope {:.3}, intercept {:.3}, r2 {:.4}, n {}\n",
            f.slope, f.intercept, f.r2, f.n
        )),
        None => out.push_str("tokens per step: insufficient data\n"),
    }
    out
}

pub const CSV_HEADER: &str = "complexity_axis,c_opt,plan_length,valid,thinking_tokens";

/// Plot data, one row per record.
pub fn plot_csv(records: &[EvalRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let opt = |v: Option<u64>| v.map(|x| x.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.complexity_axis,
            r.c_opt,
            opt(r.plan_length),
            r.valid,
            opt(r.thinking_tokens)
        ));
    }
    out
}
