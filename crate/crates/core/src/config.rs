//! Typed run configuration, validation rules, and the canonical echo format.
//!
//! Parsing from TOML text lives in the command-line crate; this module owns
//! the semantic checks so every entry point rejects inadmissible setups with
//! the same named rules.

use crate::error::{Error, Result};
use crate::grid::GridFamily;
use crate::perturb::{PerturbParams, PerturbProfile};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Crf,
    Dcrf,
    BothCompare,
}

impl RunMode {
    pub fn id(self) -> &'static str {
        match self {
            RunMode::Crf => "crf",
            RunMode::Dcrf => "dcrf",
            RunMode::BothCompare => "both-compare",
        }
    }

    pub fn from_id(s: &str) -> Result<Self> {
        match s {
            "crf" => Ok(RunMode::Crf),
            "dcrf" => Ok(RunMode::Dcrf),
            "both-compare" => Ok(RunMode::BothCompare),
            other => Err(Error::Config {
                rule: "run-mode",
                message: format!("unknown mode {other:?}"),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArtifactFormat {
    Csv,
    Json,
}

impl ArtifactFormat {
    pub fn id(self) -> &'static str {
        match self {
            ArtifactFormat::Csv => "csv",
            ArtifactFormat::Json => "json",
        }
    }

    pub fn from_id(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ArtifactFormat::Csv),
            "json" => Ok(ArtifactFormat::Json),
            other => Err(Error::Config {
                rule: "output-format",
                message: format!("unknown format {other:?}"),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    pub extent: f64,
    pub n_points: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeSpec {
    pub t_end: f64,
    pub cfl_sigma: f64,
    pub snapshot_interval: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tolerances {
    pub elliptic: f64,
    pub newton: f64,
    pub drift_band: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            elliptic: 1e-10,
            newton: 1e-10,
            drift_band: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSpec {
    pub dir: String,
    pub formats: Vec<ArtifactFormat>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            dir: "out".into(),
            formats: vec![ArtifactFormat::Csv, ArtifactFormat::Json],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowConfig {
    pub family: GridFamily,
    pub m: usize,
    pub kappa: f64,
    pub c: Option<f64>,
    pub allow_positive_c: bool,
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub mode: RunMode,
    pub perturbation: PerturbParams,
    pub normalize: bool,
    pub alpha: f64,
    pub tolerances: Tolerances,
    pub output: OutputSpec,
    pub ladder: Option<Vec<usize>>,
}

impl FlowConfig {
    /// A valid AH baseline; tests and examples specialize from here.
    pub fn ah_default() -> Self {
        FlowConfig {
            family: GridFamily::AhBall,
            m: 3,
            kappa: 1.0,
            c: None,
            allow_positive_c: false,
            grid: GridSpec {
                extent: 8.0,
                n_points: 401,
            },
            time: TimeSpec {
                t_end: 0.1,
                cfl_sigma: 0.2,
                snapshot_interval: 0.01,
            },
            mode: RunMode::Crf,
            perturbation: PerturbParams::default(),
            normalize: true,
            alpha: 0.1,
            tolerances: Tolerances::default(),
            output: OutputSpec::default(),
            ladder: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |rule: &'static str, message: String| Err(Error::Config { rule, message });

        if self.m < 2 {
            return fail("fiber-dimension", format!("m = {} but the fiber needs m >= 2", self.m));
        }
        match self.family {
            GridFamily::AhBall => {
                if self.kappa != 1.0 {
                    return fail(
                        "family-kappa",
                        format!("AH family requires kappa = 1, got {}", self.kappa),
                    );
                }
                if self.c.is_some() {
                    return fail(
                        "ah-no-c",
                        "the AH normalization fixes c = -m/2; do not set c".into(),
                    );
                }
            }
            GridFamily::Closed => {
                if self.kappa != 1.0 && self.kappa != 0.0 {
                    return fail(
                        "family-kappa",
                        format!("closed family supports kappa in {{0, 1}}, got {}", self.kappa),
                    );
                }
                let Some(c) = self.c else {
                    return fail("closed-needs-c", "closed family requires c".into());
                };
                if c >= 0.0 && !self.allow_positive_c {
                    return fail(
                        "spectral-collision",
                        format!(
                            "c = {c} >= 0 risks a spectral collision in the pressure operator; \
                             set allow_positive_c to proceed"
                        ),
                    );
                }
                if self.normalize {
                    return fail(
                        "normalize-ah-only",
                        "conformal normalization is defined for the AH family".into(),
                    );
                }
            }
        }
        if !(self.grid.extent.is_finite() && self.grid.extent > 0.0) {
            return fail("grid-extent", format!("extent = {}", self.grid.extent));
        }
        if self.family == GridFamily::Closed && self.kappa == 1.0 {
            let pi = std::f64::consts::PI;
            if (self.grid.extent - pi).abs() > 1e-3 {
                return fail(
                    "sphere-extent",
                    format!(
                        "kappa = 1 closed geometry runs pole to pole; extent must be pi, got {}",
                        self.grid.extent
                    ),
                );
            }
        }
        if self.grid.n_points < 13 {
            return fail(
                "grid-points",
                format!("n_points = {} below the stencil minimum 13", self.grid.n_points),
            );
        }
        if !(self.time.t_end.is_finite() && self.time.t_end > 0.0) {
            return fail("time-positive", format!("t_end = {}", self.time.t_end));
        }
        if !(self.time.cfl_sigma > 0.0 && self.time.cfl_sigma <= 0.5) {
            return fail(
                "cfl-range",
                format!("cfl_sigma = {} outside (0, 0.5]", self.time.cfl_sigma),
            );
        }
        if !(self.time.snapshot_interval > 0.0) {
            return fail(
                "snapshot-divides",
                format!("snapshot_interval = {}", self.time.snapshot_interval),
            );
        }
        let ratio = self.time.t_end / self.time.snapshot_interval;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) || ratio.round() < 1.0 {
            return fail(
                "snapshot-divides",
                format!(
                    "t_end = {} is not a whole number of snapshot intervals {}",
                    self.time.t_end, self.time.snapshot_interval
                ),
            );
        }
        if self.perturbation.amplitude.abs() >= 0.5 {
            return fail(
                "perturbation-amplitude",
                format!("|amplitude| = {} >= 0.5", self.perturbation.amplitude.abs()),
            );
        }
        if self.perturbation.decay_rate <= 0.0 {
            return fail(
                "perturbation-decay",
                format!("decay_rate = {}", self.perturbation.decay_rate),
            );
        }
        if self.perturbation.profile == PerturbProfile::Bump
            && self.family != GridFamily::AhBall
        {
            return fail(
                "profile-family",
                "the bump profile is built around the AH radial coordinate".into(),
            );
        }
        if self.normalize && self.family != GridFamily::AhBall {
            return fail(
                "normalize-ah-only",
                "conformal normalization is defined for the AH family".into(),
            );
        }
        if !(self.alpha > 0.0) {
            return fail("alpha-positive", format!("alpha = {}", self.alpha));
        }
        let t = &self.tolerances;
        if !(t.elliptic > 0.0 && t.newton > 0.0 && t.drift_band > 0.0) {
            return fail(
                "tolerance-positive",
                format!(
                    "elliptic = {}, newton = {}, drift_band = {}",
                    t.elliptic, t.newton, t.drift_band
                ),
            );
        }
        if let Some(ladder) = &self.ladder {
            if ladder.len() < 2 {
                return fail("ladder-grids", "a ladder needs at least two grids".into());
            }
            for w in ladder.windows(2) {
                if w[1] <= w[0] {
                    return fail(
                        "ladder-grids",
                        format!("ladder grids must increase, got {} then {}", w[0], w[1]),
                    );
                }
            }
            if ladder[0] < 13 {
                return fail(
                    "ladder-grids",
                    format!("ladder grid {} below the stencil minimum 13", ladder[0]),
                );
            }
        }
        Ok(())
    }

    /// Deterministic TOML rendering: fixed key order, `Display` floats. The
    /// echo emitted next to run artifacts is this exact string.
    pub fn to_canonical_toml(&self) -> String {
        let mut s = String::new();
        let family = match self.family {
            GridFamily::AhBall => "ah",
            GridFamily::Closed => "closed",
        };
        s.push_str(&format!("family = \"{family}\"\n"));
        s.push_str(&format!("m = {}\n", self.m));
        s.push_str(&format!("kappa = {}\n", fmt_f64(self.kappa)));
        if let Some(c) = self.c {
            s.push_str(&format!("c = {}\n", fmt_f64(c)));
        }
        s.push_str(&format!("allow_positive_c = {}\n", self.allow_positive_c));
        s.push_str(&format!("mode = \"{}\"\n", self.mode.id()));
        s.push_str(&format!("normalize = {}\n", self.normalize));
        s.push_str(&format!("alpha = {}\n", fmt_f64(self.alpha)));
        if let Some(ladder) = &self.ladder {
            let items: Vec<String> = ladder.iter().map(|n| n.to_string()).collect();
            s.push_str(&format!("ladder = [{}]\n", items.join(", ")));
        }
        s.push_str("\n[grid]\n");
        s.push_str(&format!("extent = {}\n", fmt_f64(self.grid.extent)));
        s.push_str(&format!("n_points = {}\n", self.grid.n_points));
        s.push_str("\n[time]\n");
        s.push_str(&format!("t_end = {}\n", fmt_f64(self.time.t_end)));
        s.push_str(&format!("cfl_sigma = {}\n", fmt_f64(self.time.cfl_sigma)));
        s.push_str(&format!(
            "snapshot_interval = {}\n",
            fmt_f64(self.time.snapshot_interval)
        ));
        s.push_str("\n[perturbation]\n");
        s.push_str(&format!(
            "amplitude = {}\n",
            fmt_f64(self.perturbation.amplitude)
        ));
        s.push_str(&format!("profile = \"{}\"\n", self.perturbation.profile.id()));
        s.push_str(&format!(
            "decay_rate = {}\n",
            fmt_f64(self.perturbation.decay_rate)
        ));
        s.push_str(&format!("seed = {}\n", self.perturbation.seed));
        s.push_str("\n[tolerances]\n");
        s.push_str(&format!("elliptic = {}\n", fmt_f64(self.tolerances.elliptic)));
        s.push_str(&format!("newton = {}\n", fmt_f64(self.tolerances.newton)));
        s.push_str(&format!(
            "drift_band = {}\n",
            fmt_f64(self.tolerances.drift_band)
        ));
        s.push_str("\n[output]\n");
        s.push_str(&format!("dir = {:?}\n", self.output.dir));
        let formats: Vec<String> = self
            .output
            .formats
            .iter()
            .map(|f| format!("\"{}\"", f.id()))
            .collect();
        s.push_str(&format!("formats = [{}]\n", formats.join(", ")));
        s
    }
}

/// TOML needs a decimal point or exponent on floats; `Display` for round
/// values gives bare integers, so patch those.
fn fmt_f64(v: f64) -> String {
    let s = format!("{v}");
    if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_validates() {
        FlowConfig::ah_default().validate().unwrap();
    }

    #[test]
    fn named_rules_fire() {
        let expect_rule = |cfg: &FlowConfig, want: &str| match cfg.validate() {
            Err(Error::Config { rule, .. }) => assert_eq!(rule, want),
            other => panic!("expected {want}, got {other:?}"),
        };

        let mut c = FlowConfig::ah_default();
        c.kappa = 0.0;
        expect_rule(&c, "family-kappa");

        let mut c = FlowConfig::ah_default();
        c.c = Some(-1.0);
        expect_rule(&c, "ah-no-c");

        let mut c = FlowConfig::ah_default();
        c.family = GridFamily::Closed;
        c.normalize = false;
        c.kappa = 1.0;
        c.grid.extent = std::f64::consts::PI;
        expect_rule(&c, "closed-needs-c");
        c.c = Some(1.0);
        expect_rule(&c, "spectral-collision");
        c.allow_positive_c = true;
        c.validate().unwrap();
        c.grid.extent = 3.0;
        expect_rule(&c, "sphere-extent");

        let mut c = FlowConfig::ah_default();
        c.time.snapshot_interval = 0.03;
        expect_rule(&c, "snapshot-divides");

        let mut c = FlowConfig::ah_default();
        c.time.cfl_sigma = 0.7;
        expect_rule(&c, "cfl-range");

        let mut c = FlowConfig::ah_default();
        c.perturbation.amplitude = 0.5;
        expect_rule(&c, "perturbation-amplitude");

        let mut c = FlowConfig::ah_default();
        c.ladder = Some(vec![401]);
        expect_rule(&c, "ladder-grids");
        c.ladder = Some(vec![401, 401]);
        expect_rule(&c, "ladder-grids");

        let mut c = FlowConfig::ah_default();
        c.normalize = false;
        c.validate().unwrap();
    }

    #[test]
    fn canonical_echo_is_stable_and_parseable_shape() {
        let cfg = FlowConfig::ah_default();
        let one = cfg.to_canonical_toml();
        let two = cfg.to_canonical_toml();
        assert_eq!(one, two);
        assert!(one.starts_with("family = \"ah\"\n"));
        assert!(one.contains("\n[grid]\n"));
        assert!(one.contains("kappa = 1.0\n"));
        assert!(one.contains("drift_band = 0.0001\n"));
    }
}
