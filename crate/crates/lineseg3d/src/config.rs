//! Pipeline thresholds, expressed as resolution-relative factors and resolved
//! to absolute values for a given camera.

use crate::error::{Error, Result};
use crate::geom::CameraIntrinsics;

/// How the fitter counts outliers before closing a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutlierMode {
    /// Close after more than L *consecutive* outliers; the counter resets on
    /// every accepted pixel.
    #[default]
    Consecutive,
    /// Close after more than L outliers in total since the last seed.
    Total,
}

impl OutlierMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutlierMode::Consecutive => "consecutive",
            OutlierMode::Total => "total",
        }
    }
}

impl std::str::FromStr for OutlierMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "consecutive" => Ok(OutlierMode::Consecutive),
            "total" => Ok(OutlierMode::Total),
            other => Err(Error::Config(format!(
                "unknown outlier mode '{other}' (expected consecutive|total)"
            ))),
        }
    }
}

/// All tunable thresholds. Factors are multiples of min(width, height);
/// `resolve` turns them into absolute values for a camera.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    /// Seed length factor; L = round(l_factor * min(w,h)), at least 2.
    pub l_factor: f64,
    /// Image-plane residual gate factor (pixels per min-dimension).
    pub e1_factor: f64,
    /// Depth-plane residual gate factor (Zf units per min-dimension).
    pub e2_factor: f64,
    /// Cluster angle gate in degrees.
    pub lambda_alpha: f64,
    /// Cluster distance gate in world meters.
    pub lambda_d: f64,
    /// Minimum surviving cluster size.
    pub lambda_c: usize,
    /// Gradient magnitude gate on the 0..1020 Sobel |Gx|+|Gy| scale.
    pub gradient_threshold: f64,
    /// Margin by which an anchor must beat its two gradient-normal neighbors.
    pub anchor_threshold: f64,
    /// Anchor scan sampling interval in pixels.
    pub scan_interval: u32,
    /// Fold cluster angles to [0, 90°], treating segments as undirected lines.
    pub fold_angle: bool,
    /// Outlier counting mode for segment closure.
    pub outlier_mode: OutlierMode,
    /// RANSAC iterations for the decoupled baseline's depth fit.
    pub ransac_iterations: u32,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            l_factor: 0.02,
            e1_factor: 0.002,
            e2_factor: 0.003,
            lambda_alpha: 10.0,
            lambda_d: 0.02,
            lambda_c: 3,
            gradient_threshold: 36.0,
            anchor_threshold: 8.0,
            scan_interval: 1,
            fold_angle: true,
            outlier_mode: OutlierMode::Consecutive,
            ransac_iterations: 100,
        }
    }
}

impl Config {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("l_factor", self.l_factor),
            ("e1_factor", self.e1_factor),
            ("e2_factor", self.e2_factor),
            ("lambda_alpha", self.lambda_alpha),
            ("lambda_d", self.lambda_d),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.lambda_c < 1 {
            return Err(Error::Config("lambda_c must be at least 1".into()));
        }
        if self.gradient_threshold < 0.0 || self.anchor_threshold < 0.0 {
            return Err(Error::Config("detector thresholds must be non-negative".into()));
        }
        if self.scan_interval < 1 {
            return Err(Error::Config("scan_interval must be at least 1".into()));
        }
        if self.ransac_iterations < 1 {
            return Err(Error::Config("ransac_iterations must be at least 1".into()));
        }
        Ok(())
    }

    /// Resolve the relative factors against an image resolution.
    pub fn resolve(&self, intrinsics: &CameraIntrinsics) -> Result<ResolvedConfig> {
        self.validate()?;
        if intrinsics.width == 0 || intrinsics.height == 0 {
            return Err(Error::Config("image resolution not set".into()));
        }
        let side = intrinsics.width.min(intrinsics.height) as f64;
        let l = ((self.l_factor * side).round() as usize).max(2);
        Ok(ResolvedConfig {
            base: self.clone(),
            l,
            e1: self.e1_factor * side,
            e2: self.e2_factor * side,
        })
    }

    /// Parse a plain-text `key = value` config file. Unknown keys are rejected
    /// with their line number; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let (key, value) = stripped.split_once('=').ok_or(Error::ConfigLine {
                line,
                message: format!("expected key=value, got '{raw}'"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let bad = |message: String| Error::ConfigLine { line, message };
            let parse_f64 = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| bad(format!("invalid number '{v}' for {key}")))
            };
            match key {
                "l_factor" => cfg.l_factor = parse_f64(value)?,
                "e1_factor" => cfg.e1_factor = parse_f64(value)?,
                "e2_factor" => cfg.e2_factor = parse_f64(value)?,
                "lambda_alpha" => cfg.lambda_alpha = parse_f64(value)?,
                "lambda_d" => cfg.lambda_d = parse_f64(value)?,
                "lambda_c" => {
                    cfg.lambda_c = value
                        .parse()
                        .map_err(|_| bad(format!("invalid integer '{value}' for lambda_c")))?
                }
                "gradient_threshold" => cfg.gradient_threshold = parse_f64(value)?,
                "anchor_threshold" => cfg.anchor_threshold = parse_f64(value)?,
                "scan_interval" => {
                    cfg.scan_interval = value
                        .parse()
                        .map_err(|_| bad(format!("invalid integer '{value}' for scan_interval")))?
                }
                "fold_angle" => {
                    cfg.fold_angle = value
                        .parse()
                        .map_err(|_| bad(format!("invalid bool '{value}' for fold_angle")))?
                }
                "outlier_mode" => {
                    cfg.outlier_mode = value
                        .parse()
                        .map_err(|_| bad(format!("invalid outlier_mode '{value}'")))?
                }
                "ransac_iterations" => {
                    cfg.ransac_iterations = value.parse().map_err(|_| {
                        bad(format!("invalid integer '{value}' for ransac_iterations"))
                    })?
                }
                other => {
                    return Err(Error::ConfigLine {
                        line,
                        message: format!("unknown key '{other}'"),
                    })
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Serialize back to the key=value format (used for the run manifest copy).
    pub fn to_key_values(&self) -> String {
        format!(
            "l_factor={}\ne1_factor={}\ne2_factor={}\nlambda_alpha={}\nlambda_d={}\nlambda_c={}\n\
             gradient_threshold={}\nanchor_threshold={}\nscan_interval={}\nfold_angle={}\n\
             outlier_mode={}\nransac_iterations={}\n",
            self.l_factor,
            self.e1_factor,
            self.e2_factor,
            self.lambda_alpha,
            self.lambda_d,
            self.lambda_c,
            self.gradient_threshold,
            self.anchor_threshold,
            self.scan_interval,
            self.fold_angle,
            self.outlier_mode.as_str(),
            self.ransac_iterations,
        )
    }
}

/// Config with absolute thresholds for one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub base: Config,
    /// Seed length in pixels, integer, at least 2.
    pub l: usize,
    /// Image-plane residual gate in pixels.
    pub e1: f64,
    /// Depth-plane residual gate in Zf units.
    pub e2: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn intr(w: u32, h: u32) -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, w as f64 / 2.0, h as f64 / 2.0, w, h).unwrap()
    }

    #[test]
    fn defaults_resolve_to_standard_schedule_at_vga() {
        let r = Config::default().resolve(&intr(640, 480)).unwrap();
        assert_eq!(r.l, 10);
        assert!((r.e1 - 0.96).abs() < 1e-12);
        assert!((r.e2 - 1.44).abs() < 1e-12);
        assert_eq!(r.base.lambda_alpha, 10.0);
        assert_eq!(r.base.lambda_d, 0.02);
        assert_eq!(r.base.lambda_c, 3);
    }

    #[test]
    fn tiny_resolution_clamps_l() {
        let r = Config::default().resolve(&intr(100, 100)).unwrap();
        assert_eq!(r.l, 2);
        assert!((r.e1 - 0.2).abs() < 1e-12);
        assert!((r.e2 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn l_uses_min_dimension() {
        let cfg = Config {
            l_factor: 0.01,
            ..Config::default()
        };
        let r = cfg.resolve(&intr(1000, 2000)).unwrap();
        assert_eq!(r.l, 10);
    }

    #[test]
    fn non_positive_factor_is_config_error() {
        let cfg = Config {
            e1_factor: 0.0,
            ..Config::default()
        };
        assert!(matches!(cfg.resolve(&intr(640, 480)), Err(Error::Config(_))));
    }

    #[test]
    fn parse_round_trip_and_overrides() {
        let cfg = Config::parse("lambda_d = 0.05\n# comment\nfold_angle=false\n").unwrap();
        assert_eq!(cfg.lambda_d, 0.05);
        assert!(!cfg.fold_angle);
        let again = Config::parse(&cfg.to_key_values()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_key_reports_line_number() {
        let err = Config::parse("l_factor=0.02\nbogus_key=1\n").unwrap_err();
        match err {
            Error::ConfigLine { line, message } => {
                assert_eq!(line, 2);
                assert!(message.contains("bogus_key"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = Config::parse("l_factor\n").unwrap_err();
        assert!(matches!(err, Error::ConfigLine { line: 1, .. }));
    }
}
