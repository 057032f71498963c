use std::sync::OnceLock;

use regex::Regex;

use crate::error::{Error, Result};

pub const LB_TO_KG: f64 = 0.45359237;

/// Relative disagreement tolerated between the pounds and kilograms figures.
const UNIT_AGREEMENT: f64 = 0.02;

const DEFAULT_PATTERN: &str =
    r"(?i)(?P<lb>\d+(?:\.\d+)?)\s*lbs?\s*/\s*(?P<kg>\d+(?:\.\d+)?)\s*kgs?";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BadgeReading {
    Pounds(f64),
    /// Both figures were present but disagree after unit conversion.
    Inconsistent { lb: f64, kg: f64 },
    Unrecognized,
}

impl BadgeReading {
    pub fn pounds(self) -> Option<f64> {
        match self {
            BadgeReading::Pounds(lb) => Some(lb),
            _ => None,
        }
    }
}

/// Extracts reported weight loss from a badge string.
///
/// The pattern must define a named group `lb`; an optional `kg` group is
/// cross-checked against the pounds figure, which is authoritative.
#[derive(Debug, Clone)]
pub struct BadgeParser {
    pattern: Regex,
}

impl Default for BadgeParser {
    fn default() -> Self {
        Self::new(DEFAULT_PATTERN).expect("default badge pattern compiles")
    }
}

impl BadgeParser {
    pub fn new(pattern: &str) -> Result<Self> {
        let pattern =
            Regex::new(pattern).map_err(|e| Error::Config(format!("badge pattern: {e}")))?;
        if !pattern.capture_names().flatten().any(|n| n == "lb") {
            return Err(Error::Config("badge pattern needs a named group `lb`".into()));
        }
        Ok(Self { pattern })
    }

    pub fn pattern(&self) -> &str {
        self.pattern.as_str()
    }

    pub fn parse(&self, text: &str) -> BadgeReading {
        let Some(caps) = self.pattern.captures(text) else {
            return BadgeReading::Unrecognized;
        };
        let Some(lb) = caps.name("lb").and_then(|m| m.as_str().parse::<f64>().ok()) else {
            return BadgeReading::Unrecognized;
        };
        if !lb.is_finite() {
            return BadgeReading::Unrecognized;
        }
        if let Some(kg) = caps.name("kg").and_then(|m| m.as_str().parse::<f64>().ok()) {
            let expected = lb * LB_TO_KG;
            let scale = expected.abs().max(kg.abs());
            if scale > 0.0 && (expected - kg).abs() > UNIT_AGREEMENT * scale {
                return BadgeReading::Inconsistent { lb, kg };
            }
        }
        BadgeReading::Pounds(lb)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InlineWeights {
    pub start_lb: f64,
    pub current_lb: f64,
    pub goal_lb: f64,
}

fn inline_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"(?i)\b(sw|cw|gw)\b\s*[:=\-]?\s*(\d+(?:\.\d+)?)\s*(?:lbs?|pounds)?\b")
            .expect("inline weight pattern compiles")
    })
}

/// Finds the start/current/goal weight convention ("SW: 200 CW: 180 GW: 150")
/// in a post. All three figures must be present.
pub fn parse_inline_weight(text: &str) -> Option<InlineWeights> {
    let (mut sw, mut cw, mut gw) = (None, None, None);
    for caps in inline_pattern().captures_iter(text) {
        let value: f64 = caps[2].parse().ok()?;
        let slot = match caps[1].to_ascii_lowercase().as_str() {
            "sw" => &mut sw,
            "cw" => &mut cw,
            _ => &mut gw,
        };
        slot.get_or_insert(value);
    }
    Some(InlineWeights { start_lb: sw?, current_lb: cw?, goal_lb: gw? })
}
