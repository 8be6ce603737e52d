use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use super::policy::TransformPolicy;
use crate::error::{Error, Result};
use crate::saliency::SaliencyStrategy;

pub const DEFAULT_TAU: f64 = 0.6;
pub const DEFAULT_REGION: usize = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    KeepCutout,
    KeepErase,
    KeepPaste,
    KeepCutmix,
    PlainCutout,
    PlainErase,
    PlainPolicy,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::KeepCutout,
        Mode::KeepErase,
        Mode::KeepPaste,
        Mode::KeepCutmix,
        Mode::PlainCutout,
        Mode::PlainErase,
        Mode::PlainPolicy,
    ];

    /// Whether the mode reads a saliency map.
    pub fn needs_saliency(self) -> bool {
        matches!(self, Mode::KeepCutout | Mode::KeepErase | Mode::KeepPaste | Mode::KeepCutmix)
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::KeepCutout => "keep-cutout",
            Mode::KeepErase => "keep-erase",
            Mode::KeepPaste => "keep-paste",
            Mode::KeepCutmix => "keep-cutmix",
            Mode::PlainCutout => "plain-cutout",
            Mode::PlainErase => "plain-erase",
            Mode::PlainPolicy => "plain-policy",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == name)
            .ok_or_else(|| Error::invalid(format!("unknown mode `{name}`")))
    }
}

/// Region height and width. Accepts `16` or `[16, 8]` in JSON; always written as a pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RegionSize {
    pub height: usize,
    pub width: usize,
}

impl RegionSize {
    pub fn square(side: usize) -> Self {
        Self {
            height: side,
            width: side,
        }
    }
}

impl Serialize for RegionSize {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        [self.height, self.width].serialize(s)
    }
}

impl<'de> Deserialize<'de> for RegionSize {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Side(usize),
            Pair([usize; 2]),
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Side(s) => RegionSize::square(s),
            Repr::Pair([height, width]) => RegionSize { height, width },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub mode: Mode,
    pub tau: f64,
    /// Cut length for the cutout family, paste-back size for keep-paste.
    pub region: RegionSize,
    pub policy: TransformPolicy,
    pub saliency: SaliencyStrategy,
    pub seed: u64,
    /// Candidate stride; `None` picks 1 up to 64 px and 2 above.
    pub stride: Option<usize>,
    pub parallelism: usize,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::KeepCutout,
            tau: DEFAULT_TAU,
            region: RegionSize::square(DEFAULT_REGION),
            policy: TransformPolicy::default(),
            saliency: SaliencyStrategy::Full,
            seed: 0,
            stride: None,
            parallelism: 1,
        }
    }
}

const KEYS: [&str; 8] = ["mode", "tau", "region", "policy", "saliency", "seed", "stride", "parallelism"];

fn field<T: for<'de> Deserialize<'de>>(key: &str, v: Value) -> Result<T> {
    serde_json::from_value(v).map_err(|e| Error::Config {
        key: key.into(),
        message: e.to_string(),
    })
}

impl AugmentConfig {
    /// Parses a JSON object. Unknown keys and invalid values name the offending key;
    /// missing keys take their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let Value::Object(map) = value else {
            return Err(Error::Config {
                key: "<root>".into(),
                message: "config must be a JSON object".into(),
            });
        };
        Self::from_map(map)
    }

    fn from_map(map: Map<String, Value>) -> Result<Self> {
        if let Some(bad) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::Config {
                key: bad.clone(),
                message: format!("unknown key; expected one of {}", KEYS.join(", ")),
            });
        }
        let mut cfg = AugmentConfig::default();
        for (key, v) in map {
            match key.as_str() {
                "mode" => cfg.mode = field(&key, v)?,
                "tau" => cfg.tau = field(&key, v)?,
                "region" => cfg.region = field(&key, v)?,
                "policy" => cfg.policy = field(&key, v)?,
                "saliency" => cfg.saliency = field(&key, v)?,
                "seed" => cfg.seed = field(&key, v)?,
                "stride" => cfg.stride = field(&key, v)?,
                "parallelism" => cfg.parallelism = field(&key, v)?,
                _ => unreachable!(),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes") + "\n"
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |key: &str, message: String| {
            Err(Error::Config {
                key: key.into(),
                message,
            })
        };
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau", format!("must lie in (0, 1), got {}", self.tau));
        }
        if self.region.height == 0 || self.region.width == 0 {
            return bad("region", "dims must be positive".into());
        }
        if self.stride == Some(0) {
            return bad("stride", "must be positive".into());
        }
        if self.parallelism == 0 {
            return bad("parallelism", "must be positive".into());
        }
        if let SaliencyStrategy::LowRes { factor: 0 } = self.saliency {
            return bad("saliency", "low-res factor must be positive".into());
        }
        self.policy.validate().or_else(|e| bad("policy", e.to_string()))
    }

    /// Checks that the region fits `height x width` images.
    pub fn check_fits(&self, height: usize, width: usize) -> Result<()> {
        if self.region.height > height || self.region.width > width {
            return Err(Error::invalid(format!(
                "region {}x{} does not fit in a {height}x{width} image",
                self.region.height, self.region.width
            )));
        }
        Ok(())
    }

    pub fn stride_for(&self, height: usize, width: usize) -> usize {
        self.stride
            .unwrap_or(if height.max(width) <= 64 { 1 } else { 2 })
    }
}
