//! Line-oriented network description.
//!
//! ```text
//! # comments and blank lines are ignored
//! input height=768 width=768 channels=3
//! encoder stride=16 channels=8,16,32,64
//! head aspp rate=6 branches=32 image_pool=on
//! classes 19
//! seed 42
//! ```
//!
//! `head fcn_d6 rate=6 channels=32 relu=on` selects the stacked-atrous head
//! instead. Exactly one `head` line is required. Missing lines default to
//! `input 768x768x3`, `encoder stride=16 channels=8,16,32,64`, `classes 2`
//! (with a warning) and `seed 0`. Every problem is reported with its line number.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ConfigError, Error, Result};
use crate::graph::{self, AsppSpec, FcnD6Spec, NetworkGraph};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderPlan {
    pub stride: usize,
    pub channels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadPlan {
    Aspp { rate: usize, branches: usize, image_pool: bool },
    FcnD6 { rate: usize, channels: usize, relu: bool },
}

impl HeadPlan {
    pub fn rate(&self) -> usize {
        match self {
            HeadPlan::Aspp { rate, .. } | HeadPlan::FcnD6 { rate, .. } => *rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkPlan {
    pub height: usize,
    pub width: usize,
    pub in_channels: usize,
    pub encoder: EncoderPlan,
    pub head: HeadPlan,
    pub classes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedConfig {
    pub plan: NetworkPlan,
    pub warnings: Vec<String>,
}

pub const DEFAULT_SIZE: usize = 768;
pub const DEFAULT_ENCODER_CHANNELS: [usize; 5] = [8, 16, 32, 64, 128];
pub const DEFAULT_BRANCHES: usize = 32;
pub const DEFAULT_CLASSES: usize = 2;

impl NetworkPlan {
    /// Canonical text form; parsing it yields the same plan.
    pub fn to_config_text(&self) -> String {
        let mut s = String::new();
        let chans: Vec<String> = self.encoder.channels.iter().map(ToString::to_string).collect();
        let _ = writeln!(s, "input height={} width={} channels={}", self.height, self.width, self.in_channels);
        let _ = writeln!(s, "encoder stride={} channels={}", self.encoder.stride, chans.join(","));
        let on = |b: bool| if b { "on" } else { "off" };
        match &self.head {
            HeadPlan::Aspp { rate, branches, image_pool } => {
                let _ = writeln!(s, "head aspp rate={rate} branches={branches} image_pool={}", on(*image_pool));
            }
            HeadPlan::FcnD6 { rate, channels, relu } => {
                let _ = writeln!(s, "head fcn_d6 rate={rate} channels={channels} relu={}", on(*relu));
            }
        }
        let _ = writeln!(s, "classes {}", self.classes);
        let _ = writeln!(s, "seed {}", self.seed);
        s
    }

    /// SHA-256 of the canonical text, hex encoded.
    pub fn digest(&self) -> String {
        let hash = Sha256::digest(self.to_config_text().as_bytes());
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn with_size(&self, height: usize, width: usize) -> Self {
        Self { height, width, ..self.clone() }
    }

    pub fn build(&self) -> Result<NetworkGraph> {
        let stages = self.encoder.stride.trailing_zeros() as usize;
        let encoder = graph::build_encoder(self.encoder.stride, &self.encoder.channels, self.in_channels, self.seed)?;
        let feat = if stages == 0 { self.in_channels } else { self.encoder.channels[stages - 1] };
        let head = match self.head {
            HeadPlan::Aspp { rate, branches, image_pool } => {
                let spec = AsppSpec { base_rate: rate, branch_channels: branches, in_channels: feat, image_pool, seed: self.seed };
                graph::build_aspp_head(&spec, self.classes)?
            }
            HeadPlan::FcnD6 { rate, channels, relu } => {
                let spec = FcnD6Spec { rate, in_channels: feat, mid_channels: channels, relu, seed: self.seed };
                graph::build_fcn_d6_head(&spec, self.classes)?
            }
        };
        graph::assemble(&encoder, &head, self.height, self.width)
    }
}

pub fn parse_network_config(path: &Path) -> Result<ParsedConfig> {
    parse_network_text(&std::fs::read_to_string(path)?)
}

struct Line<'a> {
    number: usize,
    directive: &'a str,
    words: Vec<&'a str>,
}

impl Line<'_> {
    /// `key=value` pairs; bare words are returned separately.
    fn split(&self, errors: &mut Vec<ConfigError>) -> (HashMap<String, String>, Vec<String>) {
        let mut kv = HashMap::new();
        let mut bare = Vec::new();
        for w in &self.words {
            match w.split_once('=') {
                Some((k, v)) => {
                    if kv.insert(k.to_string(), v.to_string()).is_some() {
                        errors.push(err(self.number, format!("key `{k}` given twice")));
                    }
                }
                None => bare.push((*w).to_string()),
            }
        }
        (kv, bare)
    }
}

fn err(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError { line, message: message.into() }
}

fn positive(line: usize, key: &str, value: &str, errors: &mut Vec<ConfigError>) -> Option<usize> {
    match value.parse::<usize>() {
        Ok(v) if v >= 1 => Some(v),
        _ => {
            errors.push(err(line, format!("`{key}` must be a positive integer, got `{value}`")));
            None
        }
    }
}

fn switch(line: usize, key: &str, value: &str, errors: &mut Vec<ConfigError>) -> Option<bool> {
    match value {
        "on" | "true" | "yes" => Some(true),
        "off" | "false" | "no" => Some(false),
        _ => {
            errors.push(err(line, format!("`{key}` must be on or off, got `{value}`")));
            None
        }
    }
}

fn reject_unknown(line: &Line, kv: &HashMap<String, String>, allowed: &[&str], errors: &mut Vec<ConfigError>) {
    let mut unknown: Vec<&String> = kv.keys().filter(|k| !allowed.contains(&k.as_str())).collect();
    unknown.sort();
    for k in unknown {
        errors.push(err(line.number, format!("unknown key `{k}` for `{}`", line.directive)));
    }
}

fn single_value<'a>(line: &'a Line, errors: &mut Vec<ConfigError>) -> Option<&'a str> {
    match line.words.as_slice() {
        [v] => Some(v),
        _ => {
            errors.push(err(line.number, format!("`{}` takes exactly one value", line.directive)));
            None
        }
    }
}

pub fn parse_network_text(text: &str) -> Result<ParsedConfig> {
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();

    let mut size = (DEFAULT_SIZE, DEFAULT_SIZE, 3);
    let mut encoder: Option<EncoderPlan> = None;
    let mut head: Option<HeadPlan> = None;
    let mut classes: Option<usize> = None;
    let mut seed: u64 = 0;

    for (idx, raw) in text.lines().enumerate() {
        let number = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let directive = parts.next().expect("non-empty line has a first word");
        let line = Line { number, directive, words: parts.collect() };

        if let Some(prev) = seen.insert(directive, number) {
            let what = if directive == "head" { "conflicting `head` lines" } else { "duplicate line" };
            errors.push(err(number, format!("{what}: `{directive}` already given on line {prev}")));
            continue;
        }

        match directive {
            "input" => {
                let (kv, bare) = line.split(&mut errors);
                reject_unknown(&line, &kv, &["height", "width", "channels", "size"], &mut errors);
                for b in bare {
                    errors.push(err(number, format!("unexpected word `{b}`")));
                }
                if let Some(v) = kv.get("size") {
                    if let Some(v) = positive(number, "size", v, &mut errors) {
                        size.0 = v;
                        size.1 = v;
                    }
                }
                if let Some(v) = kv.get("height").and_then(|v| positive(number, "height", v, &mut errors)) {
                    size.0 = v;
                }
                if let Some(v) = kv.get("width").and_then(|v| positive(number, "width", v, &mut errors)) {
                    size.1 = v;
                }
                if let Some(v) = kv.get("channels").and_then(|v| positive(number, "channels", v, &mut errors)) {
                    size.2 = v;
                }
            }
            "encoder" => {
                let (kv, bare) = line.split(&mut errors);
                reject_unknown(&line, &kv, &["stride", "channels"], &mut errors);
                for b in bare {
                    errors.push(err(number, format!("unexpected word `{b}`")));
                }
                let stride = match kv.get("stride") {
                    Some(v) => match positive(number, "stride", v, &mut errors) {
                        Some(s) if matches!(s, 1 | 2 | 4 | 8 | 16 | 32) => Some(s),
                        Some(s) => {
                            errors.push(err(number, format!("stride must be a power of two in 1..=32, got {s}")));
                            None
                        }
                        None => None,
                    },
                    None => {
                        errors.push(err(number, "`encoder` needs `stride=`"));
                        None
                    }
                };
                let channels = match kv.get("channels") {
                    Some(v) => {
                        let parsed: Option<Vec<usize>> =
                            v.split(',').map(|c| positive(number, "channels", c.trim(), &mut errors)).collect();
                        parsed
                    }
                    None => Some(DEFAULT_ENCODER_CHANNELS.to_vec()),
                };
                if let (Some(stride), Some(channels)) = (stride, channels) {
                    let stages = stride.trailing_zeros() as usize;
                    if channels.len() < stages {
                        errors.push(err(
                            number,
                            format!("stride {stride} needs {stages} channel widths, got {}", channels.len()),
                        ));
                    } else {
                        encoder = Some(EncoderPlan { stride, channels });
                    }
                }
            }
            "head" => {
                let Some((&kind, rest)) = line.words.split_first() else {
                    errors.push(err(number, "`head` needs a kind: aspp or fcn_d6"));
                    continue;
                };
                let sub = Line { number, directive: "head", words: rest.to_vec() };
                let (kv, bare) = sub.split(&mut errors);
                for b in bare {
                    errors.push(err(number, format!("unexpected word `{b}`")));
                }
                let rate = match kv.get("rate") {
                    Some(v) => positive(number, "rate", v, &mut errors),
                    None => {
                        errors.push(err(number, "`head` needs `rate=`"));
                        None
                    }
                };
                match kind {
                    "aspp" => {
                        reject_unknown(&sub, &kv, &["rate", "branches", "image_pool"], &mut errors);
                        let branches = kv
                            .get("branches")
                            .map_or(Some(DEFAULT_BRANCHES), |v| positive(number, "branches", v, &mut errors));
                        let image_pool =
                            kv.get("image_pool").map_or(Some(true), |v| switch(number, "image_pool", v, &mut errors));
                        if let (Some(rate), Some(branches), Some(image_pool)) = (rate, branches, image_pool) {
                            head = Some(HeadPlan::Aspp { rate, branches, image_pool });
                        }
                    }
                    "fcn_d6" => {
                        reject_unknown(&sub, &kv, &["rate", "channels", "relu"], &mut errors);
                        let channels = kv
                            .get("channels")
                            .map_or(Some(DEFAULT_BRANCHES), |v| positive(number, "channels", v, &mut errors));
                        let relu = kv.get("relu").map_or(Some(true), |v| switch(number, "relu", v, &mut errors));
                        if let (Some(rate), Some(channels), Some(relu)) = (rate, channels, relu) {
                            head = Some(HeadPlan::FcnD6 { rate, channels, relu });
                        }
                    }
                    other => errors.push(err(number, format!("unknown head kind `{other}`"))),
                }
            }
            "classes" => {
                if let Some(v) = single_value(&line, &mut errors) {
                    classes = positive(number, "classes", v, &mut errors);
                }
            }
            "seed" => {
                if let Some(v) = single_value(&line, &mut errors) {
                    match v.parse::<u64>() {
                        Ok(s) => seed = s,
                        Err(_) => errors.push(err(number, format!("`seed` must be an unsigned integer, got `{v}`"))),
                    }
                }
            }
            other => errors.push(err(number, format!("unknown directive `{other}`"))),
        }
    }

    if !seen.contains_key("head") {
        errors.push(err(0, "missing `head` line"));
    }
    if !errors.is_empty() {
        errors.sort_by_key(|e| e.line);
        return Err(Error::Config(errors));
    }
    let encoder = encoder.unwrap_or_else(|| {
        warnings.push("no `encoder` line; using stride=16 channels=8,16,32,64,128".to_string());
        EncoderPlan { stride: 16, channels: DEFAULT_ENCODER_CHANNELS.to_vec() }
    });
    let classes = classes.unwrap_or_else(|| {
        warnings.push(format!("no `classes` line; defaulting to {DEFAULT_CLASSES}"));
        DEFAULT_CLASSES
    });
    let plan = NetworkPlan {
        height: size.0,
        width: size.1,
        in_channels: size.2,
        encoder,
        head: head.expect("head presence checked above"),
        classes,
        seed,
    };
    Ok(ParsedConfig { plan, warnings })
}
