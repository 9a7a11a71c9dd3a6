//! Model definition files: plain-text key/value sections.
//!
//! ```text
//! [chain]
//! coords = 0; 1; 2
//! matrix = 1,0,0; 0.5,0.5,0; 0,1,0
//!
//! [builtin]
//! name = toy            # or: iid, contraction
//!
//! [wave]
//! modes = 64
//! ```
//!
//! Comments start with `#`. Parse errors carry line numbers.

use crate::coupling::{contraction_toy, ContractionToy};
use crate::error::{RaredynError, Result};
use crate::oracle::{EventConstraint, EventOp, OccupationEvent, Rational};
use crate::wave::WaveConfig;
use crate::{ChainState, FiniteMarkovKernel};

/// Everything a model definition file can declare.
#[derive(Debug, Default)]
pub struct ModelFile {
    pub kernel: Option<FiniteMarkovKernel>,
    pub contraction: Option<ContractionToy>,
    pub wave: Option<WaveConfig>,
    /// Raw text, kept for the canonical digest.
    pub raw: String,
}

struct Entry {
    line: usize,
    key: String,
    value: String,
}

fn fail(line: usize, what: impl Into<String>) -> RaredynError {
    RaredynError::ConfigParse { line, what: what.into() }
}

pub fn parse_model_file(text: &str) -> Result<ModelFile> {
    let mut sections: Vec<(String, usize, Vec<Entry>)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('[') {
            if !line.ends_with(']') {
                return Err(fail(line_no, "unterminated section header"));
            }
            let name = line[1..line.len() - 1].trim().to_ascii_lowercase();
            sections.push((name, line_no, Vec::new()));
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(fail(line_no, format!("expected key = value, got '{line}'")));
        };
        let Some((_, _, entries)) = sections.last_mut() else {
            return Err(fail(line_no, "key/value outside any [section]"));
        };
        entries.push(Entry {
            line: line_no,
            key: key.trim().to_ascii_lowercase(),
            value: value.trim().to_string(),
        });
    }

    let mut model = ModelFile { raw: text.to_string(), ..Default::default() };
    for (name, line, entries) in sections {
        match name.as_str() {
            "chain" => model.kernel = Some(parse_chain(&entries, line)?),
            "builtin" => parse_builtin(&entries, line, &mut model)?,
            "wave" => model.wave = Some(parse_wave(&entries)?),
            other => return Err(fail(line, format!("unknown section [{other}]"))),
        }
    }
    Ok(model)
}

pub fn load_model_file(path: &std::path::Path) -> Result<ModelFile> {
    let text = std::fs::read_to_string(path)?;
    parse_model_file(&text)
}

fn parse_floats(value: &str, line: usize) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| fail(line, format!("bad number '{t}': {e}"))))
        .collect()
}

fn parse_chain(entries: &[Entry], section_line: usize) -> Result<FiniteMarkovKernel> {
    let mut labels: Option<Vec<String>> = None;
    let mut coords: Option<Vec<Vec<f64>>> = None;
    let mut matrix: Option<Vec<Vec<f64>>> = None;
    for e in entries {
        match e.key.as_str() {
            "states" => {
                labels = Some(e.value.split(',').map(|t| t.trim().to_string()).collect());
            }
            "coords" => {
                coords = Some(
                    e.value
                        .split(';')
                        .map(|row| parse_floats(row, e.line))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            "matrix" => {
                matrix = Some(
                    e.value
                        .split(';')
                        .map(|row| parse_floats(row, e.line))
                        .collect::<Result<Vec<_>>>()?,
                );
            }
            other => return Err(fail(e.line, format!("unknown [chain] key '{other}'"))),
        }
    }
    let matrix = matrix.ok_or_else(|| fail(section_line, "[chain] needs a matrix"))?;
    let n = matrix.len();
    let coords = coords.unwrap_or_else(|| (0..n).map(|i| vec![i as f64]).collect());
    let labels = labels.unwrap_or_else(|| (0..n).map(|i| i.to_string()).collect());
    if coords.len() != n || labels.len() != n {
        return Err(fail(section_line, "states/coords/matrix sizes disagree"));
    }
    let states = labels
        .into_iter()
        .zip(coords)
        .map(|(label, coord)| ChainState { label, coord })
        .collect();
    FiniteMarkovKernel::new(states, matrix)
}

fn parse_builtin(entries: &[Entry], section_line: usize, model: &mut ModelFile) -> Result<()> {
    let mut name = None;
    let mut probs: Option<Vec<f64>> = None;
    let mut beta2 = 0.5;
    let mut c1 = 1.0;
    let mut kick_bound = 1.0;
    let mut dim = 1usize;
    for e in entries {
        match e.key.as_str() {
            "name" => name = Some(e.value.to_ascii_lowercase()),
            "probs" => probs = Some(parse_floats(&e.value, e.line)?),
            "beta2" => beta2 = e.value.parse().map_err(|_| fail(e.line, "bad beta2"))?,
            "c1" => c1 = e.value.parse().map_err(|_| fail(e.line, "bad c1"))?,
            "kick_bound" => {
                kick_bound = e.value.parse().map_err(|_| fail(e.line, "bad kick_bound"))?
            }
            "dim" => dim = e.value.parse().map_err(|_| fail(e.line, "bad dim"))?,
            other => return Err(fail(e.line, format!("unknown [builtin] key '{other}'"))),
        }
    }
    match name.as_deref() {
        Some("toy") => model.kernel = Some(FiniteMarkovKernel::toy_chain()),
        Some("iid") => {
            let probs = probs.ok_or_else(|| fail(section_line, "builtin iid needs probs"))?;
            model.kernel = Some(FiniteMarkovKernel::iid(&probs)?);
        }
        Some("contraction") => {
            model.contraction = Some(contraction_toy(beta2, c1, kick_bound, dim)?);
        }
        Some(other) => return Err(fail(section_line, format!("unknown builtin '{other}'"))),
        None => return Err(fail(section_line, "[builtin] needs a name")),
    }
    Ok(())
}

fn parse_wave(entries: &[Entry]) -> Result<WaveConfig> {
    let mut config = WaveConfig::default();
    let mut j_cut_set = false;
    for e in entries {
        let bad = |what: &str| fail(e.line, format!("bad {what} '{}'", e.value));
        match e.key.as_str() {
            "modes" => config.modes = e.value.parse().map_err(|_| bad("modes"))?,
            "noise_modes" => config.noise_modes = e.value.parse().map_err(|_| bad("noise_modes"))?,
            "period" => config.period = e.value.parse().map_err(|_| bad("period"))?,
            "dt_divisions" => {
                config.dt_divisions = e.value.parse().map_err(|_| bad("dt_divisions"))?
            }
            "a0" => config.a0 = e.value.parse().map_err(|_| bad("a0"))?,
            "damp_from" => config.damp_from = e.value.parse().map_err(|_| bad("damp_from"))?,
            "ramp_width" => config.ramp_width = e.value.parse().map_err(|_| bad("ramp_width"))?,
            "chi0" => config.chi0 = e.value.parse().map_err(|_| bad("chi0"))?,
            "decay_exponent" => {
                config.decay_exponent = e.value.parse().map_err(|_| bad("decay_exponent"))?
            }
            "noise_budget" => {
                config.noise_budget = e.value.parse().map_err(|_| bad("noise_budget"))?
            }
            "budget_fraction" => {
                config.budget_fraction = e.value.parse().map_err(|_| bad("budget_fraction"))?
            }
            "amplitude_override" => {
                config.amplitude_override =
                    Some(e.value.parse().map_err(|_| bad("amplitude_override"))?)
            }
            "blowup_guard" => {
                config.blowup_guard = e.value.parse().map_err(|_| bad("blowup_guard"))?
            }
            "cubic" => config.cubic_enabled = parse_bool(&e.value).ok_or_else(|| bad("cubic"))?,
            "constant_damping" => {
                config.constant_damping = if e.value.eq_ignore_ascii_case("none") {
                    None
                } else {
                    Some(e.value.parse().map_err(|_| bad("constant_damping"))?)
                }
            }
            "j_cut" => {
                config.j_cut = e.value.parse().map_err(|_| bad("j_cut"))?;
                j_cut_set = true;
            }
            other => return Err(fail(e.line, format!("unknown [wave] key '{other}'"))),
        }
    }
    if !j_cut_set {
        config.j_cut = 2 * config.noise_modes;
    }
    Ok(config)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Some(true),
        "false" | "off" | "no" | "0" => Some(false),
        _ => None,
    }
}

/// Exact rational from a decimal or fraction literal: `0.9` -> 9/10,
/// `3/10` -> 3/10, `2` -> 2/1.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: i64 = num.trim().parse().map_err(|_| RaredynError::Config(format!("bad rational '{s}'")))?;
        let d: i64 = den.trim().parse().map_err(|_| RaredynError::Config(format!("bad rational '{s}'")))?;
        if d == 0 {
            return Err(RaredynError::Config(format!("zero denominator in '{s}'")));
        }
        return Ok(Rational::new(n, d));
    }
    let negative = s.starts_with('-');
    let body = s.trim_start_matches(['-', '+']);
    let (int_part, frac_part) = match body.split_once('.') {
        Some((i, f)) => (i, f),
        None => (body, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(RaredynError::Config(format!("bad rational '{s}'")));
    }
    let int: i64 = if int_part.is_empty() {
        0
    } else {
        int_part.parse().map_err(|_| RaredynError::Config(format!("bad rational '{s}'")))?
    };
    let mut num = int;
    let mut den = 1i64;
    for c in frac_part.chars() {
        let digit =
            c.to_digit(10).ok_or_else(|| RaredynError::Config(format!("bad rational '{s}'")))? as i64;
        num = num
            .checked_mul(10)
            .and_then(|n| n.checked_add(digit))
            .ok_or_else(|| RaredynError::Config(format!("rational '{s}' overflows")))?;
        den = den
            .checked_mul(10)
            .ok_or_else(|| RaredynError::Config(format!("rational '{s}' overflows")))?;
    }
    let r = Rational::new(num, den);
    Ok(if negative { -r } else { r })
}

/// Parse an event clause `c<idx> <op> <rational>`, e.g. `c1>=0.9`.
pub fn parse_event_clause(s: &str, n_states: usize) -> Result<EventConstraint> {
    let s = s.trim();
    let ops = [(">=", EventOp::Ge), ("<=", EventOp::Le), ("==", EventOp::Eq), (">", EventOp::Gt), ("<", EventOp::Lt)];
    for (tok, op) in ops {
        if let Some((lhs, rhs)) = s.split_once(tok) {
            let lhs = lhs.trim();
            let idx: usize = lhs
                .strip_prefix('c')
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| RaredynError::Config(format!("bad event coordinate '{lhs}'")))?;
            if idx >= n_states {
                return Err(RaredynError::Config(format!(
                    "event coordinate c{idx} out of range for {n_states} states"
                )));
            }
            let threshold = parse_rational(rhs)?;
            let mut coeffs = vec![Rational::from_integer(0); n_states];
            coeffs[idx] = Rational::from_integer(1);
            return Ok(EventConstraint { coeffs, op, threshold });
        }
    }
    Err(RaredynError::Config(format!("no comparison operator in event '{s}'")))
}

/// Conjunction of parsed clauses.
pub fn parse_event(clauses: &[String], n_states: usize) -> Result<OccupationEvent> {
    let constraints =
        clauses.iter().map(|c| parse_event_clause(c, n_states)).collect::<Result<Vec<_>>>()?;
    Ok(OccupationEvent::new(constraints))
}
