//! Contest-stream ingestion, synthetic data generation, and state
//! persistence.
//!
//! Contest file format (line-oriented, `#` starts a comment):
//!
//! ```text
//! c1 : [A] [B C] [D]
//! c2 beta=150 time=1600000000 : [B] [A]
//! ```
//!
//! Each line is one contest: an id, optional `beta=`/`time=` attributes, a
//! colon, then tie-groups in finish order with player ids inside brackets.
//!
//! Checkpoint format: a `mmr-checkpoint v1` header line, then one line per
//! player (`id p0 w0 mu sigma contests last_round k` followed by `k`
//! `center scale weight` triples). Floats are written in shortest
//! round-trip form, so a save/load cycle is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::player_state::{PerformanceFactor, PlayerState};
use crate::system::{valid_player_id, ContestStandings, PlayerMap};

const CHECKPOINT_HEADER: &str = "mmr-checkpoint v1";
const SKILLS_HEADER: &str = "mmr-skills v1";

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("checkpoint version mismatch: expected {expected:?}, found {found:?}")]
    Version { expected: String, found: String },
    #[error("corrupt checkpoint at line {line}: {msg}")]
    Corrupt { line: usize, msg: String },
}

fn parse_err(line: usize, msg: impl Into<String>) -> DataError {
    DataError::Parse {
        line,
        msg: msg.into(),
    }
}

/// One parsed contest line.
#[derive(Debug, Clone, PartialEq)]
pub struct ContestRecord {
    pub id: String,
    pub standings: Vec<Vec<String>>,
    pub beta_override: Option<f64>,
    pub timestamp: Option<i64>,
}

impl ContestRecord {
    /// Binds the record to its position in the round stream.
    pub fn to_standings(&self, index: usize) -> ContestStandings {
        ContestStandings {
            contest_id: self.id.clone(),
            index,
            standings: self.standings.clone(),
            beta_override: self.beta_override,
        }
    }
}

/// Parses one contest per non-comment line, preserving order.
pub fn parse_contests(path: &Path) -> Result<Vec<ContestRecord>, DataError> {
    let text = fs::read_to_string(path)?;
    parse_contests_str(&text)
}

pub fn parse_contests_str(text: &str) -> Result<Vec<ContestRecord>, DataError> {
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let colon = content
            .find(':')
            .ok_or_else(|| parse_err(line, "missing ':' between header and standings"))?;
        let (header, body) = (&content[..colon], &content[colon + 1..]);
        let mut header_tokens = header.split_whitespace();
        let id = header_tokens
            .next()
            .ok_or_else(|| parse_err(line, "missing contest id"))?
            .to_string();
        let mut beta_override = None;
        let mut timestamp = None;
        for token in header_tokens {
            if let Some(v) = token.strip_prefix("beta=") {
                let b: f64 = v
                    .parse()
                    .map_err(|_| parse_err(line, format!("bad beta value {v:?}")))?;
                if !(b > 0.0) {
                    return Err(parse_err(line, format!("beta must be positive, got {b}")));
                }
                beta_override = Some(b);
            } else if let Some(v) = token.strip_prefix("time=") {
                timestamp = Some(
                    v.parse()
                        .map_err(|_| parse_err(line, format!("bad time value {v:?}")))?,
                );
            } else {
                return Err(parse_err(line, format!("unknown attribute {token:?}")));
            }
        }
        let standings = parse_groups(body, line)?;
        let record = ContestRecord {
            id,
            standings,
            beta_override,
            timestamp,
        };
        record
            .to_standings(out.len())
            .validate()
            .map_err(|e| parse_err(line, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

fn parse_groups(body: &str, line: usize) -> Result<Vec<Vec<String>>, DataError> {
    let mut groups = Vec::new();
    let mut rest = body.trim();
    while !rest.is_empty() {
        if !rest.starts_with('[') {
            return Err(parse_err(
                line,
                format!("expected '[' at {:?}", rest.chars().take(10).collect::<String>()),
            ));
        }
        let close = rest
            .find(']')
            .ok_or_else(|| parse_err(line, "unterminated tie-group"))?;
        let inner = &rest[1..close];
        let ids: Vec<String> = inner.split_whitespace().map(|s| s.to_string()).collect();
        if ids.is_empty() {
            return Err(parse_err(line, "empty tie-group"));
        }
        groups.push(ids);
        rest = rest[close + 1..].trim_start();
    }
    if groups.is_empty() {
        return Err(parse_err(line, "contest has no tie-groups"));
    }
    Ok(groups)
}

/// Renders a record in the contest file format.
pub fn format_contest(record: &ContestRecord) -> String {
    let mut line = record.id.clone();
    if let Some(b) = record.beta_override {
        line.push_str(&format!(" beta={b}"));
    }
    if let Some(t) = record.timestamp {
        line.push_str(&format!(" time={t}"));
    }
    line.push_str(" :");
    for group in &record.standings {
        line.push_str(" [");
        line.push_str(&group.join(" "));
        line.push(']');
    }
    line
}

pub fn write_contests(path: &Path, records: &[ContestRecord]) -> Result<(), DataError> {
    let mut out = fs::File::create(path)?;
    for r in records {
        writeln!(out, "{}", format_contest(r))?;
    }
    Ok(())
}

/// Which players enter each synthetic round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Participation {
    All,
    /// Each player participates independently with this probability.
    Fraction(f64),
}

/// Parameters of the latent-skill generative model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticConfig {
    pub num_players: usize,
    pub num_rounds: usize,
    pub skill_mean: f64,
    /// Standard deviation of initial skills.
    pub skill_spread: f64,
    /// Standard deviation of per-round performance noise.
    pub perf_spread: f64,
    /// Standard deviation of per-round skill increments.
    pub drift_spread: f64,
    pub participation: Participation,
    pub seed: u64,
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.num_players == 0 || self.num_rounds == 0 {
            return Err("num_players and num_rounds must be positive".into());
        }
        for (name, v) in [
            ("skill_spread", self.skill_spread),
            ("perf_spread", self.perf_spread),
            ("drift_spread", self.drift_spread),
        ] {
            if !(v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if let Participation::Fraction(f) = self.participation {
            if !(f > 0.0 && f <= 1.0) {
                return Err(format!("participation fraction must be in (0,1], got {f}"));
            }
        }
        Ok(())
    }
}

/// A generated contest stream with its ground-truth skills.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    pub player_ids: Vec<String>,
    pub contests: Vec<ContestRecord>,
    /// `skills[t][i]`: skill of player `i` during round `t`.
    pub skills: Vec<Vec<f64>>,
}

/// Draws a contest stream from the generative model: initial skills from a
/// Gaussian prior, performances as skill plus independent Gaussian noise
/// (their descending order is the standings), and i.i.d. Gaussian skill
/// increments between rounds. Deterministic given the seed.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> SyntheticDataset {
    cfg.validate().expect("invalid synthetic config");
    let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
    let init = Normal::new(cfg.skill_mean, cfg.skill_spread).unwrap();
    let perf = Normal::new(0.0, cfg.perf_spread).unwrap();
    let drift = Normal::new(0.0, cfg.drift_spread).unwrap();

    let width = cfg.num_players.to_string().len().max(2);
    let player_ids: Vec<String> = (0..cfg.num_players)
        .map(|i| format!("p{i:0width$}"))
        .collect();
    let round_width = cfg.num_rounds.to_string().len().max(2);

    let mut skills: Vec<f64> = (0..cfg.num_players).map(|_| init.sample(&mut rng)).collect();
    let mut skill_rows = Vec::with_capacity(cfg.num_rounds);
    let mut contests = Vec::with_capacity(cfg.num_rounds);

    for t in 0..cfg.num_rounds {
        skill_rows.push(skills.clone());
        let entrants: Vec<usize> = match cfg.participation {
            Participation::All => (0..cfg.num_players).collect(),
            Participation::Fraction(f) => (0..cfg.num_players)
                .filter(|_| rng.random_bool(f))
                .collect(),
        };
        let mut performances: Vec<(f64, usize)> = entrants
            .iter()
            .map(|&i| (skills[i] + perf.sample(&mut rng), i))
            .collect();
        performances.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        // Ties only on exact equality, a probability-zero event.
        let mut standings: Vec<Vec<String>> = Vec::new();
        let mut last_perf = f64::INFINITY;
        for (p, i) in performances {
            if p == last_perf {
                standings.last_mut().unwrap().push(player_ids[i].clone());
            } else {
                standings.push(vec![player_ids[i].clone()]);
                last_perf = p;
            }
        }
        if !standings.is_empty() {
            contests.push(ContestRecord {
                id: format!("r{t:0round_width$}"),
                standings,
                beta_override: None,
                timestamp: None,
            });
        }
        for s in skills.iter_mut() {
            *s += drift.sample(&mut rng);
        }
    }
    SyntheticDataset {
        player_ids,
        contests,
        skills: skill_rows,
    }
}

/// Writes the ground-truth skill sidecar (`round player skill` rows).
pub fn write_skills(path: &Path, dataset: &SyntheticDataset) -> Result<(), DataError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{SKILLS_HEADER}")?;
    for (t, row) in dataset.skills.iter().enumerate() {
        for (i, s) in row.iter().enumerate() {
            writeln!(out, "{t} {} {s}", dataset.player_ids[i])?;
        }
    }
    Ok(())
}

/// Saves all player states, one line per player in id order.
pub fn save_checkpoint(states: &PlayerMap, path: &Path) -> Result<(), DataError> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{CHECKPOINT_HEADER}")?;
    for (id, s) in states {
        write!(
            out,
            "{id} {} {} {} {} {} {} {}",
            s.gaussian_center,
            s.gaussian_weight,
            s.mu,
            s.sigma,
            s.contest_count,
            s.last_update_round,
            s.logistic_factors.len()
        )?;
        for f in &s.logistic_factors {
            write!(out, " {} {} {}", f.center, f.scale, f.weight)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<PlayerMap, DataError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines.next().map(|(_, l)| l.trim()).unwrap_or("");
    if header != CHECKPOINT_HEADER {
        return Err(DataError::Version {
            expected: CHECKPOINT_HEADER.to_string(),
            found: header.to_string(),
        });
    }
    let mut states = PlayerMap::new();
    for (lineno, raw) in lines {
        let line = lineno + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let corrupt = |msg: String| DataError::Corrupt { line, msg };
        let mut tok = raw.split_whitespace();
        let id = tok.next().ok_or_else(|| corrupt("missing id".into()))?;
        if !valid_player_id(id) {
            return Err(corrupt(format!("invalid player id {id:?}")));
        }
        let mut next_f64 = |tok: &mut std::str::SplitWhitespace, what: &str| -> Result<f64, DataError> {
            let t = tok
                .next()
                .ok_or_else(|| DataError::Corrupt {
                    line,
                    msg: format!("missing {what}"),
                })?;
            let v: f64 = t.parse().map_err(|_| DataError::Corrupt {
                line,
                msg: format!("bad {what}: {t:?}"),
            })?;
            if !v.is_finite() {
                return Err(DataError::Corrupt {
                    line,
                    msg: format!("non-finite {what}: {v}"),
                });
            }
            Ok(v)
        };
        let gaussian_center = next_f64(&mut tok, "gaussian center")?;
        let gaussian_weight = next_f64(&mut tok, "gaussian weight")?;
        let mu = next_f64(&mut tok, "mu")?;
        let sigma = next_f64(&mut tok, "sigma")?;
        let contest_count: u32 = tok
            .next()
            .ok_or_else(|| corrupt("missing contest count".into()))?
            .parse()
            .map_err(|_| corrupt("bad contest count".into()))?;
        let last_update_round: i64 = tok
            .next()
            .ok_or_else(|| corrupt("missing last round".into()))?
            .parse()
            .map_err(|_| corrupt("bad last round".into()))?;
        let n_factors: usize = tok
            .next()
            .ok_or_else(|| corrupt("missing factor count".into()))?
            .parse()
            .map_err(|_| corrupt("bad factor count".into()))?;
        let mut logistic_factors = std::collections::VecDeque::with_capacity(n_factors);
        for k in 0..n_factors {
            let center = next_f64(&mut tok, &format!("factor {k} center"))?;
            let scale = next_f64(&mut tok, &format!("factor {k} scale"))?;
            let weight = next_f64(&mut tok, &format!("factor {k} weight"))?;
            if !(scale > 0.0) || !(weight > 0.0) {
                return Err(corrupt(format!("factor {k} has non-positive scale/weight")));
            }
            logistic_factors.push_back(PerformanceFactor {
                center,
                scale,
                weight,
            });
        }
        if tok.next().is_some() {
            return Err(corrupt("trailing tokens".into()));
        }
        if states
            .insert(
                id.to_string(),
                PlayerState {
                    gaussian_center,
                    gaussian_weight,
                    logistic_factors,
                    mu,
                    sigma,
                    contest_count,
                    last_update_round,
                },
            )
            .is_some()
        {
            return Err(corrupt(format!("duplicate player {id}")));
        }
    }
    Ok(states)
}
