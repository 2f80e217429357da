//! Episode logs and their versioned CSV form.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

pub const EPISODE_SCHEMA: &str = "rift-episode-v1";

const COLUMNS: [&str; 17] = [
    "step",
    "time",
    "id",
    "role",
    "x",
    "y",
    "heading",
    "v",
    "a",
    "yaw_rate",
    "a_lat",
    "length",
    "width",
    "offroad",
    "collision_with",
    "selected",
    "probs",
];
const TARGET_SPEED_COLUMN: &str = "target_speed";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Role {
    #[serde(rename = "AV")]
    Av,
    #[serde(rename = "BV")]
    Bv,
    #[serde(rename = "CBV")]
    Cbv,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Av => "AV",
            Role::Bv => "BV",
            Role::Cbv => "CBV",
        })
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "AV" => Ok(Role::Av),
            "BV" => Ok(Role::Bv),
            "CBV" => Ok(Role::Cbv),
            _ => Err(Error::Parse(format!("unknown role '{s}'"))),
        }
    }
}

/// One agent at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRow {
    pub id: u32,
    pub role: Role,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    /// Longitudinal acceleration.
    pub a: f64,
    pub yaw_rate: f64,
    pub a_lat: f64,
    pub length: f64,
    pub width: f64,
    pub offroad: bool,
    /// Ids of agents whose boxes overlap this one.
    pub collision_with: Vec<u32>,
    /// Candidate chosen at this step (controlled agents only).
    pub selected: Option<usize>,
    pub probs: Vec<f64>,
    /// Free-flow speed of the lane the agent is on.
    pub target_speed: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub agents: Vec<AgentRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub scenario: String,
    pub episode: u64,
    pub seed: u64,
    pub dt: f64,
    pub steps: Vec<StepRecord>,
}

impl EpisodeLog {
    /// Time series of one agent as `(step index, row)` pairs.
    pub fn track(&self, id: u32) -> Vec<(usize, &AgentRow)> {
        self.steps
            .iter()
            .enumerate()
            .filter_map(|(k, s)| s.agents.iter().find(|a| a.id == id).map(|a| (k, a)))
            .collect()
    }

    /// Ids with the given role, ascending.
    pub fn ids_with_role(&self, role: Role) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .steps
            .iter()
            .flat_map(|s| s.agents.iter().filter(|a| a.role == role).map(|a| a.id))
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Checks time spacing and that each agent keeps one role.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Parse("episode log dt must be positive".into()));
        }
        let mut roles = std::collections::BTreeMap::new();
        for (k, s) in self.steps.iter().enumerate() {
            if k > 0 {
                let gap = s.time - self.steps[k - 1].time;
                if !(gap > 0.0) || (gap - self.dt).abs() > 1e-6 {
                    return Err(Error::Parse(format!(
                        "step {} breaks the dt spacing",
                        s.step
                    )));
                }
            }
            for a in &s.agents {
                if *roles.entry(a.id).or_insert(a.role) != a.role {
                    return Err(Error::Parse(format!("agent {} changes role", a.id)));
                }
            }
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# schema={EPISODE_SCHEMA} scenario={} episode={} seed={} dt={}",
            self.scenario, self.episode, self.seed, self.dt
        )?;
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<&str> = COLUMNS.to_vec();
        header.push(TARGET_SPEED_COLUMN);
        w.write_record(&header)?;
        for s in &self.steps {
            for a in &s.agents {
                let join = |xs: Vec<String>| xs.join(";");
                w.write_record([
                    s.step.to_string(),
                    s.time.to_string(),
                    a.id.to_string(),
                    a.role.to_string(),
                    a.x.to_string(),
                    a.y.to_string(),
                    a.heading.to_string(),
                    a.v.to_string(),
                    a.a.to_string(),
                    a.yaw_rate.to_string(),
                    a.a_lat.to_string(),
                    a.length.to_string(),
                    a.width.to_string(),
                    (a.offroad as u8).to_string(),
                    join(a.collision_with.iter().map(|c| c.to_string()).collect()),
                    a.selected.map(|i| i.to_string()).unwrap_or_default(),
                    join(a.probs.iter().map(|p| p.to_string()).collect()),
                    a.target_speed.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read_csv<R: BufRead>(mut input: R) -> Result<Self> {
        let mut first = String::new();
        input.read_line(&mut first)?;
        let meta = parse_schema_line(first.trim_end())?;
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let expected: Vec<&str> = COLUMNS
            .iter()
            .copied()
            .chain([TARGET_SPEED_COLUMN])
            .collect();
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(
                "episode CSV header does not match the schema".into(),
            ));
        }
        let mut log = EpisodeLog {
            scenario: meta.scenario,
            episode: meta.episode,
            seed: meta.seed,
            dt: meta.dt,
            steps: Vec::new(),
        };
        for (line, rec) in r.records().enumerate() {
            let rec = rec?;
            let field = |i: usize| rec.get(i).unwrap_or("");
            let num = |i: usize| -> Result<f64> {
                field(i).parse::<f64>().map_err(|_| {
                    Error::Parse(format!(
                        "row {}: bad number in column {}",
                        line + 2,
                        COLUMNS[i]
                    ))
                })
            };
            let step: usize = field(0)
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad step", line + 2)))?;
            let list =
                |i: usize| -> Vec<&str> { field(i).split(';').filter(|t| !t.is_empty()).collect() };
            let row = AgentRow {
                id: field(2)
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad id", line + 2)))?,
                role: field(3).parse()?,
                x: num(4)?,
                y: num(5)?,
                heading: num(6)?,
                v: num(7)?,
                a: num(8)?,
                yaw_rate: num(9)?,
                a_lat: num(10)?,
                length: num(11)?,
                width: num(12)?,
                offroad: match field(13) {
                    "0" => false,
                    "1" => true,
                    other => {
                        return Err(Error::Parse(format!(
                            "row {}: bad offroad flag '{other}'",
                            line + 2
                        )))
                    }
                },
                collision_with: list(14)
                    .into_iter()
                    .map(|t| {
                        t.parse().map_err(|_| {
                            Error::Parse(format!("row {}: bad collision id", line + 2))
                        })
                    })
                    .collect::<Result<_>>()?,
                selected: match field(15) {
                    "" => None,
                    t => {
                        Some(t.parse().map_err(|_| {
                            Error::Parse(format!("row {}: bad selection", line + 2))
                        })?)
                    }
                },
                probs: list(16)
                    .into_iter()
                    .map(|t| {
                        t.parse()
                            .map_err(|_| Error::Parse(format!("row {}: bad probability", line + 2)))
                    })
                    .collect::<Result<_>>()?,
                target_speed: field(17)
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: bad target speed", line + 2)))?,
            };
            let time = num(1)?;
            match log.steps.last_mut() {
                Some(last) if last.step == step => last.agents.push(row),
                _ => log.steps.push(StepRecord {
                    step,
                    time,
                    agents: vec![row],
                }),
            }
        }
        log.validate()?;
        Ok(log)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

struct SchemaLine {
    scenario: String,
    episode: u64,
    seed: u64,
    dt: f64,
}

fn parse_schema_line(line: &str) -> Result<SchemaLine> {
    let body = line
        .strip_prefix('#')
        .ok_or_else(|| Error::Parse("episode CSV must start with a schema line".into()))?;
    let mut kv = std::collections::HashMap::new();
    for tok in body.split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("malformed schema token '{tok}'")))?;
        kv.insert(k, v);
    }
    if kv.get("schema") != Some(&EPISODE_SCHEMA) {
        return Err(Error::Parse(format!("expected schema {EPISODE_SCHEMA}")));
    }
    let get = |k: &str| {
        kv.get(k)
            .copied()
            .ok_or_else(|| Error::Parse(format!("schema line lacks '{k}'")))
    };
    let bad = |k: &str| Error::Parse(format!("schema line has a bad '{k}'"));
    Ok(SchemaLine {
        scenario: get("scenario")?.to_string(),
        episode: get("episode")?.parse().map_err(|_| bad("episode"))?,
        seed: get("seed")?.parse().map_err(|_| bad("seed"))?,
        dt: get("dt")?.parse().map_err(|_| bad("dt"))?,
    })
}
