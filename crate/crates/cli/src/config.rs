//! `key = value` settings shared by every subcommand.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use plrec::bilstm::Combine;
use plrec::eval::{ExperimentConfig, ExperimentGrid, ReportFormat};
use plrec::features::FeatureConfig;
use plrec::optim::{Bounds, Method, PLConfig};
use plrec::{Error, Result};

#[derive(Clone, Copy)]
enum Kind {
    Count,
    Seed,
    Real,
    Fraction,
    Text,
    Method,
    Combine,
    Fractions,
    Counts,
    Methods,
    Formats,
}

struct Key {
    name: &'static str,
    default: &'static str,
    kind: Kind,
    help: &'static str,
}

const KEYS: &[Key] = &[
    Key {
        name: "dataset",
        default: "reviews",
        kind: Kind::Text,
        help: "dataset label written into reports",
    },
    Key {
        name: "seed",
        default: "0",
        kind: Kind::Seed,
        help: "base seed (also settable with --seed)",
    },
    Key {
        name: "max_terms",
        default: "1936",
        kind: Kind::Count,
        help: "TF-IDF vocabulary cap",
    },
    Key {
        name: "walks_per_node",
        default: "10",
        kind: Kind::Count,
        help: "random walks started from each graph node",
    },
    Key {
        name: "walk_length",
        default: "8",
        kind: Kind::Count,
        help: "nodes per random walk",
    },
    Key {
        name: "window",
        default: "2",
        kind: Kind::Count,
        help: "co-occurrence window for PPMI",
    },
    Key {
        name: "rank",
        default: "64",
        kind: Kind::Count,
        help: "graph embedding rank",
    },
    Key {
        name: "eigen_iterations",
        default: "100",
        kind: Kind::Count,
        help: "orthogonal iteration rounds",
    },
    Key {
        name: "steps",
        default: "20",
        kind: Kind::Count,
        help: "Bi-LSTM sequence length T",
    },
    Key {
        name: "hidden",
        default: "8",
        kind: Kind::Count,
        help: "Bi-LSTM hidden size H",
    },
    Key {
        name: "combine",
        default: "concat",
        kind: Kind::Combine,
        help: "concat | add | average | multiply",
    },
    Key {
        name: "param_bound",
        default: "2",
        kind: Kind::Real,
        help: "model weights are searched in [-B, B]",
    },
    Key {
        name: "method",
        default: "passer",
        kind: Kind::Method,
        help: "optimizer for train: passer | pso | random",
    },
    Key {
        name: "methods",
        default: "passer,pso,random",
        kind: Kind::Methods,
        help: "optimizers compared by experiment",
    },
    Key {
        name: "pop_size",
        default: "30",
        kind: Kind::Count,
        help: "optimizer population size",
    },
    Key {
        name: "max_iter",
        default: "500",
        kind: Kind::Count,
        help: "iterations per bench-opt run",
    },
    Key {
        name: "producer_fraction",
        default: "0.2",
        kind: Kind::Fraction,
        help: "share of producers",
    },
    Key {
        name: "investigator_fraction",
        default: "0.1",
        kind: Kind::Fraction,
        help: "share of investigators",
    },
    Key {
        name: "awareness_probability",
        default: "0.8",
        kind: Kind::Fraction,
        help: "producer exploration probability",
    },
    Key {
        name: "flight_length",
        default: "1",
        kind: Kind::Real,
        help: "producer flight length",
    },
    Key {
        name: "train_fraction",
        default: "0.9",
        kind: Kind::Fraction,
        help: "training share used by featurize",
    },
    Key {
        name: "budget",
        default: "30",
        kind: Kind::Count,
        help: "budget level for train",
    },
    Key {
        name: "budget_scale",
        default: "10",
        kind: Kind::Count,
        help: "optimizer iterations per budget level",
    },
    Key {
        name: "fractions",
        default: "0.4,0.5,0.6,0.7,0.8,0.9",
        kind: Kind::Fractions,
        help: "experiment training fractions",
    },
    Key {
        name: "budgets",
        default: "10,15,20,25,30",
        kind: Kind::Counts,
        help: "experiment budget levels",
    },
    Key {
        name: "replicates",
        default: "1",
        kind: Kind::Count,
        help: "experiment seeds: seed, seed+1, ...",
    },
    Key {
        name: "threshold",
        default: "0.5",
        kind: Kind::Fraction,
        help: "score at or above which a review is recommended",
    },
    Key {
        name: "formats",
        default: "csv,json",
        kind: Kind::Formats,
        help: "report formats: csv, json",
    },
];

/// Grid keys replaced by the built-in grid under `--grid-defaults`.
pub const GRID_KEYS: [&str; 2] = ["fractions", "budgets"];

pub fn keys_help() -> String {
    let mut out =
        String::from("Config keys (`key = value` lines in --config, or --set key=value):\n");
    for k in KEYS {
        out.push_str(&format!(
            "  {:<22} {} [default: {}]\n",
            k.name, k.help, k.default
        ));
    }
    out
}

#[derive(Debug, Clone)]
pub struct Settings {
    values: BTreeMap<&'static str, String>,
}

fn find(name: &str) -> Result<&'static Key> {
    KEYS.iter()
        .find(|k| k.name == name)
        .ok_or_else(|| Error::Domain(format!("unknown config key {name:?}")))
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn check(key: &Key, value: &str) -> Result<()> {
    let bad = |why: &str| Error::Domain(format!("{} = {value:?}: {why}", key.name));
    let count = |v: &str| {
        v.parse::<usize>()
            .map_err(|_| bad("expected a non-negative integer"))
    };
    let fraction = |v: &str| match v.parse::<f64>() {
        Ok(x) if x > 0.0 && x < 1.0 => Ok(()),
        _ => Err(bad("expected a number in (0, 1)")),
    };
    match key.kind {
        Kind::Count => count(value).map(drop),
        Kind::Seed => value
            .parse::<u64>()
            .map(drop)
            .map_err(|_| bad("expected an unsigned integer")),
        Kind::Real => match value.parse::<f64>() {
            Ok(x) if x.is_finite() && x > 0.0 => Ok(()),
            _ => Err(bad("expected a positive number")),
        },
        Kind::Fraction => fraction(value),
        Kind::Text => Ok(()),
        Kind::Method => value.parse::<Method>().map(drop),
        Kind::Combine => value.parse::<Combine>().map(drop),
        Kind::Fractions => nonempty(list(value).map(fraction).collect::<Result<Vec<_>>>()?, bad),
        Kind::Counts => nonempty(list(value).map(count).collect::<Result<Vec<_>>>()?, bad),
        Kind::Methods => nonempty(
            list(value)
                .map(str::parse::<Method>)
                .collect::<Result<Vec<_>>>()?,
            bad,
        ),
        Kind::Formats => nonempty(
            list(value).map(parse_format).collect::<Result<Vec<_>>>()?,
            bad,
        ),
    }
}

fn nonempty<T>(items: Vec<T>, bad: impl Fn(&str) -> Error) -> Result<()> {
    if items.is_empty() {
        Err(bad("expected at least one entry"))
    } else {
        Ok(())
    }
}

fn parse_format(s: &str) -> Result<ReportFormat> {
    match s {
        "csv" => Ok(ReportFormat::Csv),
        "json" => Ok(ReportFormat::Json),
        _ => Err(Error::Domain(format!("unknown report format {s:?}"))),
    }
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|k| (k.name, k.default.to_owned()))
                .collect(),
        }
    }
}

impl Settings {
    pub fn set(&mut self, name: &str, value: &str) -> Result<()> {
        let key = find(name)?;
        let value = value.trim();
        check(key, value)?;
        self.values.insert(key.name, value.to_owned());
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Parse(format!("{origin}:{}: expected `key = value`", n + 1))
            })?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Domain(format!("{origin}:{}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Domain(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text, &path.display().to_string())
    }

    pub fn reset(&mut self, names: &[&str]) {
        for name in names {
            let key = find(name).expect("known key");
            self.values.insert(key.name, key.default.to_owned());
        }
    }

    fn raw(&self, name: &str) -> &str {
        self.values
            .get(name)
            .map(String::as_str)
            .expect("schema key")
    }

    // Values were validated on the way in, so the parses below cannot fail.
    pub fn count(&self, name: &str) -> usize {
        self.raw(name).parse().expect("validated count")
    }

    pub fn real(&self, name: &str) -> f64 {
        self.raw(name).parse().expect("validated number")
    }

    pub fn text(&self, name: &str) -> &str {
        self.raw(name)
    }

    pub fn seed(&self) -> u64 {
        self.raw("seed").parse().expect("validated seed")
    }

    pub fn method(&self) -> Method {
        self.raw("method").parse().expect("validated method")
    }

    pub fn methods(&self) -> Vec<Method> {
        let mut out: Vec<Method> = Vec::new();
        for m in list(self.raw("methods")).map(|s| s.parse().expect("validated method")) {
            if !out.contains(&m) {
                out.push(m);
            }
        }
        out
    }

    pub fn combine(&self) -> Combine {
        self.raw("combine").parse().expect("validated combine")
    }

    pub fn formats(&self) -> Vec<ReportFormat> {
        let mut out = Vec::new();
        for f in list(self.raw("formats")).map(|s| parse_format(s).expect("validated format")) {
            if !out.contains(&f) {
                out.push(f);
            }
        }
        out
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            max_terms: self.count("max_terms"),
            walks_per_node: self.count("walks_per_node"),
            walk_length: self.count("walk_length"),
            window: self.count("window"),
            rank: self.count("rank"),
            iterations: self.count("eigen_iterations"),
        }
    }

    /// Optimizer settings with placeholder bounds; callers supply the real
    /// box, iteration count and seed.
    pub fn optimizer(&self, dim: usize, max_iter: usize, seed: u64) -> PLConfig<f64> {
        PLConfig {
            producer_fraction: self.real("producer_fraction"),
            investigator_fraction: self.real("investigator_fraction"),
            awareness_probability: self.real("awareness_probability"),
            flight_length: self.real("flight_length"),
            ..PLConfig::new(
                self.count("pop_size"),
                max_iter,
                Bounds::uniform(dim, -1.0, 1.0),
                seed,
            )
        }
    }

    pub fn grid(&self) -> ExperimentGrid {
        let seed = self.seed();
        ExperimentGrid {
            fractions: list(self.raw("fractions"))
                .map(|s| s.parse().expect("validated fraction"))
                .collect(),
            budgets: list(self.raw("budgets"))
                .map(|s| s.parse().expect("validated count"))
                .collect(),
            seeds: (0..self.count("replicates") as u64)
                .map(|i| seed.wrapping_add(i))
                .collect(),
        }
    }

    pub fn experiment(&self, method: Method) -> ExperimentConfig<f64> {
        let mut config = ExperimentConfig::new(self.text("dataset"), method);
        config.features = self.features();
        config.steps = self.count("steps");
        config.hidden = self.count("hidden");
        config.combine = self.combine();
        config.bound = self.real("param_bound");
        config.optimizer = self.optimizer(1, 1, 0);
        config.budget_scale = self.count("budget_scale");
        config.threshold = self.real("threshold");
        config
    }
}
