use std::path::{Path, PathBuf};

use toml::{Table, Value};

use super::{CostModel, EngineError, EngineKind};

/// Cache savings calibrated so that cached/uncached throughput on fully
/// repeated input is 39.8 / 24.3.
pub const DEFAULT_CACHE_HIT_SAVINGS: f64 = 0.389;

const COST_KEYS: [&str; 3] = ["setup_seconds", "per_word_seconds", "simulate"];

/// Engine definition: a kind plus its flat parameter table.
///
/// On disk this is a TOML file of top-level keys (or an `[engine]` table):
///
/// ```toml
/// kind = "delay_model"
/// setup_seconds = 1.117
/// per_word_seconds = 2.1855e-4
/// simulate = true
/// ```
///
/// Keys by kind:
/// - all kinds: `setup_seconds`, `per_word_seconds`, `simulate` (default false)
/// - `rbmt`: `dictionaries` = `"builtin"` or a directory holding `morph.tsv`,
///   `tags.tsv`, `bilingual.tsv`, `gen.tsv`, `postgen.tsv`
/// - `smt_stub`: `cache` (default false), `cache_hit_savings` (default 0.389)
/// - `external_command`: `command`, `args` (list of strings); costs are measured
#[derive(Debug, Clone, PartialEq)]
pub struct EngineSpec {
    pub kind: EngineKind,
    pub params: Table,
    base_dir: Option<PathBuf>,
}

impl EngineSpec {
    pub fn new(kind: EngineKind) -> Self {
        EngineSpec {
            kind,
            params: Table::new(),
            base_dir: None,
        }
    }

    pub fn delay_model(cost: CostModel) -> Self {
        EngineSpec::new(EngineKind::DelayModel).with_cost(cost)
    }

    pub fn smt_stub(cost: CostModel, cache: bool) -> Self {
        let mut spec = EngineSpec::new(EngineKind::SmtStub)
            .with_cost(cost)
            .with_param("cache", Value::Boolean(cache));
        spec.params.insert(
            "cache_hit_savings".into(),
            Value::Float(cost.cache_hit_savings),
        );
        spec
    }

    pub fn rbmt_builtin() -> Self {
        EngineSpec::new(EngineKind::Rbmt)
            .with_param("dictionaries", Value::String("builtin".into()))
    }

    pub fn external_command(command: &str, args: &[&str]) -> Self {
        EngineSpec::new(EngineKind::ExternalCommand)
            .with_param("command", Value::String(command.into()))
            .with_param(
                "args",
                Value::Array(args.iter().map(|a| Value::String((*a).into())).collect()),
            )
    }

    pub fn with_param(mut self, key: &str, value: Value) -> Self {
        self.params.insert(key.into(), value);
        self
    }

    /// Overwrites setup, per-word and simulate keys from `cost`.
    pub fn with_cost(mut self, cost: CostModel) -> Self {
        self.params
            .insert("setup_seconds".into(), Value::Float(cost.setup_seconds));
        self.params.insert(
            "per_word_seconds".into(),
            Value::Float(cost.per_word_seconds),
        );
        self.params
            .insert("simulate".into(), Value::Boolean(cost.simulate));
        self
    }

    pub fn with_simulate(self, simulate: bool) -> Self {
        self.with_param("simulate", Value::Boolean(simulate))
    }

    pub fn simulate(&self) -> bool {
        self.get_bool("simulate").ok().flatten().unwrap_or(false)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, EngineError> {
        let mut table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| EngineError::InvalidSpec(e.message().to_string()))?;
        if let Some(Value::Table(inner)) = table.remove("engine") {
            table = inner;
        }
        let kind = match table.remove("kind") {
            Some(Value::String(k)) => k.parse()?,
            Some(_) => return Err(EngineError::InvalidSpec("'kind' must be a string".into())),
            None => return Err(EngineError::InvalidSpec("missing 'kind'".into())),
        };
        Ok(EngineSpec {
            kind,
            params: table,
            base_dir: None,
        })
    }

    /// Loads a spec file; relative dictionary paths resolve against its directory.
    pub fn from_file(path: &Path) -> Result<Self, EngineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| EngineError::InvalidSpec(format!("{}: {e}", path.display())))?;
        let mut spec = EngineSpec::from_toml_str(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf);
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> String {
        let mut table = Table::new();
        table.insert("kind".into(), Value::String(self.kind.as_str().into()));
        table.extend(self.params.clone());
        toml::to_string(&table).expect("flat table serializes")
    }

    pub(crate) fn resolve_path(&self, path: &str) -> PathBuf {
        let p = PathBuf::from(path);
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p,
        }
    }

    pub fn cost_model(&self) -> Result<CostModel, EngineError> {
        let mut cost = CostModel {
            setup_seconds: self.get_f64("setup_seconds")?.unwrap_or(0.0),
            per_word_seconds: self.get_f64("per_word_seconds")?.unwrap_or(0.0),
            cache_hit_savings: 0.0,
            simulate: self.get_bool("simulate")?.unwrap_or(false),
        };
        if self.kind == EngineKind::SmtStub {
            cost.cache_hit_savings = self
                .get_f64("cache_hit_savings")?
                .unwrap_or(DEFAULT_CACHE_HIT_SAVINGS);
        }
        cost.validate()?;
        Ok(cost)
    }

    pub(crate) fn check_keys(&self, kind_keys: &[&str]) -> Result<(), EngineError> {
        let smt_extra: &[&str] = if self.kind == EngineKind::SmtStub {
            &["cache_hit_savings"]
        } else {
            &[]
        };
        for key in self.params.keys() {
            let known = COST_KEYS.contains(&key.as_str())
                || kind_keys.contains(&key.as_str())
                || smt_extra.contains(&key.as_str());
            if !known {
                return Err(EngineError::InvalidSpec(format!(
                    "unknown key '{key}' for engine kind {}",
                    self.kind
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn get_f64(&self, key: &str) -> Result<Option<f64>, EngineError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(_) => Err(EngineError::InvalidSpec(format!(
                "'{key}' must be a number"
            ))),
        }
    }

    pub(crate) fn get_bool(&self, key: &str) -> Result<Option<bool>, EngineError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(EngineError::InvalidSpec(format!(
                "'{key}' must be a boolean"
            ))),
        }
    }

    pub(crate) fn get_str(&self, key: &str) -> Result<Option<&str>, EngineError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(_) => Err(EngineError::InvalidSpec(format!(
                "'{key}' must be a string"
            ))),
        }
    }

    pub(crate) fn get_str_list(&self, key: &str) -> Result<Option<Vec<String>>, EngineError> {
        match self.params.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => Ok(s.clone()),
                    _ => Err(EngineError::InvalidSpec(format!(
                        "'{key}' must list strings"
                    ))),
                })
                .collect::<Result<Vec<_>, _>>()
                .map(Some),
            Some(_) => Err(EngineError::InvalidSpec(format!("'{key}' must be a list"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_and_sectioned_specs() {
        let flat = EngineSpec::from_toml_str(
            "kind = \"delay_model\"\nsetup_seconds = 1.12\nper_word_seconds = 2.19e-4\nsimulate = true\n",
        )
        .unwrap();
        let sectioned = EngineSpec::from_toml_str(
            "[engine]\nkind = \"delay_model\"\nsetup_seconds = 1.12\nper_word_seconds = 2.19e-4\nsimulate = true\n",
        )
        .unwrap();
        assert_eq!(flat, sectioned);
        let cost = flat.cost_model().unwrap();
        assert_eq!(cost.setup_seconds, 1.12);
        assert_eq!(cost.per_word_seconds, 2.19e-4);
        assert!(cost.simulate);
    }

    #[test]
    fn integer_costs_are_accepted() {
        let spec =
            EngineSpec::from_toml_str("kind = \"delay_model\"\nsetup_seconds = 2\n").unwrap();
        assert_eq!(spec.cost_model().unwrap().setup_seconds, 2.0);
        assert!(!spec.simulate());
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(EngineSpec::from_toml_str("setup_seconds = 1").is_err());
        assert!(EngineSpec::from_toml_str("kind = \"moses\"").is_err());
        assert!(EngineSpec::from_toml_str("kind = 3").is_err());
        let spec =
            EngineSpec::from_toml_str("kind = \"smt_stub\"\ncache_hit_savings = 1.5").unwrap();
        assert!(spec.cost_model().is_err());
        let spec = EngineSpec::from_toml_str("kind = \"rbmt\"\nsimulate = \"yes\"").unwrap();
        assert!(spec.cost_model().is_err());
    }

    #[test]
    fn smt_savings_default() {
        let spec = EngineSpec::from_toml_str("kind = \"smt_stub\"\ncache = true").unwrap();
        assert_eq!(
            spec.cost_model().unwrap().cache_hit_savings,
            DEFAULT_CACHE_HIT_SAVINGS
        );
        let spec =
            EngineSpec::from_toml_str("kind = \"delay_model\"\ncache_hit_savings = 0.2").unwrap();
        assert!(spec.check_keys(&[]).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let spec =
            EngineSpec::external_command("/bin/cat", &["-u"]).with_cost(CostModel::new(0.5, 0.01));
        let back = EngineSpec::from_toml_str(&spec.to_toml_string()).unwrap();
        assert_eq!(back, spec);
    }
}
