//! JSON config files with command-line overrides.
//!
//! A config file is either one section (a bare `SynthConfig`, say) or a
//! document with named sections such as `synth` and `experiment`; the
//! `tags` and `visual` sections may also sit inside `experiment`. Flags are
//! written into the section before it is deserialized, so they win.

use std::path::Path;

use mvcca::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

const SECTIONS: &[&str] = &["synth", "experiment", "tags", "visual"];

pub struct Section {
    value: Value,
}

impl Section {
    pub fn load(path: Option<&Path>, name: &str) -> Result<Section> {
        let Some(path) = path else {
            return Ok(Section {
                value: Value::Object(Map::new()),
            });
        };
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let Value::Object(map) = &doc else {
            return Err(Error::Validation(format!("{} is not a JSON object", path.display())));
        };
        let value = if let Some(v) = map.get(name) {
            v.clone()
        } else if let Some(v) = map.get("experiment").and_then(|e| e.get(name)) {
            v.clone()
        } else if map.keys().any(|k| SECTIONS.contains(&k.as_str())) {
            Value::Object(Map::new())
        } else {
            doc
        };
        Ok(Section { value })
    }

    /// Sets `key` (dotted for nested objects) when `val` is present.
    pub fn set<T: Serialize>(&mut self, key: &str, val: Option<T>) -> Result<&mut Self> {
        let Some(val) = val else { return Ok(self) };
        let val = serde_json::to_value(val)?;
        let mut cur = &mut self.value;
        let mut parts = key.split('.').peekable();
        while let Some(part) = parts.next() {
            if !cur.is_object() {
                *cur = Value::Object(Map::new());
            }
            let obj = cur.as_object_mut().expect("object");
            if parts.peek().is_none() {
                obj.insert(part.to_string(), val);
                break;
            }
            cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
        }
        Ok(self)
    }

    pub fn parse<T: DeserializeOwned>(&self, what: &str) -> Result<T> {
        serde_json::from_value(self.value.clone()).map_err(|e| Error::Validation(format!("bad {what} config: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mvcca::harness::SynthConfig;

    #[test]
    fn sections_and_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"synth": {"n": 50, "seed": 3}, "experiment": {"tags": {"dim": 9}}}"#).unwrap();
        let mut s = Section::load(Some(&p), "synth").unwrap();
        s.set("seed", Some(11u64)).unwrap().set("topics", None::<usize>).unwrap();
        let cfg: SynthConfig = s.parse("synth").unwrap();
        assert_eq!((cfg.n, cfg.seed, cfg.topics), (50, 11, SynthConfig::default().topics));
        let tags = Section::load(Some(&p), "tags").unwrap();
        assert_eq!(tags.value["dim"], 9);
        assert_eq!(Section::load(Some(&p), "visual").unwrap().value, Value::Object(Map::new()));

        std::fs::write(&p, r#"{"n": 70}"#).unwrap();
        let cfg: SynthConfig = Section::load(Some(&p), "synth").unwrap().parse("synth").unwrap();
        assert_eq!(cfg.n, 70);
    }

    #[test]
    fn nested_keys() {
        let mut s = Section::load(None, "experiment").unwrap();
        s.set("tags.dim", Some(4)).unwrap().set("seed", Some(2)).unwrap();
        assert_eq!(s.value["tags"]["dim"], 4);
        assert_eq!(s.value["seed"], 2);
    }

    #[test]
    fn bad_values_are_validation_errors() {
        let mut s = Section::load(None, "synth").unwrap();
        s.set("n", Some("many")).unwrap();
        let e = s.parse::<SynthConfig>("synth").unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }
}
