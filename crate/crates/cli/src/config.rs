//! Flat `key = value` configuration files; command-line flags win.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use annular_dyn::{Error, Profile, Result};

#[derive(Debug, Clone, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("config line {}: expected key=value", i + 1)))?;
            // Underscores and dashes name the same key.
            values.insert(k.trim().replace('_', "-"), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("config key {key}: cannot parse {v:?}"))),
        }
    }

    /// Flag value if given, else the config value.
    pub fn pick<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        match flag {
            Some(v) => Ok(Some(v)),
            None => self.get(key),
        }
    }

    /// A named profile with any threshold keys from the file applied on top.
    pub fn profile(&self, name: &str) -> Result<Profile> {
        let mut p = Profile::by_name(name)?;
        let fields: [(&str, &mut f64); 6] = [
            ("harnack-growth", &mut p.harnack_growth),
            ("absorb-growth", &mut p.absorb_growth),
            ("seed-growth", &mut p.seed_growth),
            ("sqrt-log-min", &mut p.sqrt_log_min),
            ("seed-coeff", &mut p.seed_coeff),
            ("t-coeff", &mut p.t_coeff),
        ];
        let mut custom = false;
        for (key, slot) in fields {
            if let Some(v) = self.get::<f64>(key)? {
                *slot = v;
                custom = true;
            }
        }
        if custom {
            p.name = format!("{name}+custom");
        }
        p.validate()?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_and_overrides() {
        let c = ConfigFile::parse("# run\nfn = exp\nn_max=5\nseed-coeff = 4 # wider\n").unwrap();
        assert_eq!(c.raw("fn"), Some("exp"));
        assert_eq!(c.get::<usize>("n-max").unwrap(), Some(5));
        assert_eq!(c.pick(Some(7usize), "n-max").unwrap(), Some(7));
        let p = c.profile("desk-relaxed").unwrap();
        assert_eq!(p.seed_coeff, 4.0);
        assert_eq!(p.name, "desk-relaxed+custom");
        assert!(ConfigFile::parse("novalue\n").is_err());
        assert!(c.get::<f64>("fn").is_err());
    }
}
