//! Flat `key = value` text files used for configs, scenario specs and
//! dataset metadata. `#` starts a comment.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::{Pose, Quaternion, Vec3};

#[derive(Clone, Debug, Default)]
pub struct KvFile {
    path: PathBuf,
    entries: BTreeMap<String, (usize, String)>,
}

impl KvFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = k.trim().to_string();
            if key.is_empty() {
                return Err(err("empty key".into()));
            }
            if entries
                .insert(key.clone(), (i + 1, v.trim().to_string()))
                .is_some()
            {
                return Err(err(format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(_, v)| v.as_str())
    }

    fn error(&self, key: &str, message: String) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.entries.get(key).map_or(0, |(l, _)| *l),
            message: format!("{key}: {message}"),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.raw(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e: T::Err| self.error(key, e.to_string())),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T>
    where
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| self.error(key, "missing required key".into()))
    }

    /// Whitespace-separated floats of a fixed count.
    pub fn floats<const N: usize>(&self, key: &str) -> Result<Option<[f64; N]>> {
        let Some(v) = self.raw(key) else {
            return Ok(None);
        };
        let parsed: std::result::Result<Vec<f64>, _> =
            v.split_whitespace().map(f64::from_str).collect();
        let parsed = parsed.map_err(|e| self.error(key, e.to_string()))?;
        let arr: [f64; N] = parsed.try_into().map_err(|p: Vec<f64>| {
            self.error(key, format!("expected {N} numbers, got {}", p.len()))
        })?;
        Ok(Some(arr))
    }

    pub fn vec3(&self, key: &str) -> Result<Option<Vec3>> {
        Ok(self.floats::<3>(key)?.map(|a| Vec3::new(a[0], a[1], a[2])))
    }

    /// Quaternion written as `w x y z`, normalised on read.
    pub fn quaternion(&self, key: &str) -> Result<Option<Quaternion>> {
        let Some(a) = self.floats::<4>(key)? else {
            return Ok(None);
        };
        let q = Quaternion::new(a[0], a[1], a[2], a[3]);
        if !(q.norm() > 1e-9) || !q.is_finite() {
            return Err(self.error(key, "quaternion must be finite and non-zero".into()));
        }
        Ok(Some(q.normalized()))
    }

    /// Reads `<prefix>_translation` and `<prefix>_rotation` onto `pose`.
    pub fn pose_into(&self, prefix: &str, pose: &mut Pose) -> Result<()> {
        if let Some(t) = self.vec3(&format!("{prefix}_translation"))? {
            pose.position = t;
        }
        if let Some(q) = self.quaternion(&format!("{prefix}_rotation"))? {
            pose.orientation = q;
        }
        Ok(())
    }

    /// Fails on the first key not in `known`.
    pub fn reject_unknown(&self, known: &[&str]) -> Result<()> {
        match self.keys().find(|k| !known.contains(k)) {
            Some(k) => Err(self.error(k, "unknown key".into())),
            None => Ok(()),
        }
    }
}

/// Writes `key = value` lines in the given order.
pub fn format_entries(entries: &[(&str, String)]) -> String {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}

pub fn fmt_vec3(v: &Vec3) -> String {
    format!("{} {} {}", v.x, v.y, v.z)
}

pub fn fmt_quaternion(q: &Quaternion) -> String {
    format!("{} {} {} {}", q.w, q.x, q.y, q.z)
}
