use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Deterministic stand-in for an image: objects with boxes, attributes and
/// canned answers. Coordinates have their origin at the bottom-left corner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub image_id: String,
    pub width: i64,
    pub height: i64,
    pub default_answer: String,
    #[serde(default)]
    pub image_qa: BTreeMap<String, String>,
    #[serde(default)]
    pub objects: Vec<SceneObject>,
    /// Questions whose fixture answers are deliberately wrong, used to
    /// simulate perception-model mistakes.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faulty_qa: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub name: String,
    #[serde(default)]
    pub synonyms: Vec<String>,
    /// `[left, lower, right, upper]` in pixels.
    #[serde(rename = "box")]
    pub bbox: [i64; 4],
    #[serde(default)]
    pub attributes: BTreeMap<String, bool>,
    #[serde(default)]
    pub depth: f64,
    #[serde(default)]
    pub qa: BTreeMap<String, String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SceneError {
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing {path}: {source}")]
    Json {
        path: String,
        source: serde_json::Error,
    },
    #[error("scene {image_id}: {message}")]
    Invalid { image_id: String, message: String },
    #[error("unknown scene id '{0}'")]
    Missing(String),
}

impl SceneObject {
    pub fn center(&self) -> (f64, f64) {
        let [l, low, r, up] = self.bbox;
        ((l + r) as f64 / 2.0, (low + up) as f64 / 2.0)
    }

    pub fn area(&self) -> i64 {
        let [l, low, r, up] = self.bbox;
        (r - l) * (up - low)
    }

    /// Name or synonym match, case-insensitive.
    pub fn matches_name(&self, query: &str) -> bool {
        let q = query.trim().to_lowercase();
        self.name == q || self.synonyms.contains(&q)
    }

    /// Name, synonym, or a true attribute.
    pub fn matches_term(&self, term: &str) -> bool {
        let t = term.trim().to_lowercase();
        self.matches_name(&t) || self.attributes.get(&t).copied().unwrap_or(false)
    }

    pub fn answer(&self, question: &str) -> Option<&str> {
        lookup_question(&self.qa, question)
    }
}

pub(crate) fn normalize_question(q: &str) -> String {
    q.trim().trim_end_matches('?').trim().to_lowercase()
}

pub(crate) fn lookup_question<'a>(qa: &'a BTreeMap<String, String>, question: &str) -> Option<&'a str> {
    let key = normalize_question(question);
    qa.iter()
        .find(|(q, _)| normalize_question(q) == key)
        .map(|(_, a)| a.as_str())
}

impl SceneGraph {
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let scene: SceneGraph = serde_json::from_str(text).map_err(|source| SceneError::Json {
            path: "<inline>".into(),
            source,
        })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let p = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| SceneError::Io {
            path: p.clone(),
            source,
        })?;
        let scene: SceneGraph =
            serde_json::from_str(&text).map_err(|source| SceneError::Json { path: p, source })?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let invalid = |message: String| SceneError::Invalid {
            image_id: self.image_id.clone(),
            message,
        };
        if self.width <= 0 || self.height <= 0 {
            return Err(invalid("image size must be positive".into()));
        }
        for (i, o) in self.objects.iter().enumerate() {
            let [l, low, r, up] = o.bbox;
            if !(l < r && low < up) {
                return Err(invalid(format!("object {i} ({}) has a degenerate box", o.name)));
            }
            if l < 0 || low < 0 || r > self.width || up > self.height {
                return Err(invalid(format!("object {i} ({}) lies outside the image", o.name)));
            }
            let lower = |s: &str| s == s.to_lowercase();
            if !lower(&o.name) || !o.synonyms.iter().all(|s| lower(s)) {
                return Err(invalid(format!("object {i} names must be lowercase")));
            }
        }
        Ok(())
    }

    /// `true` when `question` is marked as answered wrongly by the fixture.
    pub fn is_faulty_question(&self, question: &str) -> bool {
        let key = normalize_question(question);
        self.faulty_qa.iter().any(|q| normalize_question(q) == key)
    }
}

/// Scene fixtures keyed by image id.
#[derive(Debug, Clone, Default)]
pub struct SceneStore {
    scenes: HashMap<String, Arc<SceneGraph>>,
}

impl SceneStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, scene: SceneGraph) {
        self.scenes.insert(scene.image_id.clone(), Arc::new(scene));
    }

    /// Loads every `*.json` file in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, SceneError> {
        let mut store = SceneStore::new();
        let entries = std::fs::read_dir(dir).map_err(|source| SceneError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for p in paths {
            store.insert(SceneGraph::load(&p)?);
        }
        Ok(store)
    }

    pub fn get(&self, id: &str) -> Result<Arc<SceneGraph>, SceneError> {
        self.scenes
            .get(id)
            .cloned()
            .ok_or_else(|| SceneError::Missing(id.to_string()))
    }

    pub fn resolve(&self, ids: &[String]) -> Result<Vec<Arc<SceneGraph>>, SceneError> {
        ids.iter().map(|id| self.get(id)).collect()
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_schema() {
        let scene = SceneGraph::from_json(
            r#"{"image_id": "a", "width": 100, "height": 50, "default_answer": "no",
                "image_qa": {"Is it sunny?": "yes"},
                "objects": [{"name": "dog", "synonyms": ["puppy"], "box": [0, 0, 10, 10],
                             "attributes": {"brown": true}, "depth": 2.5, "qa": {}}]}"#,
        )
        .unwrap();
        assert_eq!(scene.objects[0].center(), (5.0, 5.0));
        assert!(scene.objects[0].matches_name("Puppy"));
        assert!(scene.objects[0].matches_term("brown"));
        assert_eq!(lookup_question(&scene.image_qa, "is it sunny"), Some("yes"));
    }

    #[test]
    fn rejects_out_of_bounds_and_uppercase() {
        let bad_box = r#"{"image_id": "a", "width": 10, "height": 10, "default_answer": "",
            "objects": [{"name": "dog", "box": [0, 0, 20, 5]}]}"#;
        assert!(matches!(SceneGraph::from_json(bad_box), Err(SceneError::Invalid { .. })));
        let upper = r#"{"image_id": "a", "width": 10, "height": 10, "default_answer": "",
            "objects": [{"name": "Dog", "box": [0, 0, 5, 5]}]}"#;
        assert!(matches!(SceneGraph::from_json(upper), Err(SceneError::Invalid { .. })));
    }
}
