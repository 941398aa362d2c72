//! `ImagePatch` semantics over scene-graph fixtures.

use std::sync::Arc;

use super::iou::{intersection_area, iou, BoxCoords};
use super::scene::{lookup_question, SceneGraph, SceneObject};
use crate::pyfmt::float_repr;

/// A failed API call, surfaced to programs as a Python-style exception.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{kind}: {message}")]
pub struct ApiError {
    pub kind: &'static str,
    pub message: String,
}

impl ApiError {
    fn value(message: impl Into<String>) -> Self {
        ApiError {
            kind: "ValueError",
            message: message.into(),
        }
    }
}

/// A rectangular region of a scene.
#[derive(Debug, Clone)]
pub struct PatchValue {
    pub scene: Arc<SceneGraph>,
    pub left: i64,
    pub lower: i64,
    pub right: i64,
    pub upper: i64,
}

impl PartialEq for PatchValue {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.scene, &other.scene) && self.bounds() == other.bounds()
    }
}

impl PatchValue {
    /// The whole image.
    pub fn full(scene: Arc<SceneGraph>) -> Self {
        let (w, h) = (scene.width, scene.height);
        PatchValue {
            scene,
            left: 0,
            lower: 0,
            right: w,
            upper: h,
        }
    }

    pub fn bounds(&self) -> [i64; 4] {
        [self.left, self.lower, self.right, self.upper]
    }

    pub fn box_coords(&self) -> BoxCoords {
        [
            self.left as f64,
            self.lower as f64,
            self.right as f64,
            self.upper as f64,
        ]
    }

    pub fn width(&self) -> i64 {
        self.right - self.left
    }

    pub fn height(&self) -> i64 {
        self.upper - self.lower
    }

    pub fn horizontal_center(&self) -> f64 {
        (self.left + self.right) as f64 / 2.0
    }

    pub fn vertical_center(&self) -> f64 {
        (self.lower + self.upper) as f64 / 2.0
    }

    pub fn repr(&self) -> String {
        format!(
            "ImagePatch(left={}, right={}, upper={}, lower={}, height={}, width={}, horizontal_center={}, vertical_center={})",
            self.left,
            self.right,
            self.upper,
            self.lower,
            self.height(),
            self.width(),
            float_repr(self.horizontal_center()),
            float_repr(self.vertical_center()),
        )
    }

    fn contains_point(&self, (x, y): (f64, f64)) -> bool {
        self.left as f64 <= x && x <= self.right as f64 && self.lower as f64 <= y && y <= self.upper as f64
    }

    /// Objects whose box center lies inside this patch, in scene order.
    pub fn contained_objects(&self) -> impl Iterator<Item = &SceneObject> + '_ {
        self.scene
            .objects
            .iter()
            .filter(move |o| self.contains_point(o.center()))
    }

    fn object_patch(&self, o: &SceneObject) -> PatchValue {
        let [left, lower, right, upper] = o.bbox;
        PatchValue {
            scene: Arc::clone(&self.scene),
            left,
            lower,
            right,
            upper,
        }
    }

    fn object_box(o: &SceneObject) -> BoxCoords {
        let [l, low, r, up] = o.bbox;
        [l as f64, low as f64, r as f64, up as f64]
    }

    /// The contained object that best explains this patch (highest IoU, first
    /// in scene order on ties).
    fn best_object<'a>(&self, candidates: impl Iterator<Item = &'a SceneObject>) -> Option<&'a SceneObject> {
        let me = self.box_coords();
        let mut best: Option<(&SceneObject, f64)> = None;
        for o in candidates {
            let score = iou(&me, &Self::object_box(o));
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((o, score));
            }
        }
        best.map(|(o, _)| o)
    }

    /// Patches for every matching object centered in this patch, ordered by
    /// left edge then lower edge.
    pub fn find(&self, object_name: &str) -> Vec<PatchValue> {
        let mut found: Vec<&SceneObject> = self
            .contained_objects()
            .filter(|o| o.matches_name(object_name))
            .collect();
        found.sort_by_key(|o| (o.bbox[0], o.bbox[1]));
        found.into_iter().map(|o| self.object_patch(o)).collect()
    }

    pub fn exists(&self, object_name: &str) -> bool {
        !self.find(object_name).is_empty()
    }

    pub fn verify_property(&self, object_name: &str, property: &str) -> bool {
        let prop = property.trim().to_lowercase();
        self.best_object(self.contained_objects().filter(|o| o.matches_name(object_name)))
            .and_then(|o| o.attributes.get(&prop).copied())
            .unwrap_or(false)
    }

    pub fn simple_query(&self, question: &str) -> String {
        if let Some(answer) = self
            .best_object(self.contained_objects())
            .and_then(|o| o.answer(question))
        {
            return answer.to_string();
        }
        lookup_question(&self.scene.image_qa, question)
            .unwrap_or(&self.scene.default_answer)
            .to_string()
    }

    /// Number of `terms` matched by some object in this patch.
    pub fn term_score(&self, terms: &[String]) -> usize {
        terms
            .iter()
            .filter(|t| self.contained_objects().any(|o| o.matches_term(t)))
            .count()
    }

    pub fn best_text_match(&self, options: &[String]) -> Result<String, ApiError> {
        if options.is_empty() {
            return Err(ApiError::value("best_text_match() requires at least one option"));
        }
        let mut best = 0;
        let mut best_score = 0;
        for (i, opt) in options.iter().enumerate() {
            let score = self.contained_objects().filter(|o| o.matches_term(opt)).count();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        Ok(options[best].clone())
    }

    /// Intersection of the requested box with this patch.
    pub fn crop(&self, left: i64, lower: i64, right: i64, upper: i64) -> Result<PatchValue, ApiError> {
        let l = left.max(self.left);
        let low = lower.max(self.lower);
        let r = right.min(self.right);
        let up = upper.min(self.upper);
        if l >= r || low >= up {
            return Err(ApiError::value("empty crop"));
        }
        Ok(PatchValue {
            scene: Arc::clone(&self.scene),
            left: l,
            lower: low,
            right: r,
            upper: up,
        })
    }

    pub fn compute_depth(&self) -> Result<f64, ApiError> {
        let depths: Vec<f64> = self.contained_objects().map(|o| o.depth).collect();
        if depths.is_empty() {
            return Err(ApiError::value("no objects in patch"));
        }
        Ok(depths.iter().sum::<f64>() / depths.len() as f64)
    }

    /// Questions answered by a simple_query on this patch that the fixture
    /// marks as deliberately wrong.
    pub fn is_faulty_answer(&self, question: &str) -> bool {
        self.scene.is_faulty_question(question)
    }
}

/// Which result `best_image_match` returns.
#[derive(Debug, Clone, PartialEq)]
pub enum ImageMatch {
    Index(usize),
    Patch(PatchValue),
}

pub fn best_image_match(
    patches: &[PatchValue],
    content: &[String],
    return_index: bool,
) -> Result<ImageMatch, ApiError> {
    if patches.is_empty() {
        return Err(ApiError::value("best_image_match() got an empty list_patches"));
    }
    let mut best = 0;
    let mut best_score = patches[0].term_score(content);
    for (i, p) in patches.iter().enumerate().skip(1) {
        let score = p.term_score(content);
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    Ok(if return_index {
        ImageMatch::Index(best)
    } else {
        ImageMatch::Patch(patches[best].clone())
    })
}

pub fn bool_to_yesno(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

/// Euclidean distance between patch centers, or 0 when the boxes overlap.
pub fn distance(a: &PatchValue, b: &PatchValue) -> f64 {
    if intersection_area(&a.box_coords(), &b.box_coords()) > 0.0 {
        return 0.0;
    }
    let dx = a.horizontal_center() - b.horizontal_center();
    let dy = a.vertical_center() - b.vertical_center();
    (dx * dx + dy * dy).sqrt()
}
