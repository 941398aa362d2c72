//! Scene-graph world model: the `ImagePatch` API answered from fixtures.

pub mod iou;
pub mod patch;
pub mod scene;

pub use iou::{iou, BoxCoords};
pub use patch::{best_image_match, bool_to_yesno, distance, ApiError, ImageMatch, PatchValue};
pub use scene::{SceneError, SceneGraph, SceneObject, SceneStore};
