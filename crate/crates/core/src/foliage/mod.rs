//! Angular-domain digital twin of foliage: panorama projection, camera pose
//! correction, color-based foliage identification, coverage ratio and the
//! resulting foliage loss.

pub mod color;
pub mod erp;
pub mod knn;
pub mod loss;
pub mod pose;
pub mod rotation;
pub mod twin;

pub use color::{color_difference, prefilter_foliage, try_color_difference, PrefilterConfig, Rgb};
pub use erp::{erp_pixel_to_camera, ErpParams};
pub use knn::{accuracy_sweep, knn_classify, LabeledPixel, LabeledPixels, PixelClass};
pub use loss::{fit_foliage_loss, foliage_loss, select_window, FoliageFit, FoliageLossModel};
pub use pose::{solve_pose, PoseReference, PoseSolution};
pub use rotation::{rotate_zyz, PoseRotation};
pub use twin::{build_twin, compute_fcr, load_twin, save_twin, AngularMask, FoliageTwin, TwinBuildConfig};
