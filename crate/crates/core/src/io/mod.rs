//! File formats of the MVSNet dataset convention: cam files, pair files, PFM
//! rasters, images and PLY clouds.

pub mod cam;
pub mod image;
pub mod pair;
pub mod pfm;
pub mod ply;
pub mod scene;

pub use self::cam::{parse_cam, write_cam, CamFile};
pub use self::image::{read_image, write_png};
pub use self::pair::{parse_pair, write_pair, Neighbor, PairList};
pub use self::pfm::{read_pfm, read_pfm_file, write_pfm, write_pfm_file};
pub use self::ply::{read_ply, read_ply_file, write_ply, write_ply_file};
pub use self::scene::{view_name, SceneLayout};
