//! File formats and the on-disk frame store.
//!
//! Every writer goes through [`write_atomic`]: the bytes land in a temporary
//! file next to the target, which is then renamed over it.

mod flo;
mod header;
mod pfm;
mod pnm;
mod text;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use flo::{decode_flo, encode_flo, FLO_MAGIC};
pub use pfm::{decode_pfm, encode_pfm, ByteOrder, PfmImage};
pub use pnm::{decode_pgm, decode_ppm, encode_pgm16, encode_ppm};
pub use text::{
    format_intrinsics, format_poses, format_sparse, format_trace, parse_intrinsics, parse_poses, parse_sparse,
    POSE_FILE_TOLERANCE, TRACE_HEADER,
};

use crate::error::{Error, Result};
use crate::geometry::{Intrinsics, PoseSe3};
use crate::optim::{FrameBundle, FrameData, NeighborFrame};
use crate::raster::{same_dims, DepthField, FlowField, ImageRgb, InstanceMask, SparseDepth};
use crate::synth::Scene;

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_bytes(path)?).map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))
}

/// Prefixes format errors with the file they came from.
fn in_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(_) => e,
        other => Error::Format(format!("{}: {other}", path.display())),
    })
}

pub fn read_pfm(path: &Path) -> Result<PfmImage> {
    in_file(path, decode_pfm(&read_bytes(path)?))
}

pub fn write_pfm(path: &Path, img: &PfmImage) -> Result<()> {
    write_atomic(path, &encode_pfm(img, ByteOrder::Little))
}

pub fn read_depth(path: &Path) -> Result<DepthField> {
    in_file(path, read_pfm(path)?.to_depth())
}

pub fn write_depth(path: &Path, depth: &DepthField) -> Result<()> {
    write_pfm(path, &PfmImage::from_depth(depth))
}

pub fn read_flo(path: &Path) -> Result<FlowField> {
    in_file(path, decode_flo(&read_bytes(path)?))
}

pub fn write_flo(path: &Path, flow: &FlowField) -> Result<()> {
    write_atomic(path, &encode_flo(flow))
}

pub fn read_image(path: &Path) -> Result<ImageRgb> {
    in_file(path, decode_ppm(&read_bytes(path)?))
}

pub fn write_image(path: &Path, image: &ImageRgb) -> Result<()> {
    write_atomic(path, &encode_ppm(image))
}

pub fn read_instances(path: &Path) -> Result<InstanceMask> {
    in_file(path, decode_pgm(&read_bytes(path)?))
}

pub fn write_instances(path: &Path, mask: &InstanceMask) -> Result<()> {
    write_atomic(path, &encode_pgm16(mask))
}

pub fn read_poses(path: &Path) -> Result<Vec<(u64, PoseSe3)>> {
    in_file(path, parse_poses(&read_text(path)?))
}

pub fn write_poses(path: &Path, poses: &[(u64, PoseSe3)]) -> Result<()> {
    write_atomic(path, format_poses(poses).as_bytes())
}

pub fn read_intrinsics(path: &Path) -> Result<Intrinsics> {
    in_file(path, parse_intrinsics(&read_text(path)?))
}

pub fn write_intrinsics(path: &Path, k: &Intrinsics) -> Result<()> {
    write_atomic(path, format_intrinsics(k).as_bytes())
}

pub fn read_sparse(path: &Path, width: usize, height: usize) -> Result<SparseDepth> {
    in_file(path, parse_sparse(&read_text(path)?, width, height))
}

pub fn write_sparse(path: &Path, sparse: &SparseDepth) -> Result<()> {
    write_atomic(path, format_sparse(sparse).as_bytes())
}

/// A directory of frames:
///
/// ```text
/// intrinsics.txt              fx fy cx cy width height
/// poses.txt                   id + camera-to-world matrix per frame
/// image_0000.ppm              colour frame
/// instances_0000.pgm          pedestrian ids (0 = background)
/// depth_0000.pfm              ground-truth depth (optional)
/// sparse_0000.txt             sparse depth points (optional)
/// flow_0001_0000.flo          F_{0->1} on the grid of frame 1
/// ```
#[derive(Debug, Clone)]
pub struct FrameStore {
    pub root: PathBuf,
}

impl FrameStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn intrinsics_path(&self) -> PathBuf {
        self.root.join("intrinsics.txt")
    }
    pub fn poses_path(&self) -> PathBuf {
        self.root.join("poses.txt")
    }
    pub fn image_path(&self, t: u64) -> PathBuf {
        self.root.join(format!("image_{t:04}.ppm"))
    }
    pub fn instances_path(&self, t: u64) -> PathBuf {
        self.root.join(format!("instances_{t:04}.pgm"))
    }
    pub fn depth_path(&self, t: u64) -> PathBuf {
        self.root.join(format!("depth_{t:04}.pfm"))
    }
    pub fn sparse_path(&self, t: u64) -> PathBuf {
        self.root.join(format!("sparse_{t:04}.txt"))
    }
    /// Flow from neighbour `t_prime` to target `t`, on the target grid.
    pub fn flow_path(&self, t: u64, t_prime: u64) -> PathBuf {
        self.root.join(format!("flow_{t:04}_{t_prime:04}.flo"))
    }

    /// Writes every frame of a synthetic scene plus flows between adjacent frames.
    pub fn write_scene(&self, scene: &Scene) -> Result<()> {
        fs::create_dir_all(&self.root)?;
        write_intrinsics(&self.intrinsics_path(), scene.intrinsics())?;
        let poses: Vec<(u64, PoseSe3)> = scene.frames.iter().enumerate().map(|(t, f)| (t as u64, f.pose)).collect();
        write_poses(&self.poses_path(), &poses)?;
        for (t, f) in scene.frames.iter().enumerate() {
            let id = t as u64;
            write_image(&self.image_path(id), &f.image)?;
            write_instances(&self.instances_path(id), &f.instances)?;
            write_depth(&self.depth_path(id), &f.depth)?;
            for tp in [t.checked_sub(1), Some(t + 1)].into_iter().flatten() {
                if tp < scene.frames.len() {
                    write_flo(&self.flow_path(id, tp as u64), &scene.flow(t, tp)?)?;
                }
            }
        }
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<Intrinsics> {
        read_intrinsics(&self.intrinsics_path())
    }

    pub fn poses(&self) -> Result<Vec<(u64, PoseSe3)>> {
        read_poses(&self.poses_path())
    }

    /// Loads one frame; missing sparse or ground-truth files are allowed.
    pub fn load_frame(&self, t: u64, pose: PoseSe3, k: &Intrinsics) -> Result<FrameData> {
        let dims = k.dims();
        let image = read_image(&self.image_path(t))?;
        same_dims(dims, image.dims())?;
        let instances = read_instances(&self.instances_path(t))?;
        same_dims(dims, instances.dims())?;
        let sparse_path = self.sparse_path(t);
        let sparse = if sparse_path.exists() {
            read_sparse(&sparse_path, dims.0, dims.1)?
        } else {
            SparseDepth::empty(dims.0, dims.1)
        };
        let depth_path = self.depth_path(t);
        let ground_truth = if depth_path.exists() { Some(read_depth(&depth_path)?) } else { None };
        Ok(FrameData { image, pose, instances, sparse, ground_truth })
    }

    /// Bundle for frame `t` with neighbours `t-1` and `t+1` where both the
    /// frame and its flow file exist. `poses` overrides the stored poses.
    pub fn load_bundle(&self, t: u64, poses: Option<&[(u64, PoseSe3)]>) -> Result<FrameBundle> {
        let k = self.intrinsics()?;
        let stored;
        let poses = match poses {
            Some(p) => p,
            None => {
                stored = self.poses()?;
                &stored
            }
        };
        let pose_of = |id: u64| poses.iter().find(|(i, _)| *i == id).map(|(_, p)| *p);
        let pose = pose_of(t).ok_or_else(|| Error::InvalidArgument(format!("no pose for frame {t}")))?;
        let target = self.load_frame(t, pose, &k)?;
        let mut neighbors = Vec::new();
        for tp in [t.checked_sub(1), t.checked_add(1)].into_iter().flatten() {
            let (Some(p), flow_path) = (pose_of(tp), self.flow_path(t, tp)) else { continue };
            if !flow_path.exists() || !self.image_path(tp).exists() {
                continue;
            }
            let flow = read_flo(&flow_path)?;
            same_dims(k.dims(), flow.dims())?;
            neighbors.push(NeighborFrame { frame: self.load_frame(tp, p, &k)?, flow });
        }
        Ok(FrameBundle { intrinsics: k, frame_index: t, target, neighbors })
    }
}
