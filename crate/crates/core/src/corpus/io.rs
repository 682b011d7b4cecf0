use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, FeatureSequence, GroundTruthInstance, Split, VideoRecord};
use crate::error::{AssgError, Result};
use crate::numerics::Matrix;

/// Feature file magic: 8 ASCII bytes, followed by u32-le N, u32-le K, then
/// N*K little-endian f32 values in segment-major order.
pub const FEATURE_MAGIC: &[u8; 8] = b"ASSGFEAT";

/// Write one stream's features. Values are stored at 32-bit precision.
pub fn write_features(path: &Path, fs: &FeatureSequence) -> Result<()> {
    let mut buf =
        Vec::with_capacity(16 + fs.n_segments() * fs.k_dims() * 4);
    buf.extend_from_slice(FEATURE_MAGIC);
    buf.extend_from_slice(&(fs.n_segments() as u32).to_le_bytes());
    buf.extend_from_slice(&(fs.k_dims() as u32).to_le_bytes());
    for t in 0..fs.n_segments() {
        for &v in fs.segment(t) {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| AssgError::io(path.display().to_string(), e))?;
    file.write_all(&buf)
        .map_err(|e| AssgError::io(path.display().to_string(), e))
}

/// Read a feature file, widening values to f64. Malformed files are rejected
/// with the byte offset of the problem.
pub fn read_features(path: &Path) -> Result<FeatureSequence> {
    let display = path.display().to_string();
    let mut file = fs::File::open(path).map_err(|e| AssgError::io(display.clone(), e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| AssgError::io(display.clone(), e))?;

    let format_err = |offset: u64, reason: &str| AssgError::Format {
        path: display.clone(),
        offset,
        reason: reason.to_string(),
    };

    if bytes.len() < 8 || &bytes[..8] != FEATURE_MAGIC {
        return Err(format_err(0, "bad magic (expected ASSGFEAT)"));
    }
    if bytes.len() < 16 {
        return Err(format_err(bytes.len() as u64, "truncated header"));
    }
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let k = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if n == 0 || k == 0 {
        return Err(format_err(8, "zero dimension in header"));
    }
    let expected = 16 + n * k * 4;
    if bytes.len() < expected {
        return Err(format_err(
            bytes.len() as u64,
            &format!("truncated payload: expected {expected} bytes total"),
        ));
    }
    if bytes.len() > expected {
        return Err(format_err(
            expected as u64,
            &format!("{} trailing bytes after payload", bytes.len() - expected),
        ));
    }
    let mut data = Vec::with_capacity(n * k);
    for i in 0..n * k {
        let off = 16 + i * 4;
        let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if !v.is_finite() {
            return Err(format_err(off as u64, "non-finite feature value"));
        }
        data.push(v as f64);
    }
    FeatureSequence::new(Matrix::from_vec(n, k, data)?)
}

#[derive(Serialize, Deserialize)]
struct ManifestFeatures {
    rgb: String,
    flow: String,
}

#[derive(Serialize, Deserialize)]
struct ManifestVideo {
    id: String,
    n_segments: usize,
    k_dims: usize,
    labels: Vec<usize>,
    ground_truth: Vec<GroundTruthInstance>,
    features: ManifestFeatures,
    split: Split,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    num_classes: usize,
    videos: Vec<ManifestVideo>,
}

/// Write the corpus to `dir`: one feature file per stream per video under
/// `dir/features/`, plus `dir/manifest.json` with relative paths. Returns
/// the manifest path.
pub fn save_corpus(corpus: &Corpus, dir: &Path) -> Result<PathBuf> {
    let feature_dir = dir.join("features");
    fs::create_dir_all(&feature_dir)
        .map_err(|e| AssgError::io(feature_dir.display().to_string(), e))?;

    let mut videos = Vec::with_capacity(corpus.videos.len());
    for video in &corpus.videos {
        let rgb_rel = format!("features/{}_rgb.feat", video.id);
        let flow_rel = format!("features/{}_flow.feat", video.id);
        write_features(&dir.join(&rgb_rel), &video.rgb)?;
        write_features(&dir.join(&flow_rel), &video.flow)?;
        videos.push(ManifestVideo {
            id: video.id.clone(),
            n_segments: video.n_segments(),
            k_dims: video.rgb.k_dims(),
            labels: video.labels.clone(),
            ground_truth: video.ground_truth.clone(),
            features: ManifestFeatures {
                rgb: rgb_rel,
                flow: flow_rel,
            },
            split: video.split,
        });
    }
    let manifest = Manifest {
        num_classes: corpus.num_classes,
        videos,
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| AssgError::json(path.display().to_string(), e))?;
    fs::write(&path, json).map_err(|e| AssgError::io(path.display().to_string(), e))?;
    Ok(path)
}

/// Load a corpus from its manifest, reading every referenced feature file
/// (paths resolve relative to the manifest's directory).
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus> {
    let display = manifest_path.display().to_string();
    let text = fs::read_to_string(manifest_path).map_err(|e| AssgError::io(display.clone(), e))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| AssgError::json(display.clone(), e))?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut videos = Vec::with_capacity(manifest.videos.len());
    for mv in manifest.videos {
        let rgb = read_features(&base.join(&mv.features.rgb))?;
        let flow = read_features(&base.join(&mv.features.flow))?;
        if rgb.n_segments() != mv.n_segments || rgb.k_dims() != mv.k_dims {
            return Err(AssgError::Config(format!(
                "video {}: manifest says {}x{} but rgb features are {}x{}",
                mv.id,
                mv.n_segments,
                mv.k_dims,
                rgb.n_segments(),
                rgb.k_dims()
            )));
        }
        videos.push(VideoRecord {
            id: mv.id,
            rgb,
            flow,
            labels: mv.labels,
            ground_truth: mv.ground_truth,
            split: mv.split,
        });
    }
    let corpus = Corpus {
        num_classes: manifest.num_classes,
        videos,
    };
    corpus.validate()?;
    Ok(corpus)
}
