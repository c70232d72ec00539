//! ONNX-file backends, run with `tract`.
//!
//! The network must expose its penultimate activations as a graph output.
//! The output named [`PENULTIMATE_OUTPUT`] is used when present, otherwise
//! the first graph output. Inputs are NCHW `f32` images normalized with
//! the ImageNet channel statistics.

use std::path::Path;
use std::sync::Arc;

use image::RgbImage;
use sha2::{Digest, Sha256};
use tract_onnx::pb;
use tract_onnx::prelude::*;

use super::{BackendKind, EmbeddingBackend, EncoderError};

pub const PENULTIMATE_OUTPUT: &str = "penultimate";

const IMAGENET_MEAN: [f32; 3] = [0.485, 0.456, 0.406];
const IMAGENET_STD: [f32; 3] = [0.229, 0.224, 0.225];

type Plan = Arc<TypedRunnableModel>;

pub struct OnnxBackend {
    id: String,
    kind: BackendKind,
    tau: usize,
    width: u32,
    height: u32,
    plan: Plan,
}

impl std::fmt::Debug for OnnxBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OnnxBackend")
            .field("id", &self.id)
            .field("kind", &self.kind)
            .field("tau", &self.tau)
            .field("input", &(self.width, self.height))
            .finish()
    }
}

fn load_err(e: impl std::fmt::Display) -> EncoderError {
    EncoderError::BackendLoadFailure(e.to_string())
}

/// Static dims of a value, `None` for symbolic or missing entries.
fn declared_dims(info: &pb::ValueInfoProto) -> Option<Vec<Option<i64>>> {
    use pb::tensor_shape_proto::dimension::Value;
    use pb::type_proto::Value as TypeValue;
    let ty = info.r#type.as_ref()?;
    let TypeValue::TensorType(t) = ty.value.as_ref()?;
    let shape = t.shape.as_ref()?;
    Some(
        shape
            .dim
            .iter()
            .map(|d| match d.value {
                Some(Value::DimValue(v)) if v > 0 => Some(v),
                _ => None,
            })
            .collect(),
    )
}

/// Loads a backend and checks that its penultimate width matches `kind`.
pub fn load_backend(path: &Path, kind: BackendKind) -> Result<OnnxBackend, EncoderError> {
    load_backend_inferred(path, Some(kind))
}

/// Like [`load_backend`]; with `kind = None` the family is inferred from
/// the penultimate width (2048 or 1056).
pub(crate) fn load_backend_inferred(
    path: &Path,
    kind: Option<BackendKind>,
) -> Result<OnnxBackend, EncoderError> {
    let bytes = std::fs::read(path).map_err(|e| load_err(format!("{}: {e}", path.display())))?;
    let proto = tract_onnx::onnx()
        .proto_model_for_read(&mut bytes.as_slice())
        .map_err(|e| EncoderError::UnsupportedFormat(format!("{}: {e}", path.display())))?;
    let graph = proto
        .graph
        .as_ref()
        .ok_or_else(|| EncoderError::UnsupportedFormat("model has no graph".into()))?;

    let output = graph
        .output
        .iter()
        .find(|o| o.name == PENULTIMATE_OUTPUT)
        .or_else(|| graph.output.first())
        .ok_or_else(|| EncoderError::UnsupportedFormat("model has no outputs".into()))?;
    let output_name = output.name.clone();
    let declared_tau = declared_dims(output)
        .and_then(|d| d.last().copied().flatten())
        .map(|v| v as usize);

    let initializers: std::collections::HashSet<&str> =
        graph.initializer.iter().map(|t| t.name.as_str()).collect();
    let input = graph
        .input
        .iter()
        .find(|i| !initializers.contains(i.name.as_str()))
        .ok_or_else(|| EncoderError::UnsupportedFormat("model has no image input".into()))?;
    let in_dims = declared_dims(input).unwrap_or_default();
    if in_dims.len() != 4 || in_dims[1].is_some_and(|c| c != 3) {
        return Err(EncoderError::UnsupportedFormat(format!(
            "expected an NCHW 3-channel input, found dims {in_dims:?}"
        )));
    }

    let side = kind.map(BackendKind::default_input_side).unwrap_or(224);
    let height = in_dims[2].map(|v| v as u32).unwrap_or(side);
    let width = in_dims[3].map(|v| v as u32).unwrap_or(side);

    let plan = tract_onnx::onnx()
        .model_for_proto_model(&proto)
        .and_then(|m| m.with_input_fact(0, f32::fact([1, 3, height as usize, width as usize]).into()))
        .and_then(|m| m.with_outputs_by_name([output_name.as_str()]))
        .and_then(|m| m.into_optimized())
        .and_then(|m| m.into_runnable())
        .map_err(load_err)?;

    let tau = match declared_tau {
        Some(t) => t,
        None => run(&plan, &RgbImage::new(width, height))?.len(),
    };
    let kind = match kind {
        Some(k) if k.tau() != tau => {
            return Err(EncoderError::TauMismatch {
                expected: k.tau(),
                found: tau,
            })
        }
        Some(k) => k,
        None => BackendKind::from_tau(tau).ok_or(EncoderError::TauMismatch {
            expected: BackendKind::MnasnetClass.tau(),
            found: tau,
        })?,
    };

    let digest = hex::encode(Sha256::digest(&bytes));
    Ok(OnnxBackend {
        id: format!("onnx-{}-{}", kind.name(), &digest[..16]),
        kind,
        tau,
        width,
        height,
        plan,
    })
}

fn run(plan: &Plan, image: &RgbImage) -> Result<Vec<f32>, EncoderError> {
    let (w, h) = image.dimensions();
    let input = tract_ndarray::Array4::from_shape_fn((1, 3, h as usize, w as usize), |(_, c, y, x)| {
        let p = image.get_pixel(x as u32, y as u32)[c] as f32 / 255.0;
        (p - IMAGENET_MEAN[c]) / IMAGENET_STD[c]
    });
    let out = plan
        .run(tvec!(Tensor::from(input).into()))
        .map_err(|e| EncoderError::Inference(e.to_string()))?;
    let view = out[0]
        .to_plain_array_view::<f32>()
        .map_err(|e| EncoderError::Inference(e.to_string()))?;
    Ok(view.iter().copied().collect())
}

impl OnnxBackend {
    pub fn kind(&self) -> BackendKind {
        self.kind
    }
}

impl EmbeddingBackend for OnnxBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn tau(&self) -> usize {
        self.tau
    }

    fn input_size(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    fn embed(&self, image: &RgbImage) -> Result<Vec<f32>, EncoderError> {
        if image.dimensions() != (self.width, self.height) {
            return Err(EncoderError::ShapeMismatch {
                expected: (self.width * self.height * 3) as usize,
                found: (image.width() * image.height() * 3) as usize,
            });
        }
        run(&self.plan, image)
    }
}
