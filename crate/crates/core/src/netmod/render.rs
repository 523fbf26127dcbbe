use crate::autoencoder::AutoencoderModel;
use crate::dsp::{
    apply_envelope, griffin_lim, normalize_frame, normalized_magnitudes, pitch_shift, AudioBuffer,
    MagnitudeFrame, Stft, StftConfig, DEFAULT_GRIFFIN_LIM_ITERATIONS,
};
use crate::{Error, Result, SAMPLE_RATE};

use super::{NodeMode, ParamTrack, SynthArchitecture};

/// Samples dropped from / appended to the predictive-feedback buffer per frame.
pub const DEFAULT_ROTATION: usize = 5;

/// Griffin-Lim iterations for single-frame reconstructions inside predictive
/// feedback.
pub const PREDICTIVE_GRIFFIN_LIM_ITERATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub stft: StftConfig,
    /// Iterations used whenever a node's frames become audio.
    pub griffin_lim_iterations: usize,
    pub predictive_iterations: usize,
    /// Predictive-feedback rotation, `0..=fft_size`.
    pub rotation: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            stft: StftConfig::default(),
            griffin_lim_iterations: DEFAULT_GRIFFIN_LIM_ITERATIONS,
            predictive_iterations: PREDICTIVE_GRIFFIN_LIM_ITERATIONS,
            rotation: DEFAULT_ROTATION,
        }
    }
}

/// Frames needed to cover `seconds` of audio: `ceil(seconds * 44100 / hop)`.
pub fn frames_for_duration(seconds: f64, cfg: &StftConfig) -> Result<usize> {
    if !(seconds.is_finite() && seconds > 0.0) {
        return Err(Error::Argument(format!("duration must be > 0 s, got {seconds}")));
    }
    Ok(((seconds * SAMPLE_RATE as f64) / cfg.hop_size() as f64).ceil() as usize)
}

/// Decodes one frame per row of `track`.
pub fn render_modulator(
    model: &AutoencoderModel,
    track: &ParamTrack,
    n_frames: usize,
) -> Result<Vec<MagnitudeFrame>> {
    if n_frames == 0 {
        return Err(Error::Argument("modulator needs at least one frame".into()));
    }
    (0..n_frames).map(|t| model.decode(track.row(t))).collect()
}

/// Predicts every input frame through the full network. Frame `t > 0` first
/// adds `feedback` times the previous prediction to its input; inputs are
/// normalized right before prediction.
pub fn render_carrier(
    model: &AutoencoderModel,
    input_frames: &[MagnitudeFrame],
    bias_track: Option<&ParamTrack>,
    feedback: f64,
) -> Result<Vec<MagnitudeFrame>> {
    if !(0.0..=1.0).contains(&feedback) {
        return Err(Error::Argument(format!("feedback {feedback} is outside [0, 1]")));
    }
    let mut out: Vec<MagnitudeFrame> = Vec::with_capacity(input_frames.len());
    for (t, frame) in input_frames.iter().enumerate() {
        let input = match out.last() {
            Some(prev) if feedback > 0.0 => frame.blend(prev, feedback as f32)?,
            _ => frame.clone(),
        };
        let bias = bias_track.map(|b| b.row(t));
        out.push(model.predict(&normalize_frame(&input), bias)?);
    }
    Ok(out)
}

/// Frame-by-frame predictive feedback over a `fft_size`-sample buffer.
///
/// Each [`step`](PredictiveFeedback::step) analyzes the buffer with one
/// windowed DFT, predicts the normalized magnitudes, reconstructs the
/// prediction to `fft_size` samples with single-frame Griffin-Lim, then drops
/// the first `rotation` samples of the buffer and appends the first
/// `rotation` samples of the reconstruction.
pub struct PredictiveFeedback<'a> {
    model: &'a AutoencoderModel,
    stft: Stft,
    buffer: Vec<f64>,
    rotation: usize,
    iterations: usize,
    last_reconstruction: Option<Vec<f64>>,
}

impl<'a> PredictiveFeedback<'a> {
    pub fn new(
        model: &'a AutoencoderModel,
        seed: &AudioBuffer,
        cfg: &RenderConfig,
    ) -> Result<Self> {
        let n = cfg.stft.fft_size();
        if seed.len() != n {
            return Err(Error::Argument(format!(
                "predictive feedback seed has {} samples, expected {n}",
                seed.len()
            )));
        }
        if cfg.rotation > n {
            return Err(Error::Argument(format!(
                "rotation {} exceeds the buffer length {n}",
                cfg.rotation
            )));
        }
        Ok(Self {
            model,
            stft: Stft::new(&cfg.stft),
            buffer: seed.samples().to_vec(),
            rotation: cfg.rotation,
            iterations: cfg.predictive_iterations,
            last_reconstruction: None,
        })
    }

    pub fn buffer(&self) -> &[f64] {
        &self.buffer
    }

    /// Time-domain reconstruction of the most recent prediction.
    pub fn last_reconstruction(&self) -> Option<&[f64]> {
        self.last_reconstruction.as_deref()
    }

    pub fn step(&mut self) -> Result<MagnitudeFrame> {
        let spectrum = self.stft.frame(&self.buffer);
        let input = normalize_frame(&MagnitudeFrame::from_complex(&spectrum));
        let predicted = self.model.predict(&input, None)?;
        let recon = griffin_lim(
            std::slice::from_ref(&predicted),
            self.stft.config(),
            self.iterations,
        )?
        .into_samples();
        debug_assert_eq!(recon.len(), self.buffer.len());
        self.buffer.drain(..self.rotation);
        self.buffer.extend_from_slice(&recon[..self.rotation]);
        self.last_reconstruction = Some(recon);
        Ok(predicted)
    }
}

/// Runs [`PredictiveFeedback`] for `n_frames` steps.
pub fn render_predictive_feedback(
    model: &AutoencoderModel,
    seed_audio: &AudioBuffer,
    n_frames: usize,
    cfg: &RenderConfig,
) -> Result<Vec<MagnitudeFrame>> {
    let mut pf = PredictiveFeedback::new(model, seed_audio, cfg)?;
    (0..n_frames).map(|_| pf.step()).collect()
}

/// Frames and audio produced by one node, before leaf post-processing.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRender {
    pub id: String,
    pub frames: Vec<MagnitudeFrame>,
    pub audio: AudioBuffer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderResult {
    /// Every node, in architecture order.
    pub nodes: Vec<NodeRender>,
    /// Post-processed audio of each leaf, in architecture order.
    pub leaves: Vec<(String, AudioBuffer)>,
}

impl RenderResult {
    pub fn leaf(&self, id: &str) -> Option<&AudioBuffer> {
        self.leaves.iter().find(|(l, _)| l == id).map(|(_, a)| a)
    }

    pub fn node(&self, id: &str) -> Option<&NodeRender> {
        self.nodes.iter().find(|n| n.id == id)
    }
}

/// Renders `seconds` of audio through every node of `arch`, depth-first from
/// the root, and post-processes the leaves.
pub fn render_architecture(
    model: &AutoencoderModel,
    arch: &SynthArchitecture,
    seconds: f64,
    cfg: &RenderConfig,
) -> Result<RenderResult> {
    let n_frames = frames_for_duration(seconds, &cfg.stft)?;
    let gl = |frames: &[MagnitudeFrame]| griffin_lim(frames, &cfg.stft, cfg.griffin_lim_iterations);
    let mut rendered: Vec<Option<NodeRender>> = vec![None; arch.nodes().len()];

    for i in arch.depth_first() {
        let node = &arch.nodes()[i];
        let parent = arch
            .parent_index(i)
            .map(|p| rendered[p].as_ref().expect("parents render before children"));
        let frames = match (&node.mode, parent) {
            (NodeMode::Modulator { latent }, _) => {
                latent.warn_if_short(&node.id, n_frames);
                render_modulator(model, latent, n_frames)?
            }
            (NodeMode::Carrier { bias, feedback }, Some(parent)) => {
                if let Some(b) = bias {
                    b.warn_if_short(&node.id, n_frames);
                }
                let input = normalized_magnitudes(&parent.audio, &cfg.stft)?;
                debug_assert_eq!(input.len(), n_frames);
                render_carrier(model, &input, bias.as_ref(), *feedback)?
            }
            (NodeMode::PredictiveFeedback, Some(parent)) => {
                let seed = griffin_lim(&parent.frames[..1], &cfg.stft, cfg.predictive_iterations)?;
                render_predictive_feedback(model, &seed, n_frames, cfg)?
            }
            (_, None) => unreachable!("validated trees give every non-root a parent"),
        };
        let audio = gl(&frames)?;
        rendered[i] = Some(NodeRender {
            id: node.id.clone(),
            frames,
            audio,
        });
    }

    let nodes: Vec<NodeRender> = rendered
        .into_iter()
        .map(|n| n.expect("every node is reachable"))
        .collect();
    let mut leaves = Vec::new();
    for (i, node) in arch.nodes().iter().enumerate() {
        if !arch.is_leaf_index(i) {
            if node.pitch_shift != 0.0 || node.envelope.is_some() {
                tracing::warn!(node = %node.id, "pitch shift and envelope apply to leaves only; ignored");
            }
            continue;
        }
        let mut audio = nodes[i].audio.clone();
        if node.pitch_shift != 0.0 {
            audio = pitch_shift(&audio, node.pitch_shift)?;
        }
        if let Some(env) = &node.envelope {
            audio = apply_envelope(&audio, env).map_err(|e| Error::Spec {
                node: node.id.clone(),
                field: "envelope".into(),
                message: e.to_string(),
            })?;
        }
        leaves.push((node.id.clone(), audio));
    }
    Ok(RenderResult { nodes, leaves })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autoencoder::{LatentVector, LayerSpec, FRAME_BINS, LATENT_DIM};
    use crate::netmod::SynthNode;

    fn model() -> AutoencoderModel {
        AutoencoderModel::initialize(LayerSpec::new(vec![32, LATENT_DIM, 32, FRAME_BINS]).unwrap(), 2)
    }

    #[test]
    fn frame_counts() {
        let cfg = StftConfig::default();
        assert_eq!(frames_for_duration(1.0, &cfg).unwrap(), 44);
        assert_eq!(frames_for_duration(10.0, &cfg).unwrap(), 431);
        assert_eq!(frames_for_duration(0.001, &cfg).unwrap(), 1);
        assert!(frames_for_duration(0.0, &cfg).is_err());
        assert!(frames_for_duration(-1.0, &cfg).is_err());
        assert!(frames_for_duration(f64::NAN, &cfg).is_err());
    }

    #[test]
    fn constant_modulator_repeats_one_frame() {
        let m = model();
        let frames = render_modulator(&m, &LatentVector::splat(3.0).into(), 10).unwrap();
        let expected = m.decode(&LatentVector::splat(3.0)).unwrap();
        assert_eq!(frames.len(), 10);
        assert!(frames.iter().all(|f| *f == expected));
        assert!(render_modulator(&m, &LatentVector::splat(3.0).into(), 0).is_err());
    }

    #[test]
    fn carrier_rejects_feedback_out_of_range() {
        let m = model();
        let frames = vec![MagnitudeFrame::zeros(FRAME_BINS)];
        assert!(render_carrier(&m, &frames, None, 1.01).is_err());
        assert!(render_carrier(&m, &frames, None, -0.1).is_err());
    }

    #[test]
    fn predictive_seed_must_match_fft_size() {
        let m = model();
        let cfg = RenderConfig::default();
        assert!(PredictiveFeedback::new(&m, &AudioBuffer::silence(100), &cfg).is_err());
        let too_far = RenderConfig {
            rotation: 5000,
            ..RenderConfig::default()
        };
        assert!(PredictiveFeedback::new(&m, &AudioBuffer::silence(4096), &too_far).is_err());
    }

    #[test]
    fn single_modulator_render_is_griffin_lim_of_frames() {
        let m = model();
        let arch =
            SynthArchitecture::new(vec![SynthNode::modulator("m", LatentVector::splat(1.0))]).unwrap();
        let cfg = RenderConfig::default();
        let out = render_architecture(&m, &arch, 0.1, &cfg).unwrap();
        let frames = render_modulator(&m, &LatentVector::splat(1.0).into(), 5).unwrap();
        let expected = griffin_lim(&frames, &cfg.stft, 32).unwrap();
        assert_eq!(out.leaves.len(), 1);
        assert_eq!(out.leaf("m").unwrap(), &expected);
        assert_eq!(out.leaf("m").unwrap().len(), cfg.stft.istft_len(5));
    }
}
