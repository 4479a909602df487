use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    cross_entropy, relu_backward_inplace, relu_inplace, softmax, BatchNorm2d, BnCache, Conv2d,
    Linear, KERNEL,
};
use super::tensor::Tensor;
use super::ClassifierError;
use crate::tactile::{MisalignmentKind, MisalignmentLabel, CHANNELS, COLS, FRAME_LEN, ROWS};

pub const MODEL_FORMAT: &str = "mobile-charger-cnn";
pub const MODEL_VERSION: u32 = 1;

/// Layer widths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub fc1_units: usize,
    pub fc2_units: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self { conv1_channels: 8, conv2_channels: 16, fc1_units: 128, fc2_units: 64 }
    }
}

impl Architecture {
    pub const fn conv1_hw() -> (usize, usize) {
        (ROWS - KERNEL + 1, COLS - KERNEL + 1)
    }

    pub const fn conv2_hw() -> (usize, usize) {
        (ROWS - 2 * (KERNEL - 1), COLS - 2 * (KERNEL - 1))
    }

    pub fn flat_features(&self) -> usize {
        let (h, w) = Self::conv2_hw();
        self.conv2_channels * h * w
    }

    pub fn validate(&self) -> Result<(), ClassifierError> {
        if [self.conv1_channels, self.conv2_channels, self.fc1_units, self.fc2_units]
            .contains(&0)
        {
            return Err(ClassifierError::InvalidModel("layer widths must be >= 1".into()));
        }
        Ok(())
    }
}

pub const PARAM_NAMES: [&str; 14] = [
    "conv1.weight",
    "conv1.bias",
    "bn1.gamma",
    "bn1.beta",
    "conv2.weight",
    "conv2.bias",
    "bn2.gamma",
    "bn2.beta",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
    "fc3.weight",
    "fc3.bias",
];

/// conv → BN → ReLU → conv → BN → ReLU → fc → ReLU → fc → ReLU → fc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnModel {
    pub kind: MisalignmentKind,
    pub arch: Architecture,
    pub conv1: Conv2d,
    pub bn1: BatchNorm2d,
    pub conv2: Conv2d,
    pub bn2: BatchNorm2d,
    pub fc1: Linear,
    pub fc2: Linear,
    pub fc3: Linear,
}

/// Activations of a training-mode pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub n: usize,
    pub input: Vec<f64>,
    pub conv1_out: Vec<f64>,
    pub bn1: BnCache,
    /// Post-ReLU block 1 output.
    pub block1: Vec<f64>,
    pub conv2_out: Vec<f64>,
    pub bn2: BnCache,
    /// Post-ReLU block 2 output, also the flattened features.
    pub block2: Vec<f64>,
    pub hidden1: Vec<f64>,
    pub hidden2: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Gradients, one buffer per entry of [`PARAM_NAMES`].
pub type Gradients = Vec<Vec<f64>>;

fn xavier<R: Rng>(t: &mut Tensor, fan_in: usize, fan_out: usize, rng: &mut R) {
    let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in t.data_mut() {
        *v = rng.random_range(-a..a);
    }
}

impl CnnModel {
    /// Xavier-uniform weights, zero biases, identity batch norm.
    pub fn new(kind: MisalignmentKind, arch: Architecture, seed: u64) -> Result<Self, ClassifierError> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k2 = KERNEL * KERNEL;
        let mut m = Self {
            kind,
            arch,
            conv1: Conv2d::zeros(CHANNELS, arch.conv1_channels),
            bn1: BatchNorm2d::new(arch.conv1_channels),
            conv2: Conv2d::zeros(arch.conv1_channels, arch.conv2_channels),
            bn2: BatchNorm2d::new(arch.conv2_channels),
            fc1: Linear::zeros(arch.flat_features(), arch.fc1_units),
            fc2: Linear::zeros(arch.fc1_units, arch.fc2_units),
            fc3: Linear::zeros(arch.fc2_units, kind.num_classes()),
        };
        xavier(&mut m.conv1.weight, CHANNELS * k2, arch.conv1_channels * k2, &mut rng);
        xavier(&mut m.conv2.weight, arch.conv1_channels * k2, arch.conv2_channels * k2, &mut rng);
        xavier(&mut m.fc1.weight, arch.flat_features(), arch.fc1_units, &mut rng);
        xavier(&mut m.fc2.weight, arch.fc1_units, arch.fc2_units, &mut rng);
        xavier(&mut m.fc3.weight, arch.fc2_units, kind.num_classes(), &mut rng);
        Ok(m)
    }

    /// Like [`CnnModel::new`] but with every bias, BN affine parameter and
    /// running statistic also drawn at random.
    pub fn randomized(kind: MisalignmentKind, arch: Architecture, seed: u64) -> Result<Self, ClassifierError> {
        let mut m = Self::new(kind, arch, seed)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005E_ED0F_B1A5);
        for t in [&mut m.conv1.bias, &mut m.conv2.bias, &mut m.fc1.bias, &mut m.fc2.bias, &mut m.fc3.bias]
        {
            t.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.1..0.1));
        }
        for bn in [&mut m.bn1, &mut m.bn2] {
            bn.gamma.data_mut().iter_mut().for_each(|v| *v = rng.random_range(0.5..1.5));
            bn.beta.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-0.2..0.2));
            bn.running_mean.data_mut().iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
            bn.running_var.data_mut().iter_mut().for_each(|v| *v = rng.random_range(0.5..2.0));
        }
        Ok(m)
    }

    pub fn num_classes(&self) -> usize {
        self.kind.num_classes()
    }

    pub fn num_parameters(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn params(&self) -> [&Tensor; 14] {
        [
            &self.conv1.weight,
            &self.conv1.bias,
            &self.bn1.gamma,
            &self.bn1.beta,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.bn2.gamma,
            &self.bn2.beta,
            &self.fc1.weight,
            &self.fc1.bias,
            &self.fc2.weight,
            &self.fc2.bias,
            &self.fc3.weight,
            &self.fc3.bias,
        ]
    }

    pub fn params_mut(&mut self) -> [&mut Tensor; 14] {
        [
            &mut self.conv1.weight,
            &mut self.conv1.bias,
            &mut self.bn1.gamma,
            &mut self.bn1.beta,
            &mut self.conv2.weight,
            &mut self.conv2.bias,
            &mut self.bn2.gamma,
            &mut self.bn2.beta,
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
            &mut self.fc3.weight,
            &mut self.fc3.bias,
        ]
    }

    fn check_batch(&self, x: &[f64], n: usize) -> Result<(), ClassifierError> {
        if n == 0 || x.len() != n * FRAME_LEN {
            return Err(ClassifierError::ShapeMismatch {
                expected: vec![n, CHANNELS, ROWS, COLS],
                got: vec![x.len()],
            });
        }
        Ok(())
    }

    /// Training-mode pass: batch norm uses batch statistics.
    pub fn forward_train(&self, x: &[f64], n: usize) -> Result<ForwardCache, ClassifierError> {
        self.check_batch(x, n)?;
        let (h1, w1) = Architecture::conv1_hw();
        let (h2, w2) = Architecture::conv2_hw();
        let conv1_out = self.conv1.forward(x, n, ROWS, COLS);
        let (mut block1, bn1) = self.bn1.forward_train(&conv1_out, n, h1 * w1);
        relu_inplace(&mut block1);
        let conv2_out = self.conv2.forward(&block1, n, h1, w1);
        let (mut block2, bn2) = self.bn2.forward_train(&conv2_out, n, h2 * w2);
        relu_inplace(&mut block2);
        let (hidden1, hidden2, logits) = self.head(&block2, n);
        Ok(ForwardCache {
            n,
            input: x.to_vec(),
            conv1_out,
            bn1,
            block1,
            conv2_out,
            bn2,
            block2,
            hidden1,
            hidden2,
            logits,
        })
    }

    /// Fully connected part from flattened features.
    pub(crate) fn head(&self, features: &[f64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut hidden1 = self.fc1.forward(features, n);
        relu_inplace(&mut hidden1);
        let mut hidden2 = self.fc2.forward(&hidden1, n);
        relu_inplace(&mut hidden2);
        let logits = self.fc3.forward(&hidden2, n);
        (hidden1, hidden2, logits)
    }

    /// Inference-mode logits: batch norm uses running statistics.
    pub fn forward_eval(&self, x: &[f64], n: usize) -> Result<Vec<f64>, ClassifierError> {
        self.check_batch(x, n)?;
        let (h1, w1) = Architecture::conv1_hw();
        let (h2, w2) = Architecture::conv2_hw();
        let mut a = self.bn1.forward_eval(&self.conv1.forward(x, n, ROWS, COLS), n, h1 * w1);
        relu_inplace(&mut a);
        let mut b = self.bn2.forward_eval(&self.conv2.forward(&a, n, h1, w1), n, h2 * w2);
        relu_inplace(&mut b);
        Ok(self.head(&b, n).2)
    }

    /// Mean cross-entropy of a batch of logits.
    pub fn batch_loss(&self, logits: &[f64], labels: &[usize]) -> f64 {
        let c = self.num_classes();
        labels
            .iter()
            .enumerate()
            .map(|(s, &y)| cross_entropy(&logits[s * c..][..c], y))
            .sum::<f64>()
            / labels.len() as f64
    }

    /// Mean cross-entropy loss and its gradient for every parameter.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        labels: &[usize],
    ) -> Result<(f64, Gradients), ClassifierError> {
        let n = cache.n;
        let c = self.num_classes();
        if labels.len() != n {
            return Err(ClassifierError::ShapeMismatch { expected: vec![n], got: vec![labels.len()] });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= c) {
            return Err(ClassifierError::InvalidModel(format!("label {bad} >= {c} classes")));
        }
        let loss = self.batch_loss(&cache.logits, labels);
        let mut grads: Gradients = self.params().iter().map(|t| vec![0.0; t.len()]).collect();
        let (h1, w1) = Architecture::conv1_hw();
        let (h2, w2) = Architecture::conv2_hw();

        let mut dlogits = vec![0.0; n * c];
        for (s, &y) in labels.iter().enumerate() {
            let p = softmax(&cache.logits[s * c..][..c]);
            for k in 0..c {
                dlogits[s * c + k] = (p[k] - if k == y { 1.0 } else { 0.0 }) / n as f64;
            }
        }
        let (g12, g13) = split_pair(&mut grads, 12);
        let mut d = self.fc3.backward(&cache.hidden2, &dlogits, n, g12, g13, true).unwrap();
        relu_backward_inplace(&cache.hidden2, &mut d);
        let (g10, g11) = split_pair(&mut grads, 10);
        let mut d = self.fc2.backward(&cache.hidden1, &d, n, g10, g11, true).unwrap();
        relu_backward_inplace(&cache.hidden1, &mut d);
        let (g8, g9) = split_pair(&mut grads, 8);
        let mut d = self.fc1.backward(&cache.block2, &d, n, g8, g9, true).unwrap();
        relu_backward_inplace(&cache.block2, &mut d);
        let (g6, g7) = split_pair(&mut grads, 6);
        let d = self.bn2.backward(&d, &cache.bn2, n, h2 * w2, g6, g7);
        let (g4, g5) = split_pair(&mut grads, 4);
        let mut d = self.conv2.backward(&cache.block1, &d, n, h1, w1, g4, g5, true).unwrap();
        relu_backward_inplace(&cache.block1, &mut d);
        let (g2, g3) = split_pair(&mut grads, 2);
        let d = self.bn1.backward(&d, &cache.bn1, n, h1 * w1, g2, g3);
        let (g0, g1) = split_pair(&mut grads, 0);
        self.conv1.backward(&cache.input, &d, n, ROWS, COLS, g0, g1, false);
        Ok((loss, grads))
    }

    pub fn predict_proba(&self, input: &Tensor) -> Result<Vec<f64>, ClassifierError> {
        input.check_shape(&[CHANNELS, ROWS, COLS])?;
        Ok(softmax(&self.forward_eval(input.data(), 1)?))
    }

    /// Most probable class, inference mode.
    pub fn classify(&self, input: &Tensor) -> Result<MisalignmentLabel, ClassifierError> {
        let p = self.predict_proba(input)?;
        let best = argmax(&p);
        MisalignmentLabel::new(self.kind, best).map_err(|e| ClassifierError::InvalidModel(e.to_string()))
    }

    /// Checks internal shape consistency and finiteness.
    pub fn validate(&self) -> Result<(), ClassifierError> {
        self.arch.validate()?;
        let a = self.arch;
        let k = KERNEL;
        let expect: [Vec<usize>; 14] = [
            vec![a.conv1_channels, CHANNELS, k, k],
            vec![a.conv1_channels],
            vec![a.conv1_channels],
            vec![a.conv1_channels],
            vec![a.conv2_channels, a.conv1_channels, k, k],
            vec![a.conv2_channels],
            vec![a.conv2_channels],
            vec![a.conv2_channels],
            vec![a.fc1_units, a.flat_features()],
            vec![a.fc1_units],
            vec![a.fc2_units, a.fc1_units],
            vec![a.fc2_units],
            vec![self.num_classes(), a.fc2_units],
            vec![self.num_classes()],
        ];
        for ((t, shape), name) in self.params().iter().zip(expect.iter()).zip(PARAM_NAMES) {
            if t.shape() != shape.as_slice() || t.len() != shape.iter().product::<usize>() {
                return Err(ClassifierError::InvalidModel(format!(
                    "{name}: expected shape {shape:?}, got {:?}",
                    t.shape()
                )));
            }
            if !t.all_finite() {
                return Err(ClassifierError::InvalidModel(format!("{name}: non-finite value")));
            }
        }
        for (bn, c, name) in [(&self.bn1, a.conv1_channels, "bn1"), (&self.bn2, a.conv2_channels, "bn2")] {
            if bn.running_mean.shape() != [c] || bn.running_var.shape() != [c] {
                return Err(ClassifierError::InvalidModel(format!("{name}: running stats shape")));
            }
            if bn.running_var.data().iter().any(|v| !(v.is_finite() && *v >= 0.0))
                || !bn.running_mean.all_finite()
                || bn.eps.is_nan()
                || bn.eps <= 0.0
                || !(0.0..=1.0).contains(&bn.momentum)
            {
                return Err(ClassifierError::InvalidModel(format!("{name}: bad running stats")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, ClassifierError> {
        let doc = ModelDocRef { format: MODEL_FORMAT, version: MODEL_VERSION, model: self };
        serde_json::to_string(&doc).map_err(|e| ClassifierError::Json(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let doc: ModelDoc =
            serde_json::from_str(text).map_err(|e| ClassifierError::Json(e.to_string()))?;
        if doc.format != MODEL_FORMAT {
            return Err(ClassifierError::Json(format!("unexpected format '{}'", doc.format)));
        }
        if doc.version != MODEL_VERSION {
            return Err(ClassifierError::UnsupportedVersion(doc.version));
        }
        doc.model.validate()?;
        Ok(doc.model)
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), ClassifierError> {
        std::fs::write(path, self.to_json()?).map_err(|e| ClassifierError::Io(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ClassifierError> {
        let text = std::fs::read_to_string(path).map_err(|e| ClassifierError::Io(e.to_string()))?;
        Self::from_json(&text)
    }
}

#[derive(Serialize)]
struct ModelDocRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a CnnModel,
}

#[derive(Deserialize)]
struct ModelDoc {
    format: String,
    version: u32,
    model: CnnModel,
}

fn split_pair(grads: &mut Gradients, i: usize) -> (&mut [f64], &mut [f64]) {
    let (a, b) = grads.split_at_mut(i + 1);
    (&mut a[i], &mut b[0])
}

/// Index of the largest value, first on ties.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tactile::TactileFrame;

    fn model() -> CnnModel {
        CnnModel::randomized(MisalignmentKind::Angular, Architecture::default(), 3).unwrap()
    }

    #[test]
    fn default_parameter_count() {
        let m = model();
        let expected = (8 * 2 * 9 + 8) + 16 + (16 * 8 * 9 + 16) + 32 + (128 * 576 + 128)
            + (64 * 128 + 64)
            + (6 * 64 + 6);
        assert_eq!(m.num_parameters(), expected);
        assert_eq!(m.arch.flat_features(), 576);
    }

    #[test]
    fn wrong_input_shape_rejected() {
        let m = model();
        let t = Tensor::zeros(&[2, 5, 5]);
        assert!(matches!(m.classify(&t), Err(ClassifierError::ShapeMismatch { .. })));
    }

    #[test]
    fn probabilities_sum_to_one() {
        let m = model();
        let p = m.predict_proba(&Tensor::from(&TactileFrame::zeros())).unwrap();
        assert_eq!(p.len(), 6);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = model();
        let back = CnnModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn json_rejects_bad_version_and_shape() {
        let m = model();
        let mut v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        v["version"] = 99.into();
        assert!(matches!(
            CnnModel::from_json(&v.to_string()),
            Err(ClassifierError::UnsupportedVersion(99))
        ));
        v["version"] = MODEL_VERSION.into();
        v["model"]["fc3"]["bias"]["shape"] = serde_json::json!([5]);
        assert!(CnnModel::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn training_mode_normalizes_batch() {
        let m = CnnModel::new(MisalignmentKind::Angular, Architecture::default(), 1).unwrap();
        let x: Vec<f64> = (0..2 * FRAME_LEN).map(|i| (i % 13) as f64 * 0.5).collect();
        let c = m.forward_train(&x, 2).unwrap();
        for v in &c.bn1.mean {
            assert!(v.is_finite());
        }
        assert_eq!(c.logits.len(), 12);
    }
}
