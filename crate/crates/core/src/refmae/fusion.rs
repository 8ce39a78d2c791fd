//! Cross-attention fusion of the three stream encoders.
//!
//! Single-head scaled dot-product attention with query, key, value and
//! output projections; no residual path, normalisation or feed-forward
//! block. The first cascade lets tube-stream tokens attend to ST-stream
//! tokens; the second lets the fused video tokens attend to keypoint
//! tokens. Both outputs are mean-pooled and concatenated as
//! `[cross, video]`.

use ndarray::{concatenate, Array1, Array2, Axis};
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::MaskRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FusionSpec {
    pub dim: usize,
    pub tube_tokens: usize,
    pub st_tokens: usize,
    pub keypoint_tokens: usize,
    pub layers: usize,
}

impl FusionSpec {
    pub fn new(dim: usize, tokens: usize) -> Self {
        FusionSpec {
            dim,
            tube_tokens: tokens,
            st_tokens: tokens,
            keypoint_tokens: tokens,
            layers: 4,
        }
    }
}

/// Projections of one attention layer, each `dim x dim`, applied as
/// `x.dot(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
    pub wo: Array2<f64>,
}

impl AttentionWeights {
    pub fn identity(dim: usize) -> Self {
        let eye = Array2::eye(dim);
        AttentionWeights {
            wq: eye.clone(),
            wk: eye.clone(),
            wv: eye.clone(),
            wo: eye,
        }
    }

    /// Entries drawn from `N(0, 1/dim)`.
    pub fn random(dim: usize, rng: &mut MaskRng) -> Self {
        let normal = Normal::new(0.0, (1.0 / dim as f64).sqrt()).expect("finite scale");
        let mut draw = || Array2::from_shape_simple_fn((dim, dim), || normal.sample(rng.as_rng()));
        AttentionWeights {
            wq: draw(),
            wk: draw(),
            wv: draw(),
            wo: draw(),
        }
    }

    fn attend(&self, queries: &Array2<f64>, context: &Array2<f64>) -> Array2<f64> {
        let q = queries.dot(&self.wq);
        let k = context.dot(&self.wk);
        let v = context.dot(&self.wv);
        let scale = 1.0 / (q.ncols() as f64).sqrt();
        let mut scores = q.dot(&k.t()) * scale;
        for mut row in scores.rows_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let sum = row.sum();
            row /= sum;
        }
        scores.dot(&v).dot(&self.wo)
    }

    fn check(&self, dim: usize) -> Result<()> {
        for (name, w) in [("wq", &self.wq), ("wk", &self.wk), ("wv", &self.wv), ("wo", &self.wo)] {
            if w.dim() != (dim, dim) {
                return Err(Error::ShapeMismatch(format!(
                    "{name} is {:?}, expected {dim}x{dim}",
                    w.dim()
                )));
            }
        }
        Ok(())
    }
}

/// Layer weights for both cascades.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionWeights {
    pub video: Vec<AttentionWeights>,
    pub cross: Vec<AttentionWeights>,
}

impl FusionWeights {
    pub fn identity(spec: &FusionSpec) -> Self {
        FusionWeights {
            video: vec![AttentionWeights::identity(spec.dim); spec.layers],
            cross: vec![AttentionWeights::identity(spec.dim); spec.layers],
        }
    }

    pub fn random(spec: &FusionSpec, rng: &mut MaskRng) -> Self {
        let mut layers = || {
            (0..spec.layers)
                .map(|_| AttentionWeights::random(spec.dim, rng))
                .collect()
        };
        FusionWeights {
            video: layers(),
            cross: layers(),
        }
    }
}

fn check_tokens(name: &str, x: &Array2<f64>, rows: usize, dim: usize) -> Result<()> {
    if x.dim() != (rows, dim) {
        return Err(Error::ShapeMismatch(format!(
            "{name} tokens are {:?}, expected {rows}x{dim}",
            x.dim()
        )));
    }
    Ok(())
}

/// Runs both cascades and returns the `2 * dim` pooled feature.
pub fn fuse(
    spec: &FusionSpec,
    tube: &Array2<f64>,
    st: &Array2<f64>,
    keypoint: &Array2<f64>,
    weights: &FusionWeights,
) -> Result<Array1<f64>> {
    if spec.layers == 0 || spec.dim == 0 {
        return Err(Error::ShapeMismatch(
            "fusion needs at least one layer and dimension".into(),
        ));
    }
    if spec.tube_tokens == 0 || spec.st_tokens == 0 || spec.keypoint_tokens == 0 {
        return Err(Error::ShapeMismatch("every stream needs at least one token".into()));
    }
    check_tokens("tube", tube, spec.tube_tokens, spec.dim)?;
    check_tokens("st", st, spec.st_tokens, spec.dim)?;
    check_tokens("keypoint", keypoint, spec.keypoint_tokens, spec.dim)?;
    if weights.video.len() != spec.layers || weights.cross.len() != spec.layers {
        return Err(Error::ShapeMismatch(format!(
            "{} video and {} cross layers for a {}-layer fusion",
            weights.video.len(),
            weights.cross.len(),
            spec.layers
        )));
    }
    for w in weights.video.iter().chain(&weights.cross) {
        w.check(spec.dim)?;
    }
    let mut video = tube.clone();
    for layer in &weights.video {
        video = layer.attend(&video, st);
    }
    let mut cross = video.clone();
    for layer in &weights.cross {
        cross = layer.attend(&cross, keypoint);
    }
    let pool = |x: &Array2<f64>| x.mean_axis(Axis(0)).expect("nonempty tokens");
    Ok(concatenate![Axis(0), pool(&cross), pool(&video)])
}

#[cfg(test)]
mod tests {
    use ndarray::{array, s};
    use proptest::prelude::*;

    use super::*;

    type Matrix = Vec<Vec<f64>>;

    fn to_rows(a: &Array2<f64>) -> Matrix {
        a.rows().into_iter().map(|r| r.to_vec()).collect()
    }

    fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = vec![vec![0.0; b[0].len()]; a.len()];
        for i in 0..a.len() {
            for j in 0..b[0].len() {
                let mut acc = 0.0;
                for k in 0..b.len() {
                    acc += a[i][k] * b[k][j];
                }
                out[i][j] = acc;
            }
        }
        out
    }

    /// Straight-line attention over nested vectors.
    fn oracle_attend(w: &AttentionWeights, x: &Matrix, ctx: &Matrix) -> Matrix {
        let q = matmul(x, &to_rows(&w.wq));
        let k = matmul(ctx, &to_rows(&w.wk));
        let v = matmul(ctx, &to_rows(&w.wv));
        let d = q[0].len() as f64;
        let mut out = Vec::new();
        for qi in &q {
            let scores: Vec<f64> = k
                .iter()
                .map(|kj| qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() / d.sqrt())
                .collect();
            let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = scores.iter().map(|s| (s - m).exp()).collect();
            let z: f64 = e.iter().sum();
            let mut row = vec![0.0; v[0].len()];
            for (ej, vj) in e.iter().zip(&v) {
                for (r, x) in row.iter_mut().zip(vj) {
                    *r += ej / z * x;
                }
            }
            out.push(row);
        }
        matmul(&out, &to_rows(&w.wo))
    }

    fn oracle_fuse(tube: &Matrix, st: &Matrix, kp: &Matrix, weights: &FusionWeights) -> Vec<f64> {
        let mut video = tube.clone();
        for w in &weights.video {
            video = oracle_attend(w, &video, st);
        }
        let mut cross = video.clone();
        for w in &weights.cross {
            cross = oracle_attend(w, &cross, kp);
        }
        let mean = |m: &Matrix| -> Vec<f64> {
            (0..m[0].len())
                .map(|j| m.iter().map(|r| r[j]).sum::<f64>() / m.len() as f64)
                .collect()
        };
        let mut out = mean(&cross);
        out.extend(mean(&video));
        out
    }

    fn random_tokens(rows: usize, dim: usize, rng: &mut MaskRng) -> Array2<f64> {
        let normal = Normal::new(0.0, 1.0).unwrap();
        Array2::from_shape_simple_fn((rows, dim), || normal.sample(rng.as_rng()))
    }

    #[test]
    fn singleton_streams_pass_values_through() {
        let spec = FusionSpec {
            layers: 1,
            ..FusionSpec::new(2, 1)
        };
        let out = fuse(
            &spec,
            &array![[1.0, 2.0]],
            &array![[3.0, -1.0]],
            &array![[0.5, 7.0]],
            &FusionWeights::identity(&spec),
        )
        .unwrap();
        assert_eq!(out, array![0.5, 7.0, 3.0, -1.0]);
    }

    #[test]
    fn matches_straight_line_oracle() {
        let mut rng = MaskRng::new(2024);
        let spec = FusionSpec::new(4, 3);
        let weights = FusionWeights::random(&spec, &mut rng);
        let (tube, st, kp) = (
            random_tokens(3, 4, &mut rng),
            random_tokens(3, 4, &mut rng),
            random_tokens(3, 4, &mut rng),
        );
        let out = fuse(&spec, &tube, &st, &kp, &weights).unwrap();
        let expected = oracle_fuse(&to_rows(&tube), &to_rows(&st), &to_rows(&kp), &weights);
        assert_eq!(out.len(), 8);
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let spec = FusionSpec::new(2, 2);
        let w = FusionWeights::identity(&spec);
        let ok = Array2::zeros((2, 2));
        assert!(fuse(&spec, &Array2::zeros((3, 2)), &ok, &ok, &w).is_err());
        assert!(fuse(&spec, &ok, &ok, &Array2::zeros((2, 3)), &w).is_err());
        let short = FusionWeights {
            video: w.video[..1].to_vec(),
            cross: w.cross.clone(),
        };
        assert!(matches!(
            fuse(&spec, &ok, &ok, &ok, &short),
            Err(Error::ShapeMismatch(_))
        ));
        let mut wide = w.clone();
        wide.cross[0].wv = Array2::eye(3);
        assert!(fuse(&spec, &ok, &ok, &ok, &wide).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn key_order_does_not_matter(seed in any::<u64>(), tokens in 1usize..5, dim in 1usize..5, swap in any::<(usize, usize)>()) {
            let mut rng = MaskRng::new(seed);
            let spec = FusionSpec { layers: 2, ..FusionSpec::new(dim, tokens) };
            let weights = FusionWeights::random(&spec, &mut rng);
            let tube = random_tokens(tokens, dim, &mut rng);
            let st = random_tokens(tokens, dim, &mut rng);
            let kp = random_tokens(tokens, dim, &mut rng);
            let base = fuse(&spec, &tube, &st, &kp, &weights).unwrap();
            let (i, j) = (swap.0 % tokens, swap.1 % tokens);
            let mut st2 = st.clone();
            let mut kp2 = kp.clone();
            for m in [&mut st2, &mut kp2] {
                let (ri, rj) = (m.row(i).to_owned(), m.row(j).to_owned());
                m.slice_mut(s![i, ..]).assign(&rj);
                m.slice_mut(s![j, ..]).assign(&ri);
            }
            let permuted = fuse(&spec, &tube, &st2, &kp2, &weights).unwrap();
            for (a, b) in base.iter().zip(permuted.iter()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn output_is_twice_the_dimension(dim in 1usize..6, t in 1usize..6, s in 1usize..6, k in 1usize..6) {
            let spec = FusionSpec { dim, tube_tokens: t, st_tokens: s, keypoint_tokens: k, layers: 1 };
            let mut rng = MaskRng::new(1);
            let w = FusionWeights::random(&spec, &mut rng);
            let out = fuse(&spec, &random_tokens(t, dim, &mut rng), &random_tokens(s, dim, &mut rng), &random_tokens(k, dim, &mut rng), &w).unwrap();
            prop_assert_eq!(out.len(), 2 * dim);
        }
    }
}
