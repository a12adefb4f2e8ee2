//! Label-preserving training augmentations: horizontal mirror, vertical
//! flip, and quarter-turn rotations on square CHW tensors.

use rand::Rng;

use crate::engine::scalar::Scalar;
use crate::engine::tensor::Tensor;
use crate::error::{Error, Result};

/// One sampled augmentation: an independent coin flip for the mirror and the
/// flip, and a uniform choice of quarter turns.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AugmentDraw {
    pub mirror: bool,
    pub flip: bool,
    pub quarter_turns: u8,
}

impl AugmentDraw {
    pub const IDENTITY: AugmentDraw = AugmentDraw { mirror: false, flip: false, quarter_turns: 0 };

    pub fn is_identity(&self) -> bool {
        *self == Self::IDENTITY
    }
}

/// Sample a draw honoring the per-transform toggles.
pub fn draw_augment(rng: &mut impl Rng, mirror: bool, flip: bool, rotate: bool) -> AugmentDraw {
    AugmentDraw {
        mirror: mirror && rng.gen::<bool>(),
        flip: flip && rng.gen::<bool>(),
        quarter_turns: if rotate { rng.gen_range(0..4u8) } else { 0 },
    }
}

/// Apply a draw to a square `C x H x W` tensor. The identity draw returns
/// the input bitwise.
pub fn apply_augment<S: Scalar>(x: &Tensor<S>, draw: AugmentDraw) -> Result<Tensor<S>> {
    let shape = x.shape();
    if shape.len() != 3 || shape[1] != shape[2] {
        return Err(Error::shape(
            "apply_augment",
            format!("expected a square CHW image, got {shape:?}"),
        ));
    }
    if draw.is_identity() {
        return Ok(x.clone());
    }
    let (c, n) = (shape[0], shape[1]);
    let src = x.data();
    let mut out = vec![S::zero(); src.len()];
    for ch in 0..c {
        let plane = &src[ch * n * n..(ch + 1) * n * n];
        let dst = &mut out[ch * n * n..(ch + 1) * n * n];
        for i in 0..n {
            for j in 0..n {
                // Walk the source location of output pixel (i, j) backward
                // through the transform chain rotate(flip(mirror(x))).
                let (mut si, mut sj) = (i, j);
                // Invert the rotation (output = rotate^q of its input).
                for _ in 0..draw.quarter_turns {
                    // rot90 maps (r, c) -> (c, n-1-r); inverse is (r, c) -> (n-1-c, r).
                    let (pi, pj) = (n - 1 - sj, si);
                    si = pi;
                    sj = pj;
                }
                if draw.flip {
                    si = n - 1 - si;
                }
                if draw.mirror {
                    sj = n - 1 - sj;
                }
                dst[i * n + j] = plane[si * n + sj];
            }
        }
    }
    Tensor::new(shape.to_vec(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn image() -> Tensor<f32> {
        let data: Vec<f32> = (0..2 * 4 * 4).map(|i| i as f32).collect();
        Tensor::new(vec![2, 4, 4], data).unwrap()
    }

    #[test]
    fn identity_draw_is_bitwise_identity() {
        let x = image();
        let y = apply_augment(&x, AugmentDraw::IDENTITY).unwrap();
        assert_eq!(x.data(), y.data());
    }

    #[test]
    fn double_half_turn_is_identity() {
        let x = image();
        let once = apply_augment(&x, AugmentDraw { mirror: false, flip: false, quarter_turns: 2 }).unwrap();
        let twice = apply_augment(&once, AugmentDraw { mirror: false, flip: false, quarter_turns: 2 }).unwrap();
        assert_eq!(x.data(), twice.data());
        assert_ne!(x.data(), once.data());
    }

    #[test]
    fn mirror_and_flip_are_involutions() {
        let x = image();
        for draw in [
            AugmentDraw { mirror: true, flip: false, quarter_turns: 0 },
            AugmentDraw { mirror: false, flip: true, quarter_turns: 0 },
        ] {
            let y = apply_augment(&apply_augment(&x, draw).unwrap(), draw).unwrap();
            assert_eq!(x.data(), y.data());
        }
    }

    #[test]
    fn quarter_turn_moves_corner_correctly() {
        // 1x2x2 image [[a, b], [c, d]]; one counter-scan-order turn
        // (r, c) -> (c, n-1-r) sends a(0,0) -> (0, 1).
        let x = Tensor::new(vec![1, 2, 2], vec![1.0f32, 2.0, 3.0, 4.0]).unwrap();
        let y = apply_augment(&x, AugmentDraw { mirror: false, flip: false, quarter_turns: 1 }).unwrap();
        assert_eq!(y.data(), &[3.0, 1.0, 4.0, 2.0]);
    }

    #[test]
    fn pixel_multiset_is_preserved_under_random_draws() {
        let x = image();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut want: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
        want.sort_unstable();
        for _ in 0..64 {
            let draw = draw_augment(&mut rng, true, true, true);
            let y = apply_augment(&x, draw).unwrap();
            let mut got: Vec<u32> = y.data().iter().map(|v| v.to_bits()).collect();
            got.sort_unstable();
            assert_eq!(want, got);
        }
    }

    #[test]
    fn toggles_suppress_transforms() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..32 {
            let d = draw_augment(&mut rng, false, false, false);
            assert!(d.is_identity());
        }
    }

    #[test]
    fn non_square_rejected() {
        let x = Tensor::<f32>::zeros(vec![1, 2, 3]);
        assert!(apply_augment(&x, AugmentDraw::IDENTITY).is_err());
    }
}
