//! Wire format for semantic messages (interest points, descriptors and a
//! free-space mask), an i.i.d. bit-flip channel, and a ratio-test matcher.
//!
//! Layout, little-endian:
//!
//! ```text
//! header   "SMSG" | version u16 | width u16 | height u16 | points u32 | dim u16   (16 bytes)
//! point    x u16 | y u16 | confidence u8 | descriptor dim × u8                    (5 + dim bytes)
//! mask     height rows of ceil(width / 8) bytes, MSB = leftmost pixel
//! ```
//!
//! Confidences map `[0, 1]` to `0..=255`, descriptor components map
//! `[-1, 1]` to `0..=255`, both rounding half up.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

pub const MAGIC: [u8; 4] = *b"SMSG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 16;
pub const DEFAULT_DIM: u16 = 256;
pub const DEFAULT_RATIO: f64 = 0.8;
pub const FIXTURE_SEED: u64 = 0x5e3a_11c0_de5e_ed01;

fn quantize_unit_interval(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InterestPoint {
    pub x: u16,
    pub y: u16,
    /// Quantised confidence, `confidence / 255` in `[0, 1]`.
    pub confidence: u8,
}

impl InterestPoint {
    pub fn new(x: u16, y: u16, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(domain(format!("confidence must lie in [0, 1], got {confidence}")));
        }
        Ok(Self {
            x,
            y,
            confidence: quantize_unit_interval(confidence),
        })
    }

    pub fn confidence(&self) -> f64 {
        self.confidence as f64 / 255.0
    }
}

/// A quantised descriptor; component `k` is `-1 + 2·codes[k]/255`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Descriptor {
    pub codes: Vec<u8>,
}

impl Descriptor {
    /// Quantise a unit-norm vector.
    pub fn from_unit(values: &[f64]) -> Result<Self> {
        let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(domain(format!("descriptor must have unit norm, got {norm}")));
        }
        Ok(Self {
            codes: values
                .iter()
                .map(|v| quantize_unit_interval(0.5 * (v + 1.0)))
                .collect(),
        })
    }

    pub fn values(&self) -> Vec<f64> {
        self.codes.iter().map(|c| -1.0 + 2.0 * *c as f64 / 255.0).collect()
    }

    pub fn dim(&self) -> usize {
        self.codes.len()
    }
}

/// Row-major bitmap, one bit per pixel, rows padded to whole bytes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FreeSpaceMask {
    width: u16,
    height: u16,
    bits: Vec<u8>,
}

impl FreeSpaceMask {
    pub fn empty(width: u16, height: u16) -> Self {
        Self {
            width,
            height,
            bits: vec![0; Self::row_bytes(width) * height as usize],
        }
    }

    pub fn row_bytes(width: u16) -> usize {
        (width as usize).div_ceil(8)
    }

    pub fn byte_len(width: u16, height: u16) -> usize {
        Self::row_bytes(width) * height as usize
    }

    pub fn width(&self) -> u16 {
        self.width
    }

    pub fn height(&self) -> u16 {
        self.height
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bits
    }

    fn locate(&self, x: u16, y: u16) -> (usize, u8) {
        let byte = y as usize * Self::row_bytes(self.width) + x as usize / 8;
        (byte, 0x80 >> (x % 8))
    }

    pub fn get(&self, x: u16, y: u16) -> bool {
        let (b, m) = self.locate(x, y);
        self.bits[b] & m != 0
    }

    pub fn set(&mut self, x: u16, y: u16, free: bool) {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) outside mask");
        let (b, m) = self.locate(x, y);
        if free {
            self.bits[b] |= m;
        } else {
            self.bits[b] &= !m;
        }
    }

    pub fn count_free(&self) -> usize {
        self.bits.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Build from packed rows, zeroing the padding bits.
    fn from_packed(width: u16, height: u16, bytes: &[u8]) -> Self {
        let mut bits = bytes.to_vec();
        let rb = Self::row_bytes(width);
        let used = width as usize % 8;
        if used != 0 {
            let keep = !(0xffu8 >> used);
            for row in bits.chunks_mut(rb) {
                row[rb - 1] &= keep;
            }
        }
        Self { width, height, bits }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SemanticMessage {
    pub width: u16,
    pub height: u16,
    pub descriptor_dim: u16,
    pub points: Vec<InterestPoint>,
    pub descriptors: Vec<Descriptor>,
    pub mask: FreeSpaceMask,
}

impl SemanticMessage {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(domain("image dimensions must be positive"));
        }
        if self.points.len() != self.descriptors.len() {
            return Err(domain(format!(
                "{} points but {} descriptors",
                self.points.len(),
                self.descriptors.len()
            )));
        }
        if self.mask.width != self.width || self.mask.height != self.height {
            return Err(domain(format!(
                "mask is {}x{}, image is {}x{}",
                self.mask.width, self.mask.height, self.width, self.height
            )));
        }
        if let Some(p) = self.points.iter().find(|p| p.x >= self.width || p.y >= self.height) {
            return Err(domain(format!("point {p:?} outside the image")));
        }
        if let Some(d) = self.descriptors.iter().find(|d| d.dim() != self.descriptor_dim as usize) {
            return Err(domain(format!(
                "descriptor of dimension {} in a message declaring {}",
                d.dim(),
                self.descriptor_dim
            )));
        }
        Ok(())
    }

    pub fn encoded_len(&self) -> usize {
        HEADER_LEN
            + self.points.len() * (5 + self.descriptor_dim as usize)
            + FreeSpaceMask::byte_len(self.width, self.height)
    }
}

pub fn encode_message(msg: &SemanticMessage) -> Result<Vec<u8>> {
    msg.validate()?;
    let count = u32::try_from(msg.points.len())
        .map_err(|_| Error::Capacity(format!("{} points exceed the u32 count field", msg.points.len())))?;
    let mut out = Vec::with_capacity(msg.encoded_len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&msg.width.to_le_bytes());
    out.extend_from_slice(&msg.height.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    out.extend_from_slice(&msg.descriptor_dim.to_le_bytes());
    for (p, d) in msg.points.iter().zip(&msg.descriptors) {
        out.extend_from_slice(&p.x.to_le_bytes());
        out.extend_from_slice(&p.y.to_le_bytes());
        out.push(p.confidence);
        out.extend_from_slice(&d.codes);
    }
    out.extend_from_slice(msg.mask.as_bytes());
    Ok(out)
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

/// Inverse of [`encode_message`]. Payload damage never fails: coordinates are
/// clamped into the image and mask padding is cleared. Only a short stream
/// or a bad header is an error.
pub fn decode_message(bytes: &[u8]) -> Result<SemanticMessage> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            needed: HEADER_LEN,
            got: bytes.len(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(Error::Malformed(format!("bad magic {:?}", &bytes[..4])));
    }
    let version = u16_at(bytes, 4);
    if version != VERSION {
        return Err(Error::Malformed(format!("unsupported version {version}")));
    }
    let width = u16_at(bytes, 6);
    let height = u16_at(bytes, 8);
    let count = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let dim = u16_at(bytes, 14);
    if width == 0 || height == 0 {
        return Err(Error::Malformed(format!("image size {width}x{height}")));
    }
    let record = 5 + dim as usize;
    let needed = count
        .checked_mul(record)
        .and_then(|p| p.checked_add(HEADER_LEN + FreeSpaceMask::byte_len(width, height)))
        .ok_or_else(|| Error::Malformed(format!("{count} points overflow the length")))?;
    if bytes.len() < needed {
        return Err(Error::Truncated {
            needed,
            got: bytes.len(),
        });
    }
    if bytes.len() > needed {
        return Err(Error::Malformed(format!(
            "{} trailing bytes after the mask",
            bytes.len() - needed
        )));
    }
    let mut points = Vec::with_capacity(count);
    let mut descriptors = Vec::with_capacity(count);
    for k in 0..count {
        let at = HEADER_LEN + k * record;
        points.push(InterestPoint {
            x: u16_at(bytes, at).min(width - 1),
            y: u16_at(bytes, at + 2).min(height - 1),
            confidence: bytes[at + 4],
        });
        descriptors.push(Descriptor {
            codes: bytes[at + 5..at + record].to_vec(),
        });
    }
    let mask_at = HEADER_LEN + count * record;
    Ok(SemanticMessage {
        width,
        height,
        descriptor_dim: dim,
        points,
        descriptors,
        mask: FreeSpaceMask::from_packed(width, height, &bytes[mask_at..]),
    })
}

/// Flip every bit after the header independently with probability `bep`.
pub fn corrupt_bits(bytes: &[u8], bep: f64, seed: u64) -> Result<Vec<u8>> {
    if !(0.0..=0.5).contains(&bep) {
        return Err(domain(format!("bep must lie in [0, 0.5], got {bep}")));
    }
    let mut out = bytes.to_vec();
    if bep == 0.0 {
        return Ok(out);
    }
    let start = HEADER_LEN.min(out.len()) as u64 * 8;
    let total = out.len() as u64 * 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Gaps between flips are geometric.
    let gap = Geometric::new(bep).map_err(|e| domain(e.to_string()))?;
    let mut bit = start + gap.sample(&mut rng);
    while bit < total {
        out[(bit / 8) as usize] ^= 0x80 >> (bit % 8);
        bit = bit.saturating_add(1 + gap.sample(&mut rng));
    }
    Ok(out)
}

/// Squared distance between dequantised descriptors, in units of `(2/255)²`.
fn code_distance(a: &[u8], b: &[u8]) -> u32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = *x as i32 - *y as i32;
            (d * d) as u32
        })
        .sum()
}

/// Best index, best and second-best squared distance.
fn nearest_two(d: impl Iterator<Item = u32>) -> (usize, u32, u32) {
    let mut best = (0, u32::MAX);
    let mut second = u32::MAX;
    for (j, v) in d.enumerate() {
        if v < best.1 {
            second = best.1;
            best = (j, v);
        } else if v < second {
            second = v;
        }
    }
    (best.0, best.1, second)
}

/// Mutual nearest neighbours of the dequantised descriptors that pass the
/// ratio test `d₁/d₂ < ratio` from both sides, sorted by index in `a`.
pub fn match_descriptors(
    a: &SemanticMessage,
    b: &SemanticMessage,
    ratio: f64,
) -> Result<Vec<(usize, usize)>> {
    if a.points.is_empty() || b.points.is_empty() {
        return Err(domain("matching needs two non-empty messages"));
    }
    if a.descriptor_dim != b.descriptor_dim {
        return Err(domain(format!(
            "descriptor dimensions differ: {} vs {}",
            a.descriptor_dim, b.descriptor_dim
        )));
    }
    let nb = b.descriptors.len();
    let dist: Vec<u32> = a
        .descriptors
        .iter()
        .flat_map(|da| b.descriptors.iter().map(|db| code_distance(&da.codes, &db.codes)))
        .collect();
    let r2 = ratio * ratio;
    let passes = |(j, d1, d2): (usize, u32, u32)| {
        (d2 == u32::MAX || (d1 as f64) < r2 * d2 as f64).then_some(j)
    };
    let ab: Vec<Option<usize>> = (0..a.descriptors.len())
        .map(|i| passes(nearest_two(dist[i * nb..(i + 1) * nb].iter().copied())))
        .collect();
    let ba: Vec<Option<usize>> = (0..nb)
        .map(|j| passes(nearest_two(dist[j..].iter().step_by(nb).copied())))
        .collect();
    Ok(ab
        .iter()
        .enumerate()
        .filter_map(|(i, j)| j.filter(|j| ba[*j] == Some(i)).map(|j| (i, j)))
        .collect())
}

/// Fraction of `clean` pairs that survive in `corrupted`.
pub fn match_preservation_ratio(clean: &[(usize, usize)], corrupted: &[(usize, usize)]) -> Result<f64> {
    if clean.is_empty() {
        return Err(domain("preservation ratio of an empty clean match set"));
    }
    let kept: HashSet<&(usize, usize)> = corrupted.iter().collect();
    let hit = clean.iter().filter(|p| kept.contains(p)).count();
    Ok(hit as f64 / clean.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixtureSpec {
    pub n_points: usize,
    pub dim: u16,
    pub width: u16,
    pub height: u16,
}

impl Default for FixtureSpec {
    fn default() -> Self {
        Self {
            n_points: 200,
            dim: DEFAULT_DIM,
            width: 640,
            height: 480,
        }
    }
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 0.0 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Synthetic message: uniform points, random unit descriptors, and a free
/// region below a wavy horizon.
pub fn generate_fixture(spec: &FixtureSpec, seed: u64) -> Result<SemanticMessage> {
    if spec.width == 0 || spec.height == 0 || spec.dim == 0 {
        return Err(domain("fixture needs positive width, height and dim"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(spec.n_points);
    let mut descriptors = Vec::with_capacity(spec.n_points);
    for _ in 0..spec.n_points {
        points.push(InterestPoint {
            x: rng.random_range(0..spec.width),
            y: rng.random_range(0..spec.height),
            confidence: rng.random(),
        });
        descriptors.push(Descriptor::from_unit(&random_unit(spec.dim as usize, &mut rng))?);
    }
    let mut mask = FreeSpaceMask::empty(spec.width, spec.height);
    let h = spec.height as f64;
    let phase: f64 = rng.random::<f64>() * std::f64::consts::TAU;
    for x in 0..spec.width {
        let horizon = h * (0.55 + 0.08 * (x as f64 / 60.0 + phase).sin());
        for y in (horizon.max(0.0) as u16)..spec.height {
            mask.set(x, y, true);
        }
    }
    Ok(SemanticMessage {
        width: spec.width,
        height: spec.height,
        descriptor_dim: spec.dim,
        points,
        descriptors,
        mask,
    })
}

/// 200 points, D = 256, 640×480, fixed seed.
pub fn standard_fixture() -> SemanticMessage {
    generate_fixture(&FixtureSpec::default(), FIXTURE_SEED).expect("default fixture is valid")
}

/// The same scene from a nearby viewpoint: coordinates shifted by `shift`
/// (clamped to the image) and descriptors perturbed by isotropic noise of
/// per-component standard deviation `noise`, then renormalised.
pub fn perturbed_view(
    msg: &SemanticMessage,
    shift: (i32, i32),
    noise: f64,
    seed: u64,
) -> Result<SemanticMessage> {
    msg.validate()?;
    if !(noise >= 0.0) {
        return Err(domain(format!("noise must be >= 0, got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mv = |v: u16, d: i32, max: u16| (v as i32 + d).clamp(0, max as i32 - 1) as u16;
    let points = msg
        .points
        .iter()
        .map(|p| InterestPoint {
            x: mv(p.x, shift.0, msg.width),
            y: mv(p.y, shift.1, msg.height),
            ..*p
        })
        .collect();
    let descriptors = msg
        .descriptors
        .iter()
        .map(|d| {
            let mut v = d.values();
            for c in &mut v {
                let z: f64 = StandardNormal.sample(&mut rng);
                *c += noise * z;
            }
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.iter_mut().for_each(|x| *x /= n);
            Descriptor::from_unit(&v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SemanticMessage {
        points,
        descriptors,
        ..msg.clone()
    })
}

/// `msg` with its points (and descriptors) reordered; returns the message
/// and `perm` such that new index `perm[i]` holds old point `i`.
pub fn shuffled(msg: &SemanticMessage, seed: u64) -> (SemanticMessage, Vec<usize>) {
    let mut order: Vec<usize> = (0..msg.points.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut perm = vec![0; order.len()];
    for (new, old) in order.iter().enumerate() {
        perm[*old] = new;
    }
    let out = SemanticMessage {
        points: order.iter().map(|k| msg.points[*k]).collect(),
        descriptors: order.iter().map(|k| msg.descriptors[*k].clone()).collect(),
        ..msg.clone()
    };
    (out, perm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, seed: u64) -> SemanticMessage {
        generate_fixture(
            &FixtureSpec {
                n_points: n,
                dim: 32,
                width: 37,
                height: 11,
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn empty_message_is_24_bytes() {
        let msg = SemanticMessage {
            width: 8,
            height: 8,
            descriptor_dim: DEFAULT_DIM,
            points: vec![],
            descriptors: vec![],
            mask: FreeSpaceMask::empty(8, 8),
        };
        let b = encode_message(&msg).unwrap();
        assert_eq!(b.len(), 24);
        assert_eq!(&b[..4], b"SMSG");
        assert_eq!(decode_message(&b).unwrap(), msg);
    }

    #[test]
    fn header_layout() {
        let msg = small(3, 1);
        let b = encode_message(&msg).unwrap();
        assert_eq!(u16_at(&b, 4), VERSION);
        assert_eq!(u16_at(&b, 6), 37);
        assert_eq!(u16_at(&b, 8), 11);
        assert_eq!(&b[10..14], &3u32.to_le_bytes());
        assert_eq!(u16_at(&b, 14), 32);
        assert_eq!(b.len(), 16 + 3 * 37 + 5 * 11);
        assert_eq!(u16_at(&b, 16), msg.points[0].x);
    }

    #[test]
    fn round_trip_and_quantisation() {
        let msg = standard_fixture();
        assert_eq!(decode_message(&encode_message(&msg).unwrap()).unwrap(), msg);
        assert_eq!(InterestPoint::new(0, 0, 0.5).unwrap().confidence, 128);
        assert_eq!(InterestPoint::new(0, 0, 1.0).unwrap().confidence, 255);
        assert!(InterestPoint::new(0, 0, 1.5).is_err());
        let d = Descriptor::from_unit(&[0.28, -0.96]).unwrap();
        assert_eq!(d.codes, vec![163, 5]);
        assert!(Descriptor::from_unit(&[0.6, 0.6]).is_err());
    }

    #[test]
    fn payload_is_smaller_than_raw_image() {
        let msg = generate_fixture(&FixtureSpec { n_points: 500, ..FixtureSpec::default() }, 3).unwrap();
        let len = encode_message(&msg).unwrap().len();
        assert_eq!(len, 16 + 500 * 261 + 80 * 480);
        assert!(len < 640 * 480 * 3);
    }

    #[test]
    fn flipped_confidence_bit_is_local() {
        let msg = small(4, 2);
        let mut b = encode_message(&msg).unwrap();
        let at = HEADER_LEN + 2 * 37 + 4;
        b[at] ^= 0x10;
        let d = decode_message(&b).unwrap();
        assert_eq!(d.points[2].confidence, msg.points[2].confidence ^ 0x10);
        let mut fixed = d.clone();
        fixed.points[2].confidence = msg.points[2].confidence;
        assert_eq!(fixed, msg);
    }

    #[test]
    fn damaged_streams() {
        let b = encode_message(&small(2, 3)).unwrap();
        assert!(matches!(decode_message(&b[..10]), Err(Error::Truncated { .. })));
        assert!(matches!(decode_message(&b[..b.len() - 1]), Err(Error::Truncated { .. })));
        let mut bad = b.clone();
        bad[0] = b'X';
        assert!(matches!(decode_message(&bad), Err(Error::Malformed(_))));
        let mut long = b.clone();
        long.push(0);
        assert!(matches!(decode_message(&long), Err(Error::Malformed(_))));
        // Out-of-range coordinates and mask padding are repaired.
        let mut wild = b.clone();
        wild[16] = 0xff;
        wild[17] = 0xff;
        *wild.last_mut().unwrap() = 0xff;
        let d = decode_message(&wild).unwrap();
        assert_eq!(d.points[0].x, 36);
        assert!(d.validate().is_ok());
        assert_eq!(*d.mask.as_bytes().last().unwrap(), 0xf8);
    }

    #[test]
    fn corruption_channel() {
        let b = encode_message(&standard_fixture()).unwrap();
        assert_eq!(corrupt_bits(&b, 0.0, 1).unwrap(), b);
        let c = corrupt_bits(&b, 0.01, 7).unwrap();
        assert_eq!(c, corrupt_bits(&b, 0.01, 7).unwrap());
        assert_ne!(c, corrupt_bits(&b, 0.01, 8).unwrap());
        assert_eq!(&c[..HEADER_LEN], &b[..HEADER_LEN]);
        assert!(corrupt_bits(&b, 0.6, 1).is_err());

        let zeros = vec![0u8; HEADER_LEN + 125_000];
        let c = corrupt_bits(&zeros, 0.5, 3).unwrap();
        let flipped: u32 = c.iter().map(|x| x.count_ones()).sum();
        let frac = flipped as f64 / 1e6;
        assert!((frac - 0.5).abs() < 0.002, "{frac}");
    }

    #[test]
    fn identical_messages_match_to_themselves() {
        let msg = standard_fixture();
        let m = match_descriptors(&msg, &msg, DEFAULT_RATIO).unwrap();
        assert_eq!(m, (0..200).map(|i| (i, i)).collect::<Vec<_>>());
    }

    #[test]
    fn permutation_is_recovered() {
        let msg = generate_fixture(&FixtureSpec { n_points: 50, ..FixtureSpec::default() }, 4).unwrap();
        let (b, perm) = shuffled(&msg, 9);
        let m = match_descriptors(&msg, &b, DEFAULT_RATIO).unwrap();
        assert_eq!(m, perm.iter().enumerate().map(|(i, j)| (i, *j)).collect::<Vec<_>>());
    }

    #[test]
    fn matcher_is_symmetric() {
        let a = standard_fixture();
        let b = perturbed_view(&a, (3, -2), 0.03, 5).unwrap();
        let ab: HashSet<_> = match_descriptors(&a, &b, DEFAULT_RATIO).unwrap().into_iter().collect();
        let ba: HashSet<_> = match_descriptors(&b, &a, DEFAULT_RATIO)
            .unwrap()
            .into_iter()
            .map(|(i, j)| (j, i))
            .collect();
        assert_eq!(ab, ba);
        assert!(ab.len() > 150);
    }

    #[test]
    fn full_corruption_destroys_matches() {
        let a = standard_fixture();
        let b = perturbed_view(&a, (2, 2), 0.02, 1).unwrap();
        let clean = match_descriptors(&a, &b, DEFAULT_RATIO).unwrap();
        let enc = encode_message(&b).unwrap();
        let mut total = 0.0;
        for seed in 0..100 {
            let d = decode_message(&corrupt_bits(&enc, 0.5, seed).unwrap()).unwrap();
            let m = match_descriptors(&a, &d, DEFAULT_RATIO).unwrap();
            total += match_preservation_ratio(&clean, &m).unwrap();
        }
        assert!(total / 100.0 < 0.1, "{}", total / 100.0);
    }

    #[test]
    fn preservation_ratio() {
        let clean = [(0, 0), (1, 1), (2, 5), (3, 3)];
        assert_eq!(match_preservation_ratio(&clean, &clean).unwrap(), 1.0);
        assert_eq!(match_preservation_ratio(&clean, &[(0, 1), (9, 9)]).unwrap(), 0.0);
        assert_eq!(match_preservation_ratio(&clean, &[(0, 0), (2, 5), (3, 4)]).unwrap(), 0.5);
        assert!(match_preservation_ratio(&[], &clean).is_err());
        let m = standard_fixture();
        let empty = SemanticMessage {
            points: vec![],
            descriptors: vec![],
            ..m.clone()
        };
        assert!(match_descriptors(&m, &empty, 0.8).is_err());
    }

    #[test]
    fn mask_bits() {
        let mut mask = FreeSpaceMask::empty(10, 2);
        mask.set(0, 0, true);
        mask.set(9, 1, true);
        assert_eq!(mask.as_bytes(), &[0x80, 0x00, 0x00, 0x40]);
        assert!(mask.get(9, 1) && !mask.get(8, 1));
        assert_eq!(mask.count_free(), 2);
        assert!(standard_fixture().mask.count_free() > 0);
    }
}
