//! Base-2 Sobol' nets, nested uniform (Owen) scrambling, a counter-based
//! Monte Carlo point source and an elementary-interval net checker.

use std::fmt::Write as _;

use crate::error::{domain, Error, Result};

/// Number of base-2 digits carried by the unscrambled net.
pub const DIGITS: usize = 32;
/// Random tail bits appended after the scrambled digits (32 + 21 = 53).
const TAIL_BITS: u32 = 21;

const BUNDLED_TABLE: &str = include_str!("../data/new-joe-kuo-1024.txt");

/// One row of a direction-number file: dimension index, primitive
/// polynomial degree `s`, interior coefficient bits `a`, and the initial
/// direction integers `m_1..m_s`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolynomialRow {
    pub dim: usize,
    pub degree: usize,
    pub coeffs: u64,
    pub initial: Vec<u64>,
}

/// Sobol' direction integers for dimensions `1..=max_dim`.
#[derive(Clone, Debug)]
pub struct DirectionTable {
    header: String,
    rows: Vec<PolynomialRow>,
    /// `directions[j][k]` is `v_{k+1}` of dimension `j+1`, scaled to 32 bits.
    directions: Vec<[u32; DIGITS]>,
}

impl DirectionTable {
    /// The bundled table (1024 dimensions).
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLE).expect("bundled direction table is well formed")
    }

    /// Parses the whitespace-separated `d s a m_1 .. m_s` format. The first
    /// line is a column header; dimension 1 (van der Corput) is implicit.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Config("empty direction table".into()))?.to_string();
        let mut rows = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line_no = lineno + 2;
            if line.trim().is_empty() {
                continue;
            }
            let nums: Vec<u64> = line
                .split_whitespace()
                .map(|t| t.parse::<u64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("direction table line {line_no}: {e}")))?;
            if nums.len() < 3 {
                return Err(Error::Config(format!("direction table line {line_no}: too few fields")));
            }
            let (dim, degree, coeffs) = (nums[0] as usize, nums[1] as usize, nums[2]);
            let initial = nums[3..].to_vec();
            if degree == 0 || initial.len() != degree || degree >= DIGITS {
                return Err(Error::Config(format!(
                    "direction table line {line_no}: degree {degree} with {} initial values",
                    initial.len()
                )));
            }
            if dim != rows.len() + 2 {
                return Err(Error::Config(format!(
                    "direction table line {line_no}: expected dimension {}, found {dim}",
                    rows.len() + 2
                )));
            }
            for (k, &m) in initial.iter().enumerate() {
                if m % 2 == 0 || m >= (1u64 << (k + 1)) {
                    return Err(Error::Config(format!(
                        "direction table line {line_no}: m_{} = {m} must be odd and below 2^{}",
                        k + 1,
                        k + 1
                    )));
                }
            }
            rows.push(PolynomialRow { dim, degree, coeffs, initial });
        }
        let mut directions = Vec::with_capacity(rows.len() + 1);
        directions.push(van_der_corput_directions());
        directions.extend(rows.iter().map(expand_directions));
        Ok(Self { header, rows, directions })
    }

    /// Serializes back to the text format accepted by [`DirectionTable::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header);
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "{} {} {}", r.dim, r.degree, r.coeffs);
            for m in &r.initial {
                let _ = write!(out, " {m}");
            }
            out.push('\n');
        }
        out
    }

    pub fn max_dim(&self) -> usize {
        self.directions.len()
    }

    pub fn rows(&self) -> &[PolynomialRow] {
        &self.rows
    }

    /// Direction integers of dimension `dim` (1-based).
    pub fn directions(&self, dim: usize) -> &[u32; DIGITS] {
        &self.directions[dim - 1]
    }

    /// Unscrambled net of `2^m` points in `s` dimensions, in Gray-code order.
    pub fn generate(&self, m: u32, s: usize) -> Result<DigitalNet> {
        if s > self.max_dim() {
            return Err(Error::Config(format!("dimension {s} exceeds direction table size {}", self.max_dim())));
        }
        if m as usize > DIGITS {
            return Err(Error::Config(format!("m = {m} exceeds {DIGITS} digits")));
        }
        let n = 1usize << m;
        let mut raw_bits = vec![0u32; n * s];
        for j in 0..s {
            let v = &self.directions[j];
            // Gray-code recurrence: x_i = x_{i-1} ^ v_{c}, c = trailing ones of i-1
            let mut x = 0u32;
            for i in 1..n {
                x ^= v[(i - 1).trailing_ones() as usize];
                raw_bits[i * s + j] = x;
            }
        }
        Ok(DigitalNet { m, s, raw_bits })
    }
}

fn van_der_corput_directions() -> [u32; DIGITS] {
    let mut v = [0u32; DIGITS];
    for (k, vk) in v.iter_mut().enumerate() {
        *vk = 1u32 << (DIGITS - 1 - k);
    }
    v
}

/// Bratley-Fox recurrence
/// `m_k = 2 a_1 m_{k-1} ^ 4 a_2 m_{k-2} ^ ... ^ 2^s m_{k-s} ^ m_{k-s}`.
fn expand_directions(row: &PolynomialRow) -> [u32; DIGITS] {
    let s = row.degree;
    let mut m = vec![0u64; DIGITS];
    m[..s].copy_from_slice(&row.initial);
    for k in s..DIGITS {
        let mut val = m[k - s] ^ (m[k - s] << s);
        for i in 1..s {
            let bit = (row.coeffs >> (s - 1 - i)) & 1;
            if bit == 1 {
                val ^= m[k - i] << i;
            }
        }
        m[k] = val;
    }
    let mut v = [0u32; DIGITS];
    for k in 0..DIGITS {
        v[k] = (m[k] << (DIGITS - 1 - k)) as u32;
    }
    v
}

/// `2^m` points of an `s`-dimensional digital net as 32-bit digit patterns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DigitalNet {
    m: u32,
    s: usize,
    raw_bits: Vec<u32>,
}

impl DigitalNet {
    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn len(&self) -> usize {
        1usize << self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    /// Digits of point `i`, one `u32` per dimension.
    pub fn bits(&self, i: usize) -> &[u32] {
        &self.raw_bits[i * self.s..(i + 1) * self.s]
    }

    /// The unscrambled points as reals in `[0, 1)`.
    pub fn points(&self) -> PointSet<f64> {
        let data = self.raw_bits.iter().map(|&b| b as f64 / 4_294_967_296.0).collect();
        PointSet { n: self.len(), s: self.s, data }
    }

    /// Nested uniform scrambling keyed by `(seed, replicate)`.
    ///
    /// The flip applied to digit `k` of coordinate `j` is a hash of
    /// `(seed, replicate, j, k, first k-1 digits)`, which realizes an
    /// independent random permutation at every node of the digit tree. The 32
    /// scrambled digits are followed by 21 hash bits, giving 53-bit outputs in
    /// `(0, 1)`.
    pub fn owen_scramble(&self, seed: u64, replicate: u64) -> PointSet<f64> {
        let n = self.len();
        let s = self.s;
        let keys: Vec<u64> = (0..s).map(|j| stream_key(seed, replicate, j as u64)).collect();
        let mut data = vec![0.0f64; n * s];
        for i in 0..n {
            let row = &self.raw_bits[i * s..(i + 1) * s];
            for j in 0..s {
                data[i * s + j] = scramble_coordinate(row[j], keys[j]);
            }
        }
        PointSet { n, s, data }
    }
}

#[inline]
fn scramble_coordinate(bits: u32, key: u64) -> f64 {
    let mut flips = 0u32;
    for k in 0..DIGITS {
        // prefix = leading k digits, tagged by depth so that prefixes of
        // different lengths never alias
        let prefix = if k == 0 { 0 } else { (bits >> (DIGITS - k)) as u64 };
        let node = prefix | ((k as u64) << 32);
        let h = mix64(key ^ mix64(node));
        flips |= ((h & 1) as u32) << (DIGITS - 1 - k);
    }
    let scrambled = bits ^ flips;
    let tail = mix64(key ^ mix64((bits as u64) | (DIGITS as u64) << 32)) >> (64 - TAIL_BITS);
    let full = ((scrambled as u64) << TAIL_BITS) | tail;
    if full == 0 {
        // probability 2^-53; keep the open-interval contract
        return f64::powi(2.0, -54);
    }
    full as f64 * f64::powi(2.0, -53)
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Key of an independent random stream for `(seed, replicate, index)`.
#[inline]
pub fn stream_key(seed: u64, replicate: u64, index: u64) -> u64 {
    mix64(mix64(mix64(seed) ^ replicate) ^ index.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// `n` i.i.d. uniform points in `(0, 1)^s`, deterministic in `(seed, replicate)`.
///
/// Each coordinate is an independent hash of its `(point, dimension)`
/// counter mapped to `(k + 1/2) 2^{-52}`, so 0 and 1 are never produced.
pub fn mc_points(n: usize, s: usize, seed: u64, replicate: u64) -> PointSet<f64> {
    let key = stream_key(seed, replicate, u64::MAX);
    let scale = f64::powi(2.0, -52);
    let data = (0..n * s)
        .map(|c| {
            let k = mix64(key ^ mix64(c as u64)) >> 12;
            (k as f64 + 0.5) * scale
        })
        .collect();
    PointSet { n, s, data }
}

/// Row-major `n x s` matrix of points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet<T> {
    n: usize,
    s: usize,
    data: Vec<T>,
}

impl<T: Copy> PointSet<T> {
    pub fn from_rows(s: usize, data: Vec<T>) -> Result<Self> {
        if s == 0 || !data.len().is_multiple_of(s) {
            return domain(format!("{} values do not form rows of length {s}", data.len()));
        }
        Ok(Self { n: data.len() / s, s, data })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.s..(i + 1) * self.s]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.s.max(1))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// Column `j` as a vector.
    pub fn column(&self, j: usize) -> Vec<T> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Converts every entry.
    pub fn map<U>(&self, f: impl Fn(T) -> U) -> PointSet<U> {
        PointSet { n: self.n, s: self.s, data: self.data.iter().map(|&v| f(v)).collect() }
    }
}

/// Checks the `(t, m, s)`-net property in base 2: every elementary box
/// `prod_j [a_j 2^{-k_j}, (a_j + 1) 2^{-k_j})` with `sum_j k_j = m - t`
/// holds exactly `2^t` points.
pub fn check_net(points: &PointSet<f64>, m: u32, t: u32) -> Result<bool> {
    if points.len() != 1usize << m {
        return domain(format!("net check needs 2^{m} points, got {}", points.len()));
    }
    if t > m {
        return domain(format!("t = {t} exceeds m = {m}"));
    }
    let s = points.dim();
    let total = (m - t) as usize;
    let expected = 1usize << t;
    // Top `total` digits of each coordinate.
    let digits: Vec<u64> = points
        .as_slice()
        .iter()
        .map(|&u| {
            debug_assert!((0.0..1.0).contains(&u));
            (u * (1u64 << total) as f64).floor() as u64
        })
        .collect();
    let mut shape = vec![0usize; s];
    let mut counts = vec![0usize; 1usize << total];
    loop {
        if shape.iter().sum::<usize>() == total {
            counts.iter_mut().for_each(|c| *c = 0);
            for i in 0..points.len() {
                let mut idx = 0usize;
                for (j, &kj) in shape.iter().enumerate() {
                    let d = (digits[i * s + j] >> (total - kj)) as usize;
                    idx = (idx << kj) | d;
                }
                counts[idx] += 1;
            }
            if counts.iter().any(|&c| c != expected) {
                return Ok(false);
            }
        }
        // next composition candidate (odometer over 0..=total per coordinate)
        let mut j = 0;
        loop {
            if j == s {
                return Ok(true);
            }
            if shape[j] < total {
                shape[j] += 1;
                break;
            }
            shape[j] = 0;
            j += 1;
        }
    }
}

/// Smallest `t` for which `points` form a `(t, m, s)`-net.
pub fn min_quality(points: &PointSet<f64>, m: u32) -> Result<u32> {
    for t in 0..=m {
        if check_net(points, m, t)? {
            return Ok(t);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_table_roundtrips_byte_for_byte() {
        let table = DirectionTable::bundled();
        assert!(table.max_dim() >= 256);
        assert_eq!(table.to_text(), BUNDLED_TABLE);
    }

    #[test]
    fn first_dimension_is_van_der_corput() {
        let net = DirectionTable::bundled().generate(2, 1).unwrap();
        let pts = net.points().column(0);
        assert_eq!(pts, vec![0.0, 0.5, 0.75, 0.25]);
    }

    #[test]
    fn leading_points_match_reference_sobol() {
        // first 8 points of the standard Joe-Kuo Sobol' sequence, dims 1..5
        let expected = [
            [0.0, 0.0, 0.0, 0.0, 0.0],
            [0.5, 0.5, 0.5, 0.5, 0.5],
            [0.75, 0.25, 0.25, 0.25, 0.75],
            [0.25, 0.75, 0.75, 0.75, 0.25],
            [0.375, 0.375, 0.625, 0.875, 0.375],
            [0.875, 0.875, 0.125, 0.375, 0.875],
            [0.625, 0.125, 0.875, 0.625, 0.625],
            [0.125, 0.625, 0.375, 0.125, 0.125],
        ];
        let pts = DirectionTable::bundled().generate(3, 5).unwrap().points();
        for (i, row) in expected.iter().enumerate() {
            assert_eq!(pts.row(i), row, "point {i}");
        }
    }

    #[test]
    fn generate_rejects_oversized_dimension() {
        let table = DirectionTable::bundled();
        assert!(matches!(table.generate(2, table.max_dim() + 1), Err(Error::Config(_))));
    }

    #[test]
    fn parse_rejects_malformed_rows() {
        assert!(DirectionTable::parse("d s a m_i\n2 1 0 2\n").is_err());
        assert!(DirectionTable::parse("d s a m_i\n3 1 0 1\n").is_err());
        assert!(DirectionTable::parse("d s a m_i\n2 2 0 1\n").is_err());
        assert!(DirectionTable::parse("d s a m_i\n2 x 0 1\n").is_err());
        assert!(DirectionTable::parse("").is_err());
    }

    #[test]
    fn one_dimensional_projections_are_0_m_1_nets() {
        let net = DirectionTable::bundled().generate(7, 40).unwrap();
        let pts = net.points();
        for j in 0..40 {
            let mut col: Vec<u64> = pts.column(j).iter().map(|&u| (u * 128.0) as u64).collect();
            col.sort_unstable();
            assert_eq!(col, (0..128).collect::<Vec<_>>(), "dimension {}", j + 1);
        }
    }

    #[test]
    fn scrambling_is_deterministic_and_open() {
        let net = DirectionTable::bundled().generate(8, 6).unwrap();
        let a = net.owen_scramble(7, 3);
        let b = net.owen_scramble(7, 3);
        assert_eq!(a, b);
        assert_ne!(a, net.owen_scramble(7, 4));
        assert_ne!(a, net.owen_scramble(8, 3));
        assert!(a.as_slice().iter().all(|&u| u > 0.0 && u < 1.0));
    }

    #[test]
    fn scrambled_means_are_centered() {
        let pts = DirectionTable::bundled().generate(12, 8).unwrap().owen_scramble(11, 0);
        for j in 0..8 {
            let mean: f64 = pts.column(j).iter().sum::<f64>() / pts.len() as f64;
            assert!((mean - 0.5).abs() < 0.02, "dim {j}: {mean}");
        }
    }

    #[test]
    fn check_net_examples() {
        let table = DirectionTable::bundled();
        let pts = table.generate(4, 2).unwrap().points();
        assert!(check_net(&pts, 4, 0).unwrap());
        assert!(check_net(&pts, 4, 4).unwrap());
        let mc = mc_points(16, 2, 1, 1);
        assert!(check_net(&mc, 4, 4).unwrap());
        assert!(check_net(&mc, 3, 0).is_err());
    }

    #[test]
    fn iid_points_are_not_nets() {
        let failures = (0..20).filter(|&r| !check_net(&mc_points(64, 2, 99, r), 6, 0).unwrap()).count();
        assert!(failures >= 19, "{failures}");
    }

    #[test]
    fn scrambling_preserves_elementary_counts() {
        let table = DirectionTable::bundled();
        for s in 1..=4 {
            for m in 1..=8 {
                let net = table.generate(m, s).unwrap();
                let t = min_quality(&net.points(), m).unwrap();
                for r in 0..3 {
                    assert!(check_net(&net.owen_scramble(5, r), m, t).unwrap(), "s={s} m={m} r={r}");
                }
            }
        }
    }

    #[test]
    fn mc_points_contract() {
        let a = mc_points(100_000, 1, 3, 0);
        assert_eq!(a, mc_points(100_000, 1, 3, 0));
        let mean: f64 = a.as_slice().iter().sum::<f64>() / 1e5;
        assert!((mean - 0.5).abs() < 0.005);
        assert!(a.as_slice().iter().all(|&u| u > 0.0 && u < 1.0));
        assert_ne!(a, mc_points(100_000, 1, 3, 1));
    }
}
