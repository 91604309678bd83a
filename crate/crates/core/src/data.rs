//! Problem generation and ingestion.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_ETA: f64 = 1e-5;

/// `N` equispaced nodes on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec1D {
    pub a: f64,
    pub b: f64,
    pub n: usize,
}

impl GridSpec1D {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Self> {
        if n < 2 || !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!("invalid grid [{a}, {b}] with {n} nodes")));
        }
        Ok(Self { a, b, n })
    }

    pub fn h(&self) -> f64 {
        (self.b - self.a) / (self.n - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        self.a + i as f64 * self.h()
    }
}

/// The two mixtures used for the 1D experiments: `0.4·N(60, 64) + 0.6·N(40, 36)`
/// and `0.5·N(35, 81) + 0.5·N(70, 81)`, on `[0, 100]`.
pub fn benchmark_mixtures(n: usize) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let grid = GridSpec1D::new(0.0, 100.0, n)?;
    let u = gaussian_mixture(&[0.4, 0.6], &[60.0, 40.0], &[64.0, 36.0], &grid)?;
    let v = gaussian_mixture(&[0.5, 0.5], &[35.0, 70.0], &[81.0, 81.0], &grid)?;
    Ok((u, v, grid.h()))
}

/// Mixture density times `h` at every node, renormalized to sum 1.
pub fn gaussian_mixture(weights: &[f64], means: &[f64], variances: &[f64], grid: &GridSpec1D) -> Result<Vec<f64>> {
    if weights.is_empty() || weights.len() != means.len() || weights.len() != variances.len() {
        return Err(Error::InvalidArgument("weights, means and variances must have equal nonzero length".into()));
    }
    if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidArgument("mixture weights must be nonnegative and sum to 1".into()));
    }
    if variances.iter().any(|s| !(*s > 0.0 && s.is_finite())) || means.iter().any(|m| !m.is_finite()) {
        return Err(Error::InvalidArgument("variances must be positive and means finite".into()));
    }
    let h = grid.h();
    let dens: Vec<f64> = (0..grid.n)
        .map(|i| {
            let x = grid.node(i);
            weights
                .iter()
                .zip(means.iter().zip(variances))
                .map(|(w, (mu, var))| w * (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt())
                .sum::<f64>()
                * h
        })
        .collect();
    normalize(dens)
}

fn normalize(x: Vec<f64>) -> Result<Vec<f64>> {
    let s: f64 = x.iter().sum();
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!("cannot normalize vector with mass {s}")));
    }
    Ok(x.into_iter().map(|a| a / s).collect())
}

/// Seeded i.i.d. `U(0, 1)` draws on an `n × m` grid, normalized to sum 1.
pub fn uniform_random_2d(n: usize, m: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!("grid must be nonempty, got {n} x {m}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    normalize((0..n * m).map(|_| rng.random::<f64>()).collect())
}

/// `(f/‖f‖₁ + η) / (1 + Nη)`: strictly positive, sums to 1.
pub fn rescale(f: &[f64], eta: f64) -> Result<Vec<f64>> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta must be positive, got {eta}")));
    }
    if f.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
        return Err(Error::InvalidArgument("rescale input must be nonnegative and finite".into()));
    }
    let s: f64 = f.iter().sum();
    if s <= 0.0 {
        return Err(Error::InvalidArgument("rescale input has zero mass".into()));
    }
    let denom = 1.0 + f.len() as f64 * eta;
    Ok(f.iter().map(|x| (x / s + eta) / denom).collect())
}

/// Grayscale image, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    width: usize,
    height: usize,
    pixels: Vec<f64>,
}

impl Image2D {
    pub fn new(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image must be nonempty".into()));
        }
        crate::error::check_len(width * height, pixels.len())?;
        if pixels.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::InvalidArgument("pixel intensities must be nonnegative and finite".into()));
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.pixels[row * self.width + col]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.pixels.chunks(self.width).map(<[f64]>::to_vec).collect()
    }

    /// Block-average down to `height × width`; each target pixel is the
    /// mean of its (possibly uneven) source block.
    pub fn downsample(&self, height: usize, width: usize) -> Result<Self> {
        if height == 0 || width == 0 || height > self.height || width > self.width {
            return Err(Error::InvalidArgument(format!(
                "cannot downsample {}x{} to {height}x{width}",
                self.height, self.width
            )));
        }
        let edges = |k: usize, src: usize, dst: usize| (k * src / dst, (k + 1) * src / dst);
        let mut out = Vec::with_capacity(height * width);
        for r in 0..height {
            let (r0, r1) = edges(r, self.height, height);
            for c in 0..width {
                let (c0, c1) = edges(c, self.width, width);
                let mut s = 0.0;
                for rr in r0..r1 {
                    s += self.pixels[rr * self.width + c0..rr * self.width + c1].iter().sum::<f64>();
                }
                out.push(s / ((r1 - r0) * (c1 - c0)) as f64);
            }
        }
        Self::new(width, height, out)
    }

    /// Intensities as a probability vector on an `n × m` grid with
    /// `n = height`, `m = width`; node `(row, col)` has index `row + col·n`.
    /// Normalized, then rescaled with `eta`.
    pub fn to_marginal(&self, eta: f64) -> Result<Vec<f64>> {
        let mut f = Vec::with_capacity(self.pixels.len());
        for c in 0..self.width {
            for r in 0..self.height {
                f.push(self.get(r, c));
            }
        }
        rescale(&f, eta)
    }
}

struct Tokens<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Tokens<'_> {
    fn next(&mut self) -> Result<&str> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.bytes.get(self.pos) == Some(&b'#') {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() && self.bytes[self.pos] != b'#' {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse("unexpected end of PGM data".into()));
        }
        std::str::from_utf8(&self.bytes[start..self.pos]).map_err(|_| Error::Parse("non-ASCII PGM token".into()))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let t = self.next()?;
        t.parse().map_err(|_| Error::Parse(format!("bad PGM {what}: {t:?}")))
    }
}

/// Parse a P2 (ASCII) or P5 (binary) PGM.
pub fn parse_pgm(bytes: &[u8]) -> Result<Image2D> {
    let mut tok = Tokens { bytes, pos: 0 };
    let magic = tok.next()?.to_owned();
    if magic != "P2" && magic != "P5" {
        return Err(Error::Parse(format!("unsupported PGM magic {magic:?}")));
    }
    let width = tok.number("width")?;
    let height = tok.number("height")?;
    let maxval = tok.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse("PGM has zero size".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("unsupported PGM maxval {maxval}")));
    }
    let count = width
        .checked_mul(height)
        .ok_or_else(|| Error::Parse("PGM dimensions overflow".into()))?;
    let mut pixels = Vec::with_capacity(count);
    if magic == "P2" {
        for _ in 0..count {
            let v = tok.number("pixel")?;
            if v > maxval {
                return Err(Error::Parse(format!("pixel {v} exceeds maxval {maxval}")));
            }
            pixels.push(v as f64);
        }
    } else {
        // exactly one whitespace byte separates the header from the raster
        let start = tok.pos + 1;
        let wide = maxval > 255;
        let need = count * if wide { 2 } else { 1 };
        if start > bytes.len() || bytes.len() - start < need {
            return Err(Error::Parse(format!("truncated P5 raster: need {need} bytes")));
        }
        let raster = &bytes[start..start + need];
        if wide {
            pixels.extend(raster.chunks_exact(2).map(|b| u16::from_be_bytes([b[0], b[1]]) as f64));
        } else {
            pixels.extend(raster.iter().map(|&b| b as f64));
        }
        if pixels.iter().any(|&p| p > maxval as f64) {
            return Err(Error::Parse(format!("pixel exceeds maxval {maxval}")));
        }
    }
    Image2D::new(width, height, pixels)
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<Image2D> {
    parse_pgm(&fs::read(path)?)
}

/// Write a PGM; pixels are rounded and clamped to `0..=maxval`.
pub fn write_pgm(path: impl AsRef<Path>, img: &Image2D, maxval: u16, binary: bool) -> Result<()> {
    if maxval == 0 {
        return Err(Error::InvalidArgument("maxval must be positive".into()));
    }
    let q = |p: f64| p.round().clamp(0.0, maxval as f64) as u16;
    let mut out = Vec::new();
    if binary {
        write!(out, "P5\n{} {}\n{}\n", img.width, img.height, maxval)?;
        for &p in &img.pixels {
            if maxval > 255 {
                out.extend_from_slice(&q(p).to_be_bytes());
            } else {
                out.push(q(p) as u8);
            }
        }
    } else {
        write!(out, "P2\n{} {}\n{}\n", img.width, img.height, maxval)?;
        for row in img.pixels.chunks(img.width) {
            let line: Vec<String> = row.iter().map(|&p| q(p).to_string()).collect();
            writeln!(out, "{}", line.join(" "))?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// One value per record; lines starting with `#` are skipped.
pub fn read_csv_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let Some(field) = rec.get(0).filter(|f| !f.is_empty()) else { continue };
        let x: f64 = field
            .parse()
            .map_err(|_| Error::Parse(format!("record {}: not a number: {field:?}", line + 1)))?;
        out.push(x);
    }
    if out.is_empty() {
        return Err(Error::Parse("no values in CSV".into()));
    }
    Ok(out)
}
