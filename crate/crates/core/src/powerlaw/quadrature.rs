//! Globally adaptive 10-point Gauss / 21-point Kronrod quadrature over a
//! set of pieces.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae (positive half, descending) and weights; the odd
// positions 1, 3, .., 9 are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_794_390,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Stopping rules for [`integrate_pieces`].
#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { rel_tol: 1e-10, abs_tol: 0.0, max_subdivisions: 2000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

/// Applies the 21-point rule on `[a, b]`, returning `(integral, error)`.
pub fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    let mut resabs = resk.abs();
    let mut fv = [(0.0, 0.0); 10];
    for i in 0..10 {
        let dx = h * XGK[i];
        let (f1, f2) = (f(c - dx), f(c + dx));
        fv[i] = (f1, f2);
        resk += WGK[i] * (f1 + f2);
        resabs += WGK[i] * (f1.abs() + f2.abs());
        if i % 2 == 1 {
            resg += WG[i / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for i in 0..10 {
        resasc += WGK[i] * ((fv[i].0 - mean).abs() + (fv[i].1 - mean).abs());
    }
    let (resk, resabs, resasc) = (resk * h, resabs * h.abs(), resasc * h.abs());
    let mut err = (resk - resg * h).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (resk, err)
}

struct Segment {
    piece: usize,
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// One integrand on one finite interval.
pub struct Piece<'a> {
    pub a: f64,
    pub b: f64,
    pub f: Box<dyn Fn(f64) -> f64 + 'a>,
}

/// Sum of the integrals of all pieces, refining whichever segment carries
/// the largest error estimate until the total error meets the tolerance.
pub fn integrate_pieces(pieces: &[Piece<'_>], opts: QuadOptions) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    for (i, p) in pieces.iter().enumerate() {
        if p.b > p.a {
            let (value, err) = gk21(&p.f, p.a, p.b);
            evals += 21;
            heap.push(Segment { piece: i, a: p.a, b: p.b, value, err });
        }
    }
    let mut subdivisions = 0;
    loop {
        // Re-summing keeps the totals free of cancellation drift.
        let value: f64 = heap.iter().map(|s| s.value).sum();
        let err: f64 = heap.iter().map(|s| s.err).sum();
        if !value.is_finite() || !err.is_finite() {
            return Err(Error::Numerical {
                message: "integrand produced a non-finite value".into(),
                achieved: None,
            });
        }
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if err <= target || heap.is_empty() {
            return Ok(QuadResult { value, abs_error: err, evaluations: evals });
        }
        if subdivisions >= opts.max_subdivisions {
            let achieved = if value != 0.0 { err / value.abs() } else { err };
            return Err(Error::Numerical {
                message: format!("quadrature did not converge after {subdivisions} subdivisions"),
                achieved: Some(achieved),
            });
        }
        let worst = heap.pop().unwrap();
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // The segment can no longer be split in floating point.
            let achieved = if value != 0.0 { err / value.abs() } else { err };
            return Err(Error::Numerical {
                message: "quadrature segment collapsed below machine resolution".into(),
                achieved: Some(achieved),
            });
        }
        let f = &pieces[worst.piece].f;
        let (v1, e1) = gk21(f, worst.a, mid);
        let (v2, e2) = gk21(f, mid, worst.b);
        evals += 42;
        subdivisions += 1;
        heap.push(Segment { piece: worst.piece, a: worst.a, b: mid, value: v1, err: e1 });
        heap.push(Segment { piece: worst.piece, a: mid, b: worst.b, value: v2, err: e2 });
    }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    integrate_pieces(&[Piece { a, b, f: Box::new(f) }], opts)
}
