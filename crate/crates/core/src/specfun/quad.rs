//! Adaptive Gauss-Kronrod quadrature and a log-scaled integrator for
//! positive unimodal integrands.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_600_525_634_580,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// 10-point Gauss weights, paired with XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Result of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// One 21-point Kronrod rule on `[a, b]`: (kronrod, |kronrod - gauss|).
pub fn gk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[10];
    let mut g = 0.0;
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Globally adaptive GK21 over the given breakpoints.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    abs_tol: f64,
    rel_tol: f64,
    max_pieces: usize,
) -> Quadrature {
    let mut heap = BinaryHeap::new();
    let mut evals = 0;
    let (mut total, mut err) = (0.0, 0.0);
    for w in breaks.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (v, e) = gk21(&mut f, w[0], w[1]);
        evals += 21;
        total += v;
        err += e;
        heap.push(Piece { a: w[0], b: w[1], value: v, err: e });
    }
    while err > abs_tol.max(rel_tol * total.abs()) && heap.len() < max_pieces {
        let Some(p) = heap.pop() else { break };
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            heap.push(p);
            break;
        }
        let (v1, e1) = gk21(&mut f, p.a, m);
        let (v2, e2) = gk21(&mut f, m, p.b);
        evals += 42;
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, value: v1, err: e1 });
        heap.push(Piece { a: m, b: p.b, value: v2, err: e2 });
    }
    // Resum to shed the drift from incremental updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let abs_error: f64 = heap.iter().map(|p| p.err).sum();
    Quadrature {
        value,
        abs_error,
        evaluations: evals,
        converged: abs_error <= abs_tol.max(rel_tol * value.abs()),
    }
}

/// `ln ∫ exp(h(s)) ds` over the real line for a smooth unimodal `h` that
/// tends to `-∞` at both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogQuadrature {
    pub ln_value: f64,
    pub rel_error: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Drop below the peak at which the integrand is treated as zero.
const LOG_DROP: f64 = 60.0;

pub fn integrate_log_unimodal<H: Fn(f64) -> f64>(h: H, start: f64, rel_tol: f64) -> LogQuadrature {
    let peak = find_peak(&h, start);
    let hp = h(peak);
    if !hp.is_finite() {
        return LogQuadrature { ln_value: f64::NAN, rel_error: f64::INFINITY, evaluations: 0, converged: false };
    }
    let lo = walk_out(&h, peak, hp, -1.0);
    let hi = walk_out(&h, peak, hp, 1.0);
    let g = |s: f64| (h(s) - hp).exp();
    let q = integrate(g, &[lo, peak, hi], 0.0, rel_tol, 4000);
    LogQuadrature {
        ln_value: hp + q.value.ln(),
        rel_error: q.abs_error / q.value + (-LOG_DROP).exp(),
        evaluations: q.evaluations,
        converged: q.converged,
    }
}

fn walk_out<H: Fn(f64) -> f64>(h: &H, peak: f64, hp: f64, dir: f64) -> f64 {
    let mut d = 0.5;
    for _ in 0..80 {
        let s = peak + dir * d;
        if h(s) < hp - LOG_DROP {
            return s;
        }
        d *= 2.0;
    }
    peak + dir * d
}

fn find_peak<H: Fn(f64) -> f64>(h: &H, start: f64) -> f64 {
    // Bracket the maximum by walking uphill with doubling steps.
    let step0 = 0.25;
    let (a, b);
    let h0 = h(start);
    let (hr, hl) = (h(start + step0), h(start - step0));
    let dir = if hr >= h0 {
        1.0
    } else if hl > h0 {
        -1.0
    } else {
        a = start - step0;
        b = start + step0;
        return golden(h, a, b);
    };
    let mut prev = start;
    let mut cur = start + dir * step0;
    let mut hc = h(cur);
    let mut step = step0;
    loop {
        step *= 2.0;
        let next = cur + dir * step;
        let hn = h(next);
        if !(hn > hc) || step > 1e6 {
            a = prev.min(next);
            b = prev.max(next);
            break;
        }
        prev = cur;
        cur = next;
        hc = hn;
    }
    golden(h, a, b)
}

fn golden<H: Fn(f64) -> f64>(h: &H, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut hc, mut hd) = (h(c), h(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-9 * (1.0 + a.abs()) {
            break;
        }
        if hc > hd {
            b = d;
            d = c;
            hd = hc;
            c = b - r * (b - a);
            hc = h(c);
        } else {
            a = c;
            c = d;
            hc = hd;
            d = a + r * (b - a);
            hd = h(d);
        }
    }
    0.5 * (a + b)
}
