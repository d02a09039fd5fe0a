/// Maximizes `g` on `[a, b]` by a coarse scan followed by golden-section
/// refinement of the best bracket. Endpoints are always sampled.
///
/// Returns `(argmax, max)`. For unimodal `g` the argmax is located to within
/// `1e-6 * (b - a)`.
pub fn maximize_scalar<F>(mut g: F, a: f64, b: f64) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    assert!(a < b, "maximize_scalar needs a < b");
    const SCAN: usize = 512;

    let mut best_i = 0usize;
    let mut best_x = a;
    let mut best_v = f64::NEG_INFINITY;
    let mut values = [0.0f64; SCAN + 1];
    for (i, slot) in values.iter_mut().enumerate() {
        let x = a + (b - a) * i as f64 / SCAN as f64;
        let v = g(x);
        let v = if v.is_finite() { v } else { f64::NEG_INFINITY };
        *slot = v;
        if v > best_v {
            best_v = v;
            best_x = x;
            best_i = i;
        }
    }

    // Golden-section search inside the bracket around the best scan point.
    let lo = a + (b - a) * best_i.saturating_sub(1) as f64 / SCAN as f64;
    let hi = a + (b - a) * (best_i + 1).min(SCAN) as f64 / SCAN as f64;
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = g(x1);
    let mut f2 = g(x2);
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..80 {
        if hi - lo < 1e-13 * (b - a).max(1.0) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = g(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = g(x1);
        }
    }
    let xm = 0.5 * (lo + hi);
    let fm = g(xm);
    let mut cands = [(best_x, best_v), (x1, f1), (x2, f2), (xm, fm)];
    cands.sort_by(|p, q| p.1.partial_cmp(&q.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x_star, v_star) = cands[3];
    if v_star.is_finite() {
        (x_star, v_star)
    } else {
        (best_x, best_v)
    }
}
