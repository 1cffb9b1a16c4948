//! Static replication of a terminal payoff `f(S_T)` by a bond, a forward and
//! strips of puts below and calls above the expansion point.

use alloc::vec::Vec;

use crate::pricer::TerminalLaw;
use crate::special::norm_cdf;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpanError {
    #[error("invalid strike grid: {0}")]
    InvalidGrid(&'static str),
    #[error("payoff is not finite at S={0}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instrument {
    /// Pays 1.
    Bond,
    /// Pays `S - kappa`.
    Forward,
    Put,
    Call,
    /// Pays `1{S > K}`, and 1/2 at `S = K`.
    DigitalCall,
    /// Pays `1{S < K}`, and 1/2 at `S = K`.
    DigitalPut,
}

impl Instrument {
    pub fn as_str(self) -> &'static str {
        match self {
            Instrument::Bond => "bond",
            Instrument::Forward => "forward",
            Instrument::Put => "put",
            Instrument::Call => "call",
            Instrument::DigitalCall => "digital_call",
            Instrument::DigitalPut => "digital_put",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpanningPortfolio {
    pub kappa: f64,
    pub bond_weight: f64,
    pub forward_weight: f64,
    /// `(K, weight)` with `K <= kappa`, sorted by strike.
    pub put_weights: Vec<(f64, f64)>,
    /// `(K, weight)` with `K >= kappa`, sorted by strike.
    pub call_weights: Vec<(f64, f64)>,
    /// Jumps of `f`, as digital calls above `kappa` and digital puts below.
    pub digital_weights: Vec<(Instrument, f64, f64)>,
}

impl SpanningPortfolio {
    pub fn payoff(&self, s: f64) -> f64 {
        let mut v = self.bond_weight + self.forward_weight * (s - self.kappa);
        for &(k, w) in &self.put_weights {
            v += w * (k - s).max(0.0);
        }
        for &(k, w) in &self.call_weights {
            v += w * (s - k).max(0.0);
        }
        for &(kind, k, w) in &self.digital_weights {
            let fires = match kind {
                Instrument::DigitalCall => s > k,
                _ => s < k,
            };
            if s == k {
                v += 0.5 * w;
            } else if fires {
                v += w;
            }
        }
        v
    }

    /// Flat list of `(instrument, strike, weight)`; strike is NaN for bond and forward.
    pub fn rows(&self) -> Vec<(Instrument, f64, f64)> {
        let mut out = Vec::with_capacity(2 + self.put_weights.len() + self.call_weights.len());
        out.push((Instrument::Bond, f64::NAN, self.bond_weight));
        out.push((Instrument::Forward, self.kappa, self.forward_weight));
        out.extend(self.put_weights.iter().map(|&(k, w)| (Instrument::Put, k, w)));
        out.extend(self.call_weights.iter().map(|&(k, w)| (Instrument::Call, k, w)));
        out.extend(self.digital_weights.iter().copied());
        out
    }

    /// Value of the portfolio when `X_T = log S_T` follows `law`.
    pub fn value_under_law(&self, law: &TerminalLaw) -> f64 {
        match law {
            TerminalLaw::Empirical { samples } => {
                samples.iter().map(|&x| self.payoff(libm::exp(x))).sum::<f64>() / samples.len() as f64
            }
            TerminalLaw::Mixture { x0, components } => {
                let s0 = libm::exp(*x0);
                let mut total = 0.0;
                for &(wc, v) in components {
                    let mut val = self.bond_weight + self.forward_weight * (s0 - self.kappa);
                    for &(k, w) in &self.put_weights {
                        let c = bs_call(s0, k, v);
                        val += w * (c - s0 + k);
                    }
                    for &(k, w) in &self.call_weights {
                        val += w * bs_call(s0, k, v);
                    }
                    for &(kind, k, w) in &self.digital_weights {
                        let p = prob_above(s0, k, v);
                        val += w * if kind == Instrument::DigitalCall { p } else { 1.0 - p };
                    }
                    total += wc * val;
                }
                total
            }
        }
    }
}

/// Largest `|portfolio(S) - f(S)|` over `samples` evenly spaced points of `[lo, hi]`.
pub fn reconstruction_error<F: Fn(f64) -> f64>(p: &SpanningPortfolio, f: F, lo: f64, hi: f64, samples: usize) -> f64 {
    (0..samples)
        .map(|i| lo + (hi - lo) * i as f64 / (samples - 1).max(1) as f64)
        .map(|s| (p.payoff(s) - f(s)).abs())
        .fold(0.0, f64::max)
}

/// `E (S_T - K)^+` with `log S_T ~ N(log s0 - v/2, v)`.
pub fn bs_call(s0: f64, k: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return (s0 - k).max(0.0);
    }
    let sd = libm::sqrt(v);
    let d1 = (libm::log(s0 / k) + v / 2.0) / sd;
    s0 * norm_cdf(d1) - k * norm_cdf(d1 - sd)
}

fn prob_above(s0: f64, k: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return if s0 > k { 1.0 } else { 0.0 };
    }
    let sd = libm::sqrt(v);
    norm_cdf((libm::log(s0 / k) - v / 2.0) / sd)
}

/// Local derivative information at a strike node.
struct NodeInfo {
    f_left: f64,
    f_right: f64,
    d1_left: f64,
    d1_right: f64,
    d2_left: f64,
    d2_right: f64,
}

fn eval<F: Fn(f64) -> f64>(f: &F, s: f64) -> Result<f64, SpanError> {
    let v = f(s);
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SpanError::NonFinite(s))
    }
}

// One-sided and central differences with steps of a fifth of the adjacent cell,
// so samples stay inside the neighbouring cells; one-sided limits of `f` are
// extrapolated from each side so jumps at `k` are seen.
fn node_info<F: Fn(f64) -> f64>(f: &F, k: f64, dl: f64, dr: f64) -> Result<NodeInfo, SpanError> {
    let (hl, hr) = (dl / 5.0, dr / 5.0);
    let f0 = eval(f, k)?;
    let mut r = [0.0; 5];
    let mut l = [0.0; 5];
    for j in 1..5 {
        r[j] = eval(f, k + j as f64 * hr)?;
        l[j] = eval(f, k - j as f64 * hl)?;
    }
    let lim_r = 4.0 * r[1] - 6.0 * r[2] + 4.0 * r[3] - r[4];
    let lim_l = 4.0 * l[1] - 6.0 * l[2] + 4.0 * l[3] - l[4];
    let size = f0.abs().max(r[4].abs()).max(l[4].abs()).max(lim_r.abs()).max(lim_l.abs());
    let jump = (lim_r - lim_l).abs() > 1e-6 * size + 1e-12;
    let (fl, fr) = if jump { (lim_l, lim_r) } else { (f0, f0) };
    r[0] = fr;
    l[0] = fl;
    let d1 = |v: &[f64; 5], h: f64| (-25.0 * v[0] + 48.0 * v[1] - 36.0 * v[2] + 16.0 * v[3] - 3.0 * v[4]) / (12.0 * h);
    let d2 =
        |v: &[f64; 5], h: f64| (35.0 * v[0] - 104.0 * v[1] + 114.0 * v[2] - 56.0 * v[3] + 11.0 * v[4]) / (12.0 * h * h);
    let d1_right = d1(&r, hr);
    let d1_left = -d1(&l, hl);
    let scale = d1_left.abs().max(d1_right.abs()).max(size / k.abs()).max(1e-300);
    let kink = (d1_right - d1_left).abs() > 1e-6 * scale;
    if !jump && !kink {
        let h = hl.min(hr);
        let mut c = [0.0; 3];
        for (j, cj) in c.iter_mut().enumerate().skip(1) {
            let t = j as f64 * h;
            let (a, b) = (eval(f, k + t)?, eval(f, k - t)?);
            *cj = (a - 2.0 * f0 + b) / (t * t);
        }
        let dd = (4.0 * c[1] - c[2]) / 3.0;
        let (a1, b1, a2, b2) = (eval(f, k + h)?, eval(f, k - h)?, eval(f, k + 2.0 * h)?, eval(f, k - 2.0 * h)?);
        let dv = (8.0 * (a1 - b1) - (a2 - b2)) / (12.0 * h);
        // on uneven cells a short step would amplify roundoff in the long cell's weight
        let (d2l, d2r) = if hl == hr { (dd, dd) } else { (d2(&l, hl), d2(&r, hr)) };
        return Ok(NodeInfo { f_left: f0, f_right: f0, d1_left: dv, d1_right: dv, d2_left: d2l, d2_right: d2r });
    }
    Ok(NodeInfo { f_left: fl, f_right: fr, d1_left, d1_right, d2_left: d2(&l, hl), d2_right: d2(&r, hr) })
}

/// Decompose `f` on the strike grid around `kappa`.
///
/// `breaks` lists known kinks or jumps of `f`; they are inserted into the grid.
/// Between nodes the second derivative is integrated with the trapezoid rule.
pub fn span_payoff<F: Fn(f64) -> f64>(
    f: F,
    kappa: f64,
    strike_grid: &[f64],
    breaks: &[f64],
) -> Result<SpanningPortfolio, SpanError> {
    if strike_grid.len() < 2 {
        return Err(SpanError::InvalidGrid("need at least two strikes"));
    }
    if strike_grid.iter().any(|&k| !(k > 0.0) || !k.is_finite()) {
        return Err(SpanError::InvalidGrid("strikes must be positive"));
    }
    if strike_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SpanError::InvalidGrid("strikes must be strictly increasing"));
    }
    let (lo, hi) = (strike_grid[0], strike_grid[strike_grid.len() - 1]);
    if !(kappa > lo && kappa < hi) {
        return Err(SpanError::InvalidGrid("kappa must lie inside the grid"));
    }
    let inner: Vec<f64> = breaks.iter().copied().filter(|&b| b > lo && b < hi).collect();
    // a break replaces a strike lying within 5% of the spacing, which would
    // otherwise leave a sliver cell and tiny difference steps
    let spacing = (hi - lo) / (strike_grid.len() - 1) as f64;
    let mut grid: Vec<f64> = strike_grid
        .iter()
        .enumerate()
        .filter(|&(i, &k)| {
            let end = i == 0 || i + 1 == strike_grid.len();
            end || !inner.iter().any(|&b| b != k && (b - k).abs() < 0.05 * spacing)
        })
        .map(|(_, &k)| k)
        .collect();
    grid.push(kappa);
    grid.extend(inner.iter().copied());
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    grid.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());

    let m = grid.len();
    let mut info = Vec::with_capacity(m);
    for i in 0..m {
        let left = if i > 0 { grid[i] - grid[i - 1] } else { f64::INFINITY };
        let right = if i + 1 < m { grid[i + 1] - grid[i] } else { f64::INFINITY };
        let cap = grid[i] / 8.0;
        let (dl, dr) = (left.min(cap), right.min(cap));
        // an end node only has one real neighbour
        let (dl, dr) = (if i == 0 { dr } else { dl }, if i + 1 == m { dl } else { dr });
        info.push(node_info(&f, grid[i], dl, dr)?);
    }

    let ik = grid.iter().position(|&k| k == kappa).unwrap();
    let nk = &info[ik];
    let mut port = SpanningPortfolio {
        kappa,
        bond_weight: nk.f_right,
        forward_weight: nk.d1_right,
        put_weights: Vec::new(),
        call_weights: Vec::new(),
        digital_weights: Vec::new(),
    };
    // a jump at kappa itself is carried by the bond and a digital put
    if nk.f_right != nk.f_left {
        port.digital_weights.push((Instrument::DigitalPut, kappa, nk.f_left - nk.f_right));
    }
    for i in 0..m {
        let k = grid[i];
        let n = &info[i];
        let hl = if i > 0 { 0.5 * (k - grid[i - 1]) } else { 0.0 };
        let hr = if i + 1 < m { 0.5 * (grid[i + 1] - k) } else { 0.0 };
        if i < ik {
            let w = n.d2_left * hl + n.d2_right * hr + (n.d1_right - n.d1_left);
            port.put_weights.push((k, w));
            if n.f_right != n.f_left {
                port.digital_weights.push((Instrument::DigitalPut, k, n.f_left - n.f_right));
            }
        } else if i > ik {
            let w = n.d2_left * hl + n.d2_right * hr + (n.d1_right - n.d1_left);
            port.call_weights.push((k, w));
            if n.f_right != n.f_left {
                port.digital_weights.push((Instrument::DigitalCall, k, n.f_right - n.f_left));
            }
        } else {
            port.put_weights.push((k, n.d2_left * hl + (n.d1_right - n.d1_left)));
            port.call_weights.push((k, n.d2_right * hr));
        }
    }
    Ok(port)
}
