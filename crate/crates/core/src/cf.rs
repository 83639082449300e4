//! Regular-encoding compress-and-forward: covariance matrices of the
//! destination output and the relay quantizations, the iterative
//! quantization-noise solver, and the achievable rate.
//!
//! Fixed transmission schedules only; the quantization noise of each relay is
//! determined in descending relay order by balancing the source-coding cost
//! of conveying the quantization against the channel-coding rate of the
//! broadcast message that carries it.

use crate::error::Error;
use crate::model::{
    amplitude_table, KnowledgeMode, MessageAmplitudeTable, MessageId, MessageSpec, NetView,
    NetworkConfig, PowerAllocation, StateDistribution, StateVector, SOURCE,
};

/// Per-relay quantization noise variances. `INFINITY` marks a relay whose
/// quantization conveys nothing (the relay is effectively off).
#[derive(Debug, Clone)]
pub struct QuantizationParams {
    /// Entry `l-1` is the variance for relay `l`.
    pub nhat: Vec<f64>,
}

impl QuantizationParams {
    pub fn all_infinite(num_relays: usize) -> Self {
        QuantizationParams {
            nhat: vec![f64::INFINITY; num_relays],
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        for &v in &self.nhat {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Domain(format!(
                    "quantization noise {v} must be >= 0"
                )));
            }
        }
        Ok(())
    }
}

/// Symmetric covariance matrix of the destination output (first row) and the
/// listed relay quantizations.
#[derive(Debug, Clone)]
pub struct CovMatrix {
    /// Node of each row: destination first, then quantizing relays.
    pub labels: Vec<usize>,
    pub entries: Vec<Vec<f64>>,
}

impl CovMatrix {
    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    /// `log2` of the determinant via Cholesky factorization. Errors if the
    /// matrix is not numerically positive definite.
    pub fn log2_det(&self) -> Result<f64, Error> {
        log2_det_cholesky(&self.entries)
    }
}

/// `log2 det` of a symmetric positive definite matrix.
pub(crate) fn log2_det_cholesky(a: &[Vec<f64>]) -> Result<f64, Error> {
    let n = a.len();
    let mut l = vec![vec![0.0; n]; n];
    let mut log_det = 0.0;
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i][j];
            for k in 0..j {
                sum -= l[i][k] * l[j][k];
            }
            if i == j {
                if sum <= 0.0 {
                    return Err(Error::Numerical(format!(
                        "matrix not positive definite (pivot {sum} at row {i})"
                    )));
                }
                l[i][j] = sum.sqrt();
                log_det += sum.ln();
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    }
    Ok(log_det * std::f64::consts::LOG2_E)
}

/// The compress-and-forward message set: the source's single level plus one
/// broadcast message per relay.
fn cf_messages(alloc: &PowerAllocation, num_relays: usize) -> Vec<MessageSpec> {
    let mut msgs = vec![MessageSpec {
        id: MessageId::Fresh { level: 1 },
        senders: vec![(SOURCE, alloc.nu(SOURCE, SOURCE, 1))],
    }];
    for j in 1..=num_relays {
        msgs.push(MessageSpec {
            id: MessageId::Broadcast { relay: j },
            senders: vec![(j, alloc.omega[j])],
        });
    }
    msgs
}

/// Builds the covariance matrix from an amplitude table: rows for the
/// destination and for every listed quantizer that listens in the table's
/// state and has finite quantization noise. `unknown` selects the messages
/// that have not been decoded and subtracted.
pub(crate) fn cov_from_table(
    view: &NetView,
    table: &MessageAmplitudeTable,
    unknown: u64,
    quantizers: &[(usize, f64)],
) -> CovMatrix {
    let dest = view.destination();
    let mut labels = vec![dest];
    let mut noise = vec![view.noise(dest)];
    for &(node, nhat) in quantizers {
        if table.state().listens(node) && nhat.is_finite() {
            labels.push(node);
            noise.push(view.noise(node) + nhat);
        }
    }
    let dim = labels.len();
    let mut entries = vec![vec![0.0; dim]; dim];
    for i in 0..dim {
        for j in 0..=i {
            let mut v = table.covariance(unknown, labels[i], labels[j]);
            if i == j {
                v += noise[i];
            }
            entries[i][j] = v;
            entries[j][i] = v;
        }
    }
    CovMatrix { labels, entries }
}

/// Covariance matrix of the destination output and the quantizations of the
/// relays in `quantizers`, in one joint state, when the messages originating
/// at the nodes in `unknown_senders` are still unknown.
pub fn build_cov_matrix(
    config: &NetworkConfig,
    alloc: &PowerAllocation,
    quant: &QuantizationParams,
    state: StateVector,
    unknown_senders: &[usize],
    quantizers: &[usize],
) -> Result<CovMatrix, Error> {
    let view = NetView::new(config)?;
    alloc.validate()?;
    quant.validate()?;
    let msgs = cf_messages(alloc, view.num_relays());
    let table = amplitude_table(&view, state, &msgs);
    let mut unknown = 0u64;
    for &node in unknown_senders {
        // Message index: 0 for the source, node index for broadcasts.
        unknown |= 1u64 << node;
    }
    let rows: Vec<(usize, f64)> = quantizers.iter().map(|&q| (q, quant.nhat[q - 1])).collect();
    Ok(cov_from_table(&view, &table, unknown, &rows))
}

struct CfEvaluator {
    view: NetView,
    tables: Vec<MessageAmplitudeTable>,
}

impl CfEvaluator {
    fn new(view: NetView, alloc: &PowerAllocation) -> Self {
        let n = view.num_relays();
        let msgs = cf_messages(alloc, n);
        let tables = (0..(1usize << (n + 1)))
            .map(|m| amplitude_table(&view, StateVector::new(m as u32, n + 1), &msgs))
            .collect();
        CfEvaluator { view, tables }
    }

    /// Message mask for "messages of nodes `0..=hi` unknown"; `hi = -1` maps
    /// to the empty set.
    fn unknown_upto(&self, hi: isize) -> u64 {
        let mut mask = 0u64;
        for node in 0..=hi.max(-1) {
            if node >= 0 {
                mask |= 1u64 << node as u64;
            }
        }
        mask
    }

    fn quant_rows(&self, from: usize, quant: &QuantizationParams) -> Vec<(usize, f64)> {
        (from..=self.view.num_relays())
            .map(|q| (q, quant.nhat[q - 1]))
            .collect()
    }

    /// Average of `log2 det(K_unknown_hi_num) - log2 det(K_unknown_hi_den)`
    /// over the states selected by `filter`.
    fn avg_log_ratio(
        &self,
        dist: &StateDistribution,
        filter: impl Fn(StateVector) -> bool,
        unknown_num: u64,
        unknown_den: u64,
        rows_num: &[(usize, f64)],
        rows_den: &[(usize, f64)],
    ) -> Result<f64, Error> {
        let mut total = 0.0;
        for (state, p) in dist.support() {
            if !filter(state) {
                continue;
            }
            let table = &self.tables[state.mask() as usize];
            let num = cov_from_table(&self.view, table, unknown_num, rows_num).log2_det()?;
            let den = cov_from_table(&self.view, table, unknown_den, rows_den).log2_det()?;
            total += p * (num - den);
        }
        Ok(total)
    }
}

/// Source-coding side of relay `q`'s quantization constraint at a candidate
/// noise level: the cost of describing the quantization to the downstream
/// decoders.
fn source_coding_side(
    eval: &CfEvaluator,
    dist: &StateDistribution,
    q: usize,
    nhat_q: f64,
    quant: &QuantizationParams,
) -> Result<f64, Error> {
    let n = eval.view.num_relays();
    let unknown = eval.unknown_upto(q as isize - 1);
    let mut rows_with_q = eval.quant_rows(q + 1, quant);
    rows_with_q.insert(0, (q, nhat_q));
    let rows_without = eval.quant_rows(q + 1, quant);
    let mut total = 0.0;
    for (state, p) in dist.support() {
        if !state.listens(q) {
            continue;
        }
        let table = &eval.tables[state.mask() as usize];
        // Rate of the downstream broadcasts decoded at relay q first.
        let num_power: f64 = (q + 1..=n).map(|j| table.power(1u64 << j, q)).sum();
        let den_power = table.power(eval.unknown_upto(q as isize - 1), q);
        let c_term = crate::model::capacity(num_power / (den_power + nhat_q + eval.view.noise(q)));
        let k_num = cov_from_table(&eval.view, table, unknown, &rows_with_q).log2_det()?;
        let k_den = cov_from_table(&eval.view, table, unknown, &rows_without).log2_det()?;
        total += p * (c_term + k_num - nhat_q.log2() - k_den);
    }
    Ok(total)
}

/// Channel-coding side of relay `q`'s constraint: the broadcast rate its
/// transmit phases can sustain toward the remaining decoders.
fn channel_coding_side(
    eval: &CfEvaluator,
    dist: &StateDistribution,
    q: usize,
    quant: &QuantizationParams,
) -> Result<f64, Error> {
    let rows = eval.quant_rows(q + 1, quant);
    eval.avg_log_ratio(
        dist,
        |state| state.transmits(q),
        eval.unknown_upto(q as isize),
        eval.unknown_upto(q as isize - 1),
        &rows,
        &rows,
    )
}

/// Determines the smallest feasible quantization noise for every relay, in
/// descending relay order. A relay whose broadcast cannot convey anything
/// gets infinite noise rather than an error.
pub fn solve_quantization_noise(
    config: &NetworkConfig,
    alloc: &PowerAllocation,
    dist: &StateDistribution,
) -> Result<QuantizationParams, Error> {
    let view = NetView::new(config)?;
    alloc.validate()?;
    if dist.knowledge_mode != KnowledgeMode::FixedSchedule {
        return Err(Error::Domain(
            "quantization noise solving requires a fixed schedule".into(),
        ));
    }
    let n = view.num_relays();
    if dist.num_nodes() != n + 1 {
        return Err(Error::Domain(
            "state distribution does not match the network size".into(),
        ));
    }
    let eval = CfEvaluator::new(view, alloc);
    let mut quant = QuantizationParams::all_infinite(n);
    for q in (1..=n).rev() {
        let rhs = channel_coding_side(&eval, dist, q, &quant)?;
        if rhs <= 1e-12 {
            quant.nhat[q - 1] = f64::INFINITY;
            continue;
        }
        // Receive-power scale at the quantizer fixes the bisection bracket.
        let scale: f64 = dist
            .support()
            .map(|(state, p)| {
                let t = &eval.tables[state.mask() as usize];
                p * t.power(t.all_messages(), q)
            })
            .sum::<f64>()
            .max(eval.view.noise(q));
        let lo = scale * 1e-12;
        let hi = scale * 1e12;
        let gap = |nhat: f64| -> Result<f64, Error> {
            Ok(source_coding_side(&eval, dist, q, nhat, &quant)? - rhs)
        };
        if gap(hi)? > 0.0 {
            // Even the coarsest useful quantization cannot be conveyed.
            quant.nhat[q - 1] = f64::INFINITY;
            continue;
        }
        if gap(lo)? <= 0.0 {
            quant.nhat[q - 1] = lo;
            continue;
        }
        let (mut a, mut b) = (lo.ln(), hi.ln());
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if gap(mid.exp())? > 0.0 {
                a = mid;
            } else {
                b = mid;
            }
            if b - a < 1e-14 {
                break;
            }
        }
        quant.nhat[q - 1] = b.exp();
    }
    Ok(quant)
}

/// Achievable compress-and-forward rate for the given schedule, power
/// allocation, and quantization noises.
pub fn cf_rate(
    config: &NetworkConfig,
    alloc: &PowerAllocation,
    quant: &QuantizationParams,
    dist: &StateDistribution,
) -> Result<f64, Error> {
    let view = NetView::new(config)?;
    alloc.validate()?;
    quant.validate()?;
    let n = view.num_relays();
    if dist.num_nodes() != n + 1 {
        return Err(Error::Domain(
            "state distribution does not match the network size".into(),
        ));
    }
    if quant.nhat.len() != n {
        return Err(Error::Domain(
            "quantization parameters must cover every relay".into(),
        ));
    }
    let eval = CfEvaluator::new(view, alloc);
    let rows = eval.quant_rows(1, quant);
    eval.avg_log_ratio(
        dist,
        |_| true,
        1u64, // source message unknown
        0u64, // everything known
        &rows,
        &rows,
    )
}

/// Residual of relay `q`'s feasibility constraint (source-coding side minus
/// channel-coding side) at the given quantization noises; used by tests to
/// verify solver tightness.
pub fn feasibility_gap(
    config: &NetworkConfig,
    alloc: &PowerAllocation,
    quant: &QuantizationParams,
    dist: &StateDistribution,
    q: usize,
) -> Result<f64, Error> {
    let view = NetView::new(config)?;
    let eval = CfEvaluator::new(view, alloc);
    let rhs = channel_coding_side(&eval, dist, q, quant)?;
    let lhs = source_coding_side(&eval, dist, q, quant.nhat[q - 1], quant)?;
    Ok(lhs - rhs)
}
