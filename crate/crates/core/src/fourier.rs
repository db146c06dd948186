//! Discrete Fourier transform on products of cyclic groups.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::groups::FiniteAbelianGroup;

/// `f̂(ξ) = E_x f(x) e(−x·ξ)` with `x·ξ = Σ_k x_k ξ_k / n_k`, in element-code order.
pub fn dft(group: &FiniteAbelianGroup, values: &[f64]) -> Vec<Complex64> {
    debug_assert_eq!(values.len(), group.order());
    let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut planner = FftPlanner::<f64>::new();
    let factors = group.factors();
    let total = group.order();
    let mut stride = total;
    for &n in factors {
        stride /= n;
        if n == 1 {
            continue;
        }
        let fft = planner.plan_fft_forward(n);
        let outer = total / (n * stride);
        let mut line = vec![Complex64::new(0.0, 0.0); n];
        let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
        for o in 0..outer {
            for i in 0..stride {
                let base = o * n * stride + i;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, v) in line.iter().enumerate() {
                    data[base + j * stride] = *v;
                }
            }
        }
    }
    let scale = 1.0 / total as f64;
    for v in &mut data {
        *v *= scale;
    }
    data
}

/// Rough multiply-add count of one transform, for budget accounting.
pub(crate) fn dft_cost(group: &FiniteAbelianGroup) -> f64 {
    let logs: f64 = group
        .factors()
        .iter()
        .map(|&n| (n.max(2) as f64).log2().ceil())
        .sum();
    group.order() as f64 * (logs + 1.0)
}
