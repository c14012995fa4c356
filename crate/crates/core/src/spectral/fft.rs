use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

type Plans = (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>);

fn plans(n: usize) -> Plans {
    static CACHE: OnceLock<Mutex<HashMap<usize, Plans>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        })
        .clone()
}

/// Unnormalized in-place 3D transform of a row-major `n³` array.
pub(super) fn transform_3d(data: &mut [Complex64], n: usize, inverse: bool) {
    let (fwd, inv) = plans(n);
    let fft = if inverse { inv } else { fwd };
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    // last axis is contiguous
    for row in data.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for a in 0..n {
        for c in 0..n {
            for b in 0..n {
                line[b] = data[(a * n + b) * n + c];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for b in 0..n {
                data[(a * n + b) * n + c] = line[b];
            }
        }
    }
    for b in 0..n {
        for c in 0..n {
            for a in 0..n {
                line[a] = data[(a * n + b) * n + c];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for a in 0..n {
                data[(a * n + b) * n + c] = line[a];
            }
        }
    }
}
