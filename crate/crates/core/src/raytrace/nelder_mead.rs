//! Derivative-free simplex minimiser with the standard coefficients
//! (reflection 1, expansion 2, contraction 1/2, shrink 1/2).

#[derive(Clone, Copy, Debug)]
pub struct NelderMeadOptions {
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
    /// Stop once the largest vertex-to-vertex distance falls below this.
    pub diameter_tol: f64,
    pub max_iter: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct NelderMeadResult<const N: usize> {
    pub x: [f64; N],
    pub fx: f64,
    pub iterations: usize,
    pub evaluations: usize,
}

fn diameter<const N: usize>(simplex: &[[f64; N]]) -> f64 {
    let mut d2: f64 = 0.0;
    for (i, a) in simplex.iter().enumerate() {
        for b in &simplex[i + 1..] {
            let dist: f64 = a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum();
            d2 = d2.max(dist);
        }
    }
    d2.sqrt()
}

fn lerp<const N: usize>(a: &[f64; N], b: &[f64; N], t: f64) -> [f64; N] {
    std::array::from_fn(|i| a[i] + t * (b[i] - a[i]))
}

pub fn nelder_mead<const N: usize, F>(
    mut f: F,
    x0: [f64; N],
    opts: &NelderMeadOptions,
) -> NelderMeadResult<N>
where
    F: FnMut(&[f64; N]) -> f64,
{
    let mut evaluations = 0;
    let mut eval = |x: &[f64; N]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut simplex: Vec<[f64; N]> = Vec::with_capacity(N + 1);
    simplex.push(x0);
    for i in 0..N {
        let mut v = x0;
        v[i] += opts.initial_step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(&mut eval).collect();

    let mut iterations = 0;
    while iterations < opts.max_iter {
        let mut order: Vec<usize> = (0..=N).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i]).collect();
        values = order.iter().map(|&i| values[i]).collect();

        if diameter(&simplex) < opts.diameter_tol {
            break;
        }
        iterations += 1;

        let centroid: [f64; N] = std::array::from_fn(|k| {
            simplex[..N].iter().map(|v| v[k]).sum::<f64>() / N as f64
        });
        let worst = simplex[N];
        let reflected = lerp(&centroid, &worst, -1.0);
        let fr = eval(&reflected);

        if fr < values[0] {
            let expanded = lerp(&centroid, &worst, -2.0);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[N] = expanded;
                values[N] = fe;
            } else {
                simplex[N] = reflected;
                values[N] = fr;
            }
            continue;
        }
        if fr < values[N - 1] {
            simplex[N] = reflected;
            values[N] = fr;
            continue;
        }
        let (contracted, fc) = if fr < values[N] {
            let c = lerp(&centroid, &reflected, 0.5);
            let fc = eval(&c);
            (c, fc)
        } else {
            let c = lerp(&centroid, &worst, 0.5);
            let fc = eval(&c);
            (c, fc)
        };
        if fc < values[N].min(fr) {
            simplex[N] = contracted;
            values[N] = fc;
            continue;
        }
        let best = simplex[0];
        for i in 1..=N {
            simplex[i] = lerp(&best, &simplex[i], 0.5);
            values[i] = eval(&simplex[i]);
        }
    }

    let best = (0..=N)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap_or(0);
    NelderMeadResult {
        x: simplex[best],
        fx: values[best],
        iterations,
        evaluations,
    }
}
