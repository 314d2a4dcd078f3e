//! Empirical check of the adversarial violation functional's Lipschitz
//! bound in the certificate: for a shared tube-realization suite,
//! `|h~(xi, V1) - h~(xi, V2)| <= (L_h + B_delta) ||V1 - V2||_V`, where the
//! sup-norm stacks `(V, grad V)` and is estimated over a dense grid plus
//! the realized trajectory samples.

use std::sync::Arc;

use lyacert::adversary::{AdversarySpec, Disturbance, Strategy};
use lyacert::certificate::Certificate;
use lyacert::certnet::{init_params, MlpArchitecture};
use lyacert::linalg::norm2;
use lyacert::sim::scalar_decay_field;
use lyacert::violation::h_adversarial;

#[test]
fn htilde_is_lipschitz_in_the_certificate() {
    let rho = 1.0;
    let field = scalar_decay_field(rho);
    let eta = 0.4;
    let horizon = 4.0;
    let dt = 0.01;

    // Certificate-independent realizations of a bounded adversary suite:
    // state feedback +-0.2 x (Lipschitz tube) and constant inputs +-0.15
    // (norm-bounded tube).
    let feedback = |c: f64| Disturbance::Feedback { f: Arc::new(move |x: &[f64]| vec![c * x[0]]) };
    let suite: Vec<(Disturbance, AdversarySpec)> = vec![
        (feedback(0.2), AdversarySpec::lipschitz(0.2, Strategy::Custom)),
        (feedback(-0.2), AdversarySpec::lipschitz(0.2, Strategy::Custom)),
        (
            Disturbance::constant(vec![0.15]),
            AdversarySpec::norm_bounded(0.15, Strategy::FixedSignal),
        ),
        (
            Disturbance::constant(vec![-0.15]),
            AdversarySpec::norm_bounded(0.15, Strategy::FixedSignal),
        ),
    ];

    // All realized trajectories from |xi| <= 2 stay inside |x| <= s_bar:
    // the worst case is x' = -(rho - 0.2) x plus the 0.15 input, bounded by
    // 2 + 0.15 / 0.8 < 2.2.
    let s_bar = 2.2;
    // L_h bounds |<grad dV, f(x)> + eta dV| / ||(dV, grad dV)(x)|| over S.
    let l_h = (eta * eta + (rho * s_bar) * (rho * s_bar)).sqrt();
    let b_delta = (0.2f64 * s_bar).max(0.15);

    let arch = MlpArchitecture::new(1, 20);
    let grid: Vec<f64> = (0..=4000).map(|i| -s_bar + 2.0 * s_bar * i as f64 / 4000.0).collect();
    let mut rng = lyacert::rng::root(31);
    use rand::Rng;
    for pair in 0..100u64 {
        let v1 = init_params(arch, 9000 + 2 * pair);
        let v2 = init_params(arch, 9001 + 2 * pair);
        let xi = [rng.gen_range(-2.0..2.0)];

        let h1 = h_adversarial(&xi, &v1, &field, &suite, eta, 0.0, horizon, dt, &[]).unwrap();
        let h2 = h_adversarial(&xi, &v2, &field, &suite, eta, 0.0, horizon, dt, &[]).unwrap();

        let mut sup_norm: f64 = 0.0;
        for x in &grid {
            let (a1, g1) = v1.value_and_grad(&[*x]);
            let (a2, g2) = v2.value_and_grad(&[*x]);
            sup_norm = sup_norm.max(norm2(&[a1 - a2, g1[0] - g2[0]]));
        }
        let bound = (l_h + b_delta) * sup_norm;
        assert!(
            (h1 - h2).abs() <= bound * (1.0 + 1e-9),
            "pair {pair}: |dh| = {} exceeds (L_h + B_d) ||dV|| = {bound}",
            (h1 - h2).abs()
        );
    }
}
