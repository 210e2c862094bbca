use jumphedge_cli::parse_config;
use proptest::prelude::*;

fn config_text() -> impl Strategy<Value = String> {
    (
        (0.1f64..5.0, 0.01f64..1e3, -1.0f64..1.0, 0.01f64..1.0, -1.0f64..3.0),
        proptest::collection::vec(0.0f64..2.0, 1..4),
        (any::<u64>(), 1usize..1_000_000, 1usize..5000, 1usize..5000),
        (-10.0f64..10.0, -1.0f64..1.0, prop::bool::ANY),
    )
        .prop_map(|((t, s0, mu, sigma, beta), lambdas, (seed, paths, steps, solve), (x, eps, sweep))| {
            let nodes: Vec<String> = lambdas.iter().enumerate().map(|(i, l)| format!("{}:{l}", t * i as f64 / 4.0)).collect();
            let mut text = format!(
                "[market]\nT = {t}\ns0 = {s0}\nmu = constant {mu}\nsigma = nodes pl 0:{sigma},{t}:{}\nbeta = constant {beta}\nlambda = nodes pc {}\n\
                 [claim]\npreset = credit\nn = 3\nr = 0.04\nA = 10\n\
                 [solve]\nn_steps = {solve}\n[sim]\nn_paths = {paths}\nn_steps = {steps}\nseed = {seed}\n\
                 [run]\nx = {x}\nstrategies = optimal, perturbed {eps}, constant {x}\nperturbations = {eps}, -0.5\n",
                sigma * 2.0,
                nodes.join(","),
            );
            if sweep {
                text.push_str(&format!("sweep = A: 1, {}\nsweep2 = mu: {mu}, 0\n", s0));
            }
            text
        })
}

proptest! {
    #[test]
    fn canonical_text_round_trips(text in config_text()) {
        let cfg = parse_config(&text).unwrap();
        let canonical = cfg.to_text();
        let again = parse_config(&canonical).unwrap();
        prop_assert_eq!(&again, &cfg);
        prop_assert_eq!(again.to_text(), canonical);
    }
}
