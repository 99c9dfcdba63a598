// Every example in quick mode, writing into a scratch directory.

macro_rules! example {
    ($name:ident, $file:literal, |$dir:ident| $call:expr) => {
        mod $name {
            #![allow(dead_code)]
            include!($file);

            #[test]
            fn quick_run() {
                let tmp = tempfile::tempdir().unwrap();
                let $dir = tmp.path();
                $call.unwrap();
            }
        }
    };
}

example!(diffraction_stack, "../examples/diffraction_stack.rs", |d| run(true, d));
example!(channel_sampling, "../examples/channel_sampling.rs", |d| run(true, d));
example!(single_run, "../examples/single_run.rs", |d| run(true, d, 0.5, 1.0));
example!(beam_pattern, "../examples/beam_pattern.rs", |d| run(true, d));
example!(rate_vs_atoms, "../examples/rate_vs_atoms.rs", |d| run(true, d, 2));
example!(weight_tradeoff, "../examples/weight_tradeoff.rs", |d| run(true, d, false));
example!(convergence, "../examples/convergence.rs", |d| run(true, d, 2));
example!(gradient_check, "../examples/gradient_check.rs", |d| run(true, d));
example!(scaling_probe, "../examples/scaling_probe.rs", |d| run(true, d));
example!(toml_config, "../examples/toml_config.rs", |d| run(true, d));
