//! Acceptance criteria 1 to 11. Each check prints one PASS/FAIL line; the
//! test fails if any criterion fails.

use std::time::{Duration, Instant};

use ghz_amp::adversary::{
    alternating_superset_source, bias_bound, build_alternating_tree, build_resend_tree,
    build_risking_tree, cheat_probability_bound, cheatable_mass, constant_balanced_check, r_h,
    resend_bias_bruteforce, resend_bias_closed_form, zero_error_attack, Thresholds,
};
use ghz_amp::engine::{run_exact, run_montecarlo, ProtocolConfig, Source};
use ghz_amp::extractor::flat_family_check;
use ghz_amp::game::{classical_win_value, RoundInput};
use ghz_amp::quantum::honest_table;
use ghz_amp::Execution;
use num_rational::Ratio;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn within(limit: Duration, started: Instant) -> Result<(), String> {
    let took = started.elapsed();
    if took > limit {
        return Err(format!("took {took:?}, limit {limit:?}"));
    }
    Ok(())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn classical_bound() -> Outcome {
    let started = Instant::now();
    let value = classical_win_value();
    ensure(value.scored == 64, || format!("scored {} strategies", value.scored))?;
    ensure(value.max == Ratio::new(3, 4), || format!("max {}", value.max))?;
    within(Duration::from_secs(1), started)?;
    Ok(format!("max over 64 strategies = {}", value.max))
}

fn honest_behavior() -> Outcome {
    let started = Instant::now();
    let table = honest_table();
    for input in RoundInput::ALL {
        let w = table.win_probability(input);
        ensure((w - 1.0).abs() <= 1e-12, || format!("{input} wins with {w}"))?;
        for p in table.ab_marginal(input) {
            ensure((p - 0.25).abs() <= 1e-12, || format!("{input} (a,b) marginal {p}"))?;
        }
    }
    let cfg = ProtocolConfig::honest(Source::uniform(10)).map_err(|e| e.to_string())?;
    let r = run_montecarlo(&cfg, 1_000_000, 0, Execution::default()).map_err(|e| e.to_string())?;
    ensure(r.abort_prob == 0.0, || format!("abort rate {}", r.abort_prob))?;
    within(Duration::from_secs(10), started)?;
    Ok("table wins every input; 10^6 honest trials of 10 rounds, 0 aborts".into())
}

fn thresholds() -> Outcome {
    let t = Thresholds::compute();
    let six = |x: f64| (x * 1e6).round() / 1e6;
    ensure(six(t.r_trivial) == 0.792481, || format!("r_trivial {}", t.r_trivial))?;
    ensure(six(t.r_max) == 0.830482, || format!("r_max {}", t.r_max))?;
    ensure(six(t.r_h) == 0.896241, || format!("r_h {}", t.r_h))?;
    for n in [2, 4, 6, 8] {
        let rate = build_resend_tree(n)
            .and_then(|tr| tr.tree().min_entropy_rate())
            .map_err(|e| e.to_string())?;
        ensure((rate - t.r_max).abs() <= 1e-9, || format!("resend n={n} rate {rate}"))?;
    }
    Ok(format!(
        "{:.6} / {:.6} / {:.6}; resend rate = r_max for n in 2..=8",
        t.r_trivial, t.r_max, t.r_h
    ))
}

fn tree_counts() -> Outcome {
    for (n, alt, resend) in [(2, 12, 10), (4, 144, 100), (6, 1728, 1000)] {
        let a = build_alternating_tree(n).map_err(|e| e.to_string())?.leaf_count();
        let r = build_resend_tree(n).map_err(|e| e.to_string())?.leaf_count();
        ensure(a == alt && r == resend, || format!("n={n}: {a} / {r}"))?;
    }
    Ok("alternating 12/144/1728, resend 10/100/1000".into())
}

fn zero_error_bound() -> Outcome {
    let started = Instant::now();
    let mut checked = 0;
    let mut empty = Vec::new();
    let mut worst_mass: f64 = 0.0;
    let mut worst_bias: f64 = 0.0;
    for n in [2, 4, 6, 8] {
        for eps in [0.05, 0.1, 0.2] {
            let max_rate = 1.0;
            if r_h() + eps > max_rate {
                // No source on 2n bits has rate above 1.
                let mut rng = ChaCha8Rng::seed_from_u64(0);
                ensure(alternating_superset_source(n, eps, &mut rng).is_err(), || {
                    format!("n={n} ε={eps}: built a source above rate 1")
                })?;
                empty.push(format!("(n={n}, ε={eps})"));
                continue;
            }
            for seed in 0..4 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let src = alternating_superset_source(n, eps, &mut rng).map_err(|e| e.to_string())?;
                let rate = src.min_entropy_rate().map_err(|e| e.to_string())?;
                ensure(rate >= r_h() + eps - 1e-12, || format!("n={n} ε={eps}: rate {rate}"))?;
                let mass = cheatable_mass(&src);
                let p_bound = cheat_probability_bound(eps, n);
                ensure(mass <= p_bound + 1e-9, || {
                    format!("n={n} ε={eps} seed={seed}: cheatable {mass} > {p_bound}")
                })?;
                let attack = zero_error_attack(&src).map_err(|e| e.to_string())?;
                let cfg = attack.config().map_err(|e| e.to_string())?;
                let r = run_exact(&cfg, Execution::default()).map_err(|e| e.to_string())?;
                let bias = r.bias.ok_or("attack never completes")?;
                let b_bound = bias_bound(eps, n);
                ensure(bias <= b_bound + 1e-9, || {
                    format!("n={n} ε={eps} seed={seed}: bias {bias} > {b_bound}")
                })?;
                worst_mass = worst_mass.max(mass / p_bound);
                worst_bias = worst_bias.max(bias / b_bound);
                checked += 1;
            }
        }
    }
    within(Duration::from_secs(60), started)?;
    Ok(format!(
        "{checked} sources; worst cheatable/bound {worst_mass:.3}, bias/bound {worst_bias:.3}; \
         no rate-(R_H+ε) source exists for {}",
        empty.join(" ")
    ))
}

fn risking_attack() -> Outcome {
    let mut checked = 0;
    for n in [2usize, 4] {
        let base = build_alternating_tree(n).map_err(|e| e.to_string())?;
        let targets = base.augmentable();
        // n = 2: every subset of the 4 dishonest vertices; n = 4: nested prefixes.
        let subsets: Vec<Vec<usize>> = if n == 2 {
            (0..1u32 << targets.len())
                .map(|m| (0..targets.len()).filter(|i| m >> i & 1 == 1).map(|i| targets[i]).collect())
                .collect()
        } else {
            (0..=targets.len()).step_by(7).map(|k| targets[..k].to_vec()).chain([targets.clone()]).collect()
        };
        for subset in subsets {
            let risky = build_risking_tree(&base, &subset).map_err(|e| e.to_string())?;
            let tree = risky.tree().leaf_uniform();
            let risky = ghz_amp::adversary::AttackTree::new(
                tree,
                (0..risky.tree().len()).map(|v| risky.annotation(v).cloned()).collect(),
            )
            .map_err(|e| e.to_string())?;
            let leaves = risky.leaf_count() as u64;
            let surviving = leaves - risky.abort_leaf_count() as u64;
            let cheat_leaves = 12u64.pow(n as u32 / 2);
            ensure(surviving == cheat_leaves, || format!("n={n}: {surviving} surviving leaves"))?;
            let rate = risky.tree().min_entropy_rate().map_err(|e| e.to_string())?;
            let eps = rate - r_h();
            let p_guess = cheat_probability_bound(eps, n);
            let exact = Ratio::new(cheat_leaves, leaves);
            let r = run_exact(&risky.config().map_err(|e| e.to_string())?, Execution::default())
                .map_err(|e| e.to_string())?;
            let non_abort = 1.0 - r.abort_prob;
            let exact_f = *exact.numer() as f64 / *exact.denom() as f64;
            ensure((non_abort - exact_f).abs() <= 1e-12, || {
                format!("n={n}: engine {non_abort} vs {exact}")
            })?;
            ensure((p_guess - exact_f).abs() <= 1e-12, || {
                format!("n={n}: 2^(-2εn) = {p_guess} vs {exact}")
            })?;
            checked += 1;
        }
    }
    Ok(format!("{checked} risking trees: P(no abort) = 12^(n/2)/leaves = 2^(-2εn)"))
}

fn appendix_bias() -> Outcome {
    let started = Instant::now();
    let mut checked = 0;
    for k in 0..=10usize {
        for mask in 0u32..1 << k {
            let set: Vec<usize> = (0..k).filter(|i| mask >> i & 1 == 1).collect();
            let brute = resend_bias_bruteforce(k, &set, Execution::default()).map_err(|e| e.to_string())?;
            let closed = resend_bias_closed_form(k, set.len()).map_err(|e| e.to_string())?;
            ensure(brute == closed, || format!("k={k} S={set:?}: {brute} vs {closed}"))?;
            checked += 1;
        }
    }
    within(Duration::from_secs(120), started)?;
    Ok(format!("{checked} (k, S) pairs with k ≤ 10 match exactly"))
}

fn constant_balanced() -> Outcome {
    use ghz_amp::game::OneBitFn;
    let mut hits = 0;
    for f in OneBitFn::ALL {
        for g in OneBitFn::ALL {
            let exists = constant_balanced_check(f, g);
            let expected = f.is_constant() == g.is_constant();
            ensure(exists == expected, || format!("{f:?}, {g:?}: {exists}"))?;
            hits += exists as u32;
        }
    }
    ensure(hits == 8, || format!("{hits} pairs admit h"))?;
    Ok("h exists for exactly the 8 same-kind pairs".into())
}

fn extractor_bound() -> Outcome {
    let started = Instant::now();
    let report = flat_family_check(20_000, 8, 0, Execution::default()).map_err(|e| e.to_string())?;
    ensure(report.violations == 0, || format!("{} violations", report.violations))?;
    within(Duration::from_secs(120), started)?;
    Ok(format!(
        "{} flat pairs, n ≤ 8, worst distance/bound {:.3}",
        report.cases, report.worst_ratio
    ))
}

fn full_cheat() -> Outcome {
    for n in [2, 4, 6] {
        let tree = build_resend_tree(n).map_err(|e| e.to_string())?;
        let r = run_exact(&tree.config().map_err(|e| e.to_string())?, Execution::default())
            .map_err(|e| e.to_string())?;
        ensure(r.abort_prob == 0.0 && r.bias == Some(0.5), || {
            format!("n={n}: abort {}, bias {:?}", r.abort_prob, r.bias)
        })?;
    }
    Ok("resend tree at r_max: abort 0, bias 1/2 for n = 2, 4, 6".into())
}

fn reproducibility() -> Outcome {
    let tree = build_resend_tree(4).map_err(|e| e.to_string())?;
    let cfg = tree.config().map_err(|e| e.to_string())?;
    let honest = ProtocolConfig::honest(Source::uniform(6)).map_err(|e| e.to_string())?;
    for cfg in [&cfg, &honest] {
        let a = run_montecarlo(cfg, 50_000, 7, Execution::Parallel).and_then(|r| r.to_json());
        let b = run_montecarlo(cfg, 50_000, 7, Execution::Sequential).and_then(|r| r.to_json());
        let (a, b) = (a.map_err(|e| e.to_string())?, b.map_err(|e| e.to_string())?);
        ensure(a.as_bytes() == b.as_bytes(), || "reports differ".into())?;
    }
    Ok("same seed, byte-identical JSON (parallel and sequential)".into())
}

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 11] = [
        ("classical bound", classical_bound),
        ("honest quantum behavior", honest_behavior),
        ("thresholds", thresholds),
        ("tree counts", tree_counts),
        ("zero-error cheat bound", zero_error_bound),
        ("risking attack", risking_attack),
        ("appendix bias formula", appendix_bias),
        ("constant/balanced lemma", constant_balanced),
        ("hadamard extractor bound", extractor_bound),
        ("full-cheat end-to-end", full_cheat),
        ("reproducibility", reproducibility),
    ];
    let mut failed = Vec::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = check();
        let took = started.elapsed();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{took:.2?}]", i + 1),
            Err(detail) => {
                println!("criterion {:>2} FAIL  {name}: {detail} [{took:.2?}]", i + 1);
                failed.push(i + 1);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
