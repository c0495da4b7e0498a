use entpot::cov::CovarianceMatrix;
use entpot::harness::{random_passive, random_state, GeneratorConfig};
use entpot::resources::{gaussian_eof, h0, sof_mixed};
use entpot::special::{make_special, SpecialStateParams};
use entpot::transforms::apply;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    match which.as_str() {
        "c1" => c1(),
        "c4" => c4(),
        "c9" => c9(),
        _ => eprintln!("usage: diag c1|c4|c9"),
    }
}

fn c1() {
    let mut rng = ChaCha12Rng::seed_from_u64(101);
    for i in 0..1000u64 {
        let p = SpecialStateParams::<f64>::sample(&mut rng);
        let sigma = make_special(&p);
        let s_want = p.total_squeezing();
        let e = gaussian_eof(&sigma, 101 ^ i).unwrap().value;
        let s = sof_mixed(&sigma, 202 ^ i).unwrap().value;
        let ge = (e - h0(s_want).unwrap()).abs();
        let gs = (s - s_want).abs();
        if ge > 1e-6 || gs > 1e-6 {
            println!(
                "i {i} eof_gap {ge:.3e} sof_gap {gs:.3e} r1 {:.4} r2 {:.4} l1 {:.4} l2 {:.4} alpha {:.4} theta {:.4}",
                p.r1(), p.r2(), p.lambda1(), p.lambda2(), p.alpha(), p.theta()
            );
            // seed sensitivity probe
            for k in 1..4u64 {
                let e2 = gaussian_eof(&sigma, (101 ^ i).wrapping_add(k * 7919)).unwrap().value;
                let s2 = sof_mixed(&sigma, (202 ^ i).wrapping_add(k * 104729)).unwrap().value;
                println!(
                    "    retry {k}: eof_gap {:.3e} sof_gap {:.3e}",
                    (e2 - h0(s_want).unwrap()).abs(),
                    (s2 - s_want).abs()
                );
            }
        }
    }
    println!("c1 done");
}

fn c4() {
    let cfg = GeneratorConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(23);
    for i in 0..500u64 {
        let sigma = random_state(&cfg, &mut rng).unwrap();
        let k = random_passive(2, &mut rng).unwrap();
        let moved = apply(&k, &sigma).unwrap();
        let a = sof_mixed(&sigma, 31 ^ i).unwrap().value;
        let b = sof_mixed(&moved, 37 ^ i).unwrap().value;
        if (a - b).abs() > 1e-6 {
            println!("i {i} a {a:.9} b {b:.9} diff {:.3e}", (a - b).abs());
            for kk in 1..4u64 {
                let a2 = sof_mixed(&sigma, (31 ^ i).wrapping_add(kk * 7919)).unwrap().value;
                let b2 = sof_mixed(&moved, (37 ^ i).wrapping_add(kk * 104729)).unwrap().value;
                println!("    retry {kk}: a {a2:.9} b {b2:.9}");
            }
        }
    }
    println!("c4 done");
}

fn c9() {
    let cfg = GeneratorConfig::default();
    let mut rng = ChaCha12Rng::seed_from_u64(71);
    for i in 0..300u64 {
        let sigma = random_state(&cfg, &mut rng).unwrap();
        let b = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-0.3..0.3));
        let phi = &b * b.transpose();
        let noisy = CovarianceMatrix::new(sigma.matrix() + phi).unwrap();
        let e0 = gaussian_eof(&sigma, 73 ^ i).unwrap().value;
        let e1 = gaussian_eof(&noisy, 79 ^ i).unwrap().value;
        if e1 - e0 > 1e-6 {
            println!("i {i} e0 {e0:.9} e1 {e1:.9} inc {:.3e}", e1 - e0);
            for kk in 1..4u64 {
                let e0b = gaussian_eof(&sigma, (73 ^ i).wrapping_add(kk * 7919)).unwrap().value;
                let e1b = gaussian_eof(&noisy, (79 ^ i).wrapping_add(kk * 104729)).unwrap().value;
                println!("    retry {kk}: e0 {e0b:.9} e1 {e1b:.9}");
            }
        }
    }
    println!("c9 done");
}
