mod common;

use std::collections::HashSet;

use common::rng;
use qwm_core::bits::Bits;
use qwm_core::circuit::IdentityObfuscator;
use qwm_core::crypto::{GgmKey, InjectivePrfKey, SkeKey};
use qwm_core::pe::{self, CT_FACTOR};
use rand::Rng;

fn all_points(n: usize) -> impl Iterator<Item = Bits> {
    (0..1u64 << n).map(move |v| Bits::from_u64(v, n))
}

fn punctured_violations(key: &GgmKey, points: &[Bits]) -> usize {
    let pk = key.puncture(points).unwrap();
    all_points(key.domain_bits())
        .filter(|x| {
            let got = pk.eval(x).unwrap();
            if points.contains(x) {
                got.is_some()
            } else {
                got != Some(key.eval(x).unwrap())
            }
        })
        .count()
}

#[test]
fn ggm_punctured_correctness_exhaustive() {
    let mut r = rng(101);
    for _ in 0..20 {
        let key = GgmKey::generate(&mut r, 8, 8).unwrap();
        let n = r.random_range(1..=4);
        let points: Vec<Bits> = (0..n).map(|_| Bits::random(&mut r, 8)).collect();
        assert_eq!(punctured_violations(&key, &points), 0);
    }
    for n in [1, 5, 12] {
        let key = GgmKey::generate(&mut r, n, 6).unwrap();
        let points: Vec<Bits> = (0..3).map(|_| Bits::random(&mut r, n)).collect();
        assert_eq!(punctured_violations(&key, &points), 0, "domain {n}");
    }
}

#[test]
fn ggm_co_path_has_one_seed_per_level() {
    let mut r = rng(102);
    let key = GgmKey::generate(&mut r, 10, 4).unwrap();
    let pk = key.puncture(&[Bits::random(&mut r, 10)]).unwrap();
    let depths: Vec<usize> = pk.records().iter().map(|n| n.depth).collect();
    assert_eq!(depths, (1..=10).collect::<Vec<_>>());
}

#[test]
fn injective_prf_collision_scan() {
    let mut r = rng(103);
    let clean = (0..100)
        .filter(|_| {
            let k = InjectivePrfKey::generate(&mut r, 9, 27).unwrap();
            let outs: HashSet<Bits> = all_points(9).map(|x| k.eval(&x).unwrap()).collect();
            outs.len() == 512
        })
        .count();
    assert!(clean >= 99, "{clean} of 100 keys are injective");
}

#[test]
fn injective_prf_punctures_like_ggm() {
    let mut r = rng(104);
    let k = InjectivePrfKey::generate(&mut r, 6, 18).unwrap();
    let star = Bits::random(&mut r, 6);
    let pk = k.puncture(std::slice::from_ref(&star)).unwrap();
    for x in all_points(6) {
        let expect = if x == star { None } else { Some(k.eval(&x).unwrap()) };
        assert_eq!(pk.eval(&x).unwrap(), expect);
    }
}

#[test]
fn ske_is_correct_and_sparse() {
    let mut r = rng(105);
    let key = SkeKey::generate(&mut r, 16, 16, 8).unwrap();
    for _ in 0..200 {
        let m = Bits::random(&mut r, 8);
        let ct = key.encrypt(&m, &mut r).unwrap();
        assert_eq!(key.decrypt(&ct).unwrap(), Some(m.clone()));
        assert_eq!(key.decrypt_bits(&ct.to_bits()).unwrap(), Some(m));
    }
    let valid = (0..10_000)
        .filter(|_| key.decrypt_bits(&Bits::random(&mut r, key.ciphertext_bits())).unwrap().is_some())
        .count();
    assert_eq!(valid, 0);
}

#[test]
fn pe_round_trip_exhaustive_at_l4() {
    let mut r = rng(106);
    for _ in 0..10 {
        let keys = pe::generate(4, &IdentityObfuscator, &mut r).unwrap();
        for m in all_points(4) {
            for s in all_points(4) {
                let c = keys.ek.encrypt_with(&m, &s).unwrap();
                assert_eq!(c.len(), CT_FACTOR * 4);
                assert_eq!(keys.dk.decrypt(&c).unwrap(), Some(m.clone()));
            }
        }
    }
}

#[test]
fn pe_is_sparse_at_l8() {
    let mut r = rng(107);
    let keys = pe::generate(8, &IdentityObfuscator, &mut r).unwrap();
    let valid = (0..10_000).filter(|_| keys.dk.decrypt(&Bits::random(&mut r, 96)).unwrap().is_some()).count();
    assert_eq!(valid, 0);
}

#[test]
fn pe_punctured_key_agrees_off_the_point() {
    let mut r = rng(108);
    let keys = pe::generate(4, &IdentityObfuscator, &mut r).unwrap();
    let star = keys.ek.encrypt(&Bits::random(&mut r, 4), &mut r).unwrap();
    let pk = keys.dk.puncture(&star, &IdentityObfuscator).unwrap();
    assert_eq!(pk.decrypt(&star).unwrap(), None);
    let mut checked = 0;
    while checked < 1000 {
        // half honest ciphertexts, half uniform strings
        let c = if checked % 2 == 0 {
            keys.ek.encrypt(&Bits::random(&mut r, 4), &mut r).unwrap()
        } else {
            Bits::random(&mut r, 48)
        };
        if c == star {
            continue;
        }
        assert_eq!(pk.decrypt(&c).unwrap(), keys.dk.decrypt(&c).unwrap());
        checked += 1;
    }
}

#[test]
fn ciphertexts_are_unique_and_beta_determines_them() {
    let mut r = rng(109);
    let keys = pe::generate(3, &IdentityObfuscator, &mut r).unwrap();
    let mut cts = HashSet::new();
    let mut betas = HashSet::new();
    for m in all_points(3) {
        for s in all_points(3) {
            let c = keys.ek.encrypt_with(&m, &s).unwrap();
            betas.insert(c.slice(6, 27).unwrap());
            cts.insert(c);
        }
    }
    assert_eq!(cts.len(), 64);
    assert_eq!(betas.len(), 64);
}
