//! Tour of the homomorphic primitives: key generation, encryption, the
//! arithmetic ops, relinearization, and decryption — with the exact noise
//! budget printed after every step so the cost of each operation is
//! visible.
//!
//! Run with: `cargo run --example basic_ops`

use teefhe::ring::RandomStream;
use teefhe::she::{
    add, add_plain, decrypt, encrypt, generate_eval_keys, generate_keys, multiply, multiply_plain,
    negate, noise_budget_exact, relinearize, EncryptionParams, Plaintext, SheContext,
};
use teefhe::Result;

fn main() -> Result<()> {
    let params = EncryptionParams::preset(1024)?;
    let ctx = SheContext::new(params.clone())?;
    let mut rng = RandomStream::from_u64_seed(1);
    let (sk, pk) = generate_keys(&ctx, &mut rng)?;
    let evk = generate_eval_keys(&ctx, &mut rng, &sk)?;
    let t = params.t().value();

    println!(
        "ring degree n = {}, ciphertext modulus ~2^{}, plaintext modulus t = {t}",
        params.n(),
        64 - params.q().value().leading_zeros()
    );

    // Scalars are encoded in coefficient 0; the remaining slots stay zero.
    let scalar = |v: u64| Plaintext::new(&params, &[v]);
    let first = |pt: &Plaintext| pt.coeffs()[0];

    let ct_a = encrypt(&ctx, &pk, &scalar(9)?, &mut rng)?;
    let ct_b = encrypt(&ctx, &pk, &scalar(13)?, &mut rng)?;
    let budget = |label: &str, ct: &teefhe::she::Ciphertext| -> Result<()> {
        println!(
            "  {label:<26} size {} budget {:>2} bits",
            ct.parts().len(),
            noise_budget_exact(&ctx, &sk, ct)?
        );
        Ok(())
    };
    println!("fresh encryptions of 9 and 13:");
    budget("enc(9)", &ct_a)?;
    budget("enc(13)", &ct_b)?;

    let sum = add(&ctx, &ct_a, &ct_b)?;
    println!("addition:");
    budget("enc(9) + enc(13)", &sum)?;
    assert_eq!(first(&decrypt(&ctx, &sk, &sum)?), (9 + 13) % t);

    let neg = negate(&ctx, &ct_a)?;
    budget("-enc(9)", &neg)?;
    assert_eq!(first(&decrypt(&ctx, &sk, &neg)?), t - 9);

    // A ciphertext product has three parts until relinearization folds it
    // back to two with the evaluation keys.
    let product = multiply(&ctx, &ct_a, &ct_b)?;
    println!("multiplication:");
    budget("enc(9) * enc(13)", &product)?;
    let compact = relinearize(&ctx, &evk, &product)?;
    budget("after relinearization", &compact)?;
    assert_eq!(first(&decrypt(&ctx, &sk, &compact)?), (9 * 13) % t);

    let shifted = add_plain(&ctx, &compact, &scalar(100)?)?;
    let scaled = multiply_plain(&ctx, &shifted, &scalar(2)?)?;
    println!("plaintext operands:");
    budget("--- + 100", &shifted)?;
    budget("--- * 2", &scaled)?;
    assert_eq!(first(&decrypt(&ctx, &sk, &scaled)?), (9 * 13 + 100) * 2 % t);

    println!("decrypted: (9 * 13 + 100) * 2 = {}", first(&decrypt(&ctx, &sk, &scaled)?));
    println!("all plaintext checks passed");
    Ok(())
}
