//! Positional-existence rows for an instance with two missing features.

use attn_impute::pev::pev_mask_generator;

fn main() {
    let x = [Some(0.7), None, Some(0.0), Some(-1.2), None];
    let (pev, mask) = pev_mask_generator(&x).expect("non-empty instance");
    println!("mask {mask:?}, {} position bits", pev.bw);
    println!("{:>8} {:>6}  code", "value", "exists");
    for i in 0..pev.rows {
        let row = pev.row(i);
        let bits: String = pev.position_codes[i].iter().map(|b| char::from(b'0' + b)).collect();
        println!("{:>8.3} {:>6}  {bits}", row[0], row[1]);
    }
    println!("x ⊙ m = {:?}", pev.masked_values());
}
