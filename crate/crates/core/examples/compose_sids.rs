//! Builds the five-resolution semantic-ID set of one item and inverts a composite.
//!
//! cargo run --example compose_sids

use sid_coord::sid::{compose, decompose, Resolution, SidComposer, DEFAULT_BASE};

fn main() -> sid_coord::Result<()> {
    let set = compose([17, 5301, 42], DEFAULT_BASE)?;
    for r in [Resolution::S1, Resolution::S2, Resolution::S3, Resolution::S12, Resolution::S23] {
        println!("{:>4} = {}", r.name(), set.get(r));
    }
    let (parent, child) = decompose(set.s12(), DEFAULT_BASE);
    println!("decompose({}) = ({parent}, {child})", set.s12());

    // A composer bound to a codebook size rejects ids the codebook cannot produce.
    let composer = SidComposer::new(DEFAULT_BASE, 64)?;
    println!("in range: {:?}", composer.compose([3, 63, 0]).map(|s| s.values()));
    println!("out of range: {}", composer.compose([3, 64, 0]).unwrap_err());
    Ok(())
}
