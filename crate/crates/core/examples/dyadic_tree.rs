//! Dyadic cubes in Morton order: parents, children, tilde halves, chains.

use ainfty_lab::dyadic::{chain_to_cell, DyadicCube};

fn main() -> ainfty_lab::Result<()> {
    let q = DyadicCube::new(2, 3, &[5, 2])?;
    println!("cube {q}: side {}, corner {:?}, morton {}", q.side(), q.corner(), q.morton());
    println!("parent {}", q.parent()?);
    let kids: Vec<String> = q.children(8)?.iter().map(|c| c.to_string()).collect();
    println!("children {}", kids.join(" "));
    let tilde: Vec<String> = q.tilde_selection().iter().map(|c| c.to_string()).collect();
    println!("tilde half {}", tilde.join(" "));
    println!("finest cells at depth 5: {:?}", q.cell_range(5));

    let cell = DyadicCube::from_morton(1, 6, 41);
    let chain = chain_to_cell(&cell, &DyadicCube::root(1))?;
    let names: Vec<String> = chain.cubes().iter().map(|c| c.to_string()).collect();
    println!("chain to {cell}: {}", names.join(" > "));
    Ok(())
}
