use crate::chaos::{Atom, AtomicMeasure, Support};
use crate::error::Result;
use crate::loewner::PlaneMap;

/// Moves each atom `z` to `φ(z)` and scales its weight by `|φ'(z)|^d`, with
/// `d` the measure's dimension tag.
pub fn pushforward_measure(measure: &AtomicMeasure, map: &dyn PlaneMap) -> Result<AtomicMeasure> {
    let atoms = measure
        .atoms
        .iter()
        .map(|a| {
            let e = map.eval(a.position)?;
            Ok(Atom::timed(e.value, a.weight * e.deriv.norm().powf(measure.dim), a.time))
        })
        .collect::<Result<Vec<_>>>()?;
    let support = if atoms.iter().all(|a: &Atom| a.position.im == 0.0) { measure.support } else { Support::Curve };
    AtomicMeasure::new(atoms, measure.dim, support)
}
