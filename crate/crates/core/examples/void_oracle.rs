//! Flood-fill labelling of void components: a ring of material in a void
//! box leaves one open void and one enclosed hole.

use topopt::geometry::{Layout, Primitive};
use topopt::levelset::characteristic;
use topopt::mesh::{generate_box_mesh, BoxSpec, DEFAULT_TAG};
use topopt::oracle::{label_voids, DEFAULT_VOID_THRESHOLD};

fn main() -> topopt::Result<()> {
    let mesh = generate_box_mesh(&BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0], [40, 40]))?;
    let layout = Layout::void()
        .with(Primitive::disc(&[0.5, 0.5], 0.35, true))
        .with(Primitive::disc(&[0.5, 0.5], 0.2, false));
    let chi = characteristic(&mesh, &layout.level_set(&mesh));
    let voids = label_voids(&mesh, &chi, DEFAULT_VOID_THRESHOLD, &[DEFAULT_TAG])?;
    for c in 0..voids.num_components() {
        let elements = voids.labels.iter().filter(|l| **l == Some(c)).count();
        let kind = if voids.is_enclosed(c) { "enclosed" } else { "open" };
        println!("component {c}: {elements} elements, {kind}");
    }
    let s = voids.summary();
    println!(
        "{} void components, {} enclosed, enclosed volume {:.4}",
        s.void_components, s.enclosed_components, s.enclosed_volume
    );
    Ok(())
}
