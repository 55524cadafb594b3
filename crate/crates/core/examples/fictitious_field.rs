//! The fictitious powder field on a fixed layout: near 1 inside sealed
//! voids, near 0 in voids that reach the powder exit.

use topopt::cavity::{sharpen, CavityModel, CavityModelParams};
use topopt::geometry::{Layout, Primitive};
use topopt::io::VtkFile;
use topopt::levelset::characteristic;
use topopt::mesh::{generate_box_mesh, BoxSpec, DEFAULT_TAG};
use topopt::oracle::label_voids;
use topopt::scenario::component_reports;

fn main() -> topopt::Result<()> {
    let mesh = generate_box_mesh(&BoxSpec::new_2d([0.0, 0.0], [1.0, 1.0], [50, 50]))?;
    let layout = Layout::material()
        .with(Primitive::disc(&[0.35, 0.6], 0.15, false))
        .with(Primitive::disc(&[0.7, 0.3], 0.12, false))
        .with(Primitive::rect(&[0.66, 0.0], &[0.74, 0.3], false));
    let field = layout.level_set(&mesh);
    let chi = sharpen(&characteristic(&mesh, &field), 0.5);
    let params = CavityModelParams::new(&[DEFAULT_TAG]);
    let f = CavityModel::new(&mesh, &chi, &params)?.evaluate(None)?;
    let voids = label_voids(&mesh, &chi, 0.5, &[DEFAULT_TAG])?;
    for r in component_reports(&mesh, &voids, &f.p) {
        let kind = if r.enclosed { "enclosed" } else { "open" };
        println!("void {} ({kind}, {} elements): mean p {:.4}", r.id, r.elements, r.mean_p);
    }
    println!("J_h = {:.4e}", f.constraint);

    let out = std::path::Path::new("output/examples/fictitious_field.vtk");
    std::fs::create_dir_all(out.parent().unwrap()).ok();
    VtkFile::new(&mesh, "fictitious field")
        .point_scalars("phi", &field.phi)?
        .point_scalars("p", &f.p)?
        .point_scalars("p_adj", &f.p_adj)?
        .cell_scalars("td_cavity", &f.derivative)?
        .write(out)?;
    println!("wrote {}", out.display());
    Ok(())
}
