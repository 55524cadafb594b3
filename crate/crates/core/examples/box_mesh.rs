//! Structured simplex meshes of a 2D and a 3D box with tagged boundary
//! patches.

use topopt::io::VtkFile;
use topopt::mesh::{facet_tag_measure, generate_box_mesh, Axis, BoxSpec, TagRule};

fn main() -> topopt::Result<()> {
    let square = BoxSpec::new_2d([0.0, 0.0], [2.0, 1.0], [8, 4])
        .with_tag(TagRule::plane("top", Axis::Y, 1.0))
        .with_tag(TagRule::plane("foot", Axis::Y, 0.0).within(&[0.0, 0.0], &[0.5, 0.0]));
    let cube = BoxSpec::new_3d([0.0; 3], [1.0, 2.0, 1.0], [4, 8, 4]).with_tag(TagRule::plane("top", Axis::Z, 1.0));

    for (name, spec) in [("box_2d", square), ("box_3d", cube)] {
        let mesh = generate_box_mesh(&spec)?;
        println!(
            "{name}: {} nodes, {} elements, {} boundary facets, volume {}",
            mesh.num_nodes(),
            mesh.num_elements(),
            mesh.num_boundary_facets(),
            mesh.total_volume()
        );
        for tag in mesh.tag_names() {
            println!("  tag {tag:8} measure {:.4}", facet_tag_measure(&mesh, tag)?);
        }
        let out = std::path::Path::new("output/examples").join(format!("{name}.vtk"));
        std::fs::create_dir_all(out.parent().unwrap()).ok();
        VtkFile::new(&mesh, name).cell_scalars("volume", mesh.element_volumes())?.write(&out)?;
        println!("  wrote {}", out.display());
    }
    Ok(())
}
