//! Cell lookup, the resolution hierarchy and polygon coverage on the hex grid.

use epimob::geo::{GeoPolygon, Grid, LatLng, Resolution};

fn main() -> epimob::Result<()> {
    let grid = Grid::default();
    let shibuya = LatLng::new(35.658, 139.7016)?;
    let cell = grid.cell_of_point(shibuya, Resolution::DEFAULT);
    println!("Shibuya station is in cell {cell}, centred at {:?}", grid.center(cell));

    for level in (4..8).rev() {
        let res = Resolution::new(level)?;
        println!(
            "level {level}: parent {} of {:.3} km²",
            grid.parent_cell(cell, res)?,
            grid.cell_area_km2(res)
        );
    }
    println!("ring of radius 1: {} cells", grid.grid_disk(cell, 1).len());

    let block = GeoPolygon::new(vec![
        shibuya.offset_m(-1500.0, -1500.0),
        shibuya.offset_m(-1500.0, 1500.0),
        shibuya.offset_m(1500.0, 1500.0),
        shibuya.offset_m(1500.0, -1500.0),
    ])?;
    let covered = grid.cells_covering(&block, Resolution::DEFAULT)?;
    println!("a 3 km square covers {} cells", covered.len());
    Ok(())
}
