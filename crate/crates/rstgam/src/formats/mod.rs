pub mod mesh;
pub mod panel;
pub mod reports;

pub use mesh::{parse_mesh, read_mesh, write_mesh};
pub use panel::{load_panel, read_panel, PanelFile};
