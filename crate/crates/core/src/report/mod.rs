//! Artifact emission: CSV tables and SVG plots for runs and evaluations.

pub mod csv;
pub mod svg;

pub use csv::{
    census_csv, confusion_csv, confusion_normalized_csv, history_csv, lr_trace_csv, metrics_csv,
    parse_history_csv, roc_auc_csv, roc_points_csv,
};
pub use svg::{
    confusion_heatmap_svg, curves_svg, escape_xml, polyline_point_counts, roc_svg,
    svg_is_well_formed,
};
