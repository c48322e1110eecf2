use std::path::Path;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Deserialize;

use evident_motion::motion::DetectionMode;
use evident_motion::pipeline::PipelineConfig;
use evident_motion::validation::ValidationParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Discretized,
    Pairwise,
}

impl From<ModeArg> for DetectionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Discretized => DetectionMode::Discretized,
            ModeArg::Pairwise => DetectionMode::PairwiseConflict,
        }
    }
}

// Every tunable is optional at this level so a flag, a config file entry and
// the built-in default can be layered in that order.
macro_rules! tunables {
    ($($(#[$meta:meta])* $name:ident: $ty:ty,)*) => {
        #[derive(Args, Clone, Debug, Default, Deserialize)]
        #[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
        pub struct Tunables {
            $(
                $(#[$meta])*
                #[arg(long)]
                pub $name: Option<$ty>,
            )*
        }

        impl Tunables {
            /// Keeps every value set here and fills the rest from `fallback`.
            pub fn or(self, fallback: Tunables) -> Tunables {
                Tunables { $($name: self.$name.or(fallback.$name),)* }
            }
        }
    };
}

tunables! {
    /// Points farther than this from the sensor are dropped, meters [30].
    crop_tau: f64,
    /// Number of recent scans checked for duplicate points [10].
    dedup_window: usize,
    /// Distance under which a point duplicates a retained one, meters [0.1].
    dedup_radius: f64,
    /// Refine poses with point-to-point ICP [false].
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    icp: bool,
    /// ICP iteration cap [20].
    icp_max_iter: usize,
    /// ICP correspondence distance, meters [1.0].
    icp_corr_dist: f64,
    /// Ground grid tile size, meters [0.4].
    ground_cell: f64,
    /// Ground slope allowance per tile [0.09].
    ground_slope: f64,
    /// Empty tiles bridged when propagating ground height [10].
    ground_max_gap: i64,
    /// Range measurement noise, meters [0.05].
    sigma_m: f64,
    /// Range uncertainty of the beam model, meters [0.15].
    sigma_r: f64,
    /// Angular scale of the beam model, radians [0.0035].
    theta_scale: f64,
    /// Scale of the range smoothing kernel [1.0].
    range_kernel_scale: f64,
    /// Step of the precomputed smoothing tables, meters [0.01].
    conv_step: f64,
    /// Half width of the smoothing tables, meters [5.0].
    conv_halfwidth: f64,
    /// Discrete belief mass for near points [0.8].
    r_sup: f64,
    /// Discrete belief mass for far points [0.6].
    r_inf: f64,
    /// Scans on each side of the center scan [10].
    k_half: usize,
    /// Octree leaf size, meters [0.3].
    octree_resolution: f64,
    /// Share of a leaf's points that are classified [1/6].
    leaf_fraction: f64,
    /// Share of sampled points that must agree to label a whole leaf [0.5].
    leaf_majority: f64,
    /// Leaves smaller than this are classified point by point [6].
    tau_np: usize,
    /// Neighbor cone half angle, in sensor angular resolutions [3].
    neighbor_mult: f64,
    /// Beams kept per neighbor query [32].
    neighbor_cap: usize,
    /// Seed for leaf sampling [0].
    seed: u64,
    /// How scan evidence becomes a verdict [discretized].
    #[arg(value_enum)]
    mode: ModeArg,
    /// Classify every point, no leaf sampling [false].
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    exhaustive: bool,
    /// Physical patch height, meters [0.15].
    patch_height: f64,
    /// NCC dissimilarity under which color patches match [0.1].
    ncc_tau: f64,
    /// Gray standard deviation at or below which a patch is uniform [0.02].
    uniform_std: f64,
    /// Depth map dilation radius, pixels [4].
    dilation_radius: usize,
    /// NCC search radius, pixels [2].
    ncc_search_radius: usize,
    /// Mean squared depth difference under which depth patches match [0.01].
    ssd_tau: f64,
    /// Skip image validation of detections [false].
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    no_image_validation: bool,
}

/// Reads a TOML file of `key = value` pairs named like the long flags.
pub fn load_file(path: &Path) -> Result<Tunables> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Flags first, then the config file, then built-in defaults.
pub fn resolve(flags: &Tunables, file: Option<&Path>) -> Result<PipelineConfig> {
    let t = match file {
        Some(p) => flags.clone().or(load_file(p)?),
        None => flags.clone(),
    };
    let mut c = PipelineConfig::default();
    macro_rules! set {
        ($field:ident => $target:expr) => {
            if let Some(v) = t.$field {
                $target = v;
            }
        };
    }
    set!(crop_tau => c.preprocess.crop_tau);
    set!(dedup_window => c.preprocess.dedup_window);
    set!(dedup_radius => c.preprocess.dedup_radius);
    set!(icp => c.preprocess.icp_enabled);
    set!(icp_max_iter => c.preprocess.icp_max_iter);
    set!(icp_corr_dist => c.preprocess.icp_corr_dist);
    set!(ground_cell => c.ground.cell_size);
    set!(ground_slope => c.ground.slope_s);
    set!(ground_max_gap => c.ground.max_gap);
    set!(sigma_m => c.occupancy.sigma_m);
    set!(sigma_r => c.occupancy.sigma_r);
    set!(theta_scale => c.occupancy.theta_scale);
    set!(range_kernel_scale => c.occupancy.range_kernel_scale);
    set!(conv_step => c.occupancy.conv_table_step);
    set!(conv_halfwidth => c.occupancy.conv_table_halfwidth);
    set!(r_sup => c.discretize.r_sup);
    set!(r_inf => c.discretize.r_inf);
    set!(k_half => c.window.k_half);
    set!(octree_resolution => c.window.octree_resolution);
    set!(leaf_fraction => c.window.leaf_sample_fraction);
    set!(leaf_majority => c.window.leaf_majority);
    set!(tau_np => c.window.tau_np);
    set!(neighbor_mult => c.window.neighbor_angle_mult);
    set!(neighbor_cap => c.window.neighbor_cap);
    set!(seed => c.window.seed);
    set!(exhaustive => c.window.exhaustive);
    if let Some(m) = t.mode {
        c.window.mode = m.into();
    }

    let mut v = ValidationParams::default();
    set!(patch_height => v.patch_height_h);
    set!(ncc_tau => v.ncc_tau);
    set!(uniform_std => v.uniform_std);
    set!(dilation_radius => v.dilation_radius);
    set!(ncc_search_radius => v.ncc_search_radius);
    set!(ssd_tau => v.ssd_tau);
    c.validation = (!t.no_image_validation.unwrap_or(false)).then_some(v);

    c.validate().context("invalid configuration")?;
    Ok(c)
}

/// Validation parameters even when validation itself is switched off.
pub fn validation_params(flags: &Tunables, file: Option<&Path>) -> Result<ValidationParams> {
    let mut flags = flags.clone();
    flags.no_image_validation = Some(false);
    Ok(resolve(&flags, file)?
        .validation
        .expect("validation enabled"))
}
