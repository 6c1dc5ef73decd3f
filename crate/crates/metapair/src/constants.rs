/// Vacuum speed of light in m/s.
pub const SPEED_OF_LIGHT_M_PER_S: f64 = 299_792_458.0;

/// Group index used for the wavelength-independent part of the fiber delay
/// (standard single-mode silica near 1.5 um).
pub const FIBER_GROUP_INDEX: f64 = 1.468;

/// Default per-resonance vacuum-field enhancement scale. Together with the
/// default rate calibration this puts a Q ~ 330 resonance at a peak
/// enhancement of ~1.2e3 and a bright degenerate source at ~1e3 detected
/// coincidences per second at ~10 mW pump.
pub const DEFAULT_KAPPA: f64 = 3.5;

/// Default global brightness calibration in pairs per second per nm of
/// emission bandwidth, per mW of pump power and per (pm/V)^2 of effective
/// second-order nonlinearity.
pub const DEFAULT_RATE_CALIBRATION: f64 = 3.5e-10;

/// Flat-top order of the super-Gaussian bandpass transmission profile
/// exp(-ln2 * (2*(lambda-center)/fwhm)^(2n)).
pub const BANDPASS_ORDER: i32 = 4;
