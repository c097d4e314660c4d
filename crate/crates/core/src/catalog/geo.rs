//! Great-circle helpers on a spherical Earth.

/// Mean Earth radius in kilometres (IUGG mean radius).
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

/// Kilometres per degree of latitude on the sphere.
pub const KM_PER_DEG_LAT: f64 = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;

/// Haversine great-circle distance between two points, in kilometres.
pub fn haversine_km(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let phi1 = lat1.to_radians();
    let phi2 = lat2.to_radians();
    let d_phi = (lat2 - lat1).to_radians();
    let d_lambda = (lon2 - lon1).to_radians();
    let a = (d_phi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (d_lambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * a.sqrt().min(1.0).asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_distance_at_same_point() {
        assert_eq!(haversine_km(47.6, -122.3, 47.6, -122.3), 0.0);
    }

    #[test]
    fn seattle_to_pittsburgh_is_about_3430_km() {
        let d = haversine_km(47.6062, -122.3321, 40.4406, -79.9959);
        assert!((d - 3430.0).abs() < 30.0, "got {d}");
    }

    #[test]
    fn antipodal_points_are_half_circumference() {
        let d = haversine_km(0.0, 0.0, 0.0, 180.0);
        let half = EARTH_RADIUS_KM * std::f64::consts::PI;
        assert!((d - half).abs() < 1e-6);
    }
}
