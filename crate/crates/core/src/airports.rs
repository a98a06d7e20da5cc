//! Static airport and carrier directory.
//!
//! Conversational requests name cities and airlines, while the models key on
//! numeric airport ids and carrier codes. The directory bridges the two.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Airport {
    /// Airport id as used in the on-time performance data.
    pub id: i64,
    pub code: &'static str,
    pub city: &'static str,
    pub latitude: f64,
    pub longitude: f64,
    /// World area code of the airport's state.
    pub wac: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Carrier {
    pub code: &'static str,
    pub name: &'static str,
}

macro_rules! airport {
    ($id:expr, $code:expr, $city:expr, $lat:expr, $lon:expr, $wac:expr) => {
        Airport {
            id: $id,
            code: $code,
            city: $city,
            latitude: $lat,
            longitude: $lon,
            wac: $wac,
        }
    };
}

pub const AIRPORTS: &[Airport] = &[
    airport!(10397, "ATL", "Atlanta", 33.6407, -84.4277, 34),
    airport!(12892, "LAX", "Los Angeles", 33.9416, -118.4085, 91),
    airport!(13930, "ORD", "Chicago", 41.9742, -87.9073, 41),
    airport!(11298, "DFW", "Dallas", 32.8998, -97.0403, 74),
    airport!(11292, "DEN", "Denver", 39.8561, -104.6737, 82),
    airport!(12478, "JFK", "New York", 40.6413, -73.7781, 22),
    airport!(14771, "SFO", "San Francisco", 37.6213, -122.3790, 91),
    airport!(14747, "SEA", "Seattle", 47.4502, -122.3088, 93),
    airport!(12889, "LAS", "Las Vegas", 36.0840, -115.1537, 85),
    airport!(13204, "MCO", "Orlando", 28.4312, -81.3081, 33),
    airport!(11057, "CLT", "Charlotte", 35.2144, -80.9473, 36),
    airport!(14107, "PHX", "Phoenix", 33.4342, -112.0116, 81),
    airport!(12266, "IAH", "Houston", 29.9902, -95.3368, 74),
    airport!(13303, "MIA", "Miami", 25.7959, -80.2870, 33),
    airport!(10721, "BOS", "Boston", 42.3656, -71.0096, 13),
    airport!(13487, "MSP", "Minneapolis", 44.8848, -93.2223, 63),
    airport!(11433, "DTW", "Detroit", 42.2162, -83.3554, 43),
    airport!(14100, "PHL", "Philadelphia", 39.8744, -75.2424, 23),
    airport!(10821, "BWI", "Baltimore", 39.1774, -76.6684, 35),
    airport!(14869, "SLC", "Salt Lake City", 40.7899, -111.9791, 87),
    airport!(14679, "SAN", "San Diego", 32.7338, -117.1933, 91),
    airport!(10423, "AUS", "Austin", 30.1975, -97.6664, 74),
    airport!(15304, "TPA", "Tampa", 27.9755, -82.5332, 33),
    airport!(14057, "PDX", "Portland", 45.5898, -122.5951, 92),
    airport!(12173, "HNL", "Honolulu", 21.3187, -157.9225, 2),
    airport!(11278, "DCA", "Washington", 38.8512, -77.0402, 38),
    airport!(10693, "BNA", "Nashville", 36.1263, -86.6774, 54),
    airport!(15016, "STL", "St. Louis", 38.7487, -90.3700, 64),
    airport!(13495, "MSY", "New Orleans", 29.9934, -90.2580, 72),
    airport!(14730, "SDF", "Louisville", 38.1744, -85.7360, 52),
    airport!(11042, "CLE", "Cleveland", 41.4058, -81.8539, 44),
    airport!(14492, "RDU", "Raleigh", 35.8801, -78.7880, 36),
    airport!(13871, "OMA", "Omaha", 41.3032, -95.8941, 65),
    airport!(14893, "SMF", "Sacramento", 38.6951, -121.5908, 91),
    airport!(14831, "SJC", "San Jose", 37.3639, -121.9289, 91),
    airport!(12451, "JAX", "Jacksonville", 30.4941, -81.6879, 33),
    airport!(13198, "MCI", "Kansas City", 39.2976, -94.7139, 62),
    airport!(11066, "CMH", "Columbus", 39.9980, -82.8919, 44),
    airport!(12339, "IND", "Indianapolis", 39.7173, -86.2944, 45),
    airport!(13342, "MKE", "Milwaukee", 42.9472, -87.8966, 45),
];

pub const CARRIERS: &[Carrier] = &[
    Carrier {
        code: "AA",
        name: "American Airlines",
    },
    Carrier {
        code: "AS",
        name: "Alaska Airlines",
    },
    Carrier {
        code: "B6",
        name: "JetBlue Airways",
    },
    Carrier {
        code: "DL",
        name: "Delta Air Lines",
    },
    Carrier {
        code: "F9",
        name: "Frontier Airlines",
    },
    Carrier {
        code: "NK",
        name: "Spirit Airlines",
    },
    Carrier {
        code: "UA",
        name: "United Airlines",
    },
    Carrier {
        code: "WN",
        name: "Southwest Airlines",
    },
];

pub fn airport_by_id(id: i64) -> Option<&'static Airport> {
    AIRPORTS.iter().find(|a| a.id == id)
}

/// Resolves free text to an airport: a numeric id, an IATA code or a city
/// name, case-insensitively.
pub fn resolve_airport(text: &str) -> Option<&'static Airport> {
    let text = text.trim();
    if let Ok(id) = text.parse::<i64>() {
        return airport_by_id(id);
    }
    AIRPORTS
        .iter()
        .find(|a| a.code.eq_ignore_ascii_case(text) || a.city.eq_ignore_ascii_case(text))
}

/// Resolves an airline code or name ("DL", "Delta", "delta air lines").
pub fn resolve_carrier(text: &str) -> Option<&'static Carrier> {
    let text = text.trim().to_lowercase();
    if text.is_empty() {
        return None;
    }
    CARRIERS.iter().find(|c| {
        let name = c.name.to_lowercase();
        c.code.eq_ignore_ascii_case(&text)
            || name == text
            || name.split_whitespace().next() == Some(text.as_str())
    })
}

/// Great-circle distance in statute miles.
pub fn great_circle_miles(a: &Airport, b: &Airport) -> f64 {
    const EARTH_RADIUS_MILES: f64 = 3958.8;
    let (lat1, lon1) = (a.latitude.to_radians(), a.longitude.to_radians());
    let (lat2, lon2) = (b.latitude.to_radians(), b.longitude.to_radians());
    let h = ((lat2 - lat1) / 2.0).sin().powi(2)
        + lat1.cos() * lat2.cos() * ((lon2 - lon1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_MILES * h.sqrt().asin()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_and_codes_are_unique() {
        let mut ids: Vec<_> = AIRPORTS.iter().map(|a| a.id).collect();
        ids.sort_unstable();
        ids.dedup();
        assert_eq!(ids.len(), AIRPORTS.len());
        let mut cities: Vec<_> = AIRPORTS.iter().map(|a| a.city).collect();
        cities.sort_unstable();
        cities.dedup();
        assert_eq!(cities.len(), AIRPORTS.len());
    }

    #[test]
    fn resolves_by_id_code_and_city() {
        assert_eq!(resolve_airport("10721").unwrap().code, "BOS");
        assert_eq!(resolve_airport("bos").unwrap().id, 10721);
        assert_eq!(resolve_airport(" Boston ").unwrap().id, 10721);
        assert!(resolve_airport("Springfield").is_none());
    }

    #[test]
    fn resolves_carriers() {
        assert_eq!(resolve_carrier("Delta").unwrap().code, "DL");
        assert_eq!(resolve_carrier("dl").unwrap().code, "DL");
        assert_eq!(resolve_carrier("united airlines").unwrap().code, "UA");
        assert!(resolve_carrier("").is_none());
        assert!(resolve_carrier("Pan Am").is_none());
    }

    #[test]
    fn boston_to_los_angeles_distance() {
        let bos = resolve_airport("BOS").unwrap();
        let lax = resolve_airport("LAX").unwrap();
        // Published BOS-LAX great-circle distance is 2611 miles.
        assert!((great_circle_miles(bos, lax) - 2611.0).abs() < 10.0);
        assert_eq!(great_circle_miles(bos, bos), 0.0);
    }
}
