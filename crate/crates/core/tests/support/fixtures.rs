//! Projection reference points frozen from an independent geodesy library
//! (PROJ 9.5 via pyproj, ellipsoid-only definitions, no datum shift).

// (lon, lat, x, y)
pub const UTM18N: &[(f64, f64, f64, f64)] = &[
    (-76.0, 39.0, 413407.3219726734, 4317252.16462973),
    (-75.0, 0.0, 500000.0, 0.0),
    (-78.5, 45.2, 225108.83617586002, 5011129.579575098),
    (-73.2, 61.0, 597346.0212179961, 6764124.8996983515),
    (-80.9, 25.7, -92607.51468559878, 2855724.2373282616),
    (-75.3, -12.0, 467342.1357498173, -1326571.411977908),
];
pub const UTM19N: &[(f64, f64, f64, f64)] = &[
    (-69.0, 0.0, 500000.0, 0.0),
    (-72.66, 40.7, 190765.17096530204, 4511900.485060195),
    (-70.0, 42.0, 417181.93075160054, 4650259.84757734),
    (-66.1, 47.3, 719229.6446394039, 5242581.962943333),
    (-71.5, 10.2, 226098.41181936028, 1128584.0186150693),
];
pub const UTM33S: &[(f64, f64, f64, f64)] = &[
    (15.0, -30.0, 500000.0000000015, 6681214.647418793),
    (12.5, -1.0, 221765.83654015977, 9889363.851617513),
    (17.9, -55.0, 685481.6786277748, 3901362.0844453415),
    (14.2, -20.3, 416473.4226680897, 7755117.810428736),
    (10.0, -40.0, 73106.69773300056, 5560253.082866251),
];
pub const ALBERS_5070: &[(f64, f64, f64, f64)] = &[
    (-96.0, 23.0, 0.0, 0.0),
    (-74.0, 40.7, 1827122.1735598098, 2177832.001080314),
    (-87.6, 41.9, 691124.5183564071, 2130289.693748611),
    (-118.2, 34.0, -2017140.173938623, 1451658.3368640793),
    (-122.4, 37.8, -2273032.7875102824, 1958176.391292746),
    (-72.5, 41.0, 1941009.307507316, 2240209.6926784064),
    (-68.0, 47.0, 2108589.831937593, 2980588.53390783),
];
pub const WEB_MERCATOR: &[(f64, f64, f64, f64)] = &[
    (0.0, 0.0, 0.0, 0.0),
    (180.0, 0.0, 20037508.342789244, 0.0),
    (-74.0, 40.7, -8237642.318702244, 4968191.930188206),
    (139.7, 35.7, 15551332.863820316, 4259419.965547919),
    (-58.4, -34.6, -6501058.262327177, -4109654.7335526645),
    (10.0, 80.0, 1113194.9079327357, 15538711.09630922),
];
// UTM 19N (easting, northing) -> EPSG:5070 (x, y)
pub const UTM19_TO_ALBERS: &[(f64, f64, f64, f64)] = &[
    (186585.0, 4505085.0, 1934200.7416044022, 2196600.069147119),
    (423315.0, 4745415.0, 2091235.7190164267, 2495333.7455031313),
    (186585.0, 4745415.0, 1865577.9654680463, 2428569.825150772),
    (423315.0, 4505085.0, 2159318.4187317453, 2262930.201831871),
    (300000.0, 4600000.0, 2015007.3738759945, 2320246.616778143),
];
