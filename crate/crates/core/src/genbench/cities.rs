use super::InstanceMeta;
use crate::hierarchy::AbstractionHierarchy;
use crate::hmm::{sample_sequence, HmmModel, ObservationSequence};

pub const CITIES: usize = 27;
pub const COUNTRIES: usize = 9;
pub const CONTINENTS: usize = 3;
pub const CITY_DAYS: usize = 50;

/// Probability mass of staying put, moving within the country, moving within
/// the continent and changing continent.
pub const CITY_TRANSITION_SPLIT: [f64; 4] = [0.90, 0.07, 0.025, 0.005];

/// Emission mass on a city's own cuisine, on the other cuisines of its
/// country, and on everything else.
pub const CITY_EMISSION_SPLIT: [f64; 3] = [0.6, 0.25, 0.15];

/// A traveller over 27 cities in 9 countries on 3 continents, observed
/// through the cuisine eaten each day.
pub fn generate_city_instance(
    seed: u64,
) -> Result<(HmmModel, AbstractionHierarchy, ObservationSequence), crate::Error> {
    let per_country = CITIES / COUNTRIES;
    let per_continent = CITIES / CONTINENTS;
    let country = |c: usize| c / per_country;
    let continent = |c: usize| c / per_continent;
    let [stay, near, far, abroad] = CITY_TRANSITION_SPLIT;
    let transition = (0..CITIES)
        .map(|i| {
            (0..CITIES)
                .map(|j| {
                    if i == j {
                        stay
                    } else if country(i) == country(j) {
                        near / (per_country - 1) as f64
                    } else if continent(i) == continent(j) {
                        far / (per_continent - per_country) as f64
                    } else {
                        abroad / (CITIES - per_continent) as f64
                    }
                })
                .collect()
        })
        .collect();
    let [own, local, other] = CITY_EMISSION_SPLIT;
    let emission = (0..CITIES)
        .map(|i| {
            (0..CITIES)
                .map(|k| {
                    if k == i {
                        own
                    } else if country(i) == country(k) {
                        local / (per_country - 1) as f64
                    } else {
                        other / (CITIES - per_country) as f64
                    }
                })
                .collect()
        })
        .collect();
    let model = HmmModel::new(transition, emission, vec![1.0 / CITIES as f64; CITIES]);
    let hierarchy = AbstractionHierarchy::new(
        vec![CITIES, COUNTRIES, CONTINENTS],
        vec![
            (0..CITIES).map(country).collect(),
            (0..COUNTRIES).map(|c| c / (COUNTRIES / CONTINENTS)).collect(),
        ],
    )?;
    let (_, obs) = sample_sequence(&model, CITY_DAYS, seed)?;
    Ok((model, hierarchy, obs))
}

pub fn city_meta(seed: u64) -> InstanceMeta {
    InstanceMeta {
        generator: "cities".into(),
        seed,
        len: CITY_DAYS,
        params: serde_json::json!({
            "transition_split": CITY_TRANSITION_SPLIT,
            "emission_split": CITY_EMISSION_SPLIT,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::{build_abstract_models, validate_hierarchy};
    use crate::hmm::{validate_model, viterbi_decode};
    use crate::{cfdp_decode, tav_decode, TavOptions};

    #[test]
    fn shape() {
        let (model, h, obs) = generate_city_instance(1).unwrap();
        assert_eq!(h.level_sizes(), &[27, 9, 3]);
        assert_eq!(obs.len(), 50);
        validate_model(&model).unwrap();
        validate_hierarchy(&h, 27).unwrap();
    }

    #[test]
    fn decoders_agree() {
        for seed in 0..5 {
            let (model, h, obs) = generate_city_instance(seed).unwrap();
            let lm = validate_model(&model).unwrap();
            let stack = build_abstract_models(&lm, &h).unwrap();
            let v = viterbi_decode(&lm, &obs).unwrap();
            let c = cfdp_decode(&stack, &h, &obs).unwrap();
            let t = tav_decode(&stack, &h, &obs, TavOptions::default()).unwrap();
            assert_eq!(v.stats.cells_explored, 1350);
            assert!((c.log_likelihood - v.log_likelihood).abs() < 1e-9);
            assert!((t.log_likelihood - v.log_likelihood).abs() < 1e-9);
        }
    }
}
