use super::RouteQuery;

/// Distance-to-goal threshold (m) for promoting a background vehicle.
pub const DEFAULT_CBV_DELTA: f64 = 15.0;

/// Selects critical background vehicles.
///
/// A vehicle qualifies when its distance-to-goal differs from the AV's by less than
/// `delta`. Qualifying vehicles are ranked by ascending difference (lower id first on
/// ties) and the first `max_cbv` are returned.
pub fn identify_cbv<Id: Copy + Ord>(
    av: &RouteQuery,
    bvs: &[(Id, RouteQuery)],
    delta: f64,
    max_cbv: usize,
) -> Vec<Id> {
    let mut ranked: Vec<(f64, Id)> = bvs
        .iter()
        .filter_map(|(id, q)| {
            let diff = (q.distance - av.distance).abs();
            (diff < delta).then_some((diff, *id))
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.into_iter().take(max_cbv).map(|(_, id)| id).collect()
}
