use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::ServiceError;

/// Picks the `size` least-viewed videos and returns them in random order.
///
/// `videos` pairs each id with its current view count. Equal counts are
/// ordered uniformly at random, so ties are broken fairly.
pub fn allocate_playlist<R: Rng + ?Sized>(
    videos: &[(String, u64)],
    size: usize,
    rng: &mut R,
) -> Result<Vec<String>, ServiceError> {
    if size == 0 {
        return Err(ServiceError::Parameter("playlist size must be at least 1".into()));
    }
    if size > videos.len() {
        return Err(ServiceError::Parameter(format!(
            "playlist of {size} requested from a catalog of {}",
            videos.len()
        )));
    }
    let mut order: Vec<&(String, u64)> = videos.iter().collect();
    order.shuffle(rng);
    order.sort_by_key(|(_, count)| *count);
    let mut playlist: Vec<String> = order[..size].iter().map(|(id, _)| id.clone()).collect();
    playlist.shuffle(rng);
    Ok(playlist)
}
