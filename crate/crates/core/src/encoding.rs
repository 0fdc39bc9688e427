//! Spatial encoding of an election as a square-wave band.
//!
//! Each voter owns an equal slice of the arena width. An up vote ("Clanton")
//! sits `amplitude` pixels above the centre row (smaller y), a down vote
//! ("Tramp") the same distance below. Neighbouring voters with opposite
//! votes are joined by a vertical connector on the column where the next
//! voter's slice begins; the last voter joins the first across the seam.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;

use crate::agents::Particle;
use crate::error::{Error, Result};
use crate::lattice::Cell;

/// One of the two candidates on the ballot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Candidate {
    /// Drawn above the centre line. Displayed as "Clanton", written `C`.
    Up,
    /// Drawn below the centre line. Displayed as "Tramp", written `T`.
    Down,
}

impl Candidate {
    pub fn name(self) -> &'static str {
        match self {
            Candidate::Up => "Clanton",
            Candidate::Down => "Tramp",
        }
    }

    pub fn code(self) -> char {
        match self {
            Candidate::Up => 'C',
            Candidate::Down => 'T',
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Candidate::Up => Candidate::Down,
            Candidate::Down => Candidate::Up,
        }
    }
}

impl fmt::Display for Candidate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An ordered ballot of an odd number of votes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Election {
    votes: Vec<Candidate>,
}

impl Election {
    pub fn new(votes: Vec<Candidate>) -> Result<Self> {
        if votes.is_empty() || votes.len() % 2 == 0 {
            return Err(Error::Encoding(format!(
                "an election needs an odd number of voters, got {}",
                votes.len()
            )));
        }
        Ok(Self { votes })
    }

    /// Every vote drawn independently and uniformly.
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || n % 2 == 0 {
            return Err(Error::Encoding(format!(
                "an election needs an odd number of voters, got {n}"
            )));
        }
        let votes = (0..n)
            .map(|_| if rng.gen::<bool>() { Candidate::Up } else { Candidate::Down })
            .collect();
        Ok(Self { votes })
    }

    pub fn votes(&self) -> &[Candidate] {
        &self.votes
    }

    pub fn len(&self) -> usize {
        self.votes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.votes.is_empty()
    }

    pub fn up_count(&self) -> usize {
        self.votes.iter().filter(|&&v| v == Candidate::Up).count()
    }

    /// Every vote flipped.
    pub fn reversed(&self) -> Self {
        Self {
            votes: self.votes.iter().map(|v| v.opposite()).collect(),
        }
    }

    /// Number of places where a vote differs from its successor, counting
    /// the wrap from the last voter to the first.
    pub fn cyclic_changes(&self) -> usize {
        let n = self.votes.len();
        (0..n).filter(|&i| self.votes[i] != self.votes[(i + 1) % n]).count()
    }
}

impl fmt::Display for Election {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.votes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{}", v.code())?;
        }
        Ok(())
    }
}

impl FromStr for Election {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let votes = s
            .trim()
            .split(',')
            .map(|tok| match tok.trim() {
                "C" | "c" => Ok(Candidate::Up),
                "T" | "t" => Ok(Candidate::Down),
                other => Err(Error::Encoding(format!("unknown vote token {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Election::new(votes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncodingParams {
    pub arena_width: usize,
    pub arena_height: usize,
    /// Vertical offset of a vote from the centre row, in pixels.
    pub amplitude: usize,
    /// Stroke width of the drawn band (odd, pixels).
    pub band_width: usize,
    pub population: usize,
    /// Attractant added per band pixel per hold step.
    pub stimulus_amount: f64,
    pub hold_steps: u64,
}

impl Default for EncodingParams {
    fn default() -> Self {
        Self {
            arena_width: 600,
            arena_height: 300,
            amplitude: 50,
            band_width: 5,
            population: 3000,
            stimulus_amount: 2.55,
            hold_steps: 20,
        }
    }
}

impl EncodingParams {
    /// Pixel row of the centre line.
    pub fn centre_row(&self) -> usize {
        self.arena_height / 2
    }

    /// Centre line in continuous coordinates (middle of the centre row).
    pub fn centre_y(&self) -> f64 {
        self.centre_row() as f64 + 0.5
    }

    pub fn validate(&self, voters: usize) -> Result<()> {
        if voters == 0 || voters > self.arena_width {
            return Err(Error::Parameter(format!(
                "{voters} voters do not fit in an arena {} pixels wide",
                self.arena_width
            )));
        }
        if self.amplitude == 0 {
            return Err(Error::Parameter("amplitude must be positive".into()));
        }
        if self.band_width == 0 || self.band_width % 2 == 0 {
            return Err(Error::Parameter(format!(
                "band width must be odd, got {}",
                self.band_width
            )));
        }
        let half = self.band_width / 2;
        if self.centre_row() < self.amplitude + half
            || self.centre_row() + self.amplitude + half >= self.arena_height
        {
            return Err(Error::Parameter(format!(
                "amplitude {} with band width {} leaves the {}-pixel arena",
                self.amplitude, self.band_width, self.arena_height
            )));
        }
        if !self.stimulus_amount.is_finite() || self.stimulus_amount < 0.0 {
            return Err(Error::Parameter(format!(
                "stimulus amount must be finite and non-negative, got {}",
                self.stimulus_amount
            )));
        }
        Ok(())
    }

    fn vote_row(&self, vote: Candidate) -> i64 {
        let c = self.centre_row() as i64;
        match vote {
            Candidate::Up => c - self.amplitude as i64,
            Candidate::Down => c + self.amplitude as i64,
        }
    }

    /// First column of each voter's slice; entry `n` is the arena width.
    pub fn voter_boundaries(&self, voters: usize) -> Vec<i64> {
        let spacing = self.arena_width as f64 / voters as f64;
        (0..=voters).map(|i| (i as f64 * spacing).round() as i64).collect()
    }
}

/// The square-wave centreline traced as an ordered, 8-connected pixel path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StimulusPolyline {
    pixels: Vec<Cell>,
}

impl StimulusPolyline {
    pub fn from_pixels(pixels: Vec<Cell>) -> Self {
        Self { pixels }
    }

    /// Rasterises the election's square wave.
    pub fn build(election: &Election, params: &EncodingParams) -> Result<Self> {
        params.validate(election.len())?;
        let votes = election.votes();
        let n = votes.len();
        let bounds = params.voter_boundaries(n);
        let mut pixels = Vec::with_capacity(params.arena_width + n * 2 * params.amplitude);

        for i in 0..n {
            let row = params.vote_row(votes[i]);
            for x in bounds[i]..bounds[i + 1] {
                pixels.push(Cell::new(x, row));
            }
            let next_row = params.vote_row(votes[(i + 1) % n]);
            if next_row != row {
                // The connector stands on the first column of the next slice,
                // which for the last voter is column 0 across the seam.
                let x = bounds[i + 1] % params.arena_width as i64;
                let dir = (next_row - row).signum();
                let mut y = row;
                while y != next_row {
                    pixels.push(Cell::new(x, y));
                    y += dir;
                }
            }
        }
        Ok(Self { pixels })
    }

    /// Path pixels in trace order.
    pub fn pixels(&self) -> &[Cell] {
        &self.pixels
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// The path drawn with a square brush `width` pixels across, as a sorted
    /// set of distinct in-bounds pixels. Width 1 returns the path's own pixels.
    pub fn stroke(&self, width: usize, arena_width: usize, arena_height: usize) -> Self {
        let half = (width / 2) as i64;
        let mut out = Vec::with_capacity(self.pixels.len() * width * 2);
        for p in &self.pixels {
            for dy in -half..=half {
                let y = p.y + dy;
                if y < 0 || y >= arena_height as i64 {
                    continue;
                }
                for dx in -half..=half {
                    out.push(Cell::new((p.x + dx).rem_euclid(arena_width as i64), y));
                }
            }
        }
        out.sort_unstable_by_key(|c| (c.y, c.x));
        out.dedup();
        Self { pixels: out }
    }

    /// Pixels of the band used for both the stimulus and the seeding.
    pub fn band(&self, params: &EncodingParams) -> Self {
        self.stroke(params.band_width, params.arena_width, params.arena_height)
    }
}

/// Places `count` particles on distinct pixels drawn uniformly without
/// replacement, each at its pixel centre with a uniformly random heading.
pub fn seed_population<R: Rng + ?Sized>(
    band: &StimulusPolyline,
    count: usize,
    rng: &mut R,
) -> Result<Vec<Particle>> {
    let available = band.len();
    if count > available {
        return Err(Error::Seeding { requested: count, available });
    }
    let chosen = index::sample(rng, available, count);
    Ok(chosen
        .into_iter()
        .map(|i| {
            let px = band.pixels()[i];
            let heading = rng.gen_range(0.0..360.0);
            Particle::new(px.x as f64 + 0.5, px.y as f64 + 0.5, heading)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use Candidate::{Down, Up};

    fn params(w: usize, h: usize, a: usize) -> EncodingParams {
        EncodingParams {
            arena_width: w,
            arena_height: h,
            amplitude: a,
            band_width: 1,
            ..EncodingParams::default()
        }
    }

    /// Independent rasteriser: horizontal and vertical segments from explicit
    /// endpoints, collected into a set.
    fn segment_set(segments: &[((i64, i64), (i64, i64))]) -> HashSet<Cell> {
        let mut set = HashSet::new();
        for &((x0, y0), (x1, y1)) in segments {
            for x in x0.min(x1)..=x0.max(x1) {
                for y in y0.min(y1)..=y0.max(y1) {
                    set.insert(Cell::new(x, y));
                }
            }
        }
        set
    }

    #[test]
    fn unanimous_vote_is_a_flat_line() {
        let p = params(60, 40, 10);
        let e = Election::new(vec![Up; 5]).unwrap();
        let line = StimulusPolyline::build(&e, &p).unwrap();
        assert_eq!(line.len(), 60);
        assert!(line.pixels().iter().all(|c| c.y == 10));
        let cols: HashSet<i64> = line.pixels().iter().map(|c| c.x).collect();
        assert_eq!(cols.len(), 60);
    }

    #[test]
    fn three_voter_square_wave_matches_segments() {
        let p = params(300, 300, 50);
        let e = Election::new(vec![Up, Up, Down]).unwrap();
        let line = StimulusPolyline::build(&e, &p).unwrap();
        let got: HashSet<Cell> = line.pixels().iter().copied().collect();
        assert_eq!(got.len(), line.len(), "path repeats a pixel");
        let expected = segment_set(&[
            ((0, 100), (199, 100)),
            ((200, 200), (299, 200)),
            // connector at the start of voter 2, rising from voter 1's row
            ((200, 100), (200, 199)),
            // seam connector on column 0, from voter 2's row up to voter 0's
            ((0, 200), (0, 101)),
        ]);
        assert_eq!(got, expected);
    }

    #[test]
    fn path_is_eight_connected_and_closed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = EncodingParams { band_width: 1, ..EncodingParams::default() };
        for _ in 0..50 {
            let e = Election::random(9, &mut rng).unwrap();
            let line = StimulusPolyline::build(&e, &p).unwrap();
            let px = line.pixels();
            for i in 0..px.len() {
                let (a, b) = (px[i], px[(i + 1) % px.len()]);
                let dx = (a.x - b.x).rem_euclid(600).min((b.x - a.x).rem_euclid(600));
                assert!(dx <= 1 && (a.y - b.y).abs() <= 1, "gap between {a:?} and {b:?}");
            }
        }
    }

    #[test]
    fn every_column_covered_once_by_horizontals() {
        let p = params(600, 300, 50);
        for n in [1usize, 3, 7, 9, 19, 599] {
            let b = p.voter_boundaries(n);
            assert_eq!(b[0], 0);
            assert_eq!(b[n], 600);
            assert!(b.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn alternating_votes_connector_count() {
        let p = params(600, 300, 50);
        let votes: Vec<_> = (0..9).map(|i| if i % 2 == 0 { Up } else { Down }).collect();
        let e = Election::new(votes).unwrap();
        // Odd alternation starts and ends on the same candidate: no seam connector.
        assert_eq!(e.cyclic_changes(), 8);
        let line = StimulusPolyline::build(&e, &p).unwrap();
        assert_eq!(line.len(), 600 + 8 * 100);
    }

    #[test]
    fn rejects_even_or_empty_elections() {
        assert!(matches!(Election::new(vec![]), Err(Error::Encoding(_))));
        assert!(matches!(Election::new(vec![Up, Down]), Err(Error::Encoding(_))));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(Election::random(4, &mut rng).is_err());
        assert!(Election::random(0, &mut rng).is_err());
    }

    #[test]
    fn election_text_format() {
        let e: Election = "C,C,T,C,T,T,C,C,C".parse().unwrap();
        assert_eq!(e.up_count(), 6);
        assert_eq!(e.to_string(), "C,C,T,C,T,T,C,C,C");
        assert!("C,T".parse::<Election>().is_err());
        assert!("C,X,T".parse::<Election>().is_err());
    }

    #[test]
    fn random_elections_reproducible_and_fair() {
        let a = Election::random(9, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = Election::random(9, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);

        let single = Election::random(1, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(single.len(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut ups = [0usize; 9];
        let draws = 10_000;
        for _ in 0..draws {
            let e = Election::random(9, &mut rng).unwrap();
            for (i, v) in e.votes().iter().enumerate() {
                if *v == Up {
                    ups[i] += 1;
                }
            }
        }
        for u in ups {
            let rate = u as f64 / draws as f64;
            assert!((rate - 0.5).abs() <= 0.02, "up rate {rate}");
        }
    }

    #[test]
    fn seeding_edge_cases() {
        let p = EncodingParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = Election::random(9, &mut rng).unwrap();
        let band = StimulusPolyline::build(&e, &p).unwrap().band(&p);

        assert!(seed_population(&band, 0, &mut rng).unwrap().is_empty());

        let all = seed_population(&band, band.len(), &mut rng).unwrap();
        let cells: HashSet<_> = all.iter().map(|q| q.cell()).collect();
        let pixels: HashSet<_> = band.pixels().iter().map(|c| (c.x as usize, c.y as usize)).collect();
        assert_eq!(cells, pixels);

        match seed_population(&band, band.len() + 1, &mut rng) {
            Err(Error::Seeding { requested, available }) => {
                assert_eq!(available, band.len());
                assert_eq!(requested, band.len() + 1);
            }
            other => panic!("expected seeding error, got {other:?}"),
        }
    }

    #[test]
    fn default_band_takes_full_population() {
        let p = EncodingParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let e = Election::random(9, &mut rng).unwrap();
            let band = StimulusPolyline::build(&e, &p).unwrap().band(&p);
            let particles = seed_population(&band, 3000, &mut rng).unwrap();
            assert_eq!(particles.len(), 3000);
            let cells: HashSet<_> = particles.iter().map(|q| q.cell()).collect();
            assert_eq!(cells.len(), 3000);
            let pixels: HashSet<_> =
                band.pixels().iter().map(|c| (c.x as usize, c.y as usize)).collect();
            assert!(cells.is_subset(&pixels));
        }
    }

    #[test]
    fn unanimous_band_holds_default_population() {
        let p = EncodingParams::default();
        let e = Election::new(vec![Down; 9]).unwrap();
        let band = StimulusPolyline::build(&e, &p).unwrap().band(&p);
        assert!(band.len() >= p.population);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn election() -> impl Strategy<Value = Election> {
            (0usize..10)
                .prop_flat_map(|k| prop::collection::vec(any::<bool>(), 2 * k + 1))
                .prop_map(|bits| {
                    Election::new(bits.into_iter().map(|b| if b { Up } else { Down }).collect())
                        .unwrap()
                })
        }

        proptest! {
            #[test]
            fn connectors_match_cyclic_changes(e in election()) {
                let p = params(120, 80, 20);
                let line = StimulusPolyline::build(&e, &p).unwrap();
                // Each connector contributes 2·amplitude pixels off the vote rows.
                prop_assert_eq!(line.len(), 120 + e.cyclic_changes() * 40);
                let again = StimulusPolyline::build(&e, &p).unwrap();
                prop_assert_eq!(&line, &again);
                for c in line.pixels() {
                    prop_assert!(c.y >= 20 && c.y <= 60);
                }
            }

            #[test]
            fn reversed_votes_mirror_the_band(e in election(), width in prop::sample::select(vec![1usize, 3, 5])) {
                let p = EncodingParams { band_width: width, ..params(120, 81, 20) };
                let a = StimulusPolyline::build(&e, &p).unwrap().band(&p);
                let b = StimulusPolyline::build(&e.reversed(), &p).unwrap().band(&p);
                let c = p.centre_row() as i64;
                let mirrored: HashSet<Cell> =
                    a.pixels().iter().map(|q| Cell::new(q.x, 2 * c - q.y)).collect();
                let other: HashSet<Cell> = b.pixels().iter().copied().collect();
                prop_assert_eq!(mirrored, other);
            }
        }
    }
}
