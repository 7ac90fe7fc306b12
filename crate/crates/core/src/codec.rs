//! PRLC encoder and receiver-side decoding buffers.
//!
//! A class-`l` packet is a random combination of the first `beta_l` source
//! packets of its generation. The receiver keeps, per generation, one
//! echelon basis per class level so that the cumulative ranks
//! `r_l = rank(rows of class <= l)` are available at all times.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::galois::{EchelonBasis, Elem, Field, FieldMatrix};
use crate::subspace::RankVector;

/// Layer structure and timing of one generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSpec {
    /// Source packets per layer.
    pub alpha: Vec<u32>,
    /// Distortion reduction contributed by each layer.
    pub delta: Vec<f64>,
    /// Playback delay in slots.
    pub playback_delay: u32,
    /// Generation duration in slots.
    pub duration: u32,
}

impl GenerationSpec {
    pub fn new(alpha: Vec<u32>, delta: Vec<f64>, playback_delay: u32, duration: u32) -> Result<Self> {
        let spec = GenerationSpec {
            alpha,
            delta,
            playback_delay,
            duration,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() {
            return Err(Error::domain("a generation needs at least one layer"));
        }
        if self.alpha.iter().any(|&a| a == 0) {
            return Err(Error::domain("every layer needs at least one source packet"));
        }
        if self.delta.len() != self.alpha.len() {
            return Err(Error::DimensionMismatch {
                expected: self.alpha.len(),
                found: self.delta.len(),
            });
        }
        if self.delta.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(Error::domain("distortion reductions must be finite and nonnegative"));
        }
        if self.duration == 0 {
            return Err(Error::domain("generation duration must be positive"));
        }
        Ok(())
    }

    pub fn layers(&self) -> usize {
        self.alpha.len()
    }

    /// Cumulative packet counts `beta_l`.
    pub fn beta(&self) -> Vec<u32> {
        self.alpha
            .iter()
            .scan(0, |acc, &a| {
                *acc += a;
                Some(*acc)
            })
            .collect()
    }

    pub fn total_packets(&self) -> u32 {
        self.alpha.iter().sum()
    }

    /// Cumulative distortion reductions `Delta_0 = 0, Delta_1, ..., Delta_L`.
    pub fn cumulative_delta(&self) -> Vec<f64> {
        std::iter::once(0.0)
            .chain(self.delta.iter().scan(0.0, |acc, &d| {
                *acc += d;
                Some(*acc)
            }))
            .collect()
    }

    /// Decoding deadline of generation `n`.
    pub fn deadline(&self, n: u64) -> u64 {
        self.playback_delay as u64 + n * self.duration as u64
    }
}

/// A coded packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub generation: u64,
    /// Priority class, 1-based.
    pub class: u32,
    /// `beta_L` coding coefficients; entries past `beta_class` are zero.
    pub coefficients: Vec<Elem>,
    pub payload: Vec<Elem>,
}

const WIRE_HEADER: usize = 8 + 2 + 2 + 2;

impl Packet {
    /// Serializes the packet for trace dumps.
    ///
    /// Layout, all little-endian: generation `u64`, class `u16`, coefficient
    /// count `u16`, payload length `u16`, then every coefficient and payload
    /// symbol as `u16`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(WIRE_HEADER + 2 * (self.coefficients.len() + self.payload.len()));
        out.extend_from_slice(&self.generation.to_le_bytes());
        out.extend_from_slice(&(self.class as u16).to_le_bytes());
        out.extend_from_slice(&(self.coefficients.len() as u16).to_le_bytes());
        out.extend_from_slice(&(self.payload.len() as u16).to_le_bytes());
        for s in self.coefficients.iter().chain(&self.payload) {
            out.extend_from_slice(&s.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Packet> {
        let short = || Error::domain("truncated packet");
        if bytes.len() < WIRE_HEADER {
            return Err(short());
        }
        let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
        let generation = u64::from_le_bytes(bytes[0..8].try_into().expect("8 bytes"));
        let class = u16_at(8) as u32;
        let ncoef = u16_at(10) as usize;
        let npay = u16_at(12) as usize;
        if bytes.len() != WIRE_HEADER + 2 * (ncoef + npay) {
            return Err(short());
        }
        let symbols: Vec<Elem> = (0..ncoef + npay).map(|i| u16_at(WIRE_HEADER + 2 * i)).collect();
        Ok(Packet {
            generation,
            class,
            coefficients: symbols[..ncoef].to_vec(),
            payload: symbols[ncoef..].to_vec(),
        })
    }
}

/// Source packets of one generation, one row per source packet.
#[derive(Debug, Clone)]
pub struct GenerationSources {
    pub generation: u64,
    pub data: FieldMatrix,
}

impl GenerationSources {
    pub fn random<R: Rng + ?Sized>(
        field: &Field,
        spec: &GenerationSpec,
        generation: u64,
        payload_len: usize,
        rng: &mut R,
    ) -> Self {
        GenerationSources {
            generation,
            data: FieldMatrix::random(field, spec.total_packets() as usize, payload_len, rng),
        }
    }
}

/// Encodes a fresh class-`class` packet with uniformly drawn coefficients.
pub fn encode_packet<R: Rng + ?Sized>(
    sources: &GenerationSources,
    spec: &GenerationSpec,
    class: u32,
    rng: &mut R,
) -> Result<Packet> {
    let beta = spec.beta();
    if class == 0 || class as usize > beta.len() {
        return Err(Error::domain(format!(
            "class {class} out of range 1..={}",
            beta.len()
        )));
    }
    let total = spec.total_packets() as usize;
    if sources.data.rows() != total {
        return Err(Error::DimensionMismatch {
            expected: total,
            found: sources.data.rows(),
        });
    }
    let field = sources.data.field();
    let width = beta[class as usize - 1] as usize;
    let mut coefficients = vec![0; total];
    let mut payload = vec![0; sources.data.cols()];
    for (i, c) in coefficients.iter_mut().take(width).enumerate() {
        *c = field.random(rng);
        field.axpy(&mut payload, *c, sources.data.row(i));
    }
    Ok(Packet {
        generation: sources.generation,
        class,
        coefficients,
        payload,
    })
}

#[derive(Debug, Clone)]
struct StoredRow {
    class: u32,
    coefficients: Vec<Elem>,
    payload: Vec<Elem>,
}

/// Receiver state for a single generation.
#[derive(Debug, Clone)]
pub struct GenerationBuffer {
    beta: Vec<u32>,
    levels: Vec<EchelonBasis>,
    rows: Vec<StoredRow>,
    received: usize,
}

impl GenerationBuffer {
    pub fn new(field: &Field, spec: &GenerationSpec) -> Self {
        let beta = spec.beta();
        let total = spec.total_packets() as usize;
        GenerationBuffer {
            levels: beta.iter().map(|_| EchelonBasis::new(field, total)).collect(),
            beta,
            rows: Vec::new(),
            received: 0,
        }
    }

    pub fn rank_vector(&self) -> RankVector {
        RankVector(self.levels.iter().map(|b| b.rank() as u32).collect())
    }

    pub fn decodable_layers(&self) -> usize {
        self.rank_vector().decodable_layers(&self.beta)
    }

    /// Rows kept in the buffer, in ascending class order.
    pub fn stored_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn received(&self) -> usize {
        self.received
    }

    /// Inserts the packet; it is kept iff it raises some cumulative rank.
    pub fn receive(&mut self, p: &Packet) -> Result<bool> {
        let total = *self.beta.last().expect("at least one layer") as usize;
        if p.class == 0 || p.class as usize > self.beta.len() {
            return Err(Error::domain(format!("class {} out of range", p.class)));
        }
        if p.coefficients.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                found: p.coefficients.len(),
            });
        }
        let width = self.beta[p.class as usize - 1] as usize;
        if p.coefficients[width..].iter().any(|&c| c != 0) {
            return Err(Error::domain("coefficients beyond the class width must be zero"));
        }
        self.received += 1;
        let mut innovative = false;
        for basis in &mut self.levels[p.class as usize - 1..] {
            innovative |= basis.insert(&p.coefficients)?;
        }
        if innovative {
            let at = self.rows.partition_point(|r| r.class <= p.class);
            self.rows.insert(
                at,
                StoredRow {
                    class: p.class,
                    coefficients: p.coefficients.clone(),
                    payload: p.payload.clone(),
                },
            );
        }
        Ok(innovative)
    }

    /// Recovers the source packets of layers `1..=layers`.
    pub fn decode(&self, layers: usize) -> Result<Vec<Vec<Elem>>> {
        if layers == 0 {
            return Ok(Vec::new());
        }
        if layers > self.beta.len() {
            return Err(Error::domain(format!("generation has only {} layers", self.beta.len())));
        }
        let want = self.beta[layers - 1] as usize;
        // A lower level can be short of full rank while a higher one is full,
        // so solve at the first full level at or above the request.
        let Some(level) = (layers - 1..self.beta.len()).find(|&l| self.levels[l].rank() == self.beta[l] as usize)
        else {
            return Err(Error::RankDeficient {
                rank: self.levels[layers - 1].rank(),
                needed: want,
            });
        };
        let need = self.beta[level] as usize;
        let usable: Vec<&StoredRow> = self.rows.iter().filter(|r| r.class as usize <= level + 1).collect();
        let payload_len = usable.first().map_or(0, |r| r.payload.len());
        let field = self.levels[0].field().clone();
        let mut aug = FieldMatrix::zeros(&field, 0, need + payload_len);
        for r in &usable {
            let mut row = r.coefficients[..need].to_vec();
            row.extend_from_slice(&r.payload);
            aug.push_row(&row)?;
        }
        let pivots = aug.reduce();
        if pivots.iter().take_while(|&&c| c < need).count() < need {
            return Err(Error::RankDeficient { rank: pivots.len(), needed: need });
        }
        Ok((0..want).map(|i| aug.row(i)[need..].to_vec()).collect())
    }
}

/// Receiver decoding buffers for all generations it has seen.
#[derive(Debug, Clone)]
pub struct DecodingBuffer {
    field: Field,
    spec: GenerationSpec,
    generations: HashMap<u64, GenerationBuffer>,
    expired_before: u64,
    stale: usize,
}

impl DecodingBuffer {
    pub fn new(field: &Field, spec: &GenerationSpec) -> Self {
        DecodingBuffer {
            field: field.clone(),
            spec: spec.clone(),
            generations: HashMap::new(),
            expired_before: 0,
            stale: 0,
        }
    }

    /// Feeds one packet. Packets of expired generations are dropped, counted
    /// and reported as [`Error::StalePacket`].
    pub fn receive_packet(&mut self, p: &Packet) -> Result<bool> {
        if p.generation < self.expired_before {
            self.stale += 1;
            return Err(Error::StalePacket(p.generation as usize));
        }
        let (field, spec) = (&self.field, &self.spec);
        self.generations
            .entry(p.generation)
            .or_insert_with(|| GenerationBuffer::new(field, spec))
            .receive(p)
    }

    pub fn generation(&self, m: u64) -> Option<&GenerationBuffer> {
        self.generations.get(&m)
    }

    pub fn rank_vector(&self, m: u64) -> RankVector {
        self.generations
            .get(&m)
            .map_or_else(|| RankVector::empty(self.spec.layers()), |g| g.rank_vector())
    }

    pub fn decodable_layers(&self, m: u64) -> usize {
        self.generations.get(&m).map_or(0, |g| g.decodable_layers())
    }

    pub fn decode_generation(&self, m: u64, layers: usize) -> Result<Vec<Vec<Elem>>> {
        match self.generations.get(&m) {
            Some(g) => g.decode(layers),
            None if layers == 0 => Ok(Vec::new()),
            None => Err(Error::RankDeficient {
                rank: 0,
                needed: self.spec.beta()[layers.min(self.spec.layers()) - 1] as usize,
            }),
        }
    }

    /// Drops every generation below `m`; later packets for them are stale.
    pub fn expire_before(&mut self, m: u64) {
        self.expired_before = self.expired_before.max(m);
        let cutoff = self.expired_before;
        self.generations.retain(|&g, _| g >= cutoff);
    }

    pub fn stale_packets(&self) -> usize {
        self.stale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_layer() -> GenerationSpec {
        GenerationSpec::new(vec![3, 2], vec![11.0, 9.0], 10, 5).unwrap()
    }

    #[test]
    fn spec_derived_quantities() {
        let s = two_layer();
        assert_eq!(s.beta(), vec![3, 5]);
        assert_eq!(s.cumulative_delta(), vec![0.0, 11.0, 20.0]);
        assert_eq!(s.deadline(0), 10);
        assert_eq!(s.deadline(3), 25);
        assert!(GenerationSpec::new(vec![3, 0], vec![1.0, 1.0], 0, 5).is_err());
        assert!(GenerationSpec::new(vec![3], vec![1.0, 1.0], 0, 5).is_err());
    }

    #[test]
    fn class_structure_of_headers() {
        let f = Field::new(256).unwrap();
        let spec = GenerationSpec::new(vec![3, 2, 2], vec![1.0; 3], 10, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = GenerationSources::random(&f, &spec, 0, 16, &mut rng);
        for _ in 0..50 {
            let p = encode_packet(&src, &spec, 2, &mut rng).unwrap();
            assert_eq!(p.coefficients.len(), 7);
            assert!(p.coefficients[5..].iter().all(|&c| c == 0));
        }
        assert!(encode_packet(&src, &spec, 4, &mut rng).is_err());
        assert!(encode_packet(&src, &spec, 0, &mut rng).is_err());
    }

    #[test]
    fn single_source_packet_is_scaled_copy() {
        let f = Field::new(256).unwrap();
        let spec = GenerationSpec::new(vec![1, 2], vec![1.0, 1.0], 0, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let src = GenerationSources::random(&f, &spec, 0, 8, &mut rng);
        let p = encode_packet(&src, &spec, 1, &mut rng).unwrap();
        let expected: Vec<Elem> = src.data.row(0).iter().map(|&x| f.mul(x, p.coefficients[0])).collect();
        assert_eq!(p.payload, expected);
    }

    #[test]
    fn wire_round_trip() {
        let p = Packet {
            generation: 0x0102030405060708,
            class: 2,
            coefficients: vec![1, 2, 300, 0, 0],
            payload: vec![9, 8, 7],
        };
        let bytes = p.to_bytes();
        assert_eq!(&bytes[..8], &[8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(Packet::from_bytes(&bytes).unwrap(), p);
        assert!(Packet::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn duplicates_and_first_packets() {
        let f = Field::new(256).unwrap();
        let spec = two_layer();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let src = GenerationSources::random(&f, &spec, 7, 16, &mut rng);
        let mut buf = DecodingBuffer::new(&f, &spec);
        assert_eq!(buf.decodable_layers(7), 0);
        let p = loop {
            let p = encode_packet(&src, &spec, 1, &mut rng).unwrap();
            if p.coefficients.iter().any(|&c| c != 0) {
                break p;
            }
        };
        assert!(buf.receive_packet(&p).unwrap());
        assert_eq!(buf.rank_vector(7), RankVector(vec![1, 1]));
        assert!(!buf.receive_packet(&p).unwrap());
        assert_eq!(buf.rank_vector(7), RankVector(vec![1, 1]));
    }

    #[test]
    fn decode_round_trip_and_guards() {
        let f = Field::new(256).unwrap();
        let spec = two_layer();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let src = GenerationSources::random(&f, &spec, 0, 16, &mut rng);
        let mut buf = DecodingBuffer::new(&f, &spec);
        assert!(buf.decode_generation(0, 0).unwrap().is_empty());
        for _ in 0..3 {
            buf.receive_packet(&encode_packet(&src, &spec, 1, &mut rng).unwrap()).unwrap();
        }
        buf.receive_packet(&encode_packet(&src, &spec, 2, &mut rng).unwrap()).unwrap();
        assert_eq!(buf.rank_vector(0), RankVector(vec![3, 4]));
        assert!(matches!(buf.decode_generation(0, 2), Err(Error::RankDeficient { .. })));
        let base = buf.decode_generation(0, 1).unwrap();
        for (i, row) in base.iter().enumerate() {
            assert_eq!(row.as_slice(), src.data.row(i));
        }
        buf.receive_packet(&encode_packet(&src, &spec, 2, &mut rng).unwrap()).unwrap();
        assert_eq!(buf.decodable_layers(0), 2);
        let all = buf.decode_generation(0, 2).unwrap();
        for (i, row) in all.iter().enumerate() {
            assert_eq!(row.as_slice(), src.data.row(i));
        }
    }

    #[test]
    fn stale_packets_are_counted() {
        let f = Field::new(2).unwrap();
        let spec = two_layer();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let src = GenerationSources::random(&f, &spec, 1, 4, &mut rng);
        let mut buf = DecodingBuffer::new(&f, &spec);
        buf.expire_before(2);
        let p = encode_packet(&src, &spec, 1, &mut rng).unwrap();
        assert!(matches!(buf.receive_packet(&p), Err(Error::StalePacket(1))));
        assert_eq!(buf.stale_packets(), 1);
    }
}
