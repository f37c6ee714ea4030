//! Standard MIDI File reading and writing.
//!
//! Only the events the pipeline needs are modeled: note on/off, program
//! change, track name, key signature, set tempo and end of track. Everything
//! else is skipped on read and never written. Files are written as format 1.
//!
//! A track chunk that carries channel events on several channels is split
//! into one [`Track`] per channel, so format-0 files come out with their
//! parts separated. Chunks without any channel events (conductor tracks) do
//! not produce a `Track`.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

/// Tempo assumed when a file has no set-tempo event (120 bpm).
pub const DEFAULT_TEMPO: u32 = 500_000;
/// Resolution used for synthesized songs.
pub const DEFAULT_TICKS_PER_QUARTER: u16 = 480;
/// Zero-based General MIDI percussion channel (channel 10).
pub const DRUM_CHANNEL: u8 = 9;

const MAX_DELTA: u64 = 0x0FFF_FFFF;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MidiError {
    #[error("malformed MIDI file: {0}")]
    MalformedFile(String),
    #[error("unsupported MIDI file: {0}")]
    UnsupportedFormat(String),
    #[error("invalid song: {0}")]
    InvalidSong(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Note {
    pub pitch: u8,
    /// Absolute onset in ticks.
    pub onset: u64,
    /// Length in ticks, always positive.
    pub duration: u64,
    pub velocity: u8,
    pub track_index: usize,
}

impl Note {
    pub fn end(&self) -> u64 {
        self.onset + self.duration
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Track {
    pub name: String,
    pub program: u8,
    /// Zero-based MIDI channel the track plays on.
    pub channel: u8,
    pub is_drum: bool,
    /// Sorted by onset, ties broken by ascending pitch.
    pub notes: Vec<Note>,
}

impl Track {
    pub fn new(name: impl Into<String>, program: u8, channel: u8) -> Self {
        Track {
            name: name.into(),
            program,
            channel,
            is_drum: channel == DRUM_CHANNEL,
            notes: Vec::new(),
        }
    }

    pub fn sort_notes(&mut self) {
        self.notes.sort_by_key(|n| (n.onset, n.pitch));
    }

    pub fn mean_pitch(&self) -> Option<f64> {
        if self.notes.is_empty() {
            return None;
        }
        let sum: u64 = self.notes.iter().map(|n| u64::from(n.pitch)).sum();
        Some(sum as f64 / self.notes.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Major,
    Minor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct KeySignature {
    /// Tonic pitch class of the key as named (A minor has tonic 9).
    pub tonic_pc: u8,
    pub mode: Mode,
    pub tick: u64,
}

impl KeySignature {
    /// Tonic of the major key sharing this signature.
    pub fn major_tonic(&self) -> u8 {
        match self.mode {
            Mode::Major => self.tonic_pc,
            Mode::Minor => relative_major(self.tonic_pc),
        }
    }

    fn from_meta(sharps: i8, minor: bool, tick: u64) -> Self {
        // Each sharp moves the major tonic up a fifth.
        let major = (i32::from(sharps) * 7).rem_euclid(12) as u8;
        if minor {
            KeySignature { tonic_pc: (major + 9) % 12, mode: Mode::Minor, tick }
        } else {
            KeySignature { tonic_pc: major, mode: Mode::Major, tick }
        }
    }

    fn sharps(&self) -> i8 {
        // 7 is its own inverse mod 12.
        let sf = (i32::from(self.major_tonic()) * 7).rem_euclid(12);
        (if sf > 6 { sf - 12 } else { sf }) as i8
    }
}

/// Tonic of the relative major of a minor key.
pub fn relative_major(minor_tonic_pc: u8) -> u8 {
    (minor_tonic_pc % 12 + 3) % 12
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MidiSong {
    pub ticks_per_quarter: u16,
    pub tempo_us_per_quarter: u32,
    pub tracks: Vec<Track>,
    /// Sorted by tick.
    pub key_events: Vec<KeySignature>,
}

impl Default for MidiSong {
    fn default() -> Self {
        MidiSong::new(DEFAULT_TICKS_PER_QUARTER)
    }
}

impl MidiSong {
    pub fn new(ticks_per_quarter: u16) -> Self {
        MidiSong {
            ticks_per_quarter,
            tempo_us_per_quarter: DEFAULT_TEMPO,
            tracks: Vec::new(),
            key_events: Vec::new(),
        }
    }

    /// Appends a track, fixing up the notes' `track_index` and order.
    pub fn push_track(&mut self, mut track: Track) -> usize {
        let index = self.tracks.len();
        for note in &mut track.notes {
            note.track_index = index;
        }
        track.sort_notes();
        self.tracks.push(track);
        index
    }

    pub fn note_count(&self) -> usize {
        self.tracks.iter().map(|t| t.notes.len()).sum()
    }

    /// Converts ticks to seconds using the song's (first) tempo.
    pub fn ticks_to_seconds(&self, ticks: u64) -> f64 {
        ticks as f64 * f64::from(self.tempo_us_per_quarter)
            / (f64::from(self.ticks_per_quarter) * 1e6)
    }

    /// Returns a copy with every pitch shifted, or `None` if a pitch would
    /// leave the MIDI range. Drum tracks are left alone.
    pub fn transposed(&self, semitones: i32) -> Option<MidiSong> {
        let mut out = self.clone();
        for track in out.tracks.iter_mut().filter(|t| !t.is_drum) {
            for note in &mut track.notes {
                let p = i32::from(note.pitch) + semitones;
                if !(0..=127).contains(&p) {
                    return None;
                }
                note.pitch = p as u8;
            }
            track.sort_notes();
        }
        for key in &mut out.key_events {
            key.tonic_pc = (i32::from(key.tonic_pc) + semitones).rem_euclid(12) as u8;
        }
        Some(out)
    }

    pub fn validate(&self) -> Result<(), MidiError> {
        let invalid = |msg: String| Err(MidiError::InvalidSong(msg));
        if self.ticks_per_quarter == 0 || self.ticks_per_quarter > 0x7FFF {
            return invalid(format!("ticks per quarter {} out of range", self.ticks_per_quarter));
        }
        if self.tempo_us_per_quarter == 0 || self.tempo_us_per_quarter > 0xFF_FFFF {
            return invalid(format!("tempo {} out of range", self.tempo_us_per_quarter));
        }
        for key in &self.key_events {
            if key.tonic_pc > 11 {
                return invalid(format!("key tonic {} out of range", key.tonic_pc));
            }
        }
        for (i, track) in self.tracks.iter().enumerate() {
            if track.program > 127 {
                return invalid(format!("track {i}: program {} out of range", track.program));
            }
            if track.channel > 15 {
                return invalid(format!("track {i}: channel {} out of range", track.channel));
            }
            if !track.is_drum && track.channel == DRUM_CHANNEL {
                return invalid(format!("track {i}: non-drum track on the drum channel"));
            }
            for note in &track.notes {
                if note.track_index != i {
                    return invalid(format!("track {i}: note claims track {}", note.track_index));
                }
                if note.pitch > 127 {
                    return invalid(format!("track {i}: pitch {} out of range", note.pitch));
                }
                if note.velocity == 0 || note.velocity > 127 {
                    return invalid(format!("track {i}: velocity {} out of range", note.velocity));
                }
                if note.duration == 0 {
                    return invalid(format!("track {i}: zero-length note at tick {}", note.onset));
                }
                if note.onset.checked_add(note.duration).is_none() {
                    return invalid(format!("track {i}: note end overflows"));
                }
            }
        }
        Ok(())
    }
}

/// First key event's major tonic, with minor keys mapped to their relative
/// major. C major at tick 0 is a common default written by sequencers and is
/// treated as "no key information". Later key events are ignored.
pub fn extract_key_meta(song: &MidiSong) -> Option<u8> {
    let first = song.key_events.first()?;
    if first.mode == Mode::Major && first.tonic_pc == 0 && first.tick == 0 {
        return None;
    }
    Some(first.major_tonic())
}

// ---------------------------------------------------------------------------
// Reading

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8]) -> Self {
        Cursor { data, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.data.len() - self.pos
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], MidiError> {
        if self.remaining() < n {
            return Err(MidiError::MalformedFile(format!(
                "unexpected end of data at byte {} (wanted {n})",
                self.pos
            )));
        }
        let slice = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, MidiError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, MidiError> {
        let b = self.take(2)?;
        Ok(u16::from_be_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, MidiError> {
        let b = self.take(4)?;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn varlen(&mut self) -> Result<u64, MidiError> {
        let mut value = 0u64;
        for _ in 0..4 {
            let byte = self.u8()?;
            value = (value << 7) | u64::from(byte & 0x7F);
            if byte & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(MidiError::MalformedFile("variable-length quantity longer than 4 bytes".into()))
    }

    fn chunk(&mut self) -> Result<([u8; 4], &'a [u8]), MidiError> {
        let id = self.take(4)?;
        let len = self.u32()? as usize;
        let body = self.take(len).map_err(|_| {
            MidiError::MalformedFile(format!(
                "chunk {:?} declares {len} bytes but only {} remain",
                String::from_utf8_lossy(id),
                self.remaining()
            ))
        })?;
        Ok(([id[0], id[1], id[2], id[3]], body))
    }
}

#[derive(Default)]
struct ChannelPart {
    program: Option<u8>,
    notes: Vec<Note>,
}

#[derive(Default)]
struct ChunkEvents {
    name: Option<String>,
    parts: BTreeMap<u8, ChannelPart>,
    tempos: Vec<(u64, u32)>,
    keys: Vec<KeySignature>,
}

fn parse_track_chunk(body: &[u8]) -> Result<ChunkEvents, MidiError> {
    let mut cur = Cursor::new(body);
    let mut out = ChunkEvents::default();
    let mut open: HashMap<(u8, u8), (u64, u8)> = HashMap::new();
    let mut running: Option<u8> = None;
    let mut tick = 0u64;

    fn close(part: &mut ChannelPart, pitch: u8, onset: u64, velocity: u8, at: u64) {
        if at > onset {
            part.notes.push(Note { pitch, onset, duration: at - onset, velocity, track_index: 0 });
        }
    }

    while cur.remaining() > 0 {
        tick += cur.varlen()?;
        let first = cur.u8()?;
        match first {
            0xFF => {
                running = None;
                let kind = cur.u8()?;
                let len = cur.varlen()? as usize;
                let data = cur.take(len)?;
                match kind {
                    0x03 if out.name.is_none() => {
                        out.name = Some(String::from_utf8_lossy(data).into_owned());
                    }
                    0x51 if len == 3 => {
                        let tempo = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        if tempo > 0 {
                            out.tempos.push((tick, tempo));
                        }
                    }
                    0x59 if len == 2 => {
                        let sharps = data[0] as i8;
                        if !(-7..=7).contains(&sharps) {
                            return Err(MidiError::MalformedFile(format!(
                                "key signature with {sharps} sharps"
                            )));
                        }
                        out.keys.push(KeySignature::from_meta(sharps, data[1] == 1, tick));
                    }
                    0x2F => break,
                    _ => {}
                }
            }
            0xF0 | 0xF7 => {
                running = None;
                let len = cur.varlen()? as usize;
                cur.take(len)?;
            }
            0xF1..=0xFE => {
                return Err(MidiError::MalformedFile(format!(
                    "system message {first:#04x} inside a track"
                )));
            }
            _ => {
                let (status, data0) = if first & 0x80 != 0 {
                    running = Some(first);
                    (first, cur.u8()?)
                } else {
                    let status = running.ok_or_else(|| {
                        MidiError::MalformedFile("data byte without running status".into())
                    })?;
                    (status, first)
                };
                let channel = status & 0x0F;
                let kind = status & 0xF0;
                let data1 = if matches!(kind, 0xC0 | 0xD0) { None } else { Some(cur.u8()?) };
                if data0 > 0x7F || data1.is_some_and(|b| b > 0x7F) {
                    return Err(MidiError::MalformedFile("data byte with high bit set".into()));
                }
                let part = out.parts.entry(channel).or_default();
                match (kind, data1) {
                    (0x90, Some(vel)) if vel > 0 => {
                        if let Some((onset, v)) = open.insert((channel, data0), (tick, vel)) {
                            close(part, data0, onset, v, tick);
                        }
                    }
                    (0x80, _) | (0x90, _) => {
                        if let Some((onset, v)) = open.remove(&(channel, data0)) {
                            close(part, data0, onset, v, tick);
                        }
                    }
                    (0xC0, _) => {
                        part.program.get_or_insert(data0);
                    }
                    _ => {}
                }
            }
        }
    }

    let mut dangling: Vec<_> = open.into_iter().collect();
    dangling.sort_unstable();
    for ((channel, pitch), (onset, vel)) in dangling {
        if let Some(part) = out.parts.get_mut(&channel) {
            close(part, pitch, onset, vel, tick);
        }
    }
    Ok(out)
}

/// Parses a format 0 or 1 Standard MIDI File.
pub fn parse_midi(bytes: &[u8]) -> Result<MidiSong, MidiError> {
    let mut cur = Cursor::new(bytes);
    if bytes.len() < 4 || &bytes[..4] != b"MThd" {
        return Err(MidiError::MalformedFile("missing MThd header".into()));
    }
    let (_, header) = cur.chunk()?;
    if header.len() < 6 {
        return Err(MidiError::MalformedFile("header chunk shorter than 6 bytes".into()));
    }
    let mut hcur = Cursor::new(header);
    let format = hcur.u16()?;
    let _declared_tracks = hcur.u16()?;
    let division = hcur.u16()?;
    match format {
        0 | 1 => {}
        2 => return Err(MidiError::UnsupportedFormat("SMF format 2".into())),
        other => return Err(MidiError::MalformedFile(format!("unknown SMF format {other}"))),
    }
    if division & 0x8000 != 0 {
        return Err(MidiError::UnsupportedFormat("SMPTE time division".into()));
    }
    if division == 0 {
        return Err(MidiError::MalformedFile("zero ticks per quarter".into()));
    }

    let mut song = MidiSong::new(division);
    let mut tempos = Vec::new();
    while cur.remaining() > 0 {
        let (id, body) = cur.chunk()?;
        if &id != b"MTrk" {
            continue;
        }
        let events = parse_track_chunk(body)?;
        tempos.extend(events.tempos);
        song.key_events.extend(events.keys);
        for (channel, part) in events.parts {
            let mut track = Track::new(
                events.name.clone().unwrap_or_default(),
                part.program.unwrap_or(0),
                channel,
            );
            track.notes = part.notes;
            song.push_track(track);
        }
    }
    // Stable sorts keep file order for events sharing a tick.
    song.key_events.sort_by_key(|k| k.tick);
    tempos.sort_by_key(|&(tick, _)| tick);
    if let Some(&(_, tempo)) = tempos.first() {
        song.tempo_us_per_quarter = tempo;
    }
    Ok(song)
}

// ---------------------------------------------------------------------------
// Writing

struct TimedEvent {
    tick: u64,
    order: u8,
    bytes: Vec<u8>,
}

fn push_varlen(out: &mut Vec<u8>, mut value: u64) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7F) as u8;
        value >>= 7;
        n += 1;
        if value == 0 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

fn meta(kind: u8, data: &[u8]) -> Vec<u8> {
    let mut bytes = vec![0xFF, kind];
    push_varlen(&mut bytes, data.len() as u64);
    bytes.extend_from_slice(data);
    bytes
}

fn encode_chunk(mut events: Vec<TimedEvent>) -> Result<Vec<u8>, MidiError> {
    events.sort_by_key(|e| (e.tick, e.order));
    let mut body = Vec::new();
    let mut last = 0u64;
    for event in &events {
        let delta = event.tick - last;
        if delta > MAX_DELTA {
            return Err(MidiError::InvalidSong(format!(
                "gap of {delta} ticks exceeds the largest encodable delta"
            )));
        }
        push_varlen(&mut body, delta);
        body.extend_from_slice(&event.bytes);
        last = event.tick;
    }
    body.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);
    let mut chunk = Vec::with_capacity(body.len() + 8);
    chunk.extend_from_slice(b"MTrk");
    chunk.extend_from_slice(&(body.len() as u32).to_be_bytes());
    chunk.extend_from_slice(&body);
    Ok(chunk)
}

/// Serializes a song as an SMF format 1 file. Tempo and key signatures go
/// into the first track chunk.
pub fn write_midi(song: &MidiSong) -> Result<Vec<u8>, MidiError> {
    song.validate()?;
    let chunk_count = song.tracks.len().max(1);
    if chunk_count > usize::from(u16::MAX) {
        return Err(MidiError::InvalidSong("too many tracks".into()));
    }

    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&1u16.to_be_bytes());
    out.extend_from_slice(&(chunk_count as u16).to_be_bytes());
    out.extend_from_slice(&song.ticks_per_quarter.to_be_bytes());

    for i in 0..chunk_count {
        let mut events = Vec::new();
        if i == 0 {
            events.push(TimedEvent {
                tick: 0,
                order: 0,
                bytes: meta(0x51, &song.tempo_us_per_quarter.to_be_bytes()[1..]),
            });
            for key in &song.key_events {
                let minor = u8::from(key.mode == Mode::Minor);
                events.push(TimedEvent {
                    tick: key.tick,
                    order: 0,
                    bytes: meta(0x59, &[key.sharps() as u8, minor]),
                });
            }
        }
        if let Some(track) = song.tracks.get(i) {
            let channel = if track.is_drum { DRUM_CHANNEL } else { track.channel };
            if !track.name.is_empty() {
                events.push(TimedEvent { tick: 0, order: 0, bytes: meta(0x03, track.name.as_bytes()) });
            }
            events.push(TimedEvent { tick: 0, order: 1, bytes: vec![0xC0 | channel, track.program] });
            for note in &track.notes {
                events.push(TimedEvent {
                    tick: note.end(),
                    order: 2,
                    bytes: vec![0x80 | channel, note.pitch, 0x40],
                });
                events.push(TimedEvent {
                    tick: note.onset,
                    order: 3,
                    bytes: vec![0x90 | channel, note.pitch, note.velocity],
                });
            }
        }
        out.extend(encode_chunk(events)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn note(pitch: u8, onset: u64, duration: u64, track_index: usize) -> Note {
        Note { pitch, onset, duration, velocity: 100, track_index }
    }

    fn single_note_file() -> Vec<u8> {
        let body: &[u8] = &[
            0x00, 0x90, 60, 100, // note on C4
            0x83, 0x60, 0x80, 60, 0, // 480 ticks later, note off
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let mut file = b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x01\xE0".to_vec();
        file.extend_from_slice(b"MTrk");
        file.extend_from_slice(&(body.len() as u32).to_be_bytes());
        file.extend_from_slice(body);
        file
    }

    #[test]
    fn parses_hand_built_format0_file() {
        let song = parse_midi(&single_note_file()).unwrap();
        assert_eq!(song.ticks_per_quarter, 480);
        assert_eq!(song.tracks.len(), 1);
        assert_eq!(song.tracks[0].notes, vec![note(60, 0, 480, 0)]);
    }

    #[test]
    fn velocity_zero_note_on_is_note_off_with_running_status() {
        let body: &[u8] = &[
            0x00, 0x90, 60, 90, //
            0x10, 64, 90, // running status note-on E4
            0x10, 60, 0, // running status, velocity 0 closes C4
            0x10, 64, 0, //
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let mut file = b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x00\x60".to_vec();
        file.extend_from_slice(b"MTrk");
        file.extend_from_slice(&(body.len() as u32).to_be_bytes());
        file.extend_from_slice(body);
        let song = parse_midi(&file).unwrap();
        let notes: Vec<_> = song.tracks[0].notes.iter().map(|n| (n.pitch, n.onset, n.duration)).collect();
        assert_eq!(notes, vec![(60, 0, 32), (64, 16, 32)]);
    }

    #[test]
    fn repeated_note_on_closes_the_earlier_note() {
        let body: &[u8] = &[
            0x00, 0x90, 60, 90, //
            0x20, 0x90, 60, 70, // retrigger at 32
            0x20, 0x80, 60, 0, // off at 64
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let mut file = b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x00\x60".to_vec();
        file.extend_from_slice(b"MTrk");
        file.extend_from_slice(&(body.len() as u32).to_be_bytes());
        file.extend_from_slice(body);
        let song = parse_midi(&file).unwrap();
        let notes: Vec<_> = song.tracks[0].notes.iter().map(|n| (n.onset, n.duration, n.velocity)).collect();
        assert_eq!(notes, vec![(0, 32, 90), (32, 32, 70)]);
    }

    #[test]
    fn key_signature_meta_is_decoded() {
        let mut song = MidiSong::default();
        song.key_events.push(KeySignature { tonic_pc: 0, mode: Mode::Major, tick: 0 });
        let mut t = Track::new("x", 0, 0);
        t.notes.push(note(60, 0, 10, 0));
        song.push_track(t);
        let parsed = parse_midi(&write_midi(&song).unwrap()).unwrap();
        assert_eq!(parsed.key_events, vec![KeySignature { tonic_pc: 0, mode: Mode::Major, tick: 0 }]);
    }

    #[test]
    fn key_signature_sharps_map_to_tonics() {
        assert_eq!(KeySignature::from_meta(1, false, 0).tonic_pc, 7);
        assert_eq!(KeySignature::from_meta(-1, false, 0).tonic_pc, 5);
        assert_eq!(KeySignature::from_meta(0, true, 0).tonic_pc, 9);
        assert_eq!(KeySignature::from_meta(1, true, 0).tonic_pc, 4);
        assert_eq!(KeySignature::from_meta(-3, true, 0).tonic_pc, 0);
        for sf in -7..=7i8 {
            for minor in [false, true] {
                let key = KeySignature::from_meta(sf, minor, 0);
                let back = KeySignature::from_meta(key.sharps(), minor, 0);
                assert_eq!(key, back);
            }
        }
    }

    #[test]
    fn key_meta_extraction() {
        let mut song = MidiSong::default();
        assert_eq!(extract_key_meta(&song), None);
        song.key_events = vec![KeySignature { tonic_pc: 9, mode: Mode::Minor, tick: 480 }];
        assert_eq!(extract_key_meta(&song), Some(0));
        song.key_events = vec![KeySignature { tonic_pc: 0, mode: Mode::Major, tick: 0 }];
        assert_eq!(extract_key_meta(&song), None);
        song.key_events = vec![KeySignature { tonic_pc: 0, mode: Mode::Major, tick: 1 }];
        assert_eq!(extract_key_meta(&song), Some(0));
        song.key_events = vec![
            KeySignature { tonic_pc: 4, mode: Mode::Minor, tick: 0 },
            KeySignature { tonic_pc: 2, mode: Mode::Major, tick: 960 },
        ];
        assert_eq!(extract_key_meta(&song), Some(7));
    }

    #[test]
    fn relative_major_is_a_bijection() {
        let mut seen = [false; 12];
        for minor in 0..12u8 {
            seen[relative_major(minor) as usize] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn empty_song_writes_a_single_chunk() {
        let bytes = write_midi(&MidiSong::default()).unwrap();
        assert_eq!(&bytes[..4], b"MThd");
        assert_eq!(u16::from_be_bytes([bytes[10], bytes[11]]), 1);
        assert!(bytes.ends_with(&[0x00, 0xFF, 0x2F, 0x00]));
        let parsed = parse_midi(&bytes).unwrap();
        assert!(parsed.tracks.is_empty());
    }

    #[test]
    fn triad_round_trips_as_simultaneous_notes() {
        let mut song = MidiSong::default();
        let mut t = Track::new("Piano", 0, 0);
        for p in [60, 64, 67] {
            t.notes.push(note(p, 0, 480, 0));
        }
        song.push_track(t);
        let parsed = parse_midi(&write_midi(&song).unwrap()).unwrap();
        assert_eq!(parsed.tracks[0].notes.len(), 3);
        assert!(parsed.tracks[0].notes.iter().all(|n| n.onset == 0 && n.duration == 480));
    }

    #[test]
    fn format0_channels_become_tracks() {
        let body: &[u8] = &[
            0x00, 0xFF, 0x03, 2, b'm', b'x', //
            0x00, 0xC1, 33, // bass program on channel 1
            0x00, 0x90, 72, 90, //
            0x00, 0x91, 36, 90, //
            0x00, 0x99, 38, 90, // snare on drum channel
            0x40, 0x80, 72, 0, //
            0x00, 0x81, 36, 0, //
            0x00, 0x89, 38, 0, //
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let mut file = b"MThd\x00\x00\x00\x06\x00\x00\x00\x01\x00\x60".to_vec();
        file.extend_from_slice(b"MTrk");
        file.extend_from_slice(&(body.len() as u32).to_be_bytes());
        file.extend_from_slice(body);
        let song = parse_midi(&file).unwrap();
        assert_eq!(song.tracks.len(), 3);
        assert_eq!(song.tracks[1].program, 33);
        assert!(song.tracks[2].is_drum);
        assert!(!song.tracks[0].is_drum && !song.tracks[1].is_drum);
        let written = parse_midi(&write_midi(&song).unwrap()).unwrap();
        assert_eq!(written, song);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse_midi(b"RIFF...."), Err(MidiError::MalformedFile(_))));
        let mut truncated = single_note_file();
        truncated.truncate(truncated.len() - 3);
        assert!(matches!(parse_midi(&truncated), Err(MidiError::MalformedFile(_))));
        let mut format2 = single_note_file();
        format2[9] = 2;
        assert!(matches!(parse_midi(&format2), Err(MidiError::UnsupportedFormat(_))));
        let mut smpte = single_note_file();
        smpte[12] = 0xE7;
        assert!(matches!(parse_midi(&smpte), Err(MidiError::UnsupportedFormat(_))));
    }

    #[test]
    fn unknown_events_and_chunks_are_skipped() {
        let body: &[u8] = &[
            0x00, 0xF0, 0x03, 0x7E, 0x7F, 0xF7, // sysex
            0x00, 0xB0, 7, 100, // controller
            0x00, 0xFF, 0x01, 3, b'a', b'b', b'c', // text meta
            0x00, 0x90, 60, 100, //
            0x10, 0xE0, 0, 64, // pitch bend
            0x10, 0x80, 60, 0, //
            0x00, 0xFF, 0x2F, 0x00,
        ];
        let mut file = b"MThd\x00\x00\x00\x06\x00\x01\x00\x01\x00\x60".to_vec();
        file.extend_from_slice(b"XFIH\x00\x00\x00\x02ab");
        file.extend_from_slice(b"MTrk");
        file.extend_from_slice(&(body.len() as u32).to_be_bytes());
        file.extend_from_slice(body);
        let song = parse_midi(&file).unwrap();
        assert_eq!(song.tracks[0].notes.len(), 1);
        assert_eq!(song.tracks[0].notes[0].duration, 32);
    }

    #[test]
    fn invalid_songs_are_rejected_by_the_writer() {
        let mut song = MidiSong::default();
        let mut t = Track::new("a", 0, 0);
        t.notes.push(note(60, 0, 0, 0));
        song.push_track(t);
        assert!(matches!(write_midi(&song), Err(MidiError::InvalidSong(_))));
        song.tracks[0].notes[0].duration = 5;
        song.tracks[0].notes[0].track_index = 3;
        assert!(matches!(write_midi(&song), Err(MidiError::InvalidSong(_))));
    }

    #[test]
    fn tempo_is_preserved_and_used_for_seconds() {
        let mut song = MidiSong::new(96);
        song.tempo_us_per_quarter = 600_000;
        let parsed = parse_midi(&write_midi(&song).unwrap()).unwrap();
        assert_eq!(parsed.tempo_us_per_quarter, 600_000);
        assert!((parsed.ticks_to_seconds(96) - 0.6).abs() < 1e-12);
    }

    #[test]
    fn varlen_encoding_matches_reference_values() {
        for (value, expected) in [
            (0u64, vec![0x00]),
            (0x7F, vec![0x7F]),
            (0x80, vec![0x81, 0x00]),
            (0x3FFF, vec![0xFF, 0x7F]),
            (0x0FFF_FFFF, vec![0xFF, 0xFF, 0xFF, 0x7F]),
        ] {
            let mut out = Vec::new();
            push_varlen(&mut out, value);
            assert_eq!(out, expected);
            assert_eq!(Cursor::new(&out).varlen().unwrap(), value);
        }
    }
}
